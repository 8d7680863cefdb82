//! Strategy-to-process assignment.
//!
//! A plan is a binary `m x p` matrix saying which strategy governs which
//! business process. [`evaluate_plan`] prices it, [`check_budget`] tests the
//! resource ceiling, and [`optimize_assignment`] finds the cheapest plan for a
//! coverage rule. [`brute_force_assignment`] enumerates every plan and is
//! kept as the reference for the optimizer.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest search space [`brute_force_assignment`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

/// Strategy and process labels with the cost of applying each strategy to
/// each process (thousand currency units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub strategies: Vec<String>,
    pub processes: Vec<String>,
    /// `costs[i][j]`: strategy `i` on process `j`.
    pub costs: Vec<Vec<f64>>,
}

impl CostTable {
    pub fn new(strategies: Vec<String>, processes: Vec<String>, costs: Vec<Vec<f64>>) -> Result<CostTable> {
        let t = CostTable {
            strategies,
            processes,
            costs,
        };
        t.check()?;
        Ok(t)
    }

    /// Labels `s0..`, `p0..` for a bare cost matrix.
    pub fn from_costs(costs: Vec<Vec<f64>>) -> Result<CostTable> {
        let m = costs.len();
        let p = costs.first().map_or(0, Vec::len);
        CostTable::new(
            (0..m).map(|i| format!("s{i}")).collect(),
            (0..p).map(|j| format!("p{j}")).collect(),
            costs,
        )
    }

    pub fn m(&self) -> usize {
        self.strategies.len()
    }

    pub fn p(&self) -> usize {
        self.processes.len()
    }

    fn check(&self) -> Result<()> {
        let (m, p) = (self.m(), self.p());
        if m == 0 || p == 0 {
            return Err(Error::Dimension("need at least one strategy and one process".into()));
        }
        if self.costs.len() != m || self.costs.iter().any(|r| r.len() != p) {
            return Err(Error::Dimension(format!("cost matrix is not {m}x{p}")));
        }
        if let Some(c) = self.costs.iter().flatten().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::validation(
                None,
                Some("cost"),
                format!("cost {c} must be finite and non-negative"),
            ));
        }
        Ok(())
    }
}

/// A cost table, an assignment over it, and the budget `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyModel {
    pub table: CostTable,
    /// `assign[i][j]`: strategy `i` governs process `j`.
    pub assign: Vec<Vec<bool>>,
    pub budget: f64,
}

impl StrategyModel {
    pub fn new(table: CostTable, assign: Vec<Vec<bool>>, budget: f64) -> Result<StrategyModel> {
        let mdl = StrategyModel { table, assign, budget };
        mdl.check()?;
        Ok(mdl)
    }

    pub fn unassigned(table: CostTable, budget: f64) -> Result<StrategyModel> {
        let assign = vec![vec![false; table.p()]; table.m()];
        StrategyModel::new(table, assign, budget)
    }

    fn check(&self) -> Result<()> {
        self.table.check()?;
        if self.assign.len() != self.table.m() || self.assign.iter().any(|r| r.len() != self.table.p()) {
            return Err(Error::Dimension(format!(
                "assignment is not {}x{}",
                self.table.m(),
                self.table.p()
            )));
        }
        if self.budget.is_nan() || self.budget < 0.0 {
            return Err(Error::validation(None, Some("budget"), "budget must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageRule {
    /// Every process is governed by exactly one strategy.
    #[default]
    EachProcessExactlyOne,
    EachProcessAtLeastOne,
    /// No coverage requirement; the cheapest plan selects nothing.
    Free,
}

impl FromStr for CoverageRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "each_process_exactly_one" => Ok(CoverageRule::EachProcessExactlyOne),
            "each_process_at_least_one" => Ok(CoverageRule::EachProcessAtLeastOne),
            "free" => Ok(CoverageRule::Free),
            other => Err(Error::Config(format!("unknown coverage rule \"{other}\""))),
        }
    }
}

impl fmt::Display for CoverageRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoverageRule::EachProcessExactlyOne => "each_process_exactly_one",
            CoverageRule::EachProcessAtLeastOne => "each_process_at_least_one",
            CoverageRule::Free => "free",
        })
    }
}

/// Plan cost: the sum of `costs[i][j]` over assigned pairs, row-major.
pub fn evaluate_plan(mdl: &StrategyModel) -> Result<f64> {
    mdl.check()?;
    Ok(plan_cost(&mdl.table.costs, &mdl.assign))
}

fn plan_cost(costs: &[Vec<f64>], assign: &[Vec<bool>]) -> f64 {
    costs
        .iter()
        .zip(assign)
        .flat_map(|(c, a)| c.iter().zip(a))
        .filter(|(_, on)| **on)
        .map(|(c, _)| *c)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetReport {
    pub base_cost: f64,
    pub plan_cost: f64,
    pub total: f64,
    pub budget: f64,
    /// `budget - total`; negative when infeasible.
    pub slack: f64,
    pub feasible: bool,
}

/// Tests `base_cost + V <= C`.
pub fn check_budget(mdl: &StrategyModel, base_cost: f64) -> Result<BudgetReport> {
    let plan_cost = evaluate_plan(mdl)?;
    let total = base_cost + plan_cost;
    Ok(BudgetReport {
        base_cost,
        plan_cost,
        total,
        budget: mdl.budget,
        slack: mdl.budget - total,
        feasible: total <= mdl.budget,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Optimized {
    Feasible { assign: Vec<Vec<bool>>, objective: f64 },
    Infeasible { unconstrained_min: f64 },
}

impl Optimized {
    pub fn objective(&self) -> Option<f64> {
        match self {
            Optimized::Feasible { objective, .. } => Some(*objective),
            Optimized::Infeasible { .. } => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Optimized::Feasible { .. })
    }

    /// Builds the model for a feasible outcome.
    pub fn into_model(self, table: CostTable, budget: f64) -> Option<StrategyModel> {
        match self {
            Optimized::Feasible { assign, .. } => Some(StrategyModel { table, assign, budget }),
            Optimized::Infeasible { .. } => None,
        }
    }
}

fn finish(assign: Vec<Vec<bool>>, objective: f64, budget: Option<f64>) -> Optimized {
    match budget {
        Some(c) if objective > c => Optimized::Infeasible {
            unconstrained_min: objective,
        },
        _ => Optimized::Feasible { assign, objective },
    }
}

/// Cheapest plan under `rule`, ties broken toward the lowest strategy index.
///
/// Costs are non-negative, so under both coverage rules the optimum picks the
/// per-process minimum and nothing else; under [`CoverageRule::Free`] it is
/// the empty plan.
#[allow(clippy::needless_range_loop)]
pub fn optimize_assignment(table: &CostTable, rule: CoverageRule, budget: Option<f64>) -> Result<Optimized> {
    table.check()?;
    let (m, p) = (table.m(), table.p());
    let mut assign = vec![vec![false; p]; m];
    if rule == CoverageRule::Free {
        return Ok(finish(assign, 0.0, budget));
    }
    for j in 0..p {
        let mut best = 0;
        for i in 1..m {
            if table.costs[i][j] < table.costs[best][j] {
                best = i;
            }
        }
        assign[best][j] = true;
    }
    let objective = plan_cost(&table.costs, &assign);
    Ok(finish(assign, objective, budget))
}

/// Size of the search space [`brute_force_assignment`] would enumerate.
pub fn search_space(m: usize, p: usize, rule: CoverageRule) -> f64 {
    let (m, p) = (m as f64, p as f64);
    match rule {
        CoverageRule::EachProcessExactlyOne => m.powf(p),
        CoverageRule::EachProcessAtLeastOne => (2f64.powf(m) - 1.0).powf(p),
        CoverageRule::Free => 2f64.powf(m * p),
    }
}

/// Nonempty strategy subsets in enumeration order: by size, then by the
/// lexicographic order of member indices. Singletons come first, in index order.
fn ordered_subsets(m: usize) -> Vec<Vec<usize>> {
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << m))
        .map(|mask| (0..m).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
}

/// Exhaustive search over every plan allowed by `rule`.
///
/// Plans are visited in lexicographic order of per-process choices and only a
/// strictly cheaper plan replaces the incumbent, which reproduces the
/// optimizer's tie-break.
pub fn brute_force_assignment(table: &CostTable, rule: CoverageRule, budget: Option<f64>) -> Result<Optimized> {
    table.check()?;
    let (m, p) = (table.m(), table.p());
    let size = search_space(m, p, rule);
    if size > BRUTE_FORCE_LIMIT as f64 {
        return Err(Error::TooLarge {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    // Per-process choices, each a set of strategy indices.
    let choices: Vec<Vec<usize>> = match rule {
        CoverageRule::EachProcessExactlyOne => (0..m).map(|i| vec![i]).collect(),
        CoverageRule::EachProcessAtLeastOne => ordered_subsets(m),
        CoverageRule::Free => std::iter::once(Vec::new()).chain(ordered_subsets(m)).collect(),
    };

    let mut counter = vec![0usize; p];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut best_feasible: Option<(f64, Vec<usize>)> = None;
    loop {
        let mut assign = vec![vec![false; p]; m];
        for (j, &c) in counter.iter().enumerate() {
            for &i in &choices[c] {
                assign[i][j] = true;
            }
        }
        let cost = plan_cost(&table.costs, &assign);
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, counter.clone()));
        }
        if budget.is_none_or(|c| cost <= c) && best_feasible.as_ref().is_none_or(|(b, _)| cost < *b) {
            best_feasible = Some((cost, counter.clone()));
        }

        // Odometer increment, last process fastest.
        let mut pos = p;
        loop {
            if pos == 0 {
                let to_assign = |ctr: &[usize]| {
                    let mut a = vec![vec![false; p]; m];
                    for (j, &c) in ctr.iter().enumerate() {
                        for &i in &choices[c] {
                            a[i][j] = true;
                        }
                    }
                    a
                };
                return Ok(match best_feasible {
                    Some((objective, ctr)) => Optimized::Feasible {
                        assign: to_assign(&ctr),
                        objective,
                    },
                    None => Optimized::Infeasible {
                        unconstrained_min: best.map_or(0.0, |(b, _)| b),
                    },
                });
            }
            pos -= 1;
            counter[pos] += 1;
            if counter[pos] < choices.len() {
                break;
            }
            counter[pos] = 0;
        }
    }
}

#[derive(Debug, Deserialize)]
struct TripleRow {
    strategy: String,
    process: String,
    cost: f64,
    #[serde(default)]
    assigned: Option<u8>,
}

/// Planning configuration read from JSON: `{"budget": number, "rule": string}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    pub budget: f64,
    #[serde(default)]
    pub rule: CoverageRule,
}

impl PlanConfig {
    pub fn from_json<R: Read>(source: R) -> Result<PlanConfig> {
        Ok(serde_json::from_reader(source)?)
    }
}

/// Reads `strategy,process,cost[,assigned]` triples. Labels keep first-seen
/// order and every (strategy, process) pair must appear exactly once.
/// Returns the table and, when the `assigned` column is present, the plan.
pub fn read_triples<R: Read>(source: R) -> Result<(CostTable, Option<Vec<Vec<bool>>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header = rdr.headers().map_err(Error::from_csv)?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let has_assigned = match cols.as_slice() {
        ["strategy", "process", "cost"] => false,
        ["strategy", "process", "cost", "assigned"] => true,
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "header must be strategy,process,cost[,assigned]".into(),
            })
        }
    };

    let mut strategies: Vec<String> = Vec::new();
    let mut processes: Vec<String> = Vec::new();
    let mut s_idx: HashMap<String, usize> = HashMap::new();
    let mut p_idx: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), (f64, bool)> = HashMap::new();
    for (idx, rec) in rdr.deserialize::<TripleRow>().enumerate() {
        let row = idx + 1;
        let rec = rec.map_err(|e| match e.position() {
            Some(pos) => Error::Parse {
                line: pos.line(),
                message: e.to_string(),
            },
            None => Error::validation(Some(row), None, e.to_string()),
        })?;
        let i = *s_idx.entry(rec.strategy.clone()).or_insert_with(|| {
            strategies.push(rec.strategy.clone());
            strategies.len() - 1
        });
        let j = *p_idx.entry(rec.process.clone()).or_insert_with(|| {
            processes.push(rec.process.clone());
            processes.len() - 1
        });
        let on = match (has_assigned, rec.assigned) {
            (false, _) => false,
            (true, Some(0)) => false,
            (true, Some(1)) => true,
            (true, _) => {
                return Err(Error::validation(
                    Some(row),
                    Some("assigned"),
                    "assigned must be 0 or 1",
                ));
            }
        };
        if cells.insert((i, j), (rec.cost, on)).is_some() {
            return Err(Error::validation(
                Some(row),
                None,
                format!("duplicate pair ({}, {})", rec.strategy, rec.process),
            ));
        }
    }

    let (m, p) = (strategies.len(), processes.len());
    let mut costs = vec![vec![0.0; p]; m];
    let mut assign = vec![vec![false; p]; m];
    for i in 0..m {
        for j in 0..p {
            let (c, on) = cells.get(&(i, j)).ok_or_else(|| {
                Error::validation(
                    None,
                    None,
                    format!("missing pair ({}, {})", strategies[i], processes[j]),
                )
            })?;
            costs[i][j] = *c;
            assign[i][j] = *on;
        }
    }
    let table = CostTable::new(strategies, processes, costs)?;
    Ok((table, has_assigned.then_some(assign)))
}

/// Writes the triple format including the `assigned` column.
pub fn write_triples<W: Write>(mdl: &StrategyModel, out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    wtr.write_record(["strategy", "process", "cost", "assigned"])
        .map_err(Error::from_csv)?;
    for (i, s) in mdl.table.strategies.iter().enumerate() {
        for (j, p) in mdl.table.processes.iter().enumerate() {
            let on = if mdl.assign[i][j] { "1" } else { "0" };
            wtr.write_record([s.as_str(), p.as_str(), &mdl.table.costs[i][j].to_string(), on])
                .map_err(Error::from_csv)?;
        }
    }
    wtr.flush()?;
    Ok(())
}
