//! Seeded synthetic digital copies.
//!
//! Panels follow a linear factor model,
//! `x_j(t) = level + sum_f L[j][f] * F_f(t) + sigma_j * e_j(t)`,
//! with standard normal factors `F` and noise `e`.
//!
//! Reproducibility contract: the generator is ChaCha8 (`rand_chacha`) keyed by
//! `ChaCha8Rng::seed_from_u64(seed)`. Stream 0 produces the factor draws in
//! period-major, factor-minor order; stream `j + 1` produces the `T` noise
//! draws of column `j`. Normal variates come from `rand_distr::StandardNormal`
//! (ziggurat). Both crates are pinned to exact versions, so a seed fixes the
//! panel bit for bit on every platform and for any thread count.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Panel, ParamKind, ParamMeta};
use crate::strategy::StrategyModel;

/// Factor loadings, `n x f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Loadings {
    /// Explicit matrix, one row per column.
    Matrix(Vec<Vec<f64>>),
    /// Every column loads `value` on each of `factors` factors.
    Uniform { value: f64, factors: usize },
    /// Block-diagonal: consecutive groups of the given sizes, each loading 1
    /// on its own factor. Sizes must add up to `n`.
    Blocks { blocks: Vec<usize> },
}

impl Loadings {
    fn resolve(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        let m = match self {
            Loadings::Matrix(m) => m.clone(),
            Loadings::Uniform { value, factors } => vec![vec![*value; *factors]; n],
            Loadings::Blocks { blocks } => {
                if blocks.iter().sum::<usize>() != n {
                    return Err(Error::Dimension(format!("block sizes do not add up to n = {n}")));
                }
                let f = blocks.len();
                let mut m = Vec::with_capacity(n);
                for (b, size) in blocks.iter().enumerate() {
                    for _ in 0..*size {
                        let mut row = vec![0.0; f];
                        row[b] = 1.0;
                        m.push(row);
                    }
                }
                m
            }
        };
        if m.len() != n {
            return Err(Error::Dimension(format!("{} loading rows for n = {n}", m.len())));
        }
        let f = m.first().map_or(0, Vec::len);
        if m.iter().any(|r| r.len() != f) {
            return Err(Error::Dimension("loading rows differ in length".into()));
        }
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation(None, Some("loadings"), "loadings must be finite"));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSigma {
    Uniform(f64),
    PerColumn(Vec<f64>),
}

impl Default for NoiseSigma {
    fn default() -> Self {
        NoiseSigma::Uniform(0.0)
    }
}

/// From period index `period` on, loadings become `L + delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSwitch {
    pub period: usize,
    pub delta: Loadings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    /// Number of periods `T`.
    pub periods: usize,
    pub loadings: Loadings,
    #[serde(default)]
    pub noise_sigma: NoiseSigma,
    /// Constant added to every value (thousand currency units).
    #[serde(default)]
    pub level: f64,
    /// Number of business processes; columns are split into contiguous groups.
    /// Defaults to one process per column.
    #[serde(default)]
    pub processes: Option<usize>,
    #[serde(default)]
    pub regime_switch: Option<RegimeSwitch>,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn from_json<R: std::io::Read>(source: R) -> Result<SynthSpec> {
        Ok(serde_json::from_reader(source)?)
    }

    /// `n` identical columns driven by one factor, no noise.
    pub fn rank_one(n: usize, periods: usize, seed: u64) -> SynthSpec {
        SynthSpec {
            n,
            periods,
            loadings: Loadings::Uniform { value: 1.0, factors: 1 },
            noise_sigma: NoiseSigma::Uniform(0.0),
            level: 0.0,
            processes: None,
            regime_switch: None,
            seed,
        }
    }

    fn sigmas(&self) -> Result<Vec<f64>> {
        let s = match &self.noise_sigma {
            NoiseSigma::Uniform(s) => vec![*s; self.n],
            NoiseSigma::PerColumn(v) if v.len() == self.n => v.clone(),
            NoiseSigma::PerColumn(v) => {
                return Err(Error::Dimension(format!("{} noise scales for n = {}", v.len(), self.n)))
            }
        };
        if s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::validation(
                None,
                Some("noise_sigma"),
                "noise scales must be finite and non-negative",
            ));
        }
        Ok(s)
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Column ids `x1..xn`; process ids `bp1..` when `processes` is set.
fn param_meta(n: usize, processes: Option<usize>) -> Vec<ParamMeta> {
    (0..n)
        .map(|j| {
            let id = format!("x{}", j + 1);
            match processes {
                Some(p) => ParamMeta {
                    process_id: format!("bp{}", j * p / n + 1),
                    id,
                    kind: ParamKind::Expense,
                },
                None => ParamMeta::with_defaults(id),
            }
        })
        .collect()
}

pub fn generate_panel(spec: &SynthSpec) -> Result<Panel> {
    let (n, t_len) = (spec.n, spec.periods);
    if n == 0 || t_len == 0 {
        return Err(Error::Dimension("n and periods must be at least 1".into()));
    }
    if spec.processes.is_some_and(|p| p == 0 || p > n) {
        return Err(Error::Dimension("processes must be between 1 and n".into()));
    }
    if !spec.level.is_finite() {
        return Err(Error::validation(None, Some("level"), "level must be finite"));
    }
    let load = spec.loadings.resolve(n)?;
    let f = load.first().map_or(0, Vec::len);
    let switch = match &spec.regime_switch {
        Some(rs) => {
            let delta = rs.delta.resolve(n)?;
            if delta.first().map_or(0, Vec::len) != f {
                return Err(Error::Dimension("regime delta has a different factor count".into()));
            }
            Some((rs.period, delta))
        }
        None => None,
    };
    let sigma = spec.sigmas()?;

    let mut factor_rng = stream(spec.seed, 0);
    let factors: Vec<Vec<f64>> = (0..t_len)
        .map(|_| (0..f).map(|_| factor_rng.sample(StandardNormal)).collect())
        .collect();

    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(spec.seed, j as u64 + 1);
            (0..t_len)
                .map(|t| {
                    let e: f64 = rng.sample(StandardNormal);
                    let mut x = spec.level;
                    for (k, fk) in factors[t].iter().enumerate() {
                        let mut l = load[j][k];
                        if let Some((start, delta)) = &switch {
                            if t >= *start {
                                l += delta[j][k];
                            }
                        }
                        x += l * fk;
                    }
                    x + sigma[j] * e
                })
                .collect()
        })
        .collect();

    let rows: Vec<Vec<f64>> = (0..t_len).map(|t| columns.iter().map(|c| c[t]).collect()).collect();
    let periods = (1..=t_len).map(|t| t.to_string()).collect();
    Panel::new(periods, param_meta(n, spec.processes), rows)
}

/// Additive per-period cost of each (strategy, process) assignment, applied
/// from a start period on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayEffect {
    /// `amount[i][j]` is added per period when strategy `i` governs process `j`.
    pub amount: Vec<Vec<f64>>,
    /// 0-based row index of the first affected period.
    pub start: usize,
}

impl OverlayEffect {
    pub fn uniform(mdl: &StrategyModel, amount: f64, start: usize) -> OverlayEffect {
        OverlayEffect {
            amount: vec![vec![amount; mdl.table.p()]; mdl.table.m()],
            start,
        }
    }
}

/// Copy of `p` in which, from `effect.start` on, every expense column of each
/// assigned process carries the assignment's extra cost.
pub fn apply_strategy_overlay(p: &Panel, mdl: &StrategyModel, effect: &OverlayEffect) -> Result<Panel> {
    let (m, np) = (mdl.table.m(), mdl.table.p());
    if effect.amount.len() != m || effect.amount.iter().any(|r| r.len() != np) {
        return Err(Error::Dimension(format!("overlay amounts are not {m}x{np}")));
    }
    if mdl.assign.len() != m || mdl.assign.iter().any(|r| r.len() != np) {
        return Err(Error::Dimension(format!("assignment is not {m}x{np}")));
    }
    let mut columns_of: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, meta) in p.params().iter().enumerate() {
        let cols = columns_of.entry(meta.process_id.as_str()).or_default();
        if meta.kind == ParamKind::Expense {
            cols.push(i);
        }
    }

    // Extra amount per column, summed over strategies in index order.
    let mut extra = vec![0.0; p.n()];
    let mut touched = vec![false; p.n()];
    for (j, process) in mdl.table.processes.iter().enumerate() {
        let cols = columns_of
            .get(process.as_str())
            .ok_or_else(|| Error::UnknownProcess(process.clone()))?;
        for i in 0..m {
            if mdl.assign[i][j] {
                for &c in cols {
                    extra[c] += effect.amount[i][j];
                    touched[c] = true;
                }
            }
        }
    }

    let mut parts = p.to_parts();
    for row in parts.values.iter_mut().skip(effect.start) {
        for ((v, e), hit) in row.iter_mut().zip(&extra).zip(&touched) {
            if *hit {
                *v += e;
            }
        }
    }
    Panel::try_from(parts)
}
