//! The digital copy as a data panel: `T` periods by `n` monetary parameters.
//!
//! Ingestion goes through [`load_panel`] (wide CSV, optional sidecar metadata),
//! validation through [`validate_panel`], and the `k`-deep history used by every
//! indicator computation through [`window_slice`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    #[default]
    Expense,
    Income,
}

impl FromStr for ParamKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expense" => Ok(ParamKind::Expense),
            "income" => Ok(ParamKind::Income),
            other => Err(Error::validation(
                None,
                Some("kind"),
                format!("unknown parameter kind \"{other}\" (expected expense or income)"),
            )),
        }
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamKind::Expense => "expense",
            ParamKind::Income => "income",
        })
    }
}

/// Per-column metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamMeta {
    pub id: String,
    /// Business process the parameter belongs to.
    pub process_id: String,
    pub kind: ParamKind,
}

impl ParamMeta {
    /// Metadata with the defaults used when no sidecar file is given:
    /// the parameter is its own process and counts as an expense.
    pub fn with_defaults(id: impl Into<String>) -> Self {
        let id = id.into();
        ParamMeta {
            process_id: id.clone(),
            id,
            kind: ParamKind::Expense,
        }
    }
}

/// Unvalidated panel contents, as read from a file or built by hand.
///
/// `values[t]` is the row for period `t`. Nothing here is guaranteed; run
/// [`validate_panel`] or convert with `Panel::try_from`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PanelParts {
    pub periods: Vec<String>,
    pub params: Vec<ParamMeta>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// Where a finding applies. Rows are 1-based data rows (the header is not counted).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Panel,
    Row { row: usize, period: String },
    Column { column: String },
    Cell { row: usize, period: String, column: String },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Panel => f.write_str("panel"),
            Location::Row { row, period } => write!(f, "row {row} (period {period})"),
            Location::Column { column } => write!(f, "column \"{column}\""),
            Location::Cell { row, period, column } => write!(f, "row {row} (period {period}), column \"{column}\""),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }

    fn push(&mut self, severity: Severity, location: Location, message: impl Into<String>) {
        self.findings.push(Finding {
            severity,
            location,
            message: message.into(),
        });
    }
}

/// Sort key of a period label. Labels are either all integers or all
/// `YYYY-MM`; only their order is ever used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum PeriodKey {
    Int(i64),
    Month(i32, u32),
}

impl PeriodKey {
    fn parse(label: &str) -> Option<PeriodKey> {
        if let Ok(v) = label.parse::<i64>() {
            return Some(PeriodKey::Int(v));
        }
        let b = label.as_bytes();
        if b.len() == 7 && b[4] == b'-' {
            let (y, m) = (&label[..4], &label[5..]);
            if y.bytes().all(|c| c.is_ascii_digit()) && m.bytes().all(|c| c.is_ascii_digit()) {
                let month: u32 = m.parse().ok()?;
                if (1..=12).contains(&month) {
                    return Some(PeriodKey::Month(y.parse().ok()?, month));
                }
            }
        }
        None
    }

    fn same_format(&self, other: &PeriodKey) -> bool {
        matches!(
            (self, other),
            (PeriodKey::Int(_), PeriodKey::Int(_)) | (PeriodKey::Month(..), PeriodKey::Month(..))
        )
    }
}

/// Checks every panel invariant and reports all violations found.
///
/// Errors: empty panel, ragged rows, non-finite values, bad or non-increasing
/// period labels, empty or duplicate parameter ids. Warnings: constant columns,
/// which have zero variance in every window.
pub fn validate_panel(p: &PanelParts) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = p.params.len();
    let t_len = p.values.len();

    if t_len == 0 {
        report.push(Severity::Error, Location::Panel, "panel has no periods");
    }
    if n == 0 {
        report.push(Severity::Error, Location::Panel, "panel has no parameters");
    }
    if p.periods.len() != t_len {
        report.push(
            Severity::Error,
            Location::Panel,
            format!("{} period labels for {} value rows", p.periods.len(), t_len),
        );
    }

    let label = |t: usize| p.periods.get(t).cloned().unwrap_or_default();

    let mut seen = HashSet::new();
    for meta in &p.params {
        if meta.id.is_empty() {
            report.push(Severity::Error, Location::Panel, "empty parameter id");
        } else if !seen.insert(meta.id.as_str()) {
            report.push(
                Severity::Error,
                Location::Column {
                    column: meta.id.clone(),
                },
                "duplicate parameter id",
            );
        }
    }

    let mut prev: Option<PeriodKey> = None;
    for (t, period) in p.periods.iter().enumerate() {
        let loc = || Location::Row {
            row: t + 1,
            period: period.clone(),
        };
        match PeriodKey::parse(period) {
            None => report.push(Severity::Error, loc(), "period label is neither an integer nor YYYY-MM"),
            Some(key) => {
                if let Some(before) = prev {
                    if !before.same_format(&key) {
                        report.push(Severity::Error, loc(), "mixed period label formats");
                    } else if key <= before {
                        report.push(Severity::Error, loc(), "periods not strictly increasing");
                    }
                }
                prev = Some(key);
            }
        }
    }

    for (t, row) in p.values.iter().enumerate() {
        if row.len() != n {
            report.push(
                Severity::Error,
                Location::Row {
                    row: t + 1,
                    period: label(t),
                },
                format!("row has {} values, expected {n}", row.len()),
            );
            continue;
        }
        for (i, v) in row.iter().enumerate() {
            if !v.is_finite() {
                report.push(
                    Severity::Error,
                    Location::Cell {
                        row: t + 1,
                        period: label(t),
                        column: p.params[i].id.clone(),
                    },
                    format!("non-finite value {v}"),
                );
            }
        }
    }

    if t_len >= 2 && p.values.iter().all(|r| r.len() == n) {
        for (i, meta) in p.params.iter().enumerate() {
            let first = p.values[0][i];
            if first.is_finite() && p.values.iter().all(|r| r[i] == first) {
                report.push(
                    Severity::Warning,
                    Location::Column {
                        column: meta.id.clone(),
                    },
                    "zero variance possible in any window",
                );
            }
        }
    }

    report
}

/// A validated panel. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    periods: Vec<String>,
    params: Vec<ParamMeta>,
    /// Row-major `T x n`.
    values: Vec<f64>,
    n: usize,
}

impl TryFrom<PanelParts> for Panel {
    type Error = Error;

    fn try_from(parts: PanelParts) -> Result<Panel> {
        let report = validate_panel(&parts);
        if let Some(f) = report.errors().next() {
            return Err(finding_to_error(f));
        }
        let n = parts.params.len();
        let values = parts.values.into_iter().flatten().collect();
        Ok(Panel {
            periods: parts.periods,
            params: parts.params,
            values,
            n,
        })
    }
}

fn finding_to_error(f: &Finding) -> Error {
    match &f.location {
        Location::Panel => Error::validation(None, None, f.message.clone()),
        Location::Row { row, .. } => Error::validation(Some(*row), None, f.message.clone()),
        Location::Column { column } => Error::validation(None, Some(column), f.message.clone()),
        Location::Cell { row, column, .. } => Error::validation(Some(*row), Some(column), f.message.clone()),
    }
}

impl Panel {
    pub fn new(periods: Vec<String>, params: Vec<ParamMeta>, values: Vec<Vec<f64>>) -> Result<Panel> {
        Panel::try_from(PanelParts {
            periods,
            params,
            values,
        })
    }

    /// Panel with integer period labels `1..=T` and default metadata.
    pub fn from_rows(ids: &[&str], rows: Vec<Vec<f64>>) -> Result<Panel> {
        let periods = (1..=rows.len()).map(|t| t.to_string()).collect();
        let params = ids.iter().map(|id| ParamMeta::with_defaults(*id)).collect();
        Panel::new(periods, params, rows)
    }

    /// Number of periods, `T`.
    pub fn periods_len(&self) -> usize {
        self.periods.len()
    }

    /// Number of parameters, `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    pub fn params(&self) -> &[ParamMeta] {
        &self.params
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.n..(t + 1) * self.n]
    }

    pub fn value(&self, t: usize, i: usize) -> f64 {
        self.values[t * self.n + i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n)
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows().map(|r| r[i]).collect()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_panel(&self.to_parts())
    }

    pub fn to_parts(&self) -> PanelParts {
        PanelParts {
            periods: self.periods.clone(),
            params: self.params.clone(),
            values: self.rows().map(<[f64]>::to_vec).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    k: usize,
}

impl WindowSpec {
    pub fn new(k: usize) -> Result<WindowSpec> {
        if k < 2 {
            return Err(Error::InvalidWindow(k));
        }
        Ok(WindowSpec { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl Default for WindowSpec {
    /// Six monthly measures.
    fn default() -> Self {
        WindowSpec { k: 6 }
    }
}

/// The `k` rows preceding an evaluation time, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowMatrix {
    /// Row-major `k x n`; row `l - 1` holds `x(t - l)`.
    rows: Vec<f64>,
    k: usize,
    n: usize,
    at_time: usize,
}

impl WindowMatrix {
    /// Builds a window from rows ordered `x(t-1), x(t-2), ..., x(t-k)`.
    pub fn from_rows(rows: &[Vec<f64>], at_time: usize) -> Result<WindowMatrix> {
        let k = rows.len();
        if k < 2 {
            return Err(Error::InvalidWindow(k));
        }
        let n = rows[0].len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("window rows must share a nonzero length".into()));
        }
        Ok(WindowMatrix {
            rows: rows.concat(),
            k,
            n,
            at_time,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn at_time(&self) -> usize {
        self.at_time
    }

    /// Row `l` (0-based) is `x(t - l - 1)`.
    pub fn row(&self, l: usize) -> &[f64] {
        &self.rows[l * self.n..(l + 1) * self.n]
    }

    pub fn get(&self, l: usize, i: usize) -> f64 {
        self.rows[l * self.n + i]
    }

    pub fn rows_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.rows.chunks_exact_mut(self.n)
    }
}

/// Copies rows `t-1, t-2, ..., t-k` of the panel. `t` may equal `T`, in which
/// case the window is the last `k` rows.
pub fn window_slice(p: &Panel, t: usize, w: WindowSpec) -> Result<WindowMatrix> {
    let k = w.k();
    if t < k || t > p.periods_len() {
        return Err(Error::OutOfRange {
            t,
            min: k,
            max: p.periods_len(),
        });
    }
    let mut rows = Vec::with_capacity(k * p.n());
    for l in 1..=k {
        rows.extend_from_slice(p.row(t - l));
    }
    Ok(WindowMatrix {
        rows,
        k,
        n: p.n(),
        at_time: t,
    })
}

/// Ingestion options for [`load_panel`].
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Sidecar metadata; parameters not listed get [`ParamMeta::with_defaults`].
    pub metadata: Option<Vec<ParamMeta>>,
}

fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

/// Reads the sidecar `param_id,process_id,kind` file.
pub fn load_metadata<R: Read>(source: R) -> Result<Vec<ParamMeta>> {
    let mut rdr = csv_reader(source);
    let header = rdr.headers().map_err(Error::from_csv)?.clone();
    let expected = ["param_id", "process_id", "kind"];
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("metadata header must be {}", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(Error::from_csv)?;
        let row = idx + 1;
        if rec.len() != 3 {
            return Err(Error::validation(
                Some(row),
                None,
                format!("metadata row has {} fields, expected 3", rec.len()),
            ));
        }
        let kind = rec[2].parse::<ParamKind>().map_err(|_| {
            Error::validation(
                Some(row),
                Some("kind"),
                format!("unknown parameter kind \"{}\"", &rec[2]),
            )
        })?;
        let process = if rec[1].is_empty() { &rec[0] } else { &rec[1] };
        out.push(ParamMeta {
            id: rec[0].to_owned(),
            process_id: process.to_owned(),
            kind,
        });
    }
    Ok(out)
}

/// Reads a wide CSV without enforcing the panel invariants.
///
/// Structural problems (bad header, unparsable or missing cells) are still
/// errors here; non-finite numbers, ordering and duplicates are left to
/// [`validate_panel`].
pub fn load_panel_parts<R: Read>(source: R, opts: &LoadOptions) -> Result<PanelParts> {
    let mut rdr = csv_reader(source);
    let header = rdr.headers().map_err(Error::from_csv)?.clone();
    if header.get(0) != Some("period") {
        return Err(Error::Parse {
            line: 1,
            message: "first header column must be \"period\"".into(),
        });
    }
    let ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();

    let mut params: Vec<ParamMeta> = ids.iter().map(ParamMeta::with_defaults).collect();
    if let Some(meta) = &opts.metadata {
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        for m in meta {
            let i = *index
                .get(m.id.as_str())
                .ok_or_else(|| Error::validation(None, Some(&m.id), "metadata names a parameter not in the panel"))?;
            params[i] = m.clone();
        }
    }

    let mut periods = Vec::new();
    let mut values = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(Error::from_csv)?;
        let row = idx + 1;
        if rec.len() > ids.len() + 1 {
            return Err(Error::validation(
                Some(row),
                None,
                format!("row has {} fields, header has {}", rec.len(), ids.len() + 1),
            ));
        }
        let period = rec.get(0).unwrap_or_default();
        if period.is_empty() {
            return Err(Error::validation(Some(row), Some("period"), "missing period label"));
        }
        let mut vals = Vec::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            let cell = rec.get(i + 1).unwrap_or_default();
            if cell.is_empty() {
                return Err(Error::validation(Some(row), Some(id), "missing cell"));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::validation(Some(row), Some(id), format!("non-numeric cell \"{cell}\"")))?;
            vals.push(v);
        }
        periods.push(period.to_owned());
        values.push(vals);
    }
    Ok(PanelParts {
        periods,
        params,
        values,
    })
}

/// Reads a wide CSV (`period,<id>,<id>,...`) into a validated panel.
pub fn load_panel<R: Read>(source: R, opts: &LoadOptions) -> Result<Panel> {
    Panel::try_from(load_panel_parts(source, opts)?)
}

/// Writes the wide CSV form. Values use shortest round-trip formatting, so
/// reading the output back reproduces every value bit for bit.
pub fn write_panel<W: Write>(p: &Panel, out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let header = std::iter::once("period").chain(p.params().iter().map(|m| m.id.as_str()));
    wtr.write_record(header).map_err(Error::from_csv)?;
    let mut rec = Vec::with_capacity(p.n() + 1);
    for (t, row) in p.rows().enumerate() {
        rec.clear();
        rec.push(p.periods()[t].clone());
        rec.extend(row.iter().map(|v| v.to_string()));
        wtr.write_record(&rec).map_err(Error::from_csv)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_metadata<W: Write>(params: &[ParamMeta], out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    wtr.write_record(["param_id", "process_id", "kind"])
        .map_err(Error::from_csv)?;
    for m in params {
        wtr.write_record([m.id.as_str(), m.process_id.as_str(), &m.kind.to_string()])
            .map_err(Error::from_csv)?;
    }
    wtr.flush()?;
    Ok(())
}
