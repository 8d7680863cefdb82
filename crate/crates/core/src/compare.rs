//! Basic-mode versus controlled-mode comparison, the published Table 1
//! cross-check, and report rendering.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::indicator::IndicatorSeries;

pub const BASE_LABEL: &str = "basic_mode";
pub const CTRL_LABEL: &str = "strat_plan";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Totals {
    pub v_base: f64,
    pub v_ctrl: f64,
    pub delta: f64,
}

/// Two indicator series on a shared time axis and their per-time difference
/// `delta[s] = ctrl.v_agg[s] - base.v_agg[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeComparison {
    pub base: IndicatorSeries,
    pub ctrl: IndicatorSeries,
    pub delta: Vec<f64>,
    pub totals: Totals,
}

impl ModeComparison {
    pub fn times(&self) -> &[usize] {
        &self.base.times
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }
}

pub fn compare_modes(base: &IndicatorSeries, ctrl: &IndicatorSeries) -> Result<ModeComparison> {
    if base.n() != ctrl.n() {
        return Err(Error::Dimension(format!(
            "base has {} parameters, ctrl has {}",
            base.n(),
            ctrl.n()
        )));
    }
    if let Some(index) = (0..base.len().max(ctrl.len())).find(|&s| base.times.get(s) != ctrl.times.get(s)) {
        return Err(Error::AxisMismatch { index });
    }
    let delta: Vec<f64> = ctrl.v_agg.iter().zip(&base.v_agg).map(|(c, b)| c - b).collect();
    let totals = Totals {
        v_base: base.v_agg.iter().sum(),
        v_ctrl: ctrl.v_agg.iter().sum(),
        delta: delta.iter().sum(),
    };
    Ok(ModeComparison {
        base: base.clone(),
        ctrl: ctrl.clone(),
        delta,
        totals,
    })
}

/// One row of the published regime table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureRow {
    pub t: usize,
    pub v_basic: f64,
    pub v_strat: f64,
    pub delta: f64,
}

/// The 57-row regime table as printed (four decimals).
#[derive(Debug, Clone, PartialEq)]
pub struct PaperTableFixture {
    pub rows: Vec<FixtureRow>,
}

const TABLE1_CSV: &str = include_str!("../data/table1.csv");

/// Published totals and the tolerances they are checked at.
pub const PUBLISHED_V_BASIC: f64 = 5_069.93;
pub const PUBLISHED_V_STRAT: f64 = 5_089.90;
pub const PUBLISHED_DELTA: f64 = 19.96;
/// Two 4-decimal roundings per row.
pub const ROW_TOLERANCE: f64 = 2e-4;
/// 57 roundings of at most 5e-5 plus the 2-decimal published totals.
pub const TOTAL_TOLERANCE: f64 = 0.05;

impl PaperTableFixture {
    pub fn embedded() -> PaperTableFixture {
        Self::parse(TABLE1_CSV).expect("embedded table is well formed")
    }

    pub fn parse(src: &str) -> Result<PaperTableFixture> {
        let mut rdr = csv::Reader::from_reader(src.as_bytes());
        let mut rows = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(Error::from_csv)?;
            let num = |c: usize| -> Result<f64> {
                rec[c]
                    .parse()
                    .map_err(|_| Error::validation(Some(idx + 1), None, format!("bad number \"{}\"", &rec[c])))
            };
            let t: usize = rec[0]
                .parse()
                .map_err(|_| Error::validation(Some(idx + 1), Some("t"), "bad time index"))?;
            if t != idx + 1 {
                return Err(Error::validation(
                    Some(idx + 1),
                    Some("t"),
                    "time indices must run 1, 2, ... without gaps",
                ));
            }
            rows.push(FixtureRow {
                t,
                v_basic: num(1)?,
                v_strat: num(2)?,
                delta: num(3)?,
            });
        }
        Ok(PaperTableFixture { rows })
    }

    pub fn base_series(&self) -> IndicatorSeries {
        let times = self.rows.iter().map(|r| r.t).collect();
        IndicatorSeries::opaque(BASE_LABEL, times, self.rows.iter().map(|r| r.v_basic).collect())
            .expect("equal lengths")
    }

    pub fn ctrl_series(&self) -> IndicatorSeries {
        let times = self.rows.iter().map(|r| r.t).collect();
        IndicatorSeries::opaque(CTRL_LABEL, times, self.rows.iter().map(|r| r.v_strat).collect())
            .expect("equal lengths")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub computed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: String, computed: f64, expected: f64, tolerance: f64) -> Check {
        Check {
            pass: (computed - expected).abs() <= tolerance,
            name,
            computed,
            expected,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub rows: Vec<Check>,
    pub totals: Vec<Check>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().chain(&self.totals).all(|c| c.pass)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in self.rows.iter().chain(&self.totals) {
            let _ = writeln!(
                out,
                "{} {}: computed {:.4}, expected {:.4} (tolerance {})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.computed,
                c.expected,
                c.tolerance
            );
        }
        let passed = self.rows.iter().chain(&self.totals).filter(|c| c.pass).count();
        let _ = writeln!(out, "{passed}/{} checks passed", self.rows.len() + self.totals.len());
        out
    }
}

/// Internal-consistency checks of the published table: each row's printed
/// delta against the difference of its two columns, the column totals against
/// the published totals, and the published delta against both the delta
/// column sum and the difference of column totals.
pub fn verify_paper_table(fx: &PaperTableFixture) -> VerificationReport {
    let rows = fx
        .rows
        .iter()
        .map(|r| Check::new(format!("row t={}", r.t), r.v_strat - r.v_basic, r.delta, ROW_TOLERANCE))
        .collect();
    let sum = |f: fn(&FixtureRow) -> f64| fx.rows.iter().map(f).sum::<f64>();
    let (basic, strat, delta) = (sum(|r| r.v_basic), sum(|r| r.v_strat), sum(|r| r.delta));
    let totals = vec![
        Check::new("sum v_basic".into(), basic, PUBLISHED_V_BASIC, TOTAL_TOLERANCE),
        Check::new("sum v_strat".into(), strat, PUBLISHED_V_STRAT, TOTAL_TOLERANCE),
        Check::new("sum delta".into(), delta, PUBLISHED_DELTA, TOTAL_TOLERANCE),
        Check::new(
            "sum v_strat - sum v_basic".into(),
            strat - basic,
            PUBLISHED_DELTA,
            TOTAL_TOLERANCE,
        ),
    ];
    VerificationReport { rows, totals }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "svg" => Ok(ReportFormat::Svg),
            other => Err(Error::UnknownFormat(other.to_owned())),
        }
    }
}

/// Fixed-point with four decimals; never prints a negative zero.
fn dp4(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".to_owned()
    } else {
        s
    }
}

#[derive(Serialize)]
struct JsonRow {
    t: usize,
    v_basic: f64,
    v_strat: f64,
    delta: f64,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    base_label: &'a str,
    ctrl_label: &'a str,
    rows: Vec<JsonRow>,
    totals: JsonTotals,
}

#[derive(Serialize)]
struct JsonTotals {
    v_basic: f64,
    v_strat: f64,
    delta: f64,
}

pub fn render_report(cmp: &ModeComparison, format: ReportFormat) -> Result<Vec<u8>> {
    if cmp.is_empty() {
        return Err(Error::EmptySeries);
    }
    Ok(match format {
        ReportFormat::Csv => {
            let mut out = String::from("t,v_basic,v_strat,delta\n");
            for s in 0..cmp.len() {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    cmp.times()[s],
                    dp4(cmp.base.v_agg[s]),
                    dp4(cmp.ctrl.v_agg[s]),
                    dp4(cmp.delta[s])
                );
            }
            out.into_bytes()
        }
        ReportFormat::Json => {
            let report = JsonReport {
                base_label: &cmp.base.mode_label,
                ctrl_label: &cmp.ctrl.mode_label,
                rows: (0..cmp.len())
                    .map(|s| JsonRow {
                        t: cmp.times()[s],
                        v_basic: cmp.base.v_agg[s],
                        v_strat: cmp.ctrl.v_agg[s],
                        delta: cmp.delta[s],
                    })
                    .collect(),
                totals: JsonTotals {
                    v_basic: cmp.totals.v_base,
                    v_strat: cmp.totals.v_ctrl,
                    delta: cmp.totals.delta,
                },
            };
            let mut buf = serde_json::to_vec_pretty(&report)?;
            buf.push(b'\n');
            buf
        }
        ReportFormat::Svg => render_svg(cmp).into_bytes(),
    })
}

const SVG_W: f64 = 960.0;
const SVG_H: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

/// Linear map from a data range padded by 5% on both ends to a pixel range.
struct Scale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn padded(min: f64, max: f64, px_lo: f64, px_hi: f64) -> Scale {
        let span = if max > min { max - min } else { min.abs().max(1.0) };
        Scale {
            lo: min - 0.05 * span,
            hi: max + 0.05 * span,
            px_lo,
            px_hi,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn polyline(xs: &[f64], ys: &[f64], sx: &Scale, sy: &Scale) -> String {
    xs.iter()
        .zip(ys)
        .map(|(x, y)| format!("{:.2},{:.2}", sx.map(*x), sy.map(*y)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Two-line chart of `V(t)` for both modes.
fn render_svg(cmp: &ModeComparison) -> String {
    let xs: Vec<f64> = cmp.times().iter().map(|t| *t as f64).collect();
    let (xmin, xmax) = (xs[0], xs[xs.len() - 1]);
    let all = cmp.base.v_agg.iter().chain(&cmp.ctrl.v_agg);
    let ymin = all.clone().fold(f64::INFINITY, |a, b| a.min(*b));
    let ymax = all.fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let sx = Scale::padded(xmin, xmax, MARGIN_L, SVG_W - MARGIN_R);
    let sy = Scale::padded(ymin, ymax, SVG_H - MARGIN_B, MARGIN_T);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SVG_W} {SVG_H}" width="{SVG_W}" height="{SVG_H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{SVG_W}" height="{SVG_H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">Indicator dynamics V(t)</text>"#,
        SVG_W / 2.0
    );

    // Axes.
    let (x0, x1) = (MARGIN_L, SVG_W - MARGIN_R);
    let (y0, y1) = (SVG_H - MARGIN_B, MARGIN_T);
    let _ = writeln!(
        out,
        r#"<g stroke="black" stroke-width="1"><line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/><line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/></g>"#
    );
    let _ = writeln!(out, r#"<g fill="black">"#);
    for i in 0..=5 {
        let v = ymin + (ymax - ymin) * i as f64 / 5.0;
        let y = sy.map(v);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{:.2}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            v
        );
    }
    let ticks = 10.min(xs.len() - 1).max(1);
    for i in 0..=ticks {
        let v = (xmin + (xmax - xmin) * i as f64 / ticks as f64).round();
        let x = sx.map(v);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{v}</text>"#,
            y0 + 5.0,
            y0 + 20.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t</text>"#,
        (x0 + x1) / 2.0,
        SVG_H - 8.0
    );
    let _ = writeln!(out, "</g>");

    let series = [(&cmp.base, "#1f77b4", "base"), (&cmp.ctrl, "#d62728", "ctrl")];
    for (i, (s, color, class)) in series.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<polyline class="{class}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            polyline(&xs, &s.v_agg, &sx, &sy)
        );
        let ly = MARGIN_T + 6.0 + 18.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x1 - 150.0,
            x1 - 125.0,
            x1 - 120.0,
            ly + 4.0,
            xml_escape(&s.mode_label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
