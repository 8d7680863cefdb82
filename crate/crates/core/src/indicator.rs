//! The integral-indicator engine.
//!
//! `G_i(t) = sum_j |r_ij(t)|` is computed from the standardized window through
//! tiled `k`-length dot products; the `n x n` correlation matrix is never
//! allocated. Work is split into upper-triangle tiles of `block x block`
//! column pairs. Each tile yields one partial sum per row (and, off the
//! diagonal, per column) accumulated in ascending index order, and every row
//! total is the sum of its partials in ascending block order. The result is
//! therefore bit-identical for any thread count.

use std::collections::VecDeque;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrwin::{pair_correlation, standardize, standardize_column, StandardizedWindow};
use crate::error::{Error, Result};
use crate::panel::{window_slice, Panel, WindowMatrix, WindowSpec};

/// Row sums switch to compensated accumulation above this many columns.
pub const COMPENSATED_ABOVE: usize = 100_000;

/// Reduction of `G_i(t)` over `i` into the per-time scalar `V(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Sum,
    Mean,
}

impl FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Aggregate::Sum),
            "mean" => Ok(Aggregate::Mean),
            other => Err(Error::Config(format!("unknown aggregate \"{other}\""))),
        }
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregate::Sum => "sum",
            Aggregate::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Tile edge length in columns.
    pub block: usize,
    /// Worker count.
    pub threads: usize,
    pub aggregate: Aggregate,
    /// Largest `n` the naive correlation-matrix path may allocate.
    pub materialization_limit: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            block: 256,
            threads: std::thread::available_parallelism().map_or(1, usize::from),
            aggregate: Aggregate::Sum,
            materialization_limit: crate::corrwin::DEFAULT_MATERIALIZATION_LIMIT,
        }
    }
}

impl EngineConfig {
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_block(mut self, block: usize) -> Self {
        self.block = block;
        self
    }

    pub fn with_aggregate(mut self, aggregate: Aggregate) -> Self {
        self.aggregate = aggregate;
        self
    }

    fn check(&self) -> Result<()> {
        if self.block == 0 {
            return Err(Error::Config("block must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

/// Plain or Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct RowSum {
    sum: f64,
    comp: f64,
}

impl RowSum {
    #[inline]
    fn add(&mut self, v: f64, compensated: bool) {
        if compensated {
            let t = self.sum + v;
            if self.sum.abs() >= v.abs() {
                self.comp += (self.sum - t) + v;
            } else {
                self.comp += (v - t) + self.sum;
            }
            self.sum = t;
        } else {
            self.sum += v;
        }
    }

    #[inline]
    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

struct TileSums {
    bi: usize,
    bj: usize,
    /// Per row of block `bi`: sum over the columns of block `bj`.
    rows: Vec<f64>,
    /// Per column of block `bj`: sum over the rows of block `bi` (off-diagonal tiles only).
    cols: Vec<f64>,
}

fn tile_sums(z: &StandardizedWindow, block: usize, bi: usize, bj: usize, compensated: bool) -> TileSums {
    let n = z.n();
    let (i0, i1) = (bi * block, ((bi + 1) * block).min(n));
    let (j0, j1) = (bj * block, ((bj + 1) * block).min(n));
    let mut rows = vec![RowSum::default(); i1 - i0];

    if bi == bj {
        // Row i sees j < i (added while visiting row j), then the diagonal, then j > i.
        for i in i0..i1 {
            rows[i - i0].add(1.0, compensated);
            for j in i + 1..j1 {
                let v = pair_correlation(z, i, j).abs();
                rows[i - i0].add(v, compensated);
                rows[j - i0].add(v, compensated);
            }
        }
        return TileSums {
            bi,
            bj,
            rows: rows.into_iter().map(RowSum::value).collect(),
            cols: Vec::new(),
        };
    }

    let mut cols = vec![RowSum::default(); j1 - j0];
    for i in i0..i1 {
        let row = &mut rows[i - i0];
        for (j, col) in (j0..j1).zip(cols.iter_mut()) {
            let v = pair_correlation(z, i, j).abs();
            row.add(v, compensated);
            col.add(v, compensated);
        }
    }
    TileSums {
        bi,
        bj,
        rows: rows.into_iter().map(RowSum::value).collect(),
        cols: cols.into_iter().map(RowSum::value).collect(),
    }
}

/// Indicator engine with its own worker pool.
pub struct Engine {
    cfg: EngineConfig,
    pool: rayon::ThreadPool,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine").field("cfg", &self.cfg).finish()
    }
}

impl Engine {
    pub fn new(cfg: EngineConfig) -> Result<Engine> {
        cfg.check()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(Engine { cfg, pool })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    /// `G_i = sum_j |r_ij|` for every column of the window.
    pub fn row_abs_sums(&self, z: &StandardizedWindow) -> Vec<f64> {
        let n = z.n();
        let block = self.cfg.block.min(n.max(1));
        let nb = n.div_ceil(block);
        let compensated = n > COMPENSATED_ABOVE;

        let tiles: Vec<(usize, usize)> = (0..nb).flat_map(|bi| (bi..nb).map(move |bj| (bi, bj))).collect();
        let sums: Vec<TileSums> = self.pool.install(|| {
            tiles
                .par_iter()
                .map(|&(bi, bj)| tile_sums(z, block, bi, bj, compensated))
                .collect()
        });

        // partial[i * nb + b]: contribution of column block b to row i.
        let mut partial = vec![0.0; n * nb];
        for t in &sums {
            for (off, v) in t.rows.iter().enumerate() {
                partial[(t.bi * block + off) * nb + t.bj] = *v;
            }
            for (off, v) in t.cols.iter().enumerate() {
                partial[(t.bj * block + off) * nb + t.bi] = *v;
            }
        }
        partial
            .chunks_exact(nb.max(1))
            .take(n)
            .map(|row| {
                let mut acc = RowSum::default();
                for v in row {
                    acc.add(*v, compensated);
                }
                acc.value()
            })
            .collect()
    }

    fn aggregate(&self, g: &[f64]) -> f64 {
        aggregate(g, self.cfg.aggregate)
    }

    /// One indicator vector per evaluation time `t = k ..= T`.
    pub fn indicator_series(&self, p: &Panel, w: WindowSpec, mode_label: &str) -> Result<IndicatorSeries> {
        let k = w.k();
        if p.periods_len() < k {
            return Err(Error::PanelShorterThanWindow {
                periods: p.periods_len(),
                k,
            });
        }
        let times: Vec<usize> = (k..=p.periods_len()).collect();
        let mut g = Vec::with_capacity(times.len());
        let mut v_agg = Vec::with_capacity(times.len());
        for &t in &times {
            let z = standardize(&window_slice(p, t, w)?);
            let row = self.row_abs_sums(&z);
            v_agg.push(self.aggregate(&row));
            g.push(row);
        }
        Ok(IndicatorSeries {
            mode_label: mode_label.to_owned(),
            aggregate: self.cfg.aggregate,
            param_ids: p.params().iter().map(|m| m.id.clone()).collect(),
            times,
            g,
            v_agg,
        })
    }
}

fn aggregate(g: &[f64], how: Aggregate) -> f64 {
    let compensated = g.len() > COMPENSATED_ABOVE;
    let mut acc = RowSum::default();
    for v in g {
        acc.add(*v, compensated);
    }
    match how {
        Aggregate::Sum => acc.value(),
        Aggregate::Mean => acc.value() / g.len() as f64,
    }
}

/// Convenience wrapper building a one-off [`Engine`].
pub fn row_abs_sums(z: &StandardizedWindow, cfg: &EngineConfig) -> Result<Vec<f64>> {
    Ok(Engine::new(cfg.clone())?.row_abs_sums(z))
}

pub fn indicator_series(p: &Panel, w: WindowSpec, cfg: &EngineConfig, mode_label: &str) -> Result<IndicatorSeries> {
    Engine::new(cfg.clone())?.indicator_series(p, w, mode_label)
}

/// Indicator vectors over time for one operating mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSeries {
    pub mode_label: String,
    pub aggregate: Aggregate,
    /// Parameter ids matching the entries of each `g` vector. Empty for an
    /// opaque series that only carries `v_agg`.
    pub param_ids: Vec<String>,
    /// Evaluation indices, ascending.
    pub times: Vec<usize>,
    /// `g[s][i]` is `G_i(times[s])`.
    pub g: Vec<Vec<f64>>,
    /// `V(times[s])`.
    pub v_agg: Vec<f64>,
}

impl IndicatorSeries {
    /// A series known only through its per-time aggregate (e.g. a published
    /// table). `g` vectors are empty.
    pub fn opaque(mode_label: &str, times: Vec<usize>, v_agg: Vec<f64>) -> Result<IndicatorSeries> {
        if times.len() != v_agg.len() {
            return Err(Error::Dimension(format!(
                "{} times for {} values",
                times.len(),
                v_agg.len()
            )));
        }
        Ok(IndicatorSeries {
            mode_label: mode_label.to_owned(),
            aggregate: Aggregate::Sum,
            param_ids: Vec::new(),
            g: vec![Vec::new(); times.len()],
            times,
            v_agg,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n(&self) -> usize {
        self.param_ids.len()
    }

    /// CSV with header `t,v_<aggregate>,<param ids...>`; values in shortest
    /// round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let v_col = format!("v_{}", self.aggregate);
        let header = ["t", v_col.as_str()]
            .into_iter()
            .chain(self.param_ids.iter().map(String::as_str));
        wtr.write_record(header).map_err(Error::from_csv)?;
        let mut rec = Vec::with_capacity(self.n() + 2);
        for s in 0..self.len() {
            rec.clear();
            rec.push(self.times[s].to_string());
            rec.push(self.v_agg[s].to_string());
            rec.extend(self.g[s].iter().map(f64::to_string));
            wtr.write_record(&rec).map_err(Error::from_csv)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`IndicatorSeries::write_csv`].
    pub fn read_csv<R: Read>(source: R, mode_label: &str) -> Result<IndicatorSeries> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let header = rdr.headers().map_err(Error::from_csv)?.clone();
        let aggregate = match (header.get(0), header.get(1)) {
            (Some("t"), Some("v_sum")) => Aggregate::Sum,
            (Some("t"), Some("v_mean")) => Aggregate::Mean,
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "indicator header must start with t,v_sum or t,v_mean".into(),
                })
            }
        };
        let param_ids: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
        let mut series = IndicatorSeries {
            mode_label: mode_label.to_owned(),
            aggregate,
            param_ids,
            times: Vec::new(),
            g: Vec::new(),
            v_agg: Vec::new(),
        };
        for (idx, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(Error::from_csv)?;
            let row = idx + 1;
            let cell = |c: usize| -> Result<f64> {
                rec[c].parse::<f64>().map_err(|_| {
                    Error::validation(Some(row), Some(&header[c]), format!("non-numeric cell \"{}\"", &rec[c]))
                })
            };
            let t = rec[0]
                .parse::<usize>()
                .map_err(|_| Error::validation(Some(row), Some("t"), "time index must be a non-negative integer"))?;
            series.times.push(t);
            series.v_agg.push(cell(1)?);
            series.g.push((2..rec.len()).map(cell).collect::<Result<_>>()?);
        }
        Ok(series)
    }
}

/// `G = sum_t sum_i G_i(t)`.
pub fn total_indicator(s: &IndicatorSeries) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySeries);
    }
    let compensated = s.n() > COMPENSATED_ABOVE;
    let mut acc = RowSum::default();
    for row in &s.g {
        for v in row {
            acc.add(*v, compensated);
        }
    }
    Ok(acc.value())
}

/// Sliding-window state: the last `k` rows plus running column sums.
///
/// Each slide drops the oldest row and adds the newest, updating the column
/// means in O(1); the state resynchronises with a full standardization every
/// `k` slides, once the window has been entirely replaced.
#[derive(Debug, Clone)]
pub struct IncrementalState {
    k: usize,
    n: usize,
    /// Front is the most recent row, `x(t - 1)`.
    rows: VecDeque<Vec<f64>>,
    sums: Vec<RowSum>,
    at_time: usize,
    since_sync: usize,
    z: StandardizedWindow,
}

impl IncrementalState {
    pub fn new(p: &Panel, t: usize, w: WindowSpec) -> Result<IncrementalState> {
        Ok(IncrementalState::from_window(&window_slice(p, t, w)?))
    }

    pub fn from_window(w: &WindowMatrix) -> IncrementalState {
        let rows: VecDeque<Vec<f64>> = (0..w.k()).map(|l| w.row(l).to_vec()).collect();
        let mut state = IncrementalState {
            k: w.k(),
            n: w.n(),
            rows,
            sums: Vec::new(),
            at_time: w.at_time(),
            since_sync: 0,
            z: standardize(w),
        };
        state.recompute_sums();
        state
    }

    fn recompute_sums(&mut self) {
        self.sums = vec![RowSum::default(); self.n];
        for row in &self.rows {
            for (s, v) in self.sums.iter_mut().zip(row) {
                s.add(*v, true);
            }
        }
    }

    pub fn at_time(&self) -> usize {
        self.at_time
    }

    pub fn standardized(&self) -> &StandardizedWindow {
        &self.z
    }

    /// The current window as a matrix, rows `t-1 .. t-k`.
    pub fn window(&self) -> WindowMatrix {
        let rows: Vec<Vec<f64>> = self.rows.iter().cloned().collect();
        WindowMatrix::from_rows(&rows, self.at_time).expect("state holds k >= 2 rows of width n")
    }

    /// Advances the window by one period.
    pub fn push(&mut self, next_row: &[f64]) -> Result<()> {
        if next_row.len() != self.n {
            return Err(Error::Dimension(format!(
                "row of length {} for a {}-column window",
                next_row.len(),
                self.n
            )));
        }
        if let Some((column, &value)) = next_row.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { column, value });
        }
        let oldest = self.rows.pop_back().expect("window is never empty");
        for ((s, new), old) in self.sums.iter_mut().zip(next_row).zip(&oldest) {
            s.add(*new, true);
            s.add(-*old, true);
        }
        self.rows.push_front(next_row.to_vec());
        self.at_time += 1;
        self.since_sync += 1;

        if self.since_sync == self.k {
            self.z = standardize(&self.window());
            self.recompute_sums();
            self.since_sync = 0;
            return Ok(());
        }

        let k = self.k;
        let mut z = vec![0.0; self.n * k];
        let mut dead = vec![false; self.n];
        let mut col = vec![0.0; k];
        for j in 0..self.n {
            for (c, row) in col.iter_mut().zip(&self.rows) {
                *c = row[j];
            }
            let mean = self.sums[j].value() / k as f64;
            dead[j] = standardize_column(&col, mean, &mut z[j * k..(j + 1) * k]);
        }
        self.z = StandardizedWindow::from_columns(z, dead, k, self.at_time);
        Ok(())
    }

    /// Slides the window and returns the new indicator vector.
    pub fn slide(&mut self, next_row: &[f64], engine: &Engine) -> Result<Vec<f64>> {
        self.push(next_row)?;
        Ok(engine.row_abs_sums(&self.z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrwin::{correlation_matrix, DEFAULT_MATERIALIZATION_LIMIT};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(threads: usize, block: usize) -> EngineConfig {
        EngineConfig::default().with_threads(threads).with_block(block)
    }

    fn random_panel(seed: u64, n: usize, t: usize) -> Panel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..t)
            .map(|_| (0..n).map(|_| rng.random_range(-100.0..100.0)).collect())
            .collect();
        let ids: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        Panel::from_rows(&refs, rows).unwrap()
    }

    fn hand_panel() -> Panel {
        Panel::from_rows(
            &["a", "b", "c"],
            vec![vec![1.0, 3.0, 1.0], vec![2.0, 2.0, 3.0], vec![3.0, 1.0, 2.0]],
        )
        .unwrap()
    }

    fn naive(z: &StandardizedWindow) -> Vec<f64> {
        correlation_matrix(z, DEFAULT_MATERIALIZATION_LIMIT)
            .unwrap()
            .abs_row_sums()
    }

    #[test]
    fn hand_oracle_row_sums() {
        let p = hand_panel();
        let z = standardize(&window_slice(&p, 3, WindowSpec::new(3).unwrap()).unwrap());
        for block in [1, 2, 3, 64] {
            let g = row_abs_sums(&z, &cfg(2, block)).unwrap();
            assert_abs_diff_eq!(g[0], 2.5, epsilon = 1e-12);
            assert_abs_diff_eq!(g[1], 2.5, epsilon = 1e-12);
            assert_abs_diff_eq!(g[2], 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_and_dead_columns() {
        let rows: Vec<Vec<f64>> = (0..6).map(|t| vec![t as f64 * 2.5 + 1.0; 5]).collect();
        let p = Panel::from_rows(&["a", "b", "c", "d", "e"], rows).unwrap();
        let z = standardize(&window_slice(&p, 6, WindowSpec::new(6).unwrap()).unwrap());
        let g = row_abs_sums(&z, &cfg(3, 2)).unwrap();
        for v in g {
            assert_abs_diff_eq!(v, 5.0, epsilon = 1e-12);
        }

        let p = Panel::from_rows(&["live", "dead"], vec![vec![1.0, 4.0], vec![3.0, 4.0], vec![2.0, 4.0]]).unwrap();
        let z = standardize(&window_slice(&p, 3, WindowSpec::new(3).unwrap()).unwrap());
        assert_eq!(row_abs_sums(&z, &cfg(1, 1)).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn series_point_count() {
        let p = random_panel(1, 4, 7);
        let s = indicator_series(&p, WindowSpec::new(6).unwrap(), &cfg(2, 2), "basic_mode").unwrap();
        assert_eq!(s.times, vec![6, 7]);
        assert_eq!(s.mode_label, "basic_mode");
        let short = random_panel(1, 4, 5);
        assert!(matches!(
            indicator_series(&short, WindowSpec::new(6).unwrap(), &cfg(1, 2), "x"),
            Err(Error::PanelShorterThanWindow { periods: 5, k: 6 })
        ));
    }

    #[test]
    fn constant_and_perfectly_correlated_series() {
        let p = Panel::from_rows(&["a", "b", "c"], vec![vec![2.0, 3.0, 4.0]; 9]).unwrap();
        let s = indicator_series(&p, WindowSpec::default(), &cfg(2, 2), "c").unwrap();
        assert_eq!(s.len(), 4);
        for (g, v) in s.g.iter().zip(&s.v_agg) {
            assert_eq!(g, &vec![1.0; 3]);
            assert_eq!(*v, 3.0);
        }
        assert_eq!(total_indicator(&s).unwrap(), 12.0);

        let rows: Vec<Vec<f64>> = (0..8)
            .map(|t| {
                let x = ((t * 7) % 5) as f64;
                vec![x, 3.0 * x + 1.0]
            })
            .collect();
        let p = Panel::from_rows(&["a", "b"], rows).unwrap();
        let s = indicator_series(&p, WindowSpec::default(), &cfg(1, 8), "c").unwrap();
        for (g, v) in s.g.iter().zip(&s.v_agg) {
            for gi in g {
                assert_abs_diff_eq!(*gi, 2.0, epsilon = 1e-12);
            }
            assert_abs_diff_eq!(*v, 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mean_aggregate() {
        let p = hand_panel();
        let c = cfg(1, 4).with_aggregate(Aggregate::Mean);
        let s = indicator_series(&p, WindowSpec::new(3).unwrap(), &c, "m").unwrap();
        assert_abs_diff_eq!(s.v_agg[0], 7.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn totals() {
        let s = IndicatorSeries {
            mode_label: "x".into(),
            aggregate: Aggregate::Sum,
            param_ids: vec!["a".into(), "b".into(), "c".into()],
            times: vec![3, 4],
            g: vec![vec![2.5, 2.5, 2.0]; 2],
            v_agg: vec![7.0; 2],
        };
        assert_eq!(total_indicator(&s).unwrap(), 14.0);

        let p = Panel::from_rows(&["a"], vec![vec![1.0], vec![5.0]]).unwrap();
        let s = indicator_series(&p, WindowSpec::new(2).unwrap(), &cfg(1, 1), "x").unwrap();
        assert_eq!(total_indicator(&s).unwrap(), 1.0);

        let empty = IndicatorSeries::opaque("e", vec![], vec![]).unwrap();
        assert!(matches!(total_indicator(&empty), Err(Error::EmptySeries)));
    }

    #[test]
    fn bad_config_rejected() {
        assert!(Engine::new(cfg(0, 4)).is_err());
        assert!(Engine::new(cfg(1, 0)).is_err());
        assert!("median".parse::<Aggregate>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = random_panel(3, 5, 9);
        let s = indicator_series(&p, WindowSpec::default(), &cfg(2, 2), "basic_mode").unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"t,v_sum,c0,c1"));
        let back = IndicatorSeries::read_csv(buf.as_slice(), "basic_mode").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn incremental_matches_full_recompute() {
        let p = random_panel(11, 10, 40);
        let w = WindowSpec::default();
        let engine = Engine::new(cfg(2, 3)).unwrap();
        let mut state = IncrementalState::new(&p, 6, w).unwrap();
        for t in 6..p.periods_len() {
            let g = state.slide(p.row(t), &engine).unwrap();
            let full = engine.row_abs_sums(&standardize(&window_slice(&p, t + 1, w).unwrap()));
            assert_eq!(state.at_time(), t + 1);
            for (a, b) in g.iter().zip(&full) {
                assert!((a - b).abs() <= 1e-9, "t={t}: {a} vs {b}");
            }
            if (t + 1 - 6) % 6 == 0 {
                // Window fully replaced: bitwise equal to the full path.
                assert_eq!(g, full);
            }
        }
    }

    #[test]
    fn incremental_static_window() {
        let p = random_panel(5, 6, 6);
        let engine = Engine::new(cfg(1, 4)).unwrap();
        let mut state = IncrementalState::new(&p, 6, WindowSpec::default()).unwrap();
        let before = engine.row_abs_sums(state.standardized());
        // The row about to drop out is x(0); pushing it back keeps the multiset.
        let g = state.slide(p.row(0), &engine).unwrap();
        for (a, b) in g.iter().zip(&before) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn incremental_rejects_bad_rows() {
        let p = random_panel(5, 3, 6);
        let mut state = IncrementalState::new(&p, 6, WindowSpec::default()).unwrap();
        assert!(matches!(
            state.push(&[1.0, f64::INFINITY, 2.0]),
            Err(Error::NonFinite { column: 1, .. })
        ));
        assert!(state.push(&[1.0]).is_err());
        assert_eq!(state.at_time(), 6);
    }

    #[test]
    fn incremental_constant_column_stays_dead() {
        let rows: Vec<Vec<f64>> = (0..12).map(|t| vec![5.3, t as f64 * 1.7 % 3.0]).collect();
        let p = Panel::from_rows(&["flat", "x"], rows).unwrap();
        let engine = Engine::new(cfg(1, 2)).unwrap();
        let mut state = IncrementalState::new(&p, 6, WindowSpec::default()).unwrap();
        for t in 6..12 {
            let g = state.slide(p.row(t), &engine).unwrap();
            assert!(state.standardized().is_dead(0));
            assert_eq!(g, vec![1.0, 1.0]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn blocked_matches_naive(seed in any::<u64>(), n in 1usize..60, block in 1usize..17, threads in 1usize..4) {
            let p = random_panel(seed, n, 6);
            let z = standardize(&window_slice(&p, 6, WindowSpec::default()).unwrap());
            let g = row_abs_sums(&z, &cfg(threads, block)).unwrap();
            for (a, b) in g.iter().zip(naive(&z)) {
                prop_assert!((a - b).abs() <= 1e-10);
                prop_assert!(*a >= 1.0 - 1e-12 && *a <= n as f64 + 1e-12);
            }
        }

        #[test]
        fn thread_count_does_not_change_bits(seed in any::<u64>(), n in 1usize..80, block in 1usize..9) {
            let p = random_panel(seed, n, 6);
            let z = standardize(&window_slice(&p, 6, WindowSpec::default()).unwrap());
            let one = row_abs_sums(&z, &cfg(1, block)).unwrap();
            for threads in [2, 8] {
                prop_assert_eq!(&row_abs_sums(&z, &cfg(threads, block)).unwrap(), &one);
            }
        }

        #[test]
        fn duplicate_column_adds_its_correlations(seed in any::<u64>(), n in 2usize..20, dup in 0usize..20) {
            let dup = dup % n;
            let p = random_panel(seed, n, 6);
            let mut rows: Vec<Vec<f64>> = p.rows().map(<[f64]>::to_vec).collect();
            for r in rows.iter_mut() {
                let v = r[dup];
                r.push(v);
            }
            let ids: Vec<String> = (0..=n).map(|i| format!("c{i}")).collect();
            let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
            let p2 = Panel::from_rows(&refs, rows).unwrap();
            let w = WindowSpec::default();
            let z = standardize(&window_slice(&p, 6, w).unwrap());
            let r = correlation_matrix(&z, 64).unwrap();
            let g = row_abs_sums(&z, &cfg(1, 4)).unwrap();
            let g2 = row_abs_sums(&standardize(&window_slice(&p2, 6, w).unwrap()), &cfg(1, 4)).unwrap();
            for j in 0..n {
                let expected = if j == dup { g[j] + 1.0 } else { g[j] + r.get(j, dup).abs() };
                prop_assert!((g2[j] - expected).abs() <= 1e-10, "j={} {} vs {}", j, g2[j], expected);
            }
        }
    }
}
