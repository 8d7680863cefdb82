//! Desk-scale timing of the indicator engine and extrapolation to the full
//! enterprise dimension.
//!
//! One evaluation point costs `n (n - 1) / 2` pair dot products of length `k`,
//! so the measured time scales to a larger `n` by the ratio of pair counts.
//! The full-scale run itself is not attempted.

use std::fmt;
use std::time::Instant;

use digicopy::synth::{Loadings, NoiseSigma};
use digicopy::{generate_panel, standardize, window_slice, Engine, EngineConfig, Panel, SynthSpec, WindowSpec};

/// Parameter count of the full-scale enterprise copy.
pub const FULL_SCALE_N: usize = 1_200_000;

/// Evaluation points in a monthly series the length of the published table.
pub const FULL_SCALE_POINTS: usize = 57;

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleReport {
    pub n: usize,
    pub k: usize,
    pub threads: usize,
    pub block: usize,
    /// Wall time of one evaluation point (standardize + row sums), seconds.
    pub seconds: f64,
    /// Sum of the indicator vector, as a sanity value.
    pub v: f64,
    pub full_scale_n: usize,
    pub extrapolated_point_seconds: f64,
    pub extrapolated_series_seconds: f64,
}

pub fn pair_count(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Factor-model panel with `n` columns and `k + 1` periods: 16 independent
/// blocks plus unit noise, so correlations are neither trivial nor dead.
pub fn desk_panel(n: usize, k: usize, seed: u64) -> Panel {
    let blocks = 16.min(n);
    let mut sizes = vec![n / blocks; blocks];
    for s in sizes.iter_mut().take(n % blocks) {
        *s += 1;
    }
    let spec = SynthSpec {
        n,
        periods: k + 1,
        loadings: Loadings::Blocks { blocks: sizes },
        noise_sigma: NoiseSigma::Uniform(1.0),
        level: 1_000.0,
        processes: None,
        regime_switch: None,
        seed,
    };
    generate_panel(&spec).expect("desk spec is valid")
}

/// Times one evaluation point at the last valid `t` of a desk panel.
pub fn measure_point(n: usize, k: usize, cfg: EngineConfig) -> ScaleReport {
    let panel = desk_panel(n, k, 0x5eed);
    let w = WindowSpec::new(k).expect("k >= 2");
    let (threads, block) = (cfg.threads, cfg.block);
    let engine = Engine::new(cfg).expect("valid engine config");

    let start = Instant::now();
    let z = standardize(&window_slice(&panel, panel.periods_len(), w).expect("t = T is valid"));
    let g = engine.row_abs_sums(&z);
    let seconds = start.elapsed().as_secs_f64();

    let per_point = seconds * pair_count(FULL_SCALE_N) / pair_count(n);
    ScaleReport {
        n,
        k,
        threads,
        block,
        seconds,
        v: g.iter().sum(),
        full_scale_n: FULL_SCALE_N,
        extrapolated_point_seconds: per_point,
        extrapolated_series_seconds: per_point * FULL_SCALE_POINTS as f64,
    }
}

impl fmt::Display for ScaleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "desk scale: n = {}, k = {}, threads = {}, block = {}",
            self.n, self.k, self.threads, self.block
        )?;
        writeln!(f, "  pairs per point:  {:.3e}", pair_count(self.n))?;
        writeln!(f, "  one point:        {:.3} s (V = {:.4})", self.seconds, self.v)?;
        writeln!(f, "extrapolated (not run): n = {}", self.full_scale_n)?;
        writeln!(f, "  pairs per point:  {:.3e}", pair_count(self.full_scale_n))?;
        writeln!(
            f,
            "  one point:        {:.1} min",
            self.extrapolated_point_seconds / 60.0
        )?;
        write!(
            f,
            "  {} points:        {:.1} h",
            FULL_SCALE_POINTS,
            self.extrapolated_series_seconds / 3600.0
        )
    }
}
