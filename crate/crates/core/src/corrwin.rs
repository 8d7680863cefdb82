//! Windowed standardization and Pearson correlation.
//!
//! This is the explicit, small-`n` realization: [`correlation_matrix`] builds
//! the whole `n x n` matrix. The indicator engine evaluates each pair with the
//! same arithmetic as [`correlation_entry`], so both paths agree entry for entry.

use crate::error::{Error, Result};
use crate::panel::WindowMatrix;

/// Columns whose in-window sample variance falls below this are dead.
pub const DEAD_VARIANCE: f64 = 1e-24;

/// Largest `n` for which [`correlation_matrix`] will allocate.
pub const DEFAULT_MATERIALIZATION_LIMIT: usize = 4096;

/// A window with every column centered and scaled to unit sample variance.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedWindow {
    /// Column-major: column `j` occupies `z[j*k .. (j+1)*k]`.
    z: Vec<f64>,
    dead: Vec<bool>,
    k: usize,
    n: usize,
    at_time: usize,
}

impl StandardizedWindow {
    pub(crate) fn from_columns(z: Vec<f64>, dead: Vec<bool>, k: usize, at_time: usize) -> Self {
        let n = dead.len();
        debug_assert_eq!(z.len(), n * k);
        StandardizedWindow { z, dead, k, n, at_time }
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

    /// Standardized values of column `j`, in window row order.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.z[j * self.k..(j + 1) * self.k]
    }

    pub fn get(&self, row: usize, j: usize) -> f64 {
        self.z[j * self.k + row]
    }

    pub fn is_dead(&self, j: usize) -> bool {
        self.dead[j]
    }

    pub fn dead_mask(&self) -> &[bool] {
        &self.dead
    }
}

/// Centers and scales a single window column into `out`; returns whether the
/// column is dead.
pub(crate) fn standardize_column(values: &[f64], mean: f64, out: &mut [f64]) -> bool {
    let k = values.len();
    let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    let var = ss / (k - 1) as f64;
    if var < DEAD_VARIANCE {
        out.fill(0.0);
        return true;
    }
    let s = var.sqrt();
    for (o, x) in out.iter_mut().zip(values) {
        *o = (x - mean) / s;
    }
    false
}

/// `z = (x - mean) / s` per column, with `s^2 = sum (x - mean)^2 / (k - 1)`.
pub fn standardize(w: &WindowMatrix) -> StandardizedWindow {
    let (k, n) = (w.k(), w.n());
    let mut z = vec![0.0; n * k];
    let mut dead = vec![false; n];
    let mut col = vec![0.0; k];
    for j in 0..n {
        for (l, c) in col.iter_mut().enumerate() {
            *c = w.get(l, j);
        }
        let mean = col.iter().sum::<f64>() / k as f64;
        dead[j] = standardize_column(&col, mean, &mut z[j * k..(j + 1) * k]);
    }
    StandardizedWindow::from_columns(z, dead, k, w.at_time())
}

/// Unchecked pair correlation shared by every path that needs `r_ij`.
#[inline]
pub(crate) fn pair_correlation(z: &StandardizedWindow, i: usize, j: usize) -> f64 {
    if i == j {
        return 1.0;
    }
    if z.dead[i] || z.dead[j] {
        return 0.0;
    }
    raw_correlation(z, i, j).clamp(-1.0, 1.0)
}

/// Same as [`pair_correlation`] but without the clamp; used to check how far
/// rounding pushes a coefficient past the unit bound.
#[inline]
pub fn raw_correlation(z: &StandardizedWindow, i: usize, j: usize) -> f64 {
    let dot: f64 = z.column(i).iter().zip(z.column(j)).map(|(a, b)| a * b).sum();
    dot / (z.k - 1) as f64
}

/// `r_ij`: 1 on the diagonal, 0 against a dead column, otherwise
/// `z_i . z_j / (k - 1)` clamped to `[-1, 1]`.
pub fn correlation_entry(z: &StandardizedWindow, i: usize, j: usize) -> Result<f64> {
    for idx in [i, j] {
        if idx >= z.n {
            return Err(Error::IndexOutOfRange { index: idx, n: z.n });
        }
    }
    Ok(pair_correlation(z, i, j))
}

/// A fully materialized correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationWindow {
    /// Row-major `n x n`.
    r: Vec<f64>,
    dead: Vec<bool>,
    n: usize,
    at_time: usize,
}

impl CorrelationWindow {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn at_time(&self) -> usize {
        self.at_time
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.r[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.r[i * self.n..(i + 1) * self.n]
    }

    pub fn dead_mask(&self) -> &[bool] {
        &self.dead
    }

    /// Row sums of `|r_ij|`, summed left to right. This is the naive route to
    /// the integral indicator.
    pub fn abs_row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().map(|v| v.abs()).sum()).collect()
    }
}

/// Builds `R = ||r_ij||`, computing the upper triangle and mirroring it.
pub fn correlation_matrix(z: &StandardizedWindow, limit: usize) -> Result<CorrelationWindow> {
    let n = z.n;
    if n > limit {
        return Err(Error::Capacity { n, limit });
    }
    let mut r = vec![0.0; n * n];
    for i in 0..n {
        r[i * n + i] = 1.0;
        for j in i + 1..n {
            let v = pair_correlation(z, i, j);
            r[i * n + j] = v;
            r[j * n + i] = v;
        }
    }
    Ok(CorrelationWindow {
        r,
        dead: z.dead.clone(),
        n,
        at_time: z.at_time,
    })
}
