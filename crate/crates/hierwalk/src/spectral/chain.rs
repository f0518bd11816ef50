// SPDX-License-Identifier: Apache-2.0
//! Even-chain inverse, Sturm counts and eigenvalue-window densities.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SpectralError;
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct ChainInverse {
    pub inverse: DMatrix<f64>,
    /// `‖H⁻¹‖_{1,∞}`: largest column ℓ₁ norm.
    pub max_column_l1: f64,
    /// `1 / (√L · ‖H⁻¹‖_{1,∞}) ≤ min |λ|`.
    pub bound: f64,
}

/// Inverse of the zero-diagonal chain with hoppings `t` (length `L = t.len() + 1`, even).
/// Only (odd, even) entries survive: for even `c` and odd `r > c`,
/// `G[r][c] = (1/t_c) ∏_{odd q, c<q<r−1} (−t_q / t_{q+1})`, and `G` is symmetric.
pub fn even_chain_inverse(t: &[f64]) -> Result<ChainInverse, SpectralError> {
    let len = t.len() + 1;
    if len % 2 == 1 {
        return Err(SpectralError::OddChain(len));
    }
    if let Some(k) = t.iter().position(|&x| x == 0.0) {
        return Err(SpectralError::ZeroHopping(k));
    }
    let mut g = DMatrix::zeros(len, len);
    for c in (0..len).step_by(2) {
        let mut v = 1.0 / t[c];
        let mut r = c + 1;
        loop {
            g[(r, c)] = v;
            g[(c, r)] = v;
            if r + 2 >= len {
                break;
            }
            v *= -t[r] / t[r + 1];
            r += 2;
        }
    }
    let max_column_l1 = g.column_iter().map(|col| col.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    Ok(ChainInverse { bound: 1.0 / ((len as f64).sqrt() * max_column_l1), inverse: g, max_column_l1 })
}

/// Number of eigenvalues `< x` of the symmetric tridiagonal matrix (Sturm sequence).
pub fn eigen_count_below(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let b2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
        q = diag[i] - x - if i > 0 { b2 / q } else { 0.0 };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs() + 1e-300);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Eigenvalues in `(lo, hi)`.
pub fn tridiagonal_window_count(diag: &[f64], off: &[f64], lo: f64, hi: f64) -> usize {
    let below_hi = eigen_count_below(diag, off, hi);
    // eigenvalues ≤ lo: count below the next float up
    let at_or_below_lo = eigen_count_below(diag, off, lo.next_up());
    below_hi.saturating_sub(at_or_below_lo)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DosEstimate {
    /// Mean fraction of eigenvalues in `(−ε, ε)`.
    pub mu: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// `μ(−ε, ε)` averaged over zero-diagonal chains drawn by `sample(seed)`.
pub fn dos_window<F>(sample: F, eps: f64, trials: usize, seed: u64) -> DosEstimate
where
    F: Fn(u64) -> Vec<f64> + Sync,
{
    let fractions: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let t = sample(rng::mix(seed, k as u64));
            let diag = vec![0.0; t.len() + 1];
            tridiagonal_window_count(&diag, &t, -eps, eps) as f64 / diag.len() as f64
        })
        .collect();
    let n = trials as f64;
    let mu = fractions.iter().sum::<f64>() / n;
    let var = fractions.iter().map(|f| (f - mu).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    DosEstimate { mu, stderr: (var / n).sqrt(), trials }
}
