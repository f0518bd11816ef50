// SPDX-License-Identifier: Apache-2.0
//! Closed-form zero modes of line and Lieb Hamiltonians, built in log space.

use serde::{Deserialize, Serialize};

use super::{residual, SpectralError};
use crate::graph::EffectiveHamiltonian;
use crate::lieb::LiebLattice;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sublattice {
    Line,
    Delta0,
    Delta1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroMode {
    /// Normalized amplitudes.
    pub coefficients: Vec<f64>,
    /// `ln|ψ_i|` of the normalized vector, `-inf` off the support. Stays
    /// accurate where `coefficients` underflow.
    pub log_abs: Vec<f64>,
    pub support: Sublattice,
    pub residual: f64,
}

impl ZeroMode {
    /// `ln|ψ_a ψ_b|`.
    pub fn log_overlap(&self, a: usize, b: usize) -> f64 {
        self.log_abs[a] + self.log_abs[b]
    }

    fn from_logs(log_abs: Vec<f64>, signs: Vec<f64>, support: Sublattice) -> Self {
        let m = log_abs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = log_abs.iter().map(|&a| (2.0 * (a - m)).exp()).sum();
        let ln_norm = m + 0.5 * sum.ln();
        let log_abs: Vec<f64> = log_abs.iter().map(|a| a - ln_norm).collect();
        let coefficients = log_abs.iter().zip(&signs).map(|(a, s)| s * a.exp()).collect();
        ZeroMode { coefficients, log_abs, support, residual: f64::NAN }
    }
}

/// `ψ_{2j+2} = −(t_{2j}/t_{2j+1}) ψ_{2j}`, odd sites zero.
pub fn zero_mode_from_hoppings(t: &[f64]) -> Result<ZeroMode, SpectralError> {
    let len = t.len() + 1;
    if len.is_multiple_of(2) {
        return Err(SpectralError::EvenChain(len));
    }
    if let Some(k) = t.iter().position(|&x| x == 0.0) {
        return Err(SpectralError::ZeroHopping(k));
    }
    let mut log_abs = vec![f64::NEG_INFINITY; len];
    let mut signs = vec![0.0; len];
    log_abs[0] = 0.0;
    signs[0] = 1.0;
    for j in (0..len - 1).step_by(2) {
        log_abs[j + 2] = log_abs[j] + t[j].abs().ln() - t[j + 1].abs().ln();
        signs[j + 2] = -signs[j] * t[j].signum() * t[j + 1].signum();
    }
    let mut z = ZeroMode::from_logs(log_abs, signs, Sublattice::Line);
    let psi = &z.coefficients;
    z.residual = (0..len)
        .map(|k| {
            let left = if k > 0 { t[k - 1] * psi[k - 1] } else { 0.0 };
            let right = if k + 1 < len { t[k] * psi[k + 1] } else { 0.0 };
            (left + right).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    Ok(z)
}

/// Zero mode of a line Hamiltonian (zero diagonal assumed).
pub fn zero_mode_line(h: &EffectiveHamiltonian) -> Result<ZeroMode, SpectralError> {
    let mut z = zero_mode_from_hoppings(&h.hoppings())?;
    z.residual = residual(&h.matrix, &z.coefficients);
    Ok(z)
}

/// Δ₀-supported zero mode of a Lieb Hamiltonian. Amplitudes follow the
/// canonical staircase; every edge-site equation is then checked, which is
/// where a gauge violation shows up.
pub fn zero_mode_lieb(lattice: &LiebLattice, h: &EffectiveHamiltonian) -> Result<ZeroMode, SpectralError> {
    let n0 = lattice.delta0_len();
    let hop = |a: usize, b: usize| h.matrix[(a, b)];
    for m in n0..lattice.len() {
        let (lo, hi) = lattice.endpoints(m);
        if hop(lo, m) == 0.0 {
            return Err(SpectralError::ZeroHopping(m));
        }
        if hop(m, hi) == 0.0 {
            return Err(SpectralError::ZeroHopping(m));
        }
    }
    let mut log_abs = vec![f64::NEG_INFINITY; lattice.len()];
    let mut signs = vec![0.0; lattice.len()];
    log_abs[0] = 0.0;
    signs[0] = 1.0;
    // Row m of Hψ = 0: t(m,lo) ψ_lo + t(m,hi) ψ_hi = 0
    let step = |m: usize, from_log: f64, from_sign: f64| {
        let (lo, hi) = lattice.endpoints(m);
        let (a, b) = (hop(m, lo), hop(m, hi));
        (from_log + a.abs().ln() - b.abs().ln(), -from_sign * a.signum() * b.signum())
    };
    for x in 1..n0 {
        let (m, prev) = lattice.staircase_step(x).expect("non-origin site");
        (log_abs[x], signs[x]) = step(m, log_abs[prev], signs[prev]);
    }
    for m in n0..lattice.len() {
        let (lo, hi) = lattice.endpoints(m);
        let (want_log, want_sign) = step(m, log_abs[lo], signs[lo]);
        let scale = 1.0 + want_log.abs();
        if (want_log - log_abs[hi]).abs() > 1e-9 * scale || want_sign != signs[hi] {
            return Err(SpectralError::GaugeViolated(m));
        }
    }
    let mut z = ZeroMode::from_logs(log_abs, signs, Sublattice::Delta0);
    z.residual = residual(&h.matrix, &z.coefficients);
    Ok(z)
}
