// SPDX-License-Identifier: Apache-2.0
//! Spectra, zero modes, gap bounds and localization diagnostics.

mod chain;
mod snake;
mod transfer;
mod zero_mode;

pub use chain::{dos_window, eigen_count_below, even_chain_inverse, tridiagonal_window_count, ChainInverse, DosEstimate};
pub use snake::{snake_gap_bound, snake_route, SnakeBound};
pub use transfer::{lyapunov, transfer_matrix, LyapunovEstimate, OnsiteLaw, GOLDEN_RATIO};
pub use zero_mode::{zero_mode_from_hoppings, zero_mode_lieb, zero_mode_line, Sublattice, ZeroMode};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{effective_hamiltonian, EffectiveHamiltonian, Sign, SupergraphSpec};
use crate::rng;

/// Largest dimension handed to the dense eigensolver.
pub const DENSE_CAP: usize = 8000;
/// Default relative tolerance for counting zero eigenvalues.
pub const ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("chain of length {0} is even and has no zero mode")]
    EvenChain(usize),
    #[error("chain of length {0} is odd; the closed-form inverse needs even length")]
    OddChain(usize),
    #[error("hopping {0} is zero")]
    ZeroHopping(usize),
    #[error("dimension {dim} exceeds the dense cap {cap}")]
    CapExceeded { dim: usize, cap: usize },
    #[error("gauge condition fails at edge site {0}")]
    GaugeViolated(usize),
    #[error("degree identity fails at supervertex {0}")]
    DegreeIdentityViolated(usize),
    #[error("operation needs a 2D Lieb lattice")]
    NotTwoDimensional,
}

/// Eigenvalues sorted ascending with matching eigenvector columns.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

pub fn decompose(m: &DMatrix<f64>) -> Result<Decomposition, SpectralError> {
    if m.nrows() > DENSE_CAP {
        return Err(SpectralError::CapExceeded { dim: m.nrows(), cap: DENSE_CAP });
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.nrows(), |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(Decomposition { values, vectors })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub eigenvalues: Vec<f64>,
    /// Smallest `|λ|` above the zero threshold.
    pub gap: f64,
    pub zero_count: usize,
    /// Relative tolerance used; the absolute threshold is `tol · ρ(H)`.
    pub tol: f64,
    pub spectral_radius: f64,
    /// Zero count is unchanged at `10 · tol`.
    pub stable: bool,
}

fn count_below(values: &[f64], threshold: f64) -> usize {
    values.iter().filter(|v| v.abs() < threshold).count()
}

pub fn summarize(values: Vec<f64>, tol: f64) -> SpectralSummary {
    let rho = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = tol * rho;
    let zero_count = count_below(&values, threshold);
    let gap = values.iter().map(|v| v.abs()).filter(|&a| a >= threshold).fold(f64::INFINITY, f64::min);
    SpectralSummary {
        stable: count_below(&values, 10.0 * threshold) == zero_count,
        eigenvalues: values,
        gap,
        zero_count,
        tol,
        spectral_radius: rho,
    }
}

pub fn spectrum(h: &EffectiveHamiltonian, tol: f64) -> Result<SpectralSummary, SpectralError> {
    if h.dim() > DENSE_CAP {
        return Err(SpectralError::CapExceeded { dim: h.dim(), cap: DENSE_CAP });
    }
    let mut values: Vec<f64> = h.matrix.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(summarize(values, tol))
}

/// Line Hamiltonian with diagonal `2F_i/s_i`, after checking `D·s_i = 2F_i + Σ e`.
pub fn diagonal_effective_hamiltonian(spec: &SupergraphSpec) -> Result<EffectiveHamiltonian, SpectralError> {
    let inc = spec.incidence();
    for u in 0..spec.len() {
        let mut have = spec.diagonal(u) * 2u32;
        for &(k, _) in &inc[u] {
            have += &spec.edge_counts[k];
        }
        if have != &spec.sizes[u] * spec.degree.of(u) {
            return Err(SpectralError::DegreeIdentityViolated(u));
        }
    }
    Ok(effective_hamiltonian(spec, Sign::Adjacency))
}

/// Constant hopping `c` with onsite terms `U[0,1]` on `len` sites.
pub fn anderson_line(len: usize, c: f64, seed: u64) -> EffectiveHamiltonian {
    let mut h = EffectiveHamiltonian::chain(&vec![c; len.saturating_sub(1)]);
    let mut r = rng::seeded(seed);
    for i in 0..len {
        h.matrix[(i, i)] = r.random::<f64>();
    }
    h
}

/// `|Hψ|₂` for a real vector.
pub fn residual(h: &DMatrix<f64>, psi: &[f64]) -> f64 {
    (h * DVector::from_column_slice(psi)).norm()
}
