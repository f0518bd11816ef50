// SPDX-License-Identifier: Apache-2.0
//! Continuous-time quantum walks: subspace and full-graph evolution, exact
//! time-averaged exit probability and the traversal protocol.

mod chebyshev;

pub use chebyshev::{bessel_j_sequence, evolve_full, FULL_NNZ_CAP};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EffectiveHamiltonian, HierarchicalGraph, Topology};
use crate::lieb::LiebLattice;
use crate::linalg::Csr;
use crate::rng;
use crate::spectral::{self, decompose, Decomposition, SpectralError, ZERO_TOL};

#[derive(Debug, Error, PartialEq)]
pub enum QwalkError {
    #[error("entrance and exit have no overlap through any eigenspace")]
    ZeroOverlap,
    #[error("gap must be positive, got {0}")]
    NonPositiveGap(f64),
    #[error("full evolution has {nnz} nonzeros, cap is {cap}")]
    CapExceeded { nnz: usize, cap: usize },
    #[error("graph carries no supergraph spec")]
    MissingSpec,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkState {
    pub amplitudes: Vec<Complex64>,
}

impl WalkState {
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[i] = Complex64::new(1.0, 0.0);
        WalkState { amplitudes }
    }

    /// Uniform superposition over `range`.
    pub fn uniform(dim: usize, range: std::ops::Range<usize>) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        let a = 1.0 / (range.len() as f64).sqrt();
        for i in range {
            amplitudes[i] = Complex64::new(a, 0.0);
        }
        WalkState { amplitudes }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &WalkState) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }
}

/// `e^{−iHt}` from a shared eigendecomposition.
pub struct Propagator {
    pub dec: Decomposition,
}

impl Propagator {
    pub fn new(h: &DMatrix<f64>) -> Result<Self, QwalkError> {
        Ok(Propagator { dec: decompose(h)? })
    }

    pub fn evolve(&self, state: &WalkState, t: f64) -> WalkState {
        let v = &self.dec.vectors;
        let n = v.nrows();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (k, &e) in self.dec.values.iter().enumerate() {
            let col = v.column(k);
            let c: Complex64 = (0..n).map(|i| state.amplitudes[i] * col[i]).sum();
            let c = c * Complex64::from_polar(1.0, -e * t);
            for i in 0..n {
                out[i] += c * col[i];
            }
        }
        WalkState { amplitudes: out }
    }

    /// `⟨exit| e^{−iHt} |init⟩` for basis states.
    pub fn amplitude(&self, init: usize, exit: usize, t: f64) -> Complex64 {
        if t == 0.0 {
            return Complex64::new(if init == exit { 1.0 } else { 0.0 }, 0.0);
        }
        let v = &self.dec.vectors;
        self.dec
            .values
            .iter()
            .enumerate()
            .map(|(k, &e)| Complex64::from_polar(v[(exit, k)] * v[(init, k)], -e * t))
            .sum()
    }

    fn weights(&self, init: usize, exit: usize) -> Vec<f64> {
        let v = &self.dec.vectors;
        (0..self.dec.values.len()).map(|k| v[(exit, k)] * v[(init, k)]).collect()
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `(1/τ)∫₀^τ |⟨exit|e^{−iHt}|init⟩|² dt = Σ c_E c_{E'} sinc((E − E')τ)`.
pub fn exit_probability_time_avg(p: &Propagator, init: usize, exit: usize, tau: f64) -> f64 {
    time_avg_from_weights(p, &p.weights(init, exit), tau)
}

/// Time-averaged exit probability between real unit vectors, e.g. uniform
/// superpositions over the entrance and exit supervertices.
pub fn exit_probability_vectors(p: &Propagator, init: &[f64], exit: &[f64], tau: f64) -> f64 {
    let v = &p.dec.vectors;
    let c: Vec<f64> = (0..p.dec.values.len())
        .map(|k| {
            let col = v.column(k);
            let a: f64 = init.iter().zip(col.iter()).map(|(x, y)| x * y).sum();
            let b: f64 = exit.iter().zip(col.iter()).map(|(x, y)| x * y).sum();
            a * b
        })
        .collect();
    time_avg_from_weights(p, &c, tau)
}

fn time_avg_from_weights(p: &Propagator, c: &[f64], tau: f64) -> f64 {
    let e = &p.dec.values;
    let idx: Vec<usize> = (0..c.len()).filter(|&k| c[k] != 0.0).collect();
    let mut total = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        total += c[i] * c[i];
        for &j in &idx[a + 1..] {
            total += 2.0 * c[i] * c[j] * sinc((e[i] - e[j]) * tau);
        }
    }
    total.clamp(0.0, 1.0)
}

/// Monte-Carlo estimate over uniform `t ∈ [0, τ]`: `(mean, stderr)`.
pub fn exit_probability_mc(p: &Propagator, init: usize, exit: usize, tau: f64, samples: usize, seed: u64) -> (f64, f64) {
    let mut r = rng::seeded(seed);
    let v: Vec<f64> = (0..samples).map(|_| p.amplitude(init, exit, tau * r.random::<f64>()).norm_sqr()).collect();
    let n = samples as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// `(Σ |a_E b_E|)²`, an upper bound on the exit probability at every time.
pub fn exit_upper_bound(p: &Propagator, init: usize, exit: usize) -> f64 {
    p.weights(init, exit).iter().map(|c| c.abs()).sum::<f64>().powi(2)
}

/// `τ = 4 / (Δ · overlap)`.
pub fn choose_tau(gap: f64, overlap: f64) -> Result<f64, QwalkError> {
    if !(overlap > 0.0 && overlap.is_finite()) {
        return Err(QwalkError::ZeroOverlap);
    }
    if !(gap > 0.0) {
        return Err(QwalkError::NonPositiveGap(gap));
    }
    Ok(4.0 / (gap * overlap))
}

/// Eigenspace used by the protocol and its isolation from the rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pivot {
    pub energy: f64,
    /// Indices into the sorted eigenvalues.
    pub members: Vec<usize>,
    /// `|⟨exit|Π|init⟩|`.
    pub overlap: f64,
    /// `ln` of the overlap, accurate when the overlap underflows.
    pub log_overlap: f64,
    /// Distance to the nearest eigenvalue outside the cluster.
    pub gap: f64,
    pub closed_form: bool,
}

/// The zero eigenspace when the structure provides a zero mode (odd line,
/// Lieb); otherwise the eigenvalue cluster with the largest end-to-end overlap.
/// The time average is invariant under `H → H − E`, so the protocol bound
/// applies to any exactly degenerate cluster.
pub fn find_pivot(h: &EffectiveHamiltonian, p: &Propagator) -> Result<Pivot, QwalkError> {
    let values = &p.dec.values;
    let rho = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = ZERO_TOL * rho.max(f64::MIN_POSITIVE);
    let zero_diag = (0..h.dim()).all(|i| h.matrix[(i, i)] == 0.0);
    let closed = match &h.topology {
        Topology::Line if zero_diag && h.dim() % 2 == 1 => {
            let z = spectral::zero_mode_line(h)?;
            Some(z.log_overlap(h.entrance, h.exit))
        }
        Topology::Lieb { n, d } if zero_diag => {
            let lat = LiebLattice::new(*n, *d);
            let z = spectral::zero_mode_lieb(&lat, h)?;
            Some(z.log_overlap(h.entrance, h.exit))
        }
        _ => None,
    };
    let weights = p.weights(h.entrance, h.exit);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for k in 0..values.len() {
        match clusters.last_mut() {
            Some(c) if values[k] - values[*c.last().unwrap()] <= tol => c.push(k),
            _ => clusters.push(vec![k]),
        }
    }
    let centre = |c: &[usize]| c.iter().map(|&k| values[k]).sum::<f64>() / c.len() as f64;
    let projected = |c: &[usize]| c.iter().map(|&k| weights[k]).sum::<f64>().abs();
    let chosen = match closed {
        Some(_) => clusters
            .iter()
            .min_by(|a, b| centre(a).abs().total_cmp(&centre(b).abs()))
            .expect("nonempty spectrum"),
        None => clusters
            .iter()
            .max_by(|a, b| projected(a).total_cmp(&projected(b)))
            .expect("nonempty spectrum"),
    };
    let energy = centre(chosen);
    let gap = clusters
        .iter()
        .filter(|c| !std::ptr::eq(*c, chosen))
        .map(|c| c.iter().map(|&k| (values[k] - energy).abs()).fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min);
    let (overlap, log_overlap) = match closed {
        Some(l) => (l.exp(), l),
        None => {
            let o = projected(chosen);
            (o, o.ln())
        }
    };
    if overlap == 0.0 && log_overlap == f64::NEG_INFINITY {
        return Err(QwalkError::ZeroOverlap);
    }
    Ok(Pivot { energy, members: chosen.clone(), overlap, log_overlap, gap, closed_form: closed.is_some() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraversalReport {
    pub pivot: Pivot,
    pub tau: f64,
    pub p_bar: f64,
    /// `overlap² / 4`.
    pub bound: f64,
    pub holds: bool,
    /// Fraction of trials ending at the exit, `None` when no trials were run.
    pub success_rate: Option<f64>,
    pub trials: usize,
}

/// Draw `t ∈ [0, τ]`, evolve from the entrance, measure; `τ = 4/(Δ·overlap)`.
pub fn traversal_protocol(h: &EffectiveHamiltonian, trials: usize, seed: u64) -> Result<TraversalReport, QwalkError> {
    let p = Propagator::new(&h.matrix)?;
    let pivot = find_pivot(h, &p)?;
    let tau = choose_tau(pivot.gap, pivot.overlap)?;
    let p_bar = exit_probability_time_avg(&p, h.entrance, h.exit, tau);
    let bound = 0.25 * pivot.overlap * pivot.overlap;
    let success_rate = (trials > 0).then(|| {
        let hits: usize = (0..trials)
            .into_par_iter()
            .map(|k| {
                let mut r = rng::substream(seed, k as u64);
                let t = tau * r.random::<f64>();
                let prob = p.amplitude(h.entrance, h.exit, t).norm_sqr();
                (r.random::<f64>() < prob) as usize
            })
            .sum();
        hits as f64 / trials as f64
    });
    Ok(TraversalReport { holds: p_bar >= bound, pivot, tau, p_bar, bound, success_rate, trials })
}

/// Largest `|⟨S_exit|e^{−iAt}|S_init⟩ − ⟨exit|e^{−iHt}|init⟩|` over `times`.
pub fn crosscheck_full_vs_subspace(
    graph: &HierarchicalGraph,
    h: &EffectiveHamiltonian,
    times: &[f64],
) -> Result<f64, QwalkError> {
    let spec = graph.spec().ok_or(QwalkError::MissingSpec)?;
    let a = Csr::adjacency(graph);
    if a.nnz() > FULL_NNZ_CAP {
        return Err(QwalkError::CapExceeded { nnz: a.nnz(), cap: FULL_NNZ_CAP });
    }
    let init = WalkState::uniform(graph.n(), graph.block(spec.entrance));
    let exit = WalkState::uniform(graph.n(), graph.block(spec.exit));
    let p = Propagator::new(&h.matrix)?;
    let diffs: Result<Vec<f64>, QwalkError> = times
        .par_iter()
        .map(|&t| {
            let full = exit.inner(&evolve_full(&a, &init, t)?);
            let sub = p.amplitude(h.entrance, h.exit, t);
            Ok((full - sub).norm())
        })
        .collect();
    Ok(diffs?.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests;
