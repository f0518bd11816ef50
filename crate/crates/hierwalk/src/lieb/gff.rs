// SPDX-License-Identifier: Apache-2.0
//! Biased Gaussian free fields on cubic grids, pinned at the origin.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::LiebLattice;
use crate::graph::{EffectiveHamiltonian, Topology};
use crate::linalg::{conjugate_gradient, Csr};
use crate::rng;

/// Box `∏ dims[k]` with axis 0 fastest. Edges are ordered by axis, then by
/// their lower endpoint in a mixed radix where the edge axis has `dims[k] − 1`
/// values; this matches the edge-site indexing of `LiebLattice`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubicGrid {
    pub dims: Vec<usize>,
}

impl CubicGrid {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn stride(&self, k: usize) -> usize {
        self.dims[..k].iter().product()
    }

    /// `(lower, upper)` site pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for axis in 0..self.dims.len() {
            if self.dims[axis] < 2 {
                continue;
            }
            let radix: Vec<usize> =
                self.dims.iter().enumerate().map(|(k, &n)| if k == axis { n - 1 } else { n }).collect();
            let count: usize = radix.iter().product();
            for mut idx in 0..count {
                let mut site = 0;
                for (k, &r) in radix.iter().enumerate() {
                    site += (idx % r) * self.stride(k);
                    idx /= r;
                }
                out.push((site, site + self.stride(axis)));
            }
        }
        out
    }

    pub fn laplacian(&self) -> Csr {
        let mut trip = Vec::new();
        for (a, b) in self.edges() {
            let (a, b) = (a as u32, b as u32);
            trip.extend([(a, a, 1.0), (b, b, 1.0), (a, b, -1.0), (b, a, -1.0)]);
        }
        Csr::from_triplets(self.len(), trip)
    }
}

/// Draws from `exp(−Σ_e (Φ_b − Φ_a − J_e)² / 2g²)` with `Φ_0 = 0`.
pub struct GffSampler {
    chol_lower: DMatrix<f64>,
    mean: Vec<f64>,
    g: f64,
}

impl GffSampler {
    pub fn new(grid: &CubicGrid, bias: &[f64], g: f64) -> Self {
        assert!(g > 0.0, "field strength must be positive");
        let edges = grid.edges();
        assert_eq!(bias.len(), edges.len(), "one bias per edge");
        let n = grid.len();
        let m = n.saturating_sub(1);
        let mut lap = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (&(a, b), &j) in edges.iter().zip(bias) {
            for (v, s) in [(a, -1.0), (b, 1.0)] {
                if v > 0 {
                    rhs[v - 1] += s * j;
                    lap[(v - 1, v - 1)] += 1.0;
                }
            }
            if a > 0 && b > 0 {
                lap[(a - 1, b - 1)] -= 1.0;
                lap[(b - 1, a - 1)] -= 1.0;
            }
        }
        let chol = lap.cholesky().expect("pinned grid Laplacian is positive definite");
        let mean = chol.solve(&rhs);
        let mut full = vec![0.0];
        full.extend(mean.iter());
        GffSampler { chol_lower: chol.l(), mean: full, g }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sample(&self, r: &mut rng::Rng) -> Vec<f64> {
        let m = self.chol_lower.nrows();
        let z = DVector::from_fn(m, |_, _| StandardNormal.sample(r));
        let x = self
            .chol_lower
            .transpose()
            .solve_upper_triangular(&z)
            .expect("Cholesky factor is nonsingular");
        let mut out = self.mean.clone();
        for i in 0..m {
            out[i + 1] += self.g * x[i];
        }
        out
    }
}

/// Per-edge biases for the Δ₀ field and each χ field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightBias {
    /// Indexed like the edge sites (Δ₀ edges).
    pub phi: Vec<f64>,
    /// Per orientation, indexed like `CubicGrid::edges` of that χ grid.
    pub chi: Vec<Vec<f64>>,
}

fn chi_grid(lattice: &LiebLattice, axis: usize) -> CubicGrid {
    let n = lattice.side();
    CubicGrid { dims: (0..lattice.dim()).map(|k| if k == axis { n - 1 } else { n }).collect() }
}

fn phi_grid(lattice: &LiebLattice) -> CubicGrid {
    CubicGrid { dims: vec![lattice.side(); lattice.dim()] }
}

impl HeightBias {
    pub fn zero(lattice: &LiebLattice) -> Self {
        HeightBias {
            phi: vec![0.0; lattice.delta1_len()],
            chi: (0..lattice.dim()).map(|i| vec![0.0; chi_grid(lattice, i).edges().len()]).collect(),
        }
    }

    /// `+slope` per step below the centre of each axis, `−slope` above.
    pub fn mountain(lattice: &LiebLattice, slope: f64) -> Self {
        let mut b = Self::zero(lattice);
        let centre = lattice.side() - 1;
        for (k, j) in b.phi.iter_mut().enumerate() {
            let (axis, x) = lattice.delta1_info(lattice.delta0_len() + k);
            let pos = 2 * x[axis] + 1;
            *j = match pos.cmp(&centre) {
                std::cmp::Ordering::Less => slope,
                std::cmp::Ordering::Greater => -slope,
                std::cmp::Ordering::Equal => 0.0,
            };
        }
        b
    }
}

/// Float-mode fields: `phi` on Δ₀, `chi[i]` on edge sites of orientation `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightFields {
    pub phi: Vec<f64>,
    pub chi: Vec<Vec<f64>>,
}

impl HeightFields {
    /// Log ratios `Φ_upper − Φ_lower` per edge site.
    pub fn log_ratios(&self, lattice: &LiebLattice) -> Vec<f64> {
        (lattice.delta0_len()..lattice.len())
            .map(|m| {
                let (lo, hi) = lattice.endpoints(m);
                self.phi[hi] - self.phi[lo]
            })
            .collect()
    }

    fn chi_at(&self, lattice: &LiebLattice, m: usize) -> f64 {
        let local = m - lattice.delta0_len();
        let per = lattice.delta1_len() / lattice.dim();
        self.chi[local / per][local % per]
    }
}

/// One field per sublattice, each from its own substream.
pub fn sample_bgff(lattice: &LiebLattice, bias: &HeightBias, g: f64, seed: u64) -> HeightFields {
    let phi = GffSampler::new(&phi_grid(lattice), &bias.phi, g).sample(&mut rng::substream(seed, 0));
    let chi = (0..lattice.dim())
        .map(|i| {
            GffSampler::new(&chi_grid(lattice, i), &bias.chi[i], g)
                .sample(&mut rng::substream(seed, i as u64 + 1))
        })
        .collect();
    HeightFields { phi, chi }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Effective Hamiltonian of the real-valued counts `e(x,m) = 2D·exp(φ_x + χ_m)`,
/// sized as in the integer construction (unit terminals). Computed in log space.
pub fn lieb_hamiltonian_from_heights(lattice: &LiebLattice, fields: &HeightFields, degree: u64) -> EffectiveHamiltonian {
    let n0 = lattice.delta0_len();
    let mut incident: Vec<Vec<f64>> = vec![Vec::new(); lattice.len()];
    let mut edges = Vec::new();
    for m in n0..lattice.len() {
        let (lo, hi) = lattice.endpoints(m);
        let c = fields.chi_at(lattice, m);
        for x in [lo, hi] {
            let lq = fields.phi[x] + c;
            incident[x].push(lq);
            incident[m].push(lq);
            edges.push((x, m, lq));
        }
    }
    let terminal = |s: usize| s == lattice.origin() || s == lattice.far_corner();
    let log_size: Vec<f64> = incident
        .iter()
        .enumerate()
        .map(|(s, v)| if terminal(s) { 0.0 } else { std::f64::consts::LN_2 + log_sum_exp(v) })
        .collect();
    let ln2d = ((2 * degree) as f64).ln();
    let mut mat = DMatrix::zeros(lattice.len(), lattice.len());
    for (x, m, lq) in edges {
        let t = (ln2d + lq - 0.5 * (log_size[x] + log_size[m])).exp();
        mat[(x, m)] = t;
        mat[(m, x)] = t;
    }
    EffectiveHamiltonian {
        matrix: mat,
        labels: (0..lattice.len()).map(|s| lattice.label(s)).collect(),
        entrance: lattice.origin(),
        exit: lattice.far_corner(),
        topology: Topology::Lieb { n: lattice.side(), d: lattice.dim() },
    }
}

/// `εᵀ K⁺ ε` for the `n × n` grid Laplacian `K` and `ε = δ_origin − δ_far corner`.
pub fn grid_laplacian_quadratic_form(n: usize) -> f64 {
    let grid = CubicGrid { dims: vec![n, n] };
    let k = grid.laplacian();
    let mut eps = vec![0.0; grid.len()];
    eps[0] = 1.0;
    eps[grid.len() - 1] = -1.0;
    let (x, _) = conjugate_gradient(&k, &eps, 1e-12, 20 * grid.len());
    eps.iter().zip(&x).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_edge_order_matches_lieb() {
        let lat = LiebLattice::new(4, 3);
        let grid = phi_grid(&lat);
        for (k, (a, b)) in grid.edges().into_iter().enumerate() {
            assert_eq!(lat.endpoints(lat.delta0_len() + k), (a, b));
        }
    }

    #[test]
    fn tiny_g_freezes_field() {
        let lat = LiebLattice::new(5, 2);
        let f = sample_bgff(&lat, &HeightBias::zero(&lat), 1e-6, 3);
        assert!(f.phi.iter().chain(f.chi.iter().flatten()).all(|v| v.abs() <= 1e-4));
    }

    #[test]
    fn chain_variance_is_linear() {
        // pinned 1D chain: Φ_k is a random walk, Var = k g²
        let grid = CubicGrid { dims: vec![8] };
        let s = GffSampler::new(&grid, &[0.0; 7], 1.0);
        let mut r = rng::seeded(1);
        let trials = 10_000;
        let mut sq = [0.0; 8];
        for _ in 0..trials {
            let phi = s.sample(&mut r);
            for k in 0..8 {
                sq[k] += phi[k] * phi[k];
            }
        }
        for (k, v) in sq.iter().enumerate().skip(1) {
            let var = v / trials as f64;
            assert!((var - k as f64).abs() <= 0.05 * k as f64, "k={k} var={var}");
        }
    }

    #[test]
    fn mountain_bias_sets_mean() {
        let lat = LiebLattice::new(6, 1);
        let s = GffSampler::new(&phi_grid(&lat), &HeightBias::mountain(&lat, 0.7).phi, 0.5);
        let want = [0.0, 0.7, 1.4, 1.4, 0.7, 0.0];
        let mut acc = [0.0; 6];
        let mut r = rng::seeded(8);
        let trials = 4000;
        for _ in 0..trials {
            for (a, v) in acc.iter_mut().zip(s.sample(&mut r)) {
                *a += v;
            }
        }
        for k in 0..6 {
            assert!((s.mean()[k] - want[k]).abs() < 1e-12);
            let sd = 0.5 * (k as f64).sqrt();
            assert!((acc[k] / trials as f64 - want[k]).abs() <= 3.0 * sd / (trials as f64).sqrt() + 1e-12);
        }
    }

    #[test]
    fn corner_quadratic_form_small_grid() {
        // 2×2 grid is a 4-cycle: opposite corners have effective resistance 1
        assert!((grid_laplacian_quadratic_form(2) - 1.0).abs() < 1e-10);
    }
}
