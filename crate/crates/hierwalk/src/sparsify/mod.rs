// SPDX-License-Identifier: Apache-2.0
//! Dense weighted hierarchical graphs built from a target effective
//! Hamiltonian, and two ways of sparsifying them: independent edge sampling
//! and sampled permutations from a doubly stochastic decomposition.

mod bvn;

pub use bvn::{bvn_decompose, bvn_sparsify, bvn_sparsify_with, transport_decompose, BvnOptions, RewiringReport, TransportPlan};

use nalgebra::DMatrix;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EffectiveHamiltonian, HierarchicalGraph};
use crate::linalg::{symmetric_norm, Csr, Difference, LinearOperator};
use crate::rng;

/// Largest vertex count accepted by `operator_distance`.
pub const DISTANCE_CAP: usize = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum SparsifyError {
    #[error("the support graph of t is disconnected")]
    Reducible,
    #[error("t must be square, symmetric and nonnegative")]
    InvalidMatrix,
    #[error("supervertex {0} rounds to size zero")]
    SizeUnderflow(usize),
    #[error("supervertex {0} has a diagonal entry but a single vertex")]
    SingletonLoop(usize),
    #[error("edge probability {p} between supervertices {u} and {v} exceeds 1")]
    ProbabilityOverflow { u: usize, v: usize, p: f64 },
    #[error("matrix is not doubly stochastic (worst margin error {0})")]
    NotDoublyStochastic(f64),
    #[error("no perfect matching on the positive support")]
    NoPerfectMatching,
    #[error("edge ({0}, {1}) has multiplicity three or more in a large supervertex")]
    TripleEdge(usize, usize),
    #[error("dimension {dim} exceeds the cap {cap}")]
    CapExceeded { dim: usize, cap: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Weighted dense hierarchical graph with complete bipartite blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseHierarchical {
    pub t: DMatrix<f64>,
    pub sizes: Vec<usize>,
    /// Top eigenvalue of `t`.
    pub lambda: f64,
    /// `π` with `t√π = λ√π` and `Σπ = 1`.
    pub pi: Vec<f64>,
    pub entrance: usize,
    pub exit: usize,
    /// Largest `|row sum − λ|` after size rounding.
    pub row_sum_error: f64,
}

impl DenseHierarchical {
    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut o = vec![0];
        for s in &self.sizes {
            o.push(o.last().unwrap() + s);
        }
        o
    }

    /// Weight of one vertex pair between `S_u` and `S_v` (`u = v` for intra-block pairs).
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        let t = self.t[(u, v)];
        if t == 0.0 {
            return 0.0;
        }
        if u == v {
            // e_uu = t_uu s_u spread over s_u(s_u − 1) ordered pairs
            t / (self.sizes[u] as f64 - 1.0)
        } else {
            t / ((self.sizes[u] * self.sizes[v]) as f64).sqrt()
        }
    }

    /// Weighted degree of any vertex in `S_u`.
    pub fn row_sum(&self, u: usize) -> f64 {
        (0..self.sizes.len())
            .map(|v| {
                let others = if u == v { self.sizes[v] - 1 } else { self.sizes[v] };
                others as f64 * self.weight(u, v)
            })
            .sum()
    }

    /// Uniform unit vector on the vertices of `S_u`.
    pub fn supervertex_state(&self, u: usize) -> Vec<f64> {
        let off = self.offsets();
        let mut v = vec![0.0; self.n()];
        let a = 1.0 / (self.sizes[u] as f64).sqrt();
        v[off[u]..off[u + 1]].iter_mut().for_each(|x| *x = a);
        v
    }

    /// Materialized weighted adjacency.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let off = self.offsets();
        let k = self.sizes.len();
        let mut m = DMatrix::zeros(self.n(), self.n());
        for u in 0..k {
            for v in 0..k {
                let w = self.weight(u, v);
                if w == 0.0 {
                    continue;
                }
                for x in off[u]..off[u + 1] {
                    for y in off[v]..off[v + 1] {
                        if x != y {
                            m[(x, y)] = w;
                        }
                    }
                }
            }
        }
        m
    }

    /// Effective Hamiltonian carried by the supervertex subspace after rounding.
    pub fn effective(&self) -> EffectiveHamiltonian {
        let k = self.sizes.len();
        let m = DMatrix::from_fn(k, k, |u, v| {
            if u == v {
                (self.sizes[u] as f64 - 1.0) * self.weight(u, u)
            } else {
                self.weight(u, v) * ((self.sizes[u] * self.sizes[v]) as f64).sqrt()
            }
        });
        EffectiveHamiltonian::from_matrix(m, self.entrance, self.exit)
    }
}

impl LinearOperator for DenseHierarchical {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let off = self.offsets();
        let k = self.sizes.len();
        let sums: Vec<f64> = (0..k).map(|v| x[off[v]..off[v + 1]].iter().sum()).collect();
        for u in 0..k {
            let cross: f64 = (0..k).filter(|&v| v != u).map(|v| self.weight(u, v) * sums[v]).sum();
            let wd = self.weight(u, u);
            for i in off[u]..off[u + 1] {
                y[i] = cross + wd * (sums[u] - x[i]);
            }
        }
    }
}

fn connected(t: &DMatrix<f64>) -> bool {
    let k = t.nrows();
    let mut seen = vec![false; k];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..k {
            if t[(u, v)] > 0.0 && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Round `n·π` to integers summing to `n` (largest remainder).
pub fn largest_remainder(pi: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = pi.iter().map(|p| p * n as f64).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let short = n.saturating_sub(sizes.iter().sum());
    let mut order: Vec<usize> = (0..pi.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().take(short) {
        sizes[i] += 1;
    }
    sizes
}

/// Dense graph on `n_total` vertices whose supervertex restriction is `h`.
pub fn dense_from_effective(h: &EffectiveHamiltonian, n_total: usize) -> Result<DenseHierarchical, SparsifyError> {
    let t = &h.matrix;
    let k = t.nrows();
    if k == 0 || t.ncols() != k || t.iter().any(|&x| x < 0.0 || !x.is_finite()) || (t - t.transpose()).amax() > 1e-12 * t.amax() {
        return Err(SparsifyError::InvalidMatrix);
    }
    if !connected(t) {
        return Err(SparsifyError::Reducible);
    }
    let eig = t.clone().symmetric_eigen();
    let top = (0..k).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
    let lambda = eig.eigenvalues[top];
    let vec = eig.eigenvectors.column(top);
    let sign = if vec.sum() < 0.0 { -1.0 } else { 1.0 };
    let pi: Vec<f64> = vec.iter().map(|x| (sign * x).max(0.0).powi(2)).collect();
    let total: f64 = pi.iter().sum();
    let pi: Vec<f64> = pi.into_iter().map(|p| p / total).collect();
    let sizes = largest_remainder(&pi, n_total);
    if let Some(u) = sizes.iter().position(|&s| s == 0) {
        return Err(SparsifyError::SizeUnderflow(u));
    }
    if let Some(u) = (0..k).find(|&u| t[(u, u)] > 0.0 && sizes[u] == 1) {
        return Err(SparsifyError::SingletonLoop(u));
    }
    let mut d = DenseHierarchical {
        t: t.clone(),
        sizes,
        lambda,
        pi,
        entrance: h.entrance,
        exit: h.exit,
        row_sum_error: 0.0,
    };
    d.row_sum_error = (0..k).map(|u| (d.row_sum(u) - lambda).abs()).fold(0.0, f64::max);
    Ok(d)
}

/// Unweighted sparse graph together with the factor that rescales it toward the dense one.
#[derive(Clone, Debug)]
pub struct Sparsified {
    pub graph: HierarchicalGraph,
    pub scale: f64,
    /// Present for the permutation pipeline.
    pub rewiring: Option<RewiringReport>,
}

impl Sparsified {
    pub fn scaled_adjacency(&self) -> Csr {
        Csr::scaled_adjacency(&self.graph, self.scale)
    }
}

/// Edge probability `w_uv · D / λ` for one vertex pair.
pub fn edge_probability(dense: &DenseHierarchical, u: usize, v: usize, degree: f64) -> f64 {
    dense.weight(u, v) * degree / dense.lambda
}

/// Independent pairs in index space `0..count`, visited by geometric skips.
fn bernoulli_indices(count: u64, p: f64, r: &mut rng::Rng, mut f: impl FnMut(u64)) {
    if p <= 0.0 || count == 0 {
        return;
    }
    if p >= 1.0 {
        (0..count).for_each(f);
        return;
    }
    let geo = Geometric::new(p).expect("probability in (0,1)");
    let mut k = geo.sample(r);
    while k < count {
        f(k);
        k = k.saturating_add(1).saturating_add(geo.sample(r));
    }
}

/// Include each cross pair independently with probability `w_uv · D/λ`; scale `λ/D`.
pub fn poisson_sparsify(dense: &DenseHierarchical, degree: usize, seed: u64) -> Result<Sparsified, SparsifyError> {
    let k = dense.sizes.len();
    let d = degree as f64;
    for u in 0..k {
        for v in u..k {
            let p = edge_probability(dense, u, v, d);
            if p > 1.0 {
                return Err(SparsifyError::ProbabilityOverflow { u, v, p });
            }
        }
    }
    let off = dense.offsets();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); dense.n()];
    let mut r = rng::seeded(seed);
    for u in 0..k {
        for v in u..k {
            let p = edge_probability(dense, u, v, d);
            let (su, sv) = (dense.sizes[u] as u64, dense.sizes[v] as u64);
            if u != v {
                bernoulli_indices(su * sv, p, &mut r, |i| {
                    let (x, y) = (off[u] + (i / sv) as usize, off[v] + (i % sv) as usize);
                    adj[x].push(y as u32);
                    adj[y].push(x as u32);
                });
            } else {
                // pairs i < j enumerated row by row
                let (mut row, mut row_start) = (0u64, 0u64);
                bernoulli_indices(su * (su - 1) / 2, p, &mut r, |i| {
                    while i >= row_start + (su - 1 - row) {
                        row_start += su - 1 - row;
                        row += 1;
                    }
                    let col = row + 1 + (i - row_start);
                    let (x, y) = (off[u] + row as usize, off[u] + col as usize);
                    adj[x].push(y as u32);
                    adj[y].push(x as u32);
                });
            }
        }
    }
    Ok(Sparsified {
        graph: HierarchicalGraph::from_parts(&dense.sizes, adj),
        scale: dense.lambda / d,
        rewiring: None,
    })
}

/// `‖A − scale·Ã‖` for symmetric operators, by Lanczos to relative `1e-6`.
pub fn operator_distance<A, B>(a: &A, b: &B, scale: f64) -> Result<f64, SparsifyError>
where
    A: LinearOperator + ?Sized,
    B: LinearOperator + ?Sized,
{
    if a.dim() != b.dim() {
        return Err(SparsifyError::DimensionMismatch(a.dim(), b.dim()));
    }
    if a.dim() > DISTANCE_CAP {
        return Err(SparsifyError::CapExceeded { dim: a.dim(), cap: DISTANCE_CAP });
    }
    let diff = Difference { a, a_scale: 1.0, b, b_scale: scale };
    Ok(symmetric_norm(&diff, 1e-6, 0x5eed))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Poisson,
    Bvn,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "poisson" => Ok(Method::Poisson),
            "bvn" => Ok(Method::Bvn),
            _ => Err(format!("unknown method {s:?} (poisson, bvn)")),
        }
    }
}

/// Default constant in `required_degree`.
pub const DEGREE_CONSTANT: f64 = 64.0;

/// `k T² λ² p⁻² ln|V|` for permutations, `k T² p⁻² ln|V|` for edge sampling.
pub fn required_degree(t: f64, p: f64, lambda: f64, vertices: f64, method: Method) -> f64 {
    let base = DEGREE_CONSTANT * t * t / (p * p) * vertices.ln();
    match method {
        Method::Bvn => base * lambda * lambda,
        Method::Poisson => base,
    }
}

pub fn sparsify(dense: &DenseHierarchical, degree: usize, method: Method, seed: u64) -> Result<Sparsified, SparsifyError> {
    match method {
        Method::Poisson => poisson_sparsify(dense, degree, seed),
        Method::Bvn => bvn_sparsify(dense, degree, seed),
    }
}

/// Median distance over `samples` independent sparsifications at each degree.
pub fn distance_curve(
    dense: &DenseHierarchical,
    degrees: &[usize],
    method: Method,
    samples: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>, SparsifyError> {
    degrees
        .iter()
        .map(|&d| {
            let mut dist = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let s = sparsify(dense, d, method, rng::mix(seed, (d as u64) << 20 | i as u64))?;
                    operator_distance(dense, &s.scaled_adjacency(), 1.0)
                })
                .collect::<Result<Vec<f64>, _>>()?;
            dist.sort_by(f64::total_cmp);
            Ok((d, dist[dist.len() / 2]))
        })
        .collect()
}

#[cfg(test)]
mod tests;
