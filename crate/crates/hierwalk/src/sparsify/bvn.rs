// SPDX-License-Identifier: Apache-2.0
//! Doubly stochastic decompositions and permutation sparsification.
//!
//! The dense graph is constant on blocks, so its decomposition is done on
//! supervertex flows: integer matrices `F` with margins `s` whose
//! within-block symmetrization averages to the block of `A/λ`. A sampled
//! permutation realizes one `F` with uniformly shuffled vertices.

use std::collections::{HashMap, HashSet, VecDeque};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DenseHierarchical, Sparsified, SparsifyError};
use crate::graph::HierarchicalGraph;
use crate::linalg::{symmetric_norm, Csr, Difference};
use crate::rng;

/// Greedy Birkhoff–von Neumann decomposition: repeatedly take a perfect matching
/// on the support above `tol` and subtract it with weight equal to its minimum entry.
pub fn bvn_decompose(m: &DMatrix<f64>, tol: f64) -> Result<Vec<(f64, Vec<usize>)>, SparsifyError> {
    let n = m.nrows();
    let margin = (0..n)
        .flat_map(|i| [(m.row(i).sum() - 1.0).abs(), (m.column(i).sum() - 1.0).abs()])
        .fold(0.0, f64::max);
    if m.ncols() != n || margin > tol || m.iter().any(|&x| x < -tol) {
        return Err(SparsifyError::NotDoublyStochastic(margin));
    }
    let mut r = m.clone();
    let mut out = Vec::new();
    while r.amax() > tol {
        let matching = perfect_matching(n, |i, j| r[(i, j)] > tol).ok_or(SparsifyError::NoPerfectMatching)?;
        let w = (0..n).map(|i| r[(i, matching[i])]).fold(f64::INFINITY, f64::min);
        for i in 0..n {
            r[(i, matching[i])] -= w;
        }
        out.push((w, matching));
    }
    Ok(out)
}

/// Kuhn's augmenting paths; `perm[i]` is the column matched to row `i`.
fn perfect_matching(n: usize, allowed: impl Fn(usize, usize) -> bool) -> Option<Vec<usize>> {
    let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| allowed(i, j)).collect()).collect();
    let mut col_owner = vec![usize::MAX; n];
    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [usize]) -> bool {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                if owner[j] == usize::MAX || augment(owner[j], adj, seen, owner) {
                    owner[j] = i;
                    return true;
                }
            }
        }
        false
    }
    for i in 0..n {
        let mut seen = vec![false; n];
        if !augment(i, &adj, &mut seen, &mut col_owner) {
            return None;
        }
    }
    let mut perm = vec![0; n];
    for (j, &i) in col_owner.iter().enumerate() {
        perm[i] = j;
    }
    Some(perm)
}

/// Decomposition of the block-count matrix `B_uv = s_u s_v w_uv / λ` into flows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// `(μ, F)` with `F[u][v]` vertices of `S_u` sent into `S_v`.
    pub terms: Vec<(f64, Vec<Vec<usize>>)>,
    /// Max-norm of `B − Σ μ F`, in vertex-count units.
    pub residual: f64,
    /// `1 − Σμ`, absorbed by renormalizing the sampling weights.
    pub missing_weight: f64,
}

fn block_counts(d: &DenseHierarchical) -> DMatrix<f64> {
    let k = d.sizes.len();
    DMatrix::from_fn(k, k, |u, v| {
        let pairs = if u == v { d.sizes[u] * (d.sizes[u] - 1) } else { d.sizes[u] * d.sizes[v] };
        pairs as f64 * d.weight(u, v) / d.lambda
    })
}

/// Integer flow with margins `sizes` over the allowed cells (Edmonds–Karp).
fn integral_flow(sizes: &[usize], allowed: impl Fn(usize, usize) -> bool) -> Option<Vec<Vec<usize>>> {
    let k = sizes.len();
    let (src, sink) = (2 * k, 2 * k + 1);
    let nodes = 2 * k + 2;
    let mut cap = vec![vec![0i64; nodes]; nodes];
    let big = sizes.iter().sum::<usize>() as i64;
    for u in 0..k {
        cap[src][u] = sizes[u] as i64;
        cap[k + u][sink] = sizes[u] as i64;
        for v in 0..k {
            if allowed(u, v) {
                cap[u][k + v] = big;
            }
        }
    }
    let mut flow = 0i64;
    loop {
        let mut prev = vec![usize::MAX; nodes];
        prev[src] = src;
        let mut q = VecDeque::from([src]);
        while let Some(x) = q.pop_front() {
            for y in 0..nodes {
                if prev[y] == usize::MAX && cap[x][y] > 0 {
                    prev[y] = x;
                    q.push_back(y);
                }
            }
        }
        if prev[sink] == usize::MAX {
            break;
        }
        let mut push = i64::MAX;
        let mut y = sink;
        while y != src {
            push = push.min(cap[prev[y]][y]);
            y = prev[y];
        }
        let mut y = sink;
        while y != src {
            cap[prev[y]][y] -= push;
            cap[y][prev[y]] += push;
            y = prev[y];
        }
        flow += push;
    }
    if flow != big {
        return None;
    }
    Some((0..k).map(|u| (0..k).map(|v| if allowed(u, v) { (big - cap[u][k + v]) as usize } else { 0 }).collect()).collect())
}

/// Greedy flow decomposition of the dense graph's block counts.
pub fn transport_decompose(d: &DenseHierarchical, tol: f64) -> TransportPlan {
    let b = block_counts(d);
    let k = d.sizes.len();
    let floor = tol * b.amax();
    let mut r = b.clone();
    let mut terms = Vec::new();
    for _ in 0..k * k + 1 {
        let Some(f) = integral_flow(&d.sizes, |u, v| r[(u, v)] > floor) else { break };
        let mu = (0..k)
            .flat_map(|u| (0..k).map(move |v| (u, v)))
            .filter(|&(u, v)| f[u][v] > 0)
            .map(|(u, v)| r[(u, v)] / f[u][v] as f64)
            .fold(f64::INFINITY, f64::min);
        for u in 0..k {
            for v in 0..k {
                r[(u, v)] -= mu * f[u][v] as f64;
            }
        }
        terms.push((mu, f));
        if r.amax() <= floor {
            break;
        }
    }
    let total: f64 = terms.iter().map(|t| t.0).sum();
    TransportPlan { terms, residual: r.amax(), missing_weight: 1.0 - total }
}

/// A permutation realizing flow `f` with shuffled vertices and no fixed points.
fn realize(d: &DenseHierarchical, f: &[Vec<usize>], r: &mut rng::Rng) -> Vec<usize> {
    let off = d.offsets();
    let k = d.sizes.len();
    let mut sources: Vec<Vec<usize>> = (0..k).map(|u| (off[u]..off[u + 1]).collect()).collect();
    let mut targets = sources.clone();
    sources.iter_mut().chain(targets.iter_mut()).for_each(|v| v.shuffle(r));
    let mut cursor = vec![0usize; k];
    let mut perm = vec![usize::MAX; d.n()];
    for u in 0..k {
        let mut from = sources[u].iter();
        for v in 0..k {
            for _ in 0..f[u][v] {
                perm[*from.next().expect("flow row sum")] = targets[v][cursor[v]];
                cursor[v] += 1;
            }
        }
    }
    // fixed points only arise from diagonal flow; trade targets inside the block
    for u in 0..k {
        let fixed: Vec<usize> = (off[u]..off[u + 1]).filter(|&x| perm[x] == x).collect();
        for (i, &x) in fixed.iter().enumerate() {
            if perm[x] != x {
                continue;
            }
            let partner = fixed[i + 1..]
                .iter()
                .copied()
                .find(|&y| perm[y] == y)
                .or_else(|| (off[u]..off[u + 1]).find(|&y| y != x && perm[y] != x));
            if let Some(y) = partner {
                perm.swap(x, y);
            }
        }
    }
    perm
}

/// Edges of `(P + P⁻¹ + f(P) + f(P)⁻¹)/2`, a 2-regular multigraph.
fn symmetrized_edges(d: &DenseHierarchical, perm: &[usize], member: &[u32], out: &mut [Vec<u32>]) {
    let mut groups: HashMap<(u32, u32), Vec<(usize, usize)>> = HashMap::new();
    let add = |x: usize, y: usize, out: &mut [Vec<u32>]| {
        out[x].push(y as u32);
        out[y].push(x as u32);
    };
    for x in 0..d.n() {
        let y = perm[x];
        if perm[y] == x && y != x {
            let (bx, by) = (member[x], member[y]);
            // orient each 2-cycle from the lower block (or lower vertex)
            if (bx, x) < (by, y) {
                groups.entry((bx, by)).or_default().push((x, y));
            }
        } else {
            add(x, y, out);
        }
    }
    let mut keys: Vec<_> = groups.keys().copied().collect();
    keys.sort_unstable();
    for key in keys {
        let pairs = &groups[&key];
        let m = pairs.len();
        if m == 1 {
            // shared 2-cycle: P and f(P) agree
            add(pairs[0].0, pairs[0].1, out);
            add(pairs[0].0, pairs[0].1, out);
            continue;
        }
        for (i, &(x, y)) in pairs.iter().enumerate() {
            add(x, y, out);
            add(x, pairs[(i + 1) % m].1, out);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BvnOptions {
    /// Supervertices larger than this count as large; `None` means `D³`, where
    /// triple edges become unlikely.
    pub large_threshold: Option<usize>,
    pub tol: f64,
    /// Resampling attempts after a triple edge.
    pub attempts: usize,
}

impl Default for BvnOptions {
    fn default() -> Self {
        BvnOptions { large_threshold: None, tol: 1e-6, attempts: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewiringReport {
    pub large_threshold: usize,
    pub double_edges: usize,
    pub rewired: usize,
    pub unresolved: usize,
    /// Rewirings whose double edge shares a vertex with an earlier one; the
    /// `λ/D` cost bound assumes there are none.
    pub overlapping: usize,
    /// Double edges touching a large supervertex after rewiring.
    pub remaining_doubles: usize,
    pub degrees_unchanged: bool,
    /// `‖scale · (A′ − A)‖` caused by rewiring.
    pub cost: f64,
    /// `λ/D`.
    pub bound: f64,
    pub attempts: usize,
    pub plan_residual: f64,
    pub plan_missing_weight: f64,
}

pub fn bvn_sparsify(dense: &DenseHierarchical, degree: usize, seed: u64) -> Result<Sparsified, SparsifyError> {
    bvn_sparsify_with(dense, degree, seed, BvnOptions::default())
}

/// Sample `D` permutations, symmetrize each into a 2-regular graph, then rewire
/// double edges touching large supervertices. Result is `2D`-regular with scale `λ/(2D)`.
pub fn bvn_sparsify_with(
    dense: &DenseHierarchical,
    degree: usize,
    seed: u64,
    opts: BvnOptions,
) -> Result<Sparsified, SparsifyError> {
    let plan = transport_decompose(dense, opts.tol);
    let weights: Vec<f64> = plan.terms.iter().map(|t| t.0).collect();
    let total: f64 = weights.iter().sum();
    let threshold = opts.large_threshold.unwrap_or(degree.saturating_pow(3));
    let large: Vec<bool> = dense.sizes.iter().map(|&s| s > threshold).collect();
    let mut last = None;
    for attempt in 0..opts.attempts.max(1) {
        let mut r = rng::seeded(rng::mix(seed, attempt as u64));
        let probe = HierarchicalGraph::from_parts(&dense.sizes, vec![Vec::new(); dense.n()]);
        let member = probe.memberships().to_vec();
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); dense.n()];
        for _ in 0..degree {
            let mut pick = rand::Rng::random::<f64>(&mut r) * total;
            let idx = weights.iter().position(|&w| {
                pick -= w;
                pick < 0.0
            });
            let f = &plan.terms[idx.unwrap_or(weights.len() - 1)].1;
            let perm = realize(dense, f, &mut r);
            symmetrized_edges(dense, &perm, &member, &mut adj);
        }
        let mut g = HierarchicalGraph::from_parts(&dense.sizes, adj);
        let touches_large = |g: &HierarchicalGraph, x: usize, y: usize| large[g.membership(x)] || large[g.membership(y)];
        if let Some((x, y)) = multi_edges(&g, 3).into_iter().find(|&(x, y)| touches_large(&g, x, y)) {
            last = Some(SparsifyError::TripleEdge(x, y));
            continue;
        }
        let before = g.clone();
        let doubles: Vec<(usize, usize)> =
            multi_edges(&g, 2).into_iter().filter(|&(x, y)| touches_large(&g, x, y)).collect();
        let mut used: HashSet<(usize, usize)> = HashSet::new();
        // keeping supports disjoint keeps the total cost at one event's norm
        let mut touched: HashSet<usize> = HashSet::new();
        let (mut rewired, mut unresolved, mut overlapping) = (0, 0, 0);
        for &(a, b) in &doubles {
            if g.multiplicity(a, b) < 2 {
                continue;
            }
            let found = find_partner(&g, a, b, &used, &touched)
                .map(|(c, d)| (a, b, c, d))
                .or_else(|| find_partner(&g, b, a, &used, &touched).map(|(c, d)| (b, a, c, d)));
            match found {
                Some((alpha, beta, gamma, delta)) => {
                    overlapping += (touched.contains(&alpha) || touched.contains(&beta)) as usize;
                    g.remove_edge(gamma, delta);
                    g.remove_edge(alpha, beta);
                    g.add_edge(alpha, gamma);
                    g.add_edge(beta, delta);
                    for e in [(alpha, beta), (gamma, delta), (alpha, gamma), (beta, delta)] {
                        used.insert(key(e.0, e.1));
                    }
                    touched.extend([alpha, beta, gamma, delta]);
                    rewired += 1;
                }
                None => unresolved += 1,
            }
        }
        let scale = dense.lambda / (2.0 * degree as f64);
        let degrees_unchanged = (0..g.n()).all(|x| g.degree(x) == before.degree(x));
        let remaining_doubles = multi_edges(&g, 2).into_iter().filter(|&(x, y)| touches_large(&g, x, y)).count();
        let cost = if rewired == 0 {
            0.0
        } else {
            let (a2, a1) = (Csr::adjacency(&g), Csr::adjacency(&before));
            symmetric_norm(&Difference { a: &a2, a_scale: scale, b: &a1, b_scale: scale }, 1e-8, seed)
        };
        return Ok(Sparsified {
            graph: g,
            scale,
            rewiring: Some(RewiringReport {
                large_threshold: threshold,
                double_edges: doubles.len(),
                rewired,
                unresolved,
                overlapping,
                remaining_doubles,
                degrees_unchanged,
                cost,
                bound: dense.lambda / degree as f64,
                attempts: attempt + 1,
                plan_residual: plan.residual,
                plan_missing_weight: plan.missing_weight,
            }),
        });
    }
    Err(last.expect("at least one attempt"))
}

fn key(x: usize, y: usize) -> (usize, usize) {
    (x.min(y), x.max(y))
}

/// Distinct vertex pairs with multiplicity at least `k` (self-pairs excluded).
fn multi_edges(g: &HierarchicalGraph, k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for x in 0..g.n() {
        let mut nb: Vec<u32> = g.neighbors(x).to_vec();
        nb.sort_unstable();
        for run in nb.chunk_by(|a, b| a == b) {
            let y = run[0] as usize;
            if y > x && run.len() >= k {
                out.push((x, y));
            }
        }
    }
    out
}

/// Single edge `(γ, δ)` with `γ` in β's block, preferring `δ` in α's block, such
/// that adding `α–γ` and `β–δ` creates no multi-edge and no rectangle.
fn find_partner(
    g: &HierarchicalGraph,
    alpha: usize,
    beta: usize,
    used: &HashSet<(usize, usize)>,
    touched: &HashSet<usize>,
) -> Option<(usize, usize)> {
    let (bu, bv) = (g.membership(alpha), g.membership(beta));
    let ok = |c: usize, d: usize| {
        c != alpha
            && c != beta
            && d != alpha
            && d != beta
            && !used.contains(&key(c, d))
            && !touched.contains(&c)
            && !touched.contains(&d)
            && g.multiplicity(c, d) == 1
            && g.multiplicity(alpha, c) == 0
            && g.multiplicity(beta, d) == 0
            && !(g.multiplicity(alpha, d) > 0 && g.multiplicity(beta, c) > 0)
    };
    let block = g.block(bv);
    let same = block.clone().find_map(|c| {
        g.neighbors(c).iter().map(|&d| d as usize).find(|&d| g.membership(d) == bu && ok(c, d)).map(|d| (c, d))
    });
    same.or_else(|| block.clone().find_map(|c| g.neighbors(c).iter().map(|&d| d as usize).find(|&d| ok(c, d)).map(|d| (c, d))))
}
