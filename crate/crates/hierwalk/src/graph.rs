// SPDX-License-Identifier: Apache-2.0
//! Supergraph specifications, materialized hierarchical graphs and the
//! effective Hamiltonian on the supervertex subspace.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bigmath::{self, decimal};
use crate::rng;

/// Default limit on materialized vertex counts.
pub const DEFAULT_VERTEX_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("materialization needs {needed} vertices but the cap is {cap}")]
    CapExceeded { needed: String, cap: usize },
    #[error("superedge ({u},{v}) with {e} edges does not divide evenly over sizes")]
    UnbalancedSpec { u: usize, v: usize, e: String },
    #[error("supervertex {u}: incident edges give {have}, degree requires {want}")]
    DegreeInfeasible { u: usize, have: String, want: String },
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

/// Coarse shape of the supergraph, used to pick zero-mode formulas.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    /// Supervertices `0..len` joined in order.
    Line,
    /// Lieb lattice of side `n` in `d` dimensions; index layout from `lieb::LiebLattice`.
    Lieb { n: usize, d: usize },
    #[default]
    General,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Degree {
    Regular(u64),
    PerSupervertex(Vec<u64>),
}

impl Degree {
    pub fn of(&self, u: usize) -> u64 {
        match self {
            Degree::Regular(d) => *d,
            Degree::PerSupervertex(v) => v[u],
        }
    }

    pub fn max(&self) -> u64 {
        match self {
            Degree::Regular(d) => *d,
            Degree::PerSupervertex(v) => v.iter().copied().max().unwrap_or(0),
        }
    }
}

/// Symbolic hierarchical graph: supervertex sizes and superedge counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupergraphSpec {
    /// Labels, one per supervertex; the id of a supervertex is its index.
    pub vertices: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    #[serde(with = "decimal")]
    pub sizes: Vec<BigUint>,
    #[serde(with = "decimal")]
    pub edge_counts: Vec<BigUint>,
    pub degree: Degree,
    #[serde(default, with = "decimal::opt", skip_serializing_if = "Option::is_none")]
    pub diagonal_counts: Option<Vec<BigUint>>,
    pub entrance: usize,
    pub exit: usize,
    #[serde(default)]
    pub topology: Topology,
}

impl SupergraphSpec {
    /// Line supergraph with numeric labels.
    pub fn line(sizes: Vec<BigUint>, edge_counts: Vec<BigUint>, degree: Degree) -> Self {
        let len = sizes.len();
        assert_eq!(edge_counts.len() + 1, len.max(1), "line needs len-1 edge counts");
        SupergraphSpec {
            vertices: (0..len).map(|i| i.to_string()).collect(),
            edges: (0..len.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            sizes,
            edge_counts,
            degree,
            diagonal_counts: None,
            entrance: 0,
            exit: len.saturating_sub(1),
            topology: Topology::Line,
        }
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn total_vertices(&self) -> BigUint {
        self.sizes.iter().sum()
    }

    pub fn diagonal(&self, u: usize) -> BigUint {
        self.diagonal_counts
            .as_ref()
            .map(|f| f[u].clone())
            .unwrap_or_default()
    }

    pub fn is_terminal(&self, u: usize) -> bool {
        u == self.entrance || u == self.exit
    }

    /// Incident superedges `(edge index, other endpoint)` per supervertex.
    pub fn incidence(&self) -> Vec<Vec<(usize, usize)>> {
        let mut inc = vec![Vec::new(); self.len()];
        for (k, &(u, v)) in self.edges.iter().enumerate() {
            inc[u].push((k, v));
            inc[v].push((k, u));
        }
        inc
    }

    /// Structural sanity: index ranges, positive counts, no self superedges.
    pub fn check_shape(&self) -> Result<(), GraphError> {
        let n = self.len();
        let bad = |m: String| Err(GraphError::InvalidSpec(m));
        if self.vertices.len() != n {
            return bad(format!("{} labels for {} sizes", self.vertices.len(), n));
        }
        if self.edge_counts.len() != self.edges.len() {
            return bad("edge_counts and edges differ in length".into());
        }
        if let Degree::PerSupervertex(d) = &self.degree {
            if d.len() != n {
                return bad("per-supervertex degree list has wrong length".into());
            }
        }
        if let Some(f) = &self.diagonal_counts {
            if f.len() != n {
                return bad("diagonal_counts has wrong length".into());
            }
        }
        if self.entrance >= n || self.exit >= n {
            return bad("terminal out of range".into());
        }
        if let Some(u) = self.sizes.iter().position(|s| s.is_zero()) {
            return bad(format!("supervertex {u} has size 0"));
        }
        for (k, &(u, v)) in self.edges.iter().enumerate() {
            if u >= n || v >= n || u == v {
                return bad(format!("superedge {k} = ({u},{v}) is invalid"));
            }
            if self.edge_counts[k].is_zero() {
                return bad(format!("superedge {k} has zero edges"));
            }
        }
        Ok(())
    }

    /// Degree identity `Σ e_uv + 2F_u = D_u s_u` on all non-terminal supervertices.
    /// Entrance and exit may carry a different degree.
    pub fn check_regularity(&self) -> Result<(), GraphError> {
        let inc = self.incidence();
        for u in 0..self.len() {
            if self.is_terminal(u) {
                continue;
            }
            let have: BigUint = inc[u].iter().map(|&(k, _)| &self.edge_counts[k]).sum::<BigUint>()
                + self.diagonal(u) * 2u32;
            let want = &self.sizes[u] * self.degree.of(u);
            if have != want {
                return Err(GraphError::DegreeInfeasible {
                    u,
                    have: have.to_string(),
                    want: want.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Divisibility needed for a balanced wiring.
    pub fn check_balanced(&self) -> Result<(), GraphError> {
        for (k, &(u, v)) in self.edges.iter().enumerate() {
            let e = &self.edge_counts[k];
            if !(e % &self.sizes[u]).is_zero() || !(e % &self.sizes[v]).is_zero() {
                return Err(GraphError::UnbalancedSpec { u, v, e: e.to_string() });
            }
        }
        for u in 0..self.len() {
            let twice_f = self.diagonal(u) * 2u32;
            if !(twice_f % &self.sizes[u]).is_zero() {
                return Err(GraphError::UnbalancedSpec { u, v: u, e: self.diagonal(u).to_string() });
            }
        }
        Ok(())
    }
}

/// Sign of the stored matrix. The walk layer works with the adjacency sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    #[default]
    Adjacency,
    Hamiltonian,
}

/// Dense symmetric generator on the supervertex subspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveHamiltonian {
    pub matrix: DMatrix<f64>,
    pub labels: Vec<String>,
    pub entrance: usize,
    pub exit: usize,
    #[serde(default)]
    pub topology: Topology,
}

impl EffectiveHamiltonian {
    pub fn from_matrix(matrix: DMatrix<f64>, entrance: usize, exit: usize) -> Self {
        let labels = (0..matrix.nrows()).map(|i| i.to_string()).collect();
        EffectiveHamiltonian { matrix, labels, entrance, exit, topology: Topology::General }
    }

    /// Square matrix from rows, entrance 0 and exit last. `None` if not square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]), 0, n - 1))
    }

    /// Tridiagonal chain with the given hoppings and zero diagonal.
    pub fn chain(hoppings: &[f64]) -> Self {
        let n = hoppings.len() + 1;
        let mut m = DMatrix::zeros(n, n);
        for (i, &t) in hoppings.iter().enumerate() {
            m[(i, i + 1)] = t;
            m[(i + 1, i)] = t;
        }
        let mut h = EffectiveHamiltonian::from_matrix(m, 0, n - 1);
        h.topology = Topology::Line;
        h
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Off-diagonal of a line Hamiltonian.
    pub fn hoppings(&self) -> Vec<f64> {
        (0..self.dim().saturating_sub(1)).map(|i| self.matrix[(i, i + 1)]).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut h = self.clone();
        h.matrix *= c;
        h
    }
}

/// Effective Hamiltonian `e_uv / sqrt(s_u s_v)` with diagonal `2F_u / s_u`.
pub fn effective_hamiltonian(spec: &SupergraphSpec, sign: Sign) -> EffectiveHamiltonian {
    let n = spec.len();
    let mut m = DMatrix::zeros(n, n);
    for (k, &(u, v)) in spec.edges.iter().enumerate() {
        let t = bigmath::hopping(&spec.edge_counts[k], &spec.sizes[u], &spec.sizes[v]);
        m[(u, v)] += t;
        m[(v, u)] += t;
    }
    if let Some(f) = &spec.diagonal_counts {
        for u in 0..n {
            m[(u, u)] = bigmath::ratio_to_f64(&(&f[u] * 2u32), &spec.sizes[u]);
        }
    }
    if sign == Sign::Hamiltonian {
        m = -m;
    }
    EffectiveHamiltonian {
        matrix: m,
        labels: spec.vertices.clone(),
        entrance: spec.entrance,
        exit: spec.exit,
        topology: spec.topology.clone(),
    }
}

/// Fully materialized graph. Vertices of one supervertex are contiguous.
#[derive(Clone, Debug)]
pub struct HierarchicalGraph {
    offsets: Vec<usize>,
    membership: Vec<u32>,
    adjacency: Vec<Vec<u32>>,
    spec: Option<Arc<SupergraphSpec>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wiring {
    /// Every vertex of `S_u` gets exactly `e_uv / s_u` edges into `S_v`.
    Balanced,
    /// Edges spread as evenly as the counts allow; regularity not enforced.
    Unbalanced,
}

impl HierarchicalGraph {
    /// Graph from block sizes and neighbor lists (multi-edges allowed).
    pub fn from_parts(block_sizes: &[usize], adjacency: Vec<Vec<u32>>) -> Self {
        let mut offsets = Vec::with_capacity(block_sizes.len() + 1);
        offsets.push(0);
        for &s in block_sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        let n = *offsets.last().unwrap();
        assert_eq!(adjacency.len(), n, "adjacency length must match vertex count");
        let mut membership = vec![0u32; n];
        for u in 0..block_sizes.len() {
            for x in offsets[u]..offsets[u + 1] {
                membership[x] = u as u32;
            }
        }
        HierarchicalGraph { offsets, membership, adjacency, spec: None }
    }

    pub fn with_spec(mut self, spec: SupergraphSpec) -> Self {
        self.spec = Some(Arc::new(spec));
        self
    }

    pub fn n(&self) -> usize {
        self.membership.len()
    }

    pub fn supervertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn block(&self, u: usize) -> Range<usize> {
        self.offsets[u]..self.offsets[u + 1]
    }

    pub fn block_size(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn membership(&self, x: usize) -> usize {
        self.membership[x] as usize
    }

    pub fn memberships(&self) -> &[u32] {
        &self.membership
    }

    pub fn neighbors(&self, x: usize) -> &[u32] {
        &self.adjacency[x]
    }

    pub fn adjacency(&self) -> &[Vec<u32>] {
        &self.adjacency
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adjacency[x].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn spec(&self) -> Option<&SupergraphSpec> {
        self.spec.as_deref()
    }

    /// Undirected edges `x <= y`, each listed once per multiplicity.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for (x, nb) in self.adjacency.iter().enumerate() {
            for &y in nb {
                if (x as u32) < y {
                    out.push((x as u32, y));
                } else if x as u32 == y {
                    // a self-loop appears twice in its own list
                    out.push((y, y));
                }
            }
        }
        let mut loops: Vec<_> = out.iter().filter(|(a, b)| a == b).copied().collect();
        out.retain(|(a, b)| a != b);
        loops.sort_unstable();
        out.extend(loops.chunks(2).map(|c| c[0]));
        out
    }

    /// Number of `x`–`y` edges.
    pub fn multiplicity(&self, x: usize, y: usize) -> usize {
        self.adjacency[x].iter().filter(|&&z| z as usize == y).count()
    }

    /// Replace edges `(a,b)` and `(c,d)` by `(a,d)` and `(c,b)`; degrees are kept.
    pub fn swap_endpoints(&mut self, (a, b): (usize, usize), (c, d): (usize, usize)) -> bool {
        if self.multiplicity(a, b) == 0 || self.multiplicity(c, d) == 0 {
            return false;
        }
        self.remove_edge(a, b);
        self.remove_edge(c, d);
        self.add_edge(a, d);
        self.add_edge(c, b);
        true
    }

    pub fn add_edge(&mut self, x: usize, y: usize) {
        self.adjacency[x].push(y as u32);
        self.adjacency[y].push(x as u32);
    }

    pub fn remove_edge(&mut self, x: usize, y: usize) -> bool {
        let Some(i) = self.adjacency[x].iter().position(|&z| z as usize == y) else {
            return false;
        };
        self.adjacency[x].swap_remove(i);
        let j = self.adjacency[y]
            .iter()
            .position(|&z| z as usize == x)
            .expect("adjacency lists out of sync");
        self.adjacency[y].swap_remove(j);
        true
    }

    /// Swap endpoints of two random edges lying in different superedges.
    pub fn perturb(&mut self, seed: u64) -> bool {
        let mut r = rng::seeded(seed);
        let edges: Vec<_> = self.edges().into_iter().filter(|(a, b)| a != b).collect();
        for _ in 0..1000 {
            let (a, b) = edges[r.random_range(0..edges.len())];
            let (c, d) = edges[r.random_range(0..edges.len())];
            let key = |x: u32, y: u32| {
                let (p, q) = (self.membership[x as usize], self.membership[y as usize]);
                (p.min(q), p.max(q))
            };
            if key(a, b) != key(c, d) && a != d && c != b {
                return self.swap_endpoints((a as usize, b as usize), (c as usize, d as usize));
            }
        }
        false
    }

    /// Sorted neighbor lists, used to compare wirings.
    pub fn canonical_adjacency(&self) -> Vec<Vec<u32>> {
        self.adjacency
            .iter()
            .map(|v| {
                let mut v = v.clone();
                v.sort_unstable();
                v
            })
            .collect()
    }
}

fn small_size(x: &BigUint, what: &str) -> Result<usize, GraphError> {
    x.to_usize()
        .ok_or_else(|| GraphError::InvalidSpec(format!("{what} {x} does not fit in memory")))
}

/// Random wiring of a spec into a concrete graph, deterministic in `seed`.
pub fn assemble_hierarchical(
    spec: &SupergraphSpec,
    seed: u64,
    cap: usize,
    wiring: Wiring,
) -> Result<HierarchicalGraph, GraphError> {
    spec.check_shape()?;
    let total = spec.total_vertices();
    if total > BigUint::from(cap) {
        return Err(GraphError::CapExceeded { needed: total.to_string(), cap });
    }
    if wiring == Wiring::Balanced {
        spec.check_balanced()?;
        spec.check_regularity()?;
    }
    let sizes: Vec<usize> = spec
        .sizes
        .iter()
        .map(|s| small_size(s, "size"))
        .collect::<Result<_, _>>()?;
    let mut g = HierarchicalGraph::from_parts(&sizes, vec![Vec::new(); total.to_usize().unwrap()]);

    for (k, &(u, v)) in spec.edges.iter().enumerate() {
        let e = small_size(&spec.edge_counts[k], "edge count")?;
        let mut r = rng::substream(seed, k as u64);
        let left = stubs(g.block(u), e, &mut r);
        let mut right = stubs(g.block(v), e, &mut r);
        right.shuffle(&mut r);
        let mut pairs: Vec<(u32, u32)> = left.into_iter().zip(right).collect();
        repair_bipartite(&mut pairs, &mut r);
        for (x, y) in pairs {
            g.add_edge(x as usize, y as usize);
        }
    }
    if let Some(f) = &spec.diagonal_counts {
        for u in 0..spec.len() {
            let f_u = small_size(&f[u], "diagonal count")?;
            if f_u == 0 {
                continue;
            }
            let mut r = rng::substream(seed, (spec.edges.len() + u) as u64);
            let mut s = stubs(g.block(u), 2 * f_u, &mut r);
            s.shuffle(&mut r);
            let mut pairs: Vec<(u32, u32)> = s.chunks(2).map(|c| (c[0], c[1])).collect();
            repair_within(&mut pairs, &mut r);
            for (x, y) in pairs {
                g.add_edge(x as usize, y as usize);
            }
        }
    }
    Ok(g.with_spec(spec.clone()))
}

/// `count` edge stubs spread over `block`; the remainder goes to random vertices.
fn stubs(block: Range<usize>, count: usize, r: &mut rng::Rng) -> Vec<u32> {
    let len = block.len();
    let base = count / len;
    let rem = count % len;
    let mut extra: Vec<usize> = block.clone().collect();
    extra.shuffle(r);
    let mut out = Vec::with_capacity(count);
    for x in block {
        out.extend(std::iter::repeat_n(x as u32, base));
    }
    out.extend(extra[..rem].iter().map(|&x| x as u32));
    out.sort_unstable();
    out
}

/// Remove repeated `(x,y)` pairs by swapping right endpoints where possible.
fn repair_bipartite(pairs: &mut [(u32, u32)], r: &mut rng::Rng) {
    let m = pairs.len();
    if m < 2 {
        return;
    }
    let mut count: HashMap<(u32, u32), u32> = HashMap::new();
    for &p in pairs.iter() {
        *count.entry(p).or_default() += 1;
    }
    for i in 0..m {
        let mut tries = 0;
        while count[&pairs[i]] > 1 && tries < 200 {
            tries += 1;
            let j = r.random_range(0..m);
            let (a, b) = pairs[i];
            let (c, d) = pairs[j];
            if count.get(&(a, d)).copied().unwrap_or(0) > 0 || count.get(&(c, b)).copied().unwrap_or(0) > 0 {
                continue;
            }
            *count.get_mut(&(a, b)).unwrap() -= 1;
            *count.get_mut(&(c, d)).unwrap() -= 1;
            *count.entry((a, d)).or_default() += 1;
            *count.entry((c, b)).or_default() += 1;
            pairs[i] = (a, d);
            pairs[j] = (c, b);
        }
    }
}

/// Remove self-loops and repeated pairs among edges inside one block.
fn repair_within(pairs: &mut [(u32, u32)], r: &mut rng::Rng) {
    let m = pairs.len();
    let key = |(a, b): (u32, u32)| (a.min(b), a.max(b));
    let mut count: HashMap<(u32, u32), u32> = HashMap::new();
    for &p in pairs.iter() {
        *count.entry(key(p)).or_default() += 1;
    }
    let bad = |p: (u32, u32), count: &HashMap<(u32, u32), u32>| p.0 == p.1 || count[&key(p)] > 1;
    for i in 0..m {
        let mut tries = 0;
        while bad(pairs[i], &count) && tries < 200 && m > 1 {
            tries += 1;
            let j = r.random_range(0..m);
            if j == i {
                continue;
            }
            let (a, b) = pairs[i];
            let (c, d) = pairs[j];
            let (n1, n2) = ((a, d), (c, b));
            if n1.0 == n1.1 || n2.0 == n2.1 {
                continue;
            }
            if count.get(&key(n1)).copied().unwrap_or(0) > 0 || count.get(&key(n2)).copied().unwrap_or(0) > 0 {
                continue;
            }
            *count.get_mut(&key((a, b))).unwrap() -= 1;
            *count.get_mut(&key((c, d))).unwrap() -= 1;
            *count.entry(key(n1)).or_default() += 1;
            *count.entry(key(n2)).or_default() += 1;
            pairs[i] = n1;
            pairs[j] = n2;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BalanceReport {
    pub balanced: bool,
    /// Largest spread (max − min) of per-vertex edge counts into one neighbor supervertex.
    pub worst_violation: usize,
    /// Directed superedge `(u, v)` attaining the worst spread.
    pub location: Option<(usize, usize)>,
}

pub fn validate_balanced(graph: &HierarchicalGraph) -> BalanceReport {
    let mut worst = 0;
    let mut location = None;
    for u in 0..graph.supervertex_count() {
        let block = graph.block(u);
        let mut per_vertex: Vec<HashMap<u32, usize>> = Vec::with_capacity(block.len());
        for x in block {
            let mut c = HashMap::new();
            for &y in graph.neighbors(x) {
                *c.entry(graph.membership[y as usize]).or_insert(0) += 1;
            }
            per_vertex.push(c);
        }
        let mut targets: Vec<u32> = per_vertex.iter().flat_map(|c| c.keys().copied()).collect();
        targets.sort_unstable();
        targets.dedup();
        for v in targets {
            let counts = per_vertex.iter().map(|c| c.get(&v).copied().unwrap_or(0));
            let lo = counts.clone().min().unwrap_or(0);
            let hi = counts.max().unwrap_or(0);
            if hi - lo > worst {
                worst = hi - lo;
                location = Some((u, v as usize));
            }
        }
    }
    BalanceReport { balanced: worst == 0, worst_violation: worst, location }
}

/// `max_u ‖A|S_u⟩ − Σ_v H_vu |S_v⟩‖₂` with `H` in adjacency sign.
pub fn subspace_invariance_residual(graph: &HierarchicalGraph, h: &EffectiveHamiltonian) -> f64 {
    let k = graph.supervertex_count();
    assert_eq!(k, h.dim(), "graph and Hamiltonian disagree on supervertex count");
    let mut buf = vec![0.0f64; graph.n()];
    let mut worst = 0.0f64;
    for u in 0..k {
        buf.iter_mut().for_each(|b| *b = 0.0);
        let su = graph.block_size(u) as f64;
        for x in graph.block(u) {
            for &y in graph.neighbors(x) {
                buf[y as usize] += 1.0 / su.sqrt();
            }
        }
        for v in 0..k {
            let hv = h.matrix[(v, u)];
            if hv == 0.0 {
                continue;
            }
            let amp = hv / (graph.block_size(v) as f64).sqrt();
            for y in graph.block(v) {
                buf[y] -= amp;
            }
        }
        let norm = buf.iter().map(|b| b * b).sum::<f64>().sqrt();
        worst = worst.max(norm);
    }
    worst
}

/// JSON document for a spec plus an optional materialization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphDocument {
    pub spec: Option<SupergraphSpec>,
    pub materialized: Option<Materialized>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Materialized {
    pub n: usize,
    pub membership: Vec<u32>,
    pub edges: Vec<(u32, u32)>,
}

impl From<&HierarchicalGraph> for Materialized {
    fn from(g: &HierarchicalGraph) -> Self {
        Materialized { n: g.n(), membership: g.membership.clone(), edges: g.edges() }
    }
}

impl Materialized {
    /// Rebuild a graph; membership must list each supervertex in one contiguous run.
    pub fn to_graph(&self) -> Result<HierarchicalGraph, GraphError> {
        let k = self.membership.iter().map(|&m| m as usize + 1).max().unwrap_or(0);
        let mut sizes = vec![0usize; k];
        for (x, &m) in self.membership.iter().enumerate() {
            if x > 0 && m < self.membership[x - 1] {
                return Err(GraphError::InvalidSpec("membership is not contiguous".into()));
            }
            sizes[m as usize] += 1;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        Ok(HierarchicalGraph::from_parts(&sizes, adj))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: &[u64]) -> Vec<BigUint> {
        v.iter().map(|&x| BigUint::from(x)).collect()
    }

    fn path_spec() -> SupergraphSpec {
        SupergraphSpec::line(big(&[1, 2, 1]), big(&[2, 2]), Degree::Regular(2))
    }

    #[test]
    fn small_line_assembles_balanced() {
        let g = assemble_hierarchical(&path_spec(), 7, 100, Wiring::Balanced).unwrap();
        assert_eq!(g.n(), 4);
        for x in g.block(1) {
            let nb: Vec<usize> = g.neighbors(x).iter().map(|&y| g.membership(y as usize)).collect();
            assert_eq!(nb.iter().filter(|&&m| m == 0).count(), 1);
            assert_eq!(nb.iter().filter(|&&m| m == 2).count(), 1);
        }
        assert!(validate_balanced(&g).balanced);
    }

    #[test]
    fn indivisible_counts_rejected() {
        let spec = SupergraphSpec::line(big(&[1, 3]), big(&[2]), Degree::Regular(2));
        let err = assemble_hierarchical(&spec, 0, 100, Wiring::Balanced).unwrap_err();
        assert!(matches!(err, GraphError::UnbalancedSpec { .. }));
    }

    #[test]
    fn cap_is_enforced() {
        let err = assemble_hierarchical(&path_spec(), 0, 3, Wiring::Balanced).unwrap_err();
        assert!(matches!(err, GraphError::CapExceeded { .. }));
    }

    #[test]
    fn degree_identity_checked() {
        let spec = SupergraphSpec::line(big(&[1, 2, 2, 1]), big(&[2, 2, 2]), Degree::Regular(3));
        let err = assemble_hierarchical(&spec, 0, 100, Wiring::Balanced).unwrap_err();
        assert!(matches!(err, GraphError::DegreeInfeasible { .. }));
    }

    #[test]
    fn hoppings_of_small_line() {
        let h = effective_hamiltonian(&path_spec(), Sign::Adjacency);
        let s2 = 2f64.sqrt();
        assert!((h.matrix[(0, 1)] - s2).abs() < 1e-15);
        assert!((h.matrix[(1, 2)] - s2).abs() < 1e-15);
        assert_eq!(h.matrix[(0, 0)], 0.0);
        let neg = effective_hamiltonian(&path_spec(), Sign::Hamiltonian);
        assert_eq!(neg.matrix, -h.matrix);
    }

    #[test]
    fn constant_diagonal_from_uniform_f() {
        let mut spec = SupergraphSpec::line(big(&[2, 4, 2]), big(&[4, 4]), Degree::Regular(5));
        let f = 3u64;
        spec.diagonal_counts = Some(spec.sizes.iter().map(|s| s * f).collect());
        let h = effective_hamiltonian(&spec, Sign::Adjacency);
        for u in 0..3 {
            assert_eq!(h.matrix[(u, u)], 2.0 * f as f64);
        }
        spec.diagonal_counts = Some(spec.sizes.iter().map(|s| s * f / 2u32).collect());
        let h = effective_hamiltonian(&spec, Sign::Adjacency);
        for u in 0..3 {
            assert_eq!(h.matrix[(u, u)], f as f64);
        }
    }

    #[test]
    fn empty_single_supervertex() {
        let spec = SupergraphSpec::line(big(&[3]), vec![], Degree::Regular(0));
        let g = assemble_hierarchical(&spec, 0, 10, Wiring::Balanced).unwrap();
        assert!(validate_balanced(&g).balanced);
        let h = effective_hamiltonian(&spec, Sign::Adjacency);
        assert_eq!(subspace_invariance_residual(&g, &h), 0.0);
    }

    #[test]
    fn residual_detects_rewiring() {
        let spec = SupergraphSpec::line(big(&[1, 2, 4, 4, 4, 2, 1]), big(&[2, 4, 8, 8, 4, 2]), Degree::Regular(4));
        // D-regularity fails at the middle, so wire without the regularity check.
        let g = assemble_hierarchical(&spec, 3, 100, Wiring::Unbalanced).unwrap();
        let h = effective_hamiltonian(&spec, Sign::Adjacency);
        assert!(subspace_invariance_residual(&g, &h) < 1e-12);
        let mut p = g.clone();
        assert!(p.perturb(11));
        assert!(!validate_balanced(&p).balanced);
        assert!(subspace_invariance_residual(&p, &h) > 0.1);
    }

    #[test]
    fn intra_edges_are_simple() {
        let mut spec = SupergraphSpec::line(big(&[6]), vec![], Degree::Regular(2));
        spec.diagonal_counts = Some(big(&[6]));
        let g = assemble_hierarchical(&spec, 5, 100, Wiring::Balanced).unwrap();
        for x in 0..6 {
            assert_eq!(g.degree(x), 2);
            assert_eq!(g.multiplicity(x, x), 0);
        }
    }

    #[test]
    fn document_round_trip() {
        let g = assemble_hierarchical(&path_spec(), 1, 100, Wiring::Balanced).unwrap();
        let doc = GraphDocument { spec: Some(path_spec()), materialized: Some((&g).into()), scale: None };
        let s = serde_json::to_string(&doc).unwrap();
        assert!(s.contains("\"sizes\":[\"1\",\"2\",\"1\"]"));
        let back: GraphDocument = serde_json::from_str(&s).unwrap();
        assert_eq!(back.spec.unwrap(), path_spec());
        let g2 = back.materialized.unwrap().to_graph().unwrap();
        assert_eq!(g2.canonical_adjacency(), g.canonical_adjacency());
    }
}
