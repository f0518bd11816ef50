// SPDX-License-Identifier: Apache-2.0
//! Classical oracle baselines: random, non-backtracking and depth-first walkers,
//! exploration walks with their stopping rules, and reachability estimates.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bigmath;
use crate::graph::{HierarchicalGraph, SupergraphSpec};
use crate::oracle::{Answer, EncodedOracle};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum ClassicalError {
    #[error("at least one trial is required")]
    NoTrials,
    #[error("supervertex {0} is out of range")]
    BadSupervertex(usize),
}

/// Trajectory of a graph-level non-backtracking walk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub vertices: Vec<usize>,
    /// Steps where a dead end forced a reversal.
    pub reversals: usize,
}

fn nbw_step(g: &HierarchicalGraph, cur: usize, prev: Option<usize>, r: &mut rng::Rng) -> (usize, bool) {
    let nb = g.neighbors(cur);
    let Some(p) = prev else {
        return (nb[r.random_range(0..nb.len())] as usize, false);
    };
    // drop one copy of the edge we arrived on
    let back = nb.iter().position(|&y| y as usize == p);
    let choices = nb.len() - back.is_some() as usize;
    if choices == 0 {
        return (p, true);
    }
    let mut k = r.random_range(0..choices);
    if let Some(b) = back {
        if k >= b {
            k += 1;
        }
    }
    (nb[k] as usize, false)
}

/// Non-backtracking walk: uniform over all edges first, then over the non-reversing ones.
pub fn nonbacktracking_walk(g: &HierarchicalGraph, start: usize, steps: usize, seed: u64) -> Trajectory {
    let mut r = rng::seeded(seed);
    let mut vertices = Vec::with_capacity(steps + 1);
    vertices.push(start);
    let mut prev = None;
    let mut reversals = 0;
    for _ in 0..steps {
        let cur = *vertices.last().unwrap();
        if g.degree(cur) == 0 {
            break;
        }
        let (next, rev) = nbw_step(g, cur, prev, &mut r);
        reversals += rev as usize;
        prev = Some(cur);
        vertices.push(next);
    }
    Trajectory { vertices, reversals }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupervertexClass {
    pub small: bool,
    /// Small with at least one large neighbor.
    pub boundary: bool,
}

/// Small iff `s_v ≤ Q/δ`.
pub fn classify_supervertices(spec: &SupergraphSpec, q: f64, delta: f64) -> Vec<SupervertexClass> {
    let threshold = q / delta;
    let small: Vec<bool> = spec.sizes.iter().map(|s| bigmath::big_to_f64(s) <= threshold).collect();
    let inc = spec.incidence();
    (0..spec.len())
        .map(|u| SupervertexClass {
            small: small[u],
            boundary: small[u] && inc[u].iter().any(|&(_, v)| !small[v]),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ReachedSmall,
    RevisitedVertex,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationOutcome {
    pub steps: usize,
    pub terminal: usize,
    pub reason: StopReason,
    pub success: bool,
    /// Supervertices touched, in order of first visit.
    pub supervertices: Vec<usize>,
}

/// Non-backtracking walk that stops on entering a small supervertex, on
/// meeting a vertex in `visited` or already on its own path, or after `q` steps.
pub fn exploration_walk(
    g: &HierarchicalGraph,
    small: &[bool],
    start: usize,
    q: usize,
    visited: &HashSet<usize>,
    seed: u64,
) -> ExplorationOutcome {
    let mut r = rng::seeded(seed);
    let mut own = HashSet::from([start]);
    let mut supervertices = vec![g.membership(start)];
    let (mut cur, mut prev) = (start, None);
    let finish = |steps, terminal, reason: StopReason, sv: Vec<usize>| ExplorationOutcome {
        steps,
        terminal,
        success: reason != StopReason::Exhausted,
        reason,
        supervertices: sv,
    };
    for step in 1..=q {
        if g.degree(cur) == 0 {
            break;
        }
        let (next, _) = nbw_step(g, cur, prev, &mut r);
        prev = Some(cur);
        cur = next;
        let sv = g.membership(cur);
        if !supervertices.contains(&sv) {
            supervertices.push(sv);
        }
        if small[sv] {
            return finish(step, cur, StopReason::ReachedSmall, supervertices);
        }
        if visited.contains(&cur) || !own.insert(cur) {
            return finish(step, cur, StopReason::RevisitedVertex, supervertices);
        }
    }
    finish(q, cur, StopReason::Exhausted, supervertices)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PReach {
    pub estimate: f64,
    pub stderr: f64,
    /// Start vertex achieving the maximum.
    pub best_start: usize,
}

/// Max over up to `starts` sampled vertices `x ∈ S_v` of the fraction of
/// exploration walks from `x` that succeed and touch `S_w`.
pub fn estimate_p_reach(
    g: &HierarchicalGraph,
    small: &[bool],
    v: usize,
    w: usize,
    q: usize,
    trials: usize,
    starts: usize,
    seed: u64,
) -> Result<PReach, ClassicalError> {
    if trials == 0 {
        return Err(ClassicalError::NoTrials);
    }
    for u in [v, w] {
        if u >= g.supervertex_count() {
            return Err(ClassicalError::BadSupervertex(u));
        }
    }
    let mut r = rng::seeded(seed);
    let mut pool: Vec<usize> = g.block(v).collect();
    pool.shuffle(&mut r);
    pool.truncate(starts.max(1));
    let empty = HashSet::new();
    let best = pool
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let hits = (0..trials)
                .filter(|&k| {
                    let o = exploration_walk(g, small, x, q, &empty, rng::mix(rng::mix(seed, i as u64), k as u64));
                    o.success && o.supervertices.contains(&w)
                })
                .count();
            (hits as f64 / trials as f64, x)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
        .expect("at least one start");
    let p = best.0;
    Ok(PReach { estimate: p, stderr: (p * (1.0 - p) / trials as f64).sqrt(), best_start: best.1 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Simple random walk.
    Rw,
    /// Non-backtracking walk.
    Nbw,
    /// Randomized depth-first search.
    Dfs,
}

impl std::str::FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rw" => Ok(Policy::Rw),
            "nbw" => Ok(Policy::Nbw),
            "dfs" => Ok(Policy::Dfs),
            _ => Err(format!("unknown policy {s:?} (rw, nbw, dfs)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraversalOutcome {
    pub found_exit: bool,
    pub queries: u64,
}

/// Walker that sees the graph only through the oracle, caching answers so a
/// repeated `(vertex, slot)` costs nothing.
struct Walker<'a> {
    oracle: &'a EncodedOracle,
    budget: u64,
    cache: HashMap<(u64, usize), Answer>,
    exit: u64,
    found: bool,
}

impl Walker<'_> {
    fn ask(&mut self, code: u64, slot: usize) -> Option<Answer> {
        if let Some(&a) = self.cache.get(&(code, slot)) {
            return Some(a);
        }
        if self.oracle.queries() >= self.budget {
            return None;
        }
        let a = self.oracle.query(code, slot);
        self.cache.insert((code, slot), a);
        if a == Answer::Vertex(self.exit) {
            self.found = true;
        }
        Some(a)
    }

    /// Valid neighbor through a uniformly random slot order, skipping `avoid`
    /// unless it is the only option. `None` when the budget runs out.
    fn step(&mut self, code: u64, avoid: Option<u64>, r: &mut rng::Rng) -> Option<u64> {
        let mut slots: Vec<usize> = (0..self.oracle.degree()).collect();
        slots.shuffle(r);
        let mut fallback = None;
        for s in slots {
            match self.ask(code, s)? {
                Answer::Vertex(c) if Some(c) == avoid => fallback = Some(c),
                Answer::Vertex(c) => return Some(c),
                Answer::Invalid => {}
            }
            if self.found {
                return None;
            }
        }
        fallback
    }
}

/// Run one policy from the entrance with at most `q` queries.
pub fn classical_traversal(oracle: &EncodedOracle, q: u64, policy: Policy, seed: u64) -> TraversalOutcome {
    let mut r = rng::seeded(seed);
    let start = oracle.entrance_code();
    let base = oracle.queries();
    let mut w = Walker { oracle, budget: base + q, cache: HashMap::new(), exit: oracle.exit_code(), found: false };
    if start == w.exit {
        return TraversalOutcome { found_exit: true, queries: 0 };
    }
    match policy {
        Policy::Rw | Policy::Nbw => {
            let (mut cur, mut prev) = (start, None);
            while !w.found {
                let avoid = if policy == Policy::Nbw { prev } else { None };
                match w.step(cur, avoid, &mut r) {
                    Some(next) => {
                        prev = Some(cur);
                        cur = next;
                    }
                    None => break,
                }
            }
        }
        Policy::Dfs => {
            let mut seen = HashSet::from([start]);
            let mut stack: Vec<(u64, Vec<usize>)> = Vec::new();
            let fresh_slots = |r: &mut rng::Rng| {
                let mut s: Vec<usize> = (0..oracle.degree()).collect();
                s.shuffle(r);
                s
            };
            stack.push((start, fresh_slots(&mut r)));
            'outer: while let Some((code, slots)) = stack.last_mut() {
                let Some(slot) = slots.pop() else {
                    stack.pop();
                    continue;
                };
                let code = *code;
                match w.ask(code, slot) {
                    None => break 'outer,
                    Some(Answer::Vertex(c)) if seen.insert(c) => {
                        if w.found {
                            break;
                        }
                        stack.push((c, fresh_slots(&mut r)));
                    }
                    Some(_) => {}
                }
                if w.found {
                    break;
                }
            }
        }
    }
    TraversalOutcome { found_exit: w.found, queries: oracle.queries() - base }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessRate {
    pub rate: f64,
    pub stderr: f64,
    pub mean_queries: f64,
    pub trials: usize,
}

/// Independent trials, each with a fresh oracle counter and its own stream.
pub fn classical_success_rate(
    oracle: &EncodedOracle,
    q: u64,
    policy: Policy,
    trials: usize,
    seed: u64,
) -> Result<SuccessRate, ClassicalError> {
    if trials == 0 {
        return Err(ClassicalError::NoTrials);
    }
    let runs: Vec<TraversalOutcome> = (0..trials)
        .into_par_iter()
        .map(|k| classical_traversal(&oracle.fresh(), q, policy, rng::mix(seed, k as u64)))
        .collect();
    let n = trials as f64;
    let rate = runs.iter().filter(|o| o.found_exit).count() as f64 / n;
    Ok(SuccessRate {
        rate,
        stderr: (rate * (1.0 - rate) / n).sqrt(),
        mean_queries: runs.iter().map(|o| o.queries as f64).sum::<f64>() / n,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{assemble_hierarchical, Degree, Wiring};
    use crate::line::welded_tree_line;
    use crate::oracle::{codeword_bits_for, make_oracle};
    use num_bigint::BigUint;

    fn path(n: usize) -> HierarchicalGraph {
        let adj = (0..n)
            .map(|i| {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(i as u32 - 1);
                }
                if i + 1 < n {
                    v.push(i as u32 + 1);
                }
                v
            })
            .collect();
        HierarchicalGraph::from_parts(&vec![1; n], adj)
    }

    fn cycle(n: usize) -> HierarchicalGraph {
        let adj = (0..n).map(|i| vec![((i + n - 1) % n) as u32, ((i + 1) % n) as u32]).collect();
        HierarchicalGraph::from_parts(&vec![1; n], adj)
    }

    #[test]
    fn path_walk_is_monotone() {
        let t = nonbacktracking_walk(&path(10), 0, 9, 3);
        assert_eq!(t.vertices, (0..10).collect::<Vec<_>>());
        let t = nonbacktracking_walk(&path(10), 0, 12, 3);
        assert_eq!(t.reversals, 1);
    }

    #[test]
    fn cycle_returns_twice() {
        for seed in 0..5 {
            let t = nonbacktracking_walk(&cycle(7), 0, 14, seed);
            assert_eq!(t.vertices.iter().skip(1).filter(|&&v| v == 0).count(), 2);
        }
    }

    #[test]
    fn classification() {
        let b = |v: &[u64]| v.iter().map(|&x| BigUint::from(x)).collect::<Vec<_>>();
        let spec = SupergraphSpec::line(b(&[5000, 20000, 1]), b(&[1, 1]), Degree::Regular(3));
        let c = classify_supervertices(&spec, 100.0, 0.01);
        assert!(c[0].small && c[0].boundary && !c[1].small && c[2].small);
        let (w, _) = welded_tree_line(20);
        let c = classify_supervertices(&w, 1024.0, 1.0 / 1024.0);
        for (u, s) in w.sizes.iter().enumerate() {
            assert_eq!(!c[u].small, s > &(BigUint::from(1u8) << 20));
        }
        let unit = SupergraphSpec::line(b(&[1, 1, 1]), b(&[1, 1]), Degree::Regular(2));
        assert!(classify_supervertices(&unit, 1.0, 0.5).iter().all(|c| c.small));
    }

    #[test]
    fn exploration_rules() {
        let g = path(5);
        let small = [false, true, false, false, false];
        let o = exploration_walk(&g, &small, 0, 10, &HashSet::new(), 0);
        assert_eq!((o.reason, o.steps, o.success), (StopReason::ReachedSmall, 1, true));
        let o = exploration_walk(&g, &small, 0, 0, &HashSet::new(), 0);
        assert_eq!((o.reason, o.steps, o.success), (StopReason::Exhausted, 0, false));
        let o = exploration_walk(&cycle(6), &[false; 6], 0, 100, &HashSet::new(), 1);
        assert_eq!((o.reason, o.steps), (StopReason::RevisitedVertex, 6));
        assert!(estimate_p_reach(&g, &small, 0, 1, 3, 0, 1, 0).is_err());
        let p = estimate_p_reach(&g, &small, 0, 1, 3, 50, 1, 0).unwrap();
        assert_eq!(p.estimate, 1.0);
    }

    fn welded(n: usize) -> HierarchicalGraph {
        let (spec, _) = welded_tree_line(n);
        assemble_hierarchical(&spec, 1, 1 << 20, Wiring::Balanced).unwrap()
    }

    #[test]
    fn query_budget_respected() {
        let g = welded(6);
        let o = make_oracle(&g, 3, codeword_bits_for(g.n())).unwrap();
        for policy in [Policy::Rw, Policy::Nbw, Policy::Dfs] {
            for seed in 0..10 {
                let out = classical_traversal(&o.fresh(), 37, policy, seed);
                assert!(out.queries <= 37);
            }
        }
    }

    #[test]
    fn exhaustive_dfs_finds_exit() {
        let g = welded(5);
        let o = make_oracle(&g, 4, codeword_bits_for(g.n())).unwrap();
        let q = (g.n() * o.degree()) as u64;
        let s = classical_success_rate(&o, q, Policy::Dfs, 20, 1).unwrap();
        assert_eq!(s.rate, 1.0);
    }

    #[test]
    fn occupancy_bounded_by_size_ratio() {
        let g = welded(5);
        let spec = g.spec().unwrap().clone();
        let mut r = rng::seeded(8);
        for _ in 0..20 {
            let v = r.random_range(0..spec.len());
            let w = r.random_range(0..spec.len());
            let t = r.random_range(1..12);
            let trials = 2000;
            let hits = (0..trials)
                .filter(|&k| {
                    let start = g.block(v).start + r.random_range(0..g.block_size(v));
                    let tr = nonbacktracking_walk(&g, start, t, rng::mix(9, k));
                    g.membership(*tr.vertices.last().unwrap()) == w
                })
                .count();
            let p = hits as f64 / trials as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt().max(1.0 / trials as f64);
            let ratio = bigmath::ratio_to_f64(&spec.sizes[w], &spec.sizes[v]);
            assert!(p <= ratio + 5.0 * se, "v={v} w={w} t={t}: {p} vs {ratio}");
        }
    }
}
