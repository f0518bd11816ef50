// SPDX-License-Identifier: Apache-2.0
//! Encoded neighbor oracle: vertices are only visible through random codewords.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use thiserror::Error;

use crate::graph::HierarchicalGraph;
use crate::rng;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("codeword space 2^{bits} is smaller than |V|^2 = {needed}")]
    CodewordSpaceTooSmall { bits: u32, needed: u128 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Answer {
    Vertex(u64),
    Invalid,
}

struct Tables {
    enc: Vec<u64>,
    dec: HashMap<u64, u32>,
    neighbors: Vec<Vec<u32>>,
    degree: usize,
    entrance: u32,
    exit: u32,
}

/// Oracle `(Enc(x), s) ↦ Enc(s-th neighbor of x)`. Clones share the tables and
/// carry their own query counter.
pub struct EncodedOracle {
    tables: Arc<Tables>,
    queries: AtomicU64,
}

impl Clone for EncodedOracle {
    fn clone(&self) -> Self {
        EncodedOracle {
            tables: Arc::clone(&self.tables),
            queries: AtomicU64::new(self.queries()),
        }
    }
}

/// Build an oracle. `degree` is the label range `[D]`; slots past a vertex's
/// true degree answer `Invalid`.
pub fn make_oracle(
    graph: &HierarchicalGraph,
    seed: u64,
    codeword_bits: u32,
) -> Result<EncodedOracle, OracleError> {
    let n = graph.n() as u128;
    let needed = n * n;
    if codeword_bits == 0 || codeword_bits > 64 || (1u128 << codeword_bits) < needed {
        return Err(OracleError::CodewordSpaceTooSmall { bits: codeword_bits, needed });
    }
    let mut r = rng::seeded(seed);
    let mut used = HashSet::with_capacity(graph.n());
    let mut enc = Vec::with_capacity(graph.n());
    while enc.len() < graph.n() {
        let c: u64 = if codeword_bits == 64 {
            r.random()
        } else {
            r.random_range(0..(1u64 << codeword_bits))
        };
        if used.insert(c) {
            enc.push(c);
        }
    }
    let dec = enc.iter().enumerate().map(|(x, &c)| (c, x as u32)).collect();
    let neighbors = (0..graph.n())
        .map(|x| {
            let mut nb = graph.neighbors(x).to_vec();
            nb.shuffle(&mut r);
            nb
        })
        .collect();
    let (entrance, exit) = match graph.spec() {
        Some(s) => (graph.block(s.entrance).start, graph.block(s.exit).start),
        None => (0, graph.n() - 1),
    };
    let degree = graph
        .spec()
        .map(|s| s.degree.max() as usize)
        .unwrap_or(0)
        .max(graph.max_degree());
    Ok(EncodedOracle {
        tables: Arc::new(Tables {
            enc,
            dec,
            neighbors,
            degree,
            entrance: entrance as u32,
            exit: exit as u32,
        }),
        queries: AtomicU64::new(0),
    })
}

/// Smallest codeword width whose space holds `|V|²` words.
pub fn codeword_bits_for(n: usize) -> u32 {
    let needed = (n as u128) * (n as u128);
    let mut b = 1u32;
    while (1u128 << b) < needed {
        b += 1;
    }
    b.min(64)
}

impl EncodedOracle {
    pub fn query(&self, code: u64, slot: usize) -> Answer {
        self.queries.fetch_add(1, Ordering::Relaxed);
        let t = &*self.tables;
        let Some(&x) = t.dec.get(&code) else {
            return Answer::Invalid;
        };
        match t.neighbors[x as usize].get(slot) {
            Some(&y) => Answer::Vertex(t.enc[y as usize]),
            None => Answer::Invalid,
        }
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    /// Same tables with the counter reset.
    pub fn fresh(&self) -> Self {
        EncodedOracle { tables: Arc::clone(&self.tables), queries: AtomicU64::new(0) }
    }

    pub fn degree(&self) -> usize {
        self.tables.degree
    }

    pub fn entrance_code(&self) -> u64 {
        self.tables.enc[self.tables.entrance as usize]
    }

    pub fn exit_code(&self) -> u64 {
        self.tables.enc[self.tables.exit as usize]
    }

    /// Codeword of vertex `x`; test and harness use only.
    pub fn encode(&self, x: usize) -> u64 {
        self.tables.enc[x]
    }

    pub fn vertex_count(&self) -> usize {
        self.tables.enc.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{assemble_hierarchical, Degree, SupergraphSpec, Wiring};
    use num_bigint::BigUint;

    fn graph() -> HierarchicalGraph {
        let b = |v: &[u64]| v.iter().map(|&x| BigUint::from(x)).collect::<Vec<_>>();
        let spec = SupergraphSpec::line(b(&[1, 2, 2, 1]), b(&[2, 4, 2]), Degree::Regular(3));
        assemble_hierarchical(&spec, 9, 100, Wiring::Balanced).unwrap()
    }

    #[test]
    fn entrance_neighbors_answered() {
        let g = graph();
        let o = make_oracle(&g, 1, codeword_bits_for(g.n())).unwrap();
        let mut got: Vec<u64> = (0..o.degree())
            .filter_map(|s| match o.query(o.entrance_code(), s) {
                Answer::Vertex(c) => Some(c),
                Answer::Invalid => None,
            })
            .collect();
        let mut want: Vec<u64> = g.neighbors(0).iter().map(|&y| o.encode(y as usize)).collect();
        got.sort_unstable();
        want.sort_unstable();
        assert_eq!(got, want);
        assert_eq!(o.queries(), o.degree() as u64);
    }

    #[test]
    fn non_codeword_is_invalid() {
        let g = graph();
        let o = make_oracle(&g, 2, 20).unwrap();
        let codes: HashSet<u64> = (0..g.n()).map(|x| o.encode(x)).collect();
        let probe = (0..).find(|c| !codes.contains(c)).unwrap();
        assert_eq!(o.query(probe, 1), Answer::Invalid);
        assert_eq!(o.query(probe, 0), Answer::Invalid);
        assert_eq!(o.queries(), 2);
        assert_eq!(o.fresh().queries(), 0);
        assert_eq!(o.clone().queries(), 2);
    }

    #[test]
    fn small_codeword_space_rejected() {
        let g = graph();
        assert!(make_oracle(&g, 0, 3).is_err());
        assert_eq!(codeword_bits_for(6), 6);
    }
}
