// SPDX-License-Identifier: Apache-2.0
//! Gap lower bound for 2D Lieb Hamiltonians through a snake-shaped chain.
//!
//! The snake runs along row 0 left to right, climbs through the vertical edge
//! site at the row end, runs row 1 right to left, and so on: `2N² − 1` sites.
//! Its last site is dropped to get an even chain. The deleted set is every
//! vertical edge site off the route plus that last site, `(N−1)² + 1` sites in
//! all, which equals the number of zero modes. The chain is a principal
//! submatrix of `H`, so by interlacing it has eigenvalues on both sides of the
//! zero cluster, inside the gap; the even-chain inverse bound then applies.

use serde::{Deserialize, Serialize};

use super::chain::even_chain_inverse;
use super::SpectralError;
use crate::graph::EffectiveHamiltonian;
use crate::lieb::LiebLattice;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnakeBound {
    pub bound: f64,
    /// Sites of the even chain in order.
    pub route: Vec<usize>,
    /// Sites removed from the lattice to form the chain.
    pub deleted: Vec<usize>,
}

/// Full boustrophedon route of length `2N² − 1`.
pub fn snake_route(lattice: &LiebLattice) -> Result<Vec<usize>, SpectralError> {
    if lattice.dim() != 2 {
        return Err(SpectralError::NotTwoDimensional);
    }
    let n = lattice.side();
    let mut route = Vec::with_capacity(2 * n * n - 1);
    for y in 0..n {
        let xs: Vec<usize> = if y % 2 == 0 { (0..n).collect() } else { (0..n).rev().collect() };
        for (k, &x) in xs.iter().enumerate() {
            route.push(lattice.delta0_index(&[x, y]));
            if k + 1 < n {
                let lo = x.min(xs[k + 1]);
                route.push(lattice.delta1_index(0, &[lo, y]));
            }
        }
        if y + 1 < n {
            route.push(lattice.delta1_index(1, &[xs[n - 1], y]));
        }
    }
    Ok(route)
}

pub fn snake_gap_bound(lattice: &LiebLattice, h: &EffectiveHamiltonian) -> Result<SnakeBound, SpectralError> {
    let mut route = snake_route(lattice)?;
    route.pop();
    let t: Vec<f64> = route.windows(2).map(|w| h.matrix[(w[0], w[1])]).collect();
    let inv = even_chain_inverse(&t)?;
    let mut on_route = vec![false; lattice.len()];
    for &s in &route {
        on_route[s] = true;
    }
    let deleted = (0..lattice.len()).filter(|&s| !on_route[s]).collect();
    Ok(SnakeBound { bound: inv.bound, route, deleted })
}
