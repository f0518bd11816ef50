// SPDX-License-Identifier: Apache-2.0
//! Integer log-2 edge fields and their use as fluctuations around a mountain.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use super::dimer::{sample_dimer_grid, DimerError};
use super::ice::sample_ice_grid;
use super::{mountain_ratios, LiebError, LiebLattice, RatioAssignment};
use crate::rng;

/// Integer field on the edges of an `nx × ny` site grid, in units of `log 2`.
/// `horiz[x + (nx−1)·y]` runs `(x,y) → (x+1,y)`, `vert[x + nx·y]` runs `(x,y) → (x,y+1)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeField {
    pub nx: usize,
    pub ny: usize,
    pub horiz: Vec<i64>,
    pub vert: Vec<i64>,
}

impl EdgeField {
    pub fn from_heights(nx: usize, ny: usize, h: &[i64]) -> Self {
        let mut horiz = Vec::with_capacity(nx.saturating_sub(1) * ny);
        for y in 0..ny {
            for x in 0..nx.saturating_sub(1) {
                horiz.push(h[x + 1 + nx * y] - h[x + nx * y]);
            }
        }
        let mut vert = Vec::with_capacity(nx * ny.saturating_sub(1));
        for y in 0..ny.saturating_sub(1) {
            for x in 0..nx {
                vert.push(h[x + nx * (y + 1)] - h[x + nx * y]);
            }
        }
        EdgeField { nx, ny, horiz, vert }
    }

    /// Cells `(x, y)` with nonzero circulation `b + r − t − l`.
    pub fn flux_violations(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let hw = self.nx - 1;
        for y in 0..self.ny.saturating_sub(1) {
            for x in 0..hw {
                let b = self.horiz[x + hw * y];
                let t = self.horiz[x + hw * (y + 1)];
                let l = self.vert[x + self.nx * y];
                let r = self.vert[x + 1 + self.nx * y];
                if b + r - t - l != 0 {
                    out.push((x, y));
                }
            }
        }
        out
    }

    /// Heights with `h(0,0) = 0`; `None` if some cell has nonzero flux.
    pub fn integrate(&self) -> Option<Vec<i64>> {
        if !self.flux_violations().is_empty() {
            return None;
        }
        let mut h = vec![0i64; self.nx * self.ny];
        for x in 1..self.nx {
            h[x] = h[x - 1] + self.horiz[x - 1];
        }
        for y in 1..self.ny {
            for x in 0..self.nx {
                h[x + self.nx * y] = h[x + self.nx * (y - 1)] + self.vert[x + self.nx * (y - 1)];
            }
        }
        Some(h)
    }

    /// Multipliers `2^v`, horizontal edges first.
    pub fn multipliers(&self) -> Vec<BigRational> {
        self.horiz.iter().chain(&self.vert).map(|&v| pow2(v)).collect()
    }
}

pub(crate) fn pow2(k: i64) -> BigRational {
    let p = BigRational::from_integer(BigInt::one() << k.unsigned_abs());
    if k >= 0 {
        p
    } else {
        p.recip()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Fluctuation {
    #[default]
    None,
    Ice,
    Dimer,
}

/// Ice arrows on an `n × n` site grid as a log-2 edge field.
pub fn sample_ice_fluctuations(n: usize, seed: u64) -> EdgeField {
    sample_ice_grid(n, n, seed).arrows()
}

/// Dimer-derived log-2 field on the edges of an `(n+1) × (n+1)` site grid
/// (the `n × n` cells carry the dimers).
pub fn sample_dimer_fluctuations(n: usize, seed: u64) -> Result<EdgeField, DimerError> {
    Ok(sample_dimer_grid(n, n, seed)?.edge_field())
}

fn sublattice_field(kind: Fluctuation, nx: usize, ny: usize, seed: u64) -> Result<EdgeField, LiebError> {
    Ok(match kind {
        Fluctuation::Ice => sample_ice_grid(nx, ny, seed).arrows(),
        Fluctuation::Dimer => sample_dimer_grid(ny - 1, nx - 1, seed)?.edge_field(),
        Fluctuation::None => EdgeField::from_heights(nx, ny, &vec![0; nx * ny]),
    })
}

/// Mountain ratios with an independent fluctuation field on each of the three
/// sublattices: Δ₀ multiplies the ratios, each χ sublattice sets the offsets.
pub fn fluctuated_mountain(
    lattice: &LiebLattice,
    degree: u64,
    f: u64,
    kind: Fluctuation,
    seed: u64,
) -> Result<RatioAssignment, LiebError> {
    let mut out = mountain_ratios(lattice, degree, f)?;
    if kind == Fluctuation::None {
        return Ok(out);
    }
    if lattice.dim() != 2 {
        return Err(LiebError::NotTwoDimensional(lattice.dim()));
    }
    let n = lattice.side();
    let phi = sublattice_field(kind, n, n, rng::mix(seed, 0))?;
    for (r, v) in out.ratios.iter_mut().zip(phi.horiz.iter().chain(&phi.vert)) {
        *r *= pow2(*v);
    }
    let half = lattice.delta1_len() / 2;
    for (axis, (nx, ny)) in [(n - 1, n), (n, n - 1)].into_iter().enumerate() {
        let field = sublattice_field(kind, nx, ny, rng::mix(seed, axis as u64 + 1))?;
        let h = field.integrate().expect("sampled fields are flux-free");
        for (k, hv) in h.iter().enumerate() {
            out.offsets[axis * half + k] = pow2(hv - h[0]);
        }
    }
    Ok(out)
}
