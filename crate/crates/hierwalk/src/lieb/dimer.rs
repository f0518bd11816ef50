// SPDX-License-Identifier: Apache-2.0
//! Domino tilings of a rectangle of cells, sampled by 2×2 rotations.

use rand::Rng as _;
use thiserror::Error;

use super::fluct::EdgeField;
use crate::rng;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimerError {
    #[error("{rows}x{cols} cell region has no perfect matching")]
    NoPerfectMatching { rows: usize, cols: usize },
}

/// Perfect matching of the `rows × cols` cell grid (cell `c + cols·r`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DimerCover {
    pub rows: usize,
    pub cols: usize,
    pub partner: Vec<u32>,
}

impl DimerCover {
    /// All-horizontal bricks when the width allows, otherwise all-vertical.
    pub fn brick_wall(rows: usize, cols: usize) -> Result<Self, DimerError> {
        let mut partner = vec![0u32; rows * cols];
        if cols.is_multiple_of(2) {
            for s in 0..rows * cols {
                partner[s] = if s % 2 == 0 { s + 1 } else { s - 1 } as u32;
            }
        } else if rows.is_multiple_of(2) {
            for s in 0..rows * cols {
                let r = s / cols;
                partner[s] = if r.is_multiple_of(2) { s + cols } else { s - cols } as u32;
            }
        } else {
            return Err(DimerError::NoPerfectMatching { rows, cols });
        }
        Ok(DimerCover { rows, cols, partner })
    }

    /// Every cell matched once, to an adjacent cell.
    pub fn is_perfect_matching(&self) -> bool {
        (0..self.rows * self.cols).all(|s| {
            let p = self.partner[s] as usize;
            if p >= self.partner.len() || self.partner[p] as usize != s || p == s {
                return false;
            }
            let (r1, c1) = (s / self.cols, s % self.cols);
            let (r2, c2) = (p / self.cols, p % self.cols);
            r1.abs_diff(r2) + c1.abs_diff(c2) == 1
        })
    }

    /// Rotate the two dominoes of the 2×2 block at `(r, c)` if they are parallel.
    pub fn try_rotate(&mut self, r: usize, c: usize) -> bool {
        let a = r * self.cols + c;
        let (b, cc, dd) = (a + 1, a + self.cols, a + self.cols + 1);
        let p = &mut self.partner;
        let link = |p: &mut Vec<u32>, x: usize, y: usize| {
            p[x] = y as u32;
            p[y] = x as u32;
        };
        if p[a] as usize == b && p[cc] as usize == dd {
            link(p, a, cc);
            link(p, b, dd);
            true
        } else if p[a] as usize == cc && p[b] as usize == dd {
            link(p, a, b);
            link(p, cc, dd);
            true
        } else {
            false
        }
    }

    pub fn sweep(&mut self, rng: &mut rng::Rng) {
        if self.rows < 2 || self.cols < 2 {
            return;
        }
        for _ in 0..self.rows * self.cols {
            let r = rng.random_range(0..self.rows - 1);
            let c = rng.random_range(0..self.cols - 1);
            self.try_rotate(r, c);
        }
    }

    /// Log-2 ratios on the `(cols+1) × (rows+1)` site grid whose faces are the cells.
    /// The reference is `ε = ±1` with circulation `4σ` per cell (σ the checkerboard
    /// sign); a dimer crossing an edge turns `ε` into `−3ε`, cancelling it.
    pub fn edge_field(&self) -> EdgeField {
        let (nx, ny) = (self.cols + 1, self.rows + 1);
        let sgn = |x: usize, y: usize| if (x + y).is_multiple_of(2) { 1i64 } else { -1 };
        let mut field = EdgeField {
            nx,
            ny,
            horiz: vec![0; (nx - 1) * ny],
            vert: vec![0; nx * (ny - 1)],
        };
        for y in 0..ny {
            for x in 0..nx - 1 {
                let eps = sgn(x, y);
                // cells (x, y−1) and (x, y) share this edge
                let crossed = y >= 1 && y < self.rows && {
                    let below = (y - 1) * self.cols + x;
                    self.partner[below] as usize == below + self.cols
                };
                field.horiz[x + (nx - 1) * y] = if crossed { -3 * eps } else { eps };
            }
        }
        for y in 0..ny - 1 {
            for x in 0..nx {
                let eps = -sgn(x, y);
                let crossed = x >= 1 && x < self.cols && {
                    let left = y * self.cols + x - 1;
                    self.partner[left] as usize == left + 1
                };
                field.vert[x + nx * y] = if crossed { -3 * eps } else { eps };
            }
        }
        field
    }
}

/// Tiling of an `n × n` cell region after `10·n²` sweeps from the brick wall.
pub fn sample_dimer_cover(n: usize, seed: u64) -> Result<DimerCover, DimerError> {
    sample_dimer_grid(n, n, seed)
}

pub(crate) fn sample_dimer_grid(rows: usize, cols: usize, seed: u64) -> Result<DimerCover, DimerError> {
    let mut cover = DimerCover::brick_wall(rows, cols)?;
    let mut r = rng::seeded(seed);
    let side = rows.max(cols);
    for _ in 0..10 * side * side {
        cover.sweep(&mut r);
    }
    Ok(cover)
}
