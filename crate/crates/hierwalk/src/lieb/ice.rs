// SPDX-License-Identifier: Apache-2.0
//! Square ice as integer height functions with unit steps.

use rand::Rng as _;

use super::fluct::EdgeField;
use crate::rng;

/// Heights on an `nx × ny` site grid with `|h(x) − h(y)| = 1` across every edge.
/// Arrows are the edge differences, so the zero-flux rule holds by construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IceConfig {
    pub nx: usize,
    pub ny: usize,
    pub heights: Vec<i64>,
}

impl IceConfig {
    /// All arrows pointing up/right: `h = x + y`.
    pub fn reference(nx: usize, ny: usize) -> Self {
        let heights = (0..ny).flat_map(|y| (0..nx).map(move |x| (x + y) as i64)).collect();
        IceConfig { nx, ny, heights }
    }

    fn neighbors(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = (s % self.nx, s / self.nx);
        [
            (x > 0).then(|| s - 1),
            (x + 1 < self.nx).then(|| s + 1),
            (y > 0).then(|| s - self.nx),
            (y + 1 < self.ny).then(|| s + self.nx),
        ]
        .into_iter()
        .flatten()
    }

    /// Flip `h_s → h_s ± 2` when every neighbor sits at the same height.
    pub fn try_flip(&mut self, s: usize) -> bool {
        let mut it = self.neighbors(s);
        let Some(first) = it.next() else { return false };
        let hn = self.heights[first];
        if !it.all(|t| self.heights[t] == hn) {
            return false;
        }
        drop(it);
        self.heights[s] = 2 * hn - self.heights[s];
        true
    }

    pub fn sweep(&mut self, rng: &mut rng::Rng) {
        let n = self.nx * self.ny;
        for _ in 0..n {
            let s = rng.random_range(0..n);
            self.try_flip(s);
        }
    }

    /// Arrow field in units of `log 2`.
    pub fn arrows(&self) -> EdgeField {
        EdgeField::from_heights(self.nx, self.ny, &self.heights)
    }
}

/// Sample on an `n × n` site grid: reference start, `10·n²` sweeps of burn-in.
pub fn sample_square_ice(n: usize, seed: u64) -> IceConfig {
    sample_ice_grid(n, n, seed)
}

pub(crate) fn sample_ice_grid(nx: usize, ny: usize, seed: u64) -> IceConfig {
    let mut cfg = IceConfig::reference(nx, ny);
    let mut r = rng::seeded(seed);
    let side = nx.max(ny);
    for _ in 0..10 * side * side {
        cfg.sweep(&mut r);
    }
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_is_valid_and_all_up() {
        let a = IceConfig::reference(5, 4).arrows();
        assert!(a.flux_violations().is_empty());
        assert!(a.horiz.iter().chain(&a.vert).all(|&v| v == 1));
    }

    #[test]
    fn single_arrow_flip_breaks_two_cells() {
        let mut a = sample_square_ice(6, 3).arrows();
        // interior horizontal edge (2, 2)
        let k = 2 + (a.nx - 1) * 2;
        a.horiz[k] = -a.horiz[k];
        assert_eq!(a.flux_violations().len(), 2);
    }

    #[test]
    fn chain_states_stay_valid() {
        let mut cfg = sample_square_ice(6, 11);
        let mut r = rng::seeded(12);
        let mut flips = 0;
        for _ in 0..10_000 {
            let s = r.random_range(0..36);
            flips += cfg.try_flip(s) as usize;
            let a = cfg.arrows();
            assert!(a.flux_violations().is_empty());
            assert!(a.horiz.iter().chain(&a.vert).all(|v| v.abs() == 1));
        }
        assert!(flips > 100);
    }
}
