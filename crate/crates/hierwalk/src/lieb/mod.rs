// SPDX-License-Identifier: Apache-2.0
//! Lieb lattices, gauge-constrained ratio assignments and their supergraphs.
//!
//! Sites use doubled coordinates internally: integer sites (Δ₀) have all even
//! coordinates, edge sites (Δ₁) exactly one odd coordinate. Indices put Δ₀ first
//! (axis 0 fastest), then Δ₁ grouped by orientation.
//!
//! A ratio assignment stores, per Δ₁ site `m` between `x` and `x + e_i`,
//! `r_m = e(m, x+e_i) / e(x, m)` and a multiplier `c_m`. Edge values are
//! `e(x, m) = 2D·L·P_x·c_m` where `P` is the path product of ratios from the
//! origin, so the gauge condition is exactly path-independence of `P`.

mod dimer;
mod fluct;
mod gff;
mod ice;

pub use dimer::{sample_dimer_cover, DimerCover, DimerError};
pub use fluct::{fluctuated_mountain, sample_dimer_fluctuations, sample_ice_fluctuations, EdgeField, Fluctuation};
pub use gff::{grid_laplacian_quadratic_form, sample_bgff, CubicGrid, GffSampler, HeightBias, HeightFields, lieb_hamiltonian_from_heights};
pub use ice::{sample_square_ice, IceConfig};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bigmath;
use crate::graph::{Degree, SupergraphSpec, Topology};

#[derive(Debug, Error, PartialEq)]
pub enum LiebError {
    #[error("factor {f} is not a proper factor of {d}")]
    InvalidFactor { d: u64, f: u64 },
    #[error("ratio assignment violates the gauge condition on {0} 2-cells")]
    GaugeViolated(usize),
    #[error("counts are not integral at site {0}")]
    NonIntegral(usize),
    #[error("operation needs d = 2, got d = {0}")]
    NotTwoDimensional(usize),
    #[error("assignment has {got} entries, lattice has {want} edge sites")]
    SizeMismatch { got: usize, want: usize },
    #[error(transparent)]
    Dimer(#[from] DimerError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiebLattice {
    n: usize,
    d: usize,
}

/// Four edge sites bounding a 2-cell: `a` then `b` on one route, `dd` then `c` on the other.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Plaquette {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub dd: usize,
}

impl LiebLattice {
    pub fn new(n: usize, d: usize) -> Self {
        assert!(n >= 2 && d >= 1, "Lieb lattice needs N >= 2 and d >= 1");
        LiebLattice { n, d }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn delta0_len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    fn orientation_len(&self) -> usize {
        self.n.pow(self.d as u32 - 1) * (self.n - 1)
    }

    pub fn delta1_len(&self) -> usize {
        self.d * self.orientation_len()
    }

    pub fn len(&self) -> usize {
        self.delta0_len() + self.delta1_len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_delta0(&self, site: usize) -> bool {
        site < self.delta0_len()
    }

    pub fn delta0_index(&self, x: &[usize]) -> usize {
        x.iter().rev().fold(0, |acc, &c| acc * self.n + c)
    }

    pub fn delta0_coords(&self, mut idx: usize) -> Vec<usize> {
        (0..self.d)
            .map(|_| {
                let c = idx % self.n;
                idx /= self.n;
                c
            })
            .collect()
    }

    /// Edge site of orientation `axis` whose lower endpoint is `x` (`x[axis] ≤ N − 2`).
    pub fn delta1_index(&self, axis: usize, x: &[usize]) -> usize {
        let mut idx = 0;
        for k in (0..self.d).rev() {
            let radix = if k == axis { self.n - 1 } else { self.n };
            idx = idx * radix + x[k];
        }
        self.delta0_len() + axis * self.orientation_len() + idx
    }

    /// `(axis, lower endpoint coordinates)` of an edge site.
    pub fn delta1_info(&self, site: usize) -> (usize, Vec<usize>) {
        let local = site - self.delta0_len();
        let axis = local / self.orientation_len();
        let mut idx = local % self.orientation_len();
        let x = (0..self.d)
            .map(|k| {
                let radix = if k == axis { self.n - 1 } else { self.n };
                let c = idx % radix;
                idx /= radix;
                c
            })
            .collect();
        (axis, x)
    }

    /// Lower and upper Δ₀ neighbors of an edge site.
    pub fn endpoints(&self, site: usize) -> (usize, usize) {
        let (axis, mut x) = self.delta1_info(site);
        let lo = self.delta0_index(&x);
        x[axis] += 1;
        (lo, self.delta0_index(&x))
    }

    pub fn neighbors(&self, site: usize) -> Vec<usize> {
        if self.is_delta0(site) {
            let x = self.delta0_coords(site);
            let mut out = Vec::with_capacity(2 * self.d);
            for axis in 0..self.d {
                if x[axis] > 0 {
                    let mut y = x.clone();
                    y[axis] -= 1;
                    out.push(self.delta1_index(axis, &y));
                }
                if x[axis] + 1 < self.n {
                    out.push(self.delta1_index(axis, &x));
                }
            }
            out
        } else {
            let (a, b) = self.endpoints(site);
            vec![a, b]
        }
    }

    pub fn origin(&self) -> usize {
        0
    }

    pub fn far_corner(&self) -> usize {
        self.delta0_len() - 1
    }

    /// Human-readable coordinates, half-integers for edge sites.
    pub fn label(&self, site: usize) -> String {
        let coords: Vec<String> = if self.is_delta0(site) {
            self.delta0_coords(site).iter().map(|c| c.to_string()).collect()
        } else {
            let (axis, x) = self.delta1_info(site);
            x.iter()
                .enumerate()
                .map(|(k, c)| if k == axis { format!("{c}.5") } else { c.to_string() })
                .collect()
        };
        format!("({})", coords.join(","))
    }

    /// 2-cells of the Δ₀ cubic lattice.
    pub fn plaquettes(&self) -> Vec<Plaquette> {
        let mut out = Vec::new();
        for base in 0..self.delta0_len() {
            let x = self.delta0_coords(base);
            for i in 0..self.d {
                for j in i + 1..self.d {
                    if x[i] + 1 >= self.n || x[j] + 1 >= self.n {
                        continue;
                    }
                    let mut xi = x.clone();
                    xi[i] += 1;
                    let mut xj = x.clone();
                    xj[j] += 1;
                    out.push(Plaquette {
                        a: self.delta1_index(i, &x),
                        b: self.delta1_index(j, &xi),
                        c: self.delta1_index(i, &xj),
                        dd: self.delta1_index(j, &x),
                    });
                }
            }
        }
        out
    }

    /// Edge site preceding a Δ₀ site on the canonical staircase path
    /// (axis 0 first, then axis 1, …), together with the previous Δ₀ site.
    pub fn staircase_step(&self, site: usize) -> Option<(usize, usize)> {
        let mut x = self.delta0_coords(site);
        let axis = (0..self.d).rev().find(|&k| x[k] > 0)?;
        x[axis] -= 1;
        Some((self.delta1_index(axis, &x), self.delta0_index(&x)))
    }
}

/// Exact ratios and multipliers on the edge sites of a Lieb lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioAssignment {
    /// `e(m, upper) / e(lower, m)`, indexed by `site − |Δ₀|`.
    pub ratios: Vec<BigRational>,
    /// Common factor `c_m` of both edges at `m`.
    pub offsets: Vec<BigRational>,
}

impl RatioAssignment {
    pub fn flat(lattice: &LiebLattice) -> Self {
        let one = BigRational::one();
        RatioAssignment {
            ratios: vec![one.clone(); lattice.delta1_len()],
            offsets: vec![one; lattice.delta1_len()],
        }
    }

    pub fn ratio(&self, lattice: &LiebLattice, site: usize) -> &BigRational {
        &self.ratios[site - lattice.delta0_len()]
    }

    fn check_len(&self, lattice: &LiebLattice) -> Result<(), LiebError> {
        let want = lattice.delta1_len();
        for got in [self.ratios.len(), self.offsets.len()] {
            if got != want {
                return Err(LiebError::SizeMismatch { got, want });
            }
        }
        Ok(())
    }
}

fn proper_factor(d: u64, f: u64) -> Result<(), LiebError> {
    if f == 0 || f >= d || !d.is_multiple_of(f) {
        return Err(LiebError::InvalidFactor { d, f });
    }
    Ok(())
}

/// Uniform-bias mountain: ratio `D/f − 1` below the centre of each axis, its
/// inverse above, and 1 on an edge site sitting exactly at the centre.
pub fn mountain_ratios(lattice: &LiebLattice, degree: u64, f: u64) -> Result<RatioAssignment, LiebError> {
    proper_factor(degree, f)?;
    let base = BigRational::new(BigInt::from(degree - f), BigInt::from(f));
    let inv = base.recip();
    let mut out = RatioAssignment::flat(lattice);
    let centre = lattice.side() - 1;
    for (k, r) in out.ratios.iter_mut().enumerate() {
        let (axis, x) = lattice.delta1_info(lattice.delta0_len() + k);
        let pos = 2 * x[axis] + 1;
        *r = match pos.cmp(&centre) {
            std::cmp::Ordering::Less => base.clone(),
            std::cmp::Ordering::Greater => inv.clone(),
            std::cmp::Ordering::Equal => BigRational::one(),
        };
    }
    Ok(out)
}

/// Per-2-cell gauge check.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeReport {
    /// `log` of the route-product quotient per 2-cell (0 when satisfied).
    pub deviations: Vec<f64>,
    /// Indices into `LiebLattice::plaquettes()` that fail.
    pub failing: Vec<usize>,
    pub satisfied: bool,
}

/// Exact check: `r_a r_b = r_dd r_c` on every 2-cell.
pub fn check_gauge(lattice: &LiebLattice, assignment: &RatioAssignment) -> GaugeReport {
    let mut deviations = Vec::new();
    let mut failing = Vec::new();
    for (k, p) in lattice.plaquettes().iter().enumerate() {
        let r = |s: usize| assignment.ratio(lattice, s);
        let q = r(p.a) * r(p.b) / (r(p.dd) * r(p.c));
        if q.is_one() {
            deviations.push(0.0);
        } else {
            deviations.push(bigmath::ln_rational(&q));
            failing.push(k);
        }
    }
    GaugeReport { satisfied: failing.is_empty(), deviations, failing }
}

/// Float-mode check on log-ratios, tolerance `1e-12`.
pub fn check_gauge_float(lattice: &LiebLattice, log_ratios: &[f64]) -> GaugeReport {
    let off = lattice.delta0_len();
    let mut deviations = Vec::new();
    let mut failing = Vec::new();
    for (k, p) in lattice.plaquettes().iter().enumerate() {
        let l = |s: usize| log_ratios[s - off];
        let dev = l(p.a) + l(p.b) - l(p.dd) - l(p.c);
        if dev.abs() > 1e-12 {
            failing.push(k);
        }
        deviations.push(dev);
    }
    GaugeReport { satisfied: failing.is_empty(), deviations, failing }
}

/// Path product `P_x` of ratios from the origin along the canonical staircase.
pub fn potential(lattice: &LiebLattice, assignment: &RatioAssignment) -> Vec<BigRational> {
    let mut p = vec![BigRational::one(); lattice.delta0_len()];
    for x in 1..lattice.delta0_len() {
        let (m, prev) = lattice.staircase_step(x).expect("non-origin site has a predecessor");
        p[x] = &p[prev] * assignment.ratio(lattice, m);
    }
    p
}

/// Product of ratios along an arbitrary monotone route of Δ₀ sites.
pub fn path_product(lattice: &LiebLattice, assignment: &RatioAssignment, route: &[usize]) -> BigRational {
    let mut acc = BigRational::one();
    for w in route.windows(2) {
        let (x, y) = (lattice.delta0_coords(w[0]), lattice.delta0_coords(w[1]));
        let axis = (0..lattice.dim()).find(|&k| x[k] != y[k]).expect("route repeats a site");
        assert_eq!(y[axis], x[axis] + 1, "route must be monotone with unit steps");
        acc *= assignment.ratio(lattice, lattice.delta1_index(axis, &x));
    }
    acc
}

/// How the overall edge scale is fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRule {
    /// Edges at the entrance are exactly `2D`; fractional counts are an error.
    #[default]
    CornerTwoD,
    /// Entrance edges `2D·L` with the least `L` making every count integral.
    MinimalIntegral,
}

/// A Lieb supergraph with the scale that was applied.
#[derive(Clone, Debug, PartialEq)]
pub struct LiebGraph {
    pub lattice: LiebLattice,
    pub spec: SupergraphSpec,
    pub scale: BigUint,
}

fn denom_lcm<'a>(it: impl Iterator<Item = &'a BigRational>) -> BigInt {
    it.fold(BigInt::one(), |acc, q| acc.lcm(q.denom()))
}

/// Supergraph over the lattice: entrance = origin, exit = far corner, both of size 1.
pub fn heights_to_graph(
    lattice: &LiebLattice,
    assignment: &RatioAssignment,
    degree: u64,
    rule: BoundaryRule,
) -> Result<LiebGraph, LiebError> {
    assignment.check_len(lattice)?;
    let report = check_gauge(lattice, assignment);
    if !report.satisfied {
        return Err(LiebError::GaugeViolated(report.failing.len()));
    }
    let p = potential(lattice, assignment);
    let n0 = lattice.delta0_len();
    let two_d = BigRational::from_integer(BigInt::from(2 * degree));
    let two = BigRational::from_integer(BigInt::from(2));

    // q values per lattice edge, as (Δ₀ site, Δ₁ site, q)
    let mut edges = Vec::with_capacity(2 * lattice.delta1_len());
    for m in n0..lattice.len() {
        let (lo, hi) = lattice.endpoints(m);
        let c = &assignment.offsets[m - n0];
        edges.push((lo, m, &p[lo] * c));
        edges.push((hi, m, &p[hi] * c));
    }
    let mut site_sum = vec![BigRational::zero(); lattice.len()];
    for (x, m, q) in &edges {
        site_sum[*x] += q;
        site_sum[*m] += q;
    }
    let terminal = |s: usize| s == lattice.origin() || s == lattice.far_corner();

    let scaled_edges: Vec<BigRational> = edges.iter().map(|(_, _, q)| q * &two_d).collect();
    let scaled_sizes: Vec<BigRational> = site_sum.iter().map(|s| s * &two).collect();
    let scale = match rule {
        BoundaryRule::CornerTwoD => BigInt::one(),
        BoundaryRule::MinimalIntegral => denom_lcm(
            scaled_edges.iter().chain(
                scaled_sizes.iter().enumerate().filter(|(s, _)| !terminal(*s)).map(|(_, v)| v),
            ),
        ),
    };
    let l = BigRational::from_integer(scale.clone());

    let mut edge_counts = Vec::with_capacity(edges.len());
    for (k, e) in scaled_edges.iter().enumerate() {
        let v = e * &l;
        edge_counts.push(bigmath::to_biguint(&v).ok_or(LiebError::NonIntegral(edges[k].0))?);
    }
    let mut sizes = Vec::with_capacity(lattice.len());
    for (s, v) in scaled_sizes.iter().enumerate() {
        if terminal(s) {
            sizes.push(BigUint::one());
            continue;
        }
        let v = v * &l;
        sizes.push(bigmath::to_biguint(&v).ok_or(LiebError::NonIntegral(s))?);
    }
    let spec = SupergraphSpec {
        vertices: (0..lattice.len()).map(|s| lattice.label(s)).collect(),
        edges: edges.iter().map(|&(x, m, _)| (x, m)).collect(),
        sizes,
        edge_counts,
        degree: Degree::Regular(degree),
        diagonal_counts: None,
        entrance: lattice.origin(),
        exit: lattice.far_corner(),
        topology: Topology::Lieb { n: lattice.side(), d: lattice.dim() },
    };
    Ok(LiebGraph { lattice: lattice.clone(), spec, scale: scale.to_biguint().unwrap() })
}

/// Closure of a factor set under fluctuations: for each multiplier `δ`,
/// `(D/f − 1)·δ^{±1} = D/f_± − 1` must hold for proper factors `f_±` of `D`.
/// Returns the `(f_+, f_-)` pairs.
pub fn check_factor_closure(
    degree: u64,
    f: u64,
    multipliers: &[BigRational],
) -> Result<Vec<(u64, u64)>, LiebError> {
    proper_factor(degree, f)?;
    let base = BigRational::new(BigInt::from(degree - f), BigInt::from(f));
    let d = BigRational::from_integer(BigInt::from(degree));
    let solve = |r: BigRational| -> Option<u64> {
        let fv = &d / (r + BigRational::one());
        let fv = bigmath::to_biguint(&fv)?;
        let fv: u64 = num_traits::ToPrimitive::to_u64(&fv)?;
        (fv > 0 && fv < degree && degree.is_multiple_of(fv)).then_some(fv)
    };
    multipliers
        .iter()
        .map(|delta| {
            let plus = solve(&base * delta);
            let minus = solve(&base / delta);
            match (plus, minus) {
                (Some(a), Some(b)) => Ok((a, b)),
                _ => Err(LiebError::InvalidFactor { d: degree, f }),
            }
        })
        .collect()
}
