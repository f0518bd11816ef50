// SPDX-License-Identifier: Apache-2.0
//! Line supergraphs: the factor construction and the welded-tree chain.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{effective_hamiltonian, Degree, EffectiveHamiltonian, Sign, SupergraphSpec};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum LineError {
    #[error("invalid factor weights: {0}")]
    InvalidWeights(String),
    #[error("degree {0} is odd; the mirrored middle site needs d_L = d_R = D/2")]
    OddDegree(u64),
    #[error("half-length n must be at least 1")]
    EmptyLine,
    #[error("edge counts do not give integral sizes at site {0}")]
    NonIntegral(usize),
}

/// Factor-based line ensemble: left degrees drawn from weighted proper factors of `D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineEnsembleSpec {
    pub n: usize,
    pub degree: u64,
    /// `(factor, weight)` pairs; factors are candidate left degrees on the rising half.
    pub factor_weights: Vec<(u64, f64)>,
}

impl LineEnsembleSpec {
    /// Uniform weights over the listed factors.
    pub fn uniform(n: usize, degree: u64, factors: &[u64]) -> Self {
        LineEnsembleSpec { n, degree, factor_weights: factors.iter().map(|&f| (f, 1.0)).collect() }
    }

    pub fn sample(&self, seed: u64) -> Result<FactorLine, LineError> {
        sample_factor_line(self.n, self.degree, &self.factor_weights, seed)
    }

    /// `E[log r]` on the rising half; positive means biased toward the middle.
    pub fn mean_log_ratio(&self) -> f64 {
        let total: f64 = self.factor_weights.iter().map(|w| w.1).sum();
        self.factor_weights
            .iter()
            .map(|&(f, w)| w / total * ((self.degree - f) as f64 / f as f64).ln())
            .sum()
    }
}

/// A sampled factor line: the spec plus its per-site degrees and ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorLine {
    pub spec: SupergraphSpec,
    /// Left degree per site; site 0 has none (stored as 0).
    pub left_degrees: Vec<u64>,
    /// `r_i = e_i / e_{i-1}` for sites `1..2n`, index `i - 1`.
    #[serde(skip)]
    pub ratios: Vec<BigRational>,
    /// Largest `|log r|` the ratio law can produce.
    pub log_ratio_bound: f64,
}

impl FactorLine {
    pub fn hamiltonian(&self) -> EffectiveHamiltonian {
        effective_hamiltonian(&self.spec, Sign::Adjacency)
    }
}

fn check_weights(degree: u64, weights: &[(u64, f64)]) -> Result<(), LineError> {
    if weights.is_empty() {
        return Err(LineError::InvalidWeights("no factors given".into()));
    }
    let mut total = 0.0;
    for &(f, w) in weights {
        if f == 0 || f >= degree || !degree.is_multiple_of(f) {
            return Err(LineError::InvalidWeights(format!("{f} is not a proper factor of {degree}")));
        }
        if !(w.is_finite() && w >= 0.0) {
            return Err(LineError::InvalidWeights(format!("weight {w} for factor {f}")));
        }
        total += w;
    }
    if total <= 0.0 {
        return Err(LineError::InvalidWeights("weights sum to zero".into()));
    }
    Ok(())
}

fn draw(weights: &[(u64, f64)], r: &mut rng::Rng) -> u64 {
    let total: f64 = weights.iter().map(|w| w.1).sum();
    let mut u = r.random::<f64>() * total;
    for &(f, w) in weights {
        if u < w {
            return f;
        }
        u -= w;
    }
    weights.iter().rev().find(|w| w.1 > 0.0).map(|w| w.0).unwrap()
}

/// Mirrored factor line on supervertices `0..=2n`.
pub fn sample_factor_line(
    n: usize,
    degree: u64,
    weights: &[(u64, f64)],
    seed: u64,
) -> Result<FactorLine, LineError> {
    if n == 0 {
        return Err(LineError::EmptyLine);
    }
    if degree < 2 {
        return Err(LineError::InvalidWeights(format!("degree {degree} has no proper factor")));
    }
    check_weights(degree, weights)?;
    if !degree.is_multiple_of(2) {
        return Err(LineError::OddDegree(degree));
    }
    let mut r = rng::seeded(seed);
    let len = 2 * n + 1;
    let mut left = vec![0u64; len];
    for l in left.iter_mut().take(n).skip(1) {
        *l = draw(weights, &mut r);
    }
    left[n] = degree / 2;
    for i in n + 1..2 * n {
        left[i] = degree - left[2 * n - i];
    }
    left[2 * n] = degree;

    let d = BigUint::from(degree);
    let mut e = vec![d.clone(); 2 * n];
    for i in 1..2 * n {
        e[i] = &e[i - 1] * (degree - left[i]) / left[i];
    }
    let spec = line_from_edge_counts(degree, e)?;
    let ratios = (1..2 * n)
        .map(|i| {
            BigRational::new(BigInt::from(degree - left[i]), BigInt::from(left[i]))
        })
        .collect();
    let log_ratio_bound = weights
        .iter()
        .filter(|w| w.1 > 0.0)
        .map(|&(f, _)| ((degree - f) as f64 / f as f64).ln().abs())
        .fold(0.0, f64::max);
    Ok(FactorLine { spec, left_degrees: left, ratios, log_ratio_bound })
}

/// Line spec with `s_i = (e_{i-1} + e_i) / D` and unit-degree-normalized ends.
pub fn line_from_edge_counts(degree: u64, e: Vec<BigUint>) -> Result<SupergraphSpec, LineError> {
    let d = BigUint::from(degree);
    let m = e.len();
    let mut sizes = Vec::with_capacity(m + 1);
    for i in 0..=m {
        let mut sum = BigUint::default();
        if i > 0 {
            sum += &e[i - 1];
        }
        if i < m {
            sum += &e[i];
        }
        if &sum % &d != BigUint::default() {
            return Err(LineError::NonIntegral(i));
        }
        sizes.push(sum / &d);
    }
    Ok(SupergraphSpec::line(sizes, e, Degree::Regular(degree)))
}

/// Edge-to-vertex degree `κ = D / (1 + r)` for an edge-edge ratio `r`.
pub fn kappa_from_r(degree: f64, r: f64) -> f64 {
    assert!(r > 0.0, "ratio must be positive");
    degree / (1.0 + r)
}

/// Welded-tree chain on `2n` supervertices of sizes `1, 2, …, 2^{n-1}, 2^{n-1}, …, 1`.
/// Returns the degree-3 spec and the canonical hoppings (1, and √2 across the weld),
/// which equal the spec's effective Hamiltonian divided by √2.
pub fn welded_tree_line(n: usize) -> (SupergraphSpec, EffectiveHamiltonian) {
    assert!(n >= 1, "welded tree needs n >= 1");
    let mut sizes = Vec::with_capacity(2 * n);
    for i in 0..n {
        sizes.push(BigUint::from(1u8) << i);
    }
    for i in (0..n).rev() {
        sizes.push(BigUint::from(1u8) << i);
    }
    let mut e = Vec::with_capacity(2 * n - 1);
    for i in 0..n - 1 {
        e.push(BigUint::from(1u8) << (i + 1));
    }
    e.push(BigUint::from(1u8) << n);
    for i in (0..n - 1).rev() {
        e.push(BigUint::from(1u8) << (i + 1));
    }
    let spec = SupergraphSpec::line(sizes, e, Degree::Regular(3));
    let h = effective_hamiltonian(&spec, Sign::Adjacency).scaled(std::f64::consts::FRAC_1_SQRT_2);
    (spec, h)
}

/// Bound state of the canonical welded chain: `ψ_j ∝ sinh(kj)` on the first half with
/// `sinh((n+1)k) = √2 sinh(nk)`, eigenvalue `2cosh k`. Exists for `n ≥ 3`.
pub fn welded_tree_bound_state(n: usize) -> Option<(f64, f64, Vec<f64>)> {
    let nf = n as f64;
    let g = |k: f64| ((nf + 1.0) * k).sinh() / (nf * k).sinh() - std::f64::consts::SQRT_2;
    let (mut lo, mut hi) = (1e-9, 2.0);
    if g(lo) >= 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    let mut v: Vec<f64> = (1..=n).map(|j| (k * j as f64).sinh()).collect();
    let mirror: Vec<f64> = v.iter().rev().copied().collect();
    v.extend(mirror);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    Some((k, 2.0 * k.cosh(), v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{assemble_hierarchical, Wiring};
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    fn b(x: u64) -> BigUint {
        BigUint::from(x)
    }

    #[test]
    fn smallest_factor_line() {
        let l = sample_factor_line(1, 2, &[(1, 1.0)], 0).unwrap();
        assert_eq!(l.spec.sizes, vec![b(1), b(2), b(1)]);
        assert_eq!(l.spec.edge_counts, vec![b(2), b(2)]);
        assert_eq!(l.ratios, vec![BigRational::from_integer(1.into())]);
    }

    #[test]
    fn fixed_factor_gives_fixed_ratios() {
        let l = sample_factor_line(4, 6, &[(2, 1.0)], 3).unwrap();
        let two = BigRational::from_integer(2.into());
        let half = BigRational::new(1.into(), 2.into());
        for i in 1..4 {
            assert_eq!(l.ratios[i - 1], two);
        }
        assert_eq!(l.ratios[3], BigRational::from_integer(1.into()));
        for i in 5..8 {
            assert_eq!(l.ratios[i - 1], half);
        }
    }

    #[test]
    fn weights_validated() {
        assert!(matches!(sample_factor_line(3, 6, &[(4, 1.0)], 0), Err(LineError::InvalidWeights(_))));
        assert!(matches!(sample_factor_line(3, 6, &[(6, 1.0)], 0), Err(LineError::InvalidWeights(_))));
        assert!(matches!(sample_factor_line(3, 6, &[(2, -1.0)], 0), Err(LineError::InvalidWeights(_))));
        assert_eq!(sample_factor_line(3, 9, &[(3, 1.0)], 0), Err(LineError::OddDegree(9)));
    }

    #[test]
    fn kappa_values() {
        assert_eq!(kappa_from_r(6.0, 2.0), 2.0);
        assert_eq!(kappa_from_r(2.0, 1.0), 1.0);
        assert_eq!(kappa_from_r(4.0, 3.0), 1.0);
    }

    #[test]
    fn welded_sizes_and_hoppings() {
        let (spec, h) = welded_tree_line(3);
        let want: Vec<BigUint> = [1u64, 2, 4, 4, 2, 1].iter().map(|&x| b(x)).collect();
        assert_eq!(spec.sizes, want);
        let s2 = 2f64.sqrt();
        let hop = h.hoppings();
        let want = [1.0, 1.0, s2, 1.0, 1.0];
        for (a, w) in hop.iter().zip(want) {
            assert!((a - w).abs() < 1e-15);
        }
        let (_, h2) = welded_tree_line(2);
        assert_eq!(h2.dim(), 4);
        assert!((h2.hoppings()[1] - s2).abs() < 1e-15);
    }

    #[test]
    fn welded_internal_degree_three() {
        let (spec, _) = welded_tree_line(2);
        let g = assemble_hierarchical(&spec, 1, 100, Wiring::Balanced).unwrap();
        for x in 0..g.n() {
            let m = g.membership(x);
            let want = if spec.is_terminal(m) { 2 } else { 3 };
            assert_eq!(g.degree(x), want);
        }
    }

    #[test]
    fn welded_bound_state_is_eigenvector() {
        for n in 3..12 {
            let (_, h) = welded_tree_line(n);
            let (_, lambda, v) = welded_tree_bound_state(n).unwrap();
            let v = nalgebra::DVector::from_vec(v);
            let res = (&h.matrix * &v - &v * lambda).norm();
            assert!(res <= 1e-8, "n={n} residual {res}");
            let top = h.matrix.clone().symmetric_eigen().eigenvalues.max();
            assert!((top - lambda).abs() < 1e-10);
        }
        assert!(welded_tree_bound_state(2).is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn factor_lines_are_integral_and_mirrored(n in 1usize..20, seed in any::<u64>(), pick in 0usize..4) {
            let sets: [&[u64]; 4] = [&[1, 2, 3], &[1, 2], &[2, 3, 4, 6], &[1, 3, 5]];
            let degrees = [6u64, 6, 12, 30];
            let d = degrees[pick];
            let l = sample_factor_line(n, d, &sets[pick].iter().map(|&f| (f, 1.0)).collect::<Vec<_>>(), seed).unwrap();
            let s = &l.spec;
            let e = &s.edge_counts;
            prop_assert_eq!(&s.sizes[0], &b(1));
            prop_assert_eq!(&s.sizes[2 * n], &b(1));
            for i in 1..2 * n {
                prop_assert_eq!(&s.sizes[i] * d, &e[i - 1] + &e[i]);
                prop_assert_eq!(&s.sizes[i], &s.sizes[2 * n - i]);
                let left = l.left_degrees[i];
                prop_assert!((&e[i - 1] % left).to_u64() == Some(0));
                let ratio = BigRational::new(BigInt::from(e[i].clone()), BigInt::from(e[i - 1].clone()));
                prop_assert_eq!(&ratio, &l.ratios[i - 1]);
            }
            prop_assert!(s.check_balanced().is_ok());
            prop_assert!(s.check_regularity().is_ok());
        }
    }
}
