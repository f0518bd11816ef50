use super::*;
use crate::graph::{assemble_hierarchical, effective_hamiltonian, Sign, Wiring};
use crate::lieb::{self, BoundaryRule, Fluctuation};
use crate::line::{welded_tree_line, LineEnsembleSpec};
use std::f64::consts::PI;

fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::seeded(seed);
    let a = DMatrix::from_fn(n, n, |_, _| r.random::<f64>() - 0.5);
    &a + a.transpose()
}

#[test]
fn evolution_basics() {
    let h = EffectiveHamiltonian::chain(&[1.0]);
    let p = Propagator::new(&h.matrix).unwrap();
    let s = WalkState::basis(2, 0);
    assert!((p.evolve(&s, 0.0).amplitudes[0].norm() - 1.0).abs() < 1e-14);
    assert!((p.evolve(&s, PI / 2.0).amplitudes[1].norm() - 1.0).abs() < 1e-14);
    let mut r = rng::seeded(1);
    for k in 0..100 {
        let m = random_symmetric(6, k);
        let p = Propagator::new(&m).unwrap();
        let out = p.evolve(&WalkState::basis(6, k as usize % 6), 20.0 * r.random::<f64>());
        assert!((out.norm() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn bessel_values() {
    let j = bessel_j_sequence(1.0);
    assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
    assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
    let j = bessel_j_sequence(10.0);
    assert!((j[0] + 0.245_935_764_451_348_3).abs() < 1e-14);
    assert!((j[5] + 0.234_061_528_186_793_6).abs() < 1e-14);
    let jn = bessel_j_sequence(-10.0);
    assert!((jn[5] - 0.234_061_528_186_793_6).abs() < 1e-14);
    assert!(bessel_j_sequence(2000.0).iter().all(|v| v.is_finite()));
}

#[test]
fn chebyshev_matches_eigendecomposition() {
    let m = random_symmetric(30, 7);
    let csr = Csr::from_dense(&m);
    let p = Propagator::new(&m).unwrap();
    let s = WalkState::basis(30, 3);
    for t in [0.0, 0.3, 5.0, 80.0] {
        let a = evolve_full(&csr, &s, t).unwrap();
        let b = p.evolve(&s, t);
        let err: f64 = a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-10, "t={t}: {err}");
    }
}

#[test]
fn time_average_cases() {
    let p = Propagator::new(&EffectiveHamiltonian::chain(&[1.0]).matrix).unwrap();
    assert!((exit_probability_time_avg(&p, 0, 1, 1e9) - 0.5).abs() < 1e-8);
    let p = Propagator::new(&EffectiveHamiltonian::chain(&[1.0, 1.0]).matrix).unwrap();
    assert!(exit_probability_time_avg(&p, 0, 2, 1e4) >= 1.0 / 16.0);
    assert!(exit_probability_time_avg(&p, 0, 2, 0.0).abs() < 1e-15);
}

#[test]
fn time_average_matches_sampling() {
    for k in 0..20 {
        let m = random_symmetric(8, 100 + k);
        let p = Propagator::new(&m).unwrap();
        let exact = exit_probability_time_avg(&p, 0, 7, 6.0);
        let (mc, se) = exit_probability_mc(&p, 0, 7, 6.0, 10_000, k);
        assert!((exact - mc).abs() <= 3.0 * se + 1e-12, "{exact} vs {mc} ± {se}");
    }
}

#[test]
fn time_average_shift_invariant_and_bounded() {
    let m = random_symmetric(10, 5);
    let shifted = &m + DMatrix::identity(10, 10) * 3.7;
    let p = Propagator::new(&m).unwrap();
    let q = Propagator::new(&shifted).unwrap();
    for tau in [0.5, 3.0, 40.0] {
        let a = exit_probability_time_avg(&p, 1, 8, tau);
        assert!((a - exit_probability_time_avg(&q, 1, 8, tau)).abs() < 1e-10);
        assert!((0.0..=1.0).contains(&a));
        assert!(a <= exit_upper_bound(&p, 1, 8) + 1e-12);
    }
}

#[test]
fn tau_formula() {
    assert_eq!(choose_tau(1.0, 0.5).unwrap(), 8.0);
    assert!((choose_tau(2f64.sqrt(), 0.5).unwrap() - 4.0 * 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(choose_tau(1.0, 0.0).unwrap_err(), QwalkError::ZeroOverlap);
}

#[test]
fn protocol_on_known_instances() {
    let (_, h) = welded_tree_line(4);
    let rep = traversal_protocol(&h, 200, 1).unwrap();
    assert!(rep.holds);
    for seed in 0..5 {
        let h = LineEnsembleSpec::uniform(15, 30, &[6, 10, 15]).sample(seed).unwrap().hamiltonian();
        let rep = traversal_protocol(&h, 0, 0).unwrap();
        assert!(rep.pivot.closed_form && rep.pivot.energy.abs() < 1e-8);
        assert!(rep.holds, "seed {seed}: {} < {}", rep.p_bar, rep.bound);
    }
    let lat = lieb::LiebLattice::new(4, 2);
    let a = lieb::fluctuated_mountain(&lat, 30, 10, Fluctuation::Ice, 3).unwrap();
    let g = lieb::heights_to_graph(&lat, &a, 30, BoundaryRule::MinimalIntegral).unwrap();
    let rep = traversal_protocol(&effective_hamiltonian(&g.spec, Sign::Adjacency), 0, 0).unwrap();
    assert!(rep.pivot.closed_form && rep.holds);
}

#[test]
fn full_graph_agrees_with_subspace() {
    let (spec, _) = welded_tree_line(6);
    let h = effective_hamiltonian(&spec, Sign::Adjacency);
    let g = assemble_hierarchical(&spec, 4, 10_000, Wiring::Balanced).unwrap();
    assert_eq!(g.n(), 126);
    assert_eq!(crosscheck_full_vs_subspace(&g, &h, &[0.0]).unwrap(), 0.0);
    let mut r = rng::seeded(2);
    let times: Vec<f64> = (0..20).map(|_| 100.0 * r.random::<f64>()).collect();
    assert!(crosscheck_full_vs_subspace(&g, &h, &times).unwrap() <= 1e-8);
    let mut bad = g.clone();
    assert!(bad.perturb(9));
    assert!(crosscheck_full_vs_subspace(&bad, &h, &times).unwrap() > 1e-3);
}
