use super::*;
use crate::line::welded_tree_line;
use crate::linalg::LinearOperator;
use proptest::prelude::*;
use rand::Rng as _;

fn pair() -> EffectiveHamiltonian {
    EffectiveHamiltonian::from_matrix(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), 0, 1)
}

fn ring(k: usize) -> EffectiveHamiltonian {
    EffectiveHamiltonian::from_matrix(DMatrix::from_fn(k, k, |i, j| if (i + 1) % k == j || (j + 1) % k == i { 1.0 } else { 0.0 }), 0, k / 2)
}

#[test]
fn two_block_arithmetic() {
    let d = dense_from_effective(&pair(), 8).unwrap();
    assert!((d.lambda - 1.0).abs() < 1e-14);
    assert!((d.pi[0] - 0.5).abs() < 1e-14);
    assert_eq!(d.sizes, vec![4, 4]);
    assert!((d.weight(0, 1) - 0.25).abs() < 1e-15);
    assert!((edge_probability(&d, 0, 1, 1.0) - 0.25).abs() < 1e-15);
    let m = d.to_dense();
    for i in 0..8 {
        assert!((m.row(i).sum() - d.lambda).abs() < 1e-12);
    }
}

#[test]
fn welded_sizes_grow_and_shrink() {
    let (_, h) = welded_tree_line(5);
    let d = dense_from_effective(&h, 6200).unwrap();
    // ratios fall toward 2 from above; the ends feel the boundary
    let r: Vec<f64> = (0..4).map(|i| d.sizes[i + 1] as f64 / d.sizes[i] as f64).collect();
    assert!(r.windows(2).all(|w| w[1] <= w[0]) && (r[3] - 2.0).abs() < 0.1, "{:?}", d.sizes);
    assert_eq!(d.sizes[..5].iter().rev().collect::<Vec<_>>(), d.sizes[5..].iter().collect::<Vec<_>>());
    assert_eq!(d.sizes.iter().sum::<usize>(), 6200);
    assert!(d.row_sum_error <= 1e-2 * d.lambda, "{}", d.row_sum_error);
    let lam = d.lambda;
    let pi_sqrt = nalgebra::DVector::from_iterator(10, d.pi.iter().map(|p| p.sqrt()));
    assert!((&h.matrix * &pi_sqrt - pi_sqrt * lam).amax() < 1e-10);
}

#[test]
fn diagonal_becomes_intra_block_weight() {
    let t = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, 0.5]);
    let d = dense_from_effective(&EffectiveHamiltonian::from_matrix(t, 0, 1), 10).unwrap();
    assert!((d.weight(0, 0) - 0.5 / 4.0).abs() < 1e-15);
    let m = d.to_dense();
    assert_eq!(m[(0, 0)], 0.0);
    for i in 0..10 {
        assert!((m.row(i).sum() - d.lambda).abs() < 1e-12);
    }
}

#[test]
fn dense_errors() {
    let t = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(dense_from_effective(&EffectiveHamiltonian::from_matrix(t, 0, 2), 30), Err(SparsifyError::Reducible));
    let (_, h) = welded_tree_line(6);
    assert!(matches!(dense_from_effective(&h, 20), Err(SparsifyError::SizeUnderflow(_))));
}

#[test]
fn operator_matches_dense() {
    let (_, h) = welded_tree_line(3);
    let d = dense_from_effective(&h, 60).unwrap();
    let m = d.to_dense();
    let mut r = rng::seeded(3);
    let x: Vec<f64> = (0..60).map(|_| r.random::<f64>()).collect();
    let mut y = vec![0.0; 60];
    d.apply(&x, &mut y);
    let want = &m * nalgebra::DVector::from_column_slice(&x);
    assert!(y.iter().zip(want.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn poisson_degrees() {
    let d = dense_from_effective(&ring(10), 1000).unwrap();
    let deg = 8;
    let mut total = 0.0;
    let mut sq = 0.0;
    let samples = 1000;
    for s in 0..samples {
        let g = poisson_sparsify(&d, deg, s).unwrap().graph;
        let m = (0..g.n()).map(|x| g.degree(x)).sum::<usize>() as f64 / g.n() as f64;
        total += m;
        sq += m * m;
    }
    let mean = total / samples as f64;
    let sd = (sq / samples as f64 - mean * mean).sqrt();
    assert!((mean - deg as f64).abs() <= 3.0 * sd.max(1e-3), "{mean} ± {sd}");
    let g = poisson_sparsify(&d, deg, 0).unwrap();
    assert!((g.scale - d.lambda / deg as f64).abs() < 1e-15);
    assert!(matches!(poisson_sparsify(&d, 1000, 0), Err(SparsifyError::ProbabilityOverflow { .. })));
}

#[test]
fn intra_block_sampling_is_uniform_over_pairs() {
    let t = DMatrix::from_row_slice(1, 1, &[1.0]);
    let d = dense_from_effective(&EffectiveHamiltonian::from_matrix(t, 0, 0), 6).unwrap();
    let g = poisson_sparsify(&d, 5, 1).unwrap().graph;
    // p = 1: the complete graph on 6 vertices
    assert!((0..6).all(|x| g.degree(x) == 5 && g.multiplicity(x, x) == 0));
}

#[test]
fn bvn_small_cases() {
    let p = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    assert_eq!(bvn_decompose(&p, 1e-9).unwrap(), vec![(1.0, vec![1, 2, 0])]);
    let a = 0.3;
    let m = DMatrix::from_row_slice(2, 2, &[a, 1.0 - a, 1.0 - a, a]);
    let mut terms = bvn_decompose(&m, 1e-12).unwrap();
    terms.sort_by(|x, y| x.0.total_cmp(&y.0));
    assert_eq!(terms.len(), 2);
    assert!((terms[0].0 - a).abs() < 1e-15 && terms[0].1 == vec![0, 1]);
    assert!((terms[1].0 - (1.0 - a)).abs() < 1e-15 && terms[1].1 == vec![1, 0]);
    let bad = DMatrix::from_row_slice(2, 2, &[0.5, 0.6, 0.5, 0.4]);
    assert!(matches!(bvn_decompose(&bad, 1e-9), Err(SparsifyError::NotDoublyStochastic(_))));
}

fn sinkhorn(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng::seeded(seed);
    let mut m = DMatrix::from_fn(n, n, |_, _| 0.05 + r.random::<f64>());
    for _ in 0..2000 {
        for i in 0..n {
            let s = m.row(i).sum();
            m.row_mut(i).iter_mut().for_each(|x| *x /= s);
        }
        for j in 0..n {
            let s = m.column(j).sum();
            m.column_mut(j).iter_mut().for_each(|x| *x /= s);
        }
    }
    m
}

#[test]
fn bvn_reconstructs_sinkhorn_matrices() {
    for seed in 0..10 {
        let m = sinkhorn(6, seed);
        let terms = bvn_decompose(&m, 1e-10).unwrap();
        assert!(terms.len() <= 26);
        let mut rec = DMatrix::zeros(6, 6);
        for (w, p) in &terms {
            for i in 0..6 {
                rec[(i, p[i])] += w;
            }
        }
        assert!((rec - &m).amax() <= 1e-8);
    }
}

#[test]
fn transport_plan_reconstructs_blocks() {
    let (_, h) = welded_tree_line(4);
    let d = dense_from_effective(&h, 300).unwrap();
    let plan = transport_decompose(&d, 1e-9);
    for (_, f) in &plan.terms {
        for (u, row) in f.iter().enumerate() {
            assert_eq!(row.iter().sum::<usize>(), d.sizes[u]);
        }
    }
    // rounding leaves the block counts slightly off the transportation polytope
    assert!(plan.missing_weight.abs() < 0.05, "{}", plan.missing_weight);
}

#[test]
fn bvn_on_permutation_valued_dense() {
    let d = dense_from_effective(&ring(3), 3).unwrap();
    assert_eq!(d.sizes, vec![1, 1, 1]);
    let s = bvn_sparsify(&d, 1, 0).unwrap();
    // a 3-cycle: the permutation's functional graph, already simple
    assert!((0..3).all(|x| s.graph.degree(x) == 2));
    assert_eq!(s.rewiring.as_ref().unwrap().rewired, 0);
    assert!(operator_distance(&d, &s.scaled_adjacency(), 1.0).unwrap() < 1e-12);
}

#[test]
fn bvn_graph_regular_and_rewired() {
    let d = dense_from_effective(&ring(6), 6000).unwrap();
    for seed in 0..3 {
        let s = bvn_sparsify(&d, 4, seed).unwrap();
        let rep = s.rewiring.clone().unwrap();
        assert!(rep.double_edges > 0);
        assert!((0..s.graph.n()).all(|x| s.graph.degree(x) == 8));
        assert!(rep.degrees_unchanged);
        assert_eq!(rep.remaining_doubles, 0, "{rep:?}");
        // events that touch no earlier one have disjoint supports; each other event adds at most one bound
        let allowed = rep.bound * (1 + rep.overlapping) as f64;
        assert!(rep.cost <= allowed + 1e-9, "{rep:?}");
        assert!((s.scale - d.lambda / 8.0).abs() < 1e-15);
    }
}

#[test]
fn distance_basics() {
    let m = DMatrix::from_fn(5, 5, |i, j| ((i * 3 + j * 7) % 5) as f64 + if i == j { 0.0 } else { 1.0 });
    let m = &m + m.transpose();
    assert!(operator_distance(&m, &m, 1.0).unwrap() < 1e-12);
    let mut e = m.clone();
    e[(1, 3)] += 1.0;
    e[(3, 1)] += 1.0;
    assert!((operator_distance(&m, &e, 1.0).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn distance_matches_dense_norm() {
    let mut r = rng::seeded(5);
    for _ in 0..50 {
        let a = DMatrix::from_fn(200, 200, |_, _| r.random::<f64>() - 0.5);
        let a = &a + a.transpose();
        let b = DMatrix::from_fn(200, 200, |_, _| r.random::<f64>() - 0.5);
        let b = &b + b.transpose();
        let want = (&a - &b * 0.7).symmetric_eigenvalues().amax();
        let got = operator_distance(&a, &b, 0.7).unwrap();
        assert!((got - want).abs() <= 1e-5 * want, "{got} vs {want}");
    }
}

#[test]
fn required_degree_arithmetic() {
    let e = std::f64::consts::E;
    assert!((required_degree(10.0, 0.1, 2.0, e, Method::Bvn) - 2_560_000.0).abs() < 1e-6);
    assert!((required_degree(10.0, 0.1, 2.0, e, Method::Poisson) - 640_000.0).abs() < 1e-6);
}

#[test]
fn distance_shrinks_with_degree() {
    let d = dense_from_effective(&ring(4), 4000).unwrap();
    for method in [Method::Poisson, Method::Bvn] {
        let curve = distance_curve(&d, &[8, 16, 32, 64], method, 5, 1).unwrap();
        let xs: Vec<f64> = curve.iter().map(|c| (c.0 as f64).ln()).collect();
        let ys: Vec<f64> = curve.iter().map(|c| c.1.ln()).collect();
        let mx = xs.iter().sum::<f64>() / 4.0;
        let my = ys.iter().sum::<f64>() / 4.0;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((-0.7..=-0.3).contains(&slope), "{method:?}: {slope} {curve:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn monotone_required_degree(t in 1.0f64..100.0, p in 0.01f64..1.0, dt in 0.0f64..10.0, dp in 0.0f64..0.5) {
        for m in [Method::Bvn, Method::Poisson] {
            let base = required_degree(t, p, 1.5, 100.0, m);
            prop_assert!(required_degree(t + dt, p, 1.5, 100.0, m) >= base);
            prop_assert!(required_degree(t, p / (1.0 + dp), 1.5, 100.0, m) >= base);
        }
    }

    #[test]
    fn largest_remainder_sums(w in proptest::collection::vec(0.01f64..1.0, 1..12), n in 1usize..5000) {
        let s: f64 = w.iter().sum();
        let pi: Vec<f64> = w.iter().map(|x| x / s).collect();
        let sizes = largest_remainder(&pi, n);
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        for (k, &z) in sizes.iter().enumerate() {
            prop_assert!((z as f64 - pi[k] * n as f64).abs() < 1.0 + 1e-9);
        }
    }
}
