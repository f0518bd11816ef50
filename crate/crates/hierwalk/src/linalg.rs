// SPDX-License-Identifier: Apache-2.0
//! Sparse matrices, matrix-free operators and the iterative solvers built on them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng as _;

use crate::graph::HierarchicalGraph;
use crate::rng;

/// Real symmetric operator applied matrix-free.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = M x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Compressed sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Csr {
    /// From `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut trip: Vec<(u32, u32, f64)>) -> Self {
        trip.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            cols.push(c);
            vals.push(v);
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr { n, row_ptr, cols, vals }
    }

    /// Adjacency matrix of a graph, entries counting edge multiplicity.
    pub fn adjacency(g: &HierarchicalGraph) -> Self {
        Self::scaled_adjacency(g, 1.0)
    }

    pub fn scaled_adjacency(g: &HierarchicalGraph, scale: f64) -> Self {
        let mut trip = Vec::new();
        for x in 0..g.n() {
            for &y in g.neighbors(x) {
                trip.push((x as u32, y, scale));
            }
        }
        Self::from_triplets(g.n(), trip)
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut trip = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    trip.push((i as u32, j as u32, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), trip)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k] as usize)] += self.vals[k];
            }
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k] as usize, self.vals[k]))
    }

    /// Largest absolute row sum, an upper bound on the spectral norm.
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn apply_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in self.row(i) {
                acc += x[j] * v;
            }
            *yi = acc;
        }
    }
}

impl LinearOperator for Csr {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let v = self * DVector::from_column_slice(x);
        y.copy_from_slice(v.as_slice());
    }
}

/// `a·A − b·B` without forming it.
pub struct Difference<'a, A: ?Sized, B: ?Sized> {
    pub a: &'a A,
    pub a_scale: f64,
    pub b: &'a B,
    pub b_scale: f64,
}

impl<A: LinearOperator + ?Sized, B: LinearOperator + ?Sized> LinearOperator for Difference<'_, A, B> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut tmp = vec![0.0; x.len()];
        self.a.apply(x, y);
        self.b.apply(x, &mut tmp);
        for (yi, ti) in y.iter_mut().zip(tmp) {
            *yi = self.a_scale * *yi - self.b_scale * ti;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Spectral norm of a symmetric operator by Lanczos with full reorthogonalization,
/// stopped when the Ritz estimate changes by less than `rel_tol`.
pub fn symmetric_norm<M: LinearOperator + ?Sized>(m: &M, rel_tol: f64, seed: u64) -> f64 {
    let n = m.dim();
    if n == 0 {
        return 0.0;
    }
    let mut r = rng::seeded(seed);
    let mut q: Vec<f64> = (0..n).map(|_| r.random::<f64>() - 0.5).collect();
    let nq = dot(&q, &q).sqrt();
    q.iter_mut().for_each(|x| *x /= nq);
    let max_steps = n.min(400);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut last = f64::NAN;
    for k in 0..max_steps {
        m.apply(&basis[k], &mut w);
        let a = dot(&w, &basis[k]);
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
            }
        }
        let est = ritz_extreme(&alpha, &beta);
        let bnorm = dot(&w, &w).sqrt();
        let done = (est - last).abs() <= rel_tol * est.abs().max(f64::MIN_POSITIVE) * 1e-2;
        last = est;
        if bnorm <= 1e-13 * est.abs().max(1e-300) || k + 1 == max_steps || (done && k >= 8) {
            return est;
        }
        beta.push(bnorm);
        basis.push(w.iter().map(|x| x / bnorm).collect());
    }
    last
}

fn ritz_extreme(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t.symmetric_eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Conjugate gradients for a symmetric positive definite operator.
pub fn conjugate_gradient<M: LinearOperator + ?Sized>(
    m: &M,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, usize) {
    let n = m.dim();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let bnorm = dot(b, b).sqrt().max(f64::MIN_POSITIVE);
    let mut rr = dot(&r, &r);
    for it in 0..max_iter {
        if rr.sqrt() <= tol * bnorm {
            return (x, it);
        }
        m.apply(&p, &mut ap);
        let step = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rr_new = dot(&r, &r);
        let ratio = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + ratio * p[i];
        }
    }
    (x, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_sums_duplicates() {
        let m = Csr::from_triplets(2, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, 3.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.to_dense(), DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 3.0, 0.0]));
    }

    #[test]
    fn lanczos_norm_matches_dense() {
        let mut r = rng::seeded(4);
        for _ in 0..5 {
            let n = 60;
            let a = DMatrix::from_fn(n, n, |_, _| r.random::<f64>() - 0.5);
            let s = &a + a.transpose();
            let want = s.symmetric_eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let got = symmetric_norm(&s, 1e-10, 1);
            assert!((got - want).abs() <= 1e-8 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn difference_norm_of_single_pair() {
        let a = DMatrix::<f64>::zeros(5, 5);
        let mut b = a.clone();
        b[(1, 3)] = 1.0;
        b[(3, 1)] = 1.0;
        let d = Difference { a: &a, a_scale: 1.0, b: &b, b_scale: 1.0 };
        assert!((symmetric_norm(&d, 1e-10, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cg_solves_spd() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let b = [1.0, 2.0, 3.0];
        let (x, _) = conjugate_gradient(&m, &b, 1e-14, 100);
        let want = m.clone().lu().solve(&DVector::from_column_slice(&b)).unwrap();
        for i in 0..3 {
            assert!((x[i] - want[i]).abs() < 1e-12);
        }
    }
}
