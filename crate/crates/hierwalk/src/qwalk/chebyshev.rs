// SPDX-License-Identifier: Apache-2.0
//! `e^{−iAt} v` for sparse `A` by Chebyshev expansion:
//! `e^{−izx} = J_0(z) + 2 Σ_k (−i)^k J_k(z) T_k(x)` with `x = A/ρ`, `z = ρt`.

use num_complex::Complex64;

use super::{QwalkError, WalkState};
use crate::linalg::Csr;

/// Largest sparse matrix accepted by full-graph evolution.
pub const FULL_NNZ_CAP: usize = 1_000_000;

/// `J_0(z) … J_K(z)` by Miller's backward recurrence, normalized with
/// `J_0 + 2 Σ J_{2k} = 1`. `K` is cut where the tail is below `1e-17`.
pub fn bessel_j_sequence(z: f64) -> Vec<f64> {
    let az = z.abs();
    if az < 1e-300 {
        return vec![1.0];
    }
    let mut m = (az + 20.0 * az.cbrt() + 40.0).ceil() as usize;
    m += m % 2;
    let mut f = vec![0.0f64; m + 2];
    f[m] = 1e-30;
    for k in (1..=m).rev() {
        f[k - 1] = 2.0 * k as f64 / az * f[k] - f[k + 1];
        if f[k - 1].abs() > 1e250 {
            for v in f[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = f[0] + 2.0 * f.iter().skip(2).step_by(2).sum::<f64>();
    let mut j: Vec<f64> = f.iter().map(|v| v / norm).collect();
    if z < 0.0 {
        j.iter_mut().skip(1).step_by(2).for_each(|v| *v = -*v);
    }
    let keep = j.iter().rposition(|v| v.abs() > 1e-17).unwrap_or(0);
    j.truncate(keep + 1);
    j
}

pub fn evolve_full(a: &Csr, state: &WalkState, t: f64) -> Result<WalkState, QwalkError> {
    if a.nnz() > FULL_NNZ_CAP {
        return Err(QwalkError::CapExceeded { nnz: a.nnz(), cap: FULL_NNZ_CAP });
    }
    let rho = a.max_abs_row_sum();
    if rho == 0.0 || t == 0.0 {
        return Ok(state.clone());
    }
    let j = bessel_j_sequence(rho * t);
    let n = state.amplitudes.len();
    let inv = 1.0 / rho;
    let apply = |x: &[Complex64], y: &mut [Complex64]| {
        a.apply_complex(x, y);
        y.iter_mut().for_each(|v| *v *= inv);
    };
    let mut prev = state.amplitudes.clone();
    let mut out: Vec<Complex64> = prev.iter().map(|v| v * j[0]).collect();
    if j.len() == 1 {
        return Ok(WalkState { amplitudes: out });
    }
    let mut cur = vec![Complex64::new(0.0, 0.0); n];
    apply(&prev, &mut cur);
    let mut phase = Complex64::new(0.0, -1.0);
    for (o, c) in out.iter_mut().zip(&cur) {
        *o += c * (phase * 2.0 * j[1]);
    }
    let mut next = vec![Complex64::new(0.0, 0.0); n];
    for jk in j.iter().skip(2) {
        apply(&cur, &mut next);
        for i in 0..n {
            next[i] = next[i] * 2.0 - prev[i];
        }
        phase *= Complex64::new(0.0, -1.0);
        let w = phase * 2.0 * *jk;
        for (o, c) in out.iter_mut().zip(&next) {
            *o += c * w;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(WalkState { amplitudes: out })
}
