// SPDX-License-Identifier: Apache-2.0
//! Transfer matrices of `ψ_{n−1} + u_n ψ_n + ψ_{n+1} = E ψ_n` and their Lyapunov exponent.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng;

pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

/// How the onsite sequence `u_n` is generated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum OnsiteLaw {
    Zero,
    Uniform { lo: f64, hi: f64 },
    /// `u_n = 2λ cos(2πnb + φ) / (1 − α cos(2πnb + φ))`
    AubryAndre { lambda: f64, alpha: f64, b: f64, phi: f64 },
}

impl OnsiteLaw {
    pub fn value(&self, n: usize, r: &mut rng::Rng) -> f64 {
        match *self {
            OnsiteLaw::Zero => 0.0,
            OnsiteLaw::Uniform { lo, hi } => lo + (hi - lo) * r.random::<f64>(),
            OnsiteLaw::AubryAndre { lambda, alpha, b, phi } => {
                let c = (2.0 * std::f64::consts::PI * n as f64 * b + phi).cos();
                2.0 * lambda * c / (1.0 - alpha * c)
            }
        }
    }
}

/// `X_n` with `(ψ_{n+1}, ψ_n) = X_n (ψ_n, ψ_{n−1})`; `det X_n = 1`.
pub fn transfer_matrix(energy: f64, u: f64) -> [[f64; 2]; 2] {
    [[energy - u, -1.0], [1.0, 0.0]]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub length: usize,
}

fn mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn spectral_norm(m: [[f64; 2]; 2]) -> f64 {
    let a: f64 = m.iter().flatten().map(|v| v * v).sum();
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    ((a + (a * a - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
}

fn one_trial(law: &OnsiteLaw, energy: f64, length: usize, seed: u64) -> f64 {
    let mut r = rng::seeded(seed);
    let mut m = [[1.0, 0.0], [0.0, 1.0]];
    let mut log_acc = 0.0;
    for n in 0..length {
        m = mul(transfer_matrix(energy, law.value(n, &mut r)), m);
        if n % 32 == 31 {
            let s = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            m.iter_mut().flatten().for_each(|v| *v /= s);
            log_acc += s.ln();
        }
    }
    (log_acc + spectral_norm(m).ln()) / length as f64
}

/// `(1/n) log‖X_n ⋯ X_1‖`, averaged over independent trials.
pub fn lyapunov(law: &OnsiteLaw, energy: f64, length: usize, trials: usize, seed: u64) -> LyapunovEstimate {
    let v: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| one_trial(law, energy, length, rng::mix(seed, k as u64)))
        .collect();
    let n = trials as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    LyapunovEstimate { mean, stderr: (var / n).sqrt(), trials, length }
}
