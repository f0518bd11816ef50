use std::collections::BTreeMap;
use std::fmt::Display;
use std::time::Instant;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use super::{Caps, ExperimentConfig, ExperimentError, ExperimentRecord};
use crate::classical::{classical_success_rate, Policy};
use crate::graph::{assemble_hierarchical, effective_hamiltonian, Degree, Sign, Wiring};
use crate::lieb::{check_gauge, fluctuated_mountain, heights_to_graph, BoundaryRule, Fluctuation, LiebLattice};
use crate::line::{welded_tree_line, LineEnsembleSpec};
use crate::oracle::{codeword_bits_for, make_oracle};
use crate::qwalk::{exit_probability_vectors, traversal_protocol, Propagator, TraversalReport};
use crate::rng;
use crate::sparsify::{dense_from_effective, operator_distance, sparsify, Method};
use crate::spectral::{
    anderson_line, diagonal_effective_hamiltonian, dos_window, lyapunov, snake_gap_bound, spectrum, OnsiteLaw,
    ZERO_TOL,
};

/// Ordinary least squares `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope; NaN with two points.
    pub slope_se: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<Fit> {
    let k = x.len();
    if k < 2 || k != y.len() {
        return None;
    }
    let n = k as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    let res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = if k > 2 { (res / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    Some(Fit { slope, intercept, r2, slope_se })
}

/// Upper median.
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

fn text<E: Display>(e: E) -> String {
    e.to_string()
}

fn check(r: &mut ExperimentRecord, ok: bool, why: &str) {
    if !ok {
        r.fail(why);
    }
}

fn timed(mut rec: ExperimentRecord, f: impl FnOnce(&mut ExperimentRecord) -> Result<(), String>) -> ExperimentRecord {
    let t0 = Instant::now();
    if let Err(e) = f(&mut rec) {
        rec.fail(&e);
    }
    rec.wall_time = t0.elapsed().as_secs_f64();
    rec
}

fn grid<T: DeserializeOwned + Default>(v: &Value) -> Result<T, ExperimentError> {
    match v {
        Value::Null => Ok(T::default()),
        v => serde_json::from_value(v.clone()).map_err(|e| ExperimentError::Config(format!("grid: {e}"))),
    }
}

fn protocol_measures(r: &mut ExperimentRecord, rep: &TraversalReport) {
    r.put("gap", rep.pivot.gap);
    r.put("overlap", rep.pivot.overlap);
    r.put("log_overlap", rep.pivot.log_overlap);
    r.put("tau", rep.tau);
    r.put("p_bar", rep.p_bar);
    r.put("bound", rep.bound);
}

pub(super) fn dispatch(cfg: &ExperimentConfig, caps: Caps) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    let seeds = &cfg.seeds;
    let g = &cfg.grid;
    Ok(match cfg.experiment.as_str() {
        "scaling_1d" => scaling_1d(&grid(g)?, seeds, caps),
        "lieb_2d" => lieb_2d(&grid(g)?, seeds, caps),
        "lieb_highd" => lieb_highd(&grid(g)?, seeds, caps),
        "sparsified_welded" => sparsified_welded(&grid(g)?, seeds, caps),
        "anderson_diag" => anderson_diag(&grid(g)?, seeds, caps),
        "classical_vs_quantum" => classical_vs_quantum(&grid(g)?, seeds, caps),
        "dos_dyson" => dos_dyson(&grid(g)?, seeds, caps),
        other => return Err(ExperimentError::UnknownExperiment(other.to_string())),
    })
}

fn pairs<A: Copy, B: Copy>(a: &[A], b: &[B]) -> Vec<(A, B)> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect()
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Scaling1d {
    n: Vec<usize>,
    degree: u64,
    factors: Vec<u64>,
}

impl Default for Scaling1d {
    fn default() -> Self {
        Scaling1d { n: (9..=41).step_by(4).collect(), degree: 30, factors: vec![6, 10, 15] }
    }
}

fn scaling_1d(g: &Scaling1d, seeds: &[u64], caps: Caps) -> Vec<ExperimentRecord> {
    const NAME: &str = "scaling_1d";
    let mut out: Vec<ExperimentRecord> = pairs(&g.n, seeds)
        .into_par_iter()
        .map(|(n, seed)| {
            timed(ExperimentRecord::new(NAME).param("n", n).param("seed", seed), |r| {
                caps.check_dim(2 * n + 1)?;
                let h = LineEnsembleSpec::uniform(n, g.degree, &g.factors).sample(seed).map_err(text)?.hamiltonian();
                let rep = traversal_protocol(&h, 0, 0).map_err(text)?;
                protocol_measures(r, &rep);
                r.put("log_inv_p", -rep.p_bar.ln());
                r.put("log_inv_gap_overlap", -(rep.pivot.gap.ln() + rep.pivot.log_overlap));
                check(r, rep.holds, "time-averaged exit probability below overlap^2/4");
                Ok(())
            })
        })
        .collect();

    let mut by_n: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in &out {
        if let (Some(Value::Number(n)), Some(p), Some(q)) =
            (r.params.get("n"), r.get("log_inv_p"), r.get("log_inv_gap_overlap"))
        {
            let e = by_n.entry(n.as_u64().unwrap_or(0) as usize).or_default();
            e.0.push(p);
            e.1.push(q);
        }
    }
    if by_n.len() >= 3 {
        out.push(timed(ExperimentRecord::new(NAME).param("stage", "fit"), |r| {
            let sqrt_n: Vec<f64> = by_n.keys().map(|&n| (n as f64).sqrt()).collect();
            let lin_n: Vec<f64> = by_n.keys().map(|&n| n as f64).collect();
            let med_p: Vec<f64> = by_n.values().map(|v| median(&v.0)).collect();
            let med_g: Vec<f64> = by_n.values().map(|v| median(&v.1)).collect();
            for (label, y) in [("p", &med_p), ("gap_overlap", &med_g)] {
                let s = linear_fit(&sqrt_n, y).ok_or("degenerate fit")?;
                let l = linear_fit(&lin_n, y).ok_or("degenerate fit")?;
                r.put(&format!("r2_sqrt_{label}"), s.r2);
                r.put(&format!("r2_linear_{label}"), l.r2);
                r.put(&format!("slope_sqrt_{label}"), s.slope);
                check(r, s.r2 >= 0.8, &format!("{label}: R^2 against sqrt(n) below 0.8"));
                check(r, l.r2 < s.r2, &format!("{label}: linear fit not worse than sqrt(n) fit"));
            }
            Ok(())
        }));
    }
    out
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Lieb2d {
    #[serde(rename = "N")]
    sides: Vec<usize>,
    degree: u64,
    f: u64,
    fluct: Vec<Fluctuation>,
}

impl Default for Lieb2d {
    fn default() -> Self {
        Lieb2d { sides: vec![3, 4, 5], degree: 30, f: 10, fluct: vec![Fluctuation::None, Fluctuation::Ice] }
    }
}

/// Gauge, zero-mode count and traversal checks shared by the Lieb experiments.
fn lieb_point(
    r: &mut ExperimentRecord,
    lat: &LiebLattice,
    degree: u64,
    f: u64,
    kind: Fluctuation,
    seed: u64,
    caps: Caps,
) -> Result<(), String> {
    let (n, d) = (lat.side(), lat.dim());
    caps.check_dim(lat.len())?;
    let a = fluctuated_mountain(lat, degree, f, kind, seed).map_err(text)?;
    check(r, check_gauge(lat, &a).satisfied, "gauge violated");
    let lg = heights_to_graph(lat, &a, degree, BoundaryRule::MinimalIntegral).map_err(text)?;
    let h = effective_hamiltonian(&lg.spec, Sign::Adjacency);
    let sp = spectrum(&h, ZERO_TOL).map_err(text)?;
    let expected = (d - 1) * n.pow(d as u32) + 2 - d * n.pow(d as u32 - 1);
    r.put("zero_count", sp.zero_count as f64);
    r.put("expected_zero_count", expected as f64);
    r.put("spectral_gap", sp.gap);
    check(r, sp.zero_count == expected, "zero-mode count differs from the expected count");
    if d == 2 {
        let snake = snake_gap_bound(lat, &h).map_err(text)?;
        r.put("snake_bound", snake.bound);
        check(r, snake.bound <= sp.gap, "snake bound exceeds the spectral gap");
    }
    let rep = traversal_protocol(&h, 0, 0).map_err(text)?;
    protocol_measures(r, &rep);
    check(r, rep.holds, "time-averaged exit probability below overlap^2/4");
    Ok(())
}

fn lieb_2d(g: &Lieb2d, seeds: &[u64], caps: Caps) -> Vec<ExperimentRecord> {
    let points: Vec<(usize, Fluctuation, u64)> = pairs(&g.sides, &g.fluct)
        .into_iter()
        .flat_map(|(n, k)| seeds.iter().map(move |&s| (n, k, s)))
        .collect();
    points
        .into_par_iter()
        .map(|(n, kind, seed)| {
            let rec = ExperimentRecord::new("lieb_2d").param("N", n).param("fluct", kind).param("seed", seed);
            timed(rec, |r| lieb_point(r, &LiebLattice::new(n, 2), g.degree, g.f, kind, seed, caps))
        })
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LiebHighd {
    #[serde(rename = "N")]
    sides: Vec<usize>,
    d: Vec<usize>,
    degree: u64,
    f: u64,
}

impl Default for LiebHighd {
    fn default() -> Self {
        LiebHighd { sides: vec![3], d: vec![3], degree: 30, f: 10 }
    }
}

/// The mountain construction is deterministic, so only the first seed is used.
fn lieb_highd(g: &LiebHighd, seeds: &[u64], caps: Caps) -> Vec<ExperimentRecord> {
    let seed = seeds[0];
    pairs(&g.sides, &g.d)
        .into_par_iter()
        .map(|(n, d)| {
            let rec = ExperimentRecord::new("lieb_highd").param("N", n).param("d", d).param("seed", seed);
            timed(rec, |r| lieb_point(r, &LiebLattice::new(n, d), g.degree, g.f, Fluctuation::None, seed, caps))
        })
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SparsifiedWelded {
    n: usize,
    vertices: usize,
    degrees: Vec<usize>,
    methods: Vec<Method>,
}

impl Default for SparsifiedWelded {
    fn default() -> Self {
        SparsifiedWelded { n: 5, vertices: 1000, degrees: vec![4, 8, 16], methods: vec![Method::Poisson, Method::Bvn] }
    }
}

fn sparsified_welded(g: &SparsifiedWelded, seeds: &[u64], caps: Caps) -> Vec<ExperimentRecord> {
    const NAME: &str = "sparsified_welded";
    let mut setup = None;
    let head = timed(ExperimentRecord::new(NAME).param("stage", "dense").param("n", g.n), |r| {
        caps.check_vertices(g.vertices)?;
        caps.check_dim(g.vertices)?;
        let (_, h) = welded_tree_line(g.n);
        let dense = dense_from_effective(&h, g.vertices).map_err(text)?;
        let rep = traversal_protocol(&dense.effective(), 0, 0).map_err(text)?;
        let a = dense.supervertex_state(dense.entrance);
        let b = dense.supervertex_state(dense.exit);
        let full = Propagator::new(&dense.to_dense()).map_err(text)?;
        r.put("lambda", dense.lambda);
        r.put("row_sum_error", dense.row_sum_error);
        r.put("tau", rep.tau);
        r.put("p_dense", rep.p_bar);
        r.put("p_full", exit_probability_vectors(&full, &a, &b, rep.tau));
        r.put("target", rep.p_bar / (4.0 * rep.tau));
        setup = Some((dense, rep.tau, rep.p_bar, a, b));
        Ok(())
    });
    let Some((dense, tau, p, a, b)) = setup else {
        return vec![head];
    };
    let points: Vec<(Method, usize, u64)> = pairs(&g.methods, &g.degrees)
        .into_iter()
        .flat_map(|(m, d)| seeds.iter().map(move |&s| (m, d, s)))
        .collect();
    let mut out = vec![head];
    out.par_extend(points.into_par_iter().map(|(method, degree, seed)| {
        let rec = ExperimentRecord::new(NAME)
            .param("n", g.n)
            .param("method", method)
            .param("D", degree)
            .param("seed", seed);
        timed(rec, |r| {
            let s = sparsify(&dense, degree, method, seed).map_err(text)?;
            let scaled = s.scaled_adjacency();
            let dist = operator_distance(&dense, &scaled, 1.0).map_err(text)?;
            let prop = Propagator::new(&scaled.to_dense()).map_err(text)?;
            let pb = exit_probability_vectors(&prop, &a, &b, tau);
            let target = p / (4.0 * tau);
            r.put("distance", dist);
            r.put("target", target);
            r.put("calibrated", f64::from(u8::from(dist <= target)));
            r.put("p_bar", pb);
            r.put("p_dense", p);
            r.put("scale", s.scale);
            r.put("max_degree", s.graph.max_degree() as f64);
            check(r, pb >= p / 2.0, "sparsified exit probability below half the dense value");
            if let Some(rw) = &s.rewiring {
                r.put("double_edges", rw.double_edges as f64);
                r.put("rewired", rw.rewired as f64);
                r.put("remaining_doubles", rw.remaining_doubles as f64);
                r.put("overlapping", rw.overlapping as f64);
                r.put("rewiring_cost", rw.cost);
                r.put("rewiring_bound", rw.bound);
                r.put("degrees_unchanged", f64::from(u8::from(rw.degrees_unchanged)));
                check(r, rw.remaining_doubles == 0, "double edges remain in large supervertices");
                check(r, rw.degrees_unchanged, "rewiring changed degrees");
            }
            Ok(())
        })
    }));
    out
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AndersonDiag {
    n: Vec<usize>,
    c: f64,
    energy: f64,
    length: usize,
    lyapunov_trials: usize,
    /// Constant onsite count per vertex for the shift check.
    shift: u64,
    shift_half_length: usize,
    degree: u64,
    factors: Vec<u64>,
}

impl Default for AndersonDiag {
    fn default() -> Self {
        AndersonDiag {
            n: (10..=40).step_by(5).collect(),
            c: 1.0,
            energy: 0.5,
            length: 100_000,
            lyapunov_trials: 16,
            shift: 1,
            shift_half_length: 10,
            degree: 30,
            factors: vec![6, 10, 15],
        }
    }
}

fn anderson_diag(g: &AndersonDiag, seeds: &[u64], caps: Caps) -> Vec<ExperimentRecord> {
    const NAME: &str = "anderson_diag";
    let mut out: Vec<ExperimentRecord> = pairs(&g.n, seeds)
        .into_par_iter()
        .map(|(n, seed)| {
            timed(ExperimentRecord::new(NAME).param("n", n).param("seed", seed), |r| {
                caps.check_dim(n)?;
                let h = anderson_line(n, g.c, seed);
                let rep = traversal_protocol(&h, 0, 0).map_err(text)?;
                protocol_measures(r, &rep);
                r.put("log_p", rep.p_bar.ln());
                check(r, rep.p_bar > 0.0, "zero exit probability");
                Ok(())
            })
        })
        .collect();

    out.push(timed(ExperimentRecord::new(NAME).param("stage", "lyapunov").param("seed", seeds[0]), |r| {
        let law = OnsiteLaw::Uniform { lo: 0.0, hi: 1.0 };
        let est = lyapunov(&law, g.energy, g.length, g.lyapunov_trials, seeds[0]);
        r.put("lambda_f", est.mean);
        r.put("lambda_f_stderr", est.stderr);
        r.put("z", est.mean / est.stderr);
        check(r, est.mean > 5.0 * est.stderr, "Lyapunov exponent not positive at 5 sigma");
        Ok(())
    }));

    let (xs, ys): (Vec<f64>, Vec<f64>) = out
        .iter()
        .filter_map(|r| Some((r.params.get("n")?.as_f64()?, r.get("log_p")?)))
        .unzip();
    let distinct = g.n.iter().collect::<std::collections::BTreeSet<_>>().len();
    if distinct >= 3 {
        out.push(timed(ExperimentRecord::new(NAME).param("stage", "fit"), |r| {
            let fit = linear_fit(&xs, &ys).ok_or("degenerate fit")?;
            r.put("slope", fit.slope);
            r.put("slope_stderr", fit.slope_se);
            r.put("r2", fit.r2);
            check(r, fit.slope + 3.0 * fit.slope_se < 0.0, "log P slope not negative at 3 sigma");
            Ok(())
        }));
    }

    out.extend(seeds.iter().map(|&seed| {
        timed(ExperimentRecord::new(NAME).param("stage", "shift").param("seed", seed), |r| {
            let base = LineEnsembleSpec::uniform(g.shift_half_length, g.degree, &g.factors)
                .sample(seed)
                .map_err(text)?
                .spec;
            let mut shifted = base.clone();
            let f = g.shift;
            shifted.diagonal_counts = Some(base.sizes.iter().map(|s| s * BigUint::from(f)).collect());
            shifted.degree = Degree::Regular(g.degree + 2 * f);
            let e0 = spectrum(&diagonal_effective_hamiltonian(&base).map_err(text)?, 0.0).map_err(text)?;
            let ef = spectrum(&diagonal_effective_hamiltonian(&shifted).map_err(text)?, 0.0).map_err(text)?;
            let dev = e0
                .eigenvalues
                .iter()
                .zip(&ef.eigenvalues)
                .map(|(a, b)| (b - a - 2.0 * f as f64).abs())
                .fold(0.0, f64::max);
            r.put("max_shift_error", dev);
            check(r, dev <= 1e-10, "shifted spectrum deviates by more than 1e-10");
            Ok(())
        })
    }));
    out
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ClassicalVsQuantum {
    n: Vec<usize>,
    /// Budget `Q = q_factor · n²`.
    q_factor: u64,
    policy: Policy,
    trials: usize,
}

impl Default for ClassicalVsQuantum {
    fn default() -> Self {
        ClassicalVsQuantum { n: vec![6, 8, 10], q_factor: 10, policy: Policy::Nbw, trials: 1000 }
    }
}

fn classical_vs_quantum(g: &ClassicalVsQuantum, seeds: &[u64], caps: Caps) -> Vec<ExperimentRecord> {
    const NAME: &str = "classical_vs_quantum";
    let mut out: Vec<ExperimentRecord> = pairs(&g.n, seeds)
        .into_par_iter()
        .map(|(n, seed)| {
            let rec = ExperimentRecord::new(NAME).param("n", n).param("policy", g.policy).param("seed", seed);
            timed(rec, |r| {
                caps.check_vertices((1usize << (n + 1)) - 2)?;
                let (spec, h) = welded_tree_line(n);
                let graph = assemble_hierarchical(&spec, seed, caps.vertices, Wiring::Balanced).map_err(text)?;
                let oracle = make_oracle(&graph, rng::mix(seed, 1), codeword_bits_for(graph.n())).map_err(text)?;
                let q = g.q_factor * (n * n) as u64;
                let cl = classical_success_rate(&oracle, q, g.policy, g.trials, rng::mix(seed, 2)).map_err(text)?;
                let rep = traversal_protocol(&h, 0, 0).map_err(text)?;
                protocol_measures(r, &rep);
                r.put("vertices", graph.n() as f64);
                r.put("queries", q as f64);
                r.put("classical_rate", cl.rate);
                r.put("classical_stderr", cl.stderr);
                r.put("mean_queries", cl.mean_queries);
                check(r, cl.rate <= 0.01, "classical success above 1%");
                check(r, rep.p_bar > 10.0 * cl.rate, "quantum exit probability not above 10x the classical rate");
                Ok(())
            })
        })
        .collect();

    let mut by_n: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in &out {
        if let (Some(n), Some(rate)) = (r.params.get("n").and_then(Value::as_u64), r.get("classical_rate")) {
            by_n.entry(n).or_default().push(rate);
        }
    }
    if by_n.len() >= 2 {
        out.push(timed(ExperimentRecord::new(NAME).param("stage", "monotone"), |r| {
            let med: Vec<f64> = by_n.values().map(|v| median(v)).collect();
            for (n, m) in by_n.keys().zip(&med) {
                r.put(&format!("median_rate_n{n}"), *m);
            }
            let decreasing = med.windows(2).all(|w| w[1] < w[0] || w[0] == 0.0);
            check(r, decreasing, "median classical success not decreasing in n");
            Ok(())
        }));
    }
    out
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DosDyson {
    half_length: usize,
    /// Sites kept; an even count leaves no forced zero mode.
    sites: usize,
    degree: u64,
    factors: Vec<u64>,
    /// Windows `ε = e^{−k}`.
    eps_log: Vec<f64>,
    /// The window compared against `σ̂²/log²(1/ε)`.
    reference_eps_log: f64,
    trials: usize,
}

impl Default for DosDyson {
    fn default() -> Self {
        DosDyson {
            half_length: 72,
            sites: 144,
            degree: 30,
            factors: vec![6, 10, 15],
            eps_log: vec![4.0, 6.0],
            reference_eps_log: 4.0,
            trials: 500,
        }
    }
}

/// Raw hoppings of one factor line, trimmed to `sites` sites.
fn dos_hoppings(ens: &LineEnsembleSpec, sites: usize, seed: u64) -> Result<Vec<f64>, String> {
    let mut t = ens.sample(seed).map_err(text)?.hamiltonian().hoppings();
    if t.len() + 1 < sites || sites < 2 {
        return Err(format!("a line of {} sites cannot be trimmed to {sites}", t.len() + 1));
    }
    t.truncate(sites - 1);
    Ok(t)
}

fn dos_dyson(g: &DosDyson, seeds: &[u64], caps: Caps) -> Vec<ExperimentRecord> {
    const NAME: &str = "dos_dyson";
    let ens = LineEnsembleSpec::uniform(g.half_length, g.degree, &g.factors);
    let mut eps = g.eps_log.clone();
    eps.sort_by(f64::total_cmp);
    let per_seed: Vec<Vec<ExperimentRecord>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut sigma2 = None;
            let head = timed(ExperimentRecord::new(NAME).param("stage", "variance").param("seed", seed), |r| {
                caps.check_dim(g.sites)?;
                let logs: Vec<Vec<f64>> = (0..g.trials)
                    .into_par_iter()
                    .map(|k| dos_hoppings(&ens, g.sites, rng::mix(seed, k as u64)).map(|t| t.iter().map(|x| x.ln()).collect()))
                    .collect::<Result<_, _>>()?;
                let all: Vec<f64> = logs.into_iter().flatten().collect();
                let m = all.iter().sum::<f64>() / all.len() as f64;
                let var = all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (all.len() as f64 - 1.0);
                r.put("sigma2", var);
                sigma2 = Some(var);
                Ok(())
            });
            let Some(var) = sigma2 else {
                return vec![head];
            };
            let mut recs = vec![head];
            let sample = |s: u64| dos_hoppings(&ens, g.sites, s).expect("checked while estimating the variance");
            for &k in &eps {
                recs.push(timed(ExperimentRecord::new(NAME).param("eps_log", k).param("seed", seed), |r| {
                    let est = dos_window(sample, (-k).exp(), g.trials, seed);
                    let prediction = var / (k * k);
                    r.put("mu", est.mu);
                    r.put("mu_stderr", est.stderr);
                    r.put("sigma2", var);
                    r.put("prediction", prediction);
                    r.put("ratio", est.mu / prediction);
                    if k == g.reference_eps_log {
                        let ratio = est.mu / prediction;
                        check(r, (1.0 / 3.0..=3.0).contains(&ratio), "window mass not within a factor 3 of the prediction");
                    }
                    Ok(())
                }));
            }
            let mus: Vec<f64> = recs.iter().filter_map(|r| r.get("mu")).collect();
            if mus.len() >= 2 {
                recs.push(timed(ExperimentRecord::new(NAME).param("stage", "monotone").param("seed", seed), |r| {
                    check(r, mus.windows(2).all(|w| w[1] < w[0]), "window mass does not shrink with the window");
                    Ok(())
                }));
            }
            recs
        })
        .collect();
    per_seed.into_iter().flatten().collect()
}
