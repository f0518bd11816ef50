//! Command-line front end: generate instances, inspect spectra, run walks,
//! classical baselines, sparsification and registered experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hierwalk::classical::{classical_success_rate, Policy};
use hierwalk::experiments::{run_experiment, ExperimentConfig, ExperimentError};
use hierwalk::graph::{
    assemble_hierarchical, effective_hamiltonian, EffectiveHamiltonian, GraphDocument, Materialized, Sign,
    SupergraphSpec, Wiring, DEFAULT_VERTEX_CAP,
};
use hierwalk::lieb::{self, BoundaryRule, Fluctuation, HeightBias, LiebLattice};
use hierwalk::line::{welded_tree_line, LineEnsembleSpec};
use hierwalk::oracle::{codeword_bits_for, make_oracle};
use hierwalk::qwalk::{choose_tau, exit_probability_mc, find_pivot, traversal_protocol, Propagator};
use hierwalk::rng;
use hierwalk::sparsify::{dense_from_effective, operator_distance, sparsify, Method};
use hierwalk::spectral::{spectrum, ZERO_TOL};

#[derive(Parser)]
#[command(name = "hierwalk", version, about = "Quantum walks on hierarchical random graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a supergraph spec (or a float-mode Hamiltonian) as JSON.
    #[command(subcommand)]
    Generate(Generate),
    /// Spectrum summary of an instance's effective Hamiltonian.
    Spectrum {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = ZERO_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time-averaged exit probability of the traversal protocol.
    Walk {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::Exact)]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classical oracle traversal success rate on a materialized spec.
    Classical {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "Q")]
        q: u64,
        #[arg(long, default_value = "nbw")]
        policy: Policy,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_VERTEX_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sparsify the dense graph built from a supervertex matrix.
    Sparsify {
        /// JSON matrix (array of rows) or effective Hamiltonian document.
        #[arg(long = "t")]
        matrix: PathBuf,
        #[arg(long = "N")]
        vertices: usize,
        #[arg(long = "D")]
        degree: usize,
        #[arg(long, default_value = "bvn")]
        method: Method,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a registered experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

#[derive(Subcommand)]
enum Generate {
    /// Mirrored factor line on 2n+1 supervertices.
    Line {
        #[arg(long)]
        n: usize,
        #[arg(long = "D")]
        degree: u64,
        #[arg(long, value_delimiter = ',')]
        factors: Vec<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Welded-tree chain on 2n supervertices.
    Welded {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lieb-lattice supergraph from the mountain construction.
    Lieb(LiebArgs),
}

#[derive(Args)]
struct LiebArgs {
    #[arg(long = "N")]
    side: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long = "D")]
    degree: u64,
    #[arg(long)]
    f: u64,
    #[arg(long, value_enum, default_value_t = Fluct::None)]
    fluct: Fluct,
    /// Field strength for `bgff`.
    #[arg(long, default_value_t = 1.0)]
    g: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fluct {
    None,
    Ice,
    Dimer,
    Bgff,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    Exact,
    Mc,
}

fn emit(value: &impl serde::Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Spec documents have `sizes`; float-mode documents carry the matrix directly.
fn load_hamiltonian(path: &Path) -> Result<EffectiveHamiltonian> {
    let v = read_json(path)?;
    if v.get("matrix").is_some() {
        return Ok(serde_json::from_value(v)?);
    }
    Ok(effective_hamiltonian(&load_spec_value(v)?, Sign::Adjacency))
}

fn load_spec_value(v: Value) -> Result<SupergraphSpec> {
    let v = match v.get("spec") {
        Some(s) if v.get("sizes").is_none() => s.clone(),
        _ => v,
    };
    serde_json::from_value(v).context("not a supergraph spec")
}

fn generate(g: Generate) -> Result<()> {
    match g {
        Generate::Line { n, degree, factors, seed, out } => {
            let line = LineEnsembleSpec::uniform(n, degree, &factors).sample(seed)?;
            emit(&line.spec, out.as_deref())
        }
        Generate::Welded { n, out } => {
            if n == 0 {
                bail!("welded tree needs n >= 1");
            }
            emit(&welded_tree_line(n).0, out.as_deref())
        }
        Generate::Lieb(a) => {
            let lat = LiebLattice::new(a.side, a.d);
            let kind = match a.fluct {
                Fluct::Bgff => {
                    if a.f == 0 || a.f >= a.degree {
                        bail!("f must lie strictly between 0 and D");
                    }
                    let slope = ((a.degree - a.f) as f64 / a.f as f64).ln();
                    let fields = lieb::sample_bgff(&lat, &HeightBias::mountain(&lat, slope), a.g, a.seed);
                    let h = lieb::lieb_hamiltonian_from_heights(&lat, &fields, a.degree);
                    return emit(&h, a.out.as_deref());
                }
                Fluct::None => Fluctuation::None,
                Fluct::Ice => Fluctuation::Ice,
                Fluct::Dimer => Fluctuation::Dimer,
            };
            let ratios = lieb::fluctuated_mountain(&lat, a.degree, a.f, kind, a.seed)?;
            let graph = lieb::heights_to_graph(&lat, &ratios, a.degree, BoundaryRule::MinimalIntegral)?;
            emit(&graph.spec, a.out.as_deref())
        }
    }
}

fn walk(input: &Path, trials: usize, seed: u64, mode: Mode, out: Option<&Path>) -> Result<()> {
    let h = load_hamiltonian(input)?;
    if mode == Mode::Exact {
        return emit(&traversal_protocol(&h, trials, seed)?, out);
    }
    if trials == 0 {
        bail!("--mode mc needs --trials > 0");
    }
    let p = Propagator::new(&h.matrix)?;
    let pivot = find_pivot(&h, &p)?;
    let tau = choose_tau(pivot.gap, pivot.overlap)?;
    let (mean, stderr) = exit_probability_mc(&p, h.entrance, h.exit, tau, trials, seed);
    let record = json!({
        "mode": "mc",
        "pivot": pivot,
        "tau": tau,
        "p_bar": mean,
        "stderr": stderr,
        "bound": 0.25 * pivot.overlap * pivot.overlap,
        "trials": trials,
    });
    emit(&record, out)
}

#[allow(clippy::too_many_arguments)]
fn classical(input: &Path, q: u64, policy: Policy, trials: usize, seed: u64, cap: usize, out: Option<&Path>) -> Result<()> {
    let spec = load_spec_value(read_json(input)?)?;
    let graph = assemble_hierarchical(&spec, seed, cap, Wiring::Balanced)?;
    let oracle = make_oracle(&graph, rng::mix(seed, 1), codeword_bits_for(graph.n()))?;
    let rate = classical_success_rate(&oracle, q, policy, trials, rng::mix(seed, 2))?;
    emit(&json!({"vertices": graph.n(), "Q": q, "policy": policy, "result": rate}), out)
}

fn sparsify_cmd(matrix: &Path, vertices: usize, degree: usize, method: Method, seed: u64, out: Option<&Path>) -> Result<()> {
    let v = read_json(matrix)?;
    let h = if v.get("matrix").is_some() {
        serde_json::from_value(v)?
    } else {
        let rows: Vec<Vec<f64>> = serde_json::from_value(v).context("expected an array of rows")?;
        EffectiveHamiltonian::from_rows(&rows).context("matrix must be square and nonempty")?
    };
    let dense = dense_from_effective(&h, vertices)?;
    let s = sparsify(&dense, degree, method, seed)?;
    let distance = operator_distance(&dense, &s.scaled_adjacency(), 1.0)?;
    let doc = GraphDocument { spec: None, materialized: Some(Materialized::from(&s.graph)), scale: Some(s.scale) };
    emit(&doc, out)?;
    let summary = json!({
        "sizes": dense.sizes,
        "lambda": dense.lambda,
        "scale": s.scale,
        "distance": distance,
        "rewiring": s.rewiring,
    });
    if out.is_some() {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        eprintln!("{}", serde_json::to_string_pretty(&summary)?);
    }
    Ok(())
}

fn experiment(config: &Path, jobs: usize) -> Result<ExitCode> {
    let cfg = match ExperimentConfig::load(config) {
        Ok(c) => c,
        Err(e @ ExperimentError::UnknownExperiment(_)) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(2));
        }
        Err(e) => return Err(e.into()),
    };
    let report = run_experiment(&cfg, jobs)?;
    for r in &report.records {
        let params: Vec<String> = r.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let status = if r.passed { "PASS" } else { "FAIL" };
        let note = r.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default();
        println!("{status} {} {}{note}", r.experiment, params.join(" "));
    }
    if let (Some(c), Some(j)) = (&report.csv_path, &report.json_path) {
        println!("wrote {} and {}", c.display(), j.display());
    }
    let failed = report.records.iter().filter(|r| !r.passed).count();
    println!("{} records, {failed} failed", report.records.len());
    Ok(if report.all_passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate(g) => generate(g)?,
        Command::Spectrum { input, tol, out } => emit(&spectrum(&load_hamiltonian(&input)?, tol)?, out.as_deref())?,
        Command::Walk { input, trials, seed, mode, out } => walk(&input, trials, seed, mode, out.as_deref())?,
        Command::Classical { input, q, policy, trials, seed, cap, out } => {
            classical(&input, q, policy, trials, seed, cap, out.as_deref())?
        }
        Command::Sparsify { matrix, vertices, degree, method, seed, out } => {
            sparsify_cmd(&matrix, vertices, degree, method, seed, out.as_deref())?
        }
        Command::Experiment { config, jobs } => return experiment(&config, jobs),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
