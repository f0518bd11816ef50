//! Experiment registry: a JSON config names an experiment, its parameter grid,
//! explicit seeds and caps; the run produces one record per grid point plus
//! summary records, written as CSV and JSON.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

mod runs;

pub use runs::{linear_fit, median, Fit};

/// Registered experiment names.
pub const EXPERIMENTS: [&str; 7] = [
    "scaling_1d",
    "lieb_2d",
    "lieb_highd",
    "sparsified_welded",
    "anderson_diag",
    "classical_vs_quantum",
    "dos_dyson",
];

/// First line of every CSV file.
pub const CSV_HEADER: &str = "# hierwalk-record-v1";

/// Desk-scale ceilings; configs and `HIERWALK_CAP` can only lower them.
pub const MAX_VERTICES: usize = 1_000_000;
pub const MAX_DENSE_DIM: usize = 8000;

/// Environment variable that lowers both caps.
pub const CAP_ENV: &str = "HIERWALK_CAP";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown experiment: {0}")]
    UnknownExperiment(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    #[serde(default = "default_vertices")]
    pub vertices: usize,
    #[serde(default = "default_dense_dim")]
    pub dense_dim: usize,
}

fn default_vertices() -> usize {
    MAX_VERTICES
}

fn default_dense_dim() -> usize {
    MAX_DENSE_DIM
}

impl Default for Caps {
    fn default() -> Self {
        Caps { vertices: MAX_VERTICES, dense_dim: MAX_DENSE_DIM }
    }
}

impl Caps {
    /// Clamp to the desk-scale ceilings, then to `env` if it parses as a number.
    /// Never raises a cap.
    pub fn effective(self, env: Option<&str>) -> Caps {
        let mut c = Caps { vertices: self.vertices.min(MAX_VERTICES), dense_dim: self.dense_dim.min(MAX_DENSE_DIM) };
        if let Some(v) = env.and_then(|s| s.trim().parse::<f64>().ok()).filter(|v| *v >= 0.0) {
            let v = v as usize;
            c.vertices = c.vertices.min(v);
            c.dense_dim = c.dense_dim.min(v);
        }
        c
    }

    pub(crate) fn check_vertices(&self, n: usize) -> Result<(), String> {
        if n > self.vertices {
            return Err(format!("{n} vertices exceeds the cap {}", self.vertices));
        }
        Ok(())
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<(), String> {
        if n > self.dense_dim {
            return Err(format!("dense dimension {n} exceeds the cap {}", self.dense_dim));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// Experiment-specific parameters; missing keys take defaults.
    #[serde(default)]
    pub grid: Value,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub caps: Caps,
    /// Output path; `.csv` and `.json` siblings are written. `None` writes nothing.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// A config whose experiment name is missing, not a string or not
    /// registered (including unparseable JSON) is `UnknownExperiment`.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let v: Value = serde_json::from_str(text)
            .map_err(|e| ExperimentError::UnknownExperiment(format!("config is not valid JSON ({e})")))?;
        let name = match v.get("experiment") {
            Some(Value::String(s)) => s.clone(),
            Some(other) => return Err(ExperimentError::UnknownExperiment(other.to_string())),
            None => return Err(ExperimentError::UnknownExperiment("no experiment named".into())),
        };
        if !EXPERIMENTS.contains(&name.as_str()) {
            return Err(ExperimentError::UnknownExperiment(name));
        }
        let cfg: ExperimentConfig = serde_json::from_value(v).map_err(|e| ExperimentError::Config(e.to_string()))?;
        if cfg.seeds.is_empty() {
            return Err(ExperimentError::Config("seeds must be a nonempty list".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// One measured grid point, or a summary over several.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub params: BTreeMap<String, Value>,
    /// Finite values only; quantities that came out non-finite are listed in `note`.
    pub measured: BTreeMap<String, f64>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Seconds; kept out of the CSV so reruns are byte-identical.
    pub wall_time: f64,
}

impl ExperimentRecord {
    pub fn new(experiment: &str) -> Self {
        ExperimentRecord {
            experiment: experiment.to_string(),
            params: BTreeMap::new(),
            measured: BTreeMap::new(),
            passed: true,
            note: None,
            wall_time: 0.0,
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).expect("parameters serialize");
        self.params.insert(key.to_string(), v);
        self
    }

    pub fn put(&mut self, key: &str, value: f64) {
        if value.is_finite() {
            self.measured.insert(key.to_string(), value);
        } else {
            self.add_note(&format!("{key} = {value}"));
        }
    }

    pub fn add_note(&mut self, text: &str) {
        match &mut self.note {
            Some(n) => {
                n.push_str("; ");
                n.push_str(text);
            }
            None => self.note = Some(text.to_string()),
        }
    }

    pub fn fail(&mut self, why: &str) {
        self.passed = false;
        self.add_note(why);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.measured.get(key).copied()
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub records: Vec<ExperimentRecord>,
    pub all_passed: bool,
    pub csv_path: Option<PathBuf>,
    pub json_path: Option<PathBuf>,
}

/// Run on a pool of `jobs` threads (0 = rayon default) and write outputs.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<RunReport, ExperimentError> {
    let env = std::env::var(CAP_ENV).ok();
    let caps = cfg.caps.effective(env.as_deref());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let records = pool.install(|| runs::dispatch(cfg, caps))?;
    let all_passed = records.iter().all(|r| r.passed);
    let (csv_path, json_path) = match &cfg.out {
        Some(out) => {
            let (c, j) = write_outputs(&records, out)?;
            (Some(c), Some(j))
        }
        None => (None, None),
    };
    Ok(RunReport { records, all_passed, csv_path, json_path })
}

/// Writes `<out>.csv` and `<out>.json`, replacing any extension on `out`.
pub fn write_outputs(records: &[ExperimentRecord], out: &Path) -> Result<(PathBuf, PathBuf), ExperimentError> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let csv_path = out.with_extension("csv");
    let json_path = out.with_extension("json");
    std::fs::write(&csv_path, to_csv(records)?)?;
    std::fs::write(&json_path, serde_json::to_string_pretty(records)?)?;
    Ok((csv_path, json_path))
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Columns: experiment, the union of parameter keys, the union of measured
/// keys not already used by a parameter, passed, note.
pub fn to_csv(records: &[ExperimentRecord]) -> Result<String, ExperimentError> {
    let params: BTreeSet<&str> = records.iter().flat_map(|r| r.params.keys().map(String::as_str)).collect();
    let measured: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.measured.keys().map(String::as_str))
        .filter(|k| !params.contains(k))
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("experiment")
        .chain(params.iter().copied())
        .chain(measured.iter().copied())
        .chain(["passed", "note"])
        .collect();
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.experiment.clone()];
        row.extend(params.iter().map(|k| r.params.get(*k).map(cell).unwrap_or_default()));
        row.extend(measured.iter().map(|k| r.measured.get(*k).map(|v| v.to_string()).unwrap_or_default()));
        row.push(r.passed.to_string());
        row.push(r.note.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8");
    Ok(format!("{CSV_HEADER}\n{body}"))
}

pub fn records_from_json(text: &str) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests;
