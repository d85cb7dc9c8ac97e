use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use spectrafree_core::sparse::SolveReport;

/// Aggregate of the iterative solves a command ran.
#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct SolverSummary {
    pub solves: usize,
    pub max_iterations: usize,
    pub mean_iterations: f64,
    pub max_residual: f64,
    pub all_converged: bool,
}

impl SolverSummary {
    pub fn from_reports(reports: &[SolveReport]) -> Self {
        let solves = reports.len();
        let total: usize = reports.iter().map(|r| r.iterations).sum();
        Self {
            solves,
            max_iterations: reports.iter().map(|r| r.iterations).max().unwrap_or(0),
            mean_iterations: if solves == 0 { 0.0 } else { total as f64 / solves as f64 },
            max_residual: reports.iter().map(|r| r.residual_norm).fold(0.0, f64::max),
            all_converged: reports.iter().all(|r| r.converged),
        }
    }
}

/// What a command did, written next to its CSV outputs as `report.json`.
/// Every metric can be recomputed from the CSV files listed in `outputs`.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub command: Vec<String>,
    pub inputs: BTreeMap<String, String>,
    pub laplacian: String,
    pub nodes: usize,
    pub rng_seed: u64,
    pub methods: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub timings_ms: BTreeMap<String, f64>,
    pub solver: BTreeMap<String, SolverSummary>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
}

impl ExperimentReport {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            command: std::env::args().collect(),
            inputs: BTreeMap::new(),
            laplacian: String::new(),
            nodes: 0,
            rng_seed,
            methods: Vec::new(),
            metrics: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
            solver: BTreeMap::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
            extra: None,
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, v: f64) {
        self.metrics.insert(name.into(), v);
    }

    pub fn timing(&mut self, name: impl Into<String>, start: std::time::Instant) {
        self.timings_ms.insert(name.into(), start.elapsed().as_secs_f64() * 1e3);
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.file_name().map_or_else(|| path.display().to_string(), |f| f.to_string_lossy().into()));
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("report.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// NaN-free median; `0` for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
