//! One training run from a derived seed.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ntklab::rng::derive_seed;
use ntklab::synth::{make_labels, sample_init, sample_sphere_data};
use ntklab::{DataSet, LabelMode, ProblemDims, RunReport, TrainConfig, ZInit};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// `hash(master_seed, S, m, repetition)`. Stable across versions.
pub fn run_seed(master_seed: u64, s: usize, m: usize, repetition: usize) -> u64 {
    derive_seed(master_seed, &[s as u64, m as u64, repetition as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub n: usize,
    #[serde(rename = "S")]
    pub s: usize,
    pub m: usize,
    pub repetition: usize,
    pub seed: u64,
    pub eta_w: f64,
    pub eta_z: f64,
    pub label_mode: LabelMode,
    pub z_init: ZInit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_success: Option<f64>,
}

impl RunSpec {
    pub fn from_config(cfg: &ExperimentConfig, s: usize, m: usize, repetition: usize) -> Self {
        Self {
            n: cfg.n,
            s,
            m,
            repetition,
            seed: run_seed(cfg.master_seed, s, m, repetition),
            eta_w: cfg.eta_w_for(s, m),
            eta_z: cfg.eta_z,
            label_mode: cfg.label_mode,
            z_init: cfg.z_init,
            max_steps: cfg.max_steps,
            eps_success: cfg.eps_success,
        }
    }

    pub fn dims(&self) -> Result<ProblemDims> {
        Ok(ProblemDims::new(self.n, self.m, self.s)?)
    }

    pub fn train_config(&self) -> TrainConfig {
        let base = TrainConfig::default();
        TrainConfig {
            eta_w: self.eta_w,
            eta_z: self.eta_z,
            max_steps: self.max_steps.unwrap_or(base.max_steps),
            eps_success: self.eps_success.unwrap_or(base.eps_success),
            ..base
        }
    }

    /// Data, labels and initialization for this run.
    pub fn instance(&self) -> Result<(DataSet, ntklab::Theta)> {
        let dims = self.dims()?;
        let x = sample_sphere_data(dims, self.seed);
        let theta0 = sample_init(dims, self.z_init, self.seed);
        let y = make_labels(self.label_mode, &x, &theta0, dims, self.seed)?;
        Ok((DataSet::new(x, y)?, theta0))
    }

    pub fn file_name(&self) -> String {
        format!("S{}_m{}_rep{:03}.json", self.s, self.m, self.repetition)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub spec: RunSpec,
    pub report: RunReport,
}

pub fn execute(spec: &RunSpec) -> Result<RunRecord> {
    let (data, theta0) = spec.instance()?;
    let report = ntklab::trainer::train(&data, theta0, spec.train_config())
        .with_context(|| format!("training S={} m={} rep={}", spec.s, spec.m, spec.repetition))?;
    log::info!(
        "S={} m={} rep={}: {:?} after {} steps",
        spec.s,
        spec.m,
        spec.repetition,
        report.status,
        report.steps
    );
    Ok(RunRecord { spec: spec.clone(), report })
}

pub fn write_record(record: &RunRecord, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(record.spec.file_name());
    let text = serde_json::to_string_pretty(record)?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn read_record(path: &Path) -> Result<RunRecord> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Runs one cell and writes `runs/<name>.json` under `output_dir`.
pub fn run_single(spec: &RunSpec, output_dir: &Path) -> Result<(RunRecord, PathBuf)> {
    let record = execute(spec)?;
    let path = write_record(&record, &output_dir.join("runs"))?;
    Ok((record, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_cell() {
        let a = run_seed(1, 100, 100, 0);
        assert_eq!(a, run_seed(1, 100, 100, 0));
        assert_ne!(a, run_seed(1, 100, 100, 1));
        assert_ne!(a, run_seed(1, 100, 200, 0));
        assert_ne!(a, run_seed(2, 100, 100, 0));
    }

    #[test]
    fn exact_fit_run() {
        let cfg = ExperimentConfig {
            n: 5,
            label_mode: LabelMode::ExactFit,
            ..Default::default()
        };
        let spec = RunSpec::from_config(&cfg, 8, 6, 0);
        let rec = execute(&spec).unwrap();
        assert_eq!(rec.report.steps, 0);
        assert_eq!(rec.report.status, ntklab::RunStatus::Converged);
    }
}
