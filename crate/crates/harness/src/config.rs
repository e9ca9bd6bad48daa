//! Experiment configuration as read from JSON.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ntklab::{LabelMode, ZInit};
use serde::{Deserialize, Serialize};

/// Named sample-count grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MPreset {
    /// `m = 100, 100 + S/10, ..., 1000` for each width.
    #[serde(rename = "paper-grid")]
    PaperGrid,
    /// `m = 100, 200, ..., 1000`.
    #[serde(rename = "paper-table")]
    PaperTable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MRule {
    Explicit(Vec<usize>),
    Preset(MPreset),
}

impl MRule {
    pub fn values_for(&self, s: usize) -> Vec<usize> {
        match self {
            MRule::Explicit(v) => v.clone(),
            MRule::Preset(MPreset::PaperTable) => (1..=10).map(|k| 100 * k).collect(),
            MRule::Preset(MPreset::PaperGrid) => {
                let step = (s / 10).max(1);
                (100..=1000).step_by(step).collect()
            }
        }
    }

    /// Parses a CLI value: a preset name or a comma-separated list.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "paper-grid" => Ok(MRule::Preset(MPreset::PaperGrid)),
            "paper-table" => Ok(MRule::Preset(MPreset::PaperTable)),
            _ => Ok(MRule::Explicit(parse_list(s)?)),
        }
    }
}

pub fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad integer {t:?}")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    #[serde(rename = "S_list")]
    pub s_list: Vec<usize>,
    pub m_rule: MRule,
    #[serde(default = "default_eta_w")]
    pub eta_w_default: f64,
    #[serde(default)]
    pub eta_z: f64,
    /// `(S, m_min, eta_w)`: use `eta_w` for width `S` once `m >= m_min`.
    #[serde(default = "default_overrides")]
    pub rate_overrides: Vec<(usize, usize, f64)>,
    #[serde(default = "default_label_mode")]
    pub label_mode: LabelMode,
    #[serde(default = "default_z_init")]
    pub z_init: ZInit,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_success: Option<f64>,
}

fn default_eta_w() -> f64 {
    1e-3
}

fn default_overrides() -> Vec<(usize, usize, f64)> {
    vec![(500, 900, 5e-4), (1000, 900, 2e-4)]
}

fn default_label_mode() -> LabelMode {
    LabelMode::Gaussian
}

fn default_z_init() -> ZInit {
    ZInit::Rademacher
}

fn default_repetitions() -> usize {
    10
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 100,
            s_list: vec![100],
            m_rule: MRule::Explicit(vec![100]),
            eta_w_default: default_eta_w(),
            eta_z: 0.0,
            rate_overrides: default_overrides(),
            label_mode: default_label_mode(),
            z_init: default_z_init(),
            repetitions: default_repetitions(),
            master_seed: 0,
            output_dir: default_output_dir(),
            max_steps: None,
            eps_success: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            bail!("n must be positive");
        }
        if self.repetitions == 0 {
            bail!("repetitions must be at least 1");
        }
        if self.s_list.is_empty() || self.s_list.contains(&0) {
            bail!("S_list must be nonempty and positive");
        }
        if self.rate_overrides.iter().any(|&(_, _, eta)| !(eta > 0.0)) {
            bail!("every override rate must be positive");
        }
        if !(self.eta_w_default >= 0.0 && self.eta_z >= 0.0) {
            bail!("learning rates must be nonnegative");
        }
        Ok(())
    }

    /// First-layer rate for width `s` and sample count `m`.
    pub fn eta_w_for(&self, s: usize, m: usize) -> f64 {
        self.rate_overrides
            .iter()
            .find(|&&(os, m_min, _)| os == s && m >= m_min)
            .map_or(self.eta_w_default, |&(_, _, eta)| eta)
    }

    /// All `(S, m)` cells in output order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut cells: Vec<(usize, usize)> = self
            .s_list
            .iter()
            .flat_map(|&s| self.m_rule.values_for(s).into_iter().map(move |m| (s, m)))
            .collect();
        cells.sort_unstable();
        cells.dedup();
        cells
    }
}
