//! Per-neuron layer balance `R_ν = η_w z_ν² − η_z ‖W_ν‖²`.
//!
//! Under the continuous gradient flow `R` is conserved exactly (ReLU is
//! positively homogeneous, so `z_ν ∂ℓ/∂z_ν = ⟨W_ν, ∂ℓ/∂W_ν⟩`). A discrete
//! step changes it by `η_w η_z (η_z g_z² − η_w ‖g_W‖²)`, which is what the
//! drift measurements here pick up.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Theta;
use crate::synth::DataSet;
use crate::tensor::Vector;
use crate::trainer::{RunStatus, TrainConfig, Trainer};

pub fn compute_r(theta: &Theta, eta_w: f64, eta_z: f64) -> Vector {
    Vector::from_fn(theta.width(), |nu, _| {
        eta_w * theta.z[nu].powi(2) - eta_z * theta.w.row(nu).norm_squared()
    })
}

/// `R` sampled at training checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantTrace {
    pub checkpoints: Vec<(usize, Vector)>,
    pub drift_max: f64,
    pub drift_mean: f64,
}

impl InvariantTrace {
    pub fn new(step: usize, r0: Vector) -> Self {
        Self {
            checkpoints: vec![(step, r0)],
            drift_max: 0.0,
            drift_mean: 0.0,
        }
    }

    pub fn push(&mut self, step: usize, r: Vector) {
        let d = &r - &self.checkpoints[0].1;
        self.drift_max = d.amax();
        self.drift_mean = d.iter().map(|v| v.abs()).sum::<f64>() / d.len().max(1) as f64;
        self.checkpoints.push((step, r));
    }

    /// Rows of `(step, min_R, max_R, drift_so_far)`.
    pub fn csv_rows(&self) -> Vec<(usize, f64, f64, f64)> {
        let r0 = &self.checkpoints[0].1;
        let mut so_far: f64 = 0.0;
        self.checkpoints
            .iter()
            .map(|(step, r)| {
                so_far = so_far.max((r - r0).amax());
                (*step, r.min(), r.max(), so_far)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftLevel {
    /// `2^-k`.
    pub eta_scale: f64,
    pub drift_max: f64,
    /// `max_ν |R_ν(0)|` at the base rates.
    pub r0_max: f64,
    pub status: RunStatus,
    pub steps: usize,
    /// Excluded from ratio checks (the safety valve fired).
    pub flagged: bool,
}

/// Trains at rates `(η_w, η_z)·2^-k` for `k = 0..=halvings`, scaling the step
/// budget by `2^k`, and records the drift of `R` at each level.
///
/// `R` is always evaluated with the base rates from `config`, i.e. it is the
/// flow invariant in physical time `η·τ`; its drift then shrinks linearly
/// with the step size.
pub fn drift_study(
    data: &DataSet,
    theta0: &Theta,
    config: &TrainConfig,
    halvings: u32,
) -> Result<Vec<DriftLevel>> {
    if !(config.eta_w > 0.0 && config.eta_z > 0.0) {
        return Err(Error::InvalidArgument(
            "drift study needs both learning rates positive".into(),
        ));
    }
    let r0 = compute_r(theta0, config.eta_w, config.eta_z);
    (0..=halvings)
        .map(|k| {
            let scale = 0.5f64.powi(k as i32);
            let cfg = TrainConfig {
                eta_w: config.eta_w * scale,
                eta_z: config.eta_z * scale,
                max_steps: config.max_steps.saturating_mul(1 << k),
                track_flips: false,
                ..config.clone()
            };
            let mut trainer = Trainer::new(data, theta0.clone(), cfg)?;
            let status = loop {
                if let Some(s) = trainer.advance()? {
                    break s;
                }
            };
            let rt = compute_r(trainer.theta(), config.eta_w, config.eta_z);
            Ok(DriftLevel {
                eta_scale: scale,
                drift_max: (rt - &r0).amax(),
                r0_max: r0.amax(),
                status,
                steps: trainer.steps(),
                flagged: status == RunStatus::SafetyValve,
            })
        })
        .collect()
}
