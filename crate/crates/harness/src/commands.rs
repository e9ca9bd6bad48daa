//! Property bundles, kernel tables and invariant traces.

use std::fmt::Write as _;

use anyhow::Result;
use ntklab::invariant::{drift_study, DriftLevel, InvariantTrace};
use ntklab::limit::{fw, fz, mc_kernel};
use ntklab::network::{forward, ntk};
use ntklab::quasirandom::{run_suite, PropertyReport, SuiteConfig};
use ntklab::rng::derive_seed;
use ntklab::synth::{sample_init, sample_sphere_data};
use ntklab::tensor::min_eigen_sym;
use ntklab::{ProblemDims, RunReport, Trainer, Vector, ZInit};
use serde::{Deserialize, Serialize};

use crate::run::RunSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropsBundle {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "S")]
    pub s: usize,
    pub seed: u64,
    pub z_init: ZInit,
    #[serde(rename = "lambda_min_H0")]
    pub lambda_min_h0: f64,
    pub all_pass: bool,
    pub reports: Vec<PropertyReport>,
}

/// Samples one instance and runs every quasirandom check on it.
pub fn props_command(
    dims: ProblemDims,
    seed: u64,
    z_init: ZInit,
    suite: &SuiteConfig,
) -> Result<PropsBundle> {
    let x = sample_sphere_data(dims, seed);
    let theta0 = sample_init(dims, z_init, seed);
    let cache0 = forward(&theta0, &x, &Vector::zeros(dims.m))?;
    let suite = SuiteConfig {
        subsets: ntklab::quasirandom::SubsetSampleConfig { seed, ..suite.subsets.clone() },
        ..suite.clone()
    };
    let reports = run_suite(&x, &theta0, &cache0, dims, &suite)?;
    let lambda_min_h0 = min_eigen_sym(&ntk(&cache0, &x).h)?;
    Ok(PropsBundle {
        n: dims.n,
        m: dims.m,
        s: dims.s,
        seed,
        z_init,
        lambda_min_h0,
        all_pass: reports.iter().all(|r| r.pass_hint),
        reports,
    })
}

/// `γ = -1, -0.75, ..., 1`.
pub fn kernel_grid() -> Vec<f64> {
    (0..=8).map(|k| -1.0 + 0.25 * k as f64).collect()
}

/// CSV `gamma,fw,fz,mc_ew,mc_ez,abs_err_w,abs_err_z` with Monte Carlo
/// estimates from `num_samples` Gaussian draws in dimension `n >= 2`.
pub fn kernels_table(gammas: &[f64], n: usize, num_samples: usize, seed: u64) -> Result<String> {
    anyhow::ensure!(n >= 2, "kernel table needs n >= 2");
    let mut out = String::from("gamma,fw,fz,mc_ew,mc_ez,abs_err_w,abs_err_z\n");
    let mut x = Vector::zeros(n);
    x[0] = 1.0;
    for (k, &g) in gammas.iter().enumerate() {
        let mut xp = Vector::zeros(n);
        xp[0] = g;
        xp[1] = (1.0 - g * g).max(0.0).sqrt();
        let (ew, ez) = mc_kernel(&x, &xp, num_samples, derive_seed(seed, &[k as u64]))?;
        let (w, z) = (fw(g)?, fz(g)?);
        writeln!(out, "{g},{w},{z},{ew},{ez},{},{}", (ew - w).abs(), (ez - z).abs())?;
    }
    Ok(out)
}

pub fn invariant_csv(trace: &InvariantTrace) -> String {
    let mut out = String::from("step,min_R,max_R,drift_so_far\n");
    for (step, lo, hi, drift) in trace.csv_rows() {
        writeln!(out, "{step},{lo},{hi},{drift}").unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantOutcome {
    pub report: RunReport,
    pub csv: String,
    pub levels: Vec<DriftLevel>,
}

/// Trains once with the invariant recorded every `history_stride` steps,
/// then (if `halvings > 0` and both rates are positive) runs the
/// rate-halving drift study on the same instance.
pub fn invariant_command(spec: &RunSpec, history_stride: usize, halvings: u32) -> Result<InvariantOutcome> {
    let (data, theta0) = spec.instance()?;
    let cfg = ntklab::TrainConfig {
        history_stride,
        track_invariant: true,
        ..spec.train_config()
    };
    let mut trainer = Trainer::new(&data, theta0.clone(), cfg.clone())?;
    let report = trainer.run()?;
    let csv = invariant_csv(trainer.invariant_trace().expect("tracking enabled"));
    let levels = if halvings > 0 && spec.eta_w > 0.0 && spec.eta_z > 0.0 {
        drift_study(&data, &theta0, &cfg, halvings)?
    } else {
        Vec::new()
    };
    Ok(InvariantOutcome { report, csv, levels })
}
