//! Two-rate gradient descent
//!
//! ```text
//! W_τ = W_{τ-1} - η_w ∇_W ℓ(θ_{τ-1})
//! z_τ = z_{τ-1} - η_z ∇_z ℓ(θ_{τ-1})
//! ```
//!
//! with the stopping rules used in the experiments: success once
//! `‖e_τ‖ < eps_success`, abort (the "safety valve") as soon as
//! `‖e_τ‖ > ‖e_{τ-1}‖`, and a hard step cap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariant::{compute_r, InvariantTrace};
use crate::network::{forward, grad_w, grad_z, ntk, ForwardCache, Theta};
use crate::synth::DataSet;
use crate::tensor::{frobenius_norm, khatri_rao_gram, max_eigen_sym, min_eigen_sym, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub eta_w: f64,
    pub eta_z: f64,
    pub eps_success: f64,
    pub max_steps: usize,
    /// `‖e‖` is recorded every `history_stride` steps (and at both ends).
    pub history_stride: usize,
    pub track_flips: bool,
    /// When set, `λ_min(H_τ)` is also evaluated every this many steps.
    pub lambda_stride: Option<usize>,
    /// Record the per-neuron invariant at every history checkpoint.
    pub track_invariant: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta_w: 1e-3,
            eta_z: 0.0,
            eps_success: 1e-3,
            max_steps: 100_000,
            history_stride: 10,
            track_flips: true,
            lambda_stride: None,
            track_invariant: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_w >= 0.0 && self.eta_z >= 0.0 && self.eta_w + self.eta_z > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rates must be nonnegative with positive sum, got ({}, {})",
                self.eta_w, self.eta_z
            )));
        }
        if !(self.eps_success > 0.0) {
            return Err(Error::InvalidArgument("eps_success must be positive".into()));
        }
        if self.history_stride == 0 || self.lambda_stride == Some(0) {
            return Err(Error::InvalidArgument("strides must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    SafetyValve,
    MaxSteps,
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: RunStatus,
    /// Set when the valve fired because the error became NaN/Inf.
    pub non_finite: bool,
    #[serde(rename = "T")]
    pub steps: usize,
    #[serde(rename = "kappa_H")]
    pub kappa_h: f64,
    #[serde(rename = "lambda_min_H0")]
    pub lambda_min_h0: f64,
    #[serde(rename = "lambda_min_HT")]
    pub lambda_min_ht: f64,
    #[serde(rename = "lambda_min_G0")]
    pub lambda_min_g0: f64,
    #[serde(rename = "lambda_min_GT")]
    pub lambda_min_gt: f64,
    /// `|D|`; `None` when flip tracking was disabled.
    #[serde(rename = "D_count")]
    pub d_count: Option<usize>,
    #[serde(rename = "kappa_D")]
    pub kappa_d: Option<f64>,
    pub flip_per_column_max: Option<usize>,
    pub flip_per_row_max: Option<usize>,
    pub w_displacement: f64,
    #[serde(rename = "kappa_W")]
    pub kappa_w: f64,
    pub z_displacement: f64,
    /// `‖(A_T - A_0) * X‖`.
    pub activation_deviation: f64,
    pub initial_error: f64,
    pub previous_error: f64,
    pub final_error: f64,
    pub error_history: Vec<(usize, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda_min_h_trace: Vec<(usize, f64)>,
    pub zero_hit_total: usize,
    pub invariant_drift: f64,
}

/// Which `(neuron, sample)` pairs have changed activation at least once.
#[derive(Debug, Clone)]
pub struct FlipTracker {
    a0: Matrix,
    ever_flipped: Vec<bool>,
    per_column: Vec<usize>,
    per_row: Vec<usize>,
    total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipStats {
    pub d_count: usize,
    pub per_column_max: usize,
    pub per_row_max: usize,
}

impl FlipTracker {
    pub fn new(a0: Matrix) -> Self {
        let (s, m) = a0.shape();
        Self {
            ever_flipped: vec![false; s * m],
            per_column: vec![0; m],
            per_row: vec![0; s],
            total: 0,
            a0,
        }
    }

    pub fn update(&mut self, a_t: &Matrix) {
        debug_assert_eq!(a_t.shape(), self.a0.shape());
        let s = self.a0.nrows();
        // column-major storage: flat index = j * S + ν
        for (idx, (now, start)) in a_t.iter().zip(self.a0.iter()).enumerate() {
            if now != start && !self.ever_flipped[idx] {
                self.ever_flipped[idx] = true;
                self.per_column[idx / s] += 1;
                self.per_row[idx % s] += 1;
                self.total += 1;
            }
        }
    }

    pub fn stats(&self) -> FlipStats {
        FlipStats {
            d_count: self.total,
            per_column_max: self.per_column.iter().copied().max().unwrap_or(0),
            per_row_max: self.per_row.iter().copied().max().unwrap_or(0),
        }
    }

    pub fn per_column_counts(&self) -> &[usize] {
        &self.per_column
    }

    pub fn per_row_counts(&self) -> &[usize] {
        &self.per_row
    }
}

/// One gradient descent step from `theta`, whose forward pass is `cache`.
pub fn step(theta: &Theta, cache: &ForwardCache, x: &Matrix, config: &TrainConfig) -> Theta {
    let mut next = theta.clone();
    if config.eta_w != 0.0 {
        next.w -= grad_w(cache, x) * config.eta_w;
    }
    if config.eta_z != 0.0 {
        next.z -= grad_z(cache) * config.eta_z;
    }
    next
}

/// `‖(A_t - A_0) * X‖`, the spectral norm of the Khatri-Rao product of the
/// activation change with the data. Evaluated through the Gram identity
/// `(K)ᵀK = (XᵀX)∘(ΔAᵀΔA)` so the `(S·n) x m` product is never formed.
pub fn activation_deviation(theta_t: &Theta, theta_0: &Theta, x: &Matrix) -> Result<f64> {
    if theta_t.w.shape() != theta_0.w.shape() {
        return Err(Error::Shape("parameter shapes differ".into()));
    }
    let a_t = (&theta_t.w * x).map(crate::network::relu_derivative);
    let a_0 = (&theta_0.w * x).map(crate::network::relu_derivative);
    activation_deviation_from(&a_t, &a_0, x)
}

fn activation_deviation_from(a_t: &Matrix, a_0: &Matrix, x: &Matrix) -> Result<f64> {
    let delta = a_t - a_0;
    if delta.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let g = khatri_rao_gram(&delta, x)?;
    Ok(max_eigen_sym(&g)?.max(0.0).sqrt())
}

/// A single training run, stepped explicitly or driven to completion with
/// [`Trainer::run`].
pub struct Trainer<'a> {
    data: &'a DataSet,
    config: TrainConfig,
    theta0: Theta,
    theta: Theta,
    cache: ForwardCache,
    activation0: Matrix,
    steps: usize,
    initial_error: f64,
    previous_error: f64,
    current_error: f64,
    flips: Option<FlipTracker>,
    history: Vec<(usize, f64)>,
    lambda_trace: Vec<(usize, f64)>,
    invariant: Option<InvariantTrace>,
    zero_hit_total: usize,
    lambda_min_h0: f64,
    lambda_min_g0: f64,
    status: Option<RunStatus>,
    non_finite: bool,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a DataSet, theta0: Theta, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let cache = forward(&theta0, &data.x, &data.y)?;
        let pair = ntk(&cache, &data.x);
        let lambda_min_h0 = min_eigen_sym(&pair.h)?;
        let lambda_min_g0 = min_eigen_sym(&pair.g)?;
        let err = cache.error.norm();
        let flips = config
            .track_flips
            .then(|| FlipTracker::new(cache.activation.clone()));
        let invariant = config
            .track_invariant
            .then(|| InvariantTrace::new(0, compute_r(&theta0, config.eta_w, config.eta_z)));
        let mut trainer = Self {
            data,
            activation0: cache.activation.clone(),
            zero_hit_total: cache.zero_hits,
            theta: theta0.clone(),
            theta0,
            cache,
            steps: 0,
            initial_error: err,
            previous_error: err,
            current_error: err,
            flips,
            history: vec![(0, err)],
            lambda_trace: Vec::new(),
            invariant,
            lambda_min_h0,
            lambda_min_g0,
            status: None,
            non_finite: false,
            config,
        };
        if trainer.config.lambda_stride.is_some() {
            trainer.lambda_trace.push((0, lambda_min_h0));
        }
        trainer.status = trainer.check_stop();
        Ok(trainer)
    }

    fn check_stop(&mut self) -> Option<RunStatus> {
        if !self.current_error.is_finite() {
            self.non_finite = true;
            return Some(RunStatus::SafetyValve);
        }
        if self.steps > 0 && self.current_error > self.previous_error {
            return Some(RunStatus::SafetyValve);
        }
        if self.current_error < self.config.eps_success {
            return Some(RunStatus::Converged);
        }
        if self.steps >= self.config.max_steps {
            return Some(RunStatus::MaxSteps);
        }
        None
    }

    /// Takes one step unless the run has already stopped; returns the
    /// terminal status once reached.
    pub fn advance(&mut self) -> Result<Option<RunStatus>> {
        if self.status.is_some() {
            return Ok(self.status);
        }
        self.theta = step(&self.theta, &self.cache, &self.data.x, &self.config);
        self.cache = forward(&self.theta, &self.data.x, &self.data.y)?;
        self.steps += 1;
        self.zero_hit_total += self.cache.zero_hits;
        self.previous_error = self.current_error;
        self.current_error = self.cache.error.norm();
        if let Some(tracker) = self.flips.as_mut() {
            tracker.update(&self.cache.activation);
        }
        self.status = self.check_stop();

        let checkpoint = self.steps % self.config.history_stride == 0 || self.status.is_some();
        if checkpoint {
            self.history.push((self.steps, self.current_error));
            if let Some(trace) = self.invariant.as_mut() {
                trace.push(self.steps, compute_r(&self.theta, self.config.eta_w, self.config.eta_z));
            }
        }
        if let Some(stride) = self.config.lambda_stride {
            if self.steps % stride == 0 && self.status.is_none() {
                let h = ntk(&self.cache, &self.data.x).h;
                self.lambda_trace.push((self.steps, min_eigen_sym(&h)?));
            }
        }
        Ok(self.status)
    }

    /// Steps until a stopping rule fires and assembles the report.
    pub fn run(&mut self) -> Result<RunReport> {
        while self.advance()?.is_none() {}
        self.report()
    }

    pub fn report(&mut self) -> Result<RunReport> {
        let status = self
            .status
            .ok_or_else(|| Error::InvalidArgument("run has not terminated".into()))?;
        let pair = ntk(&self.cache, &self.data.x);
        let lambda_min_ht = min_eigen_sym(&pair.h)?;
        let lambda_min_gt = min_eigen_sym(&pair.g)?;
        if self.config.lambda_stride.is_some() {
            if self.lambda_trace.last().map(|p| p.0) != Some(self.steps) {
                self.lambda_trace.push((self.steps, lambda_min_ht));
            }
        }
        let (s, m) = self.activation0.shape();
        let flip = self.flips.as_ref().map(FlipTracker::stats);
        let w_displacement = frobenius_norm(&(&self.theta.w - &self.theta0.w));
        let r0 = compute_r(&self.theta0, self.config.eta_w, self.config.eta_z);
        let rt = compute_r(&self.theta, self.config.eta_w, self.config.eta_z);
        let invariant_drift = (rt - r0).amax();
        Ok(RunReport {
            status,
            non_finite: self.non_finite,
            steps: self.steps,
            kappa_h: lambda_min_ht / self.lambda_min_h0,
            lambda_min_h0: self.lambda_min_h0,
            lambda_min_ht,
            lambda_min_g0: self.lambda_min_g0,
            lambda_min_gt,
            d_count: flip.map(|f| f.d_count),
            kappa_d: flip.map(|f| f.d_count as f64 / (m * s) as f64),
            flip_per_column_max: flip.map(|f| f.per_column_max),
            flip_per_row_max: flip.map(|f| f.per_row_max),
            w_displacement,
            kappa_w: w_displacement / (m as f64).sqrt(),
            z_displacement: (&self.theta.z - &self.theta0.z).norm(),
            activation_deviation: activation_deviation_from(
                &self.cache.activation,
                &self.activation0,
                &self.data.x,
            )?,
            initial_error: self.initial_error,
            previous_error: self.previous_error,
            final_error: self.current_error,
            error_history: self.history.clone(),
            lambda_min_h_trace: self.lambda_trace.clone(),
            zero_hit_total: self.zero_hit_total,
            invariant_drift,
        })
    }

    pub fn flip_stats(&self) -> Result<FlipStats> {
        self.flips
            .as_ref()
            .map(FlipTracker::stats)
            .ok_or(Error::TrackingDisabled)
    }

    pub fn flip_tracker(&self) -> Option<&FlipTracker> {
        self.flips.as_ref()
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn theta0(&self) -> &Theta {
        &self.theta0
    }

    pub fn cache(&self) -> &ForwardCache {
        &self.cache
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn status(&self) -> Option<RunStatus> {
        self.status
    }

    pub fn invariant_trace(&self) -> Option<&InvariantTrace> {
        self.invariant.as_ref()
    }
}

/// Runs gradient descent from `theta0` to termination.
pub fn train(data: &DataSet, theta0: Theta, config: TrainConfig) -> Result<RunReport> {
    Trainer::new(data, theta0, config)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Theta;
    use crate::synth::{make_labels, sample_init, sample_sphere_data, LabelMode, ProblemDims, ZInit};
    use crate::tensor::{khatri_rao, spectral_norm, Vector};
    use nalgebra::dmatrix;

    fn instance(n: usize, m: usize, s: usize, seed: u64, mode: LabelMode) -> (DataSet, Theta) {
        let d = ProblemDims::new(n, m, s).unwrap();
        let x = sample_sphere_data(d, seed);
        let t = sample_init(d, ZInit::Rademacher, seed);
        let y = make_labels(mode, &x, &t, d, seed).unwrap();
        (DataSet::new(x, y).unwrap(), t)
    }

    #[test]
    fn hand_computed_step() {
        let x = dmatrix![1.0];
        let t = Theta::new(dmatrix![1.0], Vector::from_vec(vec![1.0])).unwrap();
        let c = forward(&t, &x, &Vector::from_vec(vec![0.0])).unwrap();
        let cfg = TrainConfig { eta_w: 0.1, eta_z: 0.1, ..Default::default() };
        let next = step(&t, &c, &x, &cfg);
        assert!((next.w[(0, 0)] - 0.9).abs() < 1e-15);
        assert!((next.z[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_error_step_is_identity() {
        let (data, t) = instance(4, 5, 6, 1, LabelMode::ExactFit);
        let c = forward(&t, &data.x, &data.y).unwrap();
        let cfg = TrainConfig { eta_w: 0.1, eta_z: 0.1, ..Default::default() };
        assert_eq!(step(&t, &c, &data.x, &cfg), t);
    }

    #[test]
    fn exact_fit_stops_immediately() {
        let (data, t) = instance(5, 6, 7, 2, LabelMode::ExactFit);
        let r = train(&data, t, TrainConfig::default()).unwrap();
        assert_eq!(r.status, RunStatus::Converged);
        assert_eq!(r.steps, 0);
        assert_eq!(r.d_count, Some(0));
        assert_eq!(r.w_displacement, 0.0);
        assert_eq!(r.activation_deviation, 0.0);
    }

    #[test]
    fn frozen_layers_stay_bitwise() {
        let (data, t) = instance(6, 5, 8, 3, LabelMode::Gaussian);
        let cfg = TrainConfig { eta_w: 1e-3, eta_z: 0.0, max_steps: 50, ..Default::default() };
        let mut tr = Trainer::new(&data, t.clone(), cfg).unwrap();
        tr.run().unwrap();
        assert_eq!(tr.theta().z, t.z);

        let cfg = TrainConfig { eta_w: 0.0, eta_z: 1e-3, max_steps: 50, ..Default::default() };
        let mut tr = Trainer::new(&data, t.clone(), cfg).unwrap();
        let r = tr.run().unwrap();
        assert_eq!(tr.theta().w, t.w);
        assert_eq!(r.invariant_drift, 0.0);
        assert_eq!(r.d_count, Some(0));
    }

    #[test]
    fn swapped_rates_change_trajectory() {
        let (data, t) = instance(6, 5, 8, 4, LabelMode::Gaussian);
        let a = TrainConfig { eta_w: 2e-3, eta_z: 5e-4, max_steps: 20, ..Default::default() };
        let b = TrainConfig { eta_w: 5e-4, eta_z: 2e-3, max_steps: 20, ..Default::default() };
        let ra = train(&data, t.clone(), a).unwrap();
        let rb = train(&data, t, b).unwrap();
        assert_ne!(ra.error_history, rb.error_history);
    }

    #[test]
    fn flip_stats_monotone_and_disabled() {
        let (data, t) = instance(5, 20, 30, 5, LabelMode::Gaussian);
        let cfg = TrainConfig { eta_w: 5e-3, max_steps: 200, ..Default::default() };
        let mut tr = Trainer::new(&data, t.clone(), cfg.clone()).unwrap();
        assert_eq!(
            tr.flip_stats().unwrap(),
            FlipStats { d_count: 0, per_column_max: 0, per_row_max: 0 }
        );
        let mut last = 0;
        while tr.advance().unwrap().is_none() {
            let d = tr.flip_stats().unwrap().d_count;
            assert!(d >= last);
            last = d;
        }
        let off = TrainConfig { track_flips: false, ..cfg };
        let tr = Trainer::new(&data, t, off).unwrap();
        assert!(matches!(tr.flip_stats(), Err(Error::TrackingDisabled)));
    }

    #[test]
    fn single_crafted_flip() {
        // Neuron 0 sits just above the kink on sample 0; one step with a
        // positive error pushes it across. All other pre-activations are far
        // from zero.
        let x = Matrix::identity(2, 2);
        let w = dmatrix![1e-4, 5.0; 5.0, 5.0];
        let t = Theta::new(w, Vector::from_vec(vec![1.0, 1.0])).unwrap();
        let y = Vector::from_vec(vec![-1.0, 10.0]);
        let data = DataSet::new(x, y).unwrap();
        let cfg = TrainConfig { eta_w: 0.01, max_steps: 1, ..Default::default() };
        let mut tr = Trainer::new(&data, t, cfg).unwrap();
        tr.advance().unwrap();
        assert_eq!(
            tr.flip_stats().unwrap(),
            FlipStats { d_count: 1, per_column_max: 1, per_row_max: 1 }
        );
        // one flipped entry with a unit column: deviation is exactly 1
        let dev = activation_deviation(tr.theta(), tr.theta0(), &data.x).unwrap();
        assert!((dev - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deviation_matches_explicit_khatri_rao() {
        let (data, t) = instance(4, 6, 5, 6, LabelMode::Gaussian);
        let mut moved = t.clone();
        moved.w[(0, 0)] = -moved.w[(0, 0)];
        moved.w[(2, 1)] += 1.5;
        let a_t = (&moved.w * &data.x).map(crate::network::relu_derivative);
        let a_0 = (&t.w * &data.x).map(crate::network::relu_derivative);
        let k = khatri_rao(&(a_t - a_0), &data.x).unwrap();
        let dev = activation_deviation(&moved, &t, &data.x).unwrap();
        assert!((dev - spectral_norm(&k)).abs() < 1e-10);
        assert_eq!(activation_deviation(&t, &t, &data.x).unwrap(), 0.0);
    }

    #[test]
    fn reproducible_reports() {
        let (data, t) = instance(6, 8, 10, 7, LabelMode::Gaussian);
        let cfg = TrainConfig { eta_w: 1e-2, max_steps: 300, ..Default::default() };
        let a = train(&data, t.clone(), cfg.clone()).unwrap();
        let b = train(&data, t, cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_invariants() {
        let (data, t) = instance(10, 12, 40, 8, LabelMode::Gaussian);
        let cfg = TrainConfig { eta_w: 2e-3, eta_z: 1e-4, ..Default::default() };
        let r = train(&data, t, cfg.clone()).unwrap();
        match r.status {
            RunStatus::Converged => assert!(r.final_error < cfg.eps_success),
            RunStatus::SafetyValve => assert!(r.final_error > r.previous_error),
            RunStatus::MaxSteps => assert_eq!(r.steps, cfg.max_steps),
        }
        let d = r.d_count.unwrap();
        assert!(d <= 12 * 40);
        assert!((0.0..=1.0).contains(&r.kappa_d.unwrap()));
        assert_eq!(r.error_history.last().unwrap().0, r.steps);
        assert_eq!(r.zero_hit_total, 0);
    }

    #[test]
    fn lambda_trace_is_recorded() {
        let (data, t) = instance(6, 6, 20, 9, LabelMode::Gaussian);
        let cfg = TrainConfig { eta_w: 5e-3, lambda_stride: Some(25), ..Default::default() };
        let r = train(&data, t, cfg).unwrap();
        assert_eq!(r.lambda_min_h_trace.first().unwrap().0, 0);
        assert_eq!(r.lambda_min_h_trace.last().unwrap().0, r.steps);
        assert!(TrainConfig { eta_w: 0.0, eta_z: 0.0, ..Default::default() }.validate().is_err());
    }
}
