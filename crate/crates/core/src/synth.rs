//! Seeded random instances: spherical data, Gaussian/Rademacher
//! initialization and the label constructions used in the experiments.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{forward, ntk, Theta};
use crate::rng::{stream_rng, Stream};
use crate::tensor::{min_eigenpair_sym, Matrix, Vector};

/// Input dimension `n`, sample count `m` and hidden width `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDims {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "S")]
    pub s: usize,
}

impl ProblemDims {
    pub fn new(n: usize, m: usize, s: usize) -> Result<Self> {
        if n == 0 || m == 0 || s == 0 {
            return Err(Error::InvalidArgument(format!(
                "dimensions must be positive, got n={n} m={m} S={s}"
            )));
        }
        Ok(Self { n, m, s })
    }

    /// `log(nS)`, the polylog unit used throughout the diagnostics.
    pub fn log_ns(&self) -> f64 {
        ((self.n * self.s) as f64).ln()
    }
}

/// A regression instance: unit-norm data columns and a label per column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataSet {
    pub x: Matrix,
    pub y: Vector,
}

impl DataSet {
    pub fn new(x: Matrix, y: Vector) -> Result<Self> {
        if x.ncols() != y.len() {
            return Err(Error::Shape(format!(
                "X has {} columns but y has {} entries",
                x.ncols(),
                y.len()
            )));
        }
        for (j, col) in x.column_iter().enumerate() {
            if (col.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "column {j} of X has norm {}",
                    col.norm()
                )));
            }
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("labels"));
        }
        Ok(Self { x, y })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    Gaussian,
    LowSpectrum,
    HighSpectrum,
    Local,
    ExactFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZInit {
    Rademacher,
    Gaussian,
}

/// Columns drawn uniformly from the unit sphere by normalizing Gaussians.
pub fn sample_sphere_data(dims: ProblemDims, seed: u64) -> Matrix {
    let mut rng = stream_rng(seed, Stream::Data);
    let mut x = Matrix::zeros(dims.n, dims.m);
    for mut col in x.column_iter_mut() {
        loop {
            for v in col.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let norm = col.norm();
            if norm >= 1e-30 {
                col /= norm;
                break;
            }
        }
    }
    x
}

/// `W0` with i.i.d. standard normal entries and `z0` from `zinit`, each on
/// its own stream.
pub fn sample_init(dims: ProblemDims, zinit: ZInit, seed: u64) -> Theta {
    let mut wr = stream_rng(seed, Stream::HiddenWeights);
    let w = Matrix::from_fn(dims.s, dims.n, |_, _| wr.sample(StandardNormal));
    let mut zr = stream_rng(seed, Stream::OutputWeights);
    let z = Vector::from_fn(dims.s, |_, _| match zinit {
        ZInit::Rademacher => {
            if zr.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        ZInit::Gaussian => zr.sample(StandardNormal),
    });
    Theta { w, z }
}

/// Labels for the given mode.
///
/// Except for `Gaussian` and `ExactFit`, the mode prescribes the initial
/// error `e0` and the labels are recovered as `y = f0 - e0`.
pub fn make_labels(
    mode: LabelMode,
    x: &Matrix,
    theta0: &Theta,
    dims: ProblemDims,
    seed: u64,
) -> Result<Vector> {
    if x.shape() != (dims.n, dims.m) || theta0.w.shape() != (dims.s, dims.n) {
        return Err(Error::Shape(format!(
            "inputs do not match dims {dims:?}: X {:?}, W0 {:?}",
            x.shape(),
            theta0.w.shape()
        )));
    }
    if mode == LabelMode::Gaussian {
        let mut rng = stream_rng(seed, Stream::Labels);
        let sd = (dims.s as f64).sqrt();
        return Ok(Vector::from_fn(dims.m, |_, _| {
            sd * rng.sample::<f64, _>(StandardNormal)
        }));
    }
    let cache0 = forward(theta0, x, &Vector::zeros(dims.m))?;
    let f0 = cache0.output.clone();
    let scale = ((dims.m * dims.s) as f64).sqrt();
    let e0 = match mode {
        LabelMode::ExactFit => return Ok(f0),
        LabelMode::Gaussian => unreachable!(),
        LabelMode::LowSpectrum => {
            let h0 = ntk(&cache0, x).h;
            let (lambda, mut v) = min_eigenpair_sym(&h0)?;
            log::info!("low-spectrum labels: λ_min(H0) = {lambda}");
            if let Some(first) = v.iter().find(|c| **c != 0.0) {
                if *first < 0.0 {
                    v.neg_mut();
                }
            }
            let norm = v.norm();
            v * (scale / norm)
        }
        LabelMode::HighSpectrum => {
            (x.tr_mul(&x.column(0))) * (((dims.n * dims.s) as f64).sqrt())
        }
        LabelMode::Local => {
            let mut e = Vector::zeros(dims.m);
            e[0] = scale;
            e
        }
    };
    Ok(f0 - e0)
}
