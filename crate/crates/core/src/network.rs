//! The depth-2 ReLU model `f(θ) = σ(WX)ᵀ z`, its quadratic loss, layer-wise
//! gradients and the two components of the neural tangent kernel.
//!
//! Data instances are the *columns* of `X` (`n x m`), hidden weights are the
//! rows of `W` (`S x n`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{gram, hadamard, Matrix, Vector};

/// Network parameters: hidden layer `w` (`S x n`) and output layer `z` (`S`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub w: Matrix,
    pub z: Vector,
}

impl Theta {
    pub fn new(w: Matrix, z: Vector) -> Result<Self> {
        if w.nrows() != z.len() {
            return Err(Error::Shape(format!(
                "W has {} rows but z has {} entries",
                w.nrows(),
                z.len()
            )));
        }
        if !w.iter().chain(z.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("theta"));
        }
        Ok(Self { w, z })
    }

    pub fn width(&self) -> usize {
        self.z.len()
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }
}

/// Everything derived from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `WX`, kept for flip tracking and regularity checks.
    pub preactivation: Matrix,
    /// `F = σ(WX)`.
    pub hidden: Matrix,
    /// `f = Fᵀz`.
    pub output: Vector,
    /// `e = f - y`.
    pub error: Vector,
    /// `A = σ'(WX)` with entries in {0, 1}.
    pub activation: Matrix,
    /// `B = diag(z) A`.
    pub weighted_activation: Matrix,
    /// Number of exact zeros in `WX`; each is treated as inactive.
    pub zero_hits: usize,
}

/// The NTK pair `H = (XᵀX)∘(BᵀB)` and `G = FᵀF`.
#[derive(Debug, Clone)]
pub struct NtkPair {
    pub h: Matrix,
    pub g: Matrix,
}

/// ReLU derivative with the kink resolved as inactive: `σ'(0) = 0`.
#[inline]
pub fn relu_derivative(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn forward(theta: &Theta, x: &Matrix, y: &Vector) -> Result<ForwardCache> {
    if theta.input_dim() != x.nrows() {
        return Err(Error::Shape(format!(
            "W is {:?} but X has {} rows",
            theta.w.shape(),
            x.nrows()
        )));
    }
    if y.len() != x.ncols() {
        return Err(Error::Shape(format!(
            "y has {} entries but X has {} columns",
            y.len(),
            x.ncols()
        )));
    }
    let preactivation = &theta.w * x;
    let zero_hits = preactivation.iter().filter(|&&v| v == 0.0).count();
    if zero_hits > 0 {
        log::debug!("forward pass hit {zero_hits} exact zero pre-activations");
    }
    let hidden = preactivation.map(|v| v.max(0.0));
    let activation = preactivation.map(relu_derivative);
    let mut weighted_activation = activation.clone();
    for (mut row, &zv) in weighted_activation.row_iter_mut().zip(theta.z.iter()) {
        row *= zv;
    }
    let output = hidden.tr_mul(&theta.z);
    let error = &output - y;
    Ok(ForwardCache {
        preactivation,
        hidden,
        output,
        error,
        activation,
        weighted_activation,
        zero_hits,
    })
}

/// `½‖e‖²`.
pub fn loss(cache: &ForwardCache) -> f64 {
    0.5 * cache.error.norm_squared()
}

/// First-layer gradient as an `S x n` matrix.
///
/// Row `ν` is `z[ν] Σ_j A[ν,j] e[j] X^jᵀ`, i.e. the `(ν, ·)` block of
/// `(B * X) e` laid out row-major over neurons.
pub fn grad_w(cache: &ForwardCache, x: &Matrix) -> Matrix {
    let mut scaled = cache.weighted_activation.clone();
    for (mut col, &ej) in scaled.column_iter_mut().zip(cache.error.iter()) {
        col *= ej;
    }
    scaled * x.transpose()
}

/// Second-layer gradient `F e`.
pub fn grad_z(cache: &ForwardCache) -> Vector {
    &cache.hidden * &cache.error
}

pub fn ntk(cache: &ForwardCache, x: &Matrix) -> NtkPair {
    let xtx = gram(x);
    NtkPair {
        h: xtx.component_mul(&gram(&cache.weighted_activation)),
        g: gram(&cache.hidden),
    }
}

/// First-layer NTK restricted to the neurons in `gamma`.
pub fn restricted_ntk_h(cache: &ForwardCache, x: &Matrix, gamma: &[usize]) -> Result<Matrix> {
    if gamma.is_empty() {
        return Err(Error::InvalidArgument("neuron subset is empty".into()));
    }
    let s = cache.weighted_activation.nrows();
    if let Some(&bad) = gamma.iter().find(|&&nu| nu >= s) {
        return Err(Error::InvalidArgument(format!("neuron {bad} out of range 0..{s}")));
    }
    let b_gamma = cache.weighted_activation.select_rows(gamma.iter());
    hadamard(&gram(x), &gram(&b_gamma))
}
