//! Two-rate gradient descent for depth-2 ReLU regression networks, together
//! with the neural tangent kernel diagnostics used to study its convergence.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense matrix utilities, the Hadamard and column-wise
//!   Khatri-Rao products, norms and extremal eigen/singular values.
//! - [`synth`]: seeded random data, initialization and label generation.
//! - [`network`]: forward pass, loss, layer gradients and the NTK pair `(H, G)`.
//! - [`trainer`]: the gradient descent loop with its stopping rules and
//!   end-of-run control quantities.
//! - [`quasirandom`]: measurable statistics for the random-instance properties.
//! - [`limit`]: closed-form infinite-width kernels and their Monte Carlo checks.
//! - [`invariant`]: the per-neuron layer-balance quantity and its drift.

pub mod error;
pub mod invariant;
pub mod limit;
pub mod network;
pub mod quasirandom;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use network::{ForwardCache, NtkPair, Theta};
pub use synth::{DataSet, LabelMode, ProblemDims, ZInit};
pub use tensor::{Matrix, Vector};
pub use trainer::{RunReport, RunStatus, TrainConfig, Trainer};
