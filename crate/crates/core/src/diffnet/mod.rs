//! Minimal differentiable network kernel: the standardized conv encoder,
//! dual Q-heads, the reward-module head, Adam, checkpoints and
//! finite-difference gradient verification.
//!
//! Training runs in `f32`; the gradient checks instantiate the same generic
//! code at `f64`. There is no general autodiff graph — just the three
//! concrete networks the agents need, with hand-written backward passes that
//! the [`gradcheck`] suite verifies against central differences.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod kernels;
pub mod layers;
pub mod net;
pub mod tensor;

use std::fmt;
use std::iter::Sum;
use std::ops::AddAssign;

pub use adam::AdamState;
pub use gradcheck::CheckReport;
pub use layers::{softmax, softmax_cross_entropy, Conv2d, Dense};
pub use net::{Backbone, ConvShape, DualHeadNet, EncoderSpec, Grads, Params, SingleHeadNet};
pub use tensor::Tensor;

/// Element type of the kernel: `f32` for training, `f64` for verification.
pub trait Scalar:
    num_traits::Float + AddAssign + Sum + Send + Sync + fmt::Debug + fmt::Display + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> f32 {
        v as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> f64 {
        v
    }

    fn to_f64(self) -> f64 {
        self
    }
}
