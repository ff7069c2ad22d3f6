//! Minimal reverse-mode automatic differentiation.
//!
//! A [`Graph`] is a tape: every operator appends a node holding its output
//! value, and [`Graph::backward`] walks the tape in reverse accumulating
//! gradients. Only the operators a UNet needs are provided. Everything is
//! generic over [`Real`] so the same graph can run in `f32` for training
//! and in `f64` for gradient checking.

mod adam;
mod graph;
mod kernels;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use graph::{Graph, Var};
pub use tensor::Tensor;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

pub trait Real:
    num_traits::Float + AddAssign + SubAssign + MulAssign + Sum + Default + Debug + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}
