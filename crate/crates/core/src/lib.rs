//! Numerical laboratory for bistable reaction–diffusion fronts crossing a
//! compact transition zone between two nonlinearities.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envelopes;
pub mod error;
pub mod frontmetrics;
pub mod interp;
pub mod linalg;
pub mod lyapunov;
pub mod pde;
pub mod reaction;
pub mod store;
pub mod waves;

pub use error::{Error, Result};
