//! Approximate matrix multiplication over sliding windows.
//!
//! [`socod::SlidingSketch`] tracks `X_W Y_W^T` over the last `N` column pairs
//! of unit-norm streams. [`mlsocod::LayeredSketch`] stacks sketches with
//! doubling thresholds to handle columns whose squared norms lie in `[1, R]`.
//! The [`harness`] module drives both against sampling and exact baselines, and
//! [`verify`] runs the numbered acceptance checks.

pub mod baselines;
pub mod cod;
mod codec;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod lambda;
pub mod mlsocod;
pub mod socod;
pub mod verify;

pub use cod::CodSketch;
pub use error::{Error, Result};
pub use kernels::DenseMatrix;
pub use mlsocod::LayeredSketch;
pub use socod::SlidingSketch;
