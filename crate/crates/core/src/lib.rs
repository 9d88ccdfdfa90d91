//! Diversity of random discretized Schrödinger operators and in-context
//! learning of the linear systems they define.
//!
//! - [`operators`]: finite-difference and finite-element task distributions.
//! - [`centralizer`]: triviality of the centralizer of sampled matrix sets.
//! - [`bounds`]: closed-form lower bounds on the triviality probability.
//! - [`icl`]: a one-layer linear transformer trained on prompts from those
//!   distributions.

pub mod bounds;
pub mod centralizer;
pub mod error;
pub mod icl;
pub mod linalg;
pub mod matrix_io;
pub mod operators;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, Tolerance};
pub use operators::{Method, PotentialSpec, TaskDistribution};
pub use rng::RngStream;
