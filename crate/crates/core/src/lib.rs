//! Approximating orthonormal and symmetric matrices with a few Householder
//! reflectors.
//!
//! The core types are generic over the scalar (`f32` or `f64`); the `*64`
//! aliases at the crate root cover the common case.

pub mod ensemble;
pub mod error;
pub mod format;
pub mod linalg;
pub mod linesearch;
pub mod metric;
pub mod ortho;
pub mod reflector;
pub mod scalar;
pub mod sym;

pub use error::{Error, Result};
pub use reflector::{relative_error, ApproxReport, FactoredSymmetric, FlopCounter, ReflectorProduct};
pub use scalar::Real;

pub type ReflectorProduct64 = ReflectorProduct<f64>;
pub type ReflectorProduct32 = ReflectorProduct<f32>;
pub type FactoredSymmetric64 = FactoredSymmetric<f64>;
pub type FactoredSymmetric32 = FactoredSymmetric<f32>;
pub type ApproxReport64 = ApproxReport<f64>;
pub type ApproxReport32 = ApproxReport<f32>;
