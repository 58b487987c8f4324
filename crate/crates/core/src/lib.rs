//! Weighted Bergman space models for commuting tuples of matrices.
//!
//! The crate covers weight-sequence arithmetic, hereditary defect operators
//! and hypercontraction tests, dilations onto truncated weighted Bergman
//! spaces over the polydisc, and characteristic functions of pure
//! one-variable hypercontractions. Every identity is checked as a numerical
//! residual.

pub mod bergman;
pub mod charfn;
pub mod dilation;
pub mod error;
pub mod gen;
pub mod hyper;
pub mod linalg;
pub mod series;

pub use nalgebra::Complex;

pub use bergman::{KernelValue, MultishiftReport, OperatorSeries, TruncatedSpace};
pub use charfn::{CharFunction, CharTriple};
pub use dilation::{DilationResult, LambdaBlock};
pub use error::{Error, Result};
pub use hyper::{ClassificationReport, DefectResult, HyperReport, OperatorTuple};
pub use linalg::{MatrixText, PsdCertificate};
pub use series::{MultiWeightSpec, TruncatedSeries, WeightSpec};

/// Dense complex matrix; every Hilbert space map in the crate is one.
pub type Operator = nalgebra::DMatrix<Complex<f64>>;

/// Positivity tolerance for Loewner tests.
pub const POSITIVITY_TOL: f64 = 1e-8;
/// Stopping tolerance for limits.
pub const LIMIT_TOL: f64 = 1e-9;
/// Default commutation tolerance for tuples.
pub const COMMUTATION_TOL: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}
