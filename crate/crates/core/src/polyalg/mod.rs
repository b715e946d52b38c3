//! Floating-point sparse multivariate polynomials and semialgebraic sets.

mod monomial;
mod polynomial;
mod semialgebraic;

pub use monomial::{count_up_to, Monomial};
pub use polynomial::{var_names, Polynomial, DEFAULT_DROP_TOL};
pub use semialgebraic::{ball_poly, rescale, unscale, Scaling, SemialgebraicSet};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("exponent vector has length {got}, expected {expected}")]
    ExponentLength { expected: usize, got: usize },
    #[error("variable lists differ: {left:?} vs {right:?}")]
    VariableMismatch { left: Vec<String>, right: Vec<String> },
    #[error("variable {0} not present in target list")]
    UnknownVariable(String),
    #[error("scaling half-width must be positive, got {0}")]
    NonPositiveHalfWidth(f64),
}
