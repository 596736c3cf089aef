//! Adaptive quadrature on finite intervals, toward a singular left
//! endpoint at `0+`, and toward `+inf`.
//!
//! Every panel is integrated with an adaptive 7/15-point Gauss-Kronrod
//! pair. The improper integrals are split into geometric panel sequences
//! whose partial sums are extrapolated with the observed panel ratio; see
//! [`integrate_singular_left`] and [`integrate_to_infinity`].

mod gauss_kronrod;
mod improper;

use serde::Serialize;
use thiserror::Error;

pub use gauss_kronrod::{integrate, integrate_with};
pub use improper::{
    integrate_singular_left, integrate_singular_left_with, integrate_to_infinity,
    integrate_to_infinity_with,
};

/// Outcome of one quadrature call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    /// `abs_error_estimate <= tol` was reached.
    pub converged: bool,
    /// The divergence heuristic fired; `value` is the last partial sum.
    pub diverged: bool,
    /// Number of Gauss-Kronrod panels evaluated.
    pub subdivisions: usize,
}

impl QuadResult {
    /// Finite value with a met tolerance.
    pub fn finite_value(&self) -> Option<f64> {
        self.converged.then_some(self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("integrand evaluation failed at {at}: {message}")]
    Evaluation { at: f64, message: String },
    #[error("non-finite integrand value {value} at {at}")]
    NonFinite { at: f64, value: f64 },
}

/// Budgets and divergence heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadOptions {
    /// Total Gauss-Kronrod panel budget per call.
    pub max_subdivisions: usize,
    /// Partial sums beyond this magnitude are declared divergent.
    pub divergence_threshold: f64,
    /// Number of consecutive geometric panels with non-decreasing
    /// contributions that is declared divergent.
    pub divergence_streak: usize,
    /// Maximum number of geometric panels for improper integrals.
    pub max_geometric_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            max_subdivisions: 10_000,
            divergence_threshold: 1e12,
            divergence_streak: 60,
            max_geometric_panels: 1000,
        }
    }
}

/// Wraps an infallible integrand.
pub fn plain<F: Fn(f64) -> f64>(f: F) -> impl Fn(f64) -> Result<f64, std::convert::Infallible> {
    move |x| Ok(f(x))
}

pub(crate) fn sample<G, E>(g: &G, x: f64) -> Result<f64, QuadError>
where
    G: Fn(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    match g(x) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(QuadError::NonFinite { at: x, value: v }),
        Err(e) => Err(QuadError::Evaluation {
            at: x,
            message: e.to_string(),
        }),
    }
}
