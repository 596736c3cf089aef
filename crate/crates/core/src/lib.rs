//! Numerical verification of uniqueness criteria for singular scalar
//! initial-value problems `x' + f(t, x) = 0`, `x(0) = 0`.
//!
//! The crate is organised bottom-up:
//!
//! * [`expr`] parses, evaluates and differentiates the expressions that
//!   define `f` and the gauge functions.
//! * [`quadrature`] provides adaptive and improper integrals.
//! * [`criteria`] samples the Nagumo, Athanassov, Constantin and
//!   reparametrized-gauge criteria and reports margins and witnesses.
//! * [`reparam`] builds the time changes `t <-> tau` and checks their
//!   defining identities.
//! * [`solver`] integrates the equation itself and gathers empirical
//!   evidence of (non-)uniqueness.
//! * [`cli`] loads problem files and drives everything from the `sivp`
//!   binary.

pub mod cli;
pub mod criteria;
pub mod expr;
pub mod quadrature;
pub mod reparam;
pub mod roots;
pub mod solver;
