use serde::Serialize;

use super::{ReparamError, Reparametrization, TauPlus};
use crate::expr::{Compiled, Expression};
use crate::quadrature::{integrate, integrate_singular_left, integrate_to_infinity, QuadResult};

/// Default number of tau samples in the identity checks.
pub const CHECK_POINTS: usize = 50;

/// `n` tau values: `tau_minus`, then midpoints of evenly spaced table
/// intervals, so that interpolation between nodes is exercised.
pub fn tau_grid(rep: &Reparametrization, n: usize) -> Vec<f64> {
    let intervals = rep.tau.len() - 1;
    let mut grid = vec![rep.tau_minus];
    for i in 1..n {
        let k = (i * intervals / n).min(intervals - 1);
        grid.push(0.5 * (rep.tau[k] + rep.tau[k + 1]));
    }
    grid
}

fn compile_t(e: &Expression, what: &str) -> Result<Compiled, ReparamError> {
    e.compile(&["t"])
        .map_err(|err| ReparamError::InvalidArgument(format!("{what}: {err}")))
}

fn converged(r: Result<QuadResult, crate::quadrature::QuadError>, what: &str) -> Result<f64, ReparamError> {
    let r = r.map_err(|e| ReparamError::Quadrature(format!("{what}: {e}")))?;
    if r.converged {
        Ok(r.value)
    } else if r.diverged {
        Err(ReparamError::Quadrature(format!("{what} diverges")))
    } else {
        Err(ReparamError::Quadrature(format!(
            "{what} did not converge (estimate {} +- {})",
            r.value, r.abs_error_estimate
        )))
    }
}

/// `int_tau^{tau_plus} g(s) ds` for a finite or infinite right endpoint.
fn integrate_to_end<G>(rep: &Reparametrization, g: G, tau: f64, tol: f64, what: &str) -> Result<f64, ReparamError>
where
    G: Fn(f64) -> Result<f64, ReparamError>,
{
    match rep.tau_plus {
        TauPlus::Finite { value } => converged(integrate(g, tau, value, tol), what),
        TauPlus::Infinite { .. } => converged(integrate_to_infinity(g, tau, tol), what),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointSample {
    pub tau: f64,
    pub t: f64,
    pub integral: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointResult {
    pub max_residual: f64,
    pub worst_tau: f64,
    pub samples: Vec<FixedPointSample>,
}

/// Checks `t(tau) = int_tau^{tau_plus} lambda(t(s)) ds` on the default tau
/// grid, with `lambda` evaluated from the given expression.
pub fn verify_fixed_point(
    rep: &Reparametrization,
    lambda: &Expression,
    tol: f64,
) -> Result<FixedPointResult, ReparamError> {
    let lam = compile_t(lambda, "lambda")?;
    let g = |s: f64| -> Result<f64, ReparamError> {
        let t = rep.t_of_tau(s)?;
        lam.eval(&[t]).map_err(|e| super::eval_err(t, e))
    };
    let mut samples = Vec::new();
    for tau in tau_grid(rep, CHECK_POINTS) {
        let t = rep.t_of_tau(tau)?;
        let integral = integrate_to_end(rep, g, tau, tol, "int lambda(t(s)) ds")?;
        samples.push(FixedPointSample {
            tau,
            t,
            integral,
            residual: (t - integral).abs(),
        });
    }
    let worst = samples
        .iter()
        .fold(&samples[0], |w, s| if s.residual > w.residual { s } else { w });
    Ok(FixedPointResult {
        max_residual: worst.residual,
        worst_tau: worst.tau,
        samples: samples.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaL1Result {
    pub tau: f64,
    pub t: f64,
    /// `int_tau^{tau_plus} v(t(xi)) dxi`
    pub tau_side: f64,
    /// `int_0^{t(tau)} v(w) / lambda(w) dw`
    pub t_side: f64,
    pub residual: f64,
}

/// Compares the tail integral of `alpha = v o t` with `int_0^{t(tau)} v/lambda`.
pub fn alpha_l1_check(
    rep: &Reparametrization,
    v: &Expression,
    lambda: &Expression,
    tau: f64,
    tol: f64,
) -> Result<AlphaL1Result, ReparamError> {
    let (vc, lam) = (compile_t(v, "v")?, compile_t(lambda, "lambda")?);
    let alpha = |s: f64| -> Result<f64, ReparamError> {
        let t = rep.t_of_tau(s)?;
        vc.eval(&[t]).map_err(|e| super::eval_err(t, e))
    };
    let t = rep.t_of_tau(tau)?;
    let tau_side = integrate_to_end(rep, alpha, tau, tol, "int alpha")?;
    let ratio = |w: f64| -> Result<f64, String> {
        let num = vc.eval(&[w]).map_err(|e| e.to_string())?;
        if num == 0.0 {
            return Ok(0.0);
        }
        Ok(num / lam.eval(&[w]).map_err(|e| e.to_string())?)
    };
    let t_side = converged(integrate_singular_left(ratio, t, tol), "int v/lambda")?;
    Ok(AlphaL1Result {
        tau,
        t,
        tau_side,
        t_side,
        residual: (tau_side - t_side).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpReparamResult {
    pub c: f64,
    pub max_residual: f64,
    pub worst_tau: f64,
    pub passed: bool,
}

/// Checks `u(t(tau)) = c exp(-tau)` on the default tau grid, with
/// `c = u(T) exp(tau_minus)` unless given.
pub fn exp_reparam_check(
    u: &Expression,
    rep: &Reparametrization,
    c: Option<f64>,
    tol: f64,
) -> Result<ExpReparamResult, ReparamError> {
    let uc = compile_t(u, "u")?;
    let eval = |t: f64| uc.eval(&[t]).map_err(|e| super::eval_err(t, e));
    let c = match c {
        Some(c) => c,
        None => eval(rep.t_end)? * rep.tau_minus.exp(),
    };
    let (mut max_residual, mut worst_tau) = (0.0, rep.tau_minus);
    for tau in tau_grid(rep, CHECK_POINTS) {
        let residual = (eval(rep.t_of_tau(tau)?)? - c * (-tau).exp()).abs();
        if residual > max_residual {
            (max_residual, worst_tau) = (residual, tau);
        }
    }
    Ok(ExpReparamResult {
        c,
        max_residual,
        worst_tau,
        passed: max_residual < tol,
    })
}
