//! Time reparametrizations `t <-> tau` that move the singular endpoint
//! `t = 0` to `tau_plus`, and checks of their defining identities.
//!
//! The integral reparametrization is `tau(t) = tau_minus + int_t^T ds/lambda(s)`.
//! It is tabulated on a geometric t-grid and stored as `(ln t, tau)` pairs
//! with exact slopes `d ln t / d tau = -lambda(t)/t`; between nodes a
//! monotone cubic Hermite guess is polished by safeguarded Newton steps on
//! the integral definition.

mod checks;
mod generalized;
mod transform;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{Compiled, Expression};
use crate::quadrature::{integrate_singular_left, integrate_with, QuadOptions};

pub use checks::{
    alpha_l1_check, exp_reparam_check, tau_grid, verify_fixed_point, AlphaL1Result,
    ExpReparamResult, FixedPointResult,
};
pub use generalized::{
    check_relaxed_bound, generalized_reparam, stated_endpoint_root, GeneralizedInfo,
    RelaxedBoundReport, SignSegment,
};
pub use transform::{transform, TransformedField};

/// Default number of table nodes.
pub const TABLE_NODES: usize = 400;
/// The table runs from `T` down to `T * TABLE_DEPTH`.
pub const TABLE_DEPTH: f64 = 1e-8;

/// Relative accuracy of the short quadratures used by the inversion.
const TABLE_REL_TOL: f64 = 1e-14;

/// Panel budget of one `int dt/lambda` segment in `ln t`.
const LOG_PANELS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReparamError {
    #[error("lambda must be positive on (0, T], got {value} at t = {t}")]
    LambdaNotPositive { t: f64, value: f64 },
    #[error("evaluation failed at {at}: {message}")]
    Evaluation { at: f64, message: String },
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("tau = {tau} outside [{lo}, {hi})")]
    TauOutOfRange { tau: f64, lo: f64, hi: f64 },
    #[error("t = {t} outside (0, {t_end}]")]
    TOutOfRange { t: f64, t_end: f64 },
    #[error(
        "degenerate generalized reparametrization: with c = {c} the sup of c*exp(-tau) - 1/tau \
         over tau > 0 is {max_rhs}; positive values need c > e"
    )]
    Degenerate {
        c: f64,
        max_rhs: f64,
        stated_tau_plus: f64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn eval_err(at: f64, e: impl std::fmt::Display) -> ReparamError {
    ReparamError::Evaluation {
        at,
        message: e.to_string(),
    }
}

/// Right endpoint of the tau-domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TauPlus {
    Finite { value: f64 },
    /// `tau -> +inf` as `t -> 0+`; `horizon` is tau at the deepest node.
    Infinite { horizon: f64 },
}

impl TauPlus {
    pub fn finite(&self) -> Option<f64> {
        match self {
            TauPlus::Finite { value } => Some(*value),
            TauPlus::Infinite { .. } => None,
        }
    }

    /// Largest tau covered by the table (for infinite domains) or `tau_plus`.
    pub fn horizon(&self) -> f64 {
        match self {
            TauPlus::Finite { value } => *value,
            TauPlus::Infinite { horizon } => *horizon,
        }
    }

    /// Upper bound usable in comparisons (`+inf` for infinite domains).
    pub fn bound(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Source {
    Integral {
        lambda: Expression,
        lam: Compiled,
    },
    Generalized {
        u: Expression,
        u_c: Compiled,
        info: GeneralizedInfo,
    },
}

/// A tabulated strictly monotone map between `t in (0, T]` and
/// `tau in [tau_minus, tau_plus)`.
#[derive(Debug, Clone)]
pub struct Reparametrization {
    t_end: f64,
    tau_minus: f64,
    tau_plus: TauPlus,
    /// Nodes by increasing tau (decreasing t).
    ln_t: Vec<f64>,
    tau: Vec<f64>,
    /// `d ln t / d tau` at the nodes (integral source only).
    slope: Vec<f64>,
    tol: f64,
    source: Source,
    notes: Vec<String>,
}

/// Plot-ready summary of a table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReparamSummary {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub tau_minus: f64,
    pub tau_plus: TauPlus,
    pub source: String,
    pub nodes: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// `int_a^b e^s / lambda(e^s) ds`, i.e. `int_{e^a}^{e^b} dt / lambda(t)`.
fn log_integral(lam: &Compiled, a: f64, b: f64, tol: f64) -> Result<f64, ReparamError> {
    let g = |s: f64| -> Result<f64, String> {
        let t = s.exp();
        let l = lam.eval(&[t]).map_err(|e| e.to_string())?;
        if l <= 0.0 {
            return Err(format!("lambda = {l} is not positive at t = {t}"));
        }
        Ok(t / l)
    };
    // Smooth segments converge in a few panels; a small budget keeps
    // tolerances below roundoff from exhausting the default one.
    let opts = QuadOptions {
        max_subdivisions: LOG_PANELS,
        ..QuadOptions::default()
    };
    let r = integrate_with(g, a, b, tol, &opts).map_err(|e| ReparamError::Quadrature(e.to_string()))?;
    // Tolerances below roundoff cannot be met; accept roundoff-level errors.
    if r.converged || r.abs_error_estimate <= 1e-12 * r.value.abs() {
        Ok(r.value)
    } else {
        Err(ReparamError::Quadrature(format!(
            "int dt/lambda over [{}, {}] did not converge (error {})",
            a.exp(),
            b.exp(),
            r.abs_error_estimate
        )))
    }
}

fn lambda_at(lam: &Compiled, t: f64) -> Result<f64, ReparamError> {
    let l = lam.eval(&[t]).map_err(|e| eval_err(t, e))?;
    if l > 0.0 && l.is_finite() {
        Ok(l)
    } else {
        Err(ReparamError::LambdaNotPositive { t, value: l })
    }
}

/// Tabulates `tau(t) = tau_minus + int_t^T ds / lambda(s)` with the default
/// table layout.
pub fn build_tau(
    lambda: &Expression,
    t_end: f64,
    tau_minus: f64,
    tol: f64,
) -> Result<Reparametrization, ReparamError> {
    build_tau_with(lambda, t_end, tau_minus, tol, TABLE_NODES)
}

pub fn build_tau_with(
    lambda: &Expression,
    t_end: f64,
    tau_minus: f64,
    tol: f64,
    nodes: usize,
) -> Result<Reparametrization, ReparamError> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(ReparamError::InvalidArgument(format!("T must be positive, got {t_end}")));
    }
    if nodes < 2 {
        return Err(ReparamError::InvalidArgument("need at least 2 nodes".into()));
    }
    let lam = lambda
        .compile(&["t"])
        .map_err(|e| ReparamError::InvalidArgument(format!("lambda: {e}")))?;
    let ln_top = t_end.ln();
    let ln_depth = TABLE_DEPTH.ln();
    let ln_t: Vec<f64> = (0..nodes)
        .map(|i| ln_top + ln_depth * i as f64 / (nodes - 1) as f64)
        .collect();
    let mut tau: Vec<f64> = Vec::with_capacity(nodes);
    let mut slope = Vec::with_capacity(nodes);
    for (i, &s) in ln_t.iter().enumerate() {
        let t = if i == 0 { t_end } else { s.exp() };
        slope.push(-lambda_at(&lam, t)? / t);
        tau.push(if i == 0 {
            tau_minus
        } else {
            tau[i - 1] + log_integral(&lam, s, ln_t[i - 1], tol.max(TABLE_REL_TOL * tau[i - 1].abs()))?
        });
    }
    let t_last = ln_t[nodes - 1].exp();
    let inv = |w: f64| -> Result<f64, String> {
        let l = lam.eval(&[w]).map_err(|e| e.to_string())?;
        if l <= 0.0 {
            return Err(format!("lambda = {l} is not positive at t = {w}"));
        }
        Ok(1.0 / l)
    };
    let mut notes = Vec::new();
    let tail = integrate_singular_left(inv, t_last, tol)
        .map_err(|e| ReparamError::Quadrature(e.to_string()))?;
    let tau_plus = if tail.converged {
        TauPlus::Finite {
            value: tau[nodes - 1] + tail.value,
        }
    } else {
        if !tail.diverged {
            notes.push("int_0 dt/lambda did not converge; tau_plus taken as +inf".to_string());
        }
        TauPlus::Infinite {
            horizon: tau[nodes - 1],
        }
    };
    if tau.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ReparamError::Quadrature("table is not strictly monotone".into()));
    }
    Ok(Reparametrization {
        t_end,
        tau_minus,
        tau_plus,
        ln_t,
        tau,
        slope,
        tol,
        source: Source::Integral {
            lambda: lambda.clone(),
            lam,
        },
        notes,
    })
}

impl Reparametrization {
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn tau_minus(&self) -> f64 {
        self.tau_minus
    }

    pub fn tau_plus(&self) -> TauPlus {
        self.tau_plus
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    /// `(t, tau)` nodes by decreasing t.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ln_t
            .iter()
            .zip(&self.tau)
            .enumerate()
            .map(|(i, (s, tau))| (if i == 0 { self.t_end } else { s.exp() }, *tau))
    }

    /// Strictly decreasing t and strictly increasing tau along the table.
    pub fn is_strictly_monotone(&self) -> bool {
        self.ln_t.windows(2).all(|w| w[1] < w[0]) && self.tau.windows(2).all(|w| w[1] > w[0])
    }

    pub fn generalized_info(&self) -> Option<&GeneralizedInfo> {
        match &self.source {
            Source::Generalized { info, .. } => Some(info),
            Source::Integral { .. } => None,
        }
    }

    pub fn summary(&self) -> ReparamSummary {
        let source = match &self.source {
            Source::Integral { lambda, .. } => format!("lambda = {lambda}"),
            Source::Generalized { u, info, .. } => {
                format!("u(t(tau)) = {}*exp(-tau) - 1/tau, u = {u}", info.c)
            }
        };
        ReparamSummary {
            t_end: self.t_end,
            tau_minus: self.tau_minus,
            tau_plus: self.tau_plus,
            source,
            nodes: self.tau.len(),
            notes: self.notes.clone(),
        }
    }

    /// `lambda(t)` for integral tables; `None` for the generalized map.
    pub fn lambda_at(&self, t: f64) -> Option<Result<f64, ReparamError>> {
        match &self.source {
            Source::Integral { lam, .. } => Some(lambda_at(lam, t)),
            Source::Generalized { .. } => None,
        }
    }

    fn check_tau(&self, tau: f64) -> Result<(), ReparamError> {
        let hi = self.tau_plus.bound();
        if tau >= self.tau_minus && tau < hi {
            Ok(())
        } else {
            Err(ReparamError::TauOutOfRange {
                tau,
                lo: self.tau_minus,
                hi,
            })
        }
    }

    /// Inverse map `t(tau)` for `tau in [tau_minus, tau_plus)`.
    pub fn t_of_tau(&self, tau: f64) -> Result<f64, ReparamError> {
        self.check_tau(tau)?;
        if tau == self.tau_minus {
            return Ok(self.t_end);
        }
        match &self.source {
            Source::Integral { lam, .. } => self.invert_integral(lam, tau),
            Source::Generalized { u_c, info, .. } => {
                generalized::t_from_rhs(u_c, info.rhs(tau), self.t_end)
            }
        }
    }

    /// Forward map `tau(t)` for `t in (0, T]`.
    pub fn tau_of_t(&self, t: f64) -> Result<f64, ReparamError> {
        if !(t > 0.0 && t <= self.t_end) {
            return Err(ReparamError::TOutOfRange {
                t,
                t_end: self.t_end,
            });
        }
        if t == self.t_end {
            return Ok(self.tau_minus);
        }
        match &self.source {
            Source::Integral { lam, .. } => {
                let s = t.ln();
                // Nearest node at or above t (nodes have decreasing ln t).
                let k = self.ln_t.partition_point(|&x| x >= s).saturating_sub(1);
                Ok(self.tau[k] + log_integral(lam, s, self.ln_t[k], self.local_tol(self.tau[k]))?)
            }
            Source::Generalized { u_c, info, .. } => {
                generalized::tau_from_t(u_c, info, t, self.tau_minus)
            }
        }
    }

    fn local_tol(&self, tau: f64) -> f64 {
        (TABLE_REL_TOL * tau.abs().max(1.0)).max(self.tol * 1e-3)
    }

    fn invert_integral(&self, lam: &Compiled, target: f64) -> Result<f64, ReparamError> {
        let n = self.tau.len();
        let last = n - 1;
        if target <= self.tau[last] {
            // Interval k with tau[k] <= target <= tau[k + 1].
            let k = self.tau.partition_point(|&x| x <= target).saturating_sub(1).min(last - 1);
            let guess = self.hermite(k, target);
            return self.newton(lam, (self.ln_t[k], self.tau[k]), self.ln_t[k + 1], guess, target);
        }
        // Beyond the table: march down by doubling steps in ln t until tau
        // passes the target.
        let mut hi = (self.ln_t[last], self.tau[last]);
        let mut step = std::f64::consts::LN_10;
        loop {
            let floor = 1e-300f64.ln();
            let s = (hi.0 - step).max(floor);
            step *= 2.0;
            if hi.0 <= floor {
                return Err(ReparamError::TauOutOfRange {
                    tau: target,
                    lo: self.tau_minus,
                    hi: hi.1,
                });
            }
            let tau_s = hi.1 + log_integral(lam, s, hi.0, self.local_tol(hi.1))?;
            if tau_s >= target {
                let guess = hi.0 + (s - hi.0) * (target - hi.1) / (tau_s - hi.1);
                return self.newton(lam, hi, s, guess, target);
            }
            hi = (s, tau_s);
        }
    }

    /// Monotone cubic Hermite interpolation of `ln t` over `[tau_k, tau_k+1]`.
    fn hermite(&self, k: usize, tau: f64) -> f64 {
        let (x0, x1) = (self.tau[k], self.tau[k + 1]);
        let (y0, y1) = (self.ln_t[k], self.ln_t[k + 1]);
        let h = x1 - x0;
        let delta = (y1 - y0) / h;
        let (mut m0, mut m1) = (self.slope[k], self.slope[k + 1]);
        // Fritsch-Carlson limiting keeps the cubic monotone.
        let (a, b) = (m0 / delta, m1 / delta);
        if a < 0.0 || b < 0.0 {
            m0 = 0.0;
            m1 = 0.0;
        } else if a * a + b * b > 9.0 {
            let scale = 3.0 / (a * a + b * b).sqrt();
            m0 = scale * a * delta;
            m1 = scale * b * delta;
        }
        let s = (tau - x0) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * m1
    }

    /// Solves `tau(s) = target` for `s = ln t` in `[s_lo, s_hi]`, measuring
    /// tau from the anchor `(s_hi, tau_hi)`. Newton steps that leave the
    /// bracket are replaced by bisection.
    fn newton(
        &self,
        lam: &Compiled,
        (s_hi, tau_hi): (f64, f64),
        s_lo: f64,
        guess: f64,
        target: f64,
    ) -> Result<f64, ReparamError> {
        let (mut lo, mut hi) = (s_lo, s_hi);
        let mut s = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
        let tol = 1e-13 * target.abs().max(1.0);
        let qtol = self.local_tol(target);
        for _ in 0..100 {
            let tau_s = tau_hi + log_integral(lam, s, s_hi, qtol)?;
            let residual = tau_s - target;
            if residual.abs() <= tol {
                break;
            }
            // tau decreases in s.
            if residual > 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let t = s.exp();
            let dtau_ds = -t / lambda_at(lam, t)?;
            let next = s - residual / dtau_ds;
            s = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if hi - lo <= 4.0 * f64::EPSILON * s.abs().max(1.0) {
                break;
            }
        }
        Ok(s.exp())
    }
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::expr::parse;
    use proptest::prelude::*;

    fn lambda() -> impl Strategy<Value = Expression> {
        (0.3f64..3.0, 0.0f64..2.0).prop_map(|(c, p)| parse(&format!("{c}*t^{p}")).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn tau_minus_shifts_the_table(l in lambda(), t_end in 0.2f64..2.0, shift in -5.0f64..5.0, frac in 0.0f64..1.0) {
            let a = build_tau(&l, t_end, 0.0, 1e-12).unwrap();
            let b = build_tau(&l, t_end, shift, 1e-12).unwrap();
            let t = t_end * 1e-6f64.powf(frac);
            let (ta, tb) = (a.tau_of_t(t).unwrap(), b.tau_of_t(t).unwrap());
            prop_assert!((tb - ta - shift).abs() <= 1e-9 * ta.abs().max(1.0), "{ta} {tb}");
            let back = b.t_of_tau(ta + shift).unwrap();
            // dt = lambda dtau: near a finite tau_plus, t is fixed only to
            // lambda(t) times the absolute accuracy of tau.
            let lam = l.eval_with(&[("t", t)]).unwrap();
            let slack = 1e-8 * t + lam * 1e-12 * tb.abs().max(1.0);
            prop_assert!((back - t).abs() <= slack, "{back} vs {t}");
        }

        #[test]
        fn inverse_round_trips_and_is_decreasing(l in lambda(), t_end in 0.2f64..2.0, x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let rep = build_tau(&l, t_end, 0.0, 1e-12).unwrap();
            let top = rep.tau_plus().horizon().min(40.0);
            let (lo, hi) = (top * x.min(y), top * x.max(y));
            let (t_lo, t_hi) = (rep.t_of_tau(lo).unwrap(), rep.t_of_tau(hi).unwrap());
            prop_assert!(t_hi <= t_lo, "t({lo}) = {t_lo}, t({hi}) = {t_hi}");
            if hi > lo {
                prop_assert!(t_hi < t_lo);
            }
            let again = rep.tau_of_t(t_hi).unwrap();
            prop_assert!((again - hi).abs() <= 1e-8 * hi.max(1.0), "{again} vs {hi}");
        }
    }
}
