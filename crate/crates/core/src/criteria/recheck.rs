use std::collections::BTreeMap;

use serde::Serialize;

use super::report::{ser_f64, violates, Inequality, Witness};
use crate::expr::{parse, Expression};
use crate::quadrature::integrate_singular_left;

/// Quadrature tolerance for re-evaluating integral witnesses.
const RECHECK_QUAD_TOL: f64 = 1e-11;

/// Independent re-evaluation of a witness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recheck {
    #[serde(serialize_with = "ser_f64")]
    pub lhs: f64,
    #[serde(serialize_with = "ser_f64")]
    pub rhs: f64,
    #[serde(serialize_with = "ser_f64")]
    pub margin: f64,
    pub violated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Re-parses the witness inequality from its text form and evaluates it at
/// the witness point. Fails only for witnesses without an inequality.
pub fn recheck_witness(w: &Witness, tol: f64) -> Result<Recheck, String> {
    let reparse = |e: &Expression| parse(&e.to_string()).map_err(|err| format!("`{e}`: {err}"));
    let outcome = match &w.check {
        Inequality::Insufficient { reason } => return Err(format!("not re-evaluable: {reason}")),
        Inequality::Pointwise { lhs, rhs, .. } => {
            let (lhs, rhs) = (reparse(lhs)?, reparse(rhs)?);
            lhs.eval(&w.point)
                .and_then(|l| Ok((l, rhs.eval(&w.point)?)))
                .map(|(l, r)| (l, r, r - l))
                .map_err(|e| e.to_string())
        }
        Inequality::SingularIntegral {
            integrand,
            upper,
            rhs,
        } => {
            let (integrand, upper, rhs) = (reparse(integrand)?, reparse(upper)?, reparse(rhs)?);
            singular_integral(&integrand, &upper, &w.point).and_then(|value| {
                let r = rhs.eval(&w.point).map_err(|e| e.to_string())?;
                Ok((value, r, r - value))
            })
        }
        Inequality::Integrable { integrand, upper } => {
            let (integrand, upper) = (reparse(integrand)?, reparse(upper)?);
            let b = upper.eval(&w.point).map_err(|e| e.to_string())?;
            let point = std::cell::RefCell::new(w.point.clone());
            integrate_singular_left(
                |s: f64| {
                    let mut p = point.borrow_mut();
                    p.insert("w".to_string(), s);
                    // Ratios of underflowed gauges count as zero.
                    match integrand.eval(&p) {
                        Err(crate::expr::ExprError::DivisionByZero) => Ok(0.0),
                        other => other,
                    }
                },
                b,
                RECHECK_QUAD_TOL,
            )
            .map(|r| {
                if r.converged {
                    (r.value, f64::INFINITY, 1.0)
                } else {
                    (f64::INFINITY, f64::INFINITY, -1.0)
                }
            })
            .map_err(|e| e.to_string())
        }
    };
    Ok(match outcome {
        Ok((lhs, rhs, margin)) => Recheck {
            lhs,
            rhs,
            margin,
            violated: violates(&w.check, margin, false, tol),
            error: None,
        },
        Err(e) => Recheck {
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NEG_INFINITY,
            violated: true,
            error: Some(e),
        },
    })
}

fn singular_integral(
    integrand: &Expression,
    upper: &Expression,
    point: &BTreeMap<String, f64>,
) -> Result<f64, String> {
    let b = upper.eval(point).map_err(|e| e.to_string())?;
    let cell = std::cell::RefCell::new(point.clone());
    let r = integrate_singular_left(
        |s: f64| {
            let mut p = cell.borrow_mut();
            p.insert("w".to_string(), s);
            integrand.eval(&p)
        },
        b,
        RECHECK_QUAD_TOL,
    )
    .map_err(|e| e.to_string())?;
    if r.converged {
        Ok(r.value)
    } else if r.diverged {
        Err(format!("integral diverges on (0, {b}]"))
    } else {
        Err(format!("integral did not converge on (0, {b}]"))
    }
}
