//! Improper integrals by geometric panel sequences.
//!
//! Toward a singular left endpoint the panels are `[b 2^-(k+1), b 2^-k]`;
//! toward infinity they are `[a + 2^k - 1, a + 2^(k+1) - 1]`. For power-law
//! behaviour the panel contributions form a geometric series, so the
//! remaining tail is estimated as `c_k r / (1 - r)` with `r = c_k / c_{k-1}`.
//! The error estimate is the change of the extrapolated total between two
//! consecutive panels plus the summed panel errors.

use super::gauss_kronrod::adaptive;
use super::{QuadError, QuadOptions, QuadResult};

/// Relative slack below which a shrinking contribution still counts as
/// "non-decreasing" for the divergence streak.
const STREAK_SLACK: f64 = 1e-9;

/// Panels stop refining once their error is at this relative level, so that
/// roundoff cannot exhaust the budget on large contributions.
const PANEL_REL_FLOOR: f64 = 1e-13;

fn geometric_series<G, E, P>(
    g: &G,
    tol: f64,
    options: &QuadOptions,
    panel: P,
) -> Result<QuadResult, QuadError>
where
    G: Fn(f64) -> Result<f64, E>,
    E: std::fmt::Display,
    P: Fn(usize) -> Option<(f64, f64)>,
{
    let mut partial = 0.0;
    let mut panel_error = 0.0;
    let mut used = 0;
    let mut previous: Option<f64> = None;
    let mut previous_estimate: Option<f64> = None;
    let mut streak = 1;
    let mut consecutive_ok = 0;
    let mut estimate = 0.0;
    let mut error = f64::INFINITY;

    for k in 0..options.max_geometric_panels {
        let Some((a, b)) = panel(k) else { break };
        let remaining = options.max_subdivisions.saturating_sub(used);
        if remaining == 0 {
            break;
        }
        let panel_tol = tol / (4.0 * ((k + 1) * (k + 1)) as f64);
        let r = adaptive(g, a, b, panel_tol, PANEL_REL_FLOOR, remaining)?;
        used += r.subdivisions;
        let c = r.value;
        partial += c;
        panel_error += r.abs_error_estimate;

        if partial.abs() > options.divergence_threshold {
            return Ok(diverged(partial, used));
        }
        if let Some(prev) = previous {
            let non_decreasing = c != 0.0
                && c.signum() == prev.signum()
                && c.abs() >= prev.abs() * (1.0 - STREAK_SLACK);
            streak = if non_decreasing { streak + 1 } else { 1 };
            if streak >= options.divergence_streak {
                return Ok(diverged(partial, used));
            }
        }

        // Tail extrapolation from the last two contributions.
        let (tail, tail_uncertainty) = match previous {
            _ if c == 0.0 => (0.0, 0.0),
            Some(prev) if prev != 0.0 => {
                let ratio = c / prev;
                if (0.0..1.0).contains(&ratio) {
                    (c * ratio / (1.0 - ratio), 0.0)
                } else {
                    (0.0, c.abs())
                }
            }
            _ => (0.0, c.abs()),
        };
        estimate = partial + tail;
        error = match previous_estimate {
            Some(prev_est) => (estimate - prev_est).abs() + tail_uncertainty + panel_error,
            None => f64::INFINITY,
        };
        consecutive_ok = if error <= tol { consecutive_ok + 1 } else { 0 };
        if consecutive_ok >= 2 && k >= 3 {
            return Ok(QuadResult {
                value: estimate,
                abs_error_estimate: error,
                converged: true,
                diverged: false,
                subdivisions: used,
            });
        }
        previous = Some(c);
        previous_estimate = Some(estimate);
    }
    Ok(QuadResult {
        value: estimate,
        abs_error_estimate: error,
        converged: false,
        diverged: false,
        subdivisions: used,
    })
}

fn diverged(partial: f64, used: usize) -> QuadResult {
    QuadResult {
        value: partial,
        abs_error_estimate: f64::INFINITY,
        converged: false,
        diverged: true,
        subdivisions: used,
    }
}

/// Integrates `g` over `(0, b]` where `g` may blow up at `0+`.
pub fn integrate_singular_left<G, E>(g: G, b: f64, tol: f64) -> Result<QuadResult, QuadError>
where
    G: Fn(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    integrate_singular_left_with(g, b, tol, &QuadOptions::default())
}

pub fn integrate_singular_left_with<G, E>(
    g: G,
    b: f64,
    tol: f64,
    options: &QuadOptions,
) -> Result<QuadResult, QuadError>
where
    G: Fn(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    assert!(b > 0.0, "upper limit must be positive, got {b}");
    geometric_series(&g, tol, options, |k| {
        let hi = b * 0.5f64.powi(k as i32);
        let lo = 0.5 * hi;
        (lo > f64::MIN_POSITIVE * 1e10).then_some((lo, hi))
    })
}

/// Integrates `g` over `[a, +inf)`.
pub fn integrate_to_infinity<G, E>(g: G, a: f64, tol: f64) -> Result<QuadResult, QuadError>
where
    G: Fn(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    integrate_to_infinity_with(g, a, tol, &QuadOptions::default())
}

pub fn integrate_to_infinity_with<G, E>(
    g: G,
    a: f64,
    tol: f64,
    options: &QuadOptions,
) -> Result<QuadResult, QuadError>
where
    G: Fn(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    geometric_series(&g, tol, options, |k| {
        let lo = a + (2.0f64.powi(k as i32) - 1.0);
        let hi = a + (2.0f64.powi(k as i32 + 1) - 1.0);
        (hi.is_finite() && hi > lo).then_some((lo, hi))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::plain;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn inverse_square_root_singularity() {
        let r = integrate_singular_left(plain(|w: f64| 1.0 / w.sqrt()), 1.0, 1e-10).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn bounded_integrand() {
        let r = integrate_singular_left(plain(|_| 1.0), 1.0, 1e-12).unwrap();
        assert!(r.converged && (r.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn log_divergence_is_flagged() {
        let r = integrate_singular_left(plain(|w: f64| 1.0 / w), 1.0, 1e-10).unwrap();
        assert!(r.diverged && !r.converged);
    }

    #[test]
    fn logarithmic_singularity_converges() {
        // int_0^1 ln w dw = -1
        let r = integrate_singular_left(plain(|w: f64| w.ln()), 1.0, 1e-10).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value + 1.0).abs() < 1e-9);
    }

    #[test]
    fn exponential_tail() {
        let r = integrate_to_infinity(plain(|s: f64| (-s).exp()), 0.0, 1e-10).unwrap();
        assert!(r.converged && (r.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn arctangent_tail() {
        let r = integrate_to_infinity(plain(|s: f64| 1.0 / (1.0 + s * s)), 0.0, 1e-10).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value - FRAC_PI_2).abs() < 1e-8);
    }

    #[test]
    fn harmonic_tail_diverges() {
        let r = integrate_to_infinity(plain(|s: f64| 1.0 / (1.0 + s)), 0.0, 1e-10).unwrap();
        assert!(r.diverged);
    }

    #[test]
    fn positive_integrand_gives_positive_value() {
        let r = integrate_singular_left(plain(|w: f64| w.powf(-0.9)), 0.5, 1e-9).unwrap();
        assert!(r.value > 0.0);
        // int_0^b w^-0.9 dw = 10 b^0.1
        assert!((r.value - 10.0 * 0.5f64.powf(0.1)).abs() < 1e-8, "{r:?}");
    }
}
