//! Bracketing root finders for monotone scalar maps.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("no sign change on [{lo}, {hi}]: g(lo) = {g_lo}, g(hi) = {g_hi}")]
    NotBracketed {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },
    #[error("function evaluation failed at {at}: {message}")]
    Evaluation { at: f64, message: String },
}

/// Relative bracket width at which bisection stops.
pub const BISECTION_RTOL: f64 = 1e-12;

/// Bisection on `[lo, hi]` for a continuous `g` with a sign change.
///
/// Stops when the bracket is narrower than `rtol * max(|lo|, |hi|)` or when
/// `g` hits zero exactly.
pub fn bisect<G, E>(g: G, lo: f64, hi: f64, rtol: f64) -> Result<f64, RootError>
where
    G: Fn(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    bisect_until(g, lo, hi, |lo, hi| {
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        (hi - lo).abs() <= rtol * scale
    })
}

fn bisect_until<G, E, S>(g: G, mut lo: f64, mut hi: f64, done: S) -> Result<f64, RootError>
where
    G: Fn(f64) -> Result<f64, E>,
    E: std::fmt::Display,
    S: Fn(f64, f64) -> bool,
{
    let eval = |x: f64| {
        g(x).map_err(|e| RootError::Evaluation {
            at: x,
            message: e.to_string(),
        })
    };
    let mut g_lo = eval(lo)?;
    let g_hi = eval(hi)?;
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(RootError::NotBracketed {
            lo,
            hi,
            g_lo,
            g_hi,
        });
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if done(lo, hi) || mid == lo || mid == hi {
            return Ok(mid);
        }
        let g_mid = eval(mid)?;
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bisection on a logarithmic scale for brackets of positive numbers that
/// span many decades.
pub fn bisect_log<G, E>(g: G, lo: f64, hi: f64, rtol: f64) -> Result<f64, RootError>
where
    G: Fn(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    debug_assert!(lo > 0.0 && hi > 0.0);
    // A width of rtol in ln x is a relative width of rtol in x.
    let root = bisect_until(|s: f64| g(s.exp()), lo.ln(), hi.ln(), |a, b| (b - a).abs() <= rtol)?;
    Ok(root.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    type Never = std::convert::Infallible;

    #[test]
    fn finds_omega_constant() {
        // tau * e^tau = 1 has root W(1) = 0.5671432904097838...
        let root = bisect(|s: f64| Ok::<_, Never>(s * s.exp() - 1.0), 0.0, 1.0, 1e-15).unwrap();
        assert!((root - 0.567_143_290_409_783_8).abs() < 1e-14);
    }

    #[test]
    fn rejects_unbracketed() {
        let err = bisect(|s: f64| Ok::<_, Never>(s * s + 1.0), -1.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, RootError::NotBracketed { .. }));
    }

    #[test]
    fn log_scale_bisection() {
        let root = bisect_log(|s: f64| Ok::<_, Never>(s.ln() + 20.0), 1e-30, 1.0, 1e-14).unwrap();
        assert!(((root - (-20.0_f64).exp()) / root).abs() < 1e-12);
    }
}
