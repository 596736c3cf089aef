//! The generalized reparametrization `u(t(tau)) = c exp(-tau) - 1/tau` and
//! the relaxed bound `|f| <= u' / (u - 1/tau^2) omega(|x|)` built on it.
//!
//! The right side `g(tau) = c exp(-tau) - 1/tau` is positive exactly where
//! `tau exp(-tau) > 1/c`, which requires `c > e`. On its valid branch `g`
//! decreases from its peak (`tau^2 exp(-tau) = 1/c`) to zero at the larger
//! root of `tau exp(-tau) = 1/c`; that root is the right endpoint. The
//! endpoint rule `tau exp(tau) = 1/c` is reported alongside as
//! `stated_tau_plus` but `g` does not vanish there.

use serde::Serialize;

use super::{ReparamError, Reparametrization, Source, TauPlus, TABLE_DEPTH, TABLE_NODES};
use crate::criteria::{CheckConfig, CriterionReport, Inequality, ProblemSpec, Witness};
use crate::expr::{parse, Compiled, Expression};
use crate::roots::{bisect, bisect_log, RootError, BISECTION_RTOL};

/// Relative accuracy of `t = u^-1(.)` (as a width in `ln t`).
const INVERSE_RTOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralizedInfo {
    pub c: f64,
    /// Root of `tau exp(tau) = 1/c`.
    pub stated_tau_plus: f64,
    /// Maximum of the right side (its value at `peak_tau`).
    pub peak_tau: f64,
    pub max_rhs: f64,
    /// Larger root of `c exp(-tau) = 1/tau`, where the right side vanishes.
    pub tau_plus: f64,
}

impl GeneralizedInfo {
    /// `c exp(-tau) - 1/tau`.
    pub fn rhs(&self, tau: f64) -> f64 {
        rhs(self.c, tau)
    }
}

fn rhs(c: f64, tau: f64) -> f64 {
    c * (-tau).exp() - 1.0 / tau
}

fn root_err(e: RootError) -> ReparamError {
    ReparamError::InvalidArgument(e.to_string())
}

type Never = std::convert::Infallible;

/// Root of `tau exp(tau) = 1/c` on `(0, inf)` by bisection.
pub fn stated_endpoint_root(c: f64) -> Result<f64, ReparamError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(ReparamError::InvalidArgument(format!("c must be positive, got {c}")));
    }
    // g(0) = -1/c < 0 and g(1/c) = (e^(1/c) - 1)/c > 0.
    bisect(
        |s: f64| Ok::<_, Never>(s * s.exp() - 1.0 / c),
        0.0,
        1.0 / c,
        BISECTION_RTOL,
    )
    .map_err(root_err)
}

fn info(c: f64) -> Result<GeneralizedInfo, ReparamError> {
    let stated_tau_plus = stated_endpoint_root(c)?;
    let e = std::f64::consts::E;
    if c <= e {
        // Where a critical point exists the sup is the (negative) peak,
        // otherwise g increases toward 0 from below.
        let max_rhs = if c >= e * e / 4.0 {
            let peak = bisect(
                |s: f64| Ok::<_, Never>(s * s * (-s).exp() - 1.0 / c),
                1e-12,
                2.0,
                BISECTION_RTOL,
            )
            .map_err(root_err)?;
            rhs(c, peak)
        } else {
            0.0
        };
        return Err(ReparamError::Degenerate {
            c,
            max_rhs,
            stated_tau_plus,
        });
    }
    // tau^2 e^-tau increases on (0, 2) and exceeds 1/c at 2 since c > e.
    let peak_tau = bisect(
        |s: f64| Ok::<_, Never>(s * s * (-s).exp() - 1.0 / c),
        1e-12,
        2.0,
        BISECTION_RTOL,
    )
    .map_err(root_err)?;
    // ln tau - tau + ln c decreases on (1, inf): positive at 1, negative at
    // 2 + 2 ln c.
    let tau_plus = bisect(
        |s: f64| Ok::<_, Never>(s.ln() - s + c.ln()),
        1.0,
        2.0 + 2.0 * c.ln(),
        BISECTION_RTOL,
    )
    .map_err(root_err)?;
    Ok(GeneralizedInfo {
        c,
        stated_tau_plus,
        peak_tau,
        max_rhs: rhs(c, peak_tau),
        tau_plus,
    })
}

/// `t in (0, t_end]` with `u(t) = target` by bisection in `ln t`.
pub(crate) fn t_from_rhs(u: &Compiled, target: f64, t_end: f64) -> Result<f64, ReparamError> {
    if !(target > 0.0) {
        return Err(ReparamError::InvalidArgument(format!(
            "right side {target} is not positive"
        )));
    }
    let eval = |t: f64| u.eval(&[t]).map_err(|e| e.to_string());
    let top = eval(t_end).map_err(|e| super::eval_err(t_end, e))?;
    if target >= top {
        return Ok(t_end);
    }
    bisect_log(|t| eval(t).map(|y| y - target), 1e-300, t_end, INVERSE_RTOL).map_err(root_err)
}

/// `tau` on the valid branch with `g(tau) = u(t)`.
pub(crate) fn tau_from_t(
    u: &Compiled,
    info: &GeneralizedInfo,
    t: f64,
    tau_minus: f64,
) -> Result<f64, ReparamError> {
    let target = u.eval(&[t]).map_err(|e| super::eval_err(t, e))?;
    let c = info.c;
    bisect(
        |s: f64| Ok::<_, Never>(rhs(c, s) - target),
        tau_minus,
        info.tau_plus,
        BISECTION_RTOL * 1e-2,
    )
    .map_err(root_err)
}

/// Builds the table of `t(tau) = u^-1(c exp(-tau) - 1/tau)` on the valid
/// branch. `tau_minus` is where the right side equals `u(T)`, or the peak
/// when the right side never reaches `u(T)` (then the table starts below T).
pub fn generalized_reparam(
    u: &Expression,
    c: f64,
    t_end: f64,
    tol: f64,
) -> Result<Reparametrization, ReparamError> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(ReparamError::InvalidArgument(format!("T must be positive, got {t_end}")));
    }
    let info = info(c)?;
    let u_c = u
        .compile(&["t"])
        .map_err(|e| ReparamError::InvalidArgument(format!("u: {e}")))?;
    let u_top = u_c.eval(&[t_end]).map_err(|e| super::eval_err(t_end, e))?;
    let mut notes = Vec::new();
    let (tau_minus, t_start) = if info.max_rhs > u_top {
        let tau_minus = bisect(
            |s: f64| Ok::<_, Never>(rhs(c, s) - u_top),
            info.peak_tau,
            info.tau_plus,
            BISECTION_RTOL * 1e-2,
        )
        .map_err(root_err)?;
        (tau_minus, t_end)
    } else {
        notes.push(format!(
            "right side peaks at {} < u(T) = {u_top}; the table starts below T",
            info.max_rhs
        ));
        (info.peak_tau, t_from_rhs(&u_c, info.max_rhs, t_end)?)
    };
    notes.push(format!(
        "valid branch tau in [{tau_minus}, {}); stated endpoint root tau*exp(tau) = 1/c is {}",
        info.tau_plus, info.stated_tau_plus
    ));
    let n = TABLE_NODES;
    let width = info.tau_plus - tau_minus;
    let mut tau = Vec::with_capacity(n);
    let mut ln_t = Vec::with_capacity(n);
    for i in 0..n {
        // Clustered toward tau_plus, where t -> 0.
        let s = if i == 0 {
            tau_minus
        } else {
            info.tau_plus - width * TABLE_DEPTH.powf(i as f64 / (n - 1) as f64)
        };
        let t = if i == 0 {
            t_start
        } else {
            t_from_rhs(&u_c, rhs(c, s), t_start)?
        };
        tau.push(s);
        ln_t.push(t.ln());
    }
    let rep = Reparametrization {
        t_end: t_start,
        tau_minus,
        tau_plus: TauPlus::Finite {
            value: info.tau_plus,
        },
        ln_t,
        tau,
        slope: Vec::new(),
        tol,
        source: Source::Generalized {
            u: u.clone(),
            u_c,
            info,
        },
        notes,
    };
    Ok(rep)
}

/// Sign of `u - 1/tau^2` over a run of consecutive grid points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignSegment {
    pub t_lo: f64,
    pub t_hi: f64,
    pub positive: bool,
    pub points: usize,
}

/// Relaxed-to-classical bound ratio `u / (u - 1/tau^2)` at one t.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRatio {
    pub t: f64,
    pub tau: f64,
    pub denominator: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxedBoundReport {
    pub report: CriterionReport,
    pub segments: Vec<SignSegment>,
    pub ratios: Vec<BoundRatio>,
}

/// Samples `|f(t, x)| <= u'(t) / (u(t) - 1/tau(t)^2) omega(|x|)` on the
/// sub-domains where the denominator is positive; negative sub-domains are
/// listed but not checked.
pub fn check_relaxed_bound(
    p: &ProblemSpec,
    rep: &Reparametrization,
    c: &CheckConfig,
) -> Result<RelaxedBoundReport, String> {
    use crate::criteria::names;
    use crate::criteria::report::Tracker;
    use crate::criteria::sample::{build, compiled};

    let u = p.require(&p.u, "u")?;
    let omega = p.require(&p.omega, "omega")?;
    if rep.generalized_info().is_none() {
        return Err("the relaxed bound needs a generalized reparametrization".into());
    }
    let du = u.differentiate("t");
    let (uc, duc, fc) = (compiled(u, &["t"]), compiled(&du, &["t"]), compiled(&p.f, &["t", "x"]));
    let omega_x = omega.substitute("r", &build::abs(&build::var("x")));
    let oc = compiled(&omega_x, &["x"]);
    let denominator = build::sub(u, &parse("1/tau^2").expect("literal"));
    let check = Inequality::Pointwise {
        lhs: build::abs(&p.f),
        rhs: build::mul(&build::div(&du, &denominator), &omega_x),
        strict: false,
    };

    let mut tracker = Tracker::new(names::BOUND, c.tol);
    let mut segments: Vec<SignSegment> = Vec::new();
    let mut ratios = Vec::new();
    let xs = c.x_grid(p.x_bound);
    for t in c.t_grid(rep.t_end()) {
        let tau = rep.tau_of_t(t).map_err(|e| e.to_string())?;
        let (ut, dut) = match (uc.eval(&[t]), duc.eval(&[t])) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                tracker.record(Witness::failed(&[("t", t), ("tau", tau)], check.clone(), e.to_string()));
                continue;
            }
        };
        let d = ut - 1.0 / (tau * tau);
        ratios.push(BoundRatio {
            t,
            tau,
            denominator: d,
            ratio: ut / d,
        });
        let positive = d > 0.0;
        match segments.last_mut() {
            Some(s) if s.positive == positive => {
                s.t_hi = t;
                s.points += 1;
            }
            _ => segments.push(SignSegment {
                t_lo: t,
                t_hi: t,
                positive,
                points: 1,
            }),
        }
        if !positive {
            tracker.skip();
            continue;
        }
        for &x in &xs {
            let at = [("t", t), ("tau", tau), ("x", x)];
            match (fc.eval(&[t, x]), oc.eval(&[x])) {
                (Ok(fv), Ok(om)) => {
                    let (lhs, rhs) = (fv.abs(), dut / d * om);
                    tracker.offer(rhs - lhs, false, || Witness::new(&at, check.clone(), lhs, rhs));
                }
                (Err(e), _) | (_, Err(e)) => {
                    tracker.record(Witness::failed(&at, check.clone(), e.to_string()))
                }
            }
        }
    }
    let mut notes = Vec::new();
    for s in segments.iter().filter(|s| !s.positive) {
        notes.push(format!(
            "u - 1/tau^2 <= 0 on t in [{}, {}] ({} points): not checked there",
            s.t_lo, s.t_hi, s.points
        ));
    }
    if !segments.iter().any(|s| s.positive) {
        notes.push("no admissible sub-domain".to_string());
    }
    notes.extend(rep.notes().iter().cloned());
    Ok(RelaxedBoundReport {
        report: CriterionReport::new(names::RELAXED, vec![tracker.finish()], notes),
        segments,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::ProblemSources;

    #[test]
    fn stated_root_for_unit_c() {
        let r = stated_endpoint_root(1.0).unwrap();
        assert!((r * r.exp() - 1.0).abs() < 1e-10);
        assert!((r - 0.567_143_290_409_783_8).abs() < 1e-11);
    }

    #[test]
    fn small_c_is_degenerate() {
        let u = parse("t").unwrap();
        for c in [1.0, 2.0, std::f64::consts::E] {
            match generalized_reparam(&u, c, 1.0, 1e-10).unwrap_err() {
                ReparamError::Degenerate { max_rhs, stated_tau_plus, .. } => {
                    assert!(max_rhs <= 0.0);
                    let s = stated_tau_plus;
                    assert!((s * s.exp() - 1.0 / c).abs() < 1e-10);
                }
                e => panic!("{e}"),
            }
        }
    }

    #[test]
    fn identity_gauge_with_c_ten() {
        let u = parse("t").unwrap();
        let rep = generalized_reparam(&u, 10.0, 1.0, 1e-10).unwrap();
        assert!(rep.is_strictly_monotone());
        let info = *rep.generalized_info().unwrap();
        // the right side vanishes at tau_plus
        assert!(info.rhs(info.tau_plus).abs() < 1e-8);
        assert_eq!(rep.t_end(), 1.0);
        for (t, tau) in rep.nodes() {
            let exact = 10.0 * (-tau).exp() - 1.0 / tau;
            assert!((t - exact).abs() < 1e-12 * exact.max(1e-300) + 1e-15, "tau = {tau}");
        }
        for tau in [rep.tau_minus() + 0.1, 2.5, 3.5] {
            let t = rep.t_of_tau(tau).unwrap();
            assert!((rep.tau_of_t(t).unwrap() - tau).abs() < 1e-8);
        }
    }

    #[test]
    fn relaxed_bound_splits_the_domain() {
        let p = ProblemSources::new("t*x").with_u("t").with_omega("r").load().unwrap();
        let rep = generalized_reparam(p.u.as_ref().unwrap(), 10.0, 1.0, 1e-10).unwrap();
        let r = check_relaxed_bound(&p, &rep, &CheckConfig::default()).unwrap();
        assert!(r.report.passed, "{:#?}", r.report);
        assert_eq!(r.segments.len(), 2);
        assert!(!r.segments[0].positive && r.segments[1].positive);
        // the relaxed bound is weaker where the denominator is in (0, u)
        assert!(r.ratios.iter().filter(|b| b.denominator > 0.0).all(|b| b.ratio > 1.0));
    }

    #[test]
    fn relaxed_bound_equality_case() {
        let base = ProblemSources::new("0").with_u("t").with_omega("r").load().unwrap();
        let rep = generalized_reparam(base.u.as_ref().unwrap(), 10.0, 1.0, 1e-10).unwrap();
        let c = CheckConfig::default();
        let probe = check_relaxed_bound(&base, &rep, &c).unwrap();
        assert!(probe.report.passed);
        // |f| = k |x| meets the bound |x| / D(t) where D is largest.
        let d_max = probe.ratios.iter().map(|b| b.denominator).fold(f64::MIN, f64::max);
        let p = ProblemSources::new(&format!("x*{:?}", 1.0 / d_max))
            .with_u("t")
            .with_omega("r")
            .load()
            .unwrap();
        let r = check_relaxed_bound(&p, &rep, &c).unwrap();
        assert!(r.report.passed);
        assert!(r.report.hypotheses[0].worst_margin.abs() < 1e-12);
    }
}
