use super::names;
use super::report::{CriterionReport, Hypothesis, Inequality, Tracker, Witness};
use super::sample::{
    build, compiled, cumulative_integrals, gauge_hypothesis, limit_hypothesis,
    pointwise_hypothesis, LimitProxy,
};
use super::{CheckConfig, ProblemSpec};
use crate::expr::{simplify_ratio, Expression};

pub(crate) const VANISHING: &str = "vanishing";
pub(crate) const INCREASING: &str = "increasing";
pub(crate) const INTEGRAL: &str = "integral-bound";

/// Checks that `omega` is a comparison function on `(0, 1]`: `omega(0+) = 0`,
/// strictly increasing on the grid, and `int_0^r omega(s)/s ds <= r`.
pub fn check_comparison_fn(omega: &Expression, c: &CheckConfig) -> CriterionReport {
    let om = compiled(omega, &["r"]);
    let rs = c.t_grid(1.0);
    let r = build::var("r");

    let mut vanishing = Tracker::new(VANISHING, c.tol);
    let at_zero = Inequality::Pointwise {
        lhs: build::abs(omega),
        rhs: build::num(0.0),
        strict: false,
    };
    // omega(0) itself when it is defined, then along r_k = 2^-k.
    if let Ok(y) = om.eval(&[0.0]) {
        vanishing.record(Witness::new(&[("r", 0.0)], at_zero, y.abs(), 0.0));
    }
    let r_last = 0.5f64.powi(c.limit_steps as i32);
    let small = Inequality::Pointwise {
        lhs: build::abs(omega),
        rhs: build::num(c.limit_threshold),
        strict: false,
    };
    match om.eval(&[r_last]) {
        Ok(y) => vanishing.record(Witness::new(&[("r", r_last)], small, y.abs(), c.limit_threshold)),
        Err(e) => vanishing.record(Witness::failed(&[("r", r_last)], small, e.to_string())),
    }

    let mut increasing = Tracker::new(INCREASING, c.tol);
    let check = Inequality::Pointwise {
        lhs: build::rename(omega, "r", "r_prev"),
        rhs: omega.clone(),
        strict: true,
    };
    let values: Vec<_> = rs.iter().map(|&r| om.eval(&[r])).collect();
    for i in 1..rs.len() {
        let at = [("r", rs[i]), ("r_prev", rs[i - 1])];
        match (&values[i - 1], &values[i]) {
            (Ok(a), Ok(b)) => increasing.offer(b - a, true, || Witness::new(&at, check.clone(), *a, *b)),
            (Err(e), _) | (_, Err(e)) => increasing.record(Witness::failed(&at, check.clone(), e.to_string())),
        }
    }

    let mut integral = Tracker::new(INTEGRAL, c.tol);
    let check = Inequality::SingularIntegral {
        integrand: build::div(&build::rename(omega, "r", "w"), &build::var("w")),
        upper: r.clone(),
        rhs: r,
    };
    let integrand = |s: f64| om.eval(&[s]).map(|y| y / s);
    for (&r, value) in rs.iter().zip(cumulative_integrals(integrand, &rs, c.quad_tol())) {
        match value {
            Ok(v) => integral.offer(r - v, false, || Witness::new(&[("r", r)], check.clone(), v, r)),
            Err(msg) => integral.record(Witness::failed(&[("r", r)], check.clone(), msg)),
        }
    }

    CriterionReport::new(
        names::COMPARISON,
        vec![vanishing.finish(), increasing.finish(), integral.finish()],
        vec![format!("omega = {omega}")],
    )
}

/// Collapses a sub-report into one hypothesis: the smallest margin and the
/// witness of the first failing (else the worst) sub-hypothesis.
pub(crate) fn summarize(name: &str, report: &CriterionReport) -> Hypothesis {
    let worst = report
        .hypotheses
        .iter()
        .fold(None::<&Hypothesis>, |best, h| match best {
            Some(b) if b.worst_margin <= h.worst_margin => Some(b),
            _ => Some(h),
        });
    let shown = report.hypotheses.iter().find(|h| !h.passed).or(worst);
    let mut notes: Vec<String> = report
        .hypotheses
        .iter()
        .filter(|h| !h.passed)
        .map(|h| format!("{} fails", h.name))
        .collect();
    notes.extend(report.notes.iter().cloned());
    Hypothesis {
        name: name.to_string(),
        passed: report.passed,
        worst_margin: worst.map_or(f64::NAN, |h| h.worst_margin),
        witness: shown.and_then(|h| h.witness.clone()),
        evaluated: report.hypotheses.iter().map(|h| h.evaluated).sum(),
        skipped: report.hypotheses.iter().map(|h| h.skipped).sum(),
        notes,
    }
}

/// Constantin: `|f(t, x)| <= (u'/u) omega(|x|)`, `omega` a comparison
/// function, and `f / u' -> 0` uniformly as `t -> 0+`.
pub fn check_constantin(p: &ProblemSpec, c: &CheckConfig) -> CriterionReport {
    let (u, omega) = match (p.require(&p.u, "u"), p.require(&p.omega, "omega")) {
        (Ok(u), Ok(o)) => (u, o),
        (Err(e), _) | (_, Err(e)) => return CriterionReport::unavailable(names::CONSTANTIN, e),
    };
    let du = u.differentiate("t");
    let k = simplify_ratio(&du, u);
    let omega_x = omega.substitute("r", &build::abs(&build::var("x")));
    let comparison = check_comparison_fn(omega, c);
    let hypotheses = vec![
        gauge_hypothesis(&[("u", u), ("u'", &du)], &[("u", u)], p, c),
        pointwise_hypothesis(
            names::BOUND,
            &build::abs(&p.f),
            &build::mul(&k, &omega_x),
            p,
            c,
        ),
        summarize(names::COMPARISON, &comparison),
        limit_hypothesis(
            names::LIMIT,
            &[LimitProxy {
                num: p.f.clone(),
                den: du.clone(),
            }],
            p,
            c,
        ),
    ];
    CriterionReport::new(names::CONSTANTIN, hypotheses, vec![format!("u'/u = {k}")])
}

/// The gauges `(v, lambda) = (u, u/u')` under which the main theorem
/// reduces to the Constantin criterion.
pub fn reduce_to_constantin(u: &Expression) -> (Expression, Expression) {
    (u.clone(), simplify_ratio(u, &u.differentiate("t")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::ProblemSources;
    use crate::expr::parse;

    fn comparison(omega: &str) -> CriterionReport {
        check_comparison_fn(&parse(omega).unwrap(), &CheckConfig::default())
    }

    #[test]
    fn identity_is_the_equality_case() {
        let r = comparison("r");
        assert!(r.passed, "{r:#?}");
        assert!(r.hypothesis(INTEGRAL).unwrap().worst_margin.abs() <= 1e-9);
    }

    #[test]
    fn square_passes() {
        let r = comparison("r^2");
        assert!(r.passed);
        // r - r^2/2 is smallest at the smallest grid point
        let h = r.hypothesis(INTEGRAL).unwrap();
        assert!((h.worst_margin - (1e-6 - 0.5e-12)).abs() < 1e-15, "{h:?}");
    }

    #[test]
    fn square_root_fails_at_one() {
        let r = comparison("sqrt(r)");
        assert!(!r.passed);
        let h = r.hypothesis(INTEGRAL).unwrap();
        let w = h.witness.as_ref().unwrap();
        assert_eq!(w.point["r"], 1.0);
        assert!((h.worst_margin + 1.0).abs() < 1e-6);
    }

    #[test]
    fn non_monotone_and_non_vanishing_fail() {
        let r = comparison("1 + r");
        assert!(!r.hypothesis(VANISHING).unwrap().passed);
        let r = comparison("r*(1 - r)");
        assert!(!r.hypothesis(INCREASING).unwrap().passed);
    }

    #[test]
    fn divergent_integral_is_a_failure() {
        let r = comparison("1/(1 - log(r))");
        let h = r.hypothesis(INTEGRAL).unwrap();
        assert!(!h.passed && h.witness.as_ref().unwrap().error.is_some(), "{h:?}");
    }

    #[test]
    fn reductions() {
        let red = |u: &str| {
            let (v, l) = reduce_to_constantin(&parse(u).unwrap());
            (v.to_string(), l.to_string())
        };
        assert_eq!(red("t"), ("t".into(), "t".into()));
        assert_eq!(red("t^2"), ("t^2".into(), "t/2".into()));
        assert_eq!(red("exp(-1/t)").1, "t^2");
    }

    #[test]
    fn constantin_examples() {
        let c = CheckConfig::default();
        let run = |f: &str| {
            let p = ProblemSources::new(f).with_u("t").with_omega("r").load().unwrap();
            check_constantin(&p, &c)
        };
        assert!(run("0").passed);
        assert!(run("t*x").passed);
        let r = run("x/t");
        let bound = r.hypothesis(names::BOUND).unwrap();
        assert!(bound.passed && bound.worst_margin.abs() < 1e-9);
        assert!(!r.hypothesis(names::LIMIT).unwrap().passed);
    }
}
