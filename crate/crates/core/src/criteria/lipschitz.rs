use super::names;
use super::report::CriterionReport;
use super::sample::{build, gauge_hypothesis, limit_hypothesis, lipschitz_hypothesis, LimitProxy};
use super::{CheckConfig, ProblemSpec};
use crate::expr::{parse, simplify_ratio};

/// Nagumo: `|f(t, x1) - f(t, x2)| <= |x1 - x2| / t` and `f(t, x) -> 0`
/// uniformly as `t -> 0+`.
pub fn check_nagumo(p: &ProblemSpec, c: &CheckConfig) -> CriterionReport {
    let lip = parse("1/t").expect("literal");
    let hypotheses = vec![
        lipschitz_hypothesis(&p.f, &lip, p, c),
        limit_hypothesis(
            names::LIMIT,
            &[LimitProxy {
                num: p.f.clone(),
                den: build::num(1.0),
            }],
            p,
            c,
        ),
    ];
    CriterionReport::new(names::NAGUMO, hypotheses, Vec::new())
}

/// Athanassov: `|f(t, x1) - f(t, x2)| <= (u'/u) |x1 - x2|` and
/// `f(t, x) / u'(t) -> 0` uniformly as `t -> 0+`.
pub fn check_athanassov(p: &ProblemSpec, c: &CheckConfig) -> CriterionReport {
    let u = match p.require(&p.u, "u") {
        Ok(u) => u,
        Err(e) => return CriterionReport::unavailable(names::ATHANASSOV, e),
    };
    let du = u.differentiate("t");
    let lip = simplify_ratio(&du, u);
    let hypotheses = vec![
        gauge_hypothesis(&[("u", u), ("u'", &du)], &[("u", u)], p, c),
        lipschitz_hypothesis(&p.f, &lip, p, c),
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
    CriterionReport::new(
        names::ATHANASSOV,
        hypotheses,
        vec![format!("u'/u = {lip}")],
    )
}
