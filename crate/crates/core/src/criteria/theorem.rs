use serde::Serialize;

use super::report::{ser_f64, CriterionReport, Hypothesis, Inequality, Tracker, Witness};
use super::sample::{
    build, compiled, cumulative_integrals, gauge_hypothesis, limit_hypothesis,
    pointwise_hypothesis, LimitProxy,
};
use super::{names, CheckConfig, OmegaPolicy, ProblemSpec};
use crate::expr::{Compiled, Expression};
use crate::quadrature::integrate_singular_left;

/// One `(eps, t)` sample of the comparison hypothesis, normalized by `eps`:
/// `margin = v(t) - int_0^t omega(eps v(w)) / (eps lambda(w)) dw`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H2Sample {
    pub eps: f64,
    pub t: f64,
    #[serde(serialize_with = "ser_f64")]
    pub integral: f64,
    pub v: f64,
    #[serde(serialize_with = "ser_f64")]
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Gauges<'a> {
    v: &'a Expression,
    lambda: &'a Expression,
    omega: &'a Expression,
}

fn gauges(p: &ProblemSpec) -> Result<Gauges<'_>, String> {
    Ok(Gauges {
        v: p.require(&p.v, "v")?,
        lambda: p.require(&p.lambda, "lambda")?,
        omega: p.require(&p.omega, "omega")?,
    })
}

/// `omega` at `r` under the configured policy; the flag reports a clamp.
fn omega_at(om: &Compiled, r: f64, x_bound: f64, policy: OmegaPolicy) -> (Result<f64, String>, bool) {
    let eval = |r: f64| om.eval(&[r]).map_err(|e| e.to_string());
    match policy {
        OmegaPolicy::Clamp => (eval(r.min(x_bound)), false),
        OmegaPolicy::Extend | OmegaPolicy::Restrict => match eval(r) {
            Err(_) if r > x_bound && policy == OmegaPolicy::Extend => (eval(x_bound), true),
            other => (other, false),
        },
    }
}

/// Comparison-hypothesis samples in `t`-major, `eps`-minor order. Pairs
/// with `eps v(t) > x_bound` are left out under [`OmegaPolicy::Restrict`].
pub fn theorem_h2_margins(p: &ProblemSpec, c: &CheckConfig) -> Result<Vec<H2Sample>, String> {
    Ok(h2_samples(p, c, &gauges(p)?).0)
}

fn h2_samples(p: &ProblemSpec, c: &CheckConfig, g: &Gauges) -> (Vec<H2Sample>, usize, bool) {
    let (v, lambda, om) = (
        compiled(g.v, &["t"]),
        compiled(g.lambda, &["t"]),
        compiled(g.omega, &["r"]),
    );
    let ts = c.t_grid(p.t_end);
    let eps_grid = c.eps_grid();
    let v_t: Vec<_> = ts.iter().map(|&t| v.eval(&[t]).map_err(|e| e.to_string())).collect();
    let clamped = std::cell::Cell::new(false);
    // columns[j][i]: eps_j, t_i
    let mut columns = Vec::with_capacity(eps_grid.len());
    for &eps in &eps_grid {
        let admissible = ts
            .iter()
            .zip(&v_t)
            .take_while(|(_, v)| {
                c.omega_policy != OmegaPolicy::Restrict
                    || matches!(v, Ok(v) if eps * v <= p.x_bound)
            })
            .count();
        let integrand = |w: f64| -> Result<f64, String> {
            let vw = v.eval(&[w]).map_err(|e| e.to_string())?;
            let (om_val, was_clamped) = omega_at(&om, eps * vw, p.x_bound, c.omega_policy);
            clamped.set(clamped.get() || was_clamped);
            let num = om_val?;
            if num == 0.0 {
                // omega(eps v) underflowed together with the gauges.
                return Ok(0.0);
            }
            let l = lambda.eval(&[w]).map_err(|e| e.to_string())?;
            if l == 0.0 {
                return Err(format!("lambda vanishes at w = {w}"));
            }
            Ok(num / (eps * l))
        };
        columns.push(cumulative_integrals(integrand, &ts[..admissible], c.quad_tol()));
    }
    let mut samples = Vec::new();
    let mut skipped = 0;
    for (i, &t) in ts.iter().enumerate() {
        for (j, &eps) in eps_grid.iter().enumerate() {
            let Some(integral) = columns[j].get(i) else {
                skipped += 1;
                continue;
            };
            let sample = match (integral, &v_t[i]) {
                (Ok(integral), Ok(vt)) => H2Sample {
                    eps,
                    t,
                    integral: *integral,
                    v: *vt,
                    margin: vt - integral,
                    error: None,
                },
                (Err(e), _) | (_, Err(e)) => H2Sample {
                    eps,
                    t,
                    integral: f64::NAN,
                    v: v_t[i].clone().unwrap_or(f64::NAN),
                    margin: f64::NEG_INFINITY,
                    error: Some(e.clone()),
                },
            };
            samples.push(sample);
        }
    }
    (samples, skipped, clamped.get())
}

fn h1(p: &ProblemSpec, c: &CheckConfig, g: &Gauges) -> Hypothesis {
    let mut tracker = Tracker::new(names::H1, c.tol);
    let check = Inequality::Integrable {
        integrand: build::div(&build::rename(g.v, "t", "w"), &build::rename(g.lambda, "t", "w")),
        upper: build::num(p.t_end),
    };
    let (v, lambda) = (compiled(g.v, &["t"]), compiled(g.lambda, &["t"]));
    let integrand = |w: f64| -> Result<f64, String> {
        let num = v.eval(&[w]).map_err(|e| e.to_string())?;
        if num == 0.0 {
            return Ok(0.0);
        }
        Ok(num / lambda.eval(&[w]).map_err(|e| e.to_string())?)
    };
    match integrate_singular_left(integrand, p.t_end, c.quad_tol()) {
        Ok(r) if r.converged => {
            tracker.note(format!("integral = {} +- {}", r.value, r.abs_error_estimate));
            tracker.record(Witness::new(&[], check, r.value, f64::INFINITY).with_margin(1.0));
        }
        Ok(r) => {
            let what = if r.diverged { "diverges" } else { "did not converge" };
            tracker.note(format!("integral {what} (partial value {})", r.value));
            tracker.record(Witness::new(&[], check, f64::INFINITY, f64::INFINITY).with_margin(-1.0));
        }
        Err(e) => tracker.record(Witness::failed(&[], check, e.to_string())),
    }
    tracker.finish()
}

fn h2(p: &ProblemSpec, c: &CheckConfig, g: &Gauges) -> Hypothesis {
    let mut tracker = Tracker::new(names::H2, c.tol);
    let eps = build::var("eps");
    let v_w = build::rename(g.v, "t", "w");
    let mut arg = build::mul(&eps, &v_w);
    if c.omega_policy == OmegaPolicy::Clamp {
        arg = build::min(&arg, &build::num(p.x_bound));
    }
    let check = Inequality::SingularIntegral {
        integrand: build::div(
            &g.omega.substitute("r", &arg),
            &build::mul(&eps, &build::rename(g.lambda, "t", "w")),
        ),
        upper: build::var("t"),
        rhs: g.v.clone(),
    };
    let (samples, skipped, clamped) = h2_samples(p, c, g);
    for s in samples {
        let at = [("eps", s.eps), ("t", s.t)];
        match s.error {
            None => tracker.offer(s.margin, false, || {
                Witness::new(&at, check.clone(), s.integral, s.v)
            }),
            Some(e) => tracker.record(Witness::failed(&at, check.clone(), e)),
        }
    }
    for _ in 0..skipped {
        tracker.skip();
    }
    if skipped > 0 {
        tracker.note("pairs with eps*v(t) > x_bound left out");
    }
    if clamped {
        tracker.note("omega not evaluable beyond x_bound; clamped to omega(x_bound) there");
    }
    tracker.note(format!(
        "sampled over {} eps values in [{}, {}]; a necessary-condition filter for all eps > 0",
        c.eps_points, c.eps_min, c.eps_max
    ));
    tracker.finish()
}

/// The reparametrized-gauge criterion: integrability of `v/lambda`, the
/// comparison inequality for all sampled `eps`, the bound
/// `|f| <= omega(|x|)/lambda`, the limits `lambda f / v -> 0` and
/// `f / v' -> 0`, and the domination `|lambda f| <= v`.
pub fn check_theorem_main(p: &ProblemSpec, c: &CheckConfig) -> CriterionReport {
    let g = match gauges(p) {
        Ok(g) => g,
        Err(e) => return CriterionReport::unavailable(names::THEOREM, e),
    };
    let dv = g.v.differentiate("t");
    let abs_f = build::abs(&p.f);
    let omega_x = g.omega.substitute("r", &build::abs(&build::var("x")));
    let hypotheses = vec![
        gauge_hypothesis(
            &[("v", g.v), ("v'", &dv), ("lambda", g.lambda)],
            &[("v", g.v), ("lambda", g.lambda)],
            p,
            c,
        ),
        h1(p, c, &g),
        h2(p, c, &g),
        pointwise_hypothesis(names::H3, &abs_f, &build::div(&omega_x, g.lambda), p, c),
        limit_hypothesis(
            names::H4,
            &[
                LimitProxy {
                    num: build::mul(g.lambda, &p.f),
                    den: g.v.clone(),
                },
                LimitProxy {
                    num: p.f.clone(),
                    den: dv.clone(),
                },
            ],
            p,
            c,
        ),
        pointwise_hypothesis(
            names::H5,
            &build::abs(&build::mul(g.lambda, &p.f)),
            g.v,
            p,
            c,
        ),
    ];
    CriterionReport::new(names::THEOREM, hypotheses, Vec::new())
}
