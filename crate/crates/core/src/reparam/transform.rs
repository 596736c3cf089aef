//! The problem in the new variable: `y(tau) = x(t(tau))` solves
//! `dy/dtau = lambda(t) f(t, y)`, and the bound `|lambda f| <= v` becomes
//! `|F(tau, y)| <= alpha(tau)` with `alpha = v o t`.

use super::{ReparamError, Reparametrization};
use crate::criteria::report::Tracker;
use crate::criteria::sample::build;
use crate::criteria::{CriterionReport, Inequality, ProblemSpec, Witness};
use crate::expr::Compiled;

/// Default number of `y` samples per tau in [`TransformedField::validate`].
pub const Y_POINTS: usize = 41;

/// `F(tau, y) = lambda(t(tau)) f(t(tau), y)` and `alpha(tau) = v(t(tau))`.
#[derive(Debug, Clone)]
pub struct TransformedField {
    rep: Reparametrization,
    f: Compiled,
    v: Compiled,
    lambda: Compiled,
    check: Inequality,
}

/// Pairs a problem (which must declare `v` and `lambda`) with a table.
pub fn transform(p: &ProblemSpec, rep: &Reparametrization) -> Result<TransformedField, String> {
    let v = p.require(&p.v, "v")?;
    let lambda = p.require(&p.lambda, "lambda")?;
    let compile = |e: &crate::expr::Expression, vars: &[&str]| e.compile(vars).map_err(|e| e.to_string());
    let f_y = build::rename(&p.f, "x", "y");
    let check = Inequality::Pointwise {
        lhs: build::abs(&build::mul(lambda, &f_y)),
        rhs: v.clone(),
        strict: false,
    };
    Ok(TransformedField {
        rep: rep.clone(),
        f: compile(&p.f, &["t", "x"])?,
        v: compile(v, &["t"])?,
        lambda: compile(lambda, &["t"])?,
        check,
    })
}

impl TransformedField {
    pub fn reparametrization(&self) -> &Reparametrization {
        &self.rep
    }

    pub fn field(&self, tau: f64, y: f64) -> Result<f64, ReparamError> {
        let t = self.rep.t_of_tau(tau)?;
        self.field_at(t, y)
    }

    fn field_at(&self, t: f64, y: f64) -> Result<f64, ReparamError> {
        let lam = self.lambda.eval(&[t]).map_err(|e| super::eval_err(t, e))?;
        let f = self.f.eval(&[t, y]).map_err(|e| super::eval_err(t, e))?;
        Ok(if f == 0.0 { 0.0 } else { lam * f })
    }

    pub fn alpha(&self, tau: f64) -> Result<f64, ReparamError> {
        let t = self.rep.t_of_tau(tau)?;
        self.v.eval(&[t]).map_err(|e| super::eval_err(t, e))
    }

    /// Samples `|F(tau, y)| <= alpha(tau)` over the tau grid and
    /// `|y| <= y_bound`.
    pub fn validate(&self, y_bound: f64, tol: f64) -> CriterionReport {
        let mut tracker = Tracker::new("transform-bound", tol);
        let ys: Vec<f64> = (0..Y_POINTS)
            .map(|i| -y_bound + 2.0 * y_bound * i as f64 / (Y_POINTS - 1) as f64)
            .collect();
        for tau in super::tau_grid(&self.rep, super::checks::CHECK_POINTS) {
            let t = match self.rep.t_of_tau(tau) {
                Ok(t) => t,
                Err(e) => {
                    tracker.record(Witness::failed(&[("tau", tau)], self.check.clone(), e.to_string()));
                    continue;
                }
            };
            let alpha = self.v.eval(&[t]);
            for &y in &ys {
                let at = [("tau", tau), ("t", t), ("y", y)];
                match (self.field_at(t, y), &alpha) {
                    (Ok(fv), Ok(a)) => {
                        let (lhs, rhs) = (fv.abs(), *a);
                        tracker.offer(rhs - lhs, false, || Witness::new(&at, self.check.clone(), lhs, rhs));
                    }
                    (Err(e), _) => tracker.record(Witness::failed(&at, self.check.clone(), e.to_string())),
                    (_, Err(e)) => tracker.record(Witness::failed(&at, self.check.clone(), e.to_string())),
                }
            }
        }
        CriterionReport::new("transform", vec![tracker.finish()], Vec::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::ProblemSources;
    use crate::reparam::build_tau;

    fn field(f: &str) -> TransformedField {
        let p = ProblemSources::new(f)
            .with_v("t")
            .with_lambda("t")
            .load()
            .unwrap();
        let rep = build_tau(p.lambda.as_ref().unwrap(), 1.0, 0.0, 1e-12).unwrap();
        transform(&p, &rep).unwrap()
    }

    #[test]
    fn zero_field_is_bounded() {
        let tf = field("0");
        assert!(tf.validate(1.0, 1e-9).passed);
        assert_eq!(tf.field(3.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn field_and_weight_follow_the_table() {
        let tf = field("t*x");
        // lambda = t gives t(tau) = exp(-tau)
        let t = (-2.0f64).exp();
        assert!((tf.field(2.0, 0.5).unwrap() - t * t * 0.5).abs() < 1e-12);
        assert!((tf.alpha(2.0).unwrap() - t).abs() < 1e-12);
        assert!(tf.validate(1.0, 1e-9).passed);
    }

    #[test]
    fn unbounded_field_fails_with_a_witness() {
        let r = field("x/t").validate(1.0, 1e-9);
        assert!(!r.passed);
        let w = r.hypotheses[0].witness.as_ref().unwrap();
        assert_eq!(w.point["y"].abs(), 1.0);
        match &w.check {
            Inequality::Pointwise { lhs, .. } => assert!(lhs.free_vars().contains("y")),
            other => panic!("{other:?}"),
        }
    }
}
