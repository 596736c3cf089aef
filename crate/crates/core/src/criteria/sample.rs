//! Sampling loops shared by the criterion checkers.

use crate::expr::{BinOp, Compiled, Expression, Func, Node};

use super::config::UNDERFLOW;
use super::report::{Hypothesis, Inequality, Tracker, Witness};
use super::{CheckConfig, ProblemSpec};

/// Raw (unsimplified) expression builders, so that witness text shows the
/// inequality as checked.
pub(crate) mod build {
    use super::*;

    fn bin(op: BinOp, a: &Expression, b: &Expression) -> Expression {
        Expression::from_node(Node::Bin(
            op,
            Box::new(a.root().clone()),
            Box::new(b.root().clone()),
        ))
    }

    pub fn num(c: f64) -> Expression {
        Expression::constant(c)
    }

    pub fn var(name: &str) -> Expression {
        Expression::from_node(Node::Var(name.to_string()))
    }

    pub fn abs(a: &Expression) -> Expression {
        Expression::from_node(Node::Call(Func::Abs, vec![a.root().clone()]))
    }

    pub fn min(a: &Expression, b: &Expression) -> Expression {
        Expression::from_node(Node::Call(
            Func::Min,
            vec![a.root().clone(), b.root().clone()],
        ))
    }

    pub fn sub(a: &Expression, b: &Expression) -> Expression {
        bin(BinOp::Sub, a, b)
    }

    pub fn mul(a: &Expression, b: &Expression) -> Expression {
        bin(BinOp::Mul, a, b)
    }

    pub fn div(a: &Expression, b: &Expression) -> Expression {
        bin(BinOp::Div, a, b)
    }

    /// `a * b`, written `a / d` when `b` is `1 / d`.
    pub fn scale(a: &Expression, b: &Expression) -> Expression {
        match b.root() {
            Node::Bin(BinOp::Div, n, d) if n.as_num() == Some(1.0) => {
                div(a, &Expression::from_node((**d).clone()))
            }
            _ => mul(a, b),
        }
    }

    /// `num / den`, or just `num` when `den` is the constant 1.
    pub fn ratio(num: &Expression, den: &Expression) -> Expression {
        if den.root().as_num() == Some(1.0) {
            num.clone()
        } else {
            div(num, den)
        }
    }

    pub fn rename(e: &Expression, from: &str, to: &str) -> Expression {
        e.substitute(from, &var(to))
    }
}

/// Compiles `e` over `slots`; the problem loader guarantees the variables.
pub(crate) fn compiled(e: &Expression, slots: &[&str]) -> Compiled {
    e.compile(slots)
        .unwrap_or_else(|err| panic!("expression `{e}` over {slots:?}: {err}"))
}

/// Strict positivity of each gauge on the t-grid and vanishing at the end
/// of the limit sequence.
///
/// A zero value counts as underflow (skipped) when the nearest larger grid
/// point already gave a positive value below `1e-100`.
pub(crate) fn gauge_hypothesis(
    positive: &[(&str, &Expression)],
    vanishing: &[(&str, &Expression)],
    p: &ProblemSpec,
    c: &CheckConfig,
) -> Hypothesis {
    let mut tracker = Tracker::new(super::names::GAUGE, c.tol);
    let grid = c.t_grid(p.t_end);
    for (label, g) in positive {
        let eval = compiled(g, &["t"]);
        let check = Inequality::Pointwise {
            lhs: build::num(0.0),
            rhs: (*g).clone(),
            strict: true,
        };
        // Scan from T down so the underflow rule can see the previous value.
        let mut samples: Vec<(f64, Result<f64, String>)> = Vec::with_capacity(grid.len());
        let mut last_positive = f64::INFINITY;
        for &t in grid.iter().rev() {
            let y = eval.eval(&[t]).map_err(|e| format!("{label}: {e}"));
            if let Ok(y) = y {
                if y == 0.0 && last_positive < 1e-100 {
                    tracker.skip();
                    tracker.note(format!("{label} underflows near t = 0"));
                    continue;
                }
                if y > 0.0 {
                    last_positive = y;
                }
            }
            samples.push((t, y));
        }
        for (t, y) in samples.into_iter().rev() {
            match y {
                Ok(y) => tracker.offer(y, true, || {
                    Witness::new(&[("t", t)], check.clone(), 0.0, y)
                }),
                Err(msg) => tracker.record(Witness::failed(&[("t", t)], check.clone(), msg)),
            }
        }
    }
    let t_last = p.t_end * 0.5f64.powi(c.limit_steps as i32);
    for (label, g) in vanishing {
        let check = Inequality::Pointwise {
            lhs: build::abs(g),
            rhs: build::num(c.gauge_zero_threshold),
            strict: false,
        };
        match g.eval_with(&[("t", t_last)]) {
            Ok(y) => tracker.record(Witness::new(
                &[("t", t_last)],
                check,
                y.abs(),
                c.gauge_zero_threshold,
            )),
            Err(e) => tracker.record(Witness::failed(&[("t", t_last)], check, format!("{label}: {e}"))),
        }
    }
    tracker.finish()
}

/// One uniform-limit proxy `num(t, x) / den(t) -> 0` as `t -> 0+`.
pub(crate) struct LimitProxy {
    pub num: Expression,
    pub den: Expression,
}

/// Uniform-limit proxy: `s_k = max_x |num / den|` along the limit sequence
/// must be non-increasing over the second half of the evaluated points and
/// end below the threshold. Points with `|den| < 1e-250` are skipped.
pub(crate) fn limit_hypothesis(
    name: &str,
    proxies: &[LimitProxy],
    p: &ProblemSpec,
    c: &CheckConfig,
) -> Hypothesis {
    let mut tracker = Tracker::new(name, c.tol);
    let xs = c.x_grid(p.x_bound);
    let seq = c.limit_sequence(p.t_end);
    for proxy in proxies {
        let g = build::ratio(&proxy.num, &proxy.den);
        let num = compiled(&proxy.num, &["t", "x"]);
        let den = compiled(&proxy.den, &["t", "x"]);
        let abs_g = build::abs(&g);
        // (t, argmax x, sup) per evaluated t_k, in decreasing t.
        let mut sups: Vec<(f64, f64, f64)> = Vec::new();
        let mut failures = Vec::new();
        'seq: for &t in &seq {
            let d = match den.eval(&[t, 0.0]) {
                Ok(d) => d,
                Err(e) => {
                    failures.push((t, 0.0, e.to_string()));
                    continue;
                }
            };
            if d.abs() < UNDERFLOW {
                tracker.skip();
                tracker.note(format!("`{}` underflows along the limit sequence", proxy.den));
                continue;
            }
            let mut best = (f64::NEG_INFINITY, 0.0);
            for &x in &xs {
                match num.eval(&[t, x]) {
                    Ok(n) => {
                        let s = (n / d).abs();
                        if s > best.0 {
                            best = (s, x);
                        }
                    }
                    Err(e) => {
                        failures.push((t, x, e.to_string()));
                        continue 'seq;
                    }
                }
            }
            sups.push((t, best.1, best.0));
        }
        for (t, x, msg) in failures.into_iter().rev() {
            let check = Inequality::Pointwise {
                lhs: abs_g.clone(),
                rhs: build::num(c.limit_threshold),
                strict: false,
            };
            tracker.record(Witness::failed(&[("t", t), ("x", x)], check, msg));
        }
        if sups.len() < 4 {
            let reason = format!(
                "only {} point(s) of the limit sequence are evaluable for `{g}`",
                sups.len()
            );
            let t = sups.last().map_or(seq[0], |s| s.0);
            tracker.record(Witness::failed(
                &[("t", t)],
                Inequality::Insufficient {
                    reason: reason.clone(),
                },
                reason,
            ));
            continue;
        }
        // Final value, then monotonicity over the second half, ascending t.
        let &(t, x, s) = sups.last().expect("non-empty");
        tracker.record(Witness::new(
            &[("t", t), ("x", x)],
            Inequality::Pointwise {
                lhs: abs_g.clone(),
                rhs: build::num(c.limit_threshold),
                strict: false,
            },
            s,
            c.limit_threshold,
        ));
        let prev_g = build::abs(&build::rename(&build::rename(&g, "t", "t_prev"), "x", "x_prev"));
        let half = sups.len() / 2;
        for i in (half + 1..sups.len()).rev() {
            let (t_prev, x_prev, s_prev) = sups[i - 1];
            let (t, x, s) = sups[i];
            tracker.offer(s_prev - s, false, || {
                Witness::new(
                    &[("t", t), ("x", x), ("t_prev", t_prev), ("x_prev", x_prev)],
                    Inequality::Pointwise {
                        lhs: abs_g.clone(),
                        rhs: prev_g.clone(),
                        strict: false,
                    },
                    s,
                    s_prev,
                )
            });
        }
    }
    tracker.finish()
}

/// `lhs(t, x) <= rhs(t, x)` on the full (t, x) grid.
pub(crate) fn pointwise_hypothesis(
    name: &str,
    lhs: &Expression,
    rhs: &Expression,
    p: &ProblemSpec,
    c: &CheckConfig,
) -> Hypothesis {
    let mut tracker = Tracker::new(name, c.tol);
    let l = compiled(lhs, &["t", "x"]);
    let r = compiled(rhs, &["t", "x"]);
    let check = Inequality::Pointwise {
        lhs: lhs.clone(),
        rhs: rhs.clone(),
        strict: false,
    };
    let xs = c.x_grid(p.x_bound);
    for t in c.t_grid(p.t_end) {
        for &x in &xs {
            match l.eval(&[t, x]).and_then(|a| Ok((a, r.eval(&[t, x])?))) {
                Ok((a, b)) => tracker.offer(b - a, false, || {
                    Witness::new(&[("t", t), ("x", x)], check.clone(), a, b)
                }),
                Err(e) => {
                    tracker.record(Witness::failed(&[("t", t), ("x", x)], check.clone(), e.to_string()))
                }
            }
        }
    }
    tracker.finish()
}

/// `|f(t, x1) - f(t, x2)| <= L(t) |x1 - x2|` over all grid pairs `x1 < x2`.
pub(crate) fn lipschitz_hypothesis(
    f: &Expression,
    lip: &Expression,
    p: &ProblemSpec,
    c: &CheckConfig,
) -> Hypothesis {
    use build::*;
    let mut tracker = Tracker::new(super::names::LIPSCHITZ, c.tol);
    let fc = compiled(f, &["t", "x"]);
    let lc = compiled(lip, &["t"]);
    let (x1, x2) = (var("x1"), var("x2"));
    let check = Inequality::Pointwise {
        lhs: abs(&sub(&f.substitute("x", &x1), &f.substitute("x", &x2))),
        rhs: scale(&abs(&sub(&x1, &x2)), lip),
        strict: false,
    };
    let xs = c.x_grid(p.x_bound);
    let mut values: Vec<Option<f64>> = vec![None; xs.len()];
    for t in c.t_grid(p.t_end) {
        let l = match lc.eval(&[t]) {
            Ok(l) => l,
            Err(e) => {
                tracker.record(Witness::failed(&[("t", t)], check.clone(), e.to_string()));
                continue;
            }
        };
        for (slot, &x) in values.iter_mut().zip(&xs) {
            *slot = match fc.eval(&[t, x]) {
                Ok(y) => Some(y),
                Err(e) => {
                    let at = [("t", t), ("x1", x), ("x2", x)];
                    tracker.record(Witness::failed(&at, check.clone(), e.to_string()));
                    None
                }
            };
        }
        for i in 0..xs.len() {
            let Some(fi) = values[i] else { continue };
            for j in i + 1..xs.len() {
                let Some(fj) = values[j] else { continue };
                let lhs = (fi - fj).abs();
                let rhs = l * (xs[i] - xs[j]).abs();
                tracker.offer(rhs - lhs, false, || {
                    Witness::new(&[("t", t), ("x1", xs[i]), ("x2", xs[j])], check.clone(), lhs, rhs)
                });
            }
        }
    }
    tracker.finish()
}

/// `int_0^{grid[i]} g` for an ascending grid: one singular integral up to
/// the first point, then finite panels between neighbours. After the first
/// failure every later entry fails too.
pub(crate) fn cumulative_integrals<G, E>(g: G, grid: &[f64], tol: f64) -> Vec<Result<f64, String>>
where
    G: Fn(f64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    use crate::quadrature::{integrate, integrate_singular_left};
    let mut out = Vec::with_capacity(grid.len());
    let mut total = 0.0;
    let mut failure: Option<String> = None;
    for (i, &b) in grid.iter().enumerate() {
        if failure.is_none() {
            let piece = if i == 0 {
                integrate_singular_left(&g, b, tol)
            } else {
                integrate(&g, grid[i - 1], b, tol)
            };
            match piece {
                Ok(r) if r.diverged => failure = Some(format!("integral diverges on (0, {b}]")),
                Ok(r) if !r.converged => {
                    failure = Some(format!(
                        "integral did not converge on (0, {b}] (estimate {} +- {})",
                        total + r.value,
                        r.abs_error_estimate
                    ))
                }
                Ok(r) => total += r.value,
                Err(e) => failure = Some(e.to_string()),
            }
        }
        out.push(match &failure {
            Some(msg) => Err(msg.clone()),
            None => Ok(total),
        });
    }
    out
}
