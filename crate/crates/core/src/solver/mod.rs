//! Adaptive integration of `x' + f(t, x) = 0` on `t > 0`, and numerical
//! probes that give evidence (never proof) about uniqueness of the zero
//! solution.

mod dopri;
mod probes;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Compiled, Expression};

pub use dopri::ORDER;
pub use probes::{
    forward_spread, funnel_probe, spread_schedule, sup_ratio_diagnostic, FunnelOptions,
    FunnelReport, FunnelSample, RatioPoint, SpreadPoint, SupRatioReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("f not evaluable at t = {t}, x = {x}: {message}")]
    Domain { t: f64, x: f64, message: String },
}

/// Which points a trajectory keeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "points")]
pub enum OutputGrid {
    /// Every accepted step.
    Steps,
    /// `n` evenly spaced points from `t0` to `t1`, from the interpolant.
    Uniform(usize),
    /// `n` geometrically spaced points from `t0` to `t1`.
    Geometric(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub output: OutputGrid,
    /// After an accepted step that changes the sign of `x`, continue on the
    /// zero solution. Only meaningful when `x = 0` solves the equation.
    pub zero_capture: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 100_000,
            output: OutputGrid::Steps,
            zero_capture: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return Err(SolverError::InvalidArgument(format!("rtol must lie in (0, 1), got {}", self.rtol)));
        }
        if !(self.atol > 0.0 && self.atol.is_finite()) {
            return Err(SolverError::InvalidArgument(format!("atol must be positive, got {}", self.atol)));
        }
        match self.output {
            OutputGrid::Uniform(n) | OutputGrid::Geometric(n) if n < 2 => Err(
                SolverError::InvalidArgument(format!("an output grid needs at least 2 points, got {n}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Status {
    Completed,
    /// The step size fell below the resolution of `t`.
    StoppedAtSingularity { t: f64, x: f64 },
    ErrorBudgetExceeded { t: f64, x: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    /// Error estimate of the step that produced this point (0 at the start).
    pub local_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub status: Status,
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl Trajectory {
    pub fn last(&self) -> Sample {
        *self.samples.last().expect("a trajectory holds its start point")
    }

    pub fn completed(&self) -> bool {
        self.status == Status::Completed
    }

    /// `t,x,local_error` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,local_error\n");
        for s in &self.samples {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", s.t, s.x, s.local_error));
        }
        out
    }
}

/// Integrates `x' = -f(t, x)` from `(t0, x0)` to `t1`, in either direction.
pub fn integrate_ivp(
    f: &Expression,
    t0: f64,
    x0: f64,
    t1: f64,
    opts: &SolverOptions,
) -> Result<Trajectory, SolverError> {
    let fc = compile_f(f)?;
    let rhs = negated(&fc);
    integrate_fn(&rhs, t0, x0, t1, opts)
}

pub(crate) fn compile_f(f: &Expression) -> Result<Compiled, SolverError> {
    f.compile(&["t", "x"])
        .map_err(|e| SolverError::InvalidArgument(format!("f: {e}")))
}

pub(crate) fn negated(fc: &Compiled) -> impl Fn(f64, f64) -> Result<f64, String> + '_ {
    move |t, x| fc.eval(&[t, x]).map(|v| -v).map_err(|e| e.to_string())
}

/// Integrates `x' = rhs(t, x)` from `(t0, x0)` to `t1 > 0`.
pub fn integrate_fn<F>(rhs: &F, t0: f64, x0: f64, t1: f64, opts: &SolverOptions) -> Result<Trajectory, SolverError>
where
    F: Fn(f64, f64) -> Result<f64, String>,
{
    opts.validate()?;
    for (name, v) in [("t0", t0), ("t1", t1)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(SolverError::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    if !x0.is_finite() {
        return Err(SolverError::InvalidArgument(format!("x0 must be finite, got {x0}")));
    }
    let domain = |e: dopri::EvalFailure| SolverError::Domain {
        t: e.t,
        x: e.x,
        message: e.message,
    };
    let targets = output_targets(opts.output, t0, t1);
    let mut next_target = 0;
    let mut samples = vec![Sample {
        t: t0,
        x: x0,
        local_error: 0.0,
    }];
    if matches!(opts.output, OutputGrid::Uniform(_) | OutputGrid::Geometric(_)) {
        next_target = 1;
    }
    let mut traj = Trajectory {
        samples: Vec::new(),
        status: Status::Completed,
        accepted: 0,
        rejected: 0,
        evaluations: 1,
    };
    if t0 == t1 {
        traj.samples = samples;
        return Ok(traj);
    }
    let dir = (t1 - t0).signum();
    let (mut t, mut x) = (t0, x0);
    let mut k1 = dopri::eval(rhs, t, x).map_err(domain)?;
    let mut h = initial_step(rhs, t, x, k1, dir, (t1 - t0).abs(), opts).map_err(domain)?;
    traj.evaluations += 2;
    let mut last_rejected = false;
    loop {
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        let hs = if last { remaining } else { h };
        if hs <= 16.0 * f64::EPSILON * t.abs() {
            traj.status = Status::StoppedAtSingularity { t, x };
            break;
        }
        if traj.accepted + traj.rejected >= opts.max_steps {
            traj.status = Status::ErrorBudgetExceeded { t, x };
            break;
        }
        let s = dopri::step(rhs, t, x, k1, dir * hs).map_err(domain)?;
        traj.evaluations += 6;
        let scale = opts.atol + opts.rtol * x.abs().max(s.x_new.abs());
        let err = s.err / scale;
        if err <= 1.0 {
            let t_new = if last { t1 } else { t + dir * hs };
            let captured = opts.zero_capture && x != 0.0 && x * s.x_new <= 0.0;
            let s = if captured { s.captured() } else { s };
            while next_target < targets.len() && (targets[next_target] - t_new) * dir <= 0.0 {
                let tt = targets[next_target];
                let xt = if tt == t_new { s.x_new } else { s.dense.eval(tt) };
                samples.push(Sample {
                    t: tt,
                    x: xt,
                    local_error: s.err,
                });
                next_target += 1;
            }
            if targets.is_empty() {
                samples.push(Sample {
                    t: t_new,
                    x: s.x_new,
                    local_error: s.err,
                });
            }
            traj.accepted += 1;
            (t, x, k1) = (t_new, s.x_new, s.k7);
            if captured {
                k1 = dopri::eval(rhs, t, x).map_err(domain)?;
                traj.evaluations += 1;
            }
            if last {
                break;
            }
            let mut fac = (0.9 * err.powf(-0.2)).clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = hs * fac;
            last_rejected = false;
        } else {
            traj.rejected += 1;
            h = hs * (0.9 * err.powf(-0.2)).max(0.2);
            last_rejected = true;
        }
    }
    traj.samples = samples;
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderRun {
    pub rtol: f64,
    pub steps: usize,
    /// Relative endpoint error against `exp(t0 - t1)`.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderStudy {
    pub runs: Vec<OrderRun>,
    /// Least-squares slope of `-ln(error)` against `ln(steps)`.
    pub measured_order: f64,
    pub nominal_order: u32,
}

/// Measures the convergence order on `x' = -x` from `(0.1, 1)` to `t1`,
/// one adaptive run per relative tolerance (absolute tolerance off).
pub fn order_study(rtols: &[f64], t1: f64) -> Result<OrderStudy, SolverError> {
    if rtols.len() < 2 {
        return Err(SolverError::InvalidArgument("need at least two tolerances".into()));
    }
    let rhs = |_: f64, x: f64| Ok(-x);
    let t0 = 0.1;
    let exact = (t0 - t1).exp();
    let mut runs = Vec::new();
    for &rtol in rtols {
        let opts = SolverOptions {
            rtol,
            atol: f64::MIN_POSITIVE,
            ..SolverOptions::default()
        };
        let tr = integrate_fn(&rhs, t0, 1.0, t1, &opts)?;
        runs.push(OrderRun {
            rtol,
            steps: tr.accepted,
            error: ((tr.last().x - exact) / exact).abs(),
        });
    }
    let pts: Vec<(f64, f64)> = runs.iter().map(|r| ((r.steps as f64).ln(), -r.error.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(OrderStudy {
        runs,
        measured_order: sxy / sxx,
        nominal_order: ORDER,
    })
}

fn output_targets(grid: OutputGrid, t0: f64, t1: f64) -> Vec<f64> {
    match grid {
        OutputGrid::Steps => Vec::new(),
        OutputGrid::Uniform(n) => (0..n)
            .map(|i| if i + 1 == n { t1 } else { t0 + (t1 - t0) * i as f64 / (n - 1) as f64 })
            .collect(),
        OutputGrid::Geometric(n) => {
            let r = (t1 / t0).ln();
            (0..n)
                .map(|i| if i + 1 == n { t1 } else { t0 * (r * i as f64 / (n - 1) as f64).exp() })
                .collect()
        }
    }
}

/// Starting step from the local scale of `x` and its first two derivatives.
fn initial_step<F>(
    rhs: &F,
    t: f64,
    x: f64,
    k1: f64,
    dir: f64,
    span: f64,
    opts: &SolverOptions,
) -> Result<f64, dopri::EvalFailure>
where
    F: Fn(f64, f64) -> Result<f64, String>,
{
    let sc = opts.atol + opts.rtol * x.abs();
    let (d0, d1) = (x.abs() / sc, k1.abs() / sc);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * t } else { 0.01 * d0 / d1 };
    // stay well inside (0, inf) when heading toward 0
    let h0 = h0.min(span).min(0.5 * t);
    let k2 = dopri::eval(rhs, t + dir * h0, x + dir * h0 * k1)?;
    let d2 = (k2 - k1).abs() / sc / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6 * t)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / dopri::ORDER as f64)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn solve(f: &str, t0: f64, x0: f64, t1: f64, opts: &SolverOptions) -> Trajectory {
        integrate_ivp(&parse(f).unwrap(), t0, x0, t1, opts).unwrap()
    }

    #[test]
    fn exponential_decay() {
        let tr = solve("x", 0.1, 1.0, 1.0, &SolverOptions::default());
        assert!(tr.completed());
        assert!((tr.last().x - (-0.9f64).exp()).abs() < 1e-8);
        assert_eq!(tr.last().t, 1.0);
        assert!(tr.samples.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn zero_field_is_constant() {
        let tr = solve("0", 0.5, 3.25, 0.01, &SolverOptions::default());
        assert!(tr.samples.iter().all(|s| s.x == 3.25));
        assert!(tr.samples.windows(2).all(|w| w[0].t > w[1].t));
    }

    #[test]
    fn square_root_branch_from_near_zero() {
        let t0: f64 = 1e-6;
        let tr = solve("-sqrt(abs(x))", t0, t0 * t0 / 4.0, 1.0, &SolverOptions::default());
        assert!((tr.last().x - 0.25).abs() < 1e-4, "{:?}", tr.last());
    }

    #[test]
    fn accepted_steps_meet_the_tolerance() {
        let opts = SolverOptions {
            rtol: 1e-6,
            atol: 1e-9,
            ..SolverOptions::default()
        };
        let tr = solve("t*x - sin(x)", 0.2, 0.7, 1.0, &opts);
        for w in tr.samples.windows(2) {
            let scale = opts.atol + opts.rtol * w[0].x.abs().max(w[1].x.abs());
            assert!(w[1].local_error <= scale);
        }
    }

    #[test]
    fn dense_output_matches_closed_form() {
        let opts = SolverOptions {
            output: OutputGrid::Uniform(11),
            ..SolverOptions::default()
        };
        let tr = solve("x", 0.1, 1.0, 1.1, &opts);
        assert_eq!(tr.samples.len(), 11);
        for s in &tr.samples {
            assert!((s.x - (0.1 - s.t).exp()).abs() < 1e-7, "{s:?}");
        }
        let opts = SolverOptions {
            output: OutputGrid::Geometric(7),
            ..SolverOptions::default()
        };
        let tr = solve("x", 1.0, 1.0, 1e-3, &opts);
        assert_eq!(tr.samples.len(), 7);
        assert!((tr.samples[3].t - 10f64.powf(-1.5)).abs() < 1e-15);
    }

    #[test]
    fn forward_then_backward_returns() {
        let opts = SolverOptions::default();
        let fwd = solve("x*cos(t) + 0.5*x", 0.1, 0.8, 2.0, &opts);
        let back = solve("x*cos(t) + 0.5*x", 2.0, fwd.last().x, 0.1, &opts);
        let budget: f64 = fwd.samples.iter().chain(&back.samples).map(|s| s.local_error).sum();
        assert!((back.last().x - 0.8).abs() < 10.0 * budget, "{} vs {budget}", back.last().x);
    }

    #[test]
    fn domain_errors_carry_the_location() {
        let e = integrate_ivp(&parse("x*log(1 - t)").unwrap(), 0.5, 1.0, 1.5, &SolverOptions::default())
            .unwrap_err();
        match e {
            SolverError::Domain { t, .. } => assert!(t >= 1.0),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn blow_up_stops_at_the_singularity() {
        // x' = x^2 from x(0.5) = 2 blows up at t = 1
        let tr = solve("-(x^2)", 0.5, 2.0, 2.0, &SolverOptions::default());
        match tr.status {
            Status::StoppedAtSingularity { t, .. } | Status::ErrorBudgetExceeded { t, .. } => {
                assert!((t - 1.0).abs() < 1e-3, "{t}")
            }
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn measured_order_is_near_five() {
        let s = order_study(&[1e-4, 1e-6, 1e-8], 100.1).unwrap();
        assert!((s.measured_order - 5.0).abs() < 0.5, "{s:?}");
        assert!(s.runs.windows(2).all(|w| w[1].steps > w[0].steps && w[1].error < w[0].error));
    }

    #[test]
    fn zero_capture_keeps_the_zero_branch() {
        let opts = SolverOptions {
            zero_capture: true,
            ..SolverOptions::default()
        };
        // backward from x(1) = 0.09 the branch (t - 0.4)^2 / 4 hits 0 at t = 0.4
        let tr = solve("-sqrt(abs(x))", 1.0, 0.09, 0.1, &opts);
        assert_eq!(tr.last().x, 0.0);
        let free = solve("-sqrt(abs(x))", 1.0, 0.09, 0.1, &SolverOptions::default());
        assert!(free.last().x < -0.01);
    }

    #[test]
    fn rejects_nonpositive_times() {
        assert!(integrate_ivp(&parse("x").unwrap(), 0.0, 1.0, 1.0, &SolverOptions::default()).is_err());
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use crate::expr::parse;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn linear_decay_matches_closed_form(k in -2.0f64..2.0, x0 in -5.0f64..5.0, t0 in 0.05f64..2.0, t1 in 0.05f64..2.0) {
            let f = parse(&format!("{k}*x")).unwrap();
            let opts = SolverOptions { rtol: 1e-10, atol: 1e-12, ..SolverOptions::default() };
            let tr = integrate_ivp(&f, t0, x0, t1, &opts).unwrap();
            prop_assert!(tr.completed());
            let exact = x0 * (-k * (t1 - t0)).exp();
            prop_assert!((tr.last().x - exact).abs() <= 1e-7 * (1.0 + exact.abs()), "{} vs {exact}", tr.last().x);
        }

        #[test]
        fn zero_stays_zero(a in -3.0f64..3.0, p in 1u32..4, t0 in 0.05f64..2.0, t1 in 0.05f64..2.0) {
            let f = parse(&format!("{a}*t*x^{p}")).unwrap();
            let tr = integrate_ivp(&f, t0, 0.0, t1, &SolverOptions::default()).unwrap();
            prop_assert!(tr.samples.iter().all(|s| s.x == 0.0));
        }
    }
}
