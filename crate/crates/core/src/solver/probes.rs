use serde::{Deserialize, Serialize};

use super::{compile_f, integrate_fn, negated, SolverError, SolverOptions, Status, Trajectory};
use crate::expr::Expression;
use crate::reparam::Reparametrization;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FunnelOptions {
    /// Number of terminal values on `[-x_bound, x_bound]`.
    pub n: usize,
    /// Defaults to `1e-6 T`.
    pub t_floor: Option<f64>,
    pub x_bound: f64,
    pub atol_reach: f64,
    /// Number of levels of the forward-spread schedule.
    pub spread_levels: usize,
    pub solver: SolverOptions,
}

impl Default for FunnelOptions {
    fn default() -> Self {
        FunnelOptions {
            n: 201,
            t_floor: None,
            x_bound: 1.0,
            atol_reach: 1e-6,
            spread_levels: 10,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunnelSample {
    pub x_t: f64,
    /// `x(t_floor)` when the backward integration got there.
    pub x_floor: Option<f64>,
    pub reaches_zero: bool,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadPoint {
    pub t0: f64,
    pub delta: f64,
    /// Largest pairwise gap of `x(T)` over the legs that completed.
    pub spread: f64,
    /// `x(T)` from `-delta`, `0` and `+delta`.
    pub endpoints: [Option<f64>; 3],
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunnelReport {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub t_floor: f64,
    pub atol_reach: f64,
    pub spacing: f64,
    pub marked: usize,
    pub basin_width: f64,
    pub samples: Vec<FunnelSample>,
    pub spread_curve: Vec<SpreadPoint>,
    pub interpretation: String,
}

/// Integrates backward from `(T, x_T)` on a symmetric grid of terminal
/// values and marks those whose trajectory is within `atol_reach` of zero at
/// `t_floor`. A backward trajectory that crosses zero continues on the zero
/// solution, so that non-unique backward continuations resolve to the one
/// through 0. A basin width that stays away from 0 as `t_floor` shrinks is
/// evidence of non-uniqueness; a vanishing one is consistent with uniqueness.
pub fn funnel_probe(f: &Expression, t_end: f64, opts: &FunnelOptions) -> Result<FunnelReport, SolverError> {
    opts.solver.validate()?;
    if opts.n < 3 {
        return Err(SolverError::InvalidArgument(format!("n must be at least 3, got {}", opts.n)));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(SolverError::InvalidArgument(format!("T must be positive, got {t_end}")));
    }
    let t_floor = opts.t_floor.unwrap_or(1e-6 * t_end);
    if !(t_floor > 0.0 && t_floor < t_end) {
        return Err(SolverError::InvalidArgument(format!("t_floor must lie in (0, T), got {t_floor}")));
    }
    if !(opts.x_bound > 0.0 && opts.atol_reach > 0.0) {
        return Err(SolverError::InvalidArgument("x_bound and atol_reach must be positive".into()));
    }
    let fc = compile_f(f)?;
    let rhs = negated(&fc);
    let backward = SolverOptions {
        zero_capture: true,
        ..opts.solver
    };
    let spacing = 2.0 * opts.x_bound / (opts.n - 1) as f64;
    let mut samples = Vec::with_capacity(opts.n);
    for i in 0..opts.n {
        // exact 0 at the centre
        let x_t = if 2 * i + 1 == opts.n { 0.0 } else { -opts.x_bound + spacing * i as f64 };
        let sample = match integrate_fn(&rhs, t_end, x_t, t_floor, &backward) {
            Ok(tr) => {
                let end = tr.last();
                let x_floor = tr.completed().then_some(end.x);
                FunnelSample {
                    x_t,
                    x_floor,
                    reaches_zero: x_floor.is_some_and(|x| x.abs() < opts.atol_reach),
                    status: tr.status,
                    error: None,
                }
            }
            Err(e) => FunnelSample {
                x_t,
                x_floor: None,
                reaches_zero: false,
                status: Status::Completed,
                error: Some(e.to_string()),
            },
        };
        samples.push(sample);
    }
    let marked = samples.iter().filter(|s| s.reaches_zero).count();
    let mut spread_curve = Vec::new();
    for (t0, delta) in spread_schedule(t_end, opts.spread_levels) {
        spread_curve.push(forward_spread(f, t0, delta, t_end, &opts.solver)?);
    }
    Ok(FunnelReport {
        t_end,
        t_floor,
        atol_reach: opts.atol_reach,
        spacing,
        marked,
        basin_width: spacing * marked as f64,
        samples,
        spread_curve,
        interpretation: "evidence only: a basin width bounded away from 0 as t_floor decreases \
                         suggests non-uniqueness; a vanishing one is consistent with uniqueness"
            .to_string(),
    })
}

/// `t0 = delta = 2^-k` for the first `levels` values of `k` with `2^-k < T`.
pub fn spread_schedule(t_end: f64, levels: usize) -> Vec<(f64, f64)> {
    (1..)
        .map(|k| 0.5f64.powi(k))
        .filter(|&s| s < t_end)
        .take(levels)
        .map(|s| (s, s))
        .collect()
}

/// Integrates forward from `(t0, -delta)`, `(t0, 0)` and `(t0, delta)` to
/// `T` and reports the largest gap between the endpoints.
pub fn forward_spread(
    f: &Expression,
    t0: f64,
    delta: f64,
    t_end: f64,
    opts: &SolverOptions,
) -> Result<SpreadPoint, SolverError> {
    if !(t0 > 0.0 && t0 < t_end && delta > 0.0) {
        return Err(SolverError::InvalidArgument(format!(
            "need 0 < t0 < T and delta > 0, got t0 = {t0}, T = {t_end}, delta = {delta}"
        )));
    }
    let fc = compile_f(f)?;
    let rhs = negated(&fc);
    let mut endpoints = [None; 3];
    let mut errors = Vec::new();
    for (slot, x0) in [-delta, 0.0, delta].into_iter().enumerate() {
        match integrate_fn(&rhs, t0, x0, t_end, opts) {
            Ok(tr) if tr.completed() => endpoints[slot] = Some(tr.last().x),
            Ok(tr) => errors.push(format!("leg x0 = {x0}: {:?}", tr.status)),
            Err(e) => errors.push(format!("leg x0 = {x0}: {e}")),
        }
    }
    let done: Vec<f64> = endpoints.iter().flatten().copied().collect();
    let spread = match (
        done.iter().copied().reduce(f64::min),
        done.iter().copied().reduce(f64::max),
    ) {
        (Some(lo), Some(hi)) => hi - lo,
        _ => f64::NAN,
    };
    Ok(SpreadPoint {
        t0,
        delta,
        spread,
        endpoints,
        errors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioPoint {
    pub tau: f64,
    pub t: f64,
    pub y: f64,
    pub alpha: f64,
    pub ratio: f64,
    /// Largest ratio at this or any larger tau.
    pub running_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupRatioReport {
    /// By increasing tau.
    pub points: Vec<RatioPoint>,
    /// Samples with `alpha < 1e-300`.
    pub skipped: usize,
    /// Interior samples where `ratio < sup of the ratios at larger tau` fails.
    pub violations: usize,
    pub first_violation_tau: Option<f64>,
    pub strict_holds: bool,
}

const ALPHA_FLOOR: f64 = 1e-300;

/// The series `|y(tau)| / alpha(tau)` along a t-domain trajectory, with
/// `y(tau) = x(t(tau))` and `alpha = v o t`, and its running supremum
/// toward `tau_plus`.
pub fn sup_ratio_diagnostic(
    v: &Expression,
    rep: &Reparametrization,
    traj: &Trajectory,
) -> Result<SupRatioReport, SolverError> {
    let vc = v
        .compile(&["t"])
        .map_err(|e| SolverError::InvalidArgument(format!("v: {e}")))?;
    let mut points = Vec::new();
    let mut skipped = 0;
    for s in &traj.samples {
        if !(s.t > 0.0 && s.t <= rep.t_end()) {
            return Err(SolverError::InvalidArgument(format!(
                "sample t = {} outside (0, {}]",
                s.t,
                rep.t_end()
            )));
        }
        let alpha = vc.eval(&[s.t]).map_err(|e| SolverError::Domain {
            t: s.t,
            x: s.x,
            message: format!("v: {e}"),
        })?;
        if alpha < ALPHA_FLOOR {
            skipped += 1;
            continue;
        }
        let tau = rep
            .tau_of_t(s.t)
            .map_err(|e| SolverError::InvalidArgument(e.to_string()))?;
        points.push(RatioPoint {
            tau,
            t: s.t,
            y: s.x,
            alpha,
            ratio: s.x.abs() / alpha,
            running_sup: 0.0,
        });
    }
    points.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    let mut sup = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut first_violation_tau = None;
    for p in points.iter_mut().rev() {
        // `sup` is over strictly larger tau here
        let interior = sup > f64::NEG_INFINITY;
        if interior && !(p.ratio < sup) {
            violations += 1;
            first_violation_tau = Some(p.tau);
        }
        sup = sup.max(p.ratio);
        p.running_sup = sup;
    }
    Ok(SupRatioReport {
        points,
        skipped,
        violations,
        first_violation_tau,
        strict_holds: violations == 0,
    })
}
