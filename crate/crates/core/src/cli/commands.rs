use serde::Serialize;
use serde_json::{json, Value};

use super::{csv_f64, envelope, value, ConfigErrors, Criterion, Format, Outcome, RunConfig};
use crate::criteria::{
    check_athanassov, check_comparison_fn, check_constantin, check_nagumo, check_theorem_main,
    equivalence_suite, reduce_to_constantin, ProblemSpec,
};
use crate::reparam::{
    alpha_l1_check, build_tau, check_relaxed_bound, exp_reparam_check, generalized_reparam,
    stated_endpoint_root, tau_grid, verify_fixed_point, ReparamError,
};
use crate::solver::{funnel_probe, integrate_ivp, FunnelOptions, OutputGrid, SolverOptions};

/// Accuracy of the t <-> tau tables built by `reparam`.
const TABLE_TOL: f64 = 1e-12;
/// Accuracy of the identity-check quadratures.
const CHECK_TOL: f64 = 1e-10;
/// Number of tau values in the L1 identity check.
const L1_POINTS: usize = 10;

/// Problem with `v` and `lambda` from `reduce_to_constantin(u)`.
pub(crate) fn reduced(p: &ProblemSpec) -> Option<ProblemSpec> {
    let (v, lambda) = reduce_to_constantin(p.u.as_ref()?);
    Some(ProblemSpec {
        v: Some(v),
        lambda: Some(lambda),
        ..p.clone()
    })
}

fn missing(p: &ProblemSpec, field: &str) -> bool {
    match field {
        "u" => p.u.is_none(),
        "v" => p.v.is_none(),
        "lambda" => p.lambda.is_none(),
        "omega" => p.omega.is_none(),
        _ => false,
    }
}

/// Runs one criterion; the report as JSON and whether it passed.
pub(crate) fn run_criterion(
    which: Criterion,
    p: &ProblemSpec,
    cfg: &RunConfig,
    c: Option<f64>,
) -> Result<(Value, bool), String> {
    let check = &cfg.check;
    let report = match which {
        Criterion::Nagumo => check_nagumo(p, check),
        Criterion::Athanassov => check_athanassov(p, check),
        Criterion::Constantin => check_constantin(p, check),
        Criterion::Comparison => check_comparison_fn(p.omega.as_ref().ok_or("no omega")?, check),
        Criterion::Theorem1 => check_theorem_main(p, check),
        Criterion::Theorem1Reduced => {
            let mut r = check_theorem_main(&reduced(p).ok_or("no u")?, check);
            r.criterion = which.name().to_string();
            r
        }
        Criterion::Equivalence => {
            let r = equivalence_suite(p, check)?;
            let mut v = value(&r);
            v["criterion"] = json!(which.name());
            return Ok((v, r.passed));
        }
        Criterion::RelaxedBound => {
            let c = c.ok_or("relaxed-bound needs --c")?;
            let u = p.u.as_ref().ok_or("no u")?;
            let rep = generalized_reparam(u, c, p.t_end, TABLE_TOL).map_err(|e| e.to_string())?;
            let r = check_relaxed_bound(p, &rep, check)?;
            let passed = r.report.passed;
            return Ok((value(&r), passed));
        }
    };
    let passed = report.passed;
    Ok((value(&report), passed))
}

/// Requested criteria that cannot run: an empty list, gauges the problem
/// does not declare (when it is known) and a missing `--c`.
pub(crate) fn requirement_errors(criteria: &[Criterion], p: Option<&ProblemSpec>, c: Option<f64>) -> Vec<String> {
    let mut errors = Vec::new();
    if criteria.is_empty() {
        errors.push("criteria: at least one criterion is required".to_string());
    }
    for &k in criteria {
        if let Some(p) = p {
            let absent: Vec<&str> = k.requires().iter().copied().filter(|f| missing(p, f)).collect();
            if !absent.is_empty() {
                errors.push(format!(
                    "criteria.{k}: problem declares no {} (needed by {})",
                    absent.join(", "),
                    k.requirement_reason()
                ));
            }
        }
        if k == Criterion::RelaxedBound && c.is_none() {
            errors.push("criteria.relaxed-bound: needs --c".to_string());
        }
    }
    errors
}

/// One report per requested criterion; exit 0 when all pass, 1 otherwise.
pub fn cmd_check(cfg: &RunConfig, c: Option<f64>) -> Result<Outcome, ConfigErrors> {
    let p = cfg.spec();
    let mut errors = requirement_errors(&cfg.criteria, Some(p), c);
    if cfg.format != Format::Json {
        errors.push("format: check writes JSON only".to_string());
    }
    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    let mut reports = Vec::new();
    let mut all = true;
    for &k in &cfg.criteria {
        let (v, passed) = run_criterion(k, p, cfg, c).unwrap_or_else(|e| {
            (
                json!({"criterion": k.name(), "passed": false, "error": e}),
                false,
            )
        });
        all &= passed;
        reports.push(v);
    }
    Ok(Outcome {
        code: if all { 0 } else { 1 },
        body: envelope("check", cfg, reports),
    })
}

#[derive(Serialize)]
struct Generalized {
    c: f64,
    stated_tau_plus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    table: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// The t <-> tau table and its identity residuals. CSV output is the table.
pub fn cmd_reparam(cfg: &RunConfig, c: Option<f64>, tau_minus: f64) -> Result<Outcome, ConfigErrors> {
    let p = cfg.spec();
    let (v, lambda) = match (&p.lambda, &p.u) {
        (Some(l), _) => (p.v.clone().or_else(|| p.u.clone()), l.clone()),
        (None, Some(u)) => {
            let (v, l) = reduce_to_constantin(u);
            (Some(v), l)
        }
        (None, None) => {
            return Err(ConfigErrors(vec![
                "problem: reparam needs lambda, or u to derive lambda = u/u'".to_string(),
            ]))
        }
    };
    if c.is_some() && p.u.is_none() {
        return Err(ConfigErrors(vec!["problem: --c needs u".to_string()]));
    }
    if !tau_minus.is_finite() {
        return Err(ConfigErrors(vec![format!("tau_minus: must be finite, got {tau_minus}")]));
    }
    let rep = match build_tau(&lambda, p.t_end, tau_minus, TABLE_TOL) {
        Ok(r) => r,
        Err(e) => {
            let body = match cfg.format {
                Format::Json => envelope("reparam", cfg, vec![json!({ "error": e.to_string() })]),
                Format::Csv => String::new(),
            };
            eprintln!("error: {e}");
            return Ok(Outcome { code: 1, body });
        }
    };
    if cfg.format == Format::Csv {
        let mut body = String::from("t,tau\n");
        for (t, tau) in rep.nodes() {
            body.push_str(&format!("{},{}\n", csv_f64(t), csv_f64(tau)));
        }
        return Ok(Outcome { code: 0, body });
    }
    let mut failed = false;
    let mut note = |r: Result<Value, ReparamError>| -> Value {
        r.unwrap_or_else(|e| {
            failed = true;
            json!({ "error": e.to_string() })
        })
    };
    let fixed = note(verify_fixed_point(&rep, &lambda, CHECK_TOL).map(|r| value(&r)));
    let l1 = v.as_ref().map(|v| {
        let rows: Result<Vec<_>, _> = tau_grid(&rep, L1_POINTS)
            .into_iter()
            .map(|tau| alpha_l1_check(&rep, v, &lambda, tau, CHECK_TOL))
            .collect();
        note(rows.map(|r| {
            let worst = r.iter().map(|x| x.residual).fold(0.0, f64::max);
            json!({ "max_residual": worst, "samples": r })
        }))
    });
    let exp = p
        .u
        .as_ref()
        .filter(|_| p.lambda.is_none())
        .map(|u| note(exp_reparam_check(u, &rep, None, 1e-7).map(|r| value(&r))));
    let generalized = c.map(|c| {
        let stated = stated_endpoint_root(c).ok();
        match generalized_reparam(p.u.as_ref().expect("checked"), c, p.t_end, TABLE_TOL) {
            Ok(g) => Generalized {
                c,
                stated_tau_plus: stated,
                table: Some(json!({
                    "summary": g.summary(),
                    "info": g.generalized_info(),
                    "strictly_monotone": g.is_strictly_monotone(),
                })),
                error: None,
            },
            Err(e) => {
                failed = true;
                Generalized {
                    c,
                    stated_tau_plus: stated,
                    table: None,
                    error: Some(e.to_string()),
                }
            }
        }
    });
    let report = json!({
        "lambda": lambda.to_string(),
        "summary": rep.summary(),
        "fixed_point": fixed,
        "l1_identity": l1,
        "exp_reparam": exp,
        "generalized": generalized.map(|g| value(&g)),
    });
    Ok(Outcome {
        code: if failed { 1 } else { 0 },
        body: envelope("reparam", cfg, vec![report]),
    })
}

/// Trajectory of `x' + f(t, x) = 0`; CSV rows `t,x,local_error` by default.
pub fn cmd_solve(cfg: &RunConfig, t0: f64, x0: f64, t1: f64, samples: Option<usize>) -> Result<Outcome, ConfigErrors> {
    let opts = SolverOptions {
        output: samples.map_or(OutputGrid::Steps, OutputGrid::Uniform),
        ..cfg.solver.options()
    };
    let mut errors = Vec::new();
    if let Err(e) = opts.validate() {
        errors.push(format!("solver: {e}"));
    }
    for (name, v) in [("t0", t0), ("t1", t1)] {
        if !(v > 0.0 && v.is_finite()) {
            errors.push(format!("{name}: must be positive, got {v}"));
        }
    }
    if !x0.is_finite() {
        errors.push(format!("x0: must be finite, got {x0}"));
    }
    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    match integrate_ivp(&cfg.spec().f, t0, x0, t1, &opts) {
        Ok(tr) => Ok(Outcome {
            code: 0,
            body: match cfg.format {
                Format::Csv => tr.to_csv(),
                Format::Json => envelope("solve", cfg, vec![value(&tr)]),
            },
        }),
        Err(e) => {
            eprintln!("error: {e}");
            Ok(Outcome {
                code: 1,
                body: match cfg.format {
                    Format::Csv => String::new(),
                    Format::Json => envelope("solve", cfg, vec![json!({ "error": e.to_string() })]),
                },
            })
        }
    }
}

pub(crate) fn funnel_options(cfg: &RunConfig, p: &ProblemSpec) -> FunnelOptions {
    FunnelOptions {
        n: cfg.solver.n,
        t_floor: cfg.solver.t_floor,
        x_bound: p.x_bound,
        solver: cfg.solver.options(),
        ..FunnelOptions::default()
    }
}

/// Funnel report; CSV rows `x_T,x_floor,reaches_zero`. Verdicts are data,
/// so completion exits 0.
pub fn cmd_funnel(cfg: &RunConfig) -> Result<Outcome, ConfigErrors> {
    let p = cfg.spec();
    let r = funnel_probe(&p.f, p.t_end, &funnel_options(cfg, p)).map_err(|e| ConfigErrors(vec![format!("solver: {e}")]))?;
    let body = match cfg.format {
        Format::Json => envelope("funnel", cfg, vec![value(&r)]),
        Format::Csv => {
            let mut s = String::from("x_T,x_floor,reaches_zero\n");
            for row in &r.samples {
                let xf = row.x_floor.map_or_else(|| "nan".to_string(), csv_f64);
                s.push_str(&format!("{},{},{}\n", csv_f64(row.x_t), xf, row.reaches_zero));
            }
            s
        }
    };
    Ok(Outcome { code: 0, body })
}
