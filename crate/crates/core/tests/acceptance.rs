//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::f64::consts::{E, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::Value;
use singular_ivp::cli::{cmd_suite, resolve, CommonArgs, CorpusEntry, Format, RunConfig};
use singular_ivp::criteria::{
    check_athanassov, check_comparison_fn, check_constantin, check_nagumo, check_theorem_main,
    equivalence_suite, recheck_witness, reduce_to_constantin, theorem_h2_margins, CheckConfig,
    CriterionReport, ProblemSources, ProblemSpec, Witness,
};
use singular_ivp::expr::parse;
use singular_ivp::quadrature::{integrate, integrate_singular_left, integrate_to_infinity, plain, QuadResult};
use singular_ivp::reparam::{
    alpha_l1_check, build_tau, exp_reparam_check, generalized_reparam, stated_endpoint_root,
    tau_grid, transform, verify_fixed_point,
};
use singular_ivp::solver::{
    funnel_probe, integrate_fn, integrate_ivp, order_study, FunnelOptions, OutputGrid, SolverOptions, ORDER,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn corpus() -> Vec<(String, ProblemSpec)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|path| {
            let entry: CorpusEntry = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
            let p = entry.problem.load().unwrap_or_else(|e| panic!("{}: {e:?}", path.display()));
            (path.file_name().unwrap().to_string_lossy().into_owned(), p)
        })
        .collect()
}

fn load(src: ProblemSources) -> ProblemSpec {
    src.load().unwrap_or_else(|e| panic!("{e:?}"))
}

fn rel_err(value: f64, exact: f64) -> f64 {
    (value - exact).abs() / exact.abs().max(f64::MIN_POSITIVE)
}

fn quadrature_oracles() -> Outcome {
    const TOL: f64 = 1e-11;
    type Run = Box<dyn Fn() -> QuadResult>;
    // label, computation, exact value (None when divergent)
    type Case = (&'static str, Run, Option<f64>);
    let q = |r: Result<QuadResult, _>| -> QuadResult { r.unwrap_or_else(|e: singular_ivp::quadrature::QuadError| panic!("{e}")) };
    let cases: Vec<Case> = vec![
        ("int_0^1 w^-1/2", Box::new(move || q(integrate_singular_left(plain(|w: f64| w.powf(-0.5)), 1.0, TOL))), Some(2.0)),
        ("int_0^inf e^-s", Box::new(move || q(integrate_to_infinity(plain(|s: f64| (-s).exp()), 0.0, TOL))), Some(1.0)),
        ("int_0^1 1/w", Box::new(move || q(integrate_singular_left(plain(|w: f64| 1.0 / w), 1.0, TOL))), None),
        ("int_1^inf 1/s", Box::new(move || q(integrate_to_infinity(plain(|s: f64| 1.0 / s), 1.0, TOL))), None),
        ("int_0^pi sin", Box::new(move || q(integrate(plain(f64::sin), 0.0, PI, TOL))), Some(2.0)),
        ("int_0^1 x^2", Box::new(move || q(integrate(plain(|x: f64| x * x), 0.0, 1.0, TOL))), Some(1.0 / 3.0)),
        ("int_0^2 e^x", Box::new(move || q(integrate(plain(f64::exp), 0.0, 2.0, TOL))), Some(E * E - 1.0)),
        ("int_0^1 1/(1+x^2)", Box::new(move || q(integrate(plain(|x: f64| 1.0 / (1.0 + x * x)), 0.0, 1.0, TOL))), Some(PI / 4.0)),
        ("int_0^1 ln w", Box::new(move || q(integrate_singular_left(plain(f64::ln), 1.0, TOL))), Some(-1.0)),
        ("int_0^1 w^-0.9", Box::new(move || q(integrate_singular_left(plain(|w: f64| w.powf(-0.9)), 1.0, TOL))), Some(10.0)),
        ("int_1^inf 1/s^2", Box::new(move || q(integrate_to_infinity(plain(|s: f64| 1.0 / (s * s)), 1.0, TOL))), Some(1.0)),
        ("int_0^inf 1/(1+s^2)", Box::new(move || q(integrate_to_infinity(plain(|s: f64| 1.0 / (1.0 + s * s)), 0.0, TOL))), Some(PI / 2.0)),
    ];
    ensure(cases.len() == 12, || format!("{} cases", cases.len()))?;
    let mut worst: f64 = 0.0;
    for (label, run, exact) in &cases {
        let r = run();
        match exact {
            Some(exact) => {
                ensure(r.converged && !r.diverged, || format!("{label}: not converged {r:?}"))?;
                let e = rel_err(r.value, *exact);
                ensure(e <= 1e-8, || format!("{label}: {} vs {exact}, rel {e:e}", r.value))?;
                worst = worst.max(e);
            }
            None => ensure(r.diverged, || format!("{label}: divergence not flagged {r:?}"))?,
        }
    }
    Ok(format!("12 integrals, worst rel error {worst:.1e}, 2 divergences flagged"))
}

fn hypothesis_margin(r: &CriterionReport, name: &str) -> Result<f64, String> {
    r.hypotheses
        .iter()
        .find(|h| h.name == name)
        .map(|h| h.worst_margin)
        .ok_or_else(|| format!("{}: no hypothesis {name}", r.criterion))
}

fn comparison_gate() -> Outcome {
    let c = CheckConfig::default();
    let report = |s: &str| check_comparison_fn(&parse(s).unwrap(), &c);
    let linear = report("r");
    ensure(linear.passed, || format!("omega = r failed: {linear:?}"))?;
    let m = hypothesis_margin(&linear, "integral-bound")?;
    ensure(m.abs() <= 1e-9, || format!("omega = r integral margin {m:e}"))?;
    let square = report("r^2");
    ensure(square.passed, || format!("omega = r^2 failed: {square:?}"))?;
    let root = report("sqrt(r)");
    ensure(!root.passed, || "omega = sqrt(r) passed".into())?;
    let h = root.hypotheses.iter().find(|h| h.name == "integral-bound").ok_or("no integral-bound")?;
    let w = h.witness.as_ref().ok_or("no witness")?;
    let r = w.point.get("r").copied().unwrap_or(f64::NAN);
    ensure(!h.passed && r == 1.0, || format!("sqrt witness at r = {r}"))?;
    ensure((h.worst_margin + 1.0).abs() <= 1e-6, || format!("sqrt margin {}", h.worst_margin))?;
    Ok(format!("r margin {m:.1e}; sqrt(r) witness r = 1, margin {:.9}", h.worst_margin))
}

fn h2_equality_case() -> Outcome {
    let c = CheckConfig::default();
    let p = load(ProblemSources::new("t*x").with_v("t").with_lambda("t").with_omega("r"));
    let samples = theorem_h2_margins(&p, &c)?;
    let expected = c.eps_grid().len() * c.t_grid(p.t_end).len();
    ensure(samples.len() == expected, || format!("{} of {expected} grid pairs sampled", samples.len()))?;
    let worst = samples.iter().map(|s| s.margin.abs()).fold(0.0, f64::max);
    ensure(worst <= 1e-7, || format!("worst |margin| {worst:e}"))?;
    Ok(format!("{} (eps, t) pairs, max |margin| {worst:.1e}", samples.len()))
}

fn reduction_equivalence() -> Outcome {
    let c = CheckConfig::default();
    let mut n = 0;
    let mut worst: f64 = 0.0;
    for (file, p) in corpus() {
        if p.u.is_none() || p.omega.is_none() {
            continue;
        }
        let r = equivalence_suite(&p, &c).map_err(|e| format!("{file}: {e}"))?;
        let reduced = ProblemSpec {
            v: Some(parse(&r.reduced_v).unwrap()),
            lambda: Some(parse(&r.reduced_lambda).unwrap()),
            ..p.clone()
        };
        // independent of the suite's own bookkeeping
        let a = check_constantin(&p, &c).passed;
        let b = check_theorem_main(&reduced, &c).passed;
        ensure(a == b && r.verdicts_agree, || format!("{file}: constantin {a}, theorem {b}"))?;
        for m in &r.margins {
            ensure(!m.exceeds && m.difference <= 1e-6, || format!("{file}: {m:?}"))?;
            if m.difference.is_finite() {
                worst = worst.max(m.difference);
            }
        }
        n += 1;
    }
    ensure(n >= 6, || format!("only {n} triples"))?;
    Ok(format!("{n} triples agree, max margin difference {worst:.1e}"))
}

fn fixed_point() -> Outcome {
    let mut worst: f64 = 0.0;
    for lambda in ["1", "t", "sqrt(t)", "t/2"] {
        let l = parse(lambda).unwrap();
        let rep = build_tau(&l, 1.0, 0.0, 1e-12).map_err(|e| format!("{lambda}: {e}"))?;
        let r = verify_fixed_point(&rep, &l, 1e-10).map_err(|e| format!("{lambda}: {e}"))?;
        ensure(r.samples.len() == 50, || format!("{lambda}: {} points", r.samples.len()))?;
        ensure(r.max_residual < 1e-6, || format!("{lambda}: residual {:e}", r.max_residual))?;
        worst = worst.max(r.max_residual);
    }
    // lambda = t, T = 1, tau_minus = 0: t(tau) = exp(-tau)
    let rep = build_tau(&parse("t").unwrap(), 1.0, 0.0, 1e-12).map_err(|e| e.to_string())?;
    let mut inverse: f64 = 0.0;
    for tau in tau_grid(&rep, 50) {
        let t = rep.t_of_tau(tau).map_err(|e| e.to_string())?;
        inverse = inverse.max((t - (-tau).exp()).abs());
    }
    ensure(inverse <= 1e-8, || format!("t = exp(-tau) deviation {inverse:e}"))?;
    Ok(format!("max residual {worst:.1e}; exp(-tau) inverse within {inverse:.1e}"))
}

fn l1_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for (file, p) in corpus() {
        let (v, lambda) = match (&p.v, &p.lambda, &p.u) {
            (Some(v), Some(l), _) => (v.clone(), l.clone()),
            (_, _, Some(u)) => reduce_to_constantin(u),
            _ => continue,
        };
        let rep = build_tau(&lambda, p.t_end, 0.0, 1e-12).map_err(|e| format!("{file}: {e}"))?;
        let taus = tau_grid(&rep, 10);
        ensure(taus.len() == 10, || format!("{file}: {} tau values", taus.len()))?;
        for tau in taus {
            let r = alpha_l1_check(&rep, &v, &lambda, tau, 1e-10).map_err(|e| format!("{file}: {e}"))?;
            ensure(r.residual < 1e-6, || format!("{file}: tau {tau}: {r:?}"))?;
            worst = worst.max(r.residual);
        }
        pairs += 1;
    }
    Ok(format!("{pairs} gauge pairs x 10 tau, max residual {worst:.1e}"))
}

fn exponential_form() -> Outcome {
    let mut worst: f64 = 0.0;
    for u in ["t", "t^2", "exp(-1/t)"] {
        let ue = parse(u).unwrap();
        let (_, lambda) = reduce_to_constantin(&ue);
        let rep = build_tau(&lambda, 1.0, 0.0, 1e-12).map_err(|e| format!("{u}: {e}"))?;
        let r = exp_reparam_check(&ue, &rep, None, 1e-7).map_err(|e| format!("{u}: {e}"))?;
        ensure(r.max_residual < 1e-7, || format!("{u}: residual {:e}", r.max_residual))?;
        worst = worst.max(r.max_residual);
    }
    Ok(format!("max residual {worst:.1e}"))
}

fn generalized_form() -> Outcome {
    // oracle: plain bisection on tau exp(tau) = 1
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid.exp() < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = stated_endpoint_root(1.0).map_err(|e| e.to_string())?;
    let resid = (root * root.exp() - 1.0).abs();
    ensure(resid < 1e-10 && (root - lo).abs() < 1e-10, || format!("tau_plus {root}, residual {resid:e}, oracle {lo}"))?;
    // the table itself: t(tau) from u(t(tau)) = exp(-tau) - 1/tau
    let table = generalized_reparam(&parse("t").unwrap(), 1.0, 1.0, 1e-12);
    match table {
        Ok(rep) => {
            ensure(rep.is_strictly_monotone(), || "t(tau) table is not strictly monotone".into())?;
            Ok(format!("tau_plus = {root:.10}, residual {resid:.1e}; table strictly monotone"))
        }
        Err(e) => Err(format!("tau_plus = {root:.10} (residual {resid:.1e}) but no c = 1 table: {e}")),
    }
}

fn funnel_and_checkers() -> Outcome {
    let opts = FunnelOptions {
        n: 201,
        t_floor: Some(1e-6),
        ..FunnelOptions::default()
    };
    let peano = funnel_probe(&parse("-sqrt(abs(x))").unwrap(), 1.0, &opts).map_err(|e| e.to_string())?;
    ensure((peano.basin_width - 0.25).abs() <= 0.03, || format!("peano basin {}", peano.basin_width))?;
    let linear = funnel_probe(&parse("x").unwrap(), 1.0, &opts).map_err(|e| e.to_string())?;
    ensure(linear.marked <= 2, || format!("linear basin {} cells", linear.marked))?;

    let c = CheckConfig::default();
    let p = load(ProblemSources::new("-sqrt(abs(x))").with_u("t").with_omega("r"));
    let nagumo = check_nagumo(&p, &c);
    let h = nagumo.hypotheses.iter().find(|h| h.name == "lipschitz").ok_or("no lipschitz hypothesis")?;
    let w = h.witness.as_ref().ok_or("no lipschitz witness")?;
    let near: f64 = ["x1", "x2"].iter().filter_map(|k| w.point.get(*k)).map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    let spacing = 2.0 * p.x_bound / (c.x_points - 1) as f64;
    ensure(!nagumo.passed && !h.passed && near <= spacing, || format!("nagumo witness {:?}", w.point))?;
    let reduced = ProblemSpec {
        v: p.u.clone(),
        lambda: Some(reduce_to_constantin(p.u.as_ref().unwrap()).1),
        ..p.clone()
    };
    for r in [check_athanassov(&p, &c), check_constantin(&p, &c), check_theorem_main(&reduced, &c)] {
        ensure(!r.passed, || format!("peano passes {}", r.criterion))?;
    }
    let lin = load(ProblemSources::new("x").with_u("sqrt(t)").with_omega("r").with_t_end(0.25));
    let lin_reduced = ProblemSpec {
        v: lin.u.clone(),
        lambda: Some(reduce_to_constantin(lin.u.as_ref().unwrap()).1),
        ..lin.clone()
    };
    for r in [check_athanassov(&lin, &c), check_constantin(&lin, &c), check_theorem_main(&lin_reduced, &c)] {
        ensure(r.passed, || format!("linear fails {}", r.criterion))?;
    }
    Ok(format!(
        "peano basin {:.3}, linear {} cells; nagumo witness {:?}",
        peano.basin_width, linear.marked, w.point
    ))
}

fn change_of_variable() -> Outcome {
    let p = load(ProblemSources::new("t*x").with_v("t").with_lambda("t"));
    // tau_minus = 1 keeps the tau-domain positive for the solver
    let rep = build_tau(p.lambda.as_ref().unwrap(), p.t_end, 1.0, 1e-12).map_err(|e| e.to_string())?;
    let field = transform(&p, &rep)?;
    let opts = SolverOptions {
        rtol: 1e-11,
        atol: 1e-13,
        output: OutputGrid::Uniform(50),
        ..SolverOptions::default()
    };
    let x_end = 0.5;
    let tau_end = rep.tau_of_t(1e-3).map_err(|e| e.to_string())?;
    let rhs = |tau: f64, y: f64| field.field(tau, y).map_err(|e| e.to_string());
    let tr = integrate_fn(&rhs, 1.0, x_end, tau_end, &opts).map_err(|e| e.to_string())?;
    ensure(tr.completed(), || format!("tau-domain run: {:?}", tr.status))?;
    let t_opts = SolverOptions {
        rtol: 1e-11,
        atol: 1e-13,
        ..SolverOptions::default()
    };
    let mut worst: f64 = 0.0;
    for s in &tr.samples[1..] {
        let t = rep.t_of_tau(s.t).map_err(|e| e.to_string())?;
        let x = integrate_ivp(&p.f, p.t_end, x_end, t, &t_opts).map_err(|e| e.to_string())?.last().x;
        worst = worst.max((s.x - x).abs());
    }
    ensure(worst < 1e-5, || format!("max deviation {worst:e}"))?;
    Ok(format!("{} tau samples, max deviation {worst:.1e}", tr.samples.len() - 1))
}

fn solver_order() -> Outcome {
    let s = order_study(&[1e-4, 1e-6, 1e-8], 100.1).map_err(|e| e.to_string())?;
    ensure(s.nominal_order == ORDER, || format!("nominal {}", s.nominal_order))?;
    ensure((s.measured_order - ORDER as f64).abs() <= 0.5, || format!("measured {}", s.measured_order))?;
    Ok(format!("measured {:.2}, nominal {}", s.measured_order, s.nominal_order))
}

/// Failed hypotheses with witnesses anywhere in a JSON report tree.
fn failure_witnesses(v: &Value, out: &mut Vec<Value>) {
    match v {
        Value::Object(o) => {
            if let Some(Value::Array(hs)) = o.get("hypotheses") {
                for h in hs {
                    if h.get("passed") == Some(&Value::Bool(false)) {
                        if let Some(w) = h.get("witness") {
                            out.push(w.clone());
                        }
                    }
                }
            }
            o.values().for_each(|x| failure_witnesses(x, out));
        }
        Value::Array(a) => a.iter().for_each(|x| failure_witnesses(x, out)),
        _ => {}
    }
}

fn suite_config() -> RunConfig {
    resolve(&CommonArgs::default(), false, Format::Json).unwrap_or_else(|e| panic!("{e:?}"))
}

fn determinism_and_witnesses() -> Outcome {
    let cfg = suite_config();
    let a = cmd_suite(&cfg, &corpus_dir()).map_err(|e| e.to_string())?;
    let b = cmd_suite(&cfg, &corpus_dir()).map_err(|e| e.to_string())?;
    ensure(a.body == b.body, || "suite output differs between runs".into())?;
    ensure(a.code == 0, || format!("suite exit {}", a.code))?;
    let json: Value = serde_json::from_str(&a.body).map_err(|e| e.to_string())?;
    let mut found = Vec::new();
    failure_witnesses(&json, &mut found);
    ensure(!found.is_empty(), || "no failure witnesses in the suite output".into())?;
    let tol = cfg.check.tol;
    for v in &found {
        let w: Witness = serde_json::from_value(v.clone()).map_err(|e| format!("{e}: {v}"))?;
        let r = recheck_witness(&w, tol)?;
        let beyond = match &r.error {
            Some(_) => true,
            None if w.check.is_strict() => r.margin <= 0.0,
            None => r.margin < -tol,
        };
        ensure(r.violated && beyond, || format!("witness does not recheck: {v} -> {r:?}"))?;
    }
    Ok(format!("{} bytes identical; {} failure witnesses recheck as violations", a.body.len(), found.len()))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("quadrature oracles", quadrature_oracles),
        ("comparison-function gate", comparison_gate),
        ("H2 equality case", h2_equality_case),
        ("reduction equivalence", reduction_equivalence),
        ("reparametrization fixed point", fixed_point),
        ("L1 identity", l1_identity),
        ("exponential reparametrization", exponential_form),
        ("generalized reparametrization", generalized_form),
        ("non-uniqueness detection", funnel_and_checkers),
        ("change-of-variable consistency", change_of_variable),
        ("solver order", solver_order),
        ("determinism and witnesses", determinism_and_witnesses),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({secs:.2}s) {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({secs:.2}s) {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
