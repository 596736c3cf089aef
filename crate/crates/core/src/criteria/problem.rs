use serde::{Deserialize, Serialize};

use crate::expr::{parse_with_vars, Expression};

use super::CheckConfig;

/// Problem as written in a problem file: expressions as source text.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSources {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// `f(t, x)` in `x' + f(t, x) = 0`.
    pub f: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<String>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_bound: Option<f64>,
}

impl ProblemSources {
    pub fn new(f: &str) -> ProblemSources {
        ProblemSources {
            f: f.to_string(),
            ..ProblemSources::default()
        }
    }

    pub fn with_u(mut self, u: &str) -> Self {
        self.u = Some(u.to_string());
        self
    }

    pub fn with_v(mut self, v: &str) -> Self {
        self.v = Some(v.to_string());
        self
    }

    pub fn with_lambda(mut self, lambda: &str) -> Self {
        self.lambda = Some(lambda.to_string());
        self
    }

    pub fn with_omega(mut self, omega: &str) -> Self {
        self.omega = Some(omega.to_string());
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = Some(t_end);
        self
    }

    /// Parses and validates with the default sampling grid.
    pub fn load(&self) -> Result<ProblemSpec, Vec<ProblemIssue>> {
        ProblemSpec::from_sources(self, &CheckConfig::default())
    }
}

/// One problem with a loaded problem, located by field path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemIssue {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ProblemIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// A parsed problem: the right-hand side, optional gauges, the interval
/// `(0, T]` and the box `|x| <= x_bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: Option<String>,
    pub f: Expression,
    pub u: Option<Expression>,
    pub v: Option<Expression>,
    pub lambda: Option<Expression>,
    pub omega: Option<Expression>,
    pub t_end: f64,
    pub x_bound: f64,
}

const ZERO_SOLUTION_TOL: f64 = 1e-12;

impl ProblemSpec {
    /// Parses every expression and checks the load-time invariants on the
    /// t-grid of `config`: `f(t, 0) = 0`, and for declared gauges
    /// `u' > 0`, `v' > 0`, `lambda > 0`. Returns every issue found.
    pub fn from_sources(
        src: &ProblemSources,
        config: &CheckConfig,
    ) -> Result<ProblemSpec, Vec<ProblemIssue>> {
        let mut issues = Vec::new();
        let mut field = |path: &str, text: Option<&String>, vars: &[&str]| {
            let text = text?;
            match parse_with_vars(text, vars) {
                Ok(e) => Some(e),
                Err(e) => {
                    issues.push(ProblemIssue {
                        path: path.to_string(),
                        message: e.to_string(),
                    });
                    None
                }
            }
        };
        let f = field("f", Some(&src.f), &["t", "x"]);
        let u = field("u", src.u.as_ref(), &["t"]);
        let v = field("v", src.v.as_ref(), &["t"]);
        let lambda = field("lambda", src.lambda.as_ref(), &["t"]);
        let omega = field("omega", src.omega.as_ref(), &["r"]);

        let t_end = src.t_end.unwrap_or(1.0);
        if !(t_end > 0.0 && t_end <= 1.0) {
            issues.push(issue("T", format!("must lie in (0, 1], got {t_end}")));
        }
        let x_bound = src.x_bound.unwrap_or(1.0);
        if !(x_bound > 0.0 && x_bound.is_finite()) {
            issues.push(issue("x_bound", format!("must be positive, got {x_bound}")));
        }
        if !issues.is_empty() {
            return Err(issues);
        }
        let spec = ProblemSpec {
            name: src.name.clone(),
            f: f.expect("parsed"),
            u,
            v,
            lambda,
            omega,
            t_end,
            x_bound,
        };
        issues.extend(spec.validate(config));
        if issues.is_empty() {
            Ok(spec)
        } else {
            Err(issues)
        }
    }

    /// Load-time invariants on the t-grid of `config`.
    pub fn validate(&self, config: &CheckConfig) -> Vec<ProblemIssue> {
        let mut issues = Vec::new();
        let grid = config.t_grid(self.t_end);
        for &t in &grid {
            match self.f.eval_with(&[("t", t), ("x", 0.0)]) {
                Ok(y) if y.abs() <= ZERO_SOLUTION_TOL => {}
                Ok(y) => {
                    issues.push(issue("f", format!("f(t, 0) = {y} != 0 at t = {t}")));
                    break;
                }
                Err(e) => {
                    issues.push(issue("f", format!("f(t, 0) not evaluable at t = {t}: {e}")));
                    break;
                }
            }
        }
        let mut positive = |path: &str, e: &Expression| {
            for &t in &grid {
                match e.eval_with(&[("t", t)]) {
                    Ok(y) if y > 0.0 => {}
                    // Exponentially flat gauges underflow near 0.
                    Ok(y) if y == 0.0 && t < self.t_end * 1e-2 => {}
                    Ok(y) => {
                        issues.push(issue(path, format!("must be positive on (0, T], got {y} at t = {t}")));
                        return;
                    }
                    Err(err) => {
                        issues.push(issue(path, format!("not evaluable at t = {t}: {err}")));
                        return;
                    }
                }
            }
        };
        if let Some(u) = &self.u {
            positive("u", u);
            positive("u'", &u.differentiate("t"));
        }
        if let Some(v) = &self.v {
            positive("v", v);
            positive("v'", &v.differentiate("t"));
        }
        if let Some(lambda) = &self.lambda {
            positive("lambda", lambda);
        }
        issues
    }

    pub(crate) fn require<'a>(
        &self,
        field: &'a Option<Expression>,
        name: &str,
    ) -> Result<&'a Expression, String> {
        field
            .as_ref()
            .ok_or_else(|| format!("problem declares no `{name}`"))
    }
}

fn issue(path: &str, message: String) -> ProblemIssue {
    ProblemIssue {
        path: path.to_string(),
        message,
    }
}
