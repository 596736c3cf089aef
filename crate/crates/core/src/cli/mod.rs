//! The `sivp` command line: argument parsing, run configuration and the
//! subcommands `check`, `reparam`, `solve`, `funnel` and `suite`.
//!
//! Every subcommand resolves its arguments into a [`RunConfig`] first and
//! reports all configuration problems together (exit code 2). The command
//! functions in this module are what the binary calls, so a report written
//! by the binary is byte-identical to one produced in-process with the
//! same configuration.

mod commands;
mod suite;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::criteria::{CheckConfig, ProblemSources, ProblemSpec};
use crate::solver::SolverOptions;

pub use commands::{cmd_check, cmd_funnel, cmd_reparam, cmd_solve};
pub use suite::{cmd_suite, run_suite, CorpusEntry, SuiteReport, SuiteRow};

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "sivp", version, about = "Uniqueness criteria for singular scalar initial-value problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample uniqueness criteria on a problem.
    Check {
        #[command(flatten)]
        common: CommonArgs,
        /// Generalized constant `c` for the relaxed-bound criterion.
        #[arg(long)]
        c: Option<f64>,
    },
    /// Build the time change t <-> tau and check its identities.
    Reparam {
        #[command(flatten)]
        common: CommonArgs,
        /// Also build `u(t(tau)) = c exp(-tau) - 1/tau` with this `c`.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        tau_minus: f64,
    },
    /// Integrate x' + f(t, x) = 0 from (t0, x0) to t1.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        t0: f64,
        #[arg(long, allow_negative_numbers = true)]
        x0: f64,
        #[arg(long)]
        t1: f64,
        /// Evenly spaced output points; every accepted step when absent.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Backward funnel probe and forward spread.
    Funnel {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run every check on a corpus of problem files.
    Suite {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        corpus: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Problem file (JSON).
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Solver relative tolerance.
    #[arg(long, allow_negative_numbers = true)]
    pub rtol: Option<f64>,
    /// Solver absolute tolerance.
    #[arg(long, allow_negative_numbers = true)]
    pub atol: Option<f64>,
    /// Right end of the interval (0, T]; overrides the problem file.
    #[arg(long = "T", allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    /// Funnel floor time; defaults to 1e-6 T.
    #[arg(long, allow_negative_numbers = true)]
    pub t_floor: Option<f64>,
    /// Funnel grid size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Smallest eps of the comparison-condition grid.
    #[arg(long, allow_negative_numbers = true)]
    pub eps_min: Option<f64>,
    /// Largest eps of the comparison-condition grid.
    #[arg(long, allow_negative_numbers = true)]
    pub eps_max: Option<f64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub criteria: Vec<Criterion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    Nagumo,
    Athanassov,
    Constantin,
    Comparison,
    Theorem1,
    Theorem1Reduced,
    Equivalence,
    RelaxedBound,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Nagumo => "nagumo",
            Criterion::Athanassov => "athanassov",
            Criterion::Constantin => "constantin",
            Criterion::Comparison => "comparison",
            Criterion::Theorem1 => "theorem1",
            Criterion::Theorem1Reduced => "theorem1-reduced",
            Criterion::Equivalence => "equivalence",
            Criterion::RelaxedBound => "relaxed-bound",
        }
    }

    /// Problem fields the criterion needs besides `f`.
    pub fn requires(self) -> &'static [&'static str] {
        match self {
            Criterion::Nagumo => &[],
            Criterion::Athanassov => &["u"],
            Criterion::Comparison => &["omega"],
            Criterion::Constantin | Criterion::Theorem1Reduced | Criterion::Equivalence => &["u", "omega"],
            Criterion::Theorem1 => &["v", "lambda", "omega"],
            Criterion::RelaxedBound => &["u", "omega"],
        }
    }

    /// What the gauge requirement comes from, for configuration errors.
    fn requirement_reason(self) -> &'static str {
        match self {
            Criterion::Nagumo => "the Lipschitz bound 1/t",
            Criterion::Athanassov => "the Lipschitz bound u'/u",
            Criterion::Comparison => "the comparison condition int_0^r omega(s)/s ds <= r",
            Criterion::Constantin => "the bound |f| <= u'/u omega(|x|)",
            Criterion::Theorem1 => "the bound |f| <= omega(|x|)/lambda and the comparison condition in v and lambda",
            Criterion::Theorem1Reduced | Criterion::Equivalence => "the reduction v = u, lambda = u/u'",
            Criterion::RelaxedBound => "the bound |f| <= u'/(u - 1/tau^2) omega(|x|)",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Solver and funnel settings shared by `solve`, `funnel` and `suite`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSettings {
    pub rtol: f64,
    pub atol: f64,
    /// Absent means `1e-6 T`.
    pub t_floor: Option<f64>,
    pub n: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverSettings {
            rtol: o.rtol,
            atol: o.atol,
            t_floor: None,
            n: 201,
        }
    }
}

impl SolverSettings {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            rtol: self.rtol,
            atol: self.atol,
            ..SolverOptions::default()
        }
    }
}

/// Fully resolved configuration of one invocation; embedded in reports.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSources>,
    #[serde(skip)]
    pub spec: Option<ProblemSpec>,
    pub check: CheckConfig,
    pub solver: SolverSettings,
    pub format: Format,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub criteria: Vec<Criterion>,
}

impl RunConfig {
    /// Defaults throughout, with `problem` loaded from sources.
    pub fn for_problem(src: ProblemSources) -> Result<RunConfig, Vec<String>> {
        let check = CheckConfig::default();
        let spec = ProblemSpec::from_sources(&src, &check).map_err(|v| v.iter().map(|i| format!("problem.{i}")).collect::<Vec<_>>())?;
        Ok(RunConfig {
            problem: Some(resolved(&src, &spec)),
            spec: Some(spec),
            check,
            solver: SolverSettings::default(),
            format: Format::Json,
            criteria: Vec::new(),
        })
    }

    pub(crate) fn spec(&self) -> &ProblemSpec {
        self.spec.as_ref().expect("problem-bound commands resolve a problem")
    }
}

/// Sources with `T` and `x_bound` filled in.
fn resolved(src: &ProblemSources, spec: &ProblemSpec) -> ProblemSources {
    ProblemSources {
        t_end: Some(spec.t_end),
        x_bound: Some(spec.x_bound),
        ..src.clone()
    }
}

pub fn load_problem(path: &Path) -> Result<ProblemSources, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("problem: cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("problem: {}: {e}", path.display()))
}

/// Builds the run configuration; every problem is reported with a field path.
pub fn resolve(common: &CommonArgs, needs_problem: bool, default_format: Format) -> Result<RunConfig, Vec<String>> {
    let mut errors = Vec::new();
    let mut check = CheckConfig::default();
    if let Some(v) = common.eps_min {
        check.eps_min = v;
    }
    if let Some(v) = common.eps_max {
        check.eps_max = v;
    }
    errors.extend(check.validate());
    let mut solver = SolverSettings::default();
    if let Some(v) = common.rtol {
        solver.rtol = v;
    }
    if let Some(v) = common.atol {
        solver.atol = v;
    }
    solver.t_floor = common.t_floor;
    if let Some(v) = common.n {
        solver.n = v;
    }
    if let Err(e) = solver.options().validate() {
        errors.push(format!("solver: {e}"));
    }
    if solver.n < 3 {
        errors.push(format!("solver.n: must be at least 3, got {}", solver.n));
    }
    let mut problem = None;
    let mut spec = None;
    match (&common.problem, needs_problem) {
        (Some(path), _) => match load_problem(path) {
            Ok(mut src) => {
                if common.t_end.is_some() {
                    src.t_end = common.t_end;
                }
                match ProblemSpec::from_sources(&src, &check) {
                    Ok(s) => {
                        problem = Some(resolved(&src, &s));
                        spec = Some(s);
                    }
                    Err(issues) => errors.extend(issues.iter().map(|i| format!("problem.{i}"))),
                }
            }
            Err(e) => errors.push(e),
        },
        (None, true) => errors.push("problem: --problem is required".to_string()),
        (None, false) => {}
    }
    if let (Some(tf), Some(s)) = (solver.t_floor, &spec) {
        if !(tf > 0.0 && tf < s.t_end) {
            errors.push(format!("solver.t_floor: must lie in (0, T), got {tf}"));
        }
    }
    let mut criteria: Vec<Criterion> = Vec::new();
    for &k in &common.criteria {
        if !criteria.contains(&k) {
            criteria.push(k);
        }
    }
    if errors.is_empty() {
        Ok(RunConfig {
            problem,
            spec,
            check,
            solver,
            format: common.format.unwrap_or(default_format),
            criteria,
        })
    } else {
        Err(errors)
    }
}

/// Result of one subcommand: exit code and the report text.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.0 {
            writeln!(f, "error: {e}")?;
        }
        Ok(())
    }
}

/// Runs one parsed command line; `Err` means exit code 2.
pub fn run(cli: &Cli) -> Result<(Outcome, Option<PathBuf>), ConfigErrors> {
    let (outcome, common) = match &cli.command {
        Command::Check { common, c } => {
            let cfg = resolve(common, true, Format::Json).map_err(|mut errors| {
                // report unusable criteria together with the other problems
                let spec = common
                    .problem
                    .as_deref()
                    .and_then(|path| load_problem(path).ok())
                    .and_then(|src| ProblemSpec::from_sources(&src, &CheckConfig::default()).ok());
                errors.extend(commands::requirement_errors(&common.criteria, spec.as_ref(), *c));
                ConfigErrors(errors)
            })?;
            (cmd_check(&cfg, *c)?, common)
        }
        Command::Reparam { common, c, tau_minus } => {
            let cfg = resolve(common, true, Format::Json).map_err(ConfigErrors)?;
            (cmd_reparam(&cfg, *c, *tau_minus)?, common)
        }
        Command::Solve {
            common,
            t0,
            x0,
            t1,
            samples,
        } => {
            let cfg = resolve(common, true, Format::Csv).map_err(ConfigErrors)?;
            (cmd_solve(&cfg, *t0, *x0, *t1, *samples)?, common)
        }
        Command::Funnel { common } => {
            let cfg = resolve(common, true, Format::Json).map_err(ConfigErrors)?;
            (cmd_funnel(&cfg)?, common)
        }
        Command::Suite { common, corpus } => {
            let cfg = resolve(common, false, Format::Json).map_err(ConfigErrors)?;
            (cmd_suite(&cfg, corpus)?, common)
        }
    };
    Ok((outcome, common.out.clone()))
}

/// `{schema_version, command, config, reports}` as pretty JSON.
pub(crate) fn envelope(command: &str, cfg: &RunConfig, reports: Vec<serde_json::Value>) -> String {
    #[derive(Serialize)]
    struct Envelope<'a> {
        schema_version: u32,
        command: &'a str,
        config: &'a RunConfig,
        reports: Vec<serde_json::Value>,
    }
    let mut s = serde_json::to_string_pretty(&Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        config: cfg,
        reports,
    })
    .expect("reports serialize");
    s.push('\n');
    s
}

pub(crate) fn value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("reports serialize")
}

/// 17 significant digits.
pub(crate) fn csv_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_flags() {
        let cli = Cli::try_parse_from([
            "sivp", "check", "--problem", "p.json", "--criteria", "nagumo,constantin,theorem1-reduced", "--T", "0.5",
            "--eps-min", "1e-3",
        ])
        .unwrap();
        match cli.command {
            Command::Check { common, .. } => {
                assert_eq!(
                    common.criteria,
                    [Criterion::Nagumo, Criterion::Constantin, Criterion::Theorem1Reduced]
                );
                assert_eq!(common.t_end, Some(0.5));
                assert_eq!(common.eps_min, Some(1e-3));
            }
            c => panic!("{c:?}"),
        }
        let cli = Cli::try_parse_from(["sivp", "solve", "--problem", "p", "--t0", "1", "--x0", "-0.5", "--t1", "0.1"]).unwrap();
        assert!(matches!(cli.command, Command::Solve { x0, .. } if x0 == -0.5));
    }

    #[test]
    fn configuration_errors_are_collected() {
        let common = CommonArgs {
            rtol: Some(-1.0),
            n: Some(1),
            eps_min: Some(10.0),
            eps_max: Some(1.0),
            ..CommonArgs::default()
        };
        let errs = resolve(&common, true, Format::Json).unwrap_err();
        assert!(errs.len() >= 4, "{errs:?}");
        assert!(errs.iter().any(|e| e.starts_with("problem:")));
        assert!(errs.iter().any(|e| e.starts_with("solver.n")));
    }

    #[test]
    fn csv_floats_have_seventeen_digits() {
        assert_eq!(csv_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(csv_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
