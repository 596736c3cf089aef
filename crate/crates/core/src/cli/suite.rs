use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::commands::{funnel_options, run_criterion};
use super::{envelope, value, ConfigErrors, Criterion, Format, Outcome, RunConfig};
use crate::criteria::{ProblemSources, ProblemSpec};
use crate::solver::funnel_probe;

/// A passing criterion next to a funnel basin wider than this many grid
/// cells raises the contradiction alarm.
pub const ALARM_CELLS: usize = 10;

/// One corpus file: a problem with pinned verdicts and their justification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusEntry {
    pub problem: ProblemSources,
    /// Constant of the generalized form for the relaxed-bound check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxed_c: Option<f64>,
    /// Expected verdict per check name (criteria and `funnel-unique`).
    pub expected: BTreeMap<String, bool>,
    /// Closed-form justification per check name.
    #[serde(default)]
    pub basis: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    pub file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub verdicts: BTreeMap<String, bool>,
    pub expected: BTreeMap<String, bool>,
    pub mismatches: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basin_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basin_cells: Option<usize>,
    pub alarm: bool,
    pub reports: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    /// Check names in column order.
    pub columns: Vec<String>,
    pub rows: Vec<SuiteRow>,
    pub mismatches: usize,
    pub alarms: usize,
    pub errors: usize,
}

impl SuiteReport {
    pub fn clean(&self) -> bool {
        self.mismatches == 0 && self.alarms == 0 && self.errors == 0
    }
}

/// Funnel verdict column: true when the basin is at most two grid cells.
pub const FUNNEL_UNIQUE: &str = "funnel-unique";

const COLUMNS: [Criterion; 7] = [
    Criterion::Nagumo,
    Criterion::Athanassov,
    Criterion::Constantin,
    Criterion::Theorem1,
    Criterion::Theorem1Reduced,
    Criterion::Equivalence,
    Criterion::RelaxedBound,
];

fn applicable(k: Criterion, p: &ProblemSpec, c: Option<f64>) -> bool {
    let has = |f: &str| match f {
        "u" => p.u.is_some(),
        "v" => p.v.is_some(),
        "lambda" => p.lambda.is_some(),
        "omega" => p.omega.is_some(),
        _ => true,
    };
    k.requires().iter().all(|f| has(f)) && (k != Criterion::RelaxedBound || c.is_some())
}

fn row(cfg: &RunConfig, path: &Path) -> SuiteRow {
    let file = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut row = SuiteRow {
        file,
        name: None,
        error: None,
        verdicts: BTreeMap::new(),
        expected: BTreeMap::new(),
        mismatches: Vec::new(),
        basin_width: None,
        basin_cells: None,
        alarm: false,
        reports: Vec::new(),
    };
    let entry: CorpusEntry = match std::fs::read_to_string(path)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(e) => e,
        Err(e) => {
            row.error = Some(e);
            return row;
        }
    };
    row.name = entry.problem.name.clone();
    row.expected = entry.expected.clone();
    let p = match ProblemSpec::from_sources(&entry.problem, &cfg.check) {
        Ok(p) => p,
        Err(issues) => {
            let msgs: Vec<String> = issues.iter().map(|i| format!("problem.{i}")).collect();
            row.error = Some(msgs.join("; "));
            return row;
        }
    };
    for k in COLUMNS {
        if !applicable(k, &p, entry.relaxed_c) {
            continue;
        }
        match run_criterion(k, &p, cfg, entry.relaxed_c) {
            Ok((v, passed)) => {
                row.verdicts.insert(k.name().to_string(), passed);
                row.reports.push(v);
            }
            Err(e) => {
                row.verdicts.insert(k.name().to_string(), false);
                row.reports.push(serde_json::json!({"criterion": k.name(), "passed": false, "error": e}));
            }
        }
    }
    match funnel_probe(&p.f, p.t_end, &funnel_options(cfg, &p)) {
        Ok(f) => {
            row.verdicts.insert(FUNNEL_UNIQUE.to_string(), f.marked <= 2);
            row.alarm = f.marked > ALARM_CELLS
                && row.verdicts.iter().any(|(k, &v)| v && k != FUNNEL_UNIQUE && k != "equivalence");
            row.basin_width = Some(f.basin_width);
            row.basin_cells = Some(f.marked);
            let mut v = value(&f);
            // per-sample data is available from `funnel`; keep the matrix compact
            if let Some(o) = v.as_object_mut() {
                o.remove("samples");
                o.insert("criterion".into(), Value::from("funnel"));
            }
            row.reports.push(v);
        }
        Err(e) => row.error = Some(format!("funnel: {e}")),
    }
    for (k, want) in &entry.expected {
        match row.verdicts.get(k) {
            Some(got) if got == want => {}
            Some(got) => row.mismatches.push(format!("{k}: expected {want}, got {got}")),
            None => row.mismatches.push(format!("{k}: expected {want}, not run")),
        }
    }
    row
}

/// Corpus files (`*.json`) in name order.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, String> {
    let rd = std::fs::read_dir(dir).map_err(|e| format!("corpus: cannot read {}: {e}", dir.display()))?;
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs every applicable criterion, the equivalence check and the funnel
/// probe on each corpus file.
pub fn run_suite(cfg: &RunConfig, dir: &Path) -> Result<SuiteReport, String> {
    let files = corpus_files(dir)?;
    if files.is_empty() {
        return Err(format!("corpus: no problem files in {}", dir.display()));
    }
    let rows: Vec<SuiteRow> = files.iter().map(|f| row(cfg, f)).collect();
    let mut columns: Vec<String> = COLUMNS.iter().map(|k| k.name().to_string()).collect();
    columns.push(FUNNEL_UNIQUE.to_string());
    Ok(SuiteReport {
        columns,
        mismatches: rows.iter().filter(|r| !r.mismatches.is_empty()).count(),
        alarms: rows.iter().filter(|r| r.alarm).count(),
        errors: rows.iter().filter(|r| r.error.is_some()).count(),
        rows,
    })
}

/// Exit 0 when every pinned verdict matches and no alarm or error occurred.
pub fn cmd_suite(cfg: &RunConfig, dir: &Path) -> Result<Outcome, ConfigErrors> {
    if cfg.format != Format::Json {
        return Err(ConfigErrors(vec!["format: suite writes JSON only".into()]));
    }
    let report = run_suite(cfg, dir).map_err(|e| ConfigErrors(vec![e]))?;
    Ok(Outcome {
        code: if report.clean() { 0 } else { 1 },
        body: envelope("suite", cfg, vec![value(&report)]),
    })
}
