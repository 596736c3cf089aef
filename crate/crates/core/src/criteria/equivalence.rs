use serde::Serialize;

use super::constantin::{check_constantin, reduce_to_constantin};
use super::report::{ser_f64, CriterionReport};
use super::theorem::check_theorem_main;
use super::{names, CheckConfig, ProblemSpec};

/// Hypotheses that state the same inequality in both criteria once
/// `(v, lambda) = (u, u/u')`.
const SHARED: [(&str, &str); 2] = [(names::BOUND, names::H3), (names::LIMIT, names::H4)];

/// Largest allowed difference of shared-hypothesis margins.
pub const MARGIN_AGREEMENT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginDiscrepancy {
    pub constantin_hypothesis: String,
    pub theorem_hypothesis: String,
    #[serde(serialize_with = "ser_f64")]
    pub constantin_margin: f64,
    #[serde(serialize_with = "ser_f64")]
    pub theorem_margin: f64,
    #[serde(serialize_with = "ser_f64")]
    pub difference: f64,
    pub exceeds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub reduced_v: String,
    pub reduced_lambda: String,
    pub verdicts_agree: bool,
    /// Verdicts agree and no shared margin differs by more than `1e-6`.
    pub passed: bool,
    pub margins: Vec<MarginDiscrepancy>,
    pub constantin: CriterionReport,
    pub theorem: CriterionReport,
}

fn difference(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

/// Runs the Constantin checker and the main-theorem checker on the reduced
/// gauges and compares verdicts and shared margins.
pub fn equivalence_suite(p: &ProblemSpec, c: &CheckConfig) -> Result<EquivalenceReport, String> {
    let u = p.require(&p.u, "u")?;
    p.require(&p.omega, "omega")?;
    let (v, lambda) = reduce_to_constantin(u);
    let reduced = ProblemSpec {
        v: Some(v.clone()),
        lambda: Some(lambda.clone()),
        ..p.clone()
    };
    let constantin = check_constantin(p, c);
    let theorem = check_theorem_main(&reduced, c);
    let margins: Vec<_> = SHARED
        .iter()
        .filter_map(|(a, b)| {
            let (ha, hb) = (constantin.hypothesis(a)?, theorem.hypothesis(b)?);
            let d = difference(ha.worst_margin, hb.worst_margin);
            Some(MarginDiscrepancy {
                constantin_hypothesis: a.to_string(),
                theorem_hypothesis: b.to_string(),
                constantin_margin: ha.worst_margin,
                theorem_margin: hb.worst_margin,
                difference: d,
                exceeds: !(d <= MARGIN_AGREEMENT),
            })
        })
        .collect();
    let verdicts_agree = constantin.passed == theorem.passed;
    Ok(EquivalenceReport {
        reduced_v: v.to_string(),
        reduced_lambda: lambda.to_string(),
        verdicts_agree,
        passed: verdicts_agree && margins.iter().all(|m| !m.exceeds),
        margins,
        constantin,
        theorem,
    })
}
