use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::expr::Expression;

/// Serializes non-finite floats as strings (`"inf"`, `"-inf"`, `"nan"`),
/// since JSON has no literal for them.
pub(crate) fn ser_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Inverse of [`ser_f64`].
pub(crate) fn de_f64<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Num {
        F(f64),
        S(String),
    }
    match Num::deserialize(d)? {
        Num::F(v) => Ok(v),
        Num::S(s) => match s.as_str() {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            "nan" => Ok(f64::NAN),
            _ => Err(serde::de::Error::custom(format!("not a number: {s}"))),
        },
    }
}

fn de_expr<'de, D: Deserializer<'de>>(d: D) -> Result<Expression, D::Error> {
    let s = String::deserialize(d)?;
    crate::expr::parse(&s).map_err(|e| serde::de::Error::custom(format!("`{s}`: {e}")))
}

fn de_point<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
    #[derive(Deserialize)]
    struct F(#[serde(deserialize_with = "de_f64")] f64);
    let m = BTreeMap::<String, F>::deserialize(d)?;
    Ok(m.into_iter().map(|(k, F(v))| (k, v)).collect())
}

fn ser_expr<S: Serializer>(e: &Expression, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(e)
}

fn ser_point<S: Serializer>(p: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    #[derive(Serialize)]
    struct F(#[serde(serialize_with = "ser_f64")] f64);
    let mut map = s.serialize_map(Some(p.len()))?;
    for (k, v) in p {
        map.serialize_entry(k, &F(*v))?;
    }
    map.end()
}

/// The inequality a margin was computed from, in expression form.
///
/// Free variables are bound by the witness point; integrals run over the
/// variable `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Inequality {
    /// `lhs <= rhs` (or `lhs < rhs` when `strict`); margin `rhs - lhs`.
    Pointwise {
        #[serde(serialize_with = "ser_expr", deserialize_with = "de_expr")]
        lhs: Expression,
        #[serde(serialize_with = "ser_expr", deserialize_with = "de_expr")]
        rhs: Expression,
        strict: bool,
    },
    /// `int_0^upper integrand dw <= rhs`; margin `rhs - integral`.
    SingularIntegral {
        #[serde(serialize_with = "ser_expr", deserialize_with = "de_expr")]
        integrand: Expression,
        #[serde(serialize_with = "ser_expr", deserialize_with = "de_expr")]
        upper: Expression,
        #[serde(serialize_with = "ser_expr", deserialize_with = "de_expr")]
        rhs: Expression,
    },
    /// `int_0^upper integrand dw` converges; margin `+1` or `-1`.
    Integrable {
        #[serde(serialize_with = "ser_expr", deserialize_with = "de_expr")]
        integrand: Expression,
        #[serde(serialize_with = "ser_expr", deserialize_with = "de_expr")]
        upper: Expression,
    },
    /// Not enough evaluable samples to judge; cannot be re-evaluated.
    Insufficient { reason: String },
}

impl Inequality {
    pub fn is_strict(&self) -> bool {
        matches!(self, Inequality::Pointwise { strict: true, .. })
    }
}

/// A sample point together with the evaluated inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(serialize_with = "ser_point", deserialize_with = "de_point")]
    pub point: BTreeMap<String, f64>,
    pub check: Inequality,
    #[serde(serialize_with = "ser_f64", deserialize_with = "de_f64")]
    pub lhs: f64,
    #[serde(serialize_with = "ser_f64", deserialize_with = "de_f64")]
    pub rhs: f64,
    #[serde(serialize_with = "ser_f64", deserialize_with = "de_f64")]
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Witness {
    pub(crate) fn new(point: &[(&str, f64)], check: Inequality, lhs: f64, rhs: f64) -> Witness {
        Witness {
            point: point.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            check,
            lhs,
            rhs,
            margin: rhs - lhs,
            error: None,
        }
    }

    /// An evaluation failure at `point`; counts as a violation.
    pub(crate) fn failed(point: &[(&str, f64)], check: Inequality, message: String) -> Witness {
        Witness {
            point: point.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            check,
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NEG_INFINITY,
            error: Some(message),
        }
    }

    pub(crate) fn with_margin(mut self, margin: f64) -> Witness {
        self.margin = margin;
        self
    }

    /// Whether this sample violates its inequality under slack `tol`.
    pub fn is_violation(&self, tol: f64) -> bool {
        violates(&self.check, self.margin, self.error.is_some(), tol)
    }
}

pub(crate) fn violates(check: &Inequality, margin: f64, errored: bool, tol: f64) -> bool {
    if errored || margin.is_nan() || matches!(check, Inequality::Insufficient { .. }) {
        return true;
    }
    if check.is_strict() {
        margin <= 0.0
    } else {
        margin < -tol
    }
}

/// Verdict for one hypothesis of a criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    pub name: String,
    pub passed: bool,
    /// Smallest margin over all evaluated samples.
    #[serde(serialize_with = "ser_f64")]
    pub worst_margin: f64,
    /// The worst violation if the hypothesis failed, else the sample with
    /// the smallest margin.
    pub witness: Option<Witness>,
    pub evaluated: usize,
    pub skipped: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub criterion: String,
    pub passed: bool,
    pub hypotheses: Vec<Hypothesis>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CriterionReport {
    pub(crate) fn new(criterion: &str, hypotheses: Vec<Hypothesis>, notes: Vec<String>) -> Self {
        CriterionReport {
            criterion: criterion.to_string(),
            passed: hypotheses.iter().all(|h| h.passed),
            hypotheses,
            notes,
        }
    }

    /// A report for a criterion whose inputs are missing.
    pub(crate) fn unavailable(criterion: &str, reason: String) -> Self {
        CriterionReport {
            criterion: criterion.to_string(),
            passed: false,
            hypotheses: Vec::new(),
            notes: vec![reason],
        }
    }

    pub fn hypothesis(&self, name: &str) -> Option<&Hypothesis> {
        self.hypotheses.iter().find(|h| h.name == name)
    }

    /// All failure witnesses, in hypothesis order.
    pub fn failure_witnesses(&self) -> impl Iterator<Item = (&Hypothesis, &Witness)> {
        self.hypotheses
            .iter()
            .filter(|h| !h.passed)
            .filter_map(|h| h.witness.as_ref().map(|w| (h, w)))
    }
}

/// Accumulates samples of one hypothesis. Samples must be recorded in the
/// tie-break order (ascending t, then x, then eps): only a strictly smaller
/// margin replaces the current worst.
pub(crate) struct Tracker {
    name: String,
    tol: f64,
    worst: Option<Witness>,
    worst_violation: Option<Witness>,
    evaluated: usize,
    skipped: usize,
    notes: Vec<String>,
}

impl Tracker {
    pub fn new(name: &str, tol: f64) -> Tracker {
        Tracker {
            name: name.to_string(),
            tol,
            worst: None,
            worst_violation: None,
            evaluated: 0,
            skipped: 0,
            notes: Vec::new(),
        }
    }

    pub fn record(&mut self, w: Witness) {
        self.evaluated += 1;
        if w.is_violation(self.tol)
            && self
                .worst_violation
                .as_ref()
                .is_none_or(|v| w.margin < v.margin)
        {
            self.worst_violation = Some(w.clone());
        }
        if self.worst.as_ref().is_none_or(|v| w.margin < v.margin) {
            self.worst = Some(w);
        }
    }

    /// Records a sample by margin; the witness is only built when it
    /// becomes the new worst sample or worst violation.
    pub fn offer(&mut self, margin: f64, strict: bool, make: impl FnOnce() -> Witness) {
        self.evaluated += 1;
        let violation = margin.is_nan() || if strict { margin <= 0.0 } else { margin < -self.tol };
        let new_violation =
            violation && self.worst_violation.as_ref().is_none_or(|v| margin < v.margin);
        let new_worst = self.worst.as_ref().is_none_or(|v| margin < v.margin);
        if new_violation || new_worst {
            let w = make();
            if new_violation {
                self.worst_violation = Some(w.clone());
            }
            if new_worst {
                self.worst = Some(w);
            }
        }
    }

    pub fn skip(&mut self) {
        self.skipped += 1;
    }

    pub fn note(&mut self, note: impl Into<String>) {
        let note = note.into();
        if !self.notes.contains(&note) {
            self.notes.push(note);
        }
    }

    pub fn finish(self) -> Hypothesis {
        let worst_margin = self.worst.as_ref().map_or(f64::NAN, |w| w.margin);
        let mut notes = self.notes;
        if self.evaluated == 0 {
            notes.push("no sample could be evaluated".to_string());
        }
        if self.skipped > 0 {
            notes.push(format!("{} sample(s) skipped", self.skipped));
        }
        let passed = self.evaluated > 0 && self.worst_violation.is_none();
        Hypothesis {
            name: self.name,
            passed,
            worst_margin,
            witness: self.worst_violation.or(self.worst),
            evaluated: self.evaluated,
            skipped: self.skipped,
            notes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn pointwise(strict: bool) -> Inequality {
        Inequality::Pointwise {
            lhs: parse("x").unwrap(),
            rhs: parse("1").unwrap(),
            strict,
        }
    }

    #[test]
    fn tracker_keeps_first_of_equal_margins() {
        let mut t = Tracker::new("h", 1e-9);
        t.record(Witness::new(&[("x", 1.0)], pointwise(false), 1.0, 1.0));
        t.record(Witness::new(&[("x", 2.0)], pointwise(false), 1.0, 1.0));
        let h = t.finish();
        assert!(h.passed);
        assert_eq!(h.worst_margin, 0.0);
        assert_eq!(h.witness.unwrap().point["x"], 1.0);
    }

    #[test]
    fn slack_and_strictness() {
        let mut t = Tracker::new("h", 1e-9);
        t.record(Witness::new(&[], pointwise(false), 1.0 + 1e-12, 1.0));
        assert!(t.finish().passed);
        let mut t = Tracker::new("h", 1e-9);
        t.record(Witness::new(&[], pointwise(true), 1.0, 1.0));
        assert!(!t.finish().passed);
    }

    #[test]
    fn failing_witness_is_the_worst_violation() {
        let mut t = Tracker::new("h", 1e-9);
        t.record(Witness::new(&[("x", 0.0)], pointwise(false), 3.0, 1.0));
        t.record(Witness::new(&[("x", 1.0)], pointwise(true), 1.0, 1.0));
        let h = t.finish();
        assert!(!h.passed);
        assert_eq!(h.worst_margin, -2.0);
        assert_eq!(h.witness.unwrap().point["x"], 0.0);
    }

    #[test]
    fn errors_are_violations_and_serialize() {
        let mut t = Tracker::new("h", 1e-9);
        t.record(Witness::failed(&[("x", 0.0)], pointwise(false), "boom".into()));
        let h = t.finish();
        assert!(!h.passed);
        let json = serde_json::to_string(&h).unwrap();
        assert!(json.contains("\"worst_margin\":\"-inf\""), "{json}");
        assert!(json.contains("\"lhs\":\"x\""), "{json}");
    }

    #[test]
    fn empty_tracker_fails() {
        let h = Tracker::new("h", 1e-9).finish();
        assert!(!h.passed && h.witness.is_none());
    }
}
