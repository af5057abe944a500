//! Check records and observations produced by the suites.

use serde::{Deserialize, Serialize};

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"` so
/// reports survive a JSON round trip.
pub mod float_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
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

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Tag(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Tag(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }

    /// Text form used in CSV cells.
    pub fn text(v: f64) -> String {
        if v.is_finite() {
            format!("{v:e}")
        } else if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    }
}

/// [`float_repr`] for optional values.
pub mod opt_float_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => super::float_repr::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "super::float_repr")] f64);
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

/// How `value` is compared with `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    AtMost,
    AtLeast,
    /// `|value − target| ≤ tolerance`.
    Near {
        #[serde(with = "float_repr")]
        target: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    /// Short tag naming the identity or inequality being checked.
    pub paper_ref: String,
    #[serde(with = "float_repr")]
    pub value: f64,
    #[serde(with = "float_repr")]
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl PartialEq for CheckRecord {
    fn eq(&self, o: &Self) -> bool {
        let same = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
        self.check == o.check
            && self.paper_ref == o.paper_ref
            && same(self.tolerance, o.tolerance)
            && self.tolerance == o.tolerance
            && self.comparison == o.comparison
            && self.pass == o.pass
            && self.note == o.note
    }
}

impl CheckRecord {
    pub fn new(
        check: impl Into<String>,
        tag: &str,
        value: f64,
        tolerance: f64,
        comparison: Comparison,
    ) -> Self {
        let pass = match comparison {
            Comparison::AtMost => value <= tolerance,
            Comparison::AtLeast => value >= tolerance,
            Comparison::Near { target } => (value - target).abs() <= tolerance,
        };
        Self {
            check: check.into(),
            paper_ref: tag.into(),
            value,
            tolerance,
            comparison,
            pass,
            note: None,
        }
    }

    pub fn at_most(check: impl Into<String>, tag: &str, value: f64, tolerance: f64) -> Self {
        Self::new(check, tag, value, tolerance, Comparison::AtMost)
    }

    pub fn at_least(check: impl Into<String>, tag: &str, value: f64, tolerance: f64) -> Self {
        Self::new(check, tag, value, tolerance, Comparison::AtLeast)
    }

    pub fn near(
        check: impl Into<String>,
        tag: &str,
        value: f64,
        target: f64,
        tolerance: f64,
    ) -> Self {
        Self::new(check, tag, value, tolerance, Comparison::Near { target })
    }

    /// A check that could not be evaluated.
    pub fn errored(check: impl Into<String>, tag: &str, err: &crate::Error) -> Self {
        let mut r = Self::at_most(check, tag, f64::NAN, 0.0);
        r.note = Some(err.to_string());
        r
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// A reported statistic that is not itself a pass/fail check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Observation {
    pub experiment: String,
    pub statistic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(with = "float_repr")]
    pub value: f64,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "opt_float_repr"
    )]
    pub std_error: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub approximate: bool,
}

impl PartialEq for Observation {
    fn eq(&self, o: &Self) -> bool {
        let same = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
        self.experiment == o.experiment
            && self.statistic == o.statistic
            && self.index == o.index
            && same(self.value, o.value)
            && match (self.std_error, o.std_error) {
                (Some(a), Some(b)) => same(a, b),
                (a, b) => a.is_none() && b.is_none(),
            }
            && self.approximate == o.approximate
    }
}

impl Observation {
    pub fn new(experiment: &str, statistic: &str, value: f64) -> Self {
        Self {
            experiment: experiment.into(),
            statistic: statistic.into(),
            index: None,
            value,
            std_error: None,
            approximate: false,
        }
    }

    pub fn index(mut self, i: usize) -> Self {
        self.index = Some(i);
        self
    }

    pub fn std_error(mut self, s: f64) -> Self {
        self.std_error = Some(s);
        self
    }

    pub fn approximate(mut self, a: bool) -> Self {
        self.approximate = a;
        self
    }
}

/// Raw `Λ(X)` samples of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDump {
    pub experiment: String,
    pub rows: Vec<Vec<f64>>,
}

/// Output of one suite.
#[derive(Debug, Clone, Default)]
pub struct SuiteOutcome {
    pub checks: Vec<CheckRecord>,
    pub observations: Vec<Observation>,
    pub samples: Vec<SampleDump>,
}

impl SuiteOutcome {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn extend(&mut self, other: SuiteOutcome) {
        self.checks.extend(other.checks);
        self.observations.extend(other.observations);
        self.samples.extend(other.samples);
    }

    pub fn check(&mut self, c: CheckRecord) {
        self.checks.push(c);
    }

    pub fn observe(&mut self, o: Observation) {
        self.observations.push(o);
    }
}
