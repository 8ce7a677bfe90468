use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::real::{self, Real};

/// Verdict carrier: `holds ⇔ rhs - lhs >= -tol`.
///
/// `asserted = false` marks checks that are computed and reported but whose
/// preconditions are not met (or whose claim is under investigation), so a
/// failure does not count against the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    #[serde(with = "real")]
    pub lhs: f64,
    #[serde(with = "real")]
    pub rhs: f64,
    #[serde(with = "real")]
    pub slack: f64,
    pub holds: bool,
    pub tol: f64,
    pub instance_digest: String,
    pub asserted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, Real>,
}

impl BoundCheck {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64, instance_digest: impl Into<String>) -> Self {
        let slack = slack(lhs, rhs);
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack,
            holds: slack >= -tol,
            tol,
            instance_digest: instance_digest.into(),
            asserted: true,
            note: None,
            extras: BTreeMap::new(),
        }
    }

    pub fn reported_only(mut self, reason: impl Into<String>) -> Self {
        self.asserted = false;
        self.note = Some(reason.into());
        self
    }

    /// Re-evaluates the verdict under a different tolerance.
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self.holds = self.slack >= -tol;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn with_extra(mut self, key: &str, value: f64) -> Self {
        self.extras.insert(key.to_string(), Real(value));
        self
    }

    pub fn extra(&self, key: &str) -> Option<f64> {
        self.extras.get(key).map(|r| r.0)
    }

    /// Asserted and violated.
    pub fn failed(&self) -> bool {
        self.asserted && !self.holds
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("bound check serializes")
    }
}

/// `rhs - lhs`, where a finite lhs against `+inf` passes and `inf - inf` counts as 0.
fn slack(lhs: f64, rhs: f64) -> f64 {
    if lhs.is_nan() || rhs.is_nan() {
        return f64::NAN;
    }
    if lhs == rhs {
        return 0.0;
    }
    rhs - lhs
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub instances: usize,
    pub asserted: usize,
    pub pass: usize,
    #[serde(with = "real")]
    pub worst_slack: f64,
}

impl SuiteSummary {
    pub const CSV_HEADER: &'static str = "suite,instances,pass,worst_slack";

    pub fn of(suite: &str, checks: &[BoundCheck]) -> Self {
        let asserted: Vec<&BoundCheck> = checks.iter().filter(|c| c.asserted).collect();
        Self {
            suite: suite.to_string(),
            instances: checks.len(),
            asserted: asserted.len(),
            pass: asserted.iter().filter(|c| c.holds).count(),
            worst_slack: asserted.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.suite, self.instances, self.pass, self.worst_slack)
    }

    pub fn all_pass(&self) -> bool {
        self.pass == self.asserted
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holds_iff_slack_within_tol() {
        let c = BoundCheck::new("x", 1.0, 1.0 - 1e-13, 1e-12, "d");
        assert!(c.holds);
        let c = BoundCheck::new("x", 1.0, 1.0 - 1e-11, 1e-12, "d");
        assert!(!c.holds && c.failed());
        let c = BoundCheck::new("x", 3.0, f64::INFINITY, 1e-12, "d");
        assert!(c.holds && c.slack.is_infinite());
        let c = BoundCheck::new("x", f64::INFINITY, f64::INFINITY, 0.0, "d");
        assert!(c.holds);
        let c = BoundCheck::new("x", f64::INFINITY, 2.0, 0.0, "d").reported_only("precondition");
        assert!(!c.holds && !c.failed());
    }

    #[test]
    fn json_line_round_trip() {
        let c = BoundCheck::new("pac", 0.2, f64::INFINITY, 1e-12, "abc").with_extra("xi", 0.5);
        let line = c.to_json_line();
        assert!(!line.contains('\n'));
        let back: BoundCheck = serde_json::from_str(&line).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn summary_counts_asserted_only() {
        let checks = vec![
            BoundCheck::new("a", 0.0, 1.0, 0.0, ""),
            BoundCheck::new("a", 2.0, 1.0, 0.0, "").reported_only("vacuous"),
            BoundCheck::new("a", 0.5, 1.0, 0.0, ""),
        ];
        let s = SuiteSummary::of("t", &checks);
        assert_eq!((s.instances, s.asserted, s.pass), (3, 2, 2));
        assert_eq!(s.worst_slack, 0.5);
        assert!(s.all_pass());
    }
}
