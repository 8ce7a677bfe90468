//! Run reports, verdict payloads and plot data.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::real::{self, Real};
use crate::suites::config::SuiteName;
use crate::verify::{BoundCheck, SuiteSummary};

/// One point of a long-format plot series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub series: String,
    #[serde(with = "real")]
    pub x: f64,
    #[serde(with = "real")]
    pub y: f64,
}

/// A check that was computed but not asserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub index: usize,
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            threads: rayon::current_num_threads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub suite: SuiteName,
    pub seed: u64,
    pub config_digest: String,
    pub version: String,
    pub passed: bool,
    pub summaries: Vec<SuiteSummary>,
    pub rates: BTreeMap<String, Real>,
    pub checks: Vec<BoundCheck>,
    pub skipped: Vec<Skip>,
    pub series: Vec<SeriesPoint>,
    /// Files written next to the report.
    pub tables: Vec<String>,
    pub wall_time_s: f64,
    pub environment: Environment,
}

#[derive(Serialize)]
struct VerdictPayload<'a> {
    suite: SuiteName,
    seed: u64,
    config_digest: &'a str,
    version: &'a str,
    passed: bool,
    summaries: &'a [SuiteSummary],
    rates: &'a BTreeMap<String, Real>,
    checks: &'a [BoundCheck],
    skipped: &'a [Skip],
    series: &'a [SeriesPoint],
}

impl RunReport {
    /// Everything that depends only on the config: no timing, no host details.
    pub fn verdict_payload(&self) -> String {
        serde_json::to_string(&VerdictPayload {
            suite: self.suite,
            seed: self.seed,
            config_digest: &self.config_digest,
            version: &self.version,
            passed: self.passed,
            summaries: &self.summaries,
            rates: &self.rates,
            checks: &self.checks,
            skipped: &self.skipped,
            series: &self.series,
        })
        .expect("payload serializes")
    }

    /// One JSON object per check.
    pub fn verdicts_jsonl(&self) -> String {
        self.checks.iter().map(|c| c.to_json_line() + "\n").collect()
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(SuiteSummary::CSV_HEADER);
        out.push('\n');
        for s in &self.summaries {
            out.push_str(&s.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &BoundCheck> {
        self.checks.iter().filter(|c| c.failed())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Per-name summaries in order of first appearance.
pub fn summarize(checks: &[BoundCheck]) -> Vec<SuiteSummary> {
    let mut names: Vec<&str> = Vec::new();
    for c in checks {
        if !names.contains(&c.name.as_str()) {
            names.push(&c.name);
        }
    }
    names
        .into_iter()
        .map(|n| {
            let group: Vec<BoundCheck> = checks.iter().filter(|c| c.name == n).cloned().collect();
            SuiteSummary::of(n, &group)
        })
        .collect()
}

pub fn skips(checks: &[BoundCheck]) -> Vec<Skip> {
    checks
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.asserted)
        .map(|(i, c)| Skip { index: i, name: c.name.clone(), reason: c.note.clone().unwrap_or_else(|| "not asserted".into()) })
        .collect()
}

pub const PLOT_HEADER: &str = "series,x,y";

/// Long-format `(series, x, y)` rows: the report's series, then one
/// `slack:<check>` series per check name indexed by occurrence.
pub fn emit_plot_data(report: &RunReport) -> String {
    let mut out = String::from(PLOT_HEADER);
    out.push('\n');
    for p in &report.series {
        out.push_str(&format!("{},{},{}\n", p.series, p.x, p.y));
    }
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &report.checks {
        let i = seen.entry(c.name.as_str()).or_insert(0);
        if c.slack.is_finite() {
            out.push_str(&format!("slack:{},{},{}\n", c.name, i, c.slack));
        }
        *i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty() -> RunReport {
        RunReport {
            suite: SuiteName::Verify,
            seed: 1,
            config_digest: "d".into(),
            version: "v".into(),
            passed: true,
            summaries: vec![],
            rates: BTreeMap::new(),
            checks: vec![],
            skipped: vec![],
            series: vec![],
            tables: vec![],
            wall_time_s: 0.5,
            environment: Environment::current(),
        }
    }

    #[test]
    fn empty_report_plots_header_only() {
        assert_eq!(emit_plot_data(&empty()), "series,x,y\n");
    }

    #[test]
    fn plot_rows_follow_series_and_checks() {
        let mut r = empty();
        r.series.push(SeriesPoint { series: "eps_p".into(), x: 0.1, y: 0.9 });
        r.checks.push(BoundCheck::new("a", 1.0, 2.0, 0.0, ""));
        r.checks.push(BoundCheck::new("a", 1.0, f64::INFINITY, 0.0, ""));
        r.checks.push(BoundCheck::new("a", 1.0, 1.5, 0.0, ""));
        let csv = emit_plot_data(&r);
        assert_eq!(csv, "series,x,y\neps_p,0.1,0.9\nslack:a,0,1\nslack:a,2,0.5\n");
    }

    #[test]
    fn payload_ignores_timing() {
        let a = empty();
        let mut b = empty();
        b.wall_time_s = 99.0;
        b.environment.threads += 1;
        assert_eq!(a.verdict_payload(), b.verdict_payload());
        let back: RunReport = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn summaries_group_by_name() {
        let checks = vec![
            BoundCheck::new("b", 0.0, 1.0, 0.0, ""),
            BoundCheck::new("a", 2.0, 1.0, 0.0, ""),
            BoundCheck::new("b", 0.0, 0.5, 0.0, "").reported_only("probe"),
        ];
        let s = summarize(&checks);
        assert_eq!(s.iter().map(|s| s.suite.as_str()).collect::<Vec<_>>(), ["b", "a"]);
        assert_eq!((s[0].instances, s[0].pass), (2, 1));
        assert!(!s[1].all_pass());
        assert_eq!(skips(&checks), vec![Skip { index: 2, name: "b".into(), reason: "probe".into() }]);
    }
}
