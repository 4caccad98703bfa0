//! Deterministic report plumbing shared by the command-line driver and the
//! verification suite: versioned JSON records, frozen CSV columns, and one
//! float format everywhere so identical runs serialize identically.

use std::collections::BTreeMap;
use std::fmt::Display;

use serde::Serialize;

pub const SCHEMA_VERSION: &str = "1";

/// The one float format used in every report artifact: scientific notation
/// with 17 significant digits (round-trip exact for f64).
pub fn fnum(x: f64) -> String {
    format!("{x:.16e}")
}

/// Echo of the parameters a run was invoked with, string-valued and sorted.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub schema_version: String,
    pub command: String,
    pub params: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            command: command.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.params.insert(key.to_string(), value.to_string());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Marginal,
    Fail,
}

/// One verified identity and the numbers that decided the verdict.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    /// The identity or property this record verifies, stated mathematically.
    pub identity: String,
    pub inputs: BTreeMap<String, String>,
    pub values: BTreeMap<String, String>,
    pub verdict: Verdict,
}

impl CheckRecord {
    pub fn new(name: &str, identity: &str) -> Self {
        Self {
            name: name.to_string(),
            identity: identity.to_string(),
            inputs: BTreeMap::new(),
            values: BTreeMap::new(),
            verdict: Verdict::Pass,
        }
    }

    pub fn input(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.inputs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn value(&mut self, key: &str, x: f64) -> &mut Self {
        self.values.insert(key.to_string(), fnum(x));
        self
    }

    pub fn value_str(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.values.insert(key.to_string(), value.to_string());
        self
    }

    pub fn fail(&mut self) {
        self.verdict = Verdict::Fail;
    }

    /// Downgrades a passing record; never upgrades a failing one.
    pub fn mark_marginal(&mut self) {
        if self.verdict == Verdict::Pass {
            self.verdict = Verdict::Marginal;
        }
    }

    /// Records `key = x` against the bound and fails the record unless
    /// `x <= bound` (NaN fails).
    pub fn check_le(&mut self, key: &str, x: f64, bound: f64) -> bool {
        self.value(key, x);
        self.values.insert(format!("{key}_bound"), fnum(bound));
        let ok = x <= bound;
        if !ok {
            self.fail();
        }
        ok
    }

    /// Records a named boolean condition and fails the record when false.
    pub fn check(&mut self, key: &str, ok: bool) -> bool {
        self.value_str(key, ok);
        if !ok {
            self.fail();
        }
        ok
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Summary {
    pub pass: usize,
    pub marginal: usize,
    pub fail: usize,
}

/// A full report: config echo, records sorted by name, verdict counts.
/// Wall-clock timing deliberately stays out of the serialized payload so
/// identical configs produce byte-identical artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: String,
    pub config: RunConfig,
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
}

impl Report {
    pub fn new(config: RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            config,
            records: Vec::new(),
            summary: Summary::default(),
        }
    }

    pub fn push(&mut self, record: CheckRecord) {
        self.records.push(record);
    }

    pub fn extend(&mut self, records: Vec<CheckRecord>) {
        self.records.extend(records);
    }

    /// Sorts records by name and recounts the summary.
    pub fn finalize(&mut self) {
        self.records.sort_by(|a, b| a.name.cmp(&b.name));
        let mut summary = Summary::default();
        for r in &self.records {
            match r.verdict {
                Verdict::Pass => summary.pass += 1,
                Verdict::Marginal => summary.marginal += 1,
                Verdict::Fail => summary.fail += 1,
            }
        }
        self.summary = summary;
    }

    pub fn passed(&self) -> bool {
        self.summary.fail == 0
    }

    /// 0 on pass, 1 on verification failure.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }
}

/// CSV emitter with frozen columns; all floats go through [`fnum`].
#[derive(Debug, Clone)]
pub struct Csv {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.columns.len(), "CSV row width");
        self.rows.push(cells);
    }

    pub fn render(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_sort_and_serialize_deterministically() {
        let mut config = RunConfig::new("demo");
        config.set("beta", 2);
        config.set("alpha", 1);
        let mut report = Report::new(config);
        let mut b = CheckRecord::new("b_check", "second identity");
        b.check_le("residual", 1e-12, 1e-8);
        let mut a = CheckRecord::new("a_check", "first identity");
        a.check_le("residual", 1.0, 1e-8);
        a.input("degree", 4);
        report.push(b);
        report.push(a);
        report.finalize();
        assert_eq!(report.records[0].name, "a_check");
        assert_eq!(report.summary.fail, 1);
        assert_eq!(report.summary.pass, 1);
        assert!(!report.passed());
        assert_eq!(report.exit_code(), 1);

        let one = report.to_json();
        let two = report.to_json();
        assert_eq!(one, two);
        // 17 significant digits round-trip the exact double, so the stored
        // string shows the nearest representable to 1e-12.
        assert!(one.contains("\"residual\": \"9.9999999999999998e-13\""), "{one}");
        assert!(one.ends_with('\n'));
    }

    #[test]
    fn marginal_never_masks_failure() {
        let mut r = CheckRecord::new("x", "y");
        r.mark_marginal();
        assert_eq!(r.verdict, Verdict::Marginal);
        r.fail();
        r.mark_marginal();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(!r.passed());
    }

    #[test]
    fn csv_renders_frozen_columns() {
        let mut csv = Csv::new(&["lambda", "degree", "min_eig", "verdict"]);
        csv.row(vec![fnum(-3.0), "2".into(), fnum(0.125), "pass".into()]);
        let text = csv.render();
        assert_eq!(
            text,
            "lambda,degree,min_eig,verdict\n-3.0000000000000000e0,2,1.2500000000000000e-1,pass\n"
        );
    }
}
