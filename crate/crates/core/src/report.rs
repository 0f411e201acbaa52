//! Test records and experiment reports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::stats::{two_sample_z, combined_stderr, Estimate, KsResult, Thresholds};

/// Outcome of one check. `formula` names the identity being checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub test: String,
    pub formula: String,
    pub exact: Option<f64>,
    pub estimate: Option<f64>,
    pub stderr: Option<f64>,
    pub z: Option<f64>,
    pub p: Option<f64>,
    pub pass: bool,
}

impl TestRecord {
    /// Monte Carlo estimate against an exact value.
    pub fn z_test(test: impl Into<String>, formula: impl Into<String>, exact: f64, est: Estimate, th: &Thresholds) -> Self {
        let z = est.z_against(exact);
        Self {
            test: test.into(),
            formula: formula.into(),
            exact: Some(exact),
            estimate: Some(est.mean),
            stderr: Some(est.stderr),
            z: Some(z),
            p: None,
            pass: z.abs() < th.z_max,
        }
    }

    /// Two independent Monte Carlo estimates of the same quantity. `exact`
    /// records the target when one is known.
    pub fn two_sample(
        test: impl Into<String>,
        formula: impl Into<String>,
        a: Estimate,
        b: Estimate,
        exact: Option<f64>,
        th: &Thresholds,
    ) -> Self {
        let z = two_sample_z(&a, &b);
        Self {
            test: test.into(),
            formula: formula.into(),
            exact,
            estimate: Some(a.mean - b.mean),
            stderr: Some(combined_stderr(&a, &b)),
            z: Some(z),
            p: None,
            pass: z.abs() < th.z_max,
        }
    }

    pub fn ks(test: impl Into<String>, formula: impl Into<String>, r: KsResult, th: &Thresholds) -> Self {
        Self {
            test: test.into(),
            formula: formula.into(),
            exact: None,
            estimate: Some(r.statistic),
            stderr: None,
            z: None,
            p: Some(r.p_value),
            pass: r.p_value > th.ks_p_min,
        }
    }

    /// Deterministic comparison of a value with a tolerance.
    pub fn exact_match(test: impl Into<String>, formula: impl Into<String>, exact: f64, value: f64, tol: f64) -> Self {
        Self {
            test: test.into(),
            formula: formula.into(),
            exact: Some(exact),
            estimate: Some(value),
            stderr: None,
            z: None,
            p: None,
            pass: (value - exact).abs() <= tol,
        }
    }

    /// Structural check that must hold on every replica: `count` is the
    /// number of violations.
    pub fn structural(test: impl Into<String>, formula: impl Into<String>, count: usize) -> Self {
        Self {
            test: test.into(),
            formula: formula.into(),
            exact: Some(0.0),
            estimate: Some(count as f64),
            stderr: None,
            z: None,
            p: None,
            pass: count == 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub records: Vec<TestRecord>,
    /// Wall-clock time; kept out of the JSON so reports are reproducible.
    #[serde(skip)]
    pub runtime_secs: f64,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_records_csv(&self.records, out)
    }
}

/// Formats a double with 17 significant digits; empty for `None`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

pub fn write_records_csv<W: Write>(records: &[TestRecord], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["test", "formula", "exact", "estimate", "stderr", "z", "p", "pass"])?;
    for r in records {
        w.write_record([
            r.test.clone(),
            r.formula.clone(),
            opt(r.exact),
            opt(r.estimate),
            opt(r.stderr),
            opt(r.z),
            opt(r.p),
            r.pass.to_string(),
        ])?;
    }
    w.flush()
}
