//! Run reports and data tables: JSON and CSV, written atomically.
//!
//! Reports carry no timestamps, so the same configuration and seed give
//! byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checks::{CheckResult, Verdict};
use crate::error::{LabError, Result};
use crate::functionals::PointPickResult;
use crate::ledger::ConstantLedger;
use crate::metric::{GeometrySummary, MembershipReport, WarpedMetric};
use crate::potential::Potential;
use crate::sequence::ConvergenceReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub run_id: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub membership: Option<MembershipReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ledger: Option<ConstantLedger>,
    pub checks: Vec<CheckResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequence: Option<ConvergenceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointpick: Option<PointPickResult>,
}

impl Report {
    pub fn new(config_hash: &str, seed: u64) -> Self {
        Self {
            run_id: run_id(config_hash, seed),
            config_hash: config_hash.into(),
            seed,
            metric: None,
            geometry: None,
            membership: None,
            ledger: None,
            checks: Vec::new(),
            sequence: None,
            pointpick: None,
        }
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.verdict == Verdict::Fail).count()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| LabError::Parse(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn checks_csv(&self) -> Result<String> {
        checks_csv(&self.checks)
    }
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Deterministic run id from the configuration hash and the seed.
pub fn run_id(config_hash: &str, seed: u64) -> String {
    sha256_hex(format!("{config_hash}:{seed}").as_bytes())[..16].to_string()
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn write_table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| LabError::Parse(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| LabError::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| LabError::Parse(e.to_string()))
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Skipped => "skipped",
    }
}

pub fn checks_csv(checks: &[CheckResult]) -> Result<String> {
    write_table(
        &["label", "lhs", "rhs", "margin", "tolerance", "verdict"],
        checks.iter().map(|c| {
            vec![
                c.label.clone(),
                fmt_f64(c.lhs),
                fmt_f64(c.rhs),
                fmt_f64(c.margin),
                fmt_f64(c.tolerance),
                verdict_str(c.verdict).into(),
            ]
        }),
    )
}

/// Plot-ready potential profile: `θ, u, u′, |∇u|/sin θ`.
pub fn potential_csv(metric: &WarpedMetric, pot: &Potential) -> Result<String> {
    let x = metric.theta();
    write_table(
        &["theta", "u", "du", "ratio"],
        (0..x.len()).map(|i| vec![fmt_f64(x[i]), fmt_f64(pot.u[i]), fmt_f64(pot.du[i]), fmt_f64(pot.ratio[i])]),
    )
}

pub fn sequence_csv(seq: &ConvergenceReport) -> Result<String> {
    write_table(
        &[
            "index",
            "value",
            "nodes",
            "deficit",
            "volume",
            "volume_gap",
            "diam_lower",
            "diam_upper",
            "cheeger_levelset",
            "member",
            "failed_conditions",
        ],
        seq.entries.iter().map(|e| {
            vec![
                e.index.to_string(),
                fmt_f64(e.value),
                e.nodes.to_string(),
                fmt_f64(e.deficit),
                fmt_f64(e.volume),
                fmt_f64(e.volume_gap),
                fmt_f64(e.diam_lower),
                fmt_f64(e.diam_upper),
                fmt_f64(e.cheeger_levelset),
                e.membership.member.to_string(),
                e.membership.failed().join(" "),
            ]
        }),
    )
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| LabError::Io(e.error))?;
    Ok(())
}
