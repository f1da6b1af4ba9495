use std::io::Write;

use serde::{Deserialize, Serialize};

use super::bounds::{BoundCheck, BoundCurve, BoundReport, BoundStatus, CG1, EC2, EC2A, ECVR};
use super::expectation::{ExpectationCurve, ExpectationMode};
use crate::error::Result;
use crate::spectral::SmoothnessClassReport;

pub const CSV_HEADER: [&str; 8] = [
    "m",
    "mean_sq_error",
    "stderr",
    "bound_ec2",
    "bound_ec2a",
    "bound_cg1",
    "bound_ecvr",
    "lower_bound",
];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per `m`; bounds that were not computed leave their column empty.
pub fn write_csv<W: Write>(
    out: W,
    curve: &ExpectationCurve,
    bounds: &[BoundCurve],
    lower: Option<&[f64]>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let col = |name: &str| {
        bounds
            .iter()
            .find(|b| b.name == name)
            .and_then(|b| b.values.as_deref())
    };
    let cols = [col(EC2), col(EC2A), col(CG1), col(ECVR)];
    for m in 0..curve.means.len() {
        let mut rec = vec![
            m.to_string(),
            curve.means[m].to_string(),
            curve.stderrs[m].to_string(),
        ];
        rec.extend(cols.iter().map(|c| cell(c.and_then(|v| v.get(m).copied()))));
        rec.push(cell(lower.and_then(|l| l.get(m).copied())));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-bound entry of the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub name: String,
    pub status: BoundStatus,
    pub satisfied: bool,
    /// `None` when every standard error is zero (exact comparison) or the bound was skipped.
    pub worst_margin_sigma: Option<f64>,
    pub worst_m: Option<usize>,
}

impl From<&BoundCheck> for BoundSummary {
    fn from(c: &BoundCheck) -> Self {
        Self {
            name: c.name.clone(),
            status: c.status,
            satisfied: c.satisfied,
            worst_margin_sigma: c.worst_margin_sigma.is_finite().then_some(c.worst_margin_sigma),
            worst_m: c.worst_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub instance: serde_json::Value,
    pub solver: serde_json::Value,
    pub seed: u64,
    pub runs: usize,
    pub m_max: usize,
    pub mode: ExpectationMode,
    pub low_power: bool,
    pub norms: SmoothnessClassReport,
    pub bounds: Vec<BoundSummary>,
    /// Largest `|MC − exact| / stderr` when the enumeration oracle was within budget.
    pub oracle_max_deviation_sigma: Option<f64>,
}

impl RunReport {
    pub fn bounds_from(report: &BoundReport) -> Vec<BoundSummary> {
        report.checks.iter().map(BoundSummary::from).collect()
    }
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}
