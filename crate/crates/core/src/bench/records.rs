use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BenchError, TrialSpec};
use crate::agents::{Algorithm, TrialResult};

/// One row of `results.csv`. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub algorithm: Algorithm,
    pub arrangement_seed: u64,
    pub repeat: usize,
    pub target_h: f64,
    pub measured_h: f64,
    pub n_objects: usize,
    pub actions: usize,
    pub mistakes: usize,
    pub replans: usize,
    pub packed: usize,
    pub success: bool,
    pub constraint_violations: usize,
    pub planning_time_s: f64,
    pub execution_time_s: f64,
    pub total_time_s: f64,
    pub timeout_hit: bool,
}

impl TrialRecord {
    pub fn new(spec: &TrialSpec, r: &TrialResult) -> Self {
        Self {
            trial_id: spec.trial_id,
            algorithm: r.algorithm,
            arrangement_seed: spec.arrangement_seed,
            repeat: spec.repeat,
            target_h: r.target_h,
            measured_h: r.measured_h,
            n_objects: r.n_objects,
            actions: r.actions,
            mistakes: r.mistakes,
            replans: r.replans,
            packed: r.packed,
            success: r.success,
            constraint_violations: r.constraint_violations,
            planning_time_s: r.planning_time_s,
            execution_time_s: r.execution_time_s,
            total_time_s: r.total_time_s,
            timeout_hit: r.timeout_hit,
        }
    }
}

pub fn write_csv(records: &[TrialRecord], path: &Path) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    if records.is_empty() {
        // serde only emits the header alongside the first row
        w.write_record(CSV_COLUMNS)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<TrialRecord>, BenchError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(BenchError::InvalidConfig(format!(
            "unexpected CSV header {header:?}"
        )));
    }
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub const CSV_COLUMNS: [&str; 17] = [
    "trial_id",
    "algorithm",
    "arrangement_seed",
    "repeat",
    "target_h",
    "measured_h",
    "n_objects",
    "actions",
    "mistakes",
    "replans",
    "packed",
    "success",
    "constraint_violations",
    "planning_time_s",
    "execution_time_s",
    "total_time_s",
    "timeout_hit",
];

/// Mean and sample standard deviation; `std` is `None` below two samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub sum: f64,
    pub mean: f64,
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let sum: f64 = values.iter().sum();
        let mean = if n == 0 { 0.0 } else { sum / n as f64 };
        let std = (n >= 2).then(|| {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        });
        Self { sum, mean, std }
    }
}

/// Per-(algorithm, H) summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub algorithm: Algorithm,
    pub target_h: f64,
    pub count: usize,
    pub actions: Stat,
    pub mistakes: Stat,
    pub replans: Stat,
    pub packed: Stat,
    pub success: Stat,
    pub constraint_violations: Stat,
    pub planning_time_s: Stat,
    pub execution_time_s: Stat,
    pub total_time_s: Stat,
}

/// Groups by algorithm then ascending H.
pub fn aggregate(records: &[TrialRecord]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(Algorithm, u64), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        // H is non-negative, so its bit pattern orders like its value.
        groups
            .entry((r.algorithm, r.target_h.to_bits()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((algorithm, h), rs)| {
            let stat = |f: &dyn Fn(&TrialRecord) -> f64| {
                Stat::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            Aggregate {
                algorithm,
                target_h: f64::from_bits(h),
                count: rs.len(),
                actions: stat(&|r| r.actions as f64),
                mistakes: stat(&|r| r.mistakes as f64),
                replans: stat(&|r| r.replans as f64),
                packed: stat(&|r| r.packed as f64),
                success: stat(&|r| r.success as u8 as f64),
                constraint_violations: stat(&|r| r.constraint_violations as f64),
                planning_time_s: stat(&|r| r.planning_time_s),
                execution_time_s: stat(&|r| r.execution_time_s),
                total_time_s: stat(&|r| r.total_time_s),
            }
        })
        .collect()
}

pub fn write_summary_csv(aggs: &[Aggregate], path: &Path) -> Result<(), BenchError> {
    const METRICS: [&str; 9] = [
        "actions",
        "mistakes",
        "replans",
        "packed",
        "success",
        "constraint_violations",
        "planning_time_s",
        "execution_time_s",
        "total_time_s",
    ];
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["algorithm".to_string(), "target_h".into(), "count".into()];
    for m in METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    w.write_record(&header)?;
    for a in aggs {
        let mut row = vec![
            a.algorithm.to_string(),
            a.target_h.to_string(),
            a.count.to_string(),
        ];
        for s in [
            a.actions,
            a.mistakes,
            a.replans,
            a.packed,
            a.success,
            a.constraint_violations,
            a.planning_time_s,
            a.execution_time_s,
            a.total_time_s,
        ] {
            row.push(s.mean.to_string());
            row.push(s.std.map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
