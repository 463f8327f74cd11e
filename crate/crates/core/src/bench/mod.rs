//! Experiment sweeps: arrangements × entropy levels × algorithms × repeats,
//! run on a bounded worker pool and merged back in trial-id order.

mod charts;
mod records;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{run_trial, AgentConfig, Algorithm, CostModel, SearchParams, Trace};
use crate::planner::{Budget, ExternalPlanner, DEFAULT_MAX_EXPANSIONS};
use crate::scene_belief::{inject_entropy, ClassTable};
use crate::simworld::{make_scenario, Scenario, DEFAULT_ACTION_DURATION_S};

pub use charts::{render_chart, write_summary_charts, ChartKind};
pub use records::{
    aggregate, read_csv, write_csv, write_summary_csv, Aggregate, Stat, TrialRecord,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub h_values: Vec<f64>,
    pub n_arrangements: usize,
    pub repeats_per_arrangement: usize,
    pub n_objects: usize,
    /// Table stacks per arrangement; clamped to `n_objects`.
    pub n_stacks: usize,
    pub timeout_s: f64,
    pub action_duration_s: f64,
    pub master_seed: u64,
    /// Allowed gap between measured and target entropy.
    pub entropy_tolerance: f64,
    pub max_expansions: u64,
    pub particles_per_object: usize,
    pub search: SearchParams,
    pub cost: CostModel,
    /// Command template for an external planner; see [`ExternalPlanner`].
    pub external_planner: Option<String>,
    pub out_dir: PathBuf,
    pub write_traces: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            h_values: vec![0.4],
            n_arrangements: 5,
            repeats_per_arrangement: 5,
            n_objects: 8,
            n_stacks: 3,
            timeout_s: 900.0,
            action_duration_s: DEFAULT_ACTION_DURATION_S,
            master_seed: 0,
            entropy_tolerance: 1e-6,
            max_expansions: DEFAULT_MAX_EXPANSIONS,
            particles_per_object: 8,
            search: SearchParams::default(),
            cost: CostModel::default(),
            external_planner: None,
            out_dir: PathBuf::from("results"),
            write_traces: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidConfig(m));
        if self.algorithms.is_empty() || self.h_values.is_empty() {
            return bad("need at least one algorithm and one H value".into());
        }
        if let Some(h) = self.h_values.iter().find(|h| !(0.0..=1.0).contains(*h)) {
            return bad(format!("H value {h} outside [0, 1]"));
        }
        if self.n_arrangements == 0
            || self.repeats_per_arrangement == 0
            || self.n_objects == 0
            || self.n_stacks == 0
        {
            return bad("counts must be positive".into());
        }
        if self.entropy_tolerance.is_nan() || self.entropy_tolerance <= 0.0 {
            return bad("entropy_tolerance must be positive".into());
        }
        self.agent_config(Algorithm::Lesample, 0)
            .validate()
            .map_err(|e| BenchError::InvalidConfig(e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form. Output paths are excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.write_traces = false;
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn agent_config(&self, algorithm: Algorithm, seed: u64) -> AgentConfig {
        AgentConfig {
            timeout_s: self.timeout_s,
            action_duration_s: self.action_duration_s,
            budget: Budget {
                max_expansions: self.max_expansions,
            },
            search: self.search,
            particles_per_object: self.particles_per_object,
            cost: self.cost,
            external_planner: self
                .external_planner
                .clone()
                .map(|command| ExternalPlanner { command }),
            ..AgentConfig::new(algorithm, seed)
        }
    }

    pub fn trial_count(&self) -> usize {
        self.n_arrangements
            * self.h_values.len()
            * self.algorithms.len()
            * self.repeats_per_arrangement
    }

    /// Every trial in id order: arrangement, then H, then algorithm, then repeat.
    pub fn trials(&self) -> Vec<TrialSpec> {
        let mut out = Vec::with_capacity(self.trial_count());
        for a in 0..self.n_arrangements {
            let arrangement_seed = derive_seed(self.master_seed, &[0, a as u64]);
            for (hi, &h) in self.h_values.iter().enumerate() {
                for &algorithm in &self.algorithms {
                    for repeat in 0..self.repeats_per_arrangement {
                        // Shared by all algorithms: same arrangement, same H, same repeat.
                        let agent_seed =
                            derive_seed(self.master_seed, &[1, a as u64, hi as u64, repeat as u64]);
                        out.push(TrialSpec {
                            trial_id: out.len(),
                            algorithm,
                            arrangement_seed,
                            repeat,
                            target_h: h,
                            agent_seed,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Deterministic sub-seed of `master` for a tagged position in the sweep.
pub fn derive_seed(master: u64, tag: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for t in tag {
        h.update(t.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub trial_id: usize,
    pub algorithm: Algorithm,
    pub arrangement_seed: u64,
    pub repeat: usize,
    pub target_h: f64,
    pub agent_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedTrial {
    pub trial_id: usize,
    pub algorithm: Algorithm,
    pub arrangement_seed: u64,
    pub repeat: usize,
    pub target_h: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub trials: Vec<TrialRecord>,
    pub failures: Vec<FailedTrial>,
    pub aggregates: Vec<Aggregate>,
    /// Per-trial traces, kept only when `write_traces` is set.
    #[serde(skip)]
    pub traces: Vec<(usize, Trace)>,
}

/// Builds the world and belief for one trial and runs it.
pub fn run_one(cfg: &ExperimentConfig, spec: &TrialSpec) -> Result<(TrialRecord, Trace), String> {
    let table = ClassTable::grocery();
    let world = make_scenario(
        spec.arrangement_seed,
        cfg.n_objects,
        cfg.n_stacks.min(cfg.n_objects),
        &table,
    )
    .map_err(|e| e.to_string())?;
    let belief = inject_entropy(&table, &world.truth, spec.target_h, cfg.entropy_tolerance)
        .map_err(|e| e.to_string())?;
    let agent = cfg.agent_config(spec.algorithm, spec.agent_seed);
    let (result, trace) =
        run_trial(world, belief, spec.target_h, &agent).map_err(|e| e.to_string())?;
    Ok((TrialRecord::new(spec, &result), trace))
}

/// The scenario file for one arrangement at one entropy level.
pub fn scenario_for(
    cfg: &ExperimentConfig,
    arrangement_seed: u64,
    target_h: f64,
) -> Result<Scenario, String> {
    let table = ClassTable::grocery();
    let world = make_scenario(
        arrangement_seed,
        cfg.n_objects,
        cfg.n_stacks.min(cfg.n_objects),
        &table,
    )
    .map_err(|e| e.to_string())?;
    let belief = inject_entropy(&table, &world.truth, target_h, cfg.entropy_tolerance)
        .map_err(|e| e.to_string())?;
    Ok(Scenario {
        seed: Some(arrangement_seed),
        class_table: table,
        truth: world.truth,
        belief: Some(belief),
    })
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Runs the whole sweep on `jobs` worker threads. A trial that errors or
/// panics is recorded in `failures`; the rest of the sweep continues.
pub fn run_experiments(
    cfg: &ExperimentConfig,
    jobs: usize,
) -> Result<ExperimentReport, BenchError> {
    cfg.validate()?;
    let specs = cfg.trials();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    let outcomes: Vec<Result<(TrialRecord, Trace), String>> = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                log::debug!(
                    "trial {} {} h={}",
                    spec.trial_id,
                    spec.algorithm,
                    spec.target_h
                );
                panic::catch_unwind(AssertUnwindSafe(|| run_one(cfg, spec)))
                    .unwrap_or_else(|p| Err(panic_message(p)))
            })
            .collect()
    });

    let mut trials = Vec::new();
    let mut failures = Vec::new();
    let mut traces = Vec::new();
    for (spec, outcome) in specs.iter().zip(outcomes) {
        match outcome {
            Ok((record, trace)) => {
                if cfg.write_traces {
                    traces.push((spec.trial_id, trace));
                }
                trials.push(record);
            }
            Err(error) => {
                log::warn!(
                    "trial {} ({}) failed: {error}",
                    spec.trial_id,
                    spec.algorithm
                );
                failures.push(FailedTrial {
                    trial_id: spec.trial_id,
                    algorithm: spec.algorithm,
                    arrangement_seed: spec.arrangement_seed,
                    repeat: spec.repeat,
                    target_h: spec.target_h,
                    error,
                });
            }
        }
    }
    let aggregates = aggregate(&trials);
    Ok(ExperimentReport {
        config: cfg.clone(),
        provenance: Provenance {
            config_hash: cfg.hash(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        trials,
        failures,
        aggregates,
        traces,
    })
}

/// Writes `results.csv`, `summary.csv`, `report.json`, the charts and, if
/// kept, one JSONL trace per trial under `dir`. Returns the written paths.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv_path = dir.join("results.csv");
    write_csv(&report.trials, &csv_path)?;
    written.push(csv_path);
    let summary = dir.join("summary.csv");
    write_summary_csv(&report.aggregates, &summary)?;
    written.push(summary);
    let json = dir.join("report.json");
    fs::write(&json, serde_json::to_string_pretty(report)?)?;
    written.push(json);
    written.extend(write_summary_charts(report, &dir.join("charts"))?);
    if !report.traces.is_empty() {
        let tdir = dir.join("traces");
        fs::create_dir_all(&tdir)?;
        for (id, trace) in &report.traces {
            let path = tdir.join(format!("trial-{id:05}.jsonl"));
            trace.write_jsonl(std::io::BufWriter::new(fs::File::create(&path)?))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            algorithms: vec![Algorithm::Lesample],
            h_values: vec![0.2],
            n_arrangements: 1,
            repeats_per_arrangement: 1,
            n_objects: 3,
            n_stacks: 2,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn one_of_everything_is_one_trial() {
        let r = run_experiments(&tiny(), 1).unwrap();
        assert_eq!(r.trials.len(), 1);
        assert!(r.failures.is_empty());
        assert_eq!(r.aggregates.len(), 1);
        assert_eq!(r.aggregates[0].count, 1);
    }

    #[test]
    fn default_config_is_125_trials() {
        let c = ExperimentConfig::default();
        assert_eq!(c.trial_count(), 125);
        let specs = c.trials();
        assert_eq!(specs.len(), 125);
        assert!(specs.iter().enumerate().all(|(i, s)| s.trial_id == i));
    }

    #[test]
    fn agent_seed_shared_across_algorithms() {
        let c = ExperimentConfig {
            repeats_per_arrangement: 2,
            ..ExperimentConfig::default()
        };
        let specs = c.trials();
        let same: Vec<u64> = specs
            .iter()
            .filter(|s| s.repeat == 1)
            .take(5)
            .map(|s| s.agent_seed)
            .collect();
        assert!(same.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(specs[0].agent_seed, specs[1].agent_seed);
    }

    #[test]
    fn hash_ignores_output_paths_only() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            out_dir: "elsewhere".into(),
            write_traces: true,
            ..a.clone()
        };
        let c = ExperimentConfig {
            master_seed: 1,
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad_h = ExperimentConfig {
            h_values: vec![1.5],
            ..tiny()
        };
        assert!(bad_h.validate().is_err());
        let no_algos = ExperimentConfig {
            algorithms: vec![],
            ..tiny()
        };
        assert!(no_algos.validate().is_err());
        assert!(run_experiments(
            &ExperimentConfig {
                n_objects: 0,
                ..tiny()
            },
            1
        )
        .is_err());
    }

    #[test]
    fn config_json_partial_fields_take_defaults() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"h_values": [0.1, 0.9], "algorithms": ["pomcp"]}"#).unwrap();
        assert_eq!(c.h_values, vec![0.1, 0.9]);
        assert_eq!(c.n_objects, 8);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"h_value": 0.1}"#).is_err());
    }
}
