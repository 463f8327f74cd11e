//! LESAMPLE and the four baselines behind one trial contract: observe, act,
//! maybe replan, with metrics and a replayable trace.
//!
//! Planning time is charged through a [`CostModel`] over counted search work
//! (planner calls, node expansions, generative-model steps) so that results
//! are identical across machines and worker counts. Wall-clock time is kept
//! separately in [`TrialResult::planning_wall_s`].

mod classical;
mod despot;
mod pomcp;
mod pomdp;
mod pomdp_agent;
mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::{Budget, ExternalPlanner};
use crate::scene_belief::{BeliefError, SceneBelief};
use crate::simworld::{SimError, WorldState, DEFAULT_ACTION_DURATION_S};

pub use classical::{run_bpstream, run_ffreplan, run_lesample};
pub use despot::{despot_search, GAP_TOLERANCE};
pub use pomcp::{pomcp_search, SearchOutcome};
pub use pomdp::{
    Node, PAction, PState, PackingPomdp, StepResult, FAILURE_REWARD, PACK_REWARD, SUCCESS_REWARD,
};
pub use pomdp_agent::{run_despot, run_pomcp, run_pomdp_agent, SearchFn};
pub use trace::{replay, ReplayReport, Trace, TraceEvent};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error("no particles to search from")]
    NoParticles,
    #[error("no legal action in any particle")]
    NoLegalAction,
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("trace: {0}")]
    Trace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Lesample,
    Ffreplan,
    Bpstream,
    Pomcp,
    Despot,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Lesample,
        Algorithm::Ffreplan,
        Algorithm::Bpstream,
        Algorithm::Pomcp,
        Algorithm::Despot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Lesample => "lesample",
            Algorithm::Ffreplan => "ffreplan",
            Algorithm::Bpstream => "bpstream",
            Algorithm::Pomcp => "pomcp",
            Algorithm::Despot => "despot",
        }
    }

    /// Label used in charts.
    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::Lesample => "LESAMPLE",
            Algorithm::Ffreplan => "FF-Replan",
            Algorithm::Bpstream => "BPSTREAM*",
            Algorithm::Pomcp => "POMCP-ER",
            Algorithm::Despot => "DESPOT",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| AgentError::UnknownAlgorithm(s.to_string()))
    }
}

/// Simulated seconds charged for search work.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    /// Fixed cost of one classical planner invocation.
    pub planner_call_s: f64,
    pub planner_expansion_s: f64,
    /// Cost of one generative-model transition in POMCP/DESPOT.
    pub model_step_s: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            planner_call_s: 8.0,
            planner_expansion_s: 0.05,
            model_step_s: 3.5,
        }
    }
}

impl CostModel {
    pub fn planner(&self, expansions: u64) -> f64 {
        self.planner_call_s + expansions as f64 * self.planner_expansion_s
    }

    pub fn model(&self, steps: u64) -> f64 {
        steps as f64 * self.model_step_s
    }
}

/// POMCP/DESPOT parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams {
    pub iterations: usize,
    pub rollout_depth: usize,
    pub particles: usize,
    pub discount: f64,
    pub scenarios: usize,
    /// UCB1 exploration constant, on the scale of the rewards.
    pub exploration: f64,
    /// DESPOT per-node regularization weight.
    pub regularization: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            iterations: 10,
            rollout_depth: 10,
            particles: 10,
            discount: 1.0,
            scenarios: 3,
            exploration: 100.0,
            regularization: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub timeout_s: f64,
    pub action_duration_s: f64,
    pub budget: Budget,
    pub search: SearchParams,
    pub particles_per_object: usize,
    pub seed: u64,
    pub cost: CostModel,
    pub external_planner: Option<ExternalPlanner>,
}

impl AgentConfig {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        Self {
            algorithm,
            timeout_s: 900.0,
            action_duration_s: DEFAULT_ACTION_DURATION_S,
            budget: Budget::default(),
            search: SearchParams::default(),
            particles_per_object: 8,
            seed,
            cost: CostModel::default(),
            external_planner: None,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidConfig(m.to_string()));
        let s = &self.search;
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return bad("timeout_s must be positive and finite");
        }
        if !(self.action_duration_s.is_finite() && self.action_duration_s >= 0.0) {
            return bad("action_duration_s must be non-negative");
        }
        if s.iterations == 0
            || s.rollout_depth == 0
            || s.particles == 0
            || s.scenarios == 0
            || self.particles_per_object == 0
        {
            return bad("search counts must be positive");
        }
        if !(s.discount > 0.0 && s.discount <= 1.0) {
            return bad("discount must lie in (0, 1]");
        }
        let c = &self.cost;
        if [
            c.planner_call_s,
            c.planner_expansion_s,
            c.model_step_s,
            s.exploration,
            s.regularization,
        ]
        .iter()
        .any(|v| !v.is_finite() || *v < 0.0)
        {
            return bad("costs and search weights must be non-negative");
        }
        Ok(())
    }
}

/// Metrics of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub target_h: f64,
    pub measured_h: f64,
    pub n_objects: usize,
    pub actions: usize,
    /// Pick-time identity surprises plus execution faults.
    pub mistakes: usize,
    pub replans: usize,
    pub packed: usize,
    pub success: bool,
    pub constraint_violations: usize,
    pub planning_time_s: f64,
    pub execution_time_s: f64,
    pub total_time_s: f64,
    pub timeout_hit: bool,
    pub execution_faults: usize,
    pub planner_calls: usize,
    pub planning_wall_s: f64,
}

/// Budget bookkeeping shared by all agents. The timeout applies to charged
/// planning time plus simulated execution time.
#[derive(Debug, Clone)]
pub(crate) struct Meter {
    timeout_s: f64,
    pub planning_s: f64,
    pub execution_s: f64,
    pub wall_s: f64,
    pub timeout_hit: bool,
}

impl Meter {
    fn new(timeout_s: f64) -> Self {
        Self {
            timeout_s,
            planning_s: 0.0,
            execution_s: 0.0,
            wall_s: 0.0,
            timeout_hit: false,
        }
    }

    fn elapsed(&self) -> f64 {
        self.planning_s + self.execution_s
    }

    /// Charges a search. Returns false, charging only the time left, when the
    /// search would run past the timeout.
    fn charge_planning(&mut self, cost_s: f64, wall_s: f64) -> bool {
        self.wall_s += wall_s;
        let left = (self.timeout_s - self.elapsed()).max(0.0);
        if cost_s > left {
            self.planning_s += left;
            self.timeout_hit = true;
            return false;
        }
        self.planning_s += cost_s;
        true
    }

    /// Whether an action of `duration_s` still fits; flags the timeout if not.
    fn admit_action(&mut self, duration_s: f64) -> bool {
        if self.elapsed() + duration_s > self.timeout_s {
            self.timeout_hit = true;
            return false;
        }
        true
    }

    fn out_of_time(&mut self) -> bool {
        if self.elapsed() >= self.timeout_s {
            self.timeout_hit = true;
        }
        self.timeout_hit
    }
}

#[derive(Debug, Default)]
pub(crate) struct Counters {
    pub mistakes: usize,
    pub replans: usize,
    pub faults: usize,
    pub planner_calls: usize,
}

pub(crate) fn finish(
    world: &WorldState,
    cfg: &AgentConfig,
    target_h: f64,
    measured_h: f64,
    meter: &Meter,
    counters: &Counters,
) -> TrialResult {
    let truth = &world.truth;
    let execution_time_s = meter.execution_s;
    TrialResult {
        algorithm: cfg.algorithm,
        seed: cfg.seed,
        target_h,
        measured_h,
        n_objects: truth.objects.len(),
        actions: world.history.len(),
        mistakes: counters.mistakes,
        replans: counters.replans,
        packed: truth.packed_count(),
        success: crate::simworld::goal_satisfied(world),
        constraint_violations: truth.constraint_violations(),
        planning_time_s: meter.planning_s,
        execution_time_s,
        total_time_s: meter.planning_s + execution_time_s,
        timeout_hit: meter.timeout_hit,
        execution_faults: counters.faults,
        planner_calls: counters.planner_calls,
        planning_wall_s: meter.wall_s,
    }
}

/// Runs the configured algorithm on one world. `target_h` is only recorded.
pub fn run_trial(
    world: WorldState,
    belief: SceneBelief,
    target_h: f64,
    cfg: &AgentConfig,
) -> Result<(TrialResult, Trace), AgentError> {
    cfg.validate()?;
    match cfg.algorithm {
        Algorithm::Lesample => run_lesample(world, belief, target_h, cfg),
        Algorithm::Ffreplan => run_ffreplan(world, belief, target_h, cfg),
        Algorithm::Bpstream => run_bpstream(world, belief, target_h, cfg),
        Algorithm::Pomcp => run_pomcp(world, belief, target_h, cfg),
        Algorithm::Despot => run_despot(world, belief, target_h, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("fastdownward".parse::<Algorithm>().is_err());
    }

    #[test]
    fn meter_charges_only_remaining_time() {
        let mut m = Meter::new(100.0);
        assert!(m.charge_planning(60.0, 0.0));
        assert!(m.admit_action(40.0));
        m.execution_s += 30.0;
        assert!(!m.charge_planning(20.0, 0.0));
        assert_eq!(m.elapsed(), 100.0);
        assert!(m.timeout_hit);
    }

    #[test]
    fn config_validation() {
        let mut c = AgentConfig::new(Algorithm::Pomcp, 1);
        assert!(c.validate().is_ok());
        c.search.discount = 0.0;
        assert!(c.validate().is_err());
        let mut c = AgentConfig::new(Algorithm::Pomcp, 1);
        c.search.iterations = 0;
        assert!(c.validate().is_err());
    }
}
