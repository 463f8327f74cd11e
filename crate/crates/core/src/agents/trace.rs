use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{AgentError, Algorithm, TrialResult};
use crate::pddl::grocery_domain;
use crate::planner::parse_plan;
use crate::scene_belief::{Observation, SceneBelief, SceneGraph};
use crate::simworld::{execute, goal_satisfied, WorldState};

/// One line of a trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Start {
        algorithm: Algorithm,
        seed: u64,
        target_h: f64,
        measured_h: f64,
        truth: SceneGraph,
        belief: SceneBelief,
    },
    Plan {
        call: usize,
        source_scene: String,
        length: usize,
        expansions: u64,
        charged_s: f64,
    },
    Search {
        model_steps: u64,
        tree_nodes: usize,
        charged_s: f64,
        action: String,
    },
    Act {
        index: usize,
        action: String,
        clock_s: f64,
        observation: Observation,
        valid: bool,
    },
    Fault {
        action: String,
        reason: String,
    },
    Replan {
        reason: String,
    },
    Timeout {
        elapsed_s: f64,
    },
    End {
        result: TrialResult,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn push(&mut self, e: TraceEvent) {
        self.events.push(e);
    }

    /// Executed action signatures, in order.
    pub fn actions(&self) -> Vec<&str> {
        self.events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Act { action, .. } => Some(action.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, AgentError> {
        let mut events = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| AgentError::Trace(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(
                serde_json::from_str(&line)
                    .map_err(|e| AgentError::Trace(format!("line {}: {e}", i + 1)))?,
            );
        }
        Ok(Self { events })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub actions: usize,
    /// Indices of `act` records whose replayed observation differs from the log.
    pub observation_mismatches: Vec<usize>,
    /// Fault records that did not fault again.
    pub unreproduced_faults: usize,
    pub packed: usize,
    pub success: bool,
    pub constraint_violations: usize,
    /// Whether packed/success/actions agree with the logged end record.
    pub matches_logged_result: Option<bool>,
}

/// Re-executes the logged actions on the logged true scene.
pub fn replay(trace: &Trace) -> Result<ReplayReport, AgentError> {
    let truth = trace
        .events
        .iter()
        .find_map(|e| match e {
            TraceEvent::Start { truth, .. } => Some(truth.clone()),
            _ => None,
        })
        .ok_or_else(|| AgentError::Trace("no start record".into()))?;
    let domain = grocery_domain();
    let mut world = WorldState::new(truth);
    let mut report = ReplayReport {
        actions: 0,
        observation_mismatches: Vec::new(),
        unreproduced_faults: 0,
        packed: 0,
        success: false,
        constraint_violations: 0,
        matches_logged_result: None,
    };
    let mut logged: Option<&TrialResult> = None;
    for e in &trace.events {
        match e {
            TraceEvent::Act {
                index,
                action,
                observation,
                ..
            } => {
                let steps = parse_plan(&domain, action)
                    .map_err(|err| AgentError::Trace(err.to_string()))?;
                let step = steps
                    .first()
                    .ok_or_else(|| AgentError::Trace(format!("empty action at {index}")))?;
                let obs = execute(&mut world, step, 0.0)?;
                if &obs != observation {
                    report.observation_mismatches.push(*index);
                }
                report.actions += 1;
            }
            TraceEvent::Fault { action, .. } => {
                let steps = parse_plan(&domain, action)
                    .map_err(|err| AgentError::Trace(err.to_string()))?;
                let mut probe = world.clone();
                if steps
                    .first()
                    .is_some_and(|s| execute(&mut probe, s, 0.0).is_ok())
                {
                    report.unreproduced_faults += 1;
                }
            }
            TraceEvent::End { result } => logged = Some(result),
            _ => {}
        }
    }
    report.packed = world.truth.packed_count();
    report.success = goal_satisfied(&world);
    report.constraint_violations = world.truth.constraint_violations();
    report.matches_logged_result = logged.map(|r| {
        r.packed == report.packed && r.success == report.success && r.actions == report.actions
    });
    Ok(report)
}
