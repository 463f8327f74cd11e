use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::despot::despot_search;
use super::pomcp::{pomcp_search, SearchOutcome};
use super::pomdp::{PAction, PState, PackingPomdp};
use super::trace::{Trace, TraceEvent};
use super::{finish, AgentConfig, AgentError, Counters, Meter, SearchParams, TrialResult};
use crate::scene_belief::{sample_index, Observation, SceneBelief};
use crate::simworld::{execute, SimError, WorldState};

/// Online search over a particle set.
pub type SearchFn = fn(
    &PackingPomdp,
    &[PState],
    &SearchParams,
    &mut ChaCha8Rng,
) -> Result<SearchOutcome, AgentError>;

fn draw_classes(belief: &SceneBelief, rng: &mut ChaCha8Rng) -> Vec<usize> {
    belief
        .objects()
        .iter()
        .map(|o| sample_index(&o.weights, rng))
        .collect()
}

/// Most common class of object `i` across the particles; ties to the lower index.
fn majority(particles: &[Vec<usize>], i: usize, n_classes: usize) -> usize {
    let mut counts = vec![0usize; n_classes];
    for p in particles {
        counts[p[i]] += 1;
    }
    let mut best = 0;
    for c in 1..n_classes {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

/// Generic loop for a POMDP agent: search from the particle set, execute the
/// chosen action, filter particles on the revealed identity and top up from
/// the updated belief.
pub fn run_pomdp_agent(
    mut world: WorldState,
    mut belief: SceneBelief,
    target_h: f64,
    cfg: &AgentConfig,
    search: SearchFn,
) -> Result<(TrialResult, Trace), AgentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let measured_h = belief.entropy();
    let model = PackingPomdp::from_belief(&belief, cfg.search.discount);
    let n_classes = model.class_table.len();
    let mut trace = Trace::default();
    trace.push(TraceEvent::Start {
        algorithm: cfg.algorithm,
        seed: cfg.seed,
        target_h,
        measured_h,
        truth: world.truth.clone(),
        belief: belief.clone(),
    });
    let mut meter = Meter::new(cfg.timeout_s);
    let mut counters = Counters::default();
    let cap = 8 * model.objects.len() + 32;
    let mut particles: Vec<Vec<usize>> = (0..cfg.search.particles)
        .map(|_| draw_classes(&belief, &mut rng))
        .collect();

    loop {
        let layout = belief.layout();
        let states: Vec<PState> = particles
            .iter()
            .map(|c| model.state(layout, c.clone()))
            .collect();
        if states
            .first()
            .is_some_and(|s| model.all_packed(s) && s.held.is_none())
        {
            break;
        }
        if meter.out_of_time() || counters.planner_calls >= cap {
            break;
        }
        let started = Instant::now();
        let outcome = search(&model, &states, &cfg.search, &mut rng)?;
        let wall = started.elapsed().as_secs_f64();
        counters.planner_calls += 1;
        counters.replans += 1;
        let cost = cfg.cost.model(outcome.model_steps);
        if !meter.charge_planning(cost, wall) {
            trace.push(TraceEvent::Timeout {
                elapsed_s: meter.elapsed(),
            });
            break;
        }
        let action = model.to_ground(outcome.action);
        trace.push(TraceEvent::Search {
            model_steps: outcome.model_steps,
            tree_nodes: outcome.tree_nodes,
            charged_s: cost,
            action: action.to_string(),
        });
        if !meter.admit_action(cfg.action_duration_s) {
            trace.push(TraceEvent::Timeout {
                elapsed_s: meter.elapsed(),
            });
            break;
        }
        match execute(&mut world, &action, cfg.action_duration_s) {
            Ok(obs) => {
                meter.execution_s += cfg.action_duration_s;
                let mut valid = true;
                if let (
                    PAction::Pick { object, .. },
                    Observation::PickedIdentity { category, .. },
                ) = (outcome.action, &obs)
                {
                    let seen = model
                        .class_table
                        .index_of(category)
                        .ok_or_else(|| AgentError::Trace(format!("unknown category {category}")))?;
                    valid = majority(&particles, object, n_classes) == seen;
                    if !valid {
                        counters.mistakes += 1;
                    }
                    belief = belief.update_on_observation(&obs)?;
                    particles.retain(|p| p[object] == seen);
                    while particles.len() < cfg.search.particles {
                        particles.push(draw_classes(&belief, &mut rng));
                    }
                }
                belief = belief.with_layout(world.truth.layout.clone())?;
                trace.push(TraceEvent::Act {
                    index: world.history.len() - 1,
                    action: action.to_string(),
                    clock_s: meter.elapsed(),
                    observation: obs,
                    valid,
                });
            }
            Err(SimError::ExecutionFault { action, reason }) => {
                counters.mistakes += 1;
                counters.faults += 1;
                trace.push(TraceEvent::Fault { action, reason });
                belief = belief.with_layout(world.truth.layout.clone())?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let result = finish(&world, cfg, target_h, measured_h, &meter, &counters);
    trace.push(TraceEvent::End {
        result: result.clone(),
    });
    Ok((result, trace))
}

pub fn run_pomcp(
    world: WorldState,
    belief: SceneBelief,
    target_h: f64,
    cfg: &AgentConfig,
) -> Result<(TrialResult, Trace), AgentError> {
    run_pomdp_agent(world, belief, target_h, cfg, pomcp_search::<ChaCha8Rng>)
}

pub fn run_despot(
    world: WorldState,
    belief: SceneBelief,
    target_h: f64,
    cfg: &AgentConfig,
) -> Result<(TrialResult, Trace), AgentError> {
    run_pomdp_agent(world, belief, target_h, cfg, despot_search::<ChaCha8Rng>)
}
