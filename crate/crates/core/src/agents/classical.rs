use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::trace::{Trace, TraceEvent};
use super::{finish, AgentConfig, AgentError, Counters, Meter, TrialResult};
use crate::pddl::{grocery_domain, DomainDef, GroundAction};
use crate::planner::{plan, plan_external, Plan, PlanError};
use crate::scene_belief::{sample_index, SceneBelief, SceneGraph, SceneObject};
use crate::simworld::{execute, ground_goal, scene_to_problem, validate, SimError, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Determinize {
    Sample,
    Argmax,
}

fn plan_scene(
    domain: &DomainDef,
    scene: &SceneGraph,
    cfg: &AgentConfig,
) -> Result<Result<Plan, PlanError>, AgentError> {
    let goal = ground_goal(scene);
    let problem = scene_to_problem(scene, &goal.goal)?;
    Ok(match &cfg.external_planner {
        Some(ext) => plan_external(ext, domain, &problem),
        None => plan(domain, &problem, cfg.budget),
    })
}

fn start_event(
    world: &WorldState,
    belief: &SceneBelief,
    target_h: f64,
    cfg: &AgentConfig,
) -> TraceEvent {
    TraceEvent::Start {
        algorithm: cfg.algorithm,
        seed: cfg.seed,
        target_h,
        measured_h: belief.entropy(),
        truth: world.truth.clone(),
        belief: belief.clone(),
    }
}

struct Step {
    /// The pick revealed an identity other than the planned one.
    surprise: bool,
    /// The action was refused by the world.
    fault: bool,
}

/// Executes one action and folds the observation into the belief.
fn act(
    world: &mut WorldState,
    belief: &mut SceneBelief,
    scene: &SceneGraph,
    a: &GroundAction,
    cfg: &AgentConfig,
    meter: &mut Meter,
    trace: &mut Trace,
) -> Result<Step, AgentError> {
    match execute(world, a, cfg.action_duration_s) {
        Ok(obs) => {
            meter.execution_s += cfg.action_duration_s;
            *belief = belief
                .update_on_observation(&obs)?
                .with_layout(world.truth.layout.clone())?;
            let valid = validate(scene, a, &obs);
            trace.push(TraceEvent::Act {
                index: world.history.len() - 1,
                action: a.to_string(),
                clock_s: meter.elapsed(),
                observation: obs,
                valid,
            });
            Ok(Step {
                surprise: !valid,
                fault: false,
            })
        }
        Err(SimError::ExecutionFault { action, reason }) => {
            trace.push(TraceEvent::Fault { action, reason });
            *belief = belief.with_layout(world.truth.layout.clone())?;
            Ok(Step {
                surprise: false,
                fault: true,
            })
        }
        Err(e) => Err(e.into()),
    }
}

/// Plans once for `scene`, charging the cost model. `None` means the timeout
/// was hit during planning.
fn charged_plan(
    domain: &DomainDef,
    scene: &SceneGraph,
    label: String,
    cfg: &AgentConfig,
    meter: &mut Meter,
    counters: &mut Counters,
    trace: &mut Trace,
) -> Result<Option<Result<Plan, PlanError>>, AgentError> {
    let started = Instant::now();
    let result = plan_scene(domain, scene, cfg)?;
    let wall = started.elapsed().as_secs_f64();
    counters.planner_calls += 1;
    let stats = match &result {
        Ok(p) => p.stats,
        Err(e) => e.stats(),
    };
    let cost = cfg.cost.planner(stats.expanded);
    if !meter.charge_planning(cost, wall) {
        trace.push(TraceEvent::Timeout {
            elapsed_s: meter.elapsed(),
        });
        return Ok(None);
    }
    let result = result.map(|mut p| {
        p.source_scene = label.clone();
        trace.push(TraceEvent::Plan {
            call: counters.planner_calls,
            source_scene: label,
            length: p.len(),
            expansions: stats.expanded,
            charged_s: cost,
        });
        p
    });
    Ok(Some(result))
}

fn max_planner_calls(n_objects: usize) -> usize {
    8 * n_objects + 32
}

/// Sample (or determinize), plan, execute until a pick surprises, then update
/// and replan. Stops when a plan runs to completion or time runs out.
fn run_replanning(
    mut world: WorldState,
    mut belief: SceneBelief,
    target_h: f64,
    cfg: &AgentConfig,
    mode: Determinize,
) -> Result<(TrialResult, Trace), AgentError> {
    let domain = grocery_domain();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let measured_h = belief.entropy();
    let mut trace = Trace::default();
    trace.push(start_event(&world, &belief, target_h, cfg));
    let mut meter = Meter::new(cfg.timeout_s);
    let mut counters = Counters::default();
    let cap = max_planner_calls(world.truth.objects.len());

    'outer: while !meter.out_of_time() && counters.planner_calls < cap {
        let scene = match mode {
            Determinize::Sample => belief.sample_scene(&mut rng),
            Determinize::Argmax => belief.argmax_scene(),
        };
        let tag = if mode == Determinize::Sample {
            "sample"
        } else {
            "argmax"
        };
        if counters.planner_calls > 0 {
            counters.replans += 1;
        }
        let label = format!("{tag}-{}", counters.planner_calls + 1);
        let Some(result) = charged_plan(
            &domain,
            &scene,
            label,
            cfg,
            &mut meter,
            &mut counters,
            &mut trace,
        )?
        else {
            break;
        };
        let plan = match result {
            Ok(p) => p,
            Err(e) => {
                trace.push(TraceEvent::Replan {
                    reason: e.to_string(),
                });
                continue;
            }
        };
        for a in &plan.actions {
            if !meter.admit_action(cfg.action_duration_s) {
                trace.push(TraceEvent::Timeout {
                    elapsed_s: meter.elapsed(),
                });
                break 'outer;
            }
            let step = act(
                &mut world,
                &mut belief,
                &scene,
                a,
                cfg,
                &mut meter,
                &mut trace,
            )?;
            if step.fault || step.surprise {
                counters.mistakes += 1;
                counters.faults += step.fault as usize;
                let reason = if step.fault {
                    "execution fault"
                } else {
                    "picked identity differs from the plan's scene"
                };
                trace.push(TraceEvent::Replan {
                    reason: reason.into(),
                });
                continue 'outer;
            }
        }
        break;
    }
    let result = finish(&world, cfg, target_h, measured_h, &meter, &counters);
    trace.push(TraceEvent::End {
        result: result.clone(),
    });
    Ok((result, trace))
}

/// Sample a scene graph from the belief, plan, execute, validate each pick,
/// and on a mismatch update the belief and start over.
pub fn run_lesample(
    world: WorldState,
    belief: SceneBelief,
    target_h: f64,
    cfg: &AgentConfig,
) -> Result<(TrialResult, Trace), AgentError> {
    run_replanning(world, belief, target_h, cfg, Determinize::Sample)
}

/// As [`run_lesample`] but plans on the per-object most likely scene.
pub fn run_ffreplan(
    world: WorldState,
    belief: SceneBelief,
    target_h: f64,
    cfg: &AgentConfig,
) -> Result<(TrialResult, Trace), AgentError> {
    run_replanning(world, belief, target_h, cfg, Determinize::Argmax)
}

/// Per-object majority over `k` weighted draws; ties go to the higher belief
/// weight, then to the lower class index.
fn consensus_scene(belief: &SceneBelief, k: usize, rng: &mut ChaCha8Rng) -> SceneGraph {
    let table = belief.class_table();
    let objects = belief
        .objects()
        .iter()
        .map(|o| {
            let mut counts = vec![0usize; table.len()];
            for _ in 0..k {
                counts[sample_index(&o.weights, rng)] += 1;
            }
            let mut best = 0;
            for c in 1..counts.len() {
                let better = counts[c] > counts[best]
                    || (counts[c] == counts[best] && o.weights[c] > o.weights[best]);
                if better {
                    best = c;
                }
            }
            SceneObject {
                id: o.object_id.clone(),
                category: table.label(best).to_string(),
                attribute: table.attribute(best),
            }
        })
        .collect();
    SceneGraph {
        objects,
        layout: belief.layout().clone(),
    }
}

fn layout_packed(belief: &SceneBelief) -> bool {
    let l = belief.layout();
    l.held.is_none() && belief.objects().iter().all(|o| l.in_box(&o.object_id))
}

/// Replans from a fresh particle consensus before every action and executes
/// only the first step of each plan.
pub fn run_bpstream(
    mut world: WorldState,
    mut belief: SceneBelief,
    target_h: f64,
    cfg: &AgentConfig,
) -> Result<(TrialResult, Trace), AgentError> {
    let domain = grocery_domain();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let measured_h = belief.entropy();
    let mut trace = Trace::default();
    trace.push(start_event(&world, &belief, target_h, cfg));
    let mut meter = Meter::new(cfg.timeout_s);
    let mut counters = Counters::default();
    let cap = max_planner_calls(world.truth.objects.len());

    while !layout_packed(&belief) && !meter.out_of_time() && counters.planner_calls < cap {
        let scene = consensus_scene(&belief, cfg.particles_per_object, &mut rng);
        let label = format!("consensus-{}", counters.planner_calls + 1);
        let Some(result) = charged_plan(
            &domain,
            &scene,
            label,
            cfg,
            &mut meter,
            &mut counters,
            &mut trace,
        )?
        else {
            break;
        };
        counters.replans += 1;
        let plan = match result {
            Ok(p) => p,
            Err(e) => {
                trace.push(TraceEvent::Replan {
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let Some(a) = plan.actions.first() else {
            break;
        };
        if !meter.admit_action(cfg.action_duration_s) {
            trace.push(TraceEvent::Timeout {
                elapsed_s: meter.elapsed(),
            });
            break;
        }
        let step = act(
            &mut world,
            &mut belief,
            &scene,
            a,
            cfg,
            &mut meter,
            &mut trace,
        )?;
        if step.fault || step.surprise {
            counters.mistakes += 1;
            counters.faults += step.fault as usize;
        }
    }
    let result = finish(&world, cfg, target_h, measured_h, &meter, &counters);
    trace.push(TraceEvent::End {
        result: result.clone(),
    });
    Ok((result, trace))
}
