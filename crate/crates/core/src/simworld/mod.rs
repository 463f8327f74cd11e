//! Deterministic grocery-packing world: scenario generation, exact action
//! execution, pick-time validation, goal grounding and the true goal check.

mod goal;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::GroundAction;
use crate::scene_belief::{
    BeliefError, ClassTable, Layout, Observation, OnEdge, SceneBelief, SceneGraph, SceneObject,
    Surface, SurfaceKind,
};

pub use goal::{goal_satisfied, ground_goal, scene_to_problem, GoalSpec};

pub const DEFAULT_ACTION_DURATION_S: f64 = 10.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("execution fault on {action}: {reason}")]
    ExecutionFault { action: String, reason: String },
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error("scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario json: {0}")]
    Json(#[from] serde_json::Error),
}

/// The true world of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub truth: SceneGraph,
    pub history: Vec<GroundAction>,
    /// Simulated execution seconds.
    pub clock: f64,
}

impl WorldState {
    pub fn new(truth: SceneGraph) -> Self {
        Self {
            truth,
            history: Vec::new(),
            clock: 0.0,
        }
    }

    pub fn held(&self) -> Option<&str> {
        self.truth.layout.held.as_deref()
    }

    pub fn is_hand_empty(&self) -> bool {
        self.held().is_none()
    }
}

pub fn table_name(i: usize) -> String {
    format!("table{i}")
}

pub fn box_name(i: usize) -> String {
    format!("box{i}")
}

pub fn object_name(i: usize) -> String {
    format!("o{i}")
}

/// `n_stacks` table slots and one box slot per object.
pub fn grocery_surfaces(n_objects: usize, n_stacks: usize) -> Vec<Surface> {
    (1..=n_stacks)
        .map(|i| Surface::new(table_name(i), SurfaceKind::Table))
        .chain((1..=n_objects).map(|i| Surface::new(box_name(i), SurfaceKind::Box)))
        .collect()
}

/// Random categories (with repetition) split into `n_stacks` nonempty stacks.
pub fn make_scenario(
    seed: u64,
    n_objects: usize,
    n_stacks: usize,
    classes: &ClassTable,
) -> Result<WorldState, SimError> {
    if n_stacks == 0 || n_stacks > n_objects {
        return Err(SimError::InvalidScenario(format!(
            "need 1 <= n_stacks <= n_objects, got {n_stacks} stacks for {n_objects} objects"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objects: Vec<SceneObject> = (1..=n_objects)
        .map(|i| {
            let c = rng.gen_range(0..classes.len());
            SceneObject {
                id: object_name(i),
                category: classes.label(c).to_string(),
                attribute: classes.attribute(c),
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..n_objects).collect();
    order.shuffle(&mut rng);
    let mut gaps: Vec<usize> = (1..n_objects).collect();
    gaps.shuffle(&mut rng);
    let mut cuts: Vec<usize> = gaps[..n_stacks - 1].to_vec();
    cuts.sort_unstable();
    cuts.push(n_objects);

    let mut edges = Vec::with_capacity(n_objects);
    let mut start = 0;
    for (s, &end) in cuts.iter().enumerate() {
        let mut below = table_name(s + 1);
        for &o in &order[start..end] {
            edges.push(OnEdge::new(objects[o].id.clone(), below.clone()));
            below = objects[o].id.clone();
        }
        start = end;
    }
    let truth = SceneGraph {
        objects,
        layout: Layout::new(grocery_surfaces(n_objects, n_stacks), edges, None),
    };
    truth.validate(classes)?;
    Ok(WorldState::new(truth))
}

fn fault(action: &GroundAction, reason: impl Into<String>) -> SimError {
    SimError::ExecutionFault {
        action: action.to_string(),
        reason: reason.into(),
    }
}

/// Applies `action` to the true layout. Picks reveal the true category.
///
/// This works on the layout directly rather than through the PDDL semantics,
/// so it doubles as an independent check of the domain encoding.
pub fn execute(
    world: &mut WorldState,
    action: &GroundAction,
    action_duration_s: f64,
) -> Result<Observation, SimError> {
    let layout = &world.truth.layout;
    let obs = match (action.name.as_str(), action.args.as_slice()) {
        ("pick", [x, y]) => {
            if world.truth.object(x).is_none() {
                return Err(fault(action, format!("{x} is not an object")));
            }
            if layout.held.is_some() {
                return Err(fault(action, "hand is not empty"));
            }
            if layout.support_of(x) != Some(y.as_str()) {
                return Err(fault(action, format!("{x} is not on {y}")));
            }
            if !layout.is_topfree(x) {
                return Err(fault(action, format!("{x} is not clear")));
            }
            world.truth.layout.lift(x);
            let category = world.truth.category_of(x).unwrap_or_default().to_string();
            Observation::PickedIdentity {
                object_id: x.clone(),
                category,
            }
        }
        ("place", [x, y]) => {
            if layout.held.as_deref() != Some(x.as_str()) {
                return Err(fault(action, format!("{x} is not held")));
            }
            if x == y || (world.truth.object(y).is_none() && !layout.is_surface(y)) {
                return Err(fault(action, format!("{y} is not a valid support")));
            }
            if !layout.is_topfree(y) {
                return Err(fault(action, format!("{y} is not clear")));
            }
            let boxed = layout
                .surface(y)
                .map_or_else(|| layout.in_box(y), |s| s.kind == SurfaceKind::Box);
            if !boxed {
                return Err(fault(action, format!("{y} is not in the box")));
            }
            world.truth.layout.put(x, y);
            Observation::DetectionSnapshot
        }
        _ => return Err(fault(action, "unknown action")),
    };
    world.clock += action_duration_s;
    world.history.push(action.clone());
    Ok(obs)
}

/// False exactly when a pick revealed a category other than the sampled one.
pub fn validate(sampled: &SceneGraph, action: &GroundAction, obs: &Observation) -> bool {
    match obs {
        Observation::PickedIdentity {
            object_id,
            category,
        } if action.name == "pick" => sampled.category_of(object_id) == Some(category.as_str()),
        _ => true,
    }
}

/// A replayable trial setup: the true scene, and optionally the belief the
/// agent starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub class_table: ClassTable,
    pub truth: SceneGraph,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief: Option<SceneBelief>,
}

impl Scenario {
    pub fn to_json(&self) -> Result<String, SimError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.truth.validate(&s.class_table)?;
        if let Some(b) = &s.belief {
            if b.layout() != &s.truth.layout {
                return Err(SimError::InvalidScenario(
                    "belief layout differs from the true layout".into(),
                ));
            }
            let ids: Vec<&str> = b.objects().iter().map(|o| o.object_id.as_str()).collect();
            if ids
                .iter()
                .copied()
                .collect::<std::collections::BTreeSet<_>>()
                != s.truth.object_ids()
            {
                return Err(SimError::InvalidScenario(
                    "belief objects differ from the true objects".into(),
                ));
            }
        }
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The stored belief, or a certain belief over the truth.
    pub fn initial_belief(&self) -> Result<SceneBelief, SimError> {
        match &self.belief {
            Some(b) => Ok(b.clone()),
            None => Ok(SceneBelief::certain(self.class_table.clone(), &self.truth)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::grocery_domain;

    fn act(name: &str, args: &[&str]) -> GroundAction {
        grocery_domain()
            .action(name)
            .unwrap()
            .instantiate(args)
            .remove(0)
    }

    #[test]
    fn scenarios_are_deterministic_per_seed() {
        let t = ClassTable::grocery();
        assert_eq!(
            make_scenario(7, 8, 3, &t).unwrap(),
            make_scenario(7, 8, 3, &t).unwrap()
        );
        assert_ne!(
            make_scenario(7, 8, 3, &t).unwrap(),
            make_scenario(8, 8, 3, &t).unwrap()
        );
    }

    #[test]
    fn stack_structure() {
        let t = ClassTable::grocery();
        let w = make_scenario(1, 8, 8, &t).unwrap();
        assert!(w
            .truth
            .objects
            .iter()
            .all(|o| w.truth.layout.is_topfree(&o.id)));
        for seed in 0..20 {
            let w = make_scenario(seed, 8, 2, &t).unwrap();
            let l = &w.truth.layout;
            let top = w
                .truth
                .objects
                .iter()
                .filter(|o| l.is_topfree(&o.id))
                .count();
            let on_table = w
                .truth
                .objects
                .iter()
                .filter(|o| l.support_of(&o.id).is_some_and(|s| s.starts_with("table")))
                .count();
            assert_eq!((top, on_table), (2, 2));
        }
        assert!(make_scenario(1, 3, 4, &t).is_err());
        assert!(make_scenario(1, 3, 0, &t).is_err());
    }

    #[test]
    fn execute_pick_place_and_faults() {
        let t = ClassTable::grocery();
        let mut w = make_scenario(3, 2, 1, &t).unwrap();
        let l = &w.truth.layout;
        let bottom = l.column("table1")[0].to_string();
        let top = l.column("table1")[1].to_string();
        let err = execute(&mut w, &act("pick", &[&bottom, "table1"]), 10.0).unwrap_err();
        assert!(matches!(err, SimError::ExecutionFault { .. }));

        let obs = execute(&mut w, &act("pick", &[&top, &bottom]), 10.0).unwrap();
        let truth_cat = w.truth.category_of(&top).unwrap().to_string();
        assert_eq!(
            obs,
            Observation::PickedIdentity {
                object_id: top.clone(),
                category: truth_cat
            }
        );
        assert_eq!(
            execute(&mut w, &act("place", &[&top, "box1"]), 10.0).unwrap(),
            Observation::DetectionSnapshot
        );
        assert_eq!(w.truth.layout.support_of(&top), Some("box1"));
        assert!(w.is_hand_empty());
        assert_eq!(w.clock, 20.0);
        assert_eq!(w.history.len(), 2);
    }

    #[test]
    fn validate_only_fires_on_mismatched_picks() {
        let t = ClassTable::grocery();
        let w = make_scenario(3, 2, 2, &t).unwrap();
        let mut sampled = w.truth.clone();
        let pick = act("pick", &["o1", "table1"]);
        let real = w.truth.category_of("o1").unwrap().to_string();
        let obs = Observation::PickedIdentity {
            object_id: "o1".into(),
            category: real.clone(),
        };
        assert!(validate(&sampled, &pick, &obs));
        sampled.objects[0].category = if real == "soup-can" {
            "cracker-box".into()
        } else {
            "soup-can".into()
        };
        assert!(!validate(&sampled, &pick, &obs));
        assert!(validate(
            &sampled,
            &act("place", &["o1", "box1"]),
            &Observation::DetectionSnapshot
        ));
    }

    #[test]
    fn scenario_json_round_trip() {
        let t = ClassTable::grocery();
        let w = make_scenario(5, 4, 2, &t).unwrap();
        let s = Scenario {
            seed: Some(5),
            class_table: t.clone(),
            truth: w.truth.clone(),
            belief: None,
        };
        let back = Scenario::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.initial_belief().unwrap().entropy(), 0.0);
    }
}
