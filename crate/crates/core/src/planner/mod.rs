//! Greedy best-first search on the additive heuristic, plus plan validation
//! and an optional external planner.

mod external;
mod task;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::time::Instant;

use thiserror::Error;

use crate::pddl::{ground, DomainDef, GroundAction, GroundLiteral, ProblemDef, State};

pub use external::{plan_external, ExternalPlanner};
use task::Task;

/// Heuristic value for goals unreachable even under the delete relaxation.
pub const H_INFINITY: u64 = u64::MAX;

pub const DEFAULT_MAX_EXPANSIONS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_expansions: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_expansions: DEFAULT_MAX_EXPANSIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SearchStats {
    pub expanded: u64,
    pub evaluations: u64,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub actions: Vec<GroundAction>,
    /// Identifier of the sampled scene the problem was built from.
    pub source_scene: String,
    pub stats: SearchStats,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// One `(name args...)` line per action.
    pub fn to_text(&self) -> String {
        self.actions.iter().map(|a| format!("{a}\n")).collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("problem is unsolvable ({} expansions)", stats.expanded)]
    Unsolvable { stats: SearchStats },
    #[error("search budget exhausted after {} expansions", stats.expanded)]
    BudgetExhausted { stats: SearchStats },
    #[error("external planner: {0}")]
    External(String),
}

impl PlanError {
    pub fn stats(&self) -> SearchStats {
        match self {
            PlanError::Unsolvable { stats } | PlanError::BudgetExhausted { stats } => *stats,
            PlanError::External(_) => SearchStats::default(),
        }
    }
}

/// Additive relaxed cost of `goal` from `state` with unit action costs.
///
/// Negative goal literals contribute 1 each while violated and are otherwise
/// ignored by the relaxation.
pub fn h_add(state: &State, goal: &[GroundLiteral], actions: &[GroundAction]) -> u64 {
    let task = Task::new(actions, &state.0, goal);
    task.h_add(&task.initial)
}

struct Node {
    parent: usize,
    action: usize,
}

/// GBFS over the grounded problem. Ties on `h` go to the node generated first.
pub fn plan(domain: &DomainDef, problem: &ProblemDef, budget: Budget) -> Result<Plan, PlanError> {
    let actions = ground(domain, problem);
    search(&actions, problem, budget)
}

/// Same as [`plan`] on an already grounded action list.
pub fn search(
    actions: &[GroundAction],
    problem: &ProblemDef,
    budget: Budget,
) -> Result<Plan, PlanError> {
    let started = Instant::now();
    let task = Task::new(actions, &problem.init, &problem.goal);
    let mut stats = SearchStats::default();

    let mut nodes: Vec<(Node, Vec<u64>)> = Vec::new();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut open: BinaryHeap<(Reverse<u64>, Reverse<usize>)> = BinaryHeap::new();

    let h0 = task.h_add(&task.initial);
    stats.evaluations += 1;
    seen.insert(task.initial.clone());
    nodes.push((
        Node {
            parent: usize::MAX,
            action: usize::MAX,
        },
        task.initial.clone(),
    ));
    if h0 != H_INFINITY {
        open.push((Reverse(h0), Reverse(0)));
    }

    while let Some((_, Reverse(id))) = open.pop() {
        if task.is_goal(&nodes[id].1) {
            let mut steps = Vec::new();
            let mut cur = id;
            while nodes[cur].0.parent != usize::MAX {
                steps.push(actions[nodes[cur].0.action].clone());
                cur = nodes[cur].0.parent;
            }
            steps.reverse();
            stats.wall_s = started.elapsed().as_secs_f64();
            return Ok(Plan {
                actions: steps,
                source_scene: String::new(),
                stats,
            });
        }
        if stats.expanded >= budget.max_expansions {
            stats.wall_s = started.elapsed().as_secs_f64();
            return Err(PlanError::BudgetExhausted { stats });
        }
        stats.expanded += 1;
        let state = nodes[id].1.clone();
        for (ai, _) in actions.iter().enumerate() {
            if !task.applicable(ai, &state) {
                continue;
            }
            let next = task.apply(ai, &state);
            if !seen.insert(next.clone()) {
                continue;
            }
            let h = task.h_add(&next);
            stats.evaluations += 1;
            if h == H_INFINITY {
                continue;
            }
            nodes.push((
                Node {
                    parent: id,
                    action: ai,
                },
                next,
            ));
            open.push((Reverse(h), Reverse(nodes.len() - 1)));
        }
    }
    stats.wall_s = started.elapsed().as_secs_f64();
    Err(PlanError::Unsolvable { stats })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanInvalid {
    #[error("step {index} ({action}) is not applicable: {violated} does not hold")]
    Inapplicable {
        index: usize,
        action: String,
        violated: GroundLiteral,
    },
    #[error("plan ends without reaching the goal; unsatisfied: {}", fmt_literals(.unsatisfied))]
    GoalMiss { unsatisfied: Vec<GroundLiteral> },
}

fn fmt_literals(ls: &[GroundLiteral]) -> String {
    ls.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Replays `actions` from the problem's initial state.
pub fn validate_plan(problem: &ProblemDef, actions: &[GroundAction]) -> Result<State, PlanInvalid> {
    let mut state = problem.initial_state();
    for (index, a) in actions.iter().enumerate() {
        state = state.apply(a).map_err(|e| PlanInvalid::Inapplicable {
            index,
            action: a.to_string(),
            violated: e.violated,
        })?;
    }
    let unsatisfied: Vec<_> = problem
        .goal
        .iter()
        .filter(|g| !state.holds(g))
        .cloned()
        .collect();
    if unsatisfied.is_empty() {
        Ok(state)
    } else {
        Err(PlanInvalid::GoalMiss { unsatisfied })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanParseError {
    #[error("plan line {line}: {message}")]
    Line { line: usize, message: String },
}

/// Reads plan text in the usual `(name arg ...)` per line format. Blank lines
/// and `;` comments are skipped. Steps are instantiated from the schemas
/// directly, so unreachable steps survive parsing and fail validation instead.
pub fn parse_plan(domain: &DomainDef, text: &str) -> Result<Vec<GroundAction>, PlanParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| PlanParseError::Line {
            line: i + 1,
            message,
        };
        let inner = line
            .strip_prefix('(')
            .and_then(|l| l.strip_suffix(')'))
            .ok_or_else(|| err(format!("expected (action args...), got {line:?}")))?
            .to_lowercase();
        let mut parts = inner.split_whitespace();
        let name = parts.next().ok_or_else(|| err("empty step".into()))?;
        let args: Vec<&str> = parts.collect();
        let schema = domain
            .action(name)
            .ok_or_else(|| err(format!("unknown action {name:?}")))?;
        if args.len() != schema.parameters.len() {
            return Err(err(format!(
                "{name} takes {} arguments, got {}",
                schema.parameters.len(),
                args.len()
            )));
        }
        let mut variants = schema.instantiate(&args);
        if variants.is_empty() {
            return Err(err(format!(
                "{name} has a contradictory precondition for these arguments"
            )));
        }
        out.push(variants.swap_remove(0));
    }
    Ok(out)
}
