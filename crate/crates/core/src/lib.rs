//! Task planning over low-entropy scene beliefs.
//!
//! The crate is organized bottom-up:
//!
//! - [`scene_belief`]: per-object categorical beliefs, sampling, entropy.
//! - [`pddl`]: a STRIPS (+ negative preconditions) PDDL subset with grounding.
//! - [`planner`]: greedy best-first search on the additive heuristic.
//! - [`simworld`]: the deterministic grocery-packing world and goal grounding.
//! - [`agents`]: LESAMPLE and the four baselines behind one trial contract.
//! - [`bench`]: experiment sweeps, CSV output and SVG summary charts.

pub mod agents;
pub mod bench;
pub mod pddl;
pub mod planner;
pub mod scene_belief;
pub mod simworld;
