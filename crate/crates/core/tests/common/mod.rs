#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use lesample_core::pddl::{
    grocery_domain, DomainDef, GroundAction, GroundAtom, GroundLiteral, ProblemDef, State,
};
use lesample_core::scene_belief::ClassTable;
use lesample_core::simworld::{make_scenario, scene_to_problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every instantiation of every schema over the problem objects, repetition
/// allowed. Independent of the planner's grounding and pruning.
pub fn naive_ground(domain: &DomainDef, problem: &ProblemDef) -> Vec<GroundAction> {
    let objs: Vec<&str> = problem.objects.iter().map(String::as_str).collect();
    let mut out = Vec::new();
    for schema in &domain.actions {
        let k = schema.parameters.len();
        let mut idx = vec![0usize; k];
        loop {
            let args: Vec<&str> = idx.iter().map(|&i| objs[i]).collect();
            out.extend(schema.instantiate(&args));
            let mut pos = 0;
            while pos < k {
                idx[pos] += 1;
                if idx[pos] < objs.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == k {
                break;
            }
        }
    }
    out
}

/// Length of a shortest plan by breadth-first search, or `None` if the goal
/// is unreachable.
pub fn bfs_shortest(domain: &DomainDef, problem: &ProblemDef) -> Option<usize> {
    let actions = naive_ground(domain, problem);
    let start = problem.initial_state();
    let mut seen: HashSet<State> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some((s, d)) = queue.pop_front() {
        if s.satisfies(&problem.goal) {
            return Some(d);
        }
        for a in &actions {
            if let Ok(next) = s.apply(a) {
                if seen.insert(next.clone()) {
                    queue.push_back((next, d + 1));
                }
            }
        }
    }
    None
}

/// A grocery problem with up to `max_objects` objects and a random goal of
/// one to three literals, some of them unreachable.
pub fn random_problem(seed: u64, max_objects: usize) -> ProblemDef {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_objects);
    let stacks = rng.gen_range(1..=n.min(2));
    let world = make_scenario(seed, n, stacks, &ClassTable::grocery()).unwrap();
    let mut p = scene_to_problem(&world.truth, &[]).unwrap();
    let objects: Vec<String> = world.truth.objects.iter().map(|o| o.id.clone()).collect();
    let all = p.objects.clone();
    let pick = |rng: &mut ChaCha8Rng, v: &[String]| v[rng.gen_range(0..v.len())].clone();
    let k = rng.gen_range(1..=3);
    for _ in 0..k {
        let x = pick(&mut rng, &objects);
        let atom = match rng.gen_range(0..5) {
            0 => {
                let mut y = pick(&mut rng, &all);
                while y == x {
                    y = pick(&mut rng, &all);
                }
                GroundAtom::new("on", &[&x, &y])
            }
            1 => GroundAtom::new("inbox", &[&x]),
            2 => GroundAtom::new("topfree", &[&x]),
            3 => GroundAtom::new("holding", &[&x]),
            _ => GroundAtom::new("handempty", &[]),
        };
        let lit = if rng.gen_bool(0.7) {
            GroundLiteral::pos(atom)
        } else {
            GroundLiteral::neg(atom)
        };
        if !p.goal.contains(&lit) {
            p.goal.push(lit);
        }
    }
    p
}

pub fn domain() -> DomainDef {
    grocery_domain()
}
