use std::collections::{BTreeMap, BTreeSet};

use super::{ActionSchema, Atom, DomainDef, GroundAction, GroundAtom, ProblemDef, Term};

fn instantiate(atom: &Atom, binding: &BTreeMap<&str, &str>) -> GroundAtom {
    GroundAtom {
        predicate: atom.predicate.clone(),
        args: atom
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => binding[v.as_str()].to_string(),
                Term::Const(c) => c.clone(),
            })
            .collect(),
    }
}

fn push_unique(v: &mut Vec<GroundAtom>, a: GroundAtom) {
    if !v.contains(&a) {
        v.push(a);
    }
}

impl ActionSchema {
    /// Binds the parameters positionally. Returns one action per consistent
    /// precondition disjunct; an arity mismatch yields none.
    pub fn instantiate(&self, args: &[&str]) -> Vec<GroundAction> {
        if args.len() != self.parameters.len() {
            return Vec::new();
        }
        let binding: BTreeMap<&str, &str> = self
            .parameters
            .iter()
            .map(String::as_str)
            .zip(args.iter().copied())
            .collect();
        let mut add = Vec::new();
        let mut del = Vec::new();
        for e in &self.effects {
            let g = instantiate(&e.atom, &binding);
            push_unique(if e.positive { &mut add } else { &mut del }, g);
        }
        del.retain(|d| !add.contains(d));
        let mut out = Vec::new();
        for conj in self.precondition.dnf() {
            let mut pre_pos = Vec::new();
            let mut pre_neg = Vec::new();
            for l in &conj {
                let g = instantiate(&l.atom, &binding);
                push_unique(
                    if l.positive {
                        &mut pre_pos
                    } else {
                        &mut pre_neg
                    },
                    g,
                );
            }
            if pre_pos.iter().any(|p| pre_neg.contains(p)) {
                continue;
            }
            out.push(GroundAction {
                name: self.name.clone(),
                args: args.iter().map(|s| s.to_string()).collect(),
                pre_pos,
                pre_neg,
                add: add.clone(),
                del: del.clone(),
            });
        }
        out
    }
}

/// Visits every injective assignment of `k` constants, in lexicographic order.
fn for_each_binding(constants: &[&str], k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(
        n: usize,
        k: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(n, k, used, cur, f);
                cur.pop();
                used[i] = false;
            }
        }
    }
    if k > constants.len() {
        return;
    }
    rec(
        constants.len(),
        k,
        &mut vec![false; constants.len()],
        &mut Vec::with_capacity(k),
        f,
    );
}

/// Instantiates every schema over the problem constants.
///
/// Distinct parameters take distinct constants. Disjunctive preconditions
/// yield one action per disjunct. Actions whose positive preconditions are
/// unreachable under the delete relaxation are dropped. Delete effects that
/// are also added are removed. The order is schema order, then bindings over
/// lexicographically sorted constants, then disjunct order.
pub fn ground(domain: &DomainDef, problem: &ProblemDef) -> Vec<GroundAction> {
    let constants: Vec<&str> = domain
        .constants
        .iter()
        .chain(problem.objects.iter())
        .map(String::as_str)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut all = Vec::new();
    for schema in &domain.actions {
        for_each_binding(&constants, schema.parameters.len(), &mut |idx| {
            let args: Vec<&str> = idx.iter().map(|&i| constants[i]).collect();
            let start = all.len();
            for action in schema.instantiate(&args) {
                if !all[start..].contains(&action) {
                    all.push(action);
                }
            }
        });
    }

    let mut reached: BTreeSet<&GroundAtom> = problem.init.iter().collect();
    let mut enabled = vec![false; all.len()];
    loop {
        let mut changed = false;
        for (i, a) in all.iter().enumerate() {
            if !enabled[i] && a.pre_pos.iter().all(|p| reached.contains(p)) {
                enabled[i] = true;
                changed = true;
                reached.extend(a.add.iter());
            }
        }
        if !changed {
            break;
        }
    }
    all.into_iter()
        .zip(enabled)
        .filter(|(_, e)| *e)
        .map(|(a, _)| a)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{grocery_domain, parse_domain, parse_problem, MINIMAL_DOMAIN};

    fn problem(objects: &[&str], init: &[GroundAtom]) -> ProblemDef {
        ProblemDef {
            name: "p".into(),
            domain: "grocery".into(),
            objects: objects.iter().map(|s| s.to_string()).collect(),
            init: init.iter().cloned().collect(),
            goal: vec![],
        }
    }

    #[test]
    fn minimal_pick_one_per_object() {
        let d = parse_domain(MINIMAL_DOMAIN).unwrap();
        let init: Vec<_> = ["a", "b", "c"]
            .iter()
            .map(|o| GroundAtom::new("topfree", &[o]))
            .chain([GroundAtom::new("handempty", &[])])
            .collect();
        let acts = ground(&d, &problem(&["c", "a", "b"], &init));
        let picks: Vec<_> = acts
            .iter()
            .filter(|a| a.name == "pick")
            .map(|a| a.args[0].as_str())
            .collect();
        assert_eq!(picks, ["a", "b", "c"]);
    }

    #[test]
    fn three_objects_and_a_box_give_nine_places() {
        let d = grocery_domain();
        let init = [
            GroundAtom::new("on", &["a", "t"]),
            GroundAtom::new("on", &["b", "a"]),
            GroundAtom::new("on", &["c", "b"]),
            GroundAtom::new("topfree", &["c"]),
            GroundAtom::new("topfree", &["box"]),
            GroundAtom::new("inbox", &["box"]),
            GroundAtom::new("handempty", &[]),
        ];
        let acts = ground(&d, &problem(&["a", "b", "c", "box", "t"], &init));
        let places: Vec<_> = acts.iter().filter(|a| a.name == "place").collect();
        assert_eq!(places.len(), 9);
        assert!(places
            .iter()
            .all(|a| a.args[0] != a.args[1] && a.args[0] != "box"));
    }

    #[test]
    fn no_objects_no_actions() {
        let d = grocery_domain();
        assert!(ground(&d, &problem(&[], &[GroundAtom::new("handempty", &[])])).is_empty());
    }

    #[test]
    fn disjuncts_become_separate_actions_and_add_wins_over_delete() {
        let d = parse_domain(
            "(define (domain d) (:predicates (p ?x) (q ?x))
              (:action a :parameters (?x) :precondition (or (p ?x) (q ?x)) :effect (and (p ?x) (not (p ?x)))))",
        )
        .unwrap();
        let p = parse_problem(
            "(define (problem p) (:domain d) (:objects o) (:init (p o) (q o)) (:goal (p o)))",
            &d,
        )
        .unwrap();
        let acts = ground(&d, &p);
        assert_eq!(acts.len(), 2);
        assert!(acts.iter().all(|a| a.del.is_empty() && a.add.len() == 1));
    }
}
