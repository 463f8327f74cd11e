//! A small PDDL fragment: untyped STRIPS with negative preconditions,
//! disjunctive preconditions, and conjunctive goals.
//!
//! Parsing produces [`DomainDef`] / [`ProblemDef`]; [`ground`] instantiates the
//! schemas into [`GroundAction`]s; [`State::apply`] gives the transition
//! semantics.

mod ground;
mod parse;
mod print;
mod sexpr;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub use ground::ground;
pub use parse::{parse_domain, parse_problem};
pub use print::{print_domain, print_problem};
pub use sexpr::Pos;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PddlError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("undeclared predicate {name:?} at {pos}")]
    UndeclaredPredicate { name: String, pos: Pos },
    #[error("predicate {name:?} expects {expected} arguments, got {found} at {pos}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
        pos: Pos,
    },
    #[error("unknown constant {name:?} at {pos}")]
    UnknownConstant { name: String, pos: Pos },
    #[error("variable {name:?} is not a parameter of action {action:?} ({pos})")]
    UnboundVariable {
        name: String,
        action: String,
        pos: Pos,
    },
    #[error("unsupported construct at {pos}: {what}")]
    Unsupported { what: String, pos: Pos },
    #[error("goal must be a conjunction of literals ({pos})")]
    NonConjunctiveGoal { pos: Pos },
    #[error("duplicate declaration of {name:?} at {pos}")]
    Duplicate { name: String, pos: Pos },
    #[error("problem is for domain {found:?}, expected {expected:?}")]
    DomainMismatch { expected: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) | Term::Const(v) => f.write_str(v),
        }
    }
}

/// A predicate applied to terms, e.g. `(on ?x ?y)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: &[&str]) -> Self {
        let args = args
            .iter()
            .map(|a| {
                if a.starts_with('?') {
                    Term::Var(a.to_string())
                } else {
                    Term::Const(a.to_string())
                }
            })
            .collect();
        Self {
            predicate: predicate.to_string(),
            args,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Self {
            positive: true,
            atom,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Self {
            positive: false,
            atom,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "(not {})", self.atom)
        }
    }
}

/// Precondition formula. `Not` only ever wraps an atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    Literal(Literal),
    And(Vec<Condition>),
    Or(Vec<Condition>),
}

impl Condition {
    /// Disjunctive normal form as a list of literal conjunctions.
    pub fn dnf(&self) -> Vec<Vec<Literal>> {
        match self {
            Condition::Literal(l) => vec![vec![l.clone()]],
            Condition::Or(parts) => parts.iter().flat_map(Condition::dnf).collect(),
            Condition::And(parts) => {
                let mut acc: Vec<Vec<Literal>> = vec![Vec::new()];
                for p in parts {
                    let d = p.dnf();
                    acc = acc
                        .iter()
                        .flat_map(|prefix| {
                            d.iter().map(move |conj| {
                                prefix.iter().chain(conj).cloned().collect::<Vec<_>>()
                            })
                        })
                        .collect();
                }
                acc
            }
        }
    }

    fn literals<'a>(&'a self, out: &mut Vec<&'a Literal>) {
        match self {
            Condition::Literal(l) => out.push(l),
            Condition::And(ps) | Condition::Or(ps) => ps.iter().for_each(|p| p.literals(out)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateSig {
    pub name: String,
    pub arity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub parameters: Vec<String>,
    pub precondition: Condition,
    pub effects: Vec<Literal>,
}

impl ActionSchema {
    /// The precondition as a flat literal list, or `None` when it contains a
    /// disjunction.
    pub fn precondition_literals(&self) -> Option<Vec<Literal>> {
        let dnf = self.precondition.dnf();
        (dnf.len() == 1).then(|| dnf.into_iter().next().unwrap())
    }

    pub fn add_effects(&self) -> Vec<&Atom> {
        self.effects
            .iter()
            .filter(|l| l.positive)
            .map(|l| &l.atom)
            .collect()
    }

    pub fn delete_effects(&self) -> Vec<&Atom> {
        self.effects
            .iter()
            .filter(|l| !l.positive)
            .map(|l| &l.atom)
            .collect()
    }

    pub fn all_literals(&self) -> Vec<&Literal> {
        let mut out = Vec::new();
        self.precondition.literals(&mut out);
        out.extend(self.effects.iter());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainDef {
    pub name: String,
    pub requirements: Vec<String>,
    pub constants: Vec<String>,
    pub predicates: Vec<PredicateSig>,
    pub actions: Vec<ActionSchema>,
}

impl DomainDef {
    pub fn predicate(&self, name: &str) -> Option<&PredicateSig> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }
}

/// A variable-free atom, e.g. `(on a box1)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(predicate: &str, args: &[&str]) -> Self {
        Self {
            predicate: predicate.to_string(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundLiteral {
    pub positive: bool,
    pub atom: GroundAtom,
}

impl GroundLiteral {
    pub fn pos(atom: GroundAtom) -> Self {
        Self {
            positive: true,
            atom,
        }
    }

    pub fn neg(atom: GroundAtom) -> Self {
        Self {
            positive: false,
            atom,
        }
    }
}

impl fmt::Display for GroundLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "(not {})", self.atom)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemDef {
    pub name: String,
    pub domain: String,
    pub objects: Vec<String>,
    pub init: BTreeSet<GroundAtom>,
    pub goal: Vec<GroundLiteral>,
}

impl ProblemDef {
    pub fn initial_state(&self) -> State {
        State(self.init.clone())
    }
}

/// A fully instantiated action with add/delete lists.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub pre_pos: Vec<GroundAtom>,
    pub pre_neg: Vec<GroundAtom>,
    pub add: Vec<GroundAtom>,
    pub del: Vec<GroundAtom>,
}

impl GroundAction {
    /// `(name arg ...)`, the format used in plan files.
    pub fn signature(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{action} is not applicable: {violated} does not hold")]
pub struct Inapplicable {
    pub action: String,
    pub violated: GroundLiteral,
}

/// Closed-world set of true ground atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State(pub BTreeSet<GroundAtom>);

impl State {
    pub fn from_atoms<I: IntoIterator<Item = GroundAtom>>(atoms: I) -> Self {
        State(atoms.into_iter().collect())
    }

    pub fn holds(&self, lit: &GroundLiteral) -> bool {
        self.0.contains(&lit.atom) == lit.positive
    }

    pub fn satisfies(&self, goal: &[GroundLiteral]) -> bool {
        goal.iter().all(|l| self.holds(l))
    }

    /// First precondition literal that fails, if any.
    pub fn violated_precondition(&self, action: &GroundAction) -> Option<GroundLiteral> {
        action
            .pre_pos
            .iter()
            .find(|a| !self.0.contains(*a))
            .map(|a| GroundLiteral::pos(a.clone()))
            .or_else(|| {
                action
                    .pre_neg
                    .iter()
                    .find(|a| self.0.contains(*a))
                    .map(|a| GroundLiteral::neg(a.clone()))
            })
    }

    /// `(state \ del) ∪ add`, after checking applicability.
    pub fn apply(&self, action: &GroundAction) -> Result<State, Inapplicable> {
        if let Some(violated) = self.violated_precondition(action) {
            return Err(Inapplicable {
                action: action.to_string(),
                violated,
            });
        }
        let mut next = self.0.clone();
        for d in &action.del {
            next.remove(d);
        }
        next.extend(action.add.iter().cloned());
        Ok(State(next))
    }
}

/// The pick/place schemas exactly as used for tabletop grocery packing.
pub const MINIMAL_DOMAIN: &str = "\
(define (domain grocery-minimal)
  (:requirements :strips :negative-preconditions)
  (:predicates (on ?x ?y) (topfree ?x) (holding ?x) (handempty))
  (:action pick
    :parameters (?x)
    :precondition (and (topfree ?x) (handempty))
    :effect (and (holding ?x) (not (handempty)) (not (topfree ?x))))
  (:action place
    :parameters (?x ?y)
    :precondition (and (holding ?x) (topfree ?y))
    :effect (and (not (holding ?x)) (on ?x ?y) (handempty) (not (topfree ?y)) (topfree ?x))))
";

/// Simulation domain: `pick` also names the support so that the object below
/// becomes free again and the stale `on` fact is removed. Placing is only
/// allowed into the box (onto a slot or a packed object).
pub const GROCERY_DOMAIN: &str = "\
(define (domain grocery)
  (:requirements :strips :negative-preconditions)
  (:predicates (on ?x ?y) (topfree ?x) (holding ?x) (handempty) (inbox ?x))
  (:action pick
    :parameters (?x ?y)
    :precondition (and (on ?x ?y) (topfree ?x) (handempty))
    :effect (and (holding ?x) (topfree ?y) (not (on ?x ?y)) (not (handempty)) (not (topfree ?x)) (not (inbox ?x))))
  (:action place
    :parameters (?x ?y)
    :precondition (and (holding ?x) (topfree ?y) (inbox ?y))
    :effect (and (not (holding ?x)) (on ?x ?y) (handempty) (not (topfree ?y)) (topfree ?x) (inbox ?x))))
";

pub fn grocery_domain() -> DomainDef {
    parse_domain(GROCERY_DOMAIN).expect("built-in domain parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dnf_distributes_and_over_or() {
        let a = |p: &str| Condition::Literal(Literal::pos(Atom::new(p, &[])));
        let c = Condition::And(vec![a("p"), Condition::Or(vec![a("q"), a("r")])]);
        let d = c.dnf();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].len(), 2);
        assert_eq!(d[1][1].atom.predicate, "r");
    }

    #[test]
    fn apply_reports_violated_literal() {
        let s = State::from_atoms([GroundAtom::new("topfree", &["b"])]);
        let a = GroundAction {
            name: "pick".into(),
            args: vec!["b".into()],
            pre_pos: vec![
                GroundAtom::new("topfree", &["b"]),
                GroundAtom::new("handempty", &[]),
            ],
            pre_neg: vec![],
            add: vec![GroundAtom::new("holding", &["b"])],
            del: vec![
                GroundAtom::new("handempty", &[]),
                GroundAtom::new("topfree", &["b"]),
            ],
        };
        let e = s.apply(&a).unwrap_err();
        assert_eq!(
            e.violated,
            GroundLiteral::pos(GroundAtom::new("handempty", &[]))
        );
    }
}
