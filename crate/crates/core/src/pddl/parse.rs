use std::collections::BTreeSet;

use super::sexpr::{parse_one, Pos, SExpr};
use super::{
    ActionSchema, Atom, Condition, DomainDef, GroundAtom, GroundLiteral, Literal, PddlError,
    PredicateSig, ProblemDef, Term,
};

const KNOWN_REQUIREMENTS: &[&str] = &[
    ":strips",
    ":negative-preconditions",
    ":disjunctive-preconditions",
];

fn syntax(pos: Pos, message: impl Into<String>) -> PddlError {
    PddlError::Syntax {
        pos,
        message: message.into(),
    }
}

fn expect_list<'a>(e: &'a SExpr, what: &str) -> Result<&'a [SExpr], PddlError> {
    e.as_list()
        .ok_or_else(|| syntax(e.pos(), format!("expected a list for {what}")))
}

fn expect_sym<'a>(e: &'a SExpr, what: &str) -> Result<&'a str, PddlError> {
    e.as_sym()
        .ok_or_else(|| syntax(e.pos(), format!("expected a name for {what}")))
}

/// Splits `(define (KIND name) sections...)` into the name and sections.
fn split_define<'a>(root: &'a SExpr, kind: &str) -> Result<(String, &'a [SExpr]), PddlError> {
    let items = expect_list(root, "define")?;
    match items.first().and_then(SExpr::as_sym) {
        Some("define") => {}
        _ => return Err(syntax(root.pos(), "expected (define ...)")),
    }
    let header = items
        .get(1)
        .ok_or_else(|| syntax(root.pos(), format!("missing ({kind} name)")))?;
    let h = expect_list(header, kind)?;
    if h.len() != 2 || h[0].as_sym() != Some(kind) {
        return Err(syntax(header.pos(), format!("expected ({kind} name)")));
    }
    Ok((expect_sym(&h[1], kind)?.to_string(), &items[2..]))
}

fn section_head(e: &SExpr) -> Result<(&str, &[SExpr]), PddlError> {
    let items = expect_list(e, "section")?;
    let head = items
        .first()
        .ok_or_else(|| syntax(e.pos(), "empty section"))?;
    Ok((expect_sym(head, "section keyword")?, &items[1..]))
}

struct Scope<'a> {
    predicates: &'a [PredicateSig],
    constants: &'a BTreeSet<String>,
    params: Option<(&'a str, &'a [String])>,
}

impl Scope<'_> {
    fn atom(&self, e: &SExpr) -> Result<Atom, PddlError> {
        let items = expect_list(e, "atom")?;
        let name_expr = items.first().ok_or_else(|| syntax(e.pos(), "empty atom"))?;
        let name = expect_sym(name_expr, "predicate")?;
        let sig = self
            .predicates
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| PddlError::UndeclaredPredicate {
                name: name.to_string(),
                pos: name_expr.pos(),
            })?;
        let args = &items[1..];
        if args.len() != sig.arity {
            return Err(PddlError::Arity {
                name: name.to_string(),
                expected: sig.arity,
                found: args.len(),
                pos: e.pos(),
            });
        }
        let args = args
            .iter()
            .map(|a| {
                let s = expect_sym(a, "argument")?;
                if s.starts_with('?') {
                    match self.params {
                        Some((_, ps)) if ps.iter().any(|p| p == s) => Ok(Term::Var(s.to_string())),
                        Some((action, _)) => Err(PddlError::UnboundVariable {
                            name: s.to_string(),
                            action: action.to_string(),
                            pos: a.pos(),
                        }),
                        None => Err(syntax(a.pos(), format!("variable {s} outside an action"))),
                    }
                } else if self.constants.contains(s) {
                    Ok(Term::Const(s.to_string()))
                } else {
                    Err(PddlError::UnknownConstant {
                        name: s.to_string(),
                        pos: a.pos(),
                    })
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Atom {
            predicate: name.to_string(),
            args,
        })
    }

    fn literal(&self, e: &SExpr) -> Result<Literal, PddlError> {
        let items = expect_list(e, "literal")?;
        if items.first().and_then(SExpr::as_sym) == Some("not") {
            if items.len() != 2 {
                return Err(syntax(e.pos(), "(not ...) takes exactly one atom"));
            }
            Ok(Literal::neg(self.atom(&items[1])?))
        } else {
            Ok(Literal::pos(self.atom(e)?))
        }
    }

    fn condition(&self, e: &SExpr, allow_or: bool) -> Result<Condition, PddlError> {
        let items = expect_list(e, "condition")?;
        match items.first().and_then(SExpr::as_sym) {
            Some("and") => Ok(Condition::And(
                items[1..]
                    .iter()
                    .map(|c| self.condition(c, allow_or))
                    .collect::<Result<_, _>>()?,
            )),
            Some("or") if allow_or => Ok(Condition::Or(
                items[1..]
                    .iter()
                    .map(|c| self.condition(c, allow_or))
                    .collect::<Result<_, _>>()?,
            )),
            Some(k @ ("or" | "imply" | "forall" | "exists" | "when")) => {
                Err(PddlError::Unsupported {
                    what: format!("'{k}' here"),
                    pos: e.pos(),
                })
            }
            _ => Ok(Condition::Literal(self.literal(e)?)),
        }
    }

    fn effects(&self, e: &SExpr) -> Result<Vec<Literal>, PddlError> {
        let items = expect_list(e, "effect")?;
        if items.first().and_then(SExpr::as_sym) == Some("and") {
            items[1..].iter().map(|l| self.effect_literal(l)).collect()
        } else {
            Ok(vec![self.effect_literal(e)?])
        }
    }

    fn effect_literal(&self, e: &SExpr) -> Result<Literal, PddlError> {
        match e.as_list().and_then(|l| l.first()).and_then(SExpr::as_sym) {
            Some(k @ ("and" | "or" | "forall" | "when")) => Err(PddlError::Unsupported {
                what: format!("'{k}' inside an effect"),
                pos: e.pos(),
            }),
            _ => self.literal(e),
        }
    }
}

fn parse_names(items: &[SExpr], what: &str) -> Result<Vec<String>, PddlError> {
    items
        .iter()
        .map(|e| {
            let s = expect_sym(e, what)?;
            if s == "-" {
                Err(PddlError::Unsupported {
                    what: "typed lists".into(),
                    pos: e.pos(),
                })
            } else {
                Ok(s.to_string())
            }
        })
        .collect()
}

fn parse_action(
    items: &[SExpr],
    pos: Pos,
    predicates: &[PredicateSig],
    constants: &BTreeSet<String>,
) -> Result<ActionSchema, PddlError> {
    let name = expect_sym(
        items
            .first()
            .ok_or_else(|| syntax(pos, "action without a name"))?,
        "action name",
    )?;
    let mut parameters: Option<Vec<String>> = None;
    let mut pre_expr = None;
    let mut eff_expr = None;
    let mut rest = items[1..].iter();
    while let Some(key) = rest.next() {
        let k = expect_sym(key, "action keyword")?;
        let val = rest
            .next()
            .ok_or_else(|| syntax(key.pos(), format!("{k} has no value")))?;
        match k {
            ":parameters" => {
                let ps = parse_names(expect_list(val, ":parameters")?, "parameter")?;
                let mut seen = BTreeSet::new();
                for (p, e) in ps.iter().zip(val.as_list().unwrap()) {
                    if !p.starts_with('?') {
                        return Err(syntax(
                            e.pos(),
                            format!("parameter {p} must start with '?'"),
                        ));
                    }
                    if !seen.insert(p.clone()) {
                        return Err(PddlError::Duplicate {
                            name: p.clone(),
                            pos: e.pos(),
                        });
                    }
                }
                parameters = Some(ps);
            }
            ":precondition" => pre_expr = Some(val),
            ":effect" => eff_expr = Some(val),
            other => {
                return Err(PddlError::Unsupported {
                    what: format!("action keyword {other}"),
                    pos: key.pos(),
                })
            }
        }
    }
    let parameters = parameters.unwrap_or_default();
    let scope = Scope {
        predicates,
        constants,
        params: Some((name, &parameters)),
    };
    let precondition = match pre_expr {
        Some(e) if e.as_list().is_some_and(|l| l.is_empty()) => Condition::And(vec![]),
        Some(e) => scope.condition(e, true)?,
        None => Condition::And(vec![]),
    };
    let effects = match eff_expr {
        Some(e) => scope.effects(e)?,
        None => return Err(syntax(pos, format!("action {name} has no :effect"))),
    };
    Ok(ActionSchema {
        name: name.to_string(),
        parameters,
        precondition,
        effects,
    })
}

/// Parses a domain definition.
pub fn parse_domain(text: &str) -> Result<DomainDef, PddlError> {
    let root = parse_one(text)?;
    let (name, sections) = split_define(&root, "domain")?;
    let mut requirements = Vec::new();
    let mut constants = Vec::new();
    let mut predicates: Vec<PredicateSig> = Vec::new();
    let mut action_exprs = Vec::new();
    for s in sections {
        let (head, body) = section_head(s)?;
        match head {
            ":requirements" => {
                for r in body {
                    let req = expect_sym(r, "requirement")?;
                    if !KNOWN_REQUIREMENTS.contains(&req) {
                        return Err(PddlError::Unsupported {
                            what: format!("requirement {req}"),
                            pos: r.pos(),
                        });
                    }
                    requirements.push(req.to_string());
                }
            }
            ":constants" => constants.extend(parse_names(body, "constant")?),
            ":predicates" => {
                for p in body {
                    let items = expect_list(p, "predicate signature")?;
                    let pname = expect_sym(
                        items
                            .first()
                            .ok_or_else(|| syntax(p.pos(), "empty predicate"))?,
                        "predicate",
                    )?;
                    let params = parse_names(&items[1..], "predicate parameter")?;
                    if predicates.iter().any(|q| q.name == pname) {
                        return Err(PddlError::Duplicate {
                            name: pname.to_string(),
                            pos: p.pos(),
                        });
                    }
                    predicates.push(PredicateSig {
                        name: pname.to_string(),
                        arity: params.len(),
                    });
                }
            }
            ":action" => action_exprs.push((body, s.pos())),
            other => {
                return Err(PddlError::Unsupported {
                    what: format!("domain section {other}"),
                    pos: s.pos(),
                })
            }
        }
    }
    let const_set: BTreeSet<String> = constants.iter().cloned().collect();
    let mut actions: Vec<ActionSchema> = Vec::new();
    for (body, pos) in action_exprs {
        let a = parse_action(body, pos, &predicates, &const_set)?;
        if actions.iter().any(|b| b.name == a.name) {
            return Err(PddlError::Duplicate { name: a.name, pos });
        }
        actions.push(a);
    }
    Ok(DomainDef {
        name,
        requirements,
        constants,
        predicates,
        actions,
    })
}

fn ground_literal(lit: Literal) -> GroundLiteral {
    let args = lit
        .atom
        .args
        .into_iter()
        .map(|t| match t {
            Term::Const(c) | Term::Var(c) => c,
        })
        .collect();
    GroundLiteral {
        positive: lit.positive,
        atom: GroundAtom {
            predicate: lit.atom.predicate,
            args,
        },
    }
}

/// Parses a problem against an already parsed domain.
pub fn parse_problem(text: &str, domain: &DomainDef) -> Result<ProblemDef, PddlError> {
    let root = parse_one(text)?;
    let (name, sections) = split_define(&root, "problem")?;
    let mut domain_name = None;
    let mut objects: Vec<String> = Vec::new();
    let mut init_exprs: &[SExpr] = &[];
    let mut goal_expr = None;
    for s in sections {
        let (head, body) = section_head(s)?;
        match head {
            ":domain" => {
                domain_name = Some(
                    expect_sym(
                        body.first()
                            .ok_or_else(|| syntax(s.pos(), "missing domain name"))?,
                        "domain",
                    )?
                    .to_string(),
                )
            }
            ":objects" => {
                for (o, e) in parse_names(body, "object")?.into_iter().zip(body) {
                    if objects.contains(&o) || domain.constants.contains(&o) {
                        return Err(PddlError::Duplicate {
                            name: o,
                            pos: e.pos(),
                        });
                    }
                    objects.push(o);
                }
            }
            ":init" => init_exprs = body,
            ":goal" => goal_expr = Some((body, s.pos())),
            other => {
                return Err(PddlError::Unsupported {
                    what: format!("problem section {other}"),
                    pos: s.pos(),
                })
            }
        }
    }
    if let Some(d) = &domain_name {
        if d != &domain.name {
            return Err(PddlError::DomainMismatch {
                expected: domain.name.clone(),
                found: d.clone(),
            });
        }
    }
    let constants: BTreeSet<String> = domain
        .constants
        .iter()
        .chain(objects.iter())
        .cloned()
        .collect();
    let scope = Scope {
        predicates: &domain.predicates,
        constants: &constants,
        params: None,
    };
    let mut init = BTreeSet::new();
    for e in init_exprs {
        let lit = scope.literal(e)?;
        if !lit.positive {
            return Err(PddlError::Unsupported {
                what: "negative literal in :init (closed world)".into(),
                pos: e.pos(),
            });
        }
        init.insert(ground_literal(lit).atom);
    }
    let (goal_body, goal_pos) =
        goal_expr.ok_or_else(|| syntax(root.pos(), "problem has no :goal"))?;
    if goal_body.len() != 1 {
        return Err(syntax(goal_pos, ":goal takes exactly one formula"));
    }
    let cond = scope.condition(&goal_body[0], true)?;
    let goal = match cond {
        Condition::Literal(l) => vec![ground_literal(l)],
        Condition::And(parts) => parts
            .into_iter()
            .map(|p| match p {
                Condition::Literal(l) => Ok(ground_literal(l)),
                _ => Err(PddlError::NonConjunctiveGoal {
                    pos: goal_body[0].pos(),
                }),
            })
            .collect::<Result<_, _>>()?,
        Condition::Or(_) => {
            return Err(PddlError::NonConjunctiveGoal {
                pos: goal_body[0].pos(),
            })
        }
    };
    Ok(ProblemDef {
        name,
        domain: domain_name.unwrap_or_else(|| domain.name.clone()),
        objects,
        init,
        goal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{GROCERY_DOMAIN, MINIMAL_DOMAIN};

    #[test]
    fn rejects_undeclared_predicate_and_bad_arity() {
        let d = "(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x) :precondition (q ?x) :effect (p ?x)))";
        assert!(matches!(
            parse_domain(d),
            Err(PddlError::UndeclaredPredicate { .. })
        ));
        let d = "(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x) :precondition (p ?x ?x) :effect (p ?x)))";
        assert!(matches!(
            parse_domain(d),
            Err(PddlError::Arity {
                expected: 1,
                found: 2,
                ..
            })
        ));
    }

    #[test]
    fn rejects_unbound_variable_and_or_in_effect() {
        let d = "(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x) :precondition (p ?y) :effect (p ?x)))";
        assert!(matches!(
            parse_domain(d),
            Err(PddlError::UnboundVariable { .. })
        ));
        let d = "(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x) :precondition (p ?x) :effect (and (or (p ?x)))))";
        assert!(matches!(
            parse_domain(d),
            Err(PddlError::Unsupported { .. })
        ));
    }

    #[test]
    fn or_is_accepted_in_preconditions() {
        let d = "(define (domain d) (:predicates (p ?x) (q ?x)) (:action a :parameters (?x) :precondition (or (p ?x) (q ?x)) :effect (not (p ?x))))";
        let dom = parse_domain(d).unwrap();
        assert_eq!(dom.actions[0].precondition.dnf().len(), 2);
        assert!(dom.actions[0].precondition_literals().is_none());
    }

    #[test]
    fn problem_errors() {
        let dom = parse_domain(MINIMAL_DOMAIN).unwrap();
        let p = "(define (problem p) (:domain grocery-minimal) (:objects a) (:init (topfree a)) (:goal (holding b)))";
        assert!(matches!(
            parse_problem(p, &dom),
            Err(PddlError::UnknownConstant { .. })
        ));
        let p = "(define (problem p) (:domain grocery-minimal) (:objects a) (:init (topfree a)) (:goal (or (holding a) (handempty))))";
        assert!(matches!(
            parse_problem(p, &dom),
            Err(PddlError::NonConjunctiveGoal { .. })
        ));
        let p = "(define (problem p) (:domain other) (:objects a) (:init) (:goal (holding a)))";
        assert!(matches!(
            parse_problem(p, &dom),
            Err(PddlError::DomainMismatch { .. })
        ));
        let p = "(define (problem p) (:domain grocery-minimal) (:objects a) (:init (topfree a) (handempty)) (:goal (holding a)))";
        let prob = parse_problem(p, &dom).unwrap();
        assert_eq!(prob.init.len(), 2);
        assert_eq!(
            prob.goal,
            vec![GroundLiteral::pos(GroundAtom::new("holding", &["a"]))]
        );
    }

    #[test]
    fn typed_lists_are_rejected() {
        let dom = parse_domain(GROCERY_DOMAIN).unwrap();
        let p = "(define (problem p) (:domain grocery) (:objects a - item) (:init) (:goal (holding a)))";
        assert!(matches!(
            parse_problem(p, &dom),
            Err(PddlError::Unsupported { .. })
        ));
    }
}
