use std::fmt::Write;

use super::{Condition, DomainDef, ProblemDef};

fn condition(c: &Condition, out: &mut String) {
    match c {
        Condition::Literal(l) => write!(out, "{l}").unwrap(),
        Condition::And(ps) | Condition::Or(ps) => {
            out.push_str(if matches!(c, Condition::And(_)) {
                "(and"
            } else {
                "(or"
            });
            for p in ps {
                out.push(' ');
                condition(p, out);
            }
            out.push(')');
        }
    }
}

/// Canonical domain text. Output is stable: equal definitions print to
/// identical bytes.
pub fn print_domain(d: &DomainDef) -> String {
    let mut s = String::new();
    writeln!(s, "(define (domain {})", d.name).unwrap();
    if !d.requirements.is_empty() {
        writeln!(s, "  (:requirements {})", d.requirements.join(" ")).unwrap();
    }
    if !d.constants.is_empty() {
        writeln!(s, "  (:constants {})", d.constants.join(" ")).unwrap();
    }
    s.push_str("  (:predicates");
    for p in &d.predicates {
        write!(s, " ({}", p.name).unwrap();
        for i in 1..=p.arity {
            write!(s, " ?a{i}").unwrap();
        }
        s.push(')');
    }
    s.push(')');
    for a in &d.actions {
        write!(
            s,
            "\n  (:action {}\n    :parameters ({})\n    :precondition ",
            a.name,
            a.parameters.join(" ")
        )
        .unwrap();
        condition(&a.precondition, &mut s);
        s.push_str("\n    :effect (and");
        for e in &a.effects {
            write!(s, " {e}").unwrap();
        }
        s.push_str("))");
    }
    s.push_str(")\n");
    s
}

/// Canonical problem text with sorted `:init`.
pub fn print_problem(p: &ProblemDef) -> String {
    let mut s = String::new();
    writeln!(s, "(define (problem {})", p.name).unwrap();
    writeln!(s, "  (:domain {})", p.domain).unwrap();
    writeln!(s, "  (:objects {})", p.objects.join(" ")).unwrap();
    s.push_str("  (:init");
    for a in &p.init {
        write!(s, "\n    {a}").unwrap();
    }
    s.push_str(")\n  (:goal (and");
    for g in &p.goal {
        write!(s, "\n    {g}").unwrap();
    }
    s.push_str(")))\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{parse_domain, parse_problem, GROCERY_DOMAIN, MINIMAL_DOMAIN};

    #[test]
    fn builtin_domains_round_trip() {
        for text in [MINIMAL_DOMAIN, GROCERY_DOMAIN] {
            let d = parse_domain(text).unwrap();
            let printed = print_domain(&d);
            let again = parse_domain(&printed).unwrap();
            assert_eq!(again, d);
            assert_eq!(print_domain(&again), printed);
        }
    }

    #[test]
    fn problem_round_trip_is_bit_exact() {
        let d = parse_domain(GROCERY_DOMAIN).unwrap();
        let text = "(define (problem p) (:domain grocery) (:objects b a table1)
            (:init (on b table1) (on a b) (topfree a) (handempty)) (:goal (and (on b a) (not (holding a)))))";
        let p = parse_problem(text, &d).unwrap();
        let printed = print_problem(&p);
        let again = parse_problem(&printed, &d).unwrap();
        assert_eq!(again, p);
        assert_eq!(print_problem(&again), printed);
    }
}
