use std::fmt::Write;

use super::{Atom, DomainDef, Literal, Plan, ProblemDef};

fn conjunction<T: std::fmt::Display>(items: &[T]) -> String {
    match items {
        [one] => one.to_string(),
        _ => {
            let mut s = String::from("(and");
            for it in items {
                write!(s, " {it}").unwrap();
            }
            s.push(')');
            s
        }
    }
}

/// Canonical domain text: sections in declaration order, lowercase keywords.
pub fn print_domain(domain: &DomainDef) -> String {
    let mut out = String::new();
    writeln!(out, "(define (domain {})", domain.name).unwrap();
    if !domain.requirements.is_empty() {
        writeln!(out, "  (:requirements {})", domain.requirements.join(" ")).unwrap();
    }
    out.push_str("  (:predicates");
    for p in &domain.predicates {
        out.push_str(" (");
        out.push_str(&p.name);
        for v in &p.params {
            write!(out, " {v}").unwrap();
        }
        out.push(')');
    }
    out.push_str(")\n");
    for a in &domain.actions {
        writeln!(out).unwrap();
        writeln!(out, "  (:action {}", a.name).unwrap();
        writeln!(out, "    :parameters ({})", a.parameters.join(" ")).unwrap();
        writeln!(out, "    :precondition {}", conjunction::<Atom>(&a.precondition)).unwrap();
        writeln!(out, "    :effect {})", conjunction::<Literal>(&a.effect)).unwrap();
    }
    out.push_str(")\n");
    out
}

/// Canonical problem text, one init/goal atom per line.
pub fn print_problem(problem: &ProblemDef) -> String {
    let mut out = String::new();
    writeln!(out, "(define (problem {})", problem.name).unwrap();
    writeln!(out, "(:domain {})", problem.domain).unwrap();
    if problem.objects.is_empty() {
        out.push_str("(:objects)\n");
    } else {
        writeln!(out, "(:objects {})", problem.objects.join(" ")).unwrap();
    }
    out.push_str("(:init\n");
    for a in &problem.init {
        writeln!(out, "{a}").unwrap();
    }
    out.push_str(")\n(:goal (and\n");
    for a in &problem.goal {
        writeln!(out, "{a}").unwrap();
    }
    out.push_str("))\n)\n");
    out
}

/// One step per line, each terminated by a newline; the empty plan prints as "".
pub fn print_plan(plan: &Plan) -> String {
    let mut out = String::new();
    for s in &plan.steps {
        writeln!(out, "{s}").unwrap();
    }
    out
}
