use std::collections::{HashMap, HashSet};

use super::sexpr::{read_all, read_all_at, Pos, SExpr};
use super::{
    ActionSchema, Atom, DomainDef, GroundAction, Literal, PddlError, PddlErrorKind, Plan,
    Predicate, ProblemDef,
};

type Result<T> = std::result::Result<T, PddlError>;

fn err<T>(pos: Pos, kind: PddlErrorKind) -> Result<T> {
    Err(PddlError::at(pos, kind))
}

fn syntax<T>(pos: Pos, msg: impl Into<String>) -> Result<T> {
    err(pos, PddlErrorKind::Syntax(msg.into()))
}

fn unsupported<T>(pos: Pos, what: impl Into<String>) -> Result<T> {
    err(pos, PddlErrorKind::UnsupportedFeature(what.into()))
}

fn expect_list<'a>(e: &'a SExpr, what: &str) -> Result<&'a [SExpr]> {
    e.as_list().ok_or_else(|| {
        PddlError::at(e.pos(), PddlErrorKind::Syntax(format!("expected a list for {what}")))
    })
}

fn expect_symbol<'a>(e: &'a SExpr, what: &str) -> Result<&'a str> {
    e.as_symbol().ok_or_else(|| {
        PddlError::at(e.pos(), PddlErrorKind::Syntax(format!("expected a name for {what}")))
    })
}

fn is_variable(s: &str) -> bool {
    s.starts_with('?')
}

/// Splits `(define (<kind> NAME) sections...)` into its name and sections.
fn define_header(text: &str, kind: &str) -> Result<(Pos, String, Vec<SExpr>)> {
    let exprs = read_all(text)?;
    let top = match exprs.as_slice() {
        [] => return syntax(Pos { line: 1, col: 1 }, "empty input"),
        [one] => one.clone(),
        [_, second, ..] => return syntax(second.pos(), "expected a single `define` form"),
    };
    let pos = top.pos();
    let items = expect_list(&top, "define")?.to_vec();
    if items.is_empty() || !items[0].is_keyword("define") {
        return syntax(pos, "expected `(define ...)`");
    }
    let header = items.get(1).ok_or_else(|| {
        PddlError::at(pos, PddlErrorKind::Syntax(format!("missing `({kind} NAME)`")))
    })?;
    let h = expect_list(header, kind)?;
    if h.len() != 2 || !h[0].is_keyword(kind) {
        return syntax(header.pos(), format!("expected `({kind} NAME)`"));
    }
    let name = expect_symbol(&h[1], kind)?.to_string();
    Ok((pos, name, items[2..].to_vec()))
}

fn section_keyword(sec: &SExpr) -> Result<(&str, &[SExpr])> {
    let items = expect_list(sec, "section")?;
    let kw = items
        .first()
        .and_then(SExpr::as_symbol)
        .ok_or_else(|| PddlError::at(sec.pos(), PddlErrorKind::Syntax("empty section".into())))?;
    Ok((kw, &items[1..]))
}

fn check_requirements(items: &[SExpr]) -> Result<Vec<String>> {
    let mut reqs = Vec::new();
    for r in items {
        let s = expect_symbol(r, "requirement")?;
        if !s.eq_ignore_ascii_case(":strips") {
            return unsupported(r.pos(), format!("requirement {s}"));
        }
        reqs.push(s.to_ascii_lowercase());
    }
    Ok(reqs)
}

/// Parameter/variable list without types.
fn untyped_names(items: &[SExpr], want_variables: bool, what: &str) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(items.len());
    for it in items {
        let s = expect_symbol(it, what)?;
        if s == "-" {
            return unsupported(it.pos(), "typing");
        }
        if want_variables != is_variable(s) {
            let msg = if want_variables {
                format!("expected a `?variable` in {what}, found `{s}`")
            } else {
                format!("expected an object name in {what}, found `{s}`")
            };
            return syntax(it.pos(), msg);
        }
        out.push(s.to_string());
    }
    Ok(out)
}

fn parse_atom_expr(e: &SExpr) -> Result<(Atom, Pos)> {
    let items = expect_list(e, "atom")?;
    let head = items
        .first()
        .ok_or_else(|| PddlError::at(e.pos(), PddlErrorKind::Syntax("empty atom".into())))?;
    let pred = expect_symbol(head, "predicate")?;
    let mut args = Vec::with_capacity(items.len() - 1);
    for a in &items[1..] {
        args.push(expect_symbol(a, "term")?.to_string());
    }
    Ok((Atom { predicate: pred.to_string(), args }, e.pos()))
}

const UNSUPPORTED_CONNECTIVES: &[&str] =
    &["or", "imply", "exists", "forall", "when", "=", "increase", "decrease", "assign"];

fn reject_connective(e: &SExpr) -> Result<()> {
    if let Some(head) = e.as_list().and_then(|l| l.first()) {
        for c in UNSUPPORTED_CONNECTIVES {
            if head.is_keyword(c) {
                let what = if *c == "when" { "conditional effects".to_string() } else { format!("`{c}`") };
                return unsupported(head.pos(), what);
            }
        }
    }
    Ok(())
}

/// Flattens `(and ...)`, a bare literal, or the empty list `()`.
fn conjuncts(e: &SExpr) -> Result<Vec<&SExpr>> {
    let items = expect_list(e, "formula")?;
    if items.is_empty() {
        return Ok(Vec::new());
    }
    if items[0].is_keyword("and") {
        let mut out = Vec::new();
        for c in &items[1..] {
            if c.as_list().and_then(|l| l.first()).is_some_and(|h| h.is_keyword("and")) {
                out.extend(conjuncts(c)?);
            } else {
                out.push(c);
            }
        }
        Ok(out)
    } else {
        Ok(vec![e])
    }
}

fn negated_inner(e: &SExpr) -> Result<Option<&SExpr>> {
    match e.as_list() {
        Some(items) if !items.is_empty() && items[0].is_keyword("not") => {
            if items.len() != 2 {
                return syntax(e.pos(), "`not` takes exactly one atom");
            }
            Ok(Some(&items[1]))
        }
        _ => Ok(None),
    }
}

struct PredicateTable<'a> {
    arity: HashMap<&'a str, usize>,
}

impl<'a> PredicateTable<'a> {
    fn new(preds: &'a [Predicate]) -> Self {
        PredicateTable { arity: preds.iter().map(|p| (p.name.as_str(), p.arity())).collect() }
    }

    fn check(&self, atom: &Atom, pos: Pos) -> Result<()> {
        match self.arity.get(atom.predicate.as_str()) {
            None => err(pos, PddlErrorKind::UnknownPredicate(atom.predicate.clone())),
            Some(&n) if n != atom.args.len() => err(
                pos,
                PddlErrorKind::ArityMismatch {
                    name: atom.predicate.clone(),
                    expected: n,
                    found: atom.args.len(),
                },
            ),
            Some(_) => Ok(()),
        }
    }
}

fn parse_predicates(items: &[SExpr]) -> Result<Vec<Predicate>> {
    let mut preds: Vec<Predicate> = Vec::new();
    for it in items {
        let l = expect_list(it, "predicate declaration")?;
        let name = l
            .first()
            .ok_or_else(|| PddlError::at(it.pos(), PddlErrorKind::Syntax("empty predicate".into())))
            .and_then(|h| expect_symbol(h, "predicate"))?;
        if preds.iter().any(|p| p.name == name) {
            return err(it.pos(), PddlErrorKind::Duplicate(name.to_string()));
        }
        let params = untyped_names(&l[1..], true, "predicate parameters")?;
        preds.push(Predicate { name: name.to_string(), params });
    }
    Ok(preds)
}

fn parse_action(items: &[SExpr], pos: Pos, table: &PredicateTable<'_>) -> Result<ActionSchema> {
    let name = items
        .first()
        .ok_or_else(|| PddlError::at(pos, PddlErrorKind::Syntax("missing action name".into())))
        .and_then(|e| expect_symbol(e, "action"))?
        .to_string();

    let mut parameters: Option<Vec<String>> = None;
    let mut precondition_expr = None;
    let mut effect_expr = None;
    let mut rest = &items[1..];
    while let [key, value, tail @ ..] = rest {
        let k = expect_symbol(key, "action field")?;
        match k.to_ascii_lowercase().as_str() {
            ":parameters" => {
                parameters = Some(untyped_names(expect_list(value, ":parameters")?, true, ":parameters")?)
            }
            ":precondition" => precondition_expr = Some(value),
            ":effect" => effect_expr = Some(value),
            ":duration" | ":condition" => return unsupported(key.pos(), "durative actions"),
            other => return syntax(key.pos(), format!("unknown action field `{other}`")),
        }
        rest = tail;
    }
    if let [dangling] = rest {
        return syntax(dangling.pos(), "action field without a value");
    }
    let parameters = parameters.unwrap_or_default();
    let bound: HashSet<&str> = parameters.iter().map(String::as_str).collect();
    let check_terms = |atom: &Atom, pos: Pos| -> Result<()> {
        for t in &atom.args {
            if !is_variable(t) {
                return unsupported(pos, format!("constant `{t}` in action schema"));
            }
            if !bound.contains(t.as_str()) {
                return err(pos, PddlErrorKind::UnboundVariable(t.clone()));
            }
        }
        table.check(atom, pos)
    };

    let mut precondition = Vec::new();
    if let Some(e) = precondition_expr {
        for c in conjuncts(e)? {
            reject_connective(c)?;
            if negated_inner(c)?.is_some() {
                return unsupported(c.pos(), "negative preconditions");
            }
            let (atom, apos) = parse_atom_expr(c)?;
            check_terms(&atom, apos)?;
            precondition.push(atom);
        }
    }

    let mut effect: Vec<Literal> = Vec::new();
    if let Some(e) = effect_expr {
        for c in conjuncts(e)? {
            reject_connective(c)?;
            let (lit, lpos) = match negated_inner(c)? {
                Some(inner) => {
                    reject_connective(inner)?;
                    let (a, p) = parse_atom_expr(inner)?;
                    (Literal::neg(a), p)
                }
                None => {
                    let (a, p) = parse_atom_expr(c)?;
                    (Literal::pos(a), p)
                }
            };
            check_terms(&lit.atom, lpos)?;
            if effect.iter().any(|l| l.atom == lit.atom && l.positive != lit.positive) {
                return err(lpos, PddlErrorKind::ContradictoryEffect(lit.atom.to_string()));
            }
            if !effect.contains(&lit) {
                effect.push(lit);
            }
        }
    }

    Ok(ActionSchema { name, parameters, precondition, effect })
}

/// Parses a `:strips` domain definition.
pub fn parse_domain(text: &str) -> Result<DomainDef> {
    let (_, name, sections) = define_header(text, "domain")?;
    let mut requirements = Vec::new();
    let mut predicates: Vec<Predicate> = Vec::new();
    let mut raw_actions: Vec<(Pos, &[SExpr])> = Vec::new();

    for sec in &sections {
        let (kw, body) = section_keyword(sec)?;
        match kw.to_ascii_lowercase().as_str() {
            ":requirements" => requirements = check_requirements(body)?,
            ":predicates" => predicates = parse_predicates(body)?,
            ":action" => raw_actions.push((sec.pos(), body)),
            ":types" => return unsupported(sec.pos(), "typing"),
            ":constants" => return unsupported(sec.pos(), "domain constants"),
            ":functions" => return unsupported(sec.pos(), "numeric fluents"),
            ":derived" => return unsupported(sec.pos(), "derived predicates"),
            ":durative-action" => return unsupported(sec.pos(), "durative actions"),
            ":constraints" => return unsupported(sec.pos(), "constraints"),
            other => return syntax(sec.pos(), format!("unknown domain section `{other}`")),
        }
    }

    let table = PredicateTable::new(&predicates);
    let mut actions: Vec<ActionSchema> = Vec::new();
    for (pos, body) in raw_actions {
        let a = parse_action(body, pos, &table)?;
        if actions.iter().any(|b| b.name == a.name) {
            return err(pos, PddlErrorKind::Duplicate(a.name));
        }
        actions.push(a);
    }
    Ok(DomainDef { name, requirements, predicates, actions })
}

/// Parses a problem and checks it against `domain`.
pub fn parse_problem(text: &str, domain: &DomainDef) -> Result<ProblemDef> {
    let (pos, name, sections) = define_header(text, "problem")?;
    let mut domain_name: Option<(String, Pos)> = None;
    let mut objects: Vec<String> = Vec::new();
    let mut init_exprs: Vec<&SExpr> = Vec::new();
    let mut goal_expr: Option<&SExpr> = None;

    for sec in &sections {
        let (kw, body) = section_keyword(sec)?;
        match kw.to_ascii_lowercase().as_str() {
            ":domain" => {
                let [d] = body else { return syntax(sec.pos(), "expected `(:domain NAME)`") };
                domain_name = Some((expect_symbol(d, ":domain")?.to_string(), d.pos()));
            }
            ":requirements" => {
                check_requirements(body)?;
            }
            ":objects" => {
                objects = untyped_names(body, false, ":objects")?;
                let mut seen = HashSet::new();
                for (o, e) in objects.iter().zip(body) {
                    if !seen.insert(o.as_str()) {
                        return err(e.pos(), PddlErrorKind::Duplicate(o.clone()));
                    }
                }
            }
            ":init" => init_exprs.extend(body.iter()),
            ":goal" => {
                let [g] = body else { return syntax(sec.pos(), "expected `(:goal FORMULA)`") };
                goal_expr = Some(g);
            }
            ":metric" => return unsupported(sec.pos(), "metrics"),
            ":constraints" => return unsupported(sec.pos(), "constraints"),
            other => return syntax(sec.pos(), format!("unknown problem section `{other}`")),
        }
    }

    let (dname, dpos) =
        domain_name.ok_or_else(|| PddlError::at(pos, PddlErrorKind::Syntax("missing :domain".into())))?;
    if dname != domain.name {
        return err(dpos, PddlErrorKind::DomainMismatch { expected: domain.name.clone(), found: dname });
    }
    let goal_expr =
        goal_expr.ok_or_else(|| PddlError::at(pos, PddlErrorKind::Syntax("missing :goal".into())))?;

    let table = PredicateTable::new(&domain.predicates);
    let declared: HashSet<&str> = objects.iter().map(String::as_str).collect();
    let check_ground = |atom: &Atom, pos: Pos| -> Result<()> {
        table.check(atom, pos)?;
        for t in &atom.args {
            if is_variable(t) {
                return syntax(pos, format!("variable `{t}` in a ground atom"));
            }
            if !declared.contains(t.as_str()) {
                return err(pos, PddlErrorKind::UnknownObject(t.clone()));
            }
        }
        Ok(())
    };

    let mut init: Vec<Atom> = Vec::new();
    for e in init_exprs {
        reject_connective(e)?;
        if negated_inner(e)?.is_some() {
            return unsupported(e.pos(), "negative initial facts");
        }
        let (atom, apos) = parse_atom_expr(e)?;
        check_ground(&atom, apos)?;
        if !init.contains(&atom) {
            init.push(atom);
        }
    }

    let mut goal: Vec<Atom> = Vec::new();
    for c in conjuncts(goal_expr)? {
        reject_connective(c)?;
        if negated_inner(c)?.is_some() {
            return unsupported(c.pos(), "negative goals");
        }
        let (atom, apos) = parse_atom_expr(c)?;
        check_ground(&atom, apos)?;
        if !goal.contains(&atom) {
            goal.push(atom);
        }
    }

    Ok(ProblemDef { name, domain: domain.name.clone(), objects, init, goal })
}

/// Parses a plan: one parenthesized ground action per non-empty line.
/// Object names are not checked here; unknown objects simply never occur
/// in any state and make the step inapplicable.
pub fn parse_plan(text: &str, domain: &DomainDef) -> Result<Plan> {
    let mut steps = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let base = Pos { line: i + 1, col: 1 };
        let exprs = read_all_at(line, base)?;
        let expr = match exprs.as_slice() {
            [] => continue,
            [one] => one,
            [_, second, ..] => return syntax(second.pos(), "one action per line expected"),
        };
        let items = expect_list(expr, "plan step")?;
        let head = items
            .first()
            .ok_or_else(|| PddlError::at(expr.pos(), PddlErrorKind::Syntax("empty step".into())))?;
        let name = expect_symbol(head, "action")?;
        let mut args = Vec::with_capacity(items.len() - 1);
        for a in &items[1..] {
            let s = expect_symbol(a, "argument")?;
            if is_variable(s) {
                return syntax(a.pos(), format!("variable `{s}` in a plan step"));
            }
            args.push(s.to_string());
        }
        let schema = domain
            .action(name)
            .ok_or_else(|| PddlError::at(head.pos(), PddlErrorKind::UnknownAction(name.to_string())))?;
        if schema.parameters.len() != args.len() {
            return err(
                expr.pos(),
                PddlErrorKind::ArityMismatch {
                    name: name.to_string(),
                    expected: schema.parameters.len(),
                    found: args.len(),
                },
            );
        }
        steps.push(GroundAction { name: name.to_string(), args });
    }
    Ok(Plan { steps })
}
