//! Ground-truth STRIPS semantics and plan validation.
//!
//! States keep atoms in insertion order so that printed traces list the
//! surviving atoms first and freshly added atoms last.

use std::collections::HashMap;
use std::fmt::{self, Write};

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::pddl::{ActionSchema, Atom, DomainDef, GroundAction, Plan, ProblemDef};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SemanticsError {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("action `{name}` takes {expected} arguments, got {found}")]
    ArityMismatch { name: String, expected: usize, found: usize },
    #[error("action {action} is not applicable; unmet: {}", join_atoms(.unmet))]
    InapplicableAction { action: GroundAction, unmet: Vec<Atom> },
}

fn join_atoms(atoms: &[Atom]) -> String {
    atoms.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

/// A set of ground atoms.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct State {
    atoms: IndexSet<Atom>,
}

impl State {
    pub fn new() -> Self {
        State::default()
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn insert(&mut self, atom: Atom) -> bool {
        self.atoms.insert(atom)
    }

    pub fn remove(&mut self, atom: &Atom) -> bool {
        self.atoms.shift_remove(atom)
    }

    /// Atoms in canonical (sorted) order.
    pub fn sorted(&self) -> Vec<&Atom> {
        let mut v: Vec<_> = self.atoms.iter().collect();
        v.sort();
        v
    }

    pub fn initial(problem: &ProblemDef) -> Self {
        problem.init.iter().cloned().collect()
    }
}

impl FromIterator<Atom> for State {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        State { atoms: iter.into_iter().collect() }
    }
}

fn resolve<'d>(domain: &'d DomainDef, action: &GroundAction) -> Result<&'d ActionSchema, SemanticsError> {
    let schema = domain
        .action(&action.name)
        .ok_or_else(|| SemanticsError::UnknownAction(action.name.clone()))?;
    if schema.parameters.len() != action.args.len() {
        return Err(SemanticsError::ArityMismatch {
            name: action.name.clone(),
            expected: schema.parameters.len(),
            found: action.args.len(),
        });
    }
    Ok(schema)
}

fn substitute(atom: &Atom, bindings: &HashMap<&str, &str>) -> Atom {
    Atom {
        predicate: atom.predicate.clone(),
        args: atom
            .args
            .iter()
            .map(|a| bindings.get(a.as_str()).map_or_else(|| a.clone(), |o| (*o).to_string()))
            .collect(),
    }
}

fn bindings<'a>(schema: &'a ActionSchema, action: &'a GroundAction) -> HashMap<&'a str, &'a str> {
    schema
        .parameters
        .iter()
        .map(String::as_str)
        .zip(action.args.iter().map(String::as_str))
        .collect()
}

/// One substituted precondition and whether it held.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreconditionCheck {
    pub atom: Atom,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applicability {
    pub checks: Vec<PreconditionCheck>,
}

impl Applicability {
    pub fn applicable(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn unmet(&self) -> Vec<Atom> {
        self.checks.iter().filter(|c| !c.holds).map(|c| c.atom.clone()).collect()
    }
}

/// Checks every precondition of `action` against `state`.
pub fn is_applicable(
    state: &State,
    action: &GroundAction,
    domain: &DomainDef,
) -> Result<Applicability, SemanticsError> {
    let schema = resolve(domain, action)?;
    let b = bindings(schema, action);
    let checks = schema
        .precondition
        .iter()
        .map(|p| {
            let atom = substitute(p, &b);
            let holds = state.contains(&atom);
            PreconditionCheck { atom, holds }
        })
        .collect();
    Ok(Applicability { checks })
}

/// Returns `(state \ deletes) ∪ adds`. Deletes are applied before adds.
pub fn apply(state: &State, action: &GroundAction, domain: &DomainDef) -> Result<State, SemanticsError> {
    let app = is_applicable(state, action, domain)?;
    if !app.applicable() {
        return Err(SemanticsError::InapplicableAction { action: action.clone(), unmet: app.unmet() });
    }
    let schema = resolve(domain, action)?;
    Ok(apply_unchecked(state, schema, action))
}

fn apply_unchecked(state: &State, schema: &ActionSchema, action: &GroundAction) -> State {
    let b = bindings(schema, action);
    let mut next = state.clone();
    for d in schema.delete_effects() {
        next.remove(&substitute(d, &b));
    }
    for a in schema.add_effects() {
        next.insert(substitute(a, &b));
    }
    next
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalCheck {
    pub unsatisfied: Vec<Atom>,
}

impl GoalCheck {
    pub fn satisfied(&self) -> bool {
        self.unsatisfied.is_empty()
    }
}

pub fn goal_satisfied(state: &State, problem: &ProblemDef) -> GoalCheck {
    GoalCheck { unsatisfied: problem.goal.iter().filter(|g| !state.contains(g)).cloned().collect() }
}

/// Outcome of simulating a plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PlanVerdict {
    Correct,
    /// `step` is 1-based; `unmet` lists every precondition of that step that did not hold.
    WrongAtStep { step: usize, unmet: Vec<Atom> },
    GoalNotReached { unsatisfied: Vec<Atom> },
}

impl PlanVerdict {
    pub fn is_correct(&self) -> bool {
        matches!(self, PlanVerdict::Correct)
    }

    /// The literal assessment phrase for this verdict.
    pub fn phrase(&self) -> &'static str {
        match self {
            PlanVerdict::Correct => "the plan is correct",
            PlanVerdict::WrongAtStep { .. } => "the plan is wrong",
            PlanVerdict::GoalNotReached { .. } => "goal not reached",
        }
    }
}

impl fmt::Display for PlanVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanVerdict::Correct => f.write_str("the plan is correct"),
            PlanVerdict::WrongAtStep { step, unmet } => {
                write!(f, "the plan is wrong: wrong at step {step}, unmet preconditions: {}", join_atoms(unmet))
            }
            PlanVerdict::GoalNotReached { unsatisfied } => {
                write!(f, "goal not reached: unsatisfied goals: {}", join_atoms(unsatisfied))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    /// 1-based step index.
    pub step: usize,
    pub action: GroundAction,
    /// The schema's precondition as written in the domain.
    pub schema_precondition: Vec<Atom>,
    pub parameters: Vec<String>,
    pub checks: Vec<PreconditionCheck>,
    pub before: State,
    /// `None` when the step was not applicable.
    pub after: Option<State>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validation {
    pub verdict: PlanVerdict,
    pub trace: Vec<TraceStep>,
    pub final_state: State,
}

/// Simulates `plan` from the initial state, stopping at the first
/// inapplicable step.
pub fn validate_plan(
    problem: &ProblemDef,
    plan: &Plan,
    domain: &DomainDef,
) -> Result<Validation, SemanticsError> {
    let mut state = State::initial(problem);
    let mut trace = Vec::with_capacity(plan.len());
    for (i, action) in plan.steps.iter().enumerate() {
        let schema = resolve(domain, action)?;
        let app = is_applicable(&state, action, domain)?;
        let mut step = TraceStep {
            step: i + 1,
            action: action.clone(),
            schema_precondition: schema.precondition.clone(),
            parameters: schema.parameters.clone(),
            checks: app.checks.clone(),
            before: state.clone(),
            after: None,
        };
        if !app.applicable() {
            trace.push(step);
            return Ok(Validation {
                verdict: PlanVerdict::WrongAtStep { step: i + 1, unmet: app.unmet() },
                trace,
                final_state: state,
            });
        }
        let next = apply_unchecked(&state, schema, action);
        step.after = Some(next.clone());
        trace.push(step);
        state = next;
    }
    let goal = goal_satisfied(&state, problem);
    let verdict = if goal.satisfied() {
        PlanVerdict::Correct
    } else {
        PlanVerdict::GoalNotReached { unsatisfied: goal.unsatisfied }
    };
    Ok(Validation { verdict, trace, final_state: state })
}

fn conjunction_text(atoms: &[Atom]) -> String {
    match atoms {
        [one] => one.to_string(),
        _ => format!("(and {})", join_atoms(atoms)),
    }
}

impl Validation {
    /// Line-oriented rendering in the "action and preconditions /
    /// verification / resulting state" layout, ending with the verdict phrase.
    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for s in &self.trace {
            writeln!(out, "step {}: {}", s.step, s.action).unwrap();
            writeln!(out, "1. action and preconditions:").unwrap();
            let mut sig = s.action.name.clone();
            for p in &s.parameters {
                sig.push(' ');
                sig.push_str(p);
            }
            writeln!(out, "   - action: {sig}").unwrap();
            writeln!(out, "   - preconditions: {}", conjunction_text(&s.schema_precondition)).unwrap();
            writeln!(out, "2. verification:").unwrap();
            for c in &s.checks {
                writeln!(out, "   - {}: {}", c.atom, if c.holds { "true" } else { "false" }).unwrap();
            }
            match &s.after {
                Some(after) => {
                    writeln!(out, "   - all preconditions are met.").unwrap();
                    writeln!(out, "3. resulting state:").unwrap();
                    for a in after.iter() {
                        writeln!(out, "   - {a}").unwrap();
                    }
                }
                None => writeln!(out, "   - preconditions are not met.").unwrap(),
            }
            out.push('\n');
        }
        writeln!(out, "{}", self.verdict).unwrap();
        out
    }
}
