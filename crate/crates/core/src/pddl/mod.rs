//! The `:strips` subset of PDDL: abstract syntax, parser and canonical printer.
//!
//! Keywords are matched case-insensitively, identifiers keep their case.
//! Preconditions are conjunctions of positive atoms and effects are
//! conjunctions of literals, where a negated literal deletes an atom.

mod parse;
mod print;
pub mod sexpr;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_domain, parse_plan, parse_problem};
pub use print::{print_domain, print_plan, print_problem};

/// A predicate applied to terms. Terms are `?variables` inside action
/// schemas and object names everywhere else.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<P: Into<String>, A: Into<String>>(
        predicate: P,
        args: impl IntoIterator<Item = A>,
    ) -> Self {
        Atom { predicate: predicate.into(), args: args.into_iter().map(Into::into).collect() }
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

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { atom, positive: true }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal { atom, positive: false }
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

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    pub params: Vec<String>,
}

impl Predicate {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub parameters: Vec<String>,
    pub precondition: Vec<Atom>,
    pub effect: Vec<Literal>,
}

impl ActionSchema {
    pub fn add_effects(&self) -> impl Iterator<Item = &Atom> {
        self.effect.iter().filter(|l| l.positive).map(|l| &l.atom)
    }

    pub fn delete_effects(&self) -> impl Iterator<Item = &Atom> {
        self.effect.iter().filter(|l| !l.positive).map(|l| &l.atom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainDef {
    pub name: String,
    pub requirements: Vec<String>,
    pub predicates: Vec<Predicate>,
    pub actions: Vec<ActionSchema>,
}

impl DomainDef {
    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn predicate(&self, name: &str) -> Option<&Predicate> {
        self.predicates.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDef {
    pub name: String,
    pub domain: String,
    pub objects: Vec<String>,
    /// Initial atoms in declaration order, without duplicates.
    pub init: Vec<Atom>,
    pub goal: Vec<Atom>,
}

/// One plan step: an action name with its object arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
}

impl GroundAction {
    pub fn new<N: Into<String>, A: Into<String>>(
        name: N,
        args: impl IntoIterator<Item = A>,
    ) -> Self {
        GroundAction { name: name.into(), args: args.into_iter().map(Into::into).collect() }
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

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<GroundAction>,
}

impl Plan {
    pub fn new(steps: Vec<GroundAction>) -> Self {
        Plan { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PddlErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("arity mismatch for `{name}`: expected {expected}, found {found}")]
    ArityMismatch { name: String, expected: usize, found: usize },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("variable `{0}` is not a parameter of the action")]
    UnboundVariable(String),
    #[error("duplicate declaration of `{0}`")]
    Duplicate(String),
    #[error("literal {0} is both added and deleted")]
    ContradictoryEffect(String),
    #[error("problem is for domain `{found}`, expected `{expected}`")]
    DomainMismatch { expected: String, found: String },
}

/// A parse or validation failure with its 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {kind}")]
pub struct PddlError {
    pub kind: PddlErrorKind,
    pub line: usize,
    pub col: usize,
}

impl PddlError {
    pub(crate) fn at(pos: sexpr::Pos, kind: PddlErrorKind) -> Self {
        PddlError { kind, line: pos.line, col: pos.col }
    }
}

/// The `blocksworld-4ops` domain used throughout the benchmarks.
pub const BLOCKSWORLD_4OPS: &str = include_str!("../../domains/blocksworld-4ops.pddl");

/// The deceptive renaming of `blocksworld-4ops`.
pub const MYSTERY_4OPS: &str = include_str!("../../domains/mystery-4ops.pddl");

/// Classic untyped logistics.
pub const LOGISTICS: &str = include_str!("../../domains/logistics.pddl");

/// Grid navigation with locked doors and keys.
pub const MINIGRID: &str = include_str!("../../domains/minigrid.pddl");
