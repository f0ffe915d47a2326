//! Plan and critique prompt assembly, few-shot selection and the revision
//! transcript.
//!
//! Templates use `{name}` placeholders and are rendered in a single pass, so
//! braces inside substituted values are never expanded. PDDL values are
//! substituted without their trailing newline.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::pddl::{print_domain, print_plan, print_problem, DomainDef, Plan, ProblemDef};
use crate::seed;
use crate::semantics::validate_plan;

pub const PLACEHOLDERS: [&str; 5] = ["domain_pddl", "self_evaluations_exemplars", "instance", "plan", "few_shots"];

pub const REPAIR_REQUEST: &str = "Please can you explain the error and fix it.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    PlanFewshot,
    CritiqueFewshot,
    Critique0shotDd,
    Critique0shotNoDd,
    CritiqueNo3step,
    CritiqueVerifyPlan,
}

impl TemplateId {
    pub const ALL: [TemplateId; 6] = [
        TemplateId::PlanFewshot,
        TemplateId::CritiqueFewshot,
        TemplateId::Critique0shotDd,
        TemplateId::Critique0shotNoDd,
        TemplateId::CritiqueNo3step,
        TemplateId::CritiqueVerifyPlan,
    ];

    pub const CRITIQUES: [TemplateId; 5] = [
        TemplateId::CritiqueFewshot,
        TemplateId::Critique0shotDd,
        TemplateId::Critique0shotNoDd,
        TemplateId::CritiqueNo3step,
        TemplateId::CritiqueVerifyPlan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::PlanFewshot => "plan_fewshot",
            TemplateId::CritiqueFewshot => "critique_fewshot",
            TemplateId::Critique0shotDd => "critique_0shot_dd",
            TemplateId::Critique0shotNoDd => "critique_0shot_no_dd",
            TemplateId::CritiqueNo3step => "critique_no_3step",
            TemplateId::CritiqueVerifyPlan => "critique_verify_plan",
        }
    }

    fn builtin_body(self) -> &'static str {
        match self {
            TemplateId::PlanFewshot => include_str!("../templates/plan_fewshot.txt"),
            TemplateId::CritiqueFewshot => include_str!("../templates/critique_fewshot.txt"),
            TemplateId::Critique0shotDd => include_str!("../templates/critique_0shot_dd.txt"),
            TemplateId::Critique0shotNoDd => include_str!("../templates/critique_0shot_no_dd.txt"),
            TemplateId::CritiqueNo3step => include_str!("../templates/critique_no_3step.txt"),
            TemplateId::CritiqueVerifyPlan => include_str!("../templates/critique_verify_plan.txt"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| PromptError::UnknownTemplate(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template uses undeclared placeholder `{{{0}}}`")]
    UnknownPlaceholder(String),
    #[error("no value for placeholder `{{{0}}}`")]
    MissingPlaceholderValue(String),
    #[error("template `{0}` takes no critique exemplars")]
    UnexpectedExemplars(TemplateId),
    #[error("prompt of {size} characters exceeds the budget of {budget}")]
    BudgetExceeded { size: usize, budget: usize },
    #[error("few-shot pool has {available} candidates, {requested} requested")]
    PoolTooSmall { requested: usize, available: usize },
    #[error("exemplar `{0}` does not have a correct plan")]
    InvalidExemplar(String),
}

enum Piece {
    Text(String),
    Slot(String),
}

#[derive(Clone)]
pub struct PromptTemplate {
    pub id: TemplateId,
    body: String,
    slots: Vec<String>,
}

impl fmt::Debug for PromptTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PromptTemplate").field("id", &self.id).field("slots", &self.slots).finish()
    }
}

fn scan(body: &str) -> Vec<Piece> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if after[..close].chars().all(|c| c.is_ascii_alphanumeric() || c == '_') && close > 0 => {
                out.push(Piece::Text(rest[..open].to_string()));
                out.push(Piece::Slot(after[..close].to_string()));
                rest = &after[close + 1..];
            }
            _ => {
                out.push(Piece::Text(rest[..=open].to_string()));
                rest = after;
            }
        }
    }
    out.push(Piece::Text(rest.to_string()));
    out
}

impl PromptTemplate {
    pub fn builtin(id: TemplateId) -> Self {
        Self::from_text(id, id.builtin_body()).expect("builtin templates are well formed")
    }

    /// Parses a template body, rejecting placeholders outside [`PLACEHOLDERS`].
    pub fn from_text(id: TemplateId, body: &str) -> Result<Self, PromptError> {
        let mut slots = Vec::new();
        for piece in scan(body) {
            if let Piece::Slot(name) = piece {
                if !PLACEHOLDERS.contains(&name.as_str()) {
                    return Err(PromptError::UnknownPlaceholder(name));
                }
                if !slots.contains(&name) {
                    slots.push(name);
                }
            }
        }
        Ok(PromptTemplate { id, body: body.to_string(), slots })
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn uses(&self, placeholder: &str) -> bool {
        self.slots.iter().any(|s| s == placeholder)
    }

    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, PromptError> {
        let mut out = String::with_capacity(self.body.len());
        for piece in scan(&self.body) {
            match piece {
                Piece::Text(t) => out.push_str(&t),
                Piece::Slot(name) => match values.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => return Err(PromptError::MissingPlaceholderValue(name)),
                },
            }
        }
        Ok(out)
    }
}

fn trimmed(text: String) -> String {
    text.trim_end_matches('\n').to_string()
}

/// A solved problem used as a planning shot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exemplar {
    pub id: String,
    pub problem: ProblemDef,
    pub plan: Plan,
}

#[derive(Debug, Clone)]
pub struct FewShotPool {
    exemplars: Vec<Exemplar>,
    seed: u64,
}

impl FewShotPool {
    pub fn new(domain: &DomainDef, exemplars: Vec<Exemplar>, seed: u64) -> Result<Self, PromptError> {
        for e in &exemplars {
            let ok = validate_plan(&e.problem, &e.plan, domain).map(|v| v.verdict.is_correct()).unwrap_or(false);
            if !ok {
                return Err(PromptError::InvalidExemplar(e.id.clone()));
            }
        }
        Ok(FewShotPool { exemplars, seed })
    }

    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }
}

/// Picks `n` exemplars for `problem_id`, never the problem itself. The order
/// depends only on the pool seed and the id, so smaller selections are
/// prefixes of larger ones.
pub fn select_fewshots<'a>(pool: &'a FewShotPool, problem_id: &str, n: usize) -> Result<Vec<&'a Exemplar>, PromptError> {
    let mut candidates: Vec<&Exemplar> = pool.exemplars.iter().filter(|e| e.id != problem_id).collect();
    if n > candidates.len() {
        return Err(PromptError::PoolTooSmall { requested: n, available: candidates.len() });
    }
    let mut rng = seed::rng(&["fewshot".into(), pool.seed.into(), problem_id.into()]);
    candidates.shuffle(&mut rng);
    candidates.truncate(n);
    Ok(candidates)
}

/// A previous attempt and the critique it received.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub plan: String,
    pub critique: String,
}

impl TranscriptEntry {
    fn render(&self) -> String {
        format!(
            "{}\n{}\n\n{REPAIR_REQUEST}\n",
            self.plan.trim_end_matches('\n'),
            self.critique.trim_end_matches('\n')
        )
    }
}

/// Accumulated attempts appended to each new plan prompt. `budget` bounds the
/// whole prompt in characters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
    budget: Option<usize>,
}

impl Transcript {
    pub fn new(budget: Option<usize>) -> Self {
        Transcript { entries: Vec::new(), budget }
    }

    pub fn push(&mut self, plan: impl Into<String>, critique: impl Into<String>) {
        self.entries.push(TranscriptEntry { plan: plan.into(), critique: critique.into() });
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn budget(&self) -> Option<usize> {
        self.budget
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(TranscriptEntry::render).collect()
    }
}

/// Character budget derived from a token budget.
pub fn char_budget(max_tokens: Option<usize>, chars_per_token: usize) -> Option<usize> {
    max_tokens.map(|t| t.saturating_mul(chars_per_token.max(1)))
}

pub fn render_shot(problem: &ProblemDef, plan: &Plan) -> String {
    format!(
        "Example of a problem and its solution (plan):\n{}\n\nThe plan without formatting:\n{}\n\n\n",
        trimmed(print_problem(problem)),
        trimmed(print_plan(plan))
    )
}

pub fn build_plan_prompt(
    domain: &DomainDef,
    problem: &ProblemDef,
    shots: &[&Exemplar],
    transcript: &Transcript,
) -> Result<String, PromptError> {
    build_plan_prompt_with(&PromptTemplate::builtin(TemplateId::PlanFewshot), domain, problem, shots, transcript)
}

pub fn build_plan_prompt_with(
    template: &PromptTemplate,
    domain: &DomainDef,
    problem: &ProblemDef,
    shots: &[&Exemplar],
    transcript: &Transcript,
) -> Result<String, PromptError> {
    let few_shots: String = shots.iter().map(|e| render_shot(&e.problem, &e.plan)).collect();
    let domain_pddl = trimmed(print_domain(domain));
    let instance = trimmed(print_problem(problem));
    let mut prompt = template.render(&[
        ("domain_pddl", &domain_pddl),
        ("few_shots", &few_shots),
        ("instance", &instance),
    ])?;
    prompt.push_str(&transcript.render());
    let size = prompt.chars().count();
    match transcript.budget {
        Some(budget) if size > budget => Err(PromptError::BudgetExceeded { size, budget }),
        _ => Ok(prompt),
    }
}

pub fn build_critique_prompt(
    template: &PromptTemplate,
    domain: &DomainDef,
    problem: &ProblemDef,
    plan: &Plan,
    exemplars: Option<&[String]>,
) -> Result<String, PromptError> {
    build_critique_prompt_text(template, domain, problem, &print_plan(plan), exemplars)
}

/// Same as [`build_critique_prompt`] for plan text that may not parse.
pub fn build_critique_prompt_text(
    template: &PromptTemplate,
    domain: &DomainDef,
    problem: &ProblemDef,
    plan_text: &str,
    exemplars: Option<&[String]>,
) -> Result<String, PromptError> {
    let wants = template.uses("self_evaluations_exemplars");
    if !wants && exemplars.is_some() {
        return Err(PromptError::UnexpectedExemplars(template.id));
    }
    let exemplar_text = exemplars.map(|e| e.iter().map(|x| x.trim_end_matches('\n')).collect::<Vec<_>>().join("\n\n"));
    let domain_pddl = trimmed(print_domain(domain));
    let instance = trimmed(print_problem(problem));
    let plan = plan_text.trim_end_matches('\n');
    let mut values = vec![("domain_pddl", domain_pddl.as_str()), ("instance", instance.as_str()), ("plan", plan)];
    if let Some(x) = &exemplar_text {
        values.push(("self_evaluations_exemplars", x));
    }
    template.render(&values)
}
