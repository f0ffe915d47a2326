//! Critic backends, verdict extraction and self-consistency voting.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::llm::{LlmClient, LlmError};
use crate::pddl::{DomainDef, Plan, ProblemDef};
use crate::prompting::{PromptError, TemplateId};
use crate::seed;
use crate::semantics::{validate_plan, PlanVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CritiqueLabel {
    Correct,
    Wrong,
    GoalNotReached,
}

impl CritiqueLabel {
    pub const ALL: [CritiqueLabel; 3] = [CritiqueLabel::Correct, CritiqueLabel::Wrong, CritiqueLabel::GoalNotReached];

    pub fn phrase(self) -> &'static str {
        match self {
            CritiqueLabel::Correct => "the plan is correct",
            CritiqueLabel::Wrong => "the plan is wrong",
            CritiqueLabel::GoalNotReached => "goal not reached",
        }
    }

    pub fn from_verdict(v: &PlanVerdict) -> Self {
        match v {
            PlanVerdict::Correct => CritiqueLabel::Correct,
            PlanVerdict::WrongAtStep { .. } => CritiqueLabel::Wrong,
            PlanVerdict::GoalNotReached { .. } => CritiqueLabel::GoalNotReached,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteTally {
    pub correct: usize,
    pub wrong: usize,
    pub goal_not_reached: usize,
}

impl VoteTally {
    pub fn of(labels: &[CritiqueLabel]) -> Self {
        let mut t = VoteTally::default();
        for l in labels {
            match l {
                CritiqueLabel::Correct => t.correct += 1,
                CritiqueLabel::Wrong => t.wrong += 1,
                CritiqueLabel::GoalNotReached => t.goal_not_reached += 1,
            }
        }
        t
    }

    pub fn total(&self) -> usize {
        self.correct + self.wrong + self.goal_not_reached
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CritiqueVerdict {
    pub label: CritiqueLabel,
    /// Text of the first sample that voted for `label`.
    pub raw: String,
    pub samples: usize,
    pub tally: VoteTally,
}

impl CritiqueVerdict {
    /// Aggregates sample texts with their extracted labels.
    pub fn from_samples(samples: Vec<(CritiqueLabel, String)>) -> Result<Self, CriticError> {
        let labels: Vec<CritiqueLabel> = samples.iter().map(|(l, _)| *l).collect();
        let label = self_consistency(&labels)?;
        let raw = samples.iter().find(|(l, _)| *l == label).map(|(_, t)| t.clone()).unwrap_or_default();
        Ok(CritiqueVerdict { label, raw, samples: labels.len(), tally: VoteTally::of(&labels) })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CriticError {
    #[error("no critique samples to aggregate")]
    EmptyInput,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("invalid critic configuration: {0}")]
    Config(String),
}

impl From<LlmError> for CriticError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::MalformedResponse(m) => CriticError::MalformedResponse(m),
            other => CriticError::Transport(other.to_string()),
        }
    }
}

/// Finds the last verdict phrase in `text`, ignoring case. Text without any
/// phrase counts as wrong.
pub fn extract_verdict(text: &str) -> CritiqueLabel {
    let lower = text.to_lowercase();
    CritiqueLabel::ALL
        .into_iter()
        .filter_map(|l| lower.rfind(l.phrase()).map(|at| (at, l)))
        .max_by_key(|(at, _)| *at)
        .map(|(_, l)| l)
        .unwrap_or(CritiqueLabel::Wrong)
}

/// Majority vote of correct against not-correct; ties are wrong. A
/// not-correct majority is split into wrong or goal-not-reached by a second
/// vote, again with ties going to wrong.
pub fn self_consistency(labels: &[CritiqueLabel]) -> Result<CritiqueLabel, CriticError> {
    if labels.is_empty() {
        return Err(CriticError::EmptyInput);
    }
    let t = VoteTally::of(labels);
    let not_correct = t.wrong + t.goal_not_reached;
    Ok(if t.correct > not_correct {
        CritiqueLabel::Correct
    } else if t.correct < not_correct && t.goal_not_reached > t.wrong {
        CritiqueLabel::GoalNotReached
    } else {
        CritiqueLabel::Wrong
    })
}

/// Everything a critic may look at for one plan.
#[derive(Debug, Clone, Copy)]
pub struct CritiqueRequest<'a> {
    pub domain: &'a DomainDef,
    pub problem: &'a ProblemDef,
    pub problem_id: &'a str,
    pub iteration: usize,
    pub plan_text: &'a str,
    /// `None` when the plan text did not parse.
    pub plan: Option<&'a Plan>,
    pub prompt: &'a str,
}

pub trait Critic: Send + Sync {
    fn critique(&self, req: &CritiqueRequest<'_>) -> Result<CritiqueVerdict, CriticError>;

    /// Samples drawn per critique, the `c` of the call accounting.
    fn samples(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticBackend {
    Llm,
    Oracle,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriticConfig {
    pub backend: CriticBackend,
    /// Self-consistency sample count.
    pub samples: usize,
    pub template: TemplateId,
    /// File of critique exemplars separated by lines holding only `---`.
    pub exemplars: Option<std::path::PathBuf>,
    /// Defaults to 0.0 for a single sample and 0.7 otherwise.
    pub temperature: Option<f64>,
    pub fp_rate: f64,
    pub fn_rate: f64,
    pub seed: u64,
}

impl Default for CriticConfig {
    fn default() -> Self {
        CriticConfig {
            backend: CriticBackend::Oracle,
            samples: 1,
            template: TemplateId::Critique0shotDd,
            exemplars: None,
            temperature: None,
            fp_rate: 0.0,
            fn_rate: 0.0,
            seed: 0,
        }
    }
}

pub const DEFAULT_SAMPLING_TEMPERATURE: f64 = 0.7;

impl CriticConfig {
    pub fn validate(&self) -> Result<(), CriticError> {
        if self.samples == 0 {
            return Err(CriticError::Config("samples must be at least 1".into()));
        }
        for (name, r) in [("fp_rate", self.fp_rate), ("fn_rate", self.fn_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(CriticError::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if matches!(self.temperature, Some(t) if !(0.0..=1.0).contains(&t)) {
            return Err(CriticError::Config("temperature must lie in [0, 1]".into()));
        }
        if self.template == TemplateId::PlanFewshot {
            return Err(CriticError::Config("plan_fewshot is not a critique template".into()));
        }
        Ok(())
    }

    pub fn effective_temperature(&self) -> f64 {
        self.temperature.unwrap_or(if self.samples > 1 { DEFAULT_SAMPLING_TEMPERATURE } else { 0.0 })
    }
}

fn oracle_sample(req: &CritiqueRequest<'_>) -> (CritiqueLabel, String) {
    match req.plan.map(|p| validate_plan(req.problem, p, req.domain)) {
        Some(Ok(v)) => (CritiqueLabel::from_verdict(&v.verdict), v.trace_text()),
        Some(Err(e)) => (CritiqueLabel::Wrong, format!("{e}\nthe plan is wrong")),
        None => (CritiqueLabel::Wrong, "the plan could not be parsed\nthe plan is wrong".to_string()),
    }
}

/// Validator-backed critic: every sample is the ground-truth verdict.
#[derive(Debug, Clone)]
pub struct OracleCritic {
    pub samples: usize,
}

impl Critic for OracleCritic {
    fn critique(&self, req: &CritiqueRequest<'_>) -> Result<CritiqueVerdict, CriticError> {
        let one = oracle_sample(req);
        CritiqueVerdict::from_samples(vec![one; self.samples.max(1)])
    }

    fn samples(&self) -> usize {
        self.samples.max(1)
    }
}

/// Oracle verdicts flipped at configured rates: correct plans are called
/// wrong with probability `fn_rate`, incorrect ones correct with `fp_rate`.
#[derive(Debug, Clone)]
pub struct MockCritic {
    pub samples: usize,
    pub fp_rate: f64,
    pub fn_rate: f64,
    pub seed: u64,
}

impl Critic for MockCritic {
    fn critique(&self, req: &CritiqueRequest<'_>) -> Result<CritiqueVerdict, CriticError> {
        let (truth, text) = oracle_sample(req);
        let samples = (0..self.samples.max(1))
            .map(|j| {
                let mut rng = seed::rng(&[
                    "mock-critic".into(),
                    self.seed.into(),
                    req.problem_id.into(),
                    req.iteration.into(),
                    j.into(),
                ]);
                let u: f64 = rng.random();
                let label = match truth {
                    CritiqueLabel::Correct if u < self.fn_rate => CritiqueLabel::Wrong,
                    CritiqueLabel::Wrong | CritiqueLabel::GoalNotReached if u < self.fp_rate => CritiqueLabel::Correct,
                    l => l,
                };
                let raw = if label == truth { text.clone() } else { label.phrase().to_string() };
                (label, raw)
            })
            .collect();
        CritiqueVerdict::from_samples(samples)
    }

    fn samples(&self) -> usize {
        self.samples.max(1)
    }
}

/// Sends the critique prompt `samples` times concurrently.
#[derive(Debug, Clone)]
pub struct LlmCritic {
    pub client: Arc<LlmClient>,
    pub samples: usize,
    pub temperature: f64,
}

impl Critic for LlmCritic {
    fn critique(&self, req: &CritiqueRequest<'_>) -> Result<CritiqueVerdict, CriticError> {
        let n = self.samples.max(1);
        let texts: Vec<Result<String, LlmError>> = std::thread::scope(|s| {
            let handles: Vec<_> =
                (0..n).map(|_| s.spawn(|| self.client.complete(req.prompt, self.temperature))).collect();
            handles.into_iter().map(|h| h.join().expect("critique worker panicked")).collect()
        });
        let mut samples = Vec::with_capacity(n);
        for t in texts {
            let t = t?;
            samples.push((extract_verdict(&t), t));
        }
        CritiqueVerdict::from_samples(samples)
    }

    fn samples(&self) -> usize {
        self.samples.max(1)
    }
}

/// Replays fixed labels per iteration; the last entry repeats.
#[derive(Debug, Clone)]
pub struct ScriptedCritic {
    pub labels: Vec<CritiqueLabel>,
    pub samples: usize,
}

impl Critic for ScriptedCritic {
    fn critique(&self, req: &CritiqueRequest<'_>) -> Result<CritiqueVerdict, CriticError> {
        let label = *self
            .labels
            .get(req.iteration)
            .or(self.labels.last())
            .ok_or(CriticError::EmptyInput)?;
        CritiqueVerdict::from_samples(vec![(label, label.phrase().to_string()); self.samples.max(1)])
    }

    fn samples(&self) -> usize {
        self.samples.max(1)
    }
}

/// Builds the critic described by `config`. `client` is required for the llm backend.
pub fn build_critic(config: &CriticConfig, client: Option<Arc<LlmClient>>) -> Result<Box<dyn Critic>, CriticError> {
    config.validate()?;
    Ok(match config.backend {
        CriticBackend::Oracle => Box::new(OracleCritic { samples: config.samples }),
        CriticBackend::Mock => Box::new(MockCritic {
            samples: config.samples,
            fp_rate: config.fp_rate,
            fn_rate: config.fn_rate,
            seed: config.seed,
        }),
        CriticBackend::Llm => Box::new(LlmCritic {
            client: client.ok_or_else(|| CriticError::Config("llm backend needs an endpoint".into()))?,
            samples: config.samples,
            temperature: config.effective_temperature(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::testing::{reply, serve};
    use crate::llm::LlmConfig;
    use crate::pddl::{parse_domain, parse_plan, parse_problem, BLOCKSWORLD_4OPS};
    use CritiqueLabel::*;

    #[test]
    fn extraction_last_match_wins() {
        assert_eq!(extract_verdict("... **The Plan Is Correct**"), Correct);
        assert_eq!(extract_verdict("**the plan is wrong** because the preconditions"), Wrong);
        assert_eq!(extract_verdict("no phrase here"), Wrong);
        assert_eq!(extract_verdict("the plan is correct? no: goal not reached"), GoalNotReached);
        assert_eq!(extract_verdict("goal not reached... actually the plan is correct"), Correct);
    }

    #[test]
    fn voting_rules() {
        assert_eq!(self_consistency(&[Correct, Correct, Wrong, Wrong, Correct]).unwrap(), Correct);
        assert_eq!(self_consistency(&[Correct, Wrong]).unwrap(), Wrong);
        assert_eq!(self_consistency(&[GoalNotReached]).unwrap(), GoalNotReached);
        assert_eq!(self_consistency(&[Correct, GoalNotReached]).unwrap(), Wrong);
        assert_eq!(self_consistency(&[Wrong, GoalNotReached, GoalNotReached]).unwrap(), GoalNotReached);
        assert_eq!(self_consistency(&[]), Err(CriticError::EmptyInput));
    }

    fn fixture() -> (DomainDef, ProblemDef) {
        let d = parse_domain(BLOCKSWORLD_4OPS).unwrap();
        let p = parse_problem(
            "(define (problem p) (:domain blocksworld-4ops) (:objects a b)
             (:init (ontable a) (ontable b) (clear a) (clear b) (handempty)) (:goal (and (on a b))))",
            &d,
        )
        .unwrap();
        (d, p)
    }

    fn request<'a>(d: &'a DomainDef, p: &'a ProblemDef, plan: &'a Plan, text: &'a str) -> CritiqueRequest<'a> {
        CritiqueRequest {
            domain: d,
            problem: p,
            problem_id: "p",
            iteration: 0,
            plan_text: text,
            plan: Some(plan),
            prompt: "prompt",
        }
    }

    #[test]
    fn oracle_and_forced_mock() {
        let (d, p) = fixture();
        let good = parse_plan("(pick-up a)\n(stack a b)", &d).unwrap();
        let bad = parse_plan("(stack a b)", &d).unwrap();
        let oracle = OracleCritic { samples: 3 };
        let v = oracle.critique(&request(&d, &p, &good, "")).unwrap();
        assert_eq!((v.label, v.tally.correct, v.samples), (Correct, 3, 3));
        assert_eq!(oracle.critique(&request(&d, &p, &bad, "")).unwrap().label, Wrong);
        let always_fp = MockCritic { samples: 1, fp_rate: 1.0, fn_rate: 0.0, seed: 0 };
        assert_eq!(always_fp.critique(&request(&d, &p, &bad, "")).unwrap().label, Correct);
        let exact = MockCritic { samples: 1, fp_rate: 0.0, fn_rate: 0.0, seed: 0 };
        assert_eq!(exact.critique(&request(&d, &p, &bad, "")).unwrap().label, Wrong);
        let mut unparsed = request(&d, &p, &bad, "garbage");
        unparsed.plan = None;
        assert_eq!(oracle.critique(&unparsed).unwrap().label, Wrong);
    }

    #[test]
    fn llm_critic_votes_over_samples() {
        let server = serve(vec![reply("fine, the plan is correct")]);
        let client = LlmClient::new(LlmConfig {
            endpoint: server.url.clone(),
            api_key_env: "PLANCRITIC_TEST_UNSET_KEY".into(),
            ..LlmConfig::default()
        })
        .unwrap();
        let (d, p) = fixture();
        let plan = Plan::default();
        let critic = LlmCritic { client: Arc::new(client), samples: 3, temperature: 0.7 };
        let v = critic.critique(&request(&d, &p, &plan, "")).unwrap();
        assert_eq!((v.label, v.tally.correct), (Correct, 3));
        assert_eq!(server.requests.lock().unwrap().len(), 3);
    }

    #[test]
    fn config_checks() {
        assert!(CriticConfig { samples: 0, ..CriticConfig::default() }.validate().is_err());
        assert!(CriticConfig { fp_rate: 1.5, ..CriticConfig::default() }.validate().is_err());
        assert_eq!(CriticConfig { samples: 5, ..CriticConfig::default() }.effective_temperature(), 0.7);
        assert_eq!(CriticConfig::default().effective_temperature(), 0.0);
        assert!(build_critic(&CriticConfig { backend: CriticBackend::Llm, ..CriticConfig::default() }, None).is_err());
    }
}
