//! Plan proposers: an LLM backend, a seeded mock and a scripted replay.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::llm::{LlmClient, LlmError};
use crate::pddl::{print_plan, Plan};
use crate::seed;

#[derive(Debug, Clone, Copy)]
pub struct PlanRequest<'a> {
    pub problem_id: &'a str,
    pub iteration: usize,
    pub prompt: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlannerError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("no golden plan for `{0}`")]
    NoGolden(String),
    #[error("script exhausted at iteration {0}")]
    ScriptExhausted(usize),
}

pub trait Planner: Send + Sync {
    /// Returns the raw model output for a plan prompt.
    fn propose(&self, req: &PlanRequest<'_>) -> Result<String, PlannerError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerBackend {
    Llm,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub backend: PlannerBackend,
    pub temperature: f64,
    /// Mock only: chance that an attempt is the golden plan.
    pub p_golden: f64,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig { backend: PlannerBackend::Mock, temperature: 0.0, p_golden: 1.0, seed: 0 }
    }
}

/// Keeps the lines of a model answer that look like plan steps.
pub fn extract_plan_text(raw: &str) -> String {
    raw.lines()
        .map(str::trim)
        .filter(|l| l.starts_with('(') && l.ends_with(')'))
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        })
}

#[derive(Debug, Clone)]
pub struct LlmPlanner {
    pub client: Arc<LlmClient>,
    pub temperature: f64,
}

impl Planner for LlmPlanner {
    fn propose(&self, req: &PlanRequest<'_>) -> Result<String, PlannerError> {
        Ok(self.client.complete(req.prompt, self.temperature)?)
    }
}

/// Emits the golden plan with probability `p_golden`, otherwise the golden
/// plan with one random step removed. Golden plans are shortest plans, so the
/// shortened one never solves the problem.
#[derive(Debug, Clone)]
pub struct MockPlanner {
    pub golden: BTreeMap<String, Plan>,
    pub p_golden: f64,
    pub seed: u64,
}

impl Planner for MockPlanner {
    fn propose(&self, req: &PlanRequest<'_>) -> Result<String, PlannerError> {
        let golden = self.golden.get(req.problem_id).ok_or_else(|| PlannerError::NoGolden(req.problem_id.into()))?;
        let mut rng = seed::rng(&["mock-planner".into(), self.seed.into(), req.problem_id.into(), req.iteration.into()]);
        if golden.is_empty() || rng.random_bool(self.p_golden.clamp(0.0, 1.0)) {
            return Ok(print_plan(golden));
        }
        let mut steps = golden.steps.clone();
        steps.remove(rng.random_range(0..steps.len()));
        Ok(print_plan(&Plan::new(steps)))
    }
}

/// Returns `outputs[iteration]`.
#[derive(Debug, Clone)]
pub struct ScriptedPlanner {
    pub outputs: Vec<String>,
}

impl Planner for ScriptedPlanner {
    fn propose(&self, req: &PlanRequest<'_>) -> Result<String, PlannerError> {
        self.outputs.get(req.iteration).cloned().ok_or(PlannerError::ScriptExhausted(req.iteration))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::GroundAction;

    #[test]
    fn extraction_keeps_step_lines() {
        let raw = "The clean plan:\n(unstack b5 b2)\n  (put-down b5)  \n## plan evaluation:\n**step 1: (x)**";
        assert_eq!(extract_plan_text(raw), "(unstack b5 b2)\n(put-down b5)\n");
        assert_eq!(extract_plan_text("nothing"), "");
    }

    #[test]
    fn mock_planner_rates() {
        let plan = Plan::new(vec![GroundAction::new("pick-up", ["a"]), GroundAction::new("stack", ["a", "b"])]);
        let golden = BTreeMap::from([("p".to_string(), plan.clone())]);
        let always = MockPlanner { golden: golden.clone(), p_golden: 1.0, seed: 0 };
        let never = MockPlanner { golden, p_golden: 0.0, seed: 0 };
        for i in 0..5 {
            let req = PlanRequest { problem_id: "p", iteration: i, prompt: "" };
            assert_eq!(always.propose(&req).unwrap(), print_plan(&plan));
            assert_eq!(never.propose(&req).unwrap().lines().count(), 1);
        }
        let req = PlanRequest { problem_id: "q", iteration: 0, prompt: "" };
        assert!(always.propose(&req).is_err());
    }
}
