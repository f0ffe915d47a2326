//! The iterative plan / critique / revise loop and its batch runner.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::critics::{build_critic, Critic, CriticConfig, CriticError, CritiqueLabel, CritiqueRequest, VoteTally};
use crate::dataset::{append_jsonl, load_dataset, Dataset, DatasetError};
use crate::llm::{LlmClient, LlmConfig, LlmError};
use crate::pddl::{parse_plan, DomainDef, Plan, ProblemDef};
use crate::planner::{extract_plan_text, LlmPlanner, MockPlanner, PlanRequest, Planner, PlannerBackend, PlannerConfig};
use crate::prompting::{
    build_critique_prompt_text, build_plan_prompt, char_budget, select_fewshots, Exemplar, FewShotPool, PromptError,
    PromptTemplate, Transcript,
};
use crate::semantics::{validate_plan, PlanVerdict};

/// LLM calls for `s` plan/critique rounds with `c` critique samples each.
pub fn call_count(s: usize, c: usize) -> usize {
    if c <= 1 {
        2 * s
    } else {
        s + c * s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    /// Critique rounds after the baseline attempt; at most `k + 1` plans.
    pub k: usize,
    pub shots: usize,
    pub max_prompt_tokens: Option<usize>,
    pub chars_per_token: usize,
    pub fewshot_seed: u64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig { k: 10, shots: 16, max_prompt_tokens: None, chars_per_token: 4, fewshot_seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    CriticAccepted,
    BudgetExceeded,
    IterationsExhausted,
    TransportFailure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationEntry {
    pub iteration: usize,
    pub plan: String,
    /// `None` when the critic failed on this plan.
    pub critic_label: Option<CritiqueLabel>,
    pub tally: Option<VoteTally>,
    pub plan_prompt_bytes: usize,
    pub critique_prompt_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem_id: String,
    pub k: usize,
    pub samples: usize,
    pub entries: Vec<IterationEntry>,
    pub final_plan: String,
    pub stop_reason: StopReason,
    pub llm_calls: usize,
    /// Ground truth for `final_plan`; `None` if it does not parse.
    pub final_verdict: Option<PlanVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    /// Completed plan/critique rounds.
    pub fn rounds(&self) -> usize {
        self.entries.iter().filter(|e| e.critic_label.is_some()).count()
    }

    pub fn final_correct(&self) -> bool {
        matches!(self.final_verdict, Some(PlanVerdict::Correct))
    }
}

/// Planner, critic and prompt settings shared by every problem of a run.
pub struct Harness<'a> {
    pub planner: &'a dyn Planner,
    pub critic: &'a dyn Critic,
    pub critique_template: PromptTemplate,
    pub critique_exemplars: Option<Vec<String>>,
    pub config: LoopConfig,
}

impl<'a> Harness<'a> {
    pub fn new(
        planner: &'a dyn Planner,
        critic: &'a dyn Critic,
        critique_template: PromptTemplate,
        critique_exemplars: Option<Vec<String>>,
        config: LoopConfig,
    ) -> Result<Self, PromptError> {
        let wants = critique_template.uses("self_evaluations_exemplars");
        match (&critique_exemplars, wants) {
            (None, true) => {
                return Err(PromptError::MissingPlaceholderValue("self_evaluations_exemplars".into()));
            }
            (Some(_), false) => return Err(PromptError::UnexpectedExemplars(critique_template.id)),
            _ => {}
        }
        Ok(Harness { planner, critic, critique_template, critique_exemplars, config })
    }
}

fn verdict_of(plan_text: &str, domain: &DomainDef, problem: &ProblemDef) -> Option<PlanVerdict> {
    let plan = parse_plan(plan_text, domain).ok()?;
    validate_plan(problem, &plan, domain).ok().map(|v| v.verdict)
}

/// Runs the loop for one problem. Failures end the run and are recorded,
/// never returned.
pub fn run_problem(
    harness: &Harness<'_>,
    domain: &DomainDef,
    problem_id: &str,
    problem: &ProblemDef,
    shots: &[&Exemplar],
) -> RunRecord {
    let cfg = &harness.config;
    let mut transcript = Transcript::new(char_budget(cfg.max_prompt_tokens, cfg.chars_per_token));
    let mut entries = Vec::new();
    let mut final_plan = String::new();
    let mut stop = StopReason::IterationsExhausted;
    let mut error = None;

    for iteration in 0..=cfg.k {
        let prompt = match build_plan_prompt(domain, problem, shots, &transcript) {
            Ok(p) => p,
            Err(e @ PromptError::BudgetExceeded { .. }) => {
                log::info!("{problem_id}: {e} at step {iteration}");
                stop = StopReason::BudgetExceeded;
                break;
            }
            Err(e) => {
                error = Some(e.to_string());
                stop = StopReason::TransportFailure;
                break;
            }
        };
        let raw = match harness.planner.propose(&PlanRequest { problem_id, iteration, prompt: &prompt }) {
            Ok(raw) => raw,
            Err(e) => {
                log::warn!("{problem_id}: planner failed at step {iteration}: {e}");
                error = Some(e.to_string());
                stop = StopReason::TransportFailure;
                break;
            }
        };
        let plan_text = extract_plan_text(&raw);
        final_plan = plan_text.clone();
        let parsed: Option<Plan> = parse_plan(&plan_text, domain).ok();
        let critique_prompt = build_critique_prompt_text(
            &harness.critique_template,
            domain,
            problem,
            &plan_text,
            harness.critique_exemplars.as_deref(),
        )
        .expect("critique template checked when the harness was built");
        let request = CritiqueRequest {
            domain,
            problem,
            problem_id,
            iteration,
            plan_text: &plan_text,
            plan: parsed.as_ref(),
            prompt: &critique_prompt,
        };
        let mut entry = IterationEntry {
            iteration,
            plan: plan_text.clone(),
            critic_label: None,
            tally: None,
            plan_prompt_bytes: prompt.len(),
            critique_prompt_bytes: critique_prompt.len(),
        };
        let verdict = match harness.critic.critique(&request) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("{problem_id}: critic failed at step {iteration}: {e}");
                entries.push(entry);
                error = Some(e.to_string());
                stop = StopReason::TransportFailure;
                break;
            }
        };
        entry.critic_label = Some(verdict.label);
        entry.tally = Some(verdict.tally);
        entries.push(entry);
        if verdict.label == CritiqueLabel::Correct {
            stop = StopReason::CriticAccepted;
            break;
        }
        transcript.push(plan_text, verdict.raw);
    }

    let rounds = entries.iter().filter(|e| e.critic_label.is_some()).count();
    RunRecord {
        problem_id: problem_id.to_string(),
        k: cfg.k,
        samples: harness.critic.samples(),
        llm_calls: call_count(rounds, harness.critic.samples()),
        final_verdict: verdict_of(&final_plan, domain, problem),
        entries,
        final_plan,
        stop_reason: stop,
        error,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BatchError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}:{line}: bad run record: {message}")]
    Records { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{id}: {source}")]
    Prompt { id: String, source: PromptError },
    #[error(transparent)]
    Critic(#[from] CriticError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("invalid run configuration: {0}")]
    Config(String),
}

/// Reads persisted records. A truncated final line is skipped.
pub fn load_records(path: &Path) -> Result<Vec<RunRecord>, BatchError> {
    let text = fs::read_to_string(path).map_err(|source| BatchError::Io { path: path.into(), source })?;
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(e) if i + 1 == lines.len() && !text.ends_with('\n') => {
                log::warn!("{}: ignoring truncated last record: {e}", path.display());
            }
            Err(e) => {
                return Err(BatchError::Records { path: path.into(), line: i + 1, message: e.to_string() });
            }
        }
    }
    Ok(out)
}

/// Runs every dataset item not already in `records`, `parallelism` at a
/// time, appending each finished record to `records`. Returns one record per
/// item in manifest order.
pub fn run_batch(
    dataset: &Dataset,
    harness: &Harness<'_>,
    pool: &FewShotPool,
    parallelism: usize,
    records: Option<&Path>,
) -> Result<Vec<RunRecord>, BatchError> {
    let mut done: BTreeMap<String, RunRecord> = BTreeMap::new();
    if let Some(path) = records.filter(|p| p.exists()) {
        for r in load_records(path)? {
            done.insert(r.problem_id.clone(), r);
        }
    }
    let pending: Vec<usize> = (0..dataset.items.len()).filter(|&i| !done.contains_key(&dataset.items[i].entry.id)).collect();
    let mut shots = Vec::with_capacity(pending.len());
    for &i in &pending {
        let id = &dataset.items[i].entry.id;
        let sel = select_fewshots(pool, id, harness.config.shots)
            .map_err(|source| BatchError::Prompt { id: id.clone(), source })?;
        shots.push(sel);
    }
    log::info!("{} problems, {} already recorded", dataset.items.len(), dataset.items.len() - pending.len());

    let sink = match records {
        Some(path) => {
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|source| BatchError::Io { path: path.into(), source })?;
            let len = file.metadata().map(|m| m.len()).unwrap_or(0);
            if len > 0 && !fs::read(path).map(|b| b.ends_with(b"\n")).unwrap_or(true) {
                // terminate a partial trailing line
                std::io::Write::write_all(&mut file, b"\n")
                    .map_err(|source| BatchError::Io { path: path.into(), source })?;
            }
            Some(Mutex::new(file))
        }
        None => None,
    };
    let results: Mutex<BTreeMap<usize, RunRecord>> = Mutex::new(BTreeMap::new());
    let next = AtomicUsize::new(0);
    let write_error: Mutex<Option<BatchError>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..parallelism.max(1).min(pending.len().max(1)) {
            s.spawn(|| loop {
                let n = next.fetch_add(1, Ordering::SeqCst);
                let Some(&i) = pending.get(n) else { break };
                let item = &dataset.items[i];
                let record = run_problem(harness, &item.domain, &item.entry.id, &item.problem, &shots[n]);
                if let (Some(sink), Some(path)) = (&sink, records) {
                    let mut file = sink.lock().expect("sink lock");
                    if let Err(source) = append_jsonl(&mut file, &record) {
                        write_error.lock().expect("error lock").get_or_insert(BatchError::Io { path: path.into(), source });
                    }
                }
                results.lock().expect("results lock").insert(i, record);
            });
        }
    });
    if let Some(e) = write_error.into_inner().expect("error lock") {
        return Err(e);
    }
    let mut fresh = results.into_inner().expect("results lock");
    let all: Vec<RunRecord> = dataset
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| fresh.remove(&i).or_else(|| done.remove(&item.entry.id)).expect("every item has a record"))
        .collect();
    if let Some(path) = records {
        // rewrite in manifest order
        let io = |source| BatchError::Io { path: path.into(), source };
        let tmp = path.with_extension("jsonl.tmp");
        let mut file = fs::File::create(&tmp).map_err(io)?;
        for r in &all {
            append_jsonl(&mut file, r).map_err(io)?;
        }
        fs::rename(&tmp, path).map_err(io)?;
    }
    Ok(all)
}

/// Complete description of a batch run, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub records: Option<PathBuf>,
    /// Manifest of solved problems to draw planning shots from; defaults to the dataset.
    pub fewshot_pool: Option<PathBuf>,
    pub parallelism: usize,
    #[serde(rename = "loop")]
    pub loop_config: LoopConfig,
    pub planner: PlannerConfig,
    pub critic: CriticConfig,
    pub llm: Option<LlmConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            records: None,
            fewshot_pool: None,
            parallelism: 1,
            loop_config: LoopConfig::default(),
            planner: PlannerConfig::default(),
            critic: CriticConfig::default(),
            llm: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, BatchError> {
        toml::from_str(text).map_err(|e| BatchError::Config(e.to_string()))
    }

    /// Resolves relative paths against `base`.
    pub fn rebase(&mut self, base: &Path) {
        for p in [&mut self.dataset, &mut self.records, &mut self.fewshot_pool, &mut self.critic.exemplars]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(log) = self.llm.as_mut().and_then(|l| l.debug_log.as_mut()) {
            if log.is_relative() {
                *log = base.join(&*log);
            }
        }
    }
}

/// Splits an exemplar file on lines consisting of `---`.
pub fn parse_critique_exemplars(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for line in text.lines() {
        if line.trim() == "---" {
            out.push(std::mem::take(&mut cur));
        } else {
            cur.push_str(line);
            cur.push('\n');
        }
    }
    out.push(cur);
    out.into_iter().map(|s| s.trim_matches('\n').to_string()).filter(|s| !s.is_empty()).collect()
}

pub fn pool_from_dataset(ds: &Dataset, seed: u64) -> Result<FewShotPool, BatchError> {
    let Some(first) = ds.items.first() else {
        return FewShotPool::new(&empty_domain(), Vec::new(), seed).map_err(|source| BatchError::Prompt {
            id: String::new(),
            source,
        });
    };
    let exemplars: Vec<Exemplar> = ds
        .items
        .iter()
        .filter_map(|i| {
            i.golden.as_ref().map(|plan| Exemplar { id: i.entry.id.clone(), problem: i.problem.clone(), plan: plan.clone() })
        })
        .collect();
    FewShotPool::new(&first.domain, exemplars, seed).map_err(|source| BatchError::Prompt { id: String::new(), source })
}

fn empty_domain() -> DomainDef {
    DomainDef { name: String::new(), requirements: Vec::new(), predicates: Vec::new(), actions: Vec::new() }
}

/// Runs a batch as described by `cfg`, which must name a dataset.
pub fn run_from_config(cfg: &RunConfig) -> Result<Vec<RunRecord>, BatchError> {
    let dataset_path = cfg.dataset.as_ref().ok_or_else(|| BatchError::Config("no dataset given".into()))?;
    let dataset = load_dataset(dataset_path)?;
    let pool_ds = match &cfg.fewshot_pool {
        Some(p) => load_dataset(p)?,
        None => dataset.clone(),
    };
    let pool = pool_from_dataset(&pool_ds, cfg.loop_config.fewshot_seed)?;

    let needs_llm = cfg.planner.backend == PlannerBackend::Llm || cfg.critic.backend == crate::critics::CriticBackend::Llm;
    let client = match (&cfg.llm, needs_llm) {
        (Some(l), true) => Some(Arc::new(LlmClient::new(l.clone())?)),
        (None, true) => return Err(BatchError::Config("an llm backend needs an [llm] section".into())),
        _ => None,
    };
    let planner: Box<dyn Planner> = match cfg.planner.backend {
        PlannerBackend::Llm => Box::new(LlmPlanner {
            client: client.clone().expect("client built above"),
            temperature: cfg.planner.temperature,
        }),
        PlannerBackend::Mock => {
            if !(0.0..=1.0).contains(&cfg.planner.p_golden) {
                return Err(BatchError::Config("p_golden must lie in [0, 1]".into()));
            }
            let golden = dataset
                .items
                .iter()
                .filter_map(|i| i.golden.clone().map(|g| (i.entry.id.clone(), g)))
                .collect();
            Box::new(MockPlanner { golden, p_golden: cfg.planner.p_golden, seed: cfg.planner.seed })
        }
    };
    let critic = build_critic(&cfg.critic, client)?;
    let exemplars = match &cfg.critic.exemplars {
        Some(path) => Some(parse_critique_exemplars(
            &fs::read_to_string(path).map_err(|source| BatchError::Io { path: path.clone(), source })?,
        )),
        None => None,
    };
    let harness = Harness::new(
        planner.as_ref(),
        critic.as_ref(),
        PromptTemplate::builtin(cfg.critic.template),
        exemplars,
        cfg.loop_config.clone(),
    )
    .map_err(|source| BatchError::Prompt { id: String::new(), source })?;
    run_batch(&dataset, &harness, &pool, cfg.parallelism, cfg.records.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critics::{OracleCritic, ScriptedCritic};
    use crate::pddl::{parse_domain, parse_problem, print_plan, BLOCKSWORLD_4OPS};
    use crate::planner::ScriptedPlanner;
    use crate::prompting::TemplateId;

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

    fn harness<'a>(planner: &'a dyn Planner, critic: &'a dyn Critic, k: usize) -> Harness<'a> {
        let cfg = LoopConfig { k, shots: 0, ..LoopConfig::default() };
        Harness::new(planner, critic, PromptTemplate::builtin(TemplateId::Critique0shotDd), None, cfg).unwrap()
    }

    #[test]
    fn call_accounting() {
        assert_eq!(call_count(10, 1), 20);
        assert_eq!(call_count(10, 5), 60);
        assert_eq!(call_count(0, 3), 0);
    }

    #[test]
    fn golden_first_try_stops_immediately() {
        let (d, p) = fixture();
        let planner = ScriptedPlanner { outputs: vec!["(pick-up a)\n(stack a b)".into()] };
        let critic = OracleCritic { samples: 1 };
        let r = run_problem(&harness(&planner, &critic, 10), &d, "p", &p, &[]);
        assert_eq!(r.stop_reason, StopReason::CriticAccepted);
        assert_eq!((r.entries.len(), r.llm_calls), (1, 2));
        assert!(r.final_correct());
    }

    #[test]
    fn exhausts_and_keeps_last_plan() {
        let (d, p) = fixture();
        let planner = ScriptedPlanner { outputs: vec!["(stack a b)".into(), "(pick-up a)".into(), "(pick-up b)".into()] };
        let critic = OracleCritic { samples: 1 };
        let r = run_problem(&harness(&planner, &critic, 2), &d, "p", &p, &[]);
        assert_eq!(r.stop_reason, StopReason::IterationsExhausted);
        assert_eq!(r.final_plan, "(pick-up b)\n");
        assert_eq!(r.llm_calls, 6);
        assert!(!r.final_correct());
    }

    #[test]
    fn planner_failure_is_recorded() {
        let (d, p) = fixture();
        let planner = ScriptedPlanner { outputs: vec!["(stack a b)".into()] };
        let critic = ScriptedCritic { labels: vec![CritiqueLabel::Wrong], samples: 1 };
        let r = run_problem(&harness(&planner, &critic, 5), &d, "p", &p, &[]);
        assert_eq!(r.stop_reason, StopReason::TransportFailure);
        assert_eq!(r.final_plan, "(stack a b)\n");
        assert!(r.error.is_some());
        assert_eq!(r.llm_calls, 2);
    }

    #[test]
    fn budget_returns_previous_plan() {
        let (d, p) = fixture();
        let first = build_plan_prompt(&d, &p, &[], &Transcript::new(None)).unwrap();
        let planner = ScriptedPlanner { outputs: vec!["(stack a b)".into(); 5] };
        let critic = ScriptedCritic { labels: vec![CritiqueLabel::Wrong], samples: 1 };
        let tokens = first.len() + 5;
        let cfg = LoopConfig { k: 5, shots: 0, max_prompt_tokens: Some(tokens), chars_per_token: 1, fewshot_seed: 0 };
        let h = Harness::new(&planner, &critic, PromptTemplate::builtin(TemplateId::Critique0shotDd), None, cfg).unwrap();
        let r = run_problem(&h, &d, "p", &p, &[]);
        assert_eq!(r.stop_reason, StopReason::BudgetExceeded);
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.final_plan, print_plan(&parse_plan("(stack a b)", &d).unwrap()));
    }

    #[test]
    fn harness_checks_exemplars() {
        let planner = ScriptedPlanner { outputs: vec![] };
        let critic = OracleCritic { samples: 1 };
        let t = PromptTemplate::builtin(TemplateId::CritiqueFewshot);
        assert!(Harness::new(&planner, &critic, t, None, LoopConfig::default()).is_err());
    }

    #[test]
    fn exemplar_file_split() {
        assert_eq!(parse_critique_exemplars("a\nb\n---\nc\n---\n"), vec!["a\nb", "c"]);
    }

    #[test]
    fn config_round_trip() {
        let cfg = RunConfig::from_toml(
            "dataset = \"d\"\nparallelism = 3\n[loop]\nk = 4\n[critic]\nbackend = \"mock\"\nfp_rate = 0.2\n",
        )
        .unwrap();
        assert_eq!((cfg.parallelism, cfg.loop_config.k, cfg.loop_config.shots), (3, 4, 16));
        assert_eq!(cfg.critic.fp_rate, 0.2);
        assert!(RunConfig::from_toml("bogus = 1").is_err());
    }
}
