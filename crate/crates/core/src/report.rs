//! Ground-truth scoring of run records and report rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::critics::CritiqueLabel;
use crate::dataset::Dataset;
use crate::orchestrator::RunRecord;
use crate::pddl::{parse_plan, DomainDef, ProblemDef};
use crate::semantics::validate_plan;

/// Half-width of the 95% normal-approximation interval for a proportion.
pub fn wald_ci(p: f64, n: usize) -> f64 {
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub critic_accuracy: Option<f64>,
}

impl StepMetrics {
    pub fn critiques(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Share of invalid plans the critic accepted.
    pub fn fp_rate(&self) -> Option<f64> {
        ratio(self.fp, self.fp + self.tn)
    }

    /// Share of valid plans the critic rejected.
    pub fn fn_rate(&self) -> Option<f64> {
        ratio(self.fn_, self.fn_ + self.tp)
    }
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    pub ci: f64,
    pub mean_llm_calls: f64,
    pub steps: Vec<StepMetrics>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no run records to score")]
    Empty,
    #[error("record for unknown problem `{0}`")]
    MissingProblem(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("unknown report format `{0}`")]
    UnknownFormat(String),
}

/// Problems indexed by id, each with its domain.
pub type ProblemIndex<'a> = BTreeMap<&'a str, (&'a DomainDef, &'a ProblemDef)>;

pub fn index_dataset(ds: &Dataset) -> ProblemIndex<'_> {
    ds.items.iter().map(|i| (i.entry.id.as_str(), (&*i.domain, &i.problem))).collect()
}

fn is_correct(plan_text: &str, domain: &DomainDef, problem: &ProblemDef) -> bool {
    parse_plan(plan_text, domain)
        .ok()
        .and_then(|p| validate_plan(problem, &p, domain).ok())
        .is_some_and(|v| v.verdict.is_correct())
}

/// The plan a record stands by after step `t`: the latest proposal made at
/// or before `t`, or the final plan once the run has ended.
fn plan_at(r: &RunRecord, t: usize) -> &str {
    match r.entries.last() {
        Some(last) if t < last.iteration => {
            r.entries.iter().rev().find(|e| e.iteration <= t).map(|e| e.plan.as_str()).unwrap_or("")
        }
        _ => &r.final_plan,
    }
}

/// Re-validates every plan in `records` against the problems.
pub fn score(records: &[RunRecord], problems: &ProblemIndex<'_>) -> Result<Metrics, ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    let k = records.iter().map(|r| r.k).max().unwrap_or(0);
    let mut resolved = Vec::with_capacity(records.len());
    for r in records {
        let &(d, p) = problems.get(r.problem_id.as_str()).ok_or_else(|| ReportError::MissingProblem(r.problem_id.clone()))?;
        resolved.push((r, d, p));
    }
    let n = records.len();
    let n_correct = resolved.iter().filter(|(r, d, p)| is_correct(&r.final_plan, d, p)).count();
    let accuracy = n_correct as f64 / n as f64;

    let mut steps = Vec::with_capacity(k + 1);
    for t in 0..=k {
        let correct_t = resolved.iter().filter(|(r, d, p)| is_correct(plan_at(r, t), d, p)).count();
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (r, d, p) in &resolved {
            for e in r.entries.iter().filter(|e| e.iteration == t) {
                let Some(label) = e.critic_label else { continue };
                match (label == CritiqueLabel::Correct, is_correct(&e.plan, d, p)) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, false) => tn += 1,
                    (false, true) => fn_ += 1,
                }
            }
        }
        steps.push(StepMetrics {
            step: t,
            n_correct: correct_t,
            accuracy: correct_t as f64 / n as f64,
            tp,
            fp,
            tn,
            fn_,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            critic_accuracy: ratio(tp + tn, tp + fp + tn + fn_),
        });
    }
    Ok(Metrics {
        n,
        n_correct,
        accuracy,
        ci: wald_ci(accuracy, n),
        mean_llm_calls: records.iter().map(|r| r.llm_calls as f64).sum::<f64>() / n as f64,
        steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    TableText,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::TableText => "report.txt",
            ReportFormat::Csv => "steps.csv",
            ReportFormat::Json => "report.json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table-text" | "text" => Ok(ReportFormat::TableText),
            "csv" => Ok(ReportFormat::Csv),
            "json" | "structured" => Ok(ReportFormat::Json),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

/// Percentages with one decimal, as in `85.5±2.8`.
pub fn summary_row(m: &Metrics) -> String {
    format!("{:.1}±{:.1}", m.accuracy * 100.0, m.ci * 100.0)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

pub fn render_report(m: &Metrics, format: ReportFormat) -> String {
    match format {
        ReportFormat::TableText => {
            let mut out = String::new();
            writeln!(out, "accuracy {} (n={}, correct={})", summary_row(m), m.n, m.n_correct).unwrap();
            writeln!(out, "mean llm calls {:.2}", m.mean_llm_calls).unwrap();
            writeln!(out).unwrap();
            writeln!(
                out,
                "{:>4} {:>9} {:>8} {:>5} {:>5} {:>5} {:>5} {:>9} {:>9}",
                "step", "n_correct", "accuracy", "tp", "fp", "tn", "fn", "precision", "recall"
            )
            .unwrap();
            for s in &m.steps {
                let dash = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
                writeln!(
                    out,
                    "{:>4} {:>9} {:>8.4} {:>5} {:>5} {:>5} {:>5} {:>9} {:>9}",
                    s.step,
                    s.n_correct,
                    s.accuracy,
                    s.tp,
                    s.fp,
                    s.tn,
                    s.fn_,
                    dash(s.precision),
                    dash(s.recall)
                )
                .unwrap();
            }
            out
        }
        ReportFormat::Csv => {
            let mut out = String::from("step,n_correct,accuracy,tp,fp,tn,fn,precision,recall\n");
            for s in &m.steps {
                writeln!(
                    out,
                    "{},{},{:.4},{},{},{},{},{},{}",
                    s.step,
                    s.n_correct,
                    s.accuracy,
                    s.tp,
                    s.fp,
                    s.tn,
                    s.fn_,
                    opt(s.precision),
                    opt(s.recall)
                )
                .unwrap();
            }
            out
        }
        ReportFormat::Json => {
            let mut v = serde_json::to_value(m).expect("metrics serialize");
            v["summary"] = serde_json::Value::String(summary_row(m));
            let mut s = serde_json::to_string_pretty(&v).expect("metrics serialize");
            s.push('\n');
            s
        }
    }
}

/// Writes the rendered report into `dir` and returns the file path.
pub fn emit_report(m: &Metrics, format: ReportFormat, dir: &Path) -> Result<PathBuf, ReportError> {
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.into(), source })?;
    let path = dir.join(format.file_name());
    std::fs::write(&path, render_report(m, format)).map_err(|source| ReportError::Io { path: path.clone(), source })?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::{IterationEntry, StopReason};
    use crate::pddl::{parse_domain, parse_problem, BLOCKSWORLD_4OPS};

    #[test]
    fn wald_values() {
        assert!((wald_ci(0.5, 100) - 0.098).abs() < 1e-9);
        assert_eq!(wald_ci(0.0, 10), 0.0);
        assert_eq!(wald_ci(1.0, 10), 0.0);
        assert_eq!(format!("{:.1}", wald_ci(0.893, 600) * 100.0), "2.5");
        assert_eq!(format!("{:.1}", wald_ci(0.855, 600) * 100.0), "2.8");
    }

    fn entry(iteration: usize, plan: &str, label: CritiqueLabel) -> IterationEntry {
        IterationEntry {
            iteration,
            plan: plan.into(),
            critic_label: Some(label),
            tally: None,
            plan_prompt_bytes: 0,
            critique_prompt_bytes: 0,
        }
    }

    fn record(id: &str, entries: Vec<IterationEntry>, stop: StopReason) -> RunRecord {
        RunRecord {
            problem_id: id.into(),
            k: 2,
            samples: 1,
            final_plan: entries.last().map(|e| e.plan.clone()).unwrap_or_default(),
            llm_calls: 2 * entries.len(),
            entries,
            stop_reason: stop,
            final_verdict: None,
            error: None,
        }
    }

    #[test]
    fn scoring_counts_confusion_and_cumulative_accuracy() {
        let d = parse_domain(BLOCKSWORLD_4OPS).unwrap();
        let p = parse_problem(
            "(define (problem p) (:domain blocksworld-4ops) (:objects a b)
             (:init (ontable a) (ontable b) (clear a) (clear b) (handempty)) (:goal (and (on a b))))",
            &d,
        )
        .unwrap();
        let good = "(pick-up a)\n(stack a b)\n";
        let bad = "(stack a b)\n";
        use CritiqueLabel::*;
        let records = vec![
            record("x", vec![entry(0, bad, Wrong), entry(1, good, Correct)], StopReason::CriticAccepted),
            record("y", vec![entry(0, bad, Correct)], StopReason::CriticAccepted),
            record("z", vec![entry(0, good, Wrong), entry(1, bad, Wrong), entry(2, bad, Wrong)], StopReason::IterationsExhausted),
        ];
        let index: ProblemIndex = ["x", "y", "z"].into_iter().map(|id| (id, (&d, &p))).collect();
        let m = score(&records, &index).unwrap();
        assert_eq!(m.n_correct, 1);
        let s0 = &m.steps[0];
        assert_eq!((s0.tp, s0.fp, s0.tn, s0.fn_), (0, 1, 1, 1));
        assert_eq!(s0.precision, Some(0.0));
        assert_eq!(m.steps.iter().map(|s| s.n_correct).collect::<Vec<_>>(), [1, 1, 1]);
        assert_eq!(m.steps.len(), 3);
        let csv = render_report(&m, ReportFormat::Csv);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("step,n_correct,accuracy,tp,fp,tn,fn,precision,recall\n"));
        assert!(matches!(score(&[], &index), Err(ReportError::Empty)));
        let unknown = vec![record("w", vec![], StopReason::BudgetExceeded)];
        assert!(matches!(score(&unknown, &index), Err(ReportError::MissingProblem(_))));
    }

    #[test]
    fn summary_format() {
        let m = Metrics { n: 600, n_correct: 513, accuracy: 0.855, ci: wald_ci(0.855, 600), mean_llm_calls: 0.0, steps: vec![] };
        assert_eq!(summary_row(&m), "85.5±2.8");
    }
}
