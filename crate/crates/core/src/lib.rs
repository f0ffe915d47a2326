//! STRIPS planning harness: PDDL parsing and validation, a BFS oracle,
//! benchmark generators, prompt assembly, critics and the iterative
//! plan / critique / revise loop with its scoring.

pub mod critics;
pub mod dataset;
pub mod generators;
pub mod llm;
pub mod orchestrator;
pub mod pddl;
pub mod planner;
pub mod prompting;
pub mod report;
pub mod search;
pub mod seed;
pub mod semantics;

pub use critics::{extract_verdict, self_consistency, Critic, CriticConfig, CritiqueLabel, CritiqueVerdict};
pub use generators::{generate, BenchmarkSpec, GenSpec, ObfuscationMap};
pub use orchestrator::{call_count, run_batch, run_problem, LoopConfig, RunConfig, RunRecord, StopReason};
pub use pddl::{
    parse_domain, parse_plan, parse_problem, print_domain, print_plan, print_problem, Atom, DomainDef, GroundAction,
    Plan, ProblemDef,
};
pub use report::{score, wald_ci, Metrics};
pub use search::{bfs_plan, SearchLimits, SearchOutcome};
pub use semantics::{validate_plan, PlanVerdict, State};
