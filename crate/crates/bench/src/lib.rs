//! Inputs shared by the benches.

use plancritic_core::pddl::BLOCKSWORLD_4OPS;
use plancritic_core::prompting::Exemplar;
use plancritic_core::{bfs_plan, generate, parse_domain, BenchmarkSpec, DomainDef, GenSpec, Plan, ProblemDef};
use plancritic_core::{SearchLimits, SearchOutcome};

pub struct Case {
    pub id: String,
    pub problem: ProblemDef,
    pub plan: Plan,
}

pub fn blocksworld() -> DomainDef {
    parse_domain(BLOCKSWORLD_4OPS).expect("bundled domain parses")
}

/// `count` solved blocksworld problems with `blocks` blocks.
pub fn cases(domain: &DomainDef, blocks: usize, count: usize) -> Vec<Case> {
    let spec = GenSpec { benchmark: BenchmarkSpec::Blocksworld { blocks }, seed: 0, count };
    generate(&spec)
        .expect("valid spec")
        .into_iter()
        .map(|i| {
            let SearchOutcome::Found(plan) = bfs_plan(domain, &i.problem, SearchLimits::default()) else {
                panic!("{} has no plan", i.id);
            };
            Case { id: i.id, problem: i.problem, plan }
        })
        .collect()
}

pub fn exemplars(cases: &[Case]) -> Vec<Exemplar> {
    cases.iter().map(|c| Exemplar { id: c.id.clone(), problem: c.problem.clone(), plan: c.plan.clone() }).collect()
}
