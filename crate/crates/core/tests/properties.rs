use std::collections::BTreeSet;

use proptest::prelude::*;

use plancritic_core::critics::{CritiqueRequest, MockCritic};
use plancritic_core::generators::{obfuscate, GridSize, LogisticsSize};
use plancritic_core::pddl::{BLOCKSWORLD_4OPS, LOGISTICS, MINIGRID};
use plancritic_core::planner::extract_plan_text;
use plancritic_core::prompting::{select_fewshots, Exemplar, FewShotPool};
use plancritic_core::search::{execute, ground_actions, Execution};
use plancritic_core::{
    bfs_plan, extract_verdict, generate, parse_domain, parse_plan, parse_problem, print_domain, print_plan,
    print_problem, self_consistency, validate_plan, BenchmarkSpec, Critic, CritiqueLabel, DomainDef, GenSpec,
    ObfuscationMap, Plan, PlanVerdict, ProblemDef, SearchLimits, SearchOutcome,
};

fn bw() -> DomainDef {
    parse_domain(BLOCKSWORLD_4OPS).unwrap()
}

fn bw_problem(blocks: usize, seed: u64) -> ProblemDef {
    let spec = GenSpec { benchmark: BenchmarkSpec::Blocksworld { blocks }, seed, count: 1 };
    generate(&spec).unwrap().remove(0).problem
}

fn label() -> impl Strategy<Value = CritiqueLabel> {
    prop_oneof![
        Just(CritiqueLabel::Correct),
        Just(CritiqueLabel::Wrong),
        Just(CritiqueLabel::GoalNotReached)
    ]
}

fn agree(v: &PlanVerdict, e: Execution) -> bool {
    match (v, e) {
        (PlanVerdict::Correct, Execution::Accepted) => true,
        (PlanVerdict::WrongAtStep { step, .. }, Execution::FailedAt(s)) => *step == s,
        (PlanVerdict::GoalNotReached { .. }, Execution::GoalUnmet) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_problems_roundtrip(blocks in 2usize..8, seed in any::<u64>()) {
        let d = bw();
        let p = bw_problem(blocks, seed);
        prop_assert_eq!(parse_problem(&print_problem(&p), &d).unwrap(), p);
    }

    #[test]
    fn other_benchmarks_roundtrip(seed in any::<u64>()) {
        let cases = [
            (LOGISTICS, BenchmarkSpec::Logistics(LogisticsSize::EASY)),
            (MINIGRID, BenchmarkSpec::Minigrid(GridSize::DEFAULT)),
        ];
        for (text, benchmark) in cases {
            let d = parse_domain(text).unwrap();
            prop_assert_eq!(parse_domain(&print_domain(&d)).unwrap(), d.clone());
            let p = generate(&GenSpec { benchmark, seed, count: 1 }).unwrap().remove(0).problem;
            prop_assert_eq!(parse_problem(&print_problem(&p), &d).unwrap(), p);
        }
    }

    #[test]
    fn validator_agrees_with_executor(blocks in 2usize..6, seed in any::<u64>(), picks in prop::collection::vec(any::<prop::sample::Index>(), 0..12)) {
        let d = bw();
        let p = bw_problem(blocks, seed);
        let ground = ground_actions(&d, &p);
        let plan = Plan::new(picks.iter().map(|i| ground[i.index(ground.len())].clone()).collect());
        prop_assert_eq!(parse_plan(&print_plan(&plan), &d).unwrap(), plan.clone());
        let v = validate_plan(&p, &plan, &d).unwrap();
        prop_assert!(agree(&v.verdict, execute(&d, &p, &plan)), "{:?}", v.verdict);
        prop_assert_eq!(v.trace.len(), match &v.verdict {
            PlanVerdict::WrongAtStep { step, .. } => *step,
            _ => plan.len(),
        });
    }

    #[test]
    fn bfs_plans_validate(blocks in 2usize..5, seed in any::<u64>()) {
        let d = bw();
        let p = bw_problem(blocks, seed);
        let SearchOutcome::Found(plan) = bfs_plan(&d, &p, SearchLimits::default()) else {
            return Err(TestCaseError::fail("no plan"));
        };
        prop_assert!(validate_plan(&p, &plan, &d).unwrap().verdict.is_correct());
        prop_assert_eq!(execute(&d, &p, &plan), Execution::Accepted);
    }

    #[test]
    fn renaming_preserves_verdicts(blocks in 2usize..6, seed in any::<u64>(), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..10)) {
        let d = bw();
        let p = bw_problem(blocks, seed);
        let ground = ground_actions(&d, &p);
        let plan = Plan::new(picks.iter().map(|i| ground[i.index(ground.len())].clone()).collect());
        let before = validate_plan(&p, &plan, &d).unwrap().verdict;
        for map in [ObfuscationMap::deceptive(), ObfuscationMap::nonspecific(&d, std::slice::from_ref(&p))] {
            let out = obfuscate(&d, std::slice::from_ref(&p), Some(std::slice::from_ref(&plan)), &map).unwrap();
            let plans = out.plans.clone().unwrap();
            let after = validate_plan(&out.problems[0], &plans[0], &out.domain).unwrap().verdict;
            prop_assert_eq!(std::mem::discriminant(&after), std::mem::discriminant(&before));
            if let (PlanVerdict::WrongAtStep { step: a, .. }, PlanVerdict::WrongAtStep { step: b, .. }) = (&after, &before) {
                prop_assert_eq!(a, b);
            }
            let back = obfuscate(&out.domain, &out.problems, Some(&plans), &map.inverse()).unwrap();
            prop_assert_eq!(&back.domain, &d);
            prop_assert_eq!(&back.problems[0], &p);
            prop_assert_eq!(&back.plans.unwrap()[0], &plan);
        }
    }

    #[test]
    fn last_verdict_phrase_wins(prefix in "[a-z ,.\n]{0,40}", suffix in "[a-z ,.\n]{0,40}", first in label(), last in label()) {
        let text = format!("{prefix}{}{suffix}\n**{}**", first.phrase(), last.phrase().to_uppercase());
        prop_assert_eq!(extract_verdict(&text), last);
    }

    #[test]
    fn vote_ignores_order(votes in prop::collection::vec(label(), 1..8), rot in any::<prop::sample::Index>()) {
        let mut shuffled = votes.clone();
        shuffled.rotate_left(rot.index(votes.len()));
        shuffled.reverse();
        prop_assert_eq!(self_consistency(&votes).unwrap(), self_consistency(&shuffled).unwrap());
        let unanimous = vec![votes[0]; votes.len()];
        prop_assert_eq!(self_consistency(&unanimous).unwrap(), votes[0]);
    }

    #[test]
    fn plan_extraction_is_idempotent(raw in "[a-z()\\- \n*#:0-9]{0,120}") {
        let once = extract_plan_text(&raw);
        prop_assert_eq!(extract_plan_text(&once), once);
    }

    #[test]
    fn fewshot_selection_is_a_prefix(seed in any::<u64>(), n in 0usize..6, target in 0usize..8) {
        let d = bw();
        let exemplars: Vec<Exemplar> = (0..8u64)
            .map(|i| {
                let problem = bw_problem(3, i);
                let SearchOutcome::Found(plan) = bfs_plan(&d, &problem, SearchLimits::default()) else { unreachable!() };
                Exemplar { id: format!("e{i}"), problem, plan }
            })
            .collect();
        let pool = FewShotPool::new(&d, exemplars, seed).unwrap();
        let id = format!("e{target}");
        let big: Vec<String> = select_fewshots(&pool, &id, 7).unwrap().iter().map(|e| e.id.clone()).collect();
        let small: Vec<String> = select_fewshots(&pool, &id, n).unwrap().iter().map(|e| e.id.clone()).collect();
        prop_assert_eq!(&big[..n], &small[..]);
        prop_assert!(!big.contains(&id));
        prop_assert_eq!(big.iter().collect::<BTreeSet<_>>().len(), 7);
        prop_assert!(select_fewshots(&pool, &id, 8).is_err());
    }
}

#[test]
fn mock_critic_flip_rates() {
    let d = bw();
    let p = bw_problem(4, 3);
    let SearchOutcome::Found(good) = bfs_plan(&d, &p, SearchLimits::default()) else { panic!() };
    let bad = Plan::new(good.steps[1..].to_vec());
    let critic = MockCritic { samples: 1, fp_rate: 0.2, fn_rate: 0.05, seed: 9 };
    let trials = 10_000;
    let rate = |plan: &Plan, flipped: CritiqueLabel| {
        let text = print_plan(plan);
        let hits = (0..trials)
            .filter(|&i| {
                let req = CritiqueRequest {
                    domain: &d,
                    problem: &p,
                    problem_id: "p",
                    iteration: i,
                    plan_text: &text,
                    plan: Some(plan),
                    prompt: "",
                };
                critic.critique(&req).unwrap().label == flipped
            })
            .count();
        hits as f64 / trials as f64
    };
    let fp = rate(&bad, CritiqueLabel::Correct);
    let fn_ = rate(&good, CritiqueLabel::Wrong);
    let se = |r: f64| 3.0 * (r * (1.0 - r) / trials as f64).sqrt();
    assert!((fp - 0.2).abs() <= se(0.2), "fp {fp}");
    assert!((fn_ - 0.05).abs() <= se(0.05), "fn {fn_}");
}
