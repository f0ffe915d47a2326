use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{wrong_kind, BenchmarkSpec, GenError, GenSpec, Instance, MAX_BLOCKS, MIN_BLOCKS};
use crate::pddl::{Atom, ProblemDef};
use crate::seed;

/// Towers listed bottom to top. Blocks are visited in random order and each
/// is put on the table or on a uniformly chosen clear block.
fn random_towers(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut towers: Vec<Vec<usize>> = Vec::new();
    for b in order {
        let choice = rng.random_range(0..=towers.len());
        if choice == towers.len() {
            towers.push(vec![b]);
        } else {
            towers[choice].push(b);
        }
    }
    towers
}

fn on_atoms(towers: &[Vec<usize>], names: &[String]) -> Vec<Atom> {
    let mut out = Vec::new();
    for t in towers {
        for w in t.windows(2) {
            out.push(Atom::new("on", [names[w[1]].as_str(), names[w[0]].as_str()]));
        }
    }
    out
}

fn init_atoms(towers: &[Vec<usize>], names: &[String]) -> Vec<Atom> {
    let mut out = vec![Atom::new::<_, &str>("handempty", [])];
    for t in towers {
        out.push(Atom::new("ontable", [names[t[0]].as_str()]));
        out.push(Atom::new("clear", [names[*t.last().expect("non-empty tower")].as_str()]));
    }
    out.extend(on_atoms(towers, names));
    out
}

fn one_instance(rng: &mut ChaCha8Rng, n: usize) -> ProblemDef {
    let names: Vec<String> = (1..=n).map(|i| format!("b{i}")).collect();
    let init_towers = random_towers(rng, n);
    let mut init = init_atoms(&init_towers, &names);

    let goal = loop {
        let candidates = on_atoms(&random_towers(rng, n), &names);
        if candidates.is_empty() {
            continue;
        }
        let subset: Vec<Atom> = candidates.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
        if subset.is_empty() || subset.iter().all(|a| init.contains(a)) {
            continue;
        }
        break subset;
    };
    let mut goal = goal;

    let mut objects = names.clone();
    objects.shuffle(rng);
    init.shuffle(rng);
    goal.shuffle(rng);
    ProblemDef {
        name: format!("BW-rand-{n}"),
        domain: "blocksworld-4ops".into(),
        objects,
        init,
        goal,
    }
}

/// Random Blocksworld instances over `b1..bn`.
pub fn gen_blocksworld(spec: &GenSpec) -> Result<Vec<Instance>, GenError> {
    let BenchmarkSpec::Blocksworld { blocks } = spec.benchmark else {
        return Err(wrong_kind(spec, "blocksworld"));
    };
    if !(MIN_BLOCKS..=MAX_BLOCKS).contains(&blocks) {
        return Err(GenError::InvalidSpec(format!(
            "block count {blocks} outside [{MIN_BLOCKS}, {MAX_BLOCKS}]"
        )));
    }
    Ok((0..spec.count)
        .map(|index| {
            let mut rng = seed::rng(&["blocksworld".into(), blocks.into(), spec.seed.into(), index.into()]);
            Instance {
                id: format!("bw{blocks}-s{}-{index:04}", spec.seed),
                index,
                problem: one_instance(&mut rng, blocks),
            }
        })
        .collect())
}
