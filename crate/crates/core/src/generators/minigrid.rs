//! Mini-Grid encoding.
//!
//! The grid is `rows x cols` square rooms of `room_size x room_size` cells.
//! Cells are objects named `cell-Y-X`. Orthogonally adjacent cells inside a
//! room are joined by `conn` in both directions. Each pair of adjacent rooms
//! shares one doorway at a random offset along their common wall. `keys` of
//! those doorways are locked: `(locked a b)` and `(locked b a)` replace the
//! two `conn` facts, and the key `keyI` that opens it gets `(opens keyI a b)`
//! and `(opens keyI b a)`. The robot starts with a free hand at a random cell
//! and the goal is `(at-robot target)`.
//!
//! Keys are placed so the instance is always solvable: with the locked doors
//! ordered d1..dm, key i lies in the area the robot reaches once d1..d(i-1)
//! are open, and d(i) borders that area.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{wrong_kind, BenchmarkSpec, GenError, GenSpec, Instance};
use crate::pddl::{Atom, ProblemDef};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSize {
    pub rows: usize,
    pub cols: usize,
    pub room_size: usize,
    pub keys: usize,
}

impl GridSize {
    pub const DEFAULT: GridSize = GridSize { rows: 2, cols: 2, room_size: 2, keys: 1 };

    fn doorway_count(&self) -> usize {
        self.rows * (self.cols - 1) + (self.rows - 1) * self.cols
    }
}

type Cell = (usize, usize);

fn cell_name((y, x): Cell) -> String {
    format!("cell-{y}-{x}")
}

struct Layout {
    width: usize,
    height: usize,
    open: BTreeSet<(Cell, Cell)>,
    doors: Vec<(Cell, Cell)>,
}

impl Layout {
    fn build(rng: &mut ChaCha8Rng, g: &GridSize) -> Layout {
        let s = g.room_size;
        let mut open = BTreeSet::new();
        let mut link = |a: Cell, b: Cell| {
            open.insert((a, b));
            open.insert((b, a));
        };
        for ry in 0..g.rows {
            for rx in 0..g.cols {
                for dy in 0..s {
                    for dx in 0..s {
                        let c = (ry * s + dy, rx * s + dx);
                        if dx + 1 < s {
                            link(c, (c.0, c.1 + 1));
                        }
                        if dy + 1 < s {
                            link(c, (c.0 + 1, c.1));
                        }
                    }
                }
            }
        }
        let mut doors = Vec::new();
        for ry in 0..g.rows {
            for rx in 0..g.cols {
                if rx + 1 < g.cols {
                    let y = ry * s + rng.random_range(0..s);
                    let x = rx * s + s - 1;
                    doors.push(((y, x), (y, x + 1)));
                }
                if ry + 1 < g.rows {
                    let x = rx * s + rng.random_range(0..s);
                    let y = ry * s + s - 1;
                    doors.push(((y, x), (y + 1, x)));
                }
            }
        }
        Layout { width: g.cols * s, height: g.rows * s, open, doors }
    }

    fn cells(&self) -> Vec<Cell> {
        (0..self.height).flat_map(|y| (0..self.width).map(move |x| (y, x))).collect()
    }

    fn reachable(&self, from: Cell, extra: &BTreeSet<(Cell, Cell)>) -> BTreeSet<Cell> {
        let mut seen = BTreeSet::from([from]);
        let mut queue = VecDeque::from([from]);
        while let Some(c) = queue.pop_front() {
            let nexts = self
                .open
                .range((c, (0, 0))..=(c, (usize::MAX, usize::MAX)))
                .chain(extra.range((c, (0, 0))..=(c, (usize::MAX, usize::MAX))))
                .map(|&(_, n)| n);
            for n in nexts.collect::<Vec<_>>() {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen
    }
}

fn one_instance(rng: &mut ChaCha8Rng, g: &GridSize, id: &str) -> ProblemDef {
    let mut layout = Layout::build(rng, g);
    let cells = layout.cells();
    let start = *cells.choose(rng).expect("grid has cells");
    let target = *cells.choose(rng).expect("grid has cells");

    let mut locked: Vec<(Cell, Cell)> = layout.doors.clone();
    locked.shuffle(rng);
    locked.truncate(g.keys);
    let unlocked: Vec<_> = layout.doors.iter().filter(|d| !locked.contains(d)).copied().collect();
    for (a, b) in unlocked {
        layout.open.insert((a, b));
        layout.open.insert((b, a));
    }

    // order locked doors so each borders the area opened so far
    let mut pending = locked;
    let mut opened = BTreeSet::new();
    let mut ordered: Vec<((Cell, Cell), Cell)> = Vec::new();
    while !pending.is_empty() {
        let area = layout.reachable(start, &opened);
        let frontier: Vec<usize> = (0..pending.len())
            .filter(|&i| area.contains(&pending[i].0) || area.contains(&pending[i].1))
            .collect();
        let pick = *frontier.choose(rng).expect("a locked door borders the reachable area");
        let door = pending.remove(pick);
        let area: Vec<Cell> = area.into_iter().collect();
        let key_cell = *area.choose(rng).expect("area contains the start");
        ordered.push((door, key_cell));
        opened.insert((door.0, door.1));
        opened.insert((door.1, door.0));
    }

    let mut objects: Vec<String> = cells.iter().map(|&c| cell_name(c)).collect();
    let keys: Vec<String> = (1..=ordered.len()).map(|i| format!("key{i}")).collect();
    objects.extend(keys.iter().cloned());

    let mut init = Vec::new();
    for &(a, b) in &layout.open {
        init.push(Atom::new("conn", [cell_name(a), cell_name(b)]));
    }
    for (key, &((a, b), key_cell)) in keys.iter().zip(&ordered) {
        let (a, b) = (cell_name(a), cell_name(b));
        init.push(Atom::new("locked", [a.clone(), b.clone()]));
        init.push(Atom::new("locked", [b.clone(), a.clone()]));
        init.push(Atom::new("opens", [key.clone(), a.clone(), b.clone()]));
        init.push(Atom::new("opens", [key.clone(), b, a]));
        init.push(Atom::new("at-key", [key.clone(), cell_name(key_cell)]));
    }
    init.push(Atom::new("at-robot", [cell_name(start)]));
    init.push(Atom::new::<_, &str>("handfree", []));

    ProblemDef {
        name: id.to_string(),
        domain: "minigrid".into(),
        objects,
        init,
        goal: vec![Atom::new("at-robot", [cell_name(target)])],
    }
}

/// Grid navigation instances with locked doors and keys.
pub fn gen_minigrid(spec: &GenSpec) -> Result<Vec<Instance>, GenError> {
    let BenchmarkSpec::Minigrid(size) = spec.benchmark else {
        return Err(wrong_kind(spec, "minigrid"));
    };
    if size.rows == 0 || size.cols == 0 || size.room_size == 0 {
        return Err(GenError::InvalidSpec("minigrid dimensions must be positive".into()));
    }
    if size.keys > size.doorway_count() {
        return Err(GenError::InvalidSpec(format!(
            "{} keys but only {} doorways",
            size.keys,
            size.doorway_count()
        )));
    }
    Ok((0..spec.count)
        .map(|index| {
            let id = format!(
                "minigrid-{}x{}-r{}-k{}-s{}-{index:04}",
                size.rows, size.cols, size.room_size, size.keys, spec.seed
            );
            let mut rng = seed::rng(&[
                "minigrid".into(),
                size.rows.into(),
                size.cols.into(),
                size.room_size.into(),
                size.keys.into(),
                spec.seed.into(),
                index.into(),
            ]);
            let problem = one_instance(&mut rng, &size, &id);
            Instance { id, index, problem }
        })
        .collect())
}
