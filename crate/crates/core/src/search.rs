//! Brute-force breadth-first planner over the grounded state space.
//!
//! This module compiles the task to integer atoms and bit-set states and
//! shares no transition code with [`crate::semantics`], so the two can be
//! checked against each other.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::pddl::{Atom, DomainDef, GroundAction, Plan, ProblemDef};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    max_states: usize,
    max_plan_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("search limits must be strictly positive")]
pub struct InvalidLimits;

impl SearchLimits {
    pub fn new(max_states: usize, max_plan_len: usize) -> Result<Self, InvalidLimits> {
        if max_states == 0 || max_plan_len == 0 {
            return Err(InvalidLimits);
        }
        Ok(SearchLimits { max_states, max_plan_len })
    }

    pub fn max_states(&self) -> usize {
        self.max_states
    }

    pub fn max_plan_len(&self) -> usize {
        self.max_plan_len
    }
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_states: 200_000, max_plan_len: 64 }
    }
}

/// Grounding options. Distinct arguments are required by default so that
/// degenerate instances such as `(stack b1 b1)` are never generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grounding {
    pub distinct_args: bool,
}

impl Default for Grounding {
    fn default() -> Self {
        Grounding { distinct_args: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Found(Plan),
    /// The reachable state space was exhausted without reaching the goal.
    NoPlanFound,
    /// A state or depth budget ran out before the search could conclude.
    LimitExceeded,
}

/// All substitutions of each schema's parameters by declared objects, in
/// schema order and then lexicographic object-index order.
pub fn ground_actions(domain: &DomainDef, problem: &ProblemDef) -> Vec<GroundAction> {
    ground_actions_with(domain, problem, Grounding::default())
}

pub fn ground_actions_with(domain: &DomainDef, problem: &ProblemDef, opts: Grounding) -> Vec<GroundAction> {
    let objs = &problem.objects;
    let mut out = Vec::new();
    if objs.is_empty() {
        // Zero-parameter schemas still have one instance, but an empty
        // universe grounds nothing else.
        for a in domain.actions.iter().filter(|a| a.parameters.is_empty()) {
            out.push(GroundAction { name: a.name.clone(), args: Vec::new() });
        }
        return out;
    }
    for schema in &domain.actions {
        let n = schema.parameters.len();
        let mut idx = vec![0usize; n];
        'odometer: loop {
            let distinct_ok = !opts.distinct_args || {
                let mut seen = HashSet::with_capacity(n);
                idx.iter().all(|i| seen.insert(*i))
            };
            if distinct_ok {
                out.push(GroundAction {
                    name: schema.name.clone(),
                    args: idx.iter().map(|&i| objs[i].clone()).collect(),
                });
            }
            // last position turns fastest
            let mut pos = n;
            loop {
                if pos == 0 {
                    break 'odometer;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < objs.len() {
                    continue 'odometer;
                }
                idx[pos] = 0;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Bits(Vec<u64>);

impl Bits {
    fn zeros(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64).max(1)])
    }

    fn get(&self, i: u32) -> bool {
        self.0[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    fn set(&mut self, i: u32, v: bool) {
        let w = &mut self.0[(i / 64) as usize];
        if v {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }
}

#[derive(Debug, Clone)]
struct Op {
    pre: Vec<u32>,
    add: Vec<u32>,
    del: Vec<u32>,
}

/// Integer compilation of one task. Atoms are interned on demand.
struct Compiled<'a> {
    domain: &'a DomainDef,
    atoms: HashMap<Atom, u32>,
}

impl<'a> Compiled<'a> {
    fn new(domain: &'a DomainDef) -> Self {
        Compiled { domain, atoms: HashMap::new() }
    }

    fn intern(&mut self, atom: Atom) -> u32 {
        let next = self.atoms.len() as u32;
        *self.atoms.entry(atom).or_insert(next)
    }

    /// Compiles one ground action; `None` if the name or arity is wrong.
    fn op(&mut self, action: &GroundAction) -> Option<Op> {
        let schema = self.domain.actions.iter().find(|a| a.name == action.name)?;
        if schema.parameters.len() != action.args.len() {
            return None;
        }
        let ground = |a: &Atom| Atom {
            predicate: a.predicate.clone(),
            args: a
                .args
                .iter()
                .map(|t| {
                    let k = schema.parameters.iter().position(|p| p == t).expect("bound variable");
                    action.args[k].clone()
                })
                .collect(),
        };
        let pre = schema.precondition.iter().map(|a| self.intern(ground(a))).collect();
        let mut add = Vec::new();
        let mut del = Vec::new();
        for l in &schema.effect {
            let id = self.intern(ground(&l.atom));
            if l.positive {
                add.push(id);
            } else {
                del.push(id);
            }
        }
        Some(Op { pre, add, del })
    }

    fn state(&mut self, atoms: &[Atom], width: usize) -> Bits {
        let mut b = Bits::zeros(width);
        for a in atoms {
            let id = self.intern(a.clone());
            b.set(id, true);
        }
        b
    }
}

fn applicable(op: &Op, s: &Bits) -> bool {
    op.pre.iter().all(|&p| s.get(p))
}

fn successor(op: &Op, s: &Bits) -> Bits {
    let mut n = s.clone();
    for &d in &op.del {
        n.set(d, false);
    }
    for &a in &op.add {
        n.set(a, true);
    }
    n
}

/// Result of executing a plan with the brute-force executor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Accepted,
    /// 1-based index of the first step that could not be executed,
    /// including steps naming unknown actions.
    FailedAt(usize),
    GoalUnmet,
}

/// Executes `plan` on the integer model.
pub fn execute(domain: &DomainDef, problem: &ProblemDef, plan: &Plan) -> Execution {
    let mut c = Compiled::new(domain);
    let mut ops = Vec::with_capacity(plan.len());
    for step in &plan.steps {
        ops.push(c.op(step));
    }
    for g in &problem.goal {
        c.intern(g.clone());
    }
    for a in &problem.init {
        c.intern(a.clone());
    }
    let width = c.atoms.len();
    let mut s = c.state(&problem.init, width);
    let goal = c.state(&problem.goal, width);
    for (i, op) in ops.iter().enumerate() {
        match op {
            Some(op) if applicable(op, &s) => s = successor(op, &s),
            _ => return Execution::FailedAt(i + 1),
        }
    }
    if goal.0.iter().zip(&s.0).all(|(g, s)| g & s == *g) {
        Execution::Accepted
    } else {
        Execution::GoalUnmet
    }
}

/// Shortest plan by breadth-first search. Among equally short plans, the
/// one whose action sequence comes first in canonical grounding order wins.
pub fn bfs_plan(domain: &DomainDef, problem: &ProblemDef, limits: SearchLimits) -> SearchOutcome {
    let mut c = Compiled::new(domain);
    let ground = ground_actions(domain, problem);
    for a in problem.init.iter().chain(&problem.goal) {
        c.intern(a.clone());
    }
    let mut ops: Vec<(usize, Op)> = Vec::with_capacity(ground.len());
    for (i, g) in ground.iter().enumerate() {
        if let Some(op) = c.op(g) {
            ops.push((i, op));
        }
    }

    // Predicates no action ever changes are static; drop ops whose static
    // preconditions are false initially.
    let mut fluent_preds: HashSet<&str> = HashSet::new();
    for a in &domain.actions {
        for l in &a.effect {
            fluent_preds.insert(&l.atom.predicate);
        }
    }
    let init_set: HashSet<&Atom> = problem.init.iter().collect();
    let by_id: HashMap<u32, &Atom> = c.atoms.iter().map(|(a, &i)| (i, a)).collect();
    ops.retain(|(_, op)| {
        op.pre.iter().all(|p| {
            let a = by_id[p];
            fluent_preds.contains(a.predicate.as_str()) || init_set.contains(a)
        })
    });

    let width = c.atoms.len();
    let init = c.state(&problem.init, width);
    let goal = c.state(&problem.goal, width);
    let is_goal = |s: &Bits| goal.0.iter().zip(&s.0).all(|(g, s)| g & s == *g);

    if is_goal(&init) {
        return SearchOutcome::Found(Plan::default());
    }

    // parent pointers: state index -> (parent index, ground action index)
    let mut states: Vec<Bits> = vec![init.clone()];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None];
    let mut depth: Vec<usize> = vec![0];
    let mut seen: HashMap<Bits, usize> = HashMap::from([(init, 0)]);
    let mut queue = VecDeque::from([0usize]);
    let mut expanded = 0usize;
    let mut truncated = false;

    while let Some(cur) = queue.pop_front() {
        if depth[cur] >= limits.max_plan_len {
            truncated = true;
            continue;
        }
        if expanded >= limits.max_states {
            return SearchOutcome::LimitExceeded;
        }
        expanded += 1;
        for (gi, op) in &ops {
            if !applicable(op, &states[cur]) {
                continue;
            }
            let next = successor(op, &states[cur]);
            if seen.contains_key(&next) {
                continue;
            }
            let id = states.len();
            let done = is_goal(&next);
            seen.insert(next.clone(), id);
            states.push(next);
            parent.push(Some((cur, *gi)));
            depth.push(depth[cur] + 1);
            if done {
                let mut steps = Vec::new();
                let mut at = id;
                while let Some((p, g)) = parent[at] {
                    steps.push(ground[g].clone());
                    at = p;
                }
                steps.reverse();
                return SearchOutcome::Found(Plan::new(steps));
            }
            queue.push_back(id);
        }
    }
    if truncated {
        SearchOutcome::LimitExceeded
    } else {
        SearchOutcome::NoPlanFound
    }
}
