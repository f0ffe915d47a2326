use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::pddl::{Atom, DomainDef, GroundAction, Literal, Plan, ProblemDef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObfuscationMode {
    Deceptive,
    Nonspecific,
    Identity,
}

/// Consistent renaming of a domain's vocabulary.
///
/// `predicates` and `actions` must cover every name of the domain. An empty
/// `objects` map leaves objects unchanged; a non-empty one must cover every
/// object of every problem. `domain` renames the domain name, and
/// `problem_prefix` rewrites a leading prefix of problem names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObfuscationMap {
    pub mode: ObfuscationMode,
    #[serde(default)]
    pub domain: Option<(String, String)>,
    #[serde(default)]
    pub problem_prefix: Option<(String, String)>,
    #[serde(default)]
    pub predicates: BTreeMap<String, String>,
    #[serde(default)]
    pub actions: BTreeMap<String, String>,
    #[serde(default)]
    pub objects: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ObfuscationError {
    #[error("{kind} `{name}` has no rename")]
    IncompleteMap { kind: &'static str, name: String },
    #[error("{kind} renames collide on `{name}`")]
    CollidingMap { kind: &'static str, name: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Obfuscated {
    pub domain: DomainDef,
    pub problems: Vec<ProblemDef>,
    pub plans: Option<Vec<Plan>>,
}

const DECEPTIVE_ACTIONS: [(&str, &str); 4] =
    [("pick-up", "attack"), ("put-down", "succumb"), ("stack", "overcome"), ("unstack", "feast")];
const DECEPTIVE_PREDICATES: [(&str, &str); 5] = [
    ("clear", "province"),
    ("ontable", "planet"),
    ("handempty", "harmony"),
    ("holding", "pain"),
    ("on", "craves"),
];

fn owned(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

impl ObfuscationMap {
    /// The Mystery Blocksworld vocabulary for `blocksworld-4ops`.
    pub fn deceptive() -> Self {
        ObfuscationMap {
            mode: ObfuscationMode::Deceptive,
            domain: Some(("blocksworld-4ops".into(), "mystery-4ops".into())),
            problem_prefix: Some(("BW-".into(), "MY-".into())),
            predicates: owned(&DECEPTIVE_PREDICATES),
            actions: owned(&DECEPTIVE_ACTIONS),
            objects: BTreeMap::new(),
        }
    }

    /// Numbered placeholder names (`predicate-1`, `action-1`, `object-1`, ...)
    /// in declaration order.
    pub fn nonspecific(domain: &DomainDef, problems: &[ProblemDef]) -> Self {
        let predicates =
            domain.predicates.iter().enumerate().map(|(i, p)| (p.name.clone(), format!("predicate-{}", i + 1)));
        let actions = domain.actions.iter().enumerate().map(|(i, a)| (a.name.clone(), format!("action-{}", i + 1)));
        let mut objects = BTreeMap::new();
        for o in problems.iter().flat_map(|p| &p.objects) {
            let next = objects.len() + 1;
            objects.entry(o.clone()).or_insert_with(|| format!("object-{next}"));
        }
        ObfuscationMap {
            mode: ObfuscationMode::Nonspecific,
            domain: Some((domain.name.clone(), format!("{}-nonspecific", domain.name))),
            problem_prefix: None,
            predicates: predicates.collect(),
            actions: actions.collect(),
            objects,
        }
    }

    pub fn identity(domain: &DomainDef) -> Self {
        ObfuscationMap {
            mode: ObfuscationMode::Identity,
            domain: None,
            problem_prefix: None,
            predicates: domain.predicates.iter().map(|p| (p.name.clone(), p.name.clone())).collect(),
            actions: domain.actions.iter().map(|a| (a.name.clone(), a.name.clone())).collect(),
            objects: BTreeMap::new(),
        }
    }

    pub fn inverse(&self) -> Self {
        let flip = |m: &BTreeMap<String, String>| m.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
        let swap = |p: &Option<(String, String)>| p.as_ref().map(|(a, b)| (b.clone(), a.clone()));
        ObfuscationMap {
            mode: self.mode,
            domain: swap(&self.domain),
            problem_prefix: swap(&self.problem_prefix),
            predicates: flip(&self.predicates),
            actions: flip(&self.actions),
            objects: flip(&self.objects),
        }
    }

    fn check(&self, domain: &DomainDef, problems: &[ProblemDef]) -> Result<(), ObfuscationError> {
        fn injective(kind: &'static str, m: &BTreeMap<String, String>) -> Result<(), ObfuscationError> {
            let mut seen = BTreeSet::new();
            for v in m.values() {
                if !seen.insert(v) {
                    return Err(ObfuscationError::CollidingMap { kind, name: v.clone() });
                }
            }
            Ok(())
        }
        fn total<'a>(
            kind: &'static str,
            m: &BTreeMap<String, String>,
            names: impl IntoIterator<Item = &'a String>,
        ) -> Result<(), ObfuscationError> {
            for n in names {
                if !m.contains_key(n) {
                    return Err(ObfuscationError::IncompleteMap { kind, name: n.clone() });
                }
            }
            Ok(())
        }
        total("predicate", &self.predicates, domain.predicates.iter().map(|p| &p.name))?;
        total("action", &self.actions, domain.actions.iter().map(|a| &a.name))?;
        if !self.objects.is_empty() {
            total("object", &self.objects, problems.iter().flat_map(|p| &p.objects))?;
        }
        injective("predicate", &self.predicates)?;
        injective("action", &self.actions)?;
        injective("object", &self.objects)
    }

    fn object<'a>(&'a self, name: &'a str) -> &'a str {
        self.objects.get(name).map(String::as_str).unwrap_or(name)
    }

    fn atom(&self, a: &Atom, objects: bool) -> Atom {
        let args = a.args.iter().map(|x| if objects { self.object(x).to_string() } else { x.clone() });
        Atom { predicate: self.predicates[&a.predicate].clone(), args: args.collect() }
    }

    fn domain_name(&self, name: &str) -> String {
        match &self.domain {
            Some((from, to)) if from == name => to.clone(),
            _ => name.to_string(),
        }
    }

    fn rename_domain(&self, d: &DomainDef) -> DomainDef {
        let mut out = d.clone();
        out.name = self.domain_name(&d.name);
        for p in &mut out.predicates {
            p.name = self.predicates[&p.name].clone();
        }
        for a in &mut out.actions {
            a.name = self.actions[&a.name].clone();
            a.precondition = a.precondition.iter().map(|x| self.atom(x, false)).collect();
            a.effect = a
                .effect
                .iter()
                .map(|l| Literal { atom: self.atom(&l.atom, false), positive: l.positive })
                .collect();
        }
        out
    }

    fn rename_problem(&self, p: &ProblemDef) -> ProblemDef {
        let name = match &self.problem_prefix {
            Some((from, to)) if p.name.starts_with(from.as_str()) => format!("{to}{}", &p.name[from.len()..]),
            _ => p.name.clone(),
        };
        ProblemDef {
            name,
            domain: self.domain_name(&p.domain),
            objects: p.objects.iter().map(|o| self.object(o).to_string()).collect(),
            init: p.init.iter().map(|a| self.atom(a, true)).collect(),
            goal: p.goal.iter().map(|a| self.atom(a, true)).collect(),
        }
    }

    /// Unknown action names pass through unchanged so that invalid plans keep
    /// failing the same way after renaming.
    fn rename_plan(&self, plan: &Plan) -> Plan {
        Plan::new(
            plan.steps
                .iter()
                .map(|s| GroundAction {
                    name: self.actions.get(&s.name).cloned().unwrap_or_else(|| s.name.clone()),
                    args: s.args.iter().map(|x| self.object(x).to_string()).collect(),
                })
                .collect(),
        )
    }
}

/// Renames a domain together with its problems and, optionally, plans.
pub fn obfuscate(
    domain: &DomainDef,
    problems: &[ProblemDef],
    plans: Option<&[Plan]>,
    map: &ObfuscationMap,
) -> Result<Obfuscated, ObfuscationError> {
    map.check(domain, problems)?;
    Ok(Obfuscated {
        domain: map.rename_domain(domain),
        problems: problems.iter().map(|p| map.rename_problem(p)).collect(),
        plans: plans.map(|ps| ps.iter().map(|p| map.rename_plan(p)).collect()),
    })
}
