//! On-disk datasets: a directory with `domain.pddl`, `problems/<id>.pddl`,
//! optional `plans/<id>.plan` golden plans and a `manifest.jsonl` index.
//! Paths inside the manifest are relative to the manifest's directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::generators::{self, GenError, GenSpec, ObfuscationError, ObfuscationMap};
use crate::pddl::{
    parse_domain, parse_plan, parse_problem, print_domain, print_plan, print_problem, DomainDef, PddlError, Plan,
    ProblemDef,
};
use crate::search::{bfs_plan, SearchLimits, SearchOutcome};

pub const MANIFEST: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub benchmark: String,
    pub seed: u64,
    pub index: usize,
    pub spec: GenSpec,
    pub domain: String,
    pub problem: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Pddl { path: PathBuf, source: PddlError },
    #[error("{path}:{line}: bad manifest record: {message}")]
    Manifest { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Obfuscation(#[from] ObfuscationError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

fn read(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, text: &str) -> Result<(), DatasetError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

/// One loaded manifest record.
#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub entry: ManifestEntry,
    pub domain: Arc<DomainDef>,
    pub problem: ProblemDef,
    pub golden: Option<Plan>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub items: Vec<DatasetItem>,
}

impl Dataset {
    pub fn get(&self, id: &str) -> Option<&DatasetItem> {
        self.items.iter().find(|i| i.entry.id == id)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Generates instances for `spec`, solves each with the BFS oracle and
/// writes the dataset under `dir`. Instances the oracle cannot solve within
/// `limits` are written without a golden plan.
pub fn generate_dataset(spec: &GenSpec, dir: &Path, limits: SearchLimits) -> Result<Vec<ManifestEntry>, DatasetError> {
    let domain = spec.benchmark.domain();
    let instances = generators::generate(spec)?;
    let problems: Vec<ProblemDef> = instances.iter().map(|i| i.problem.clone()).collect();
    let plans: Vec<Option<Plan>> = problems
        .iter()
        .zip(&instances)
        .map(|(p, inst)| match bfs_plan(&domain, p, limits) {
            SearchOutcome::Found(plan) => Some(plan),
            other => {
                log::warn!("{}: no golden plan ({other:?})", inst.id);
                None
            }
        })
        .collect();
    let ids: Vec<String> = instances.iter().map(|i| i.id.clone()).collect();
    let meta: Vec<(u64, usize)> = instances.iter().map(|i| (spec.seed, i.index)).collect();
    write_dataset(dir, spec, &domain, &ids, &meta, &problems, &plans)
}

fn write_dataset(
    dir: &Path,
    spec: &GenSpec,
    domain: &DomainDef,
    ids: &[String],
    meta: &[(u64, usize)],
    problems: &[ProblemDef],
    plans: &[Option<Plan>],
) -> Result<Vec<ManifestEntry>, DatasetError> {
    write(&dir.join("domain.pddl"), &print_domain(domain))?;
    let mut entries = Vec::new();
    let mut manifest = String::new();
    for (((id, &(seed, index)), problem), plan) in ids.iter().zip(meta).zip(problems).zip(plans) {
        let problem_rel = format!("problems/{id}.pddl");
        write(&dir.join(&problem_rel), &print_problem(problem))?;
        let plan_rel = match plan {
            Some(plan) => {
                let rel = format!("plans/{id}.plan");
                write(&dir.join(&rel), &print_plan(plan))?;
                Some(rel)
            }
            None => None,
        };
        let entry = ManifestEntry {
            id: id.clone(),
            benchmark: spec.benchmark.name().to_string(),
            seed,
            index,
            spec: spec.clone(),
            domain: "domain.pddl".into(),
            problem: problem_rel,
            plan: plan_rel,
        };
        manifest.push_str(&serde_json::to_string(&entry).expect("manifest entries serialize"));
        manifest.push('\n');
        entries.push(entry);
    }
    write(&dir.join(MANIFEST), &manifest)?;
    Ok(entries)
}

/// Accepts either a manifest file or a directory containing one.
pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let manifest = if path.is_dir() { path.join(MANIFEST) } else { path.to_path_buf() };
    let root = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let text = read(&manifest)?;
    let mut domains: BTreeMap<String, Arc<DomainDef>> = BTreeMap::new();
    let mut items = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| DatasetError::Manifest {
            path: manifest.clone(),
            line: n + 1,
            message: e.to_string(),
        })?;
        let domain = match domains.get(&entry.domain) {
            Some(d) => d.clone(),
            None => {
                let p = root.join(&entry.domain);
                let d = Arc::new(parse_domain(&read(&p)?).map_err(|source| DatasetError::Pddl { path: p, source })?);
                domains.insert(entry.domain.clone(), d.clone());
                d
            }
        };
        let p = root.join(&entry.problem);
        let problem = parse_problem(&read(&p)?, &domain).map_err(|source| DatasetError::Pddl { path: p, source })?;
        let golden = match &entry.plan {
            Some(rel) => {
                let p = root.join(rel);
                Some(parse_plan(&read(&p)?, &domain).map_err(|source| DatasetError::Pddl { path: p, source })?)
            }
            None => None,
        };
        items.push(DatasetItem { entry, domain, problem, golden });
    }
    Ok(Dataset { root, items })
}

/// Writes a renamed copy of a single-domain dataset to `dir`.
pub fn obfuscate_dataset(ds: &Dataset, map: &ObfuscationMap, dir: &Path) -> Result<Vec<ManifestEntry>, DatasetError> {
    let Some(first) = ds.items.first() else {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write(&dir.join(MANIFEST), "")?;
        return Ok(Vec::new());
    };
    let domain = &first.domain;
    let problems: Vec<ProblemDef> = ds.items.iter().map(|i| i.problem.clone()).collect();
    let plans: Vec<Plan> = ds.items.iter().map(|i| i.golden.clone().unwrap_or_default()).collect();
    let out = generators::obfuscate(domain, &problems, Some(&plans), map)?;
    let renamed_plans = out.plans.expect("plans were supplied");
    write(&dir.join("domain.pddl"), &print_domain(&out.domain))?;
    let mut manifest = String::new();
    let mut entries = Vec::new();
    for ((item, problem), plan) in ds.items.iter().zip(&out.problems).zip(renamed_plans) {
        let mut entry = item.entry.clone();
        entry.domain = "domain.pddl".into();
        write(&dir.join(&entry.problem), &print_problem(problem))?;
        if item.golden.is_some() {
            let rel = entry.plan.clone().unwrap_or_else(|| format!("plans/{}.plan", entry.id));
            write(&dir.join(&rel), &print_plan(&plan))?;
            entry.plan = Some(rel);
        }
        manifest.push_str(&serde_json::to_string(&entry).expect("manifest entries serialize"));
        manifest.push('\n');
        entries.push(entry);
    }
    write(&dir.join(MANIFEST), &manifest)?;
    Ok(entries)
}

/// Appends one JSON record per line, creating the file if needed.
pub fn append_jsonl<T: Serialize>(file: &mut fs::File, value: &T) -> std::io::Result<()> {
    let mut line = serde_json::to_string(value).map_err(std::io::Error::other)?;
    line.push('\n');
    file.write_all(line.as_bytes())?;
    file.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::BenchmarkSpec;
    use crate::semantics::validate_plan;

    #[test]
    fn generated_dataset_loads_back() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GenSpec { benchmark: BenchmarkSpec::Blocksworld { blocks: 3 }, seed: 2, count: 4 };
        let entries = generate_dataset(&spec, dir.path(), SearchLimits::default()).unwrap();
        assert_eq!(entries.len(), 4);
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.len(), 4);
        for item in &ds.items {
            let plan = item.golden.as_ref().unwrap();
            assert!(validate_plan(&item.problem, plan, &item.domain).unwrap().verdict.is_correct());
        }
    }

    #[test]
    fn obfuscated_dataset_keeps_verdicts() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GenSpec { benchmark: BenchmarkSpec::Blocksworld { blocks: 3 }, seed: 2, count: 3 };
        generate_dataset(&spec, &dir.path().join("bw"), SearchLimits::default()).unwrap();
        let ds = load_dataset(&dir.path().join("bw")).unwrap();
        obfuscate_dataset(&ds, &ObfuscationMap::deceptive(), &dir.path().join("my")).unwrap();
        let my = load_dataset(&dir.path().join("my")).unwrap();
        assert_eq!(my.items[0].domain.name, "mystery-4ops");
        assert!(my.items[0].problem.name.starts_with("MY-"));
        for item in &my.items {
            let plan = item.golden.as_ref().unwrap();
            assert!(validate_plan(&item.problem, plan, &item.domain).unwrap().verdict.is_correct());
        }
    }

    #[test]
    fn manifest_errors_carry_line() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(MANIFEST), "\n{oops}\n").unwrap();
        match load_dataset(dir.path()) {
            Err(DatasetError::Manifest { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
