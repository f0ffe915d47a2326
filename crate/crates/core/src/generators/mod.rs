//! Seeded benchmark generators and the Mystery renaming transform.
//!
//! Every instance is a pure function of its spec, the seed and its index
//! within the batch.

mod blocksworld;
mod logistics;
mod minigrid;
mod obfuscate;

use serde::{Deserialize, Serialize};

use crate::pddl::{parse_domain, DomainDef, ProblemDef, BLOCKSWORLD_4OPS, LOGISTICS, MINIGRID};

pub use blocksworld::gen_blocksworld;
pub use logistics::{gen_logistics, LogisticsSize};
pub use minigrid::{gen_minigrid, GridSize};
pub use obfuscate::{obfuscate, ObfuscationError, ObfuscationMap, ObfuscationMode, Obfuscated};

pub const MIN_BLOCKS: usize = 2;
pub const MAX_BLOCKS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "benchmark", rename_all = "snake_case")]
pub enum BenchmarkSpec {
    Blocksworld { blocks: usize },
    Logistics(LogisticsSize),
    Minigrid(GridSize),
}

impl BenchmarkSpec {
    pub fn name(&self) -> &'static str {
        match self {
            BenchmarkSpec::Blocksworld { .. } => "blocksworld",
            BenchmarkSpec::Logistics(_) => "logistics",
            BenchmarkSpec::Minigrid(_) => "minigrid",
        }
    }

    pub fn domain(&self) -> DomainDef {
        let text = match self {
            BenchmarkSpec::Blocksworld { .. } => BLOCKSWORLD_4OPS,
            BenchmarkSpec::Logistics(_) => LOGISTICS,
            BenchmarkSpec::Minigrid(_) => MINIGRID,
        };
        parse_domain(text).expect("bundled domain parses")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    #[serde(flatten)]
    pub benchmark: BenchmarkSpec,
    pub seed: u64,
    pub count: usize,
}

/// A generated problem together with its stable identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub id: String,
    pub index: usize,
    pub problem: ProblemDef,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
}

/// Dispatches on the benchmark kind.
pub fn generate(spec: &GenSpec) -> Result<Vec<Instance>, GenError> {
    match spec.benchmark {
        BenchmarkSpec::Blocksworld { .. } => gen_blocksworld(spec),
        BenchmarkSpec::Logistics(_) => gen_logistics(spec),
        BenchmarkSpec::Minigrid(_) => gen_minigrid(spec),
    }
}

fn wrong_kind(spec: &GenSpec, want: &str) -> GenError {
    GenError::InvalidSpec(format!("expected a {want} spec, got {}", spec.benchmark.name()))
}
