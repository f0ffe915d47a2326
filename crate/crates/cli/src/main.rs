use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use plancritic_core::critics::CriticBackend;
use plancritic_core::dataset::{generate_dataset, load_dataset, obfuscate_dataset};
use plancritic_core::generators::{BenchmarkSpec, GenSpec, GridSize, LogisticsSize, ObfuscationMap};
use plancritic_core::orchestrator::{load_records, run_from_config, RunConfig};
use plancritic_core::planner::PlannerBackend;
use plancritic_core::report::{index_dataset, render_report, score, summary_row, ReportFormat};
use plancritic_core::{bfs_plan, parse_domain, parse_plan, parse_problem, print_plan, validate_plan};
use plancritic_core::{SearchLimits, SearchOutcome};

#[derive(Parser)]
#[command(name = "plancritic", version, about = "Plan validation, benchmark generation and self-critique runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Benchmark {
    Blocksworld,
    Logistics,
    Minigrid,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Easy,
    Hard,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriticArg {
    Oracle,
    Mock,
    Llm,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    /// Always proposes the golden plan.
    MockGolden,
    /// Proposes the golden plan with probability `--p-golden`.
    Mock,
    Llm,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    TableText,
    Csv,
    Json,
}

#[derive(clap::Args)]
struct Limits {
    #[arg(long, default_value_t = 200_000)]
    max_states: usize,
    #[arg(long, default_value_t = 64)]
    max_plan_len: usize,
}

impl Limits {
    fn get(&self) -> Result<SearchLimits, CliError> {
        SearchLimits::new(self.max_states, self.max_plan_len).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate problems, golden plans and a manifest.
    Generate {
        #[arg(long, value_enum)]
        benchmark: Benchmark,
        #[arg(long, default_value_t = 5)]
        blocks: usize,
        #[arg(long, value_enum, default_value = "easy")]
        preset: Preset,
        #[arg(long)]
        cities: Option<usize>,
        #[arg(long)]
        places: Option<usize>,
        #[arg(long)]
        packages: Option<usize>,
        #[arg(long)]
        trucks: Option<usize>,
        #[arg(long)]
        airplanes: Option<usize>,
        #[arg(long, default_value_t = GridSize::DEFAULT.rows)]
        rows: usize,
        #[arg(long, default_value_t = GridSize::DEFAULT.cols)]
        cols: usize,
        #[arg(long, default_value_t = GridSize::DEFAULT.room_size)]
        room_size: usize,
        #[arg(long, default_value_t = GridSize::DEFAULT.keys)]
        keys: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        limits: Limits,
    },
    /// Check a plan and print the step trace and verdict.
    Validate {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Find a shortest plan by breadth-first search.
    Solve {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        limits: Limits,
    },
    /// Rename a dataset's vocabulary.
    Obfuscate {
        #[arg(long)]
        manifest: PathBuf,
        /// `deceptive`, `nonspecific`, `identity` or a JSON map file.
        #[arg(long)]
        map: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the plan / critique loop over a dataset.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long, value_enum)]
        critic: Option<CriticArg>,
        #[arg(long, value_enum)]
        planner: Option<PlannerArg>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        shots: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        p_golden: Option<f64>,
        #[arg(long)]
        fp_rate: Option<f64>,
        #[arg(long)]
        fn_rate: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score run records against the ground truth and print metrics as JSON.
    Score {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a report from run records.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_enum, default_value = "table-text")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Domain(e)
    }
}

fn domain_err<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Domain(e.into())
}

fn require(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{}: no such file or directory", path.display())))
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
            }
            fs::write(p, text).with_context(|| p.display().to_string())?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn gen_spec(cmd: &Command) -> GenSpec {
    let Command::Generate {
        benchmark,
        blocks,
        preset,
        cities,
        places,
        packages,
        trucks,
        airplanes,
        rows,
        cols,
        room_size,
        keys,
        count,
        seed,
        ..
    } = cmd
    else {
        unreachable!("only called for generate")
    };
    let benchmark = match benchmark {
        Benchmark::Blocksworld => BenchmarkSpec::Blocksworld { blocks: *blocks },
        Benchmark::Logistics => {
            let base = match preset {
                Preset::Easy => LogisticsSize::EASY,
                Preset::Hard => LogisticsSize::HARD,
            };
            BenchmarkSpec::Logistics(LogisticsSize {
                cities: cities.unwrap_or(base.cities),
                places_per_city: places.unwrap_or(base.places_per_city),
                packages: packages.unwrap_or(base.packages),
                trucks: trucks.unwrap_or(base.trucks),
                airplanes: airplanes.unwrap_or(base.airplanes),
            })
        }
        Benchmark::Minigrid => {
            BenchmarkSpec::Minigrid(GridSize { rows: *rows, cols: *cols, room_size: *room_size, keys: *keys })
        }
    };
    GenSpec { benchmark, seed: *seed, count: *count }
}

fn load_map(arg: &str, manifest: &Path) -> Result<ObfuscationMap, CliError> {
    match arg {
        "deceptive" => Ok(ObfuscationMap::deceptive()),
        "identity" | "nonspecific" => {
            let ds = load_dataset(manifest).map_err(domain_err)?;
            let first = ds.items.first().ok_or_else(|| CliError::Domain(anyhow!("dataset is empty")))?;
            Ok(if arg == "identity" {
                ObfuscationMap::identity(&first.domain)
            } else {
                let problems: Vec<_> = ds.items.iter().map(|i| i.problem.clone()).collect();
                ObfuscationMap::nonspecific(&first.domain, &problems)
            })
        }
        path => {
            let text = read_input(Path::new(path))?;
            serde_json::from_str(&text).with_context(|| format!("{path}: bad obfuscation map")).map_err(CliError::Domain)
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        cmd @ Command::Generate { out, limits, .. } => {
            let spec = gen_spec(cmd);
            let entries = generate_dataset(&spec, out, limits.get()?).map_err(|e| match e {
                plancritic_core::dataset::DatasetError::Gen(g) => CliError::Usage(g.to_string()),
                other => domain_err(other),
            })?;
            let solved = entries.iter().filter(|e| e.plan.is_some()).count();
            eprintln!("wrote {} problems ({solved} with golden plans) to {}", entries.len(), out.display());
        }
        Command::Validate { domain, problem, plan, json } => {
            let (dt, pt, lt) = (read_input(domain)?, read_input(problem)?, read_input(plan)?);
            let d = parse_domain(&dt).with_context(|| domain.display().to_string())?;
            let p = parse_problem(&pt, &d).with_context(|| problem.display().to_string())?;
            let l = parse_plan(&lt, &d).with_context(|| plan.display().to_string())?;
            let v = validate_plan(&p, &l, &d).map_err(domain_err)?;
            if *json {
                println!("{}", serde_json::to_string_pretty(&v).map_err(domain_err)?);
            } else {
                print!("{}", v.trace_text());
            }
        }
        Command::Solve { domain, problem, limits } => {
            let (dt, pt) = (read_input(domain)?, read_input(problem)?);
            let d = parse_domain(&dt).with_context(|| domain.display().to_string())?;
            let p = parse_problem(&pt, &d).with_context(|| problem.display().to_string())?;
            match bfs_plan(&d, &p, limits.get()?) {
                SearchOutcome::Found(plan) => print!("{}", print_plan(&plan)),
                SearchOutcome::NoPlanFound => return Err(CliError::Domain(anyhow!("no plan found"))),
                SearchOutcome::LimitExceeded => return Err(CliError::Domain(anyhow!("search limit exceeded"))),
            }
        }
        Command::Obfuscate { manifest, map, out } => {
            require(manifest)?;
            let m = load_map(map, manifest)?;
            let ds = load_dataset(manifest).map_err(domain_err)?;
            let entries = obfuscate_dataset(&ds, &m, out).map_err(domain_err)?;
            eprintln!("wrote {} renamed problems to {}", entries.len(), out.display());
        }
        Command::Run {
            config,
            manifest,
            records,
            parallelism,
            critic,
            planner,
            k,
            shots,
            samples,
            p_golden,
            fp_rate,
            fn_rate,
            seed,
        } => {
            let mut cfg = match config {
                Some(path) => {
                    let mut c = RunConfig::from_toml(&read_input(path)?).map_err(|e| CliError::Usage(e.to_string()))?;
                    c.rebase(path.parent().unwrap_or(Path::new("")));
                    c
                }
                None => RunConfig::default(),
            };
            if let Some(m) = manifest {
                cfg.dataset = Some(m.clone());
            }
            if let Some(r) = records {
                cfg.records = Some(r.clone());
            }
            if let Some(p) = parallelism {
                cfg.parallelism = *p;
            }
            if let Some(c) = critic {
                cfg.critic.backend = match c {
                    CriticArg::Oracle => CriticBackend::Oracle,
                    CriticArg::Mock => CriticBackend::Mock,
                    CriticArg::Llm => CriticBackend::Llm,
                };
            }
            match planner {
                Some(PlannerArg::MockGolden) => {
                    cfg.planner.backend = PlannerBackend::Mock;
                    cfg.planner.p_golden = 1.0;
                }
                Some(PlannerArg::Mock) => cfg.planner.backend = PlannerBackend::Mock,
                Some(PlannerArg::Llm) => cfg.planner.backend = PlannerBackend::Llm,
                None => {}
            }
            if let Some(v) = p_golden {
                cfg.planner.p_golden = *v;
            }
            if let Some(v) = k {
                cfg.loop_config.k = *v;
            }
            if let Some(v) = shots {
                cfg.loop_config.shots = *v;
            }
            if let Some(v) = samples {
                cfg.critic.samples = *v;
            }
            if let Some(v) = fp_rate {
                cfg.critic.fp_rate = *v;
            }
            if let Some(v) = fn_rate {
                cfg.critic.fn_rate = *v;
            }
            if let Some(v) = seed {
                cfg.planner.seed = *v;
                cfg.critic.seed = *v;
                cfg.loop_config.fewshot_seed = *v;
            }
            let dataset = cfg.dataset.clone().ok_or_else(|| CliError::Usage("no dataset: pass --manifest".into()))?;
            require(&dataset)?;
            let records = run_from_config(&cfg).map_err(domain_err)?;
            let correct = records.iter().filter(|r| r.final_correct()).count();
            eprintln!("{} problems, {correct} solved", records.len());
        }
        Command::Score { manifest, records, out } => {
            require(manifest)?;
            require(records)?;
            let ds = load_dataset(manifest).map_err(domain_err)?;
            let recs = load_records(records).map_err(domain_err)?;
            let m = score(&recs, &index_dataset(&ds)).map_err(domain_err)?;
            write_output(out.as_deref(), &render_report(&m, ReportFormat::Json))?;
            eprintln!("accuracy {}", summary_row(&m));
        }
        Command::Report { manifest, records, format, out } => {
            require(manifest)?;
            require(records)?;
            let ds = load_dataset(manifest).map_err(domain_err)?;
            let recs = load_records(records).map_err(domain_err)?;
            let m = score(&recs, &index_dataset(&ds)).map_err(domain_err)?;
            let f = match format {
                FormatArg::TableText => ReportFormat::TableText,
                FormatArg::Csv => ReportFormat::Csv,
                FormatArg::Json => ReportFormat::Json,
            };
            write_output(out.as_deref(), &render_report(&m, f))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
