//! Command-line entry point: one subcommand per pipeline phase plus the
//! simulators and the analyzer.
//!
//! Exit codes: 0 success, 2 partial (some problems failed), 3 fatal,
//! 64 usage. Every flag is validated before any side effect, and every
//! output-writing run records a `manifest.json` (resolved config, seed,
//! version, config hash) under the output root first.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Parser, Subcommand};
use serde::Serialize;

use codeprobe_core::consensus::{pass_at_k, select, SelectionConfig};
use codeprobe_core::domain::{
    Candidate, ExecutionOutcome, Problem, QualityScores, SelectionStrategy, SftRecord, TestCase,
};
use codeprobe_core::seed::derive_seed;
use codeprobe_core::theory::{
    min_tests_bound, simulate_consensus, simulate_dynamics, ConsensusSimParams, DynamicsSimParams,
    LiftEstimator, SimReport,
};

use crate::analyze::{analyze_corpus_dir, AnalyzerConfig};
use crate::config::{BackendKind, Config};
use crate::executor::execute_pool;
use crate::genclient::http::HttpTransport;
use crate::genclient::stub::StubSource;
use crate::genclient::templates::StageTemplates;
use crate::genclient::{EndpointClient, GenerationSource};
use crate::ids::config_hash;
use crate::jsonl::{read_jsonl, write_jsonl};
use crate::logging::{self, Verbosity};
use crate::pipeline::{self, build_pool, instruction_text, PipelineConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_FATAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Seed tag separating the held-out validation stream from training data.
const HOLDOUT_TAG: u64 = 0x9d1d;

#[derive(Debug, Parser)]
#[command(
    name = "codeprobe",
    version,
    about = "Execution-driven curation of sampled program candidates",
    subcommand_required = true,
    arg_required_else_help = true
)]
pub struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the configured output root.
    #[arg(long, global = true)]
    pub output_root: Option<PathBuf>,
    /// Override every seed (selection and stub generation).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "normal")]
    pub verbosity: Verbosity,
    /// Emit one JSON object per log line.
    #[arg(long, global = true)]
    pub json_logs: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate problems and write problems.jsonl.
    GenProblems {
        #[arg(long)]
        count: u32,
        #[arg(long, value_enum)]
        backend: Option<BackendKind>,
        #[arg(long, default_value_t = 0)]
        iteration: u32,
    },
    /// Generate test suites for existing problems.
    GenTests {
        #[arg(long)]
        problems: PathBuf,
        #[arg(long)]
        per_problem: Option<u32>,
        #[arg(long, value_enum)]
        backend: Option<BackendKind>,
    },
    /// Sample candidate solutions for existing problems.
    GenSolutions {
        #[arg(long)]
        problems: PathBuf,
        #[arg(long)]
        per_problem: Option<u32>,
        #[arg(long, value_enum)]
        backend: Option<BackendKind>,
    },
    /// Execute every candidate against its problem's tests.
    Execute {
        #[arg(long)]
        problems: PathBuf,
        #[arg(long)]
        tests: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Select one candidate per problem from execution results.
    Select {
        #[arg(long)]
        problems: PathBuf,
        #[arg(long)]
        tests: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        executions: PathBuf,
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        tau: Option<u32>,
        #[arg(long)]
        success_rate_threshold: Option<f64>,
    },
    /// Join problems, candidates, and selections into sft.jsonl.
    BuildSft {
        #[arg(long)]
        problems: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        selections: PathBuf,
        #[arg(long, default_value_t = 0)]
        iteration: u32,
    },
    /// Run the full per-iteration loop with early stopping.
    Iterate {
        /// Cap on iterations (defaults to the configured max).
        #[arg(long)]
        iterations: Option<u32>,
        #[arg(long, value_enum)]
        backend: Option<BackendKind>,
    },
    /// Merge completed iterations into sft-consolidated.jsonl.
    Consolidate {
        /// Comma-separated iteration numbers, e.g. 0,1,2.
        #[arg(long)]
        iterations: String,
        #[arg(long)]
        dedup: bool,
    },
    /// Compute corpus diagnostics and plot-data files.
    Analyze {
        /// Directory containing problems.jsonl and candidates.jsonl.
        #[arg(long)]
        corpus: PathBuf,
        /// Output directory (defaults to <corpus>/analysis).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        analyzer_config: Option<PathBuf>,
    },
    /// Monte Carlo check of the consensus-convergence bound over a grid.
    SimulateTheorem {
        #[arg(long, default_value = "50,100,128")]
        n_list: String,
        #[arg(long, default_value = "5,10,25")]
        k_list: String,
        #[arg(long, default_value = "0.1,0.25,0.5")]
        p_list: String,
        /// Suite sizes as offsets above the theorem's minimum.
        #[arg(long, default_value = "0,2,6")]
        m_offsets: String,
        /// Explicit suite sizes (overrides --m-offsets).
        #[arg(long)]
        m_list: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        trials: u32,
    },
    /// Simulate the iterative quality-lift dynamics.
    SimulateDynamics {
        #[arg(long, default_value_t = 0.5)]
        mean: f64,
        #[arg(long, default_value_t = 2.0)]
        concentration: f64,
        #[arg(long, default_value_t = 10_000)]
        pool_size: u32,
        #[arg(long, default_value_t = 5)]
        iterations: u32,
        /// Number of independent seeded traces.
        #[arg(long, default_value_t = 1)]
        seeds: u32,
    },
    /// Unbiased pass@k estimate from n samples with c correct.
    Passk {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        c: u64,
        #[arg(long)]
        k: u64,
    },
}

#[derive(Debug)]
enum DispatchError {
    Usage(String),
    Fatal(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for DispatchError {
    fn from(e: E) -> Self {
        DispatchError::Fatal(e.into())
    }
}

enum CmdOutcome {
    Clean,
    Partial,
}

/// Parse argv, run, and map the result onto the exit-code contract.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    logging::init(cli.verbosity, cli.json_logs);
    match run(cli) {
        Ok(CmdOutcome::Clean) => EXIT_OK,
        Ok(CmdOutcome::Partial) => EXIT_PARTIAL,
        Err(DispatchError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(DispatchError::Fatal(e)) => {
            log::error!("{e:#}");
            EXIT_FATAL
        }
    }
}

/// Resolve the config file plus global flag overrides.
fn resolve_config(cli: &Cli) -> Result<Config, DispatchError> {
    let mut config = match &cli.config {
        Some(path) => {
            if !path.exists() {
                return Err(DispatchError::Usage(format!(
                    "config {} does not exist",
                    path.display()
                )));
            }
            Config::load(path).map_err(|e| DispatchError::Usage(e.to_string()))?
        }
        None => Config::default(),
    };
    if let Some(root) = &cli.output_root {
        config.pipeline.output_root = root.clone();
    }
    if let Some(seed) = cli.seed {
        config.selection.rng_seed = seed;
        config.generation.stub_seed = seed;
    }
    Ok(config)
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    subcommand: &'a str,
    seed: u64,
    config_hash: String,
    config: &'a Config,
}

/// Record the resolved run parameters before any other side effect.
fn write_manifest(config: &Config, subcommand: &str) -> Result<(), DispatchError> {
    let root = &config.pipeline.output_root;
    std::fs::create_dir_all(root)
        .map_err(|e| anyhow::anyhow!("cannot create output root {}: {e}", root.display()))?;
    let serialized = toml::to_string(config).expect("config serializes");
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        seed: config.selection.rng_seed,
        config_hash: config_hash(serialized.as_bytes()),
        config,
    };
    let path = root.join("manifest.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )
    .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    Ok(())
}

fn make_source(
    config: &Config,
    backend: Option<BackendKind>,
    holdout: bool,
) -> Result<Box<dyn GenerationSource>, DispatchError> {
    let kind = backend.unwrap_or(config.generation.backend);
    match kind {
        BackendKind::Stub => {
            let seed = if holdout {
                derive_seed(config.generation.stub_seed, HOLDOUT_TAG)
            } else {
                config.generation.stub_seed
            };
            Ok(Box::new(StubSource::new(seed)))
        }
        BackendKind::Endpoint => {
            let templates = match &config.generation.templates_dir {
                Some(dir) => StageTemplates::load_dir(dir)
                    .map_err(|e| DispatchError::Usage(e.to_string()))?,
                None => StageTemplates::builtin(),
            };
            let transport = HttpTransport::new(&config.endpoint)
                .map_err(|e| DispatchError::Fatal(anyhow::anyhow!(e.to_string())))?;
            let client = EndpointClient::new(config.endpoint.clone(), templates, transport)
                .map_err(|e| DispatchError::Usage(e.to_string()))?;
            Ok(Box::new(client))
        }
    }
}

fn parse_strategy(text: &str) -> Result<SelectionStrategy, DispatchError> {
    serde_json::from_value(serde_json::Value::String(text.to_string()))
        .map_err(|_| DispatchError::Usage(format!("unknown strategy {text:?}")))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, DispatchError> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| DispatchError::Usage(format!("cannot parse {what} element {s:?}")))
        })
        .collect()
}

fn validated_selection(
    base: SelectionConfig,
    strategy: Option<&str>,
    rho: Option<f64>,
    tau: Option<u32>,
    success_rate_threshold: Option<f64>,
) -> Result<SelectionConfig, DispatchError> {
    let mut cfg = base;
    if let Some(s) = strategy {
        cfg.strategy = parse_strategy(s)?;
    }
    if let Some(rho) = rho {
        cfg.rho = rho;
    }
    if let Some(tau) = tau {
        cfg.tau = tau;
    }
    if let Some(t) = success_rate_threshold {
        cfg.success_rate_threshold = t;
    }
    cfg.validate()
        .map_err(|e| DispatchError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<CmdOutcome, DispatchError> {
    let config = resolve_config(&cli)?;
    match &cli.command {
        Command::Passk { n, c, k } => {
            let value =
                pass_at_k(*n, *c, *k).map_err(|e| DispatchError::Usage(e.to_string()))?;
            println!("{value}");
            Ok(CmdOutcome::Clean)
        }
        Command::GenProblems {
            count,
            backend,
            iteration,
        } => {
            if *count < 1 {
                return Err(DispatchError::Usage("--count must be >= 1".into()));
            }
            let source = make_source(&config, *backend, false)?;
            write_manifest(&config, "gen-problems")?;
            let outcome = source.generate_problems(*count, *iteration)?;
            let path = config.pipeline.output_root.join("problems.jsonl");
            write_jsonl(&path, outcome.items.iter())?;
            log::info!(
                "wrote {} problems to {} ({} malformed dropped, {} failed requests)",
                outcome.items.len(),
                path.display(),
                outcome.report.dropped_malformed,
                outcome.report.failed_requests
            );
            Ok(CmdOutcome::Clean)
        }
        Command::GenTests {
            problems,
            per_problem,
            backend,
        } => {
            let count = per_problem.unwrap_or(config.pipeline.tests_per_problem);
            if count < 1 {
                return Err(DispatchError::Usage("--per-problem must be >= 1".into()));
            }
            let source = make_source(&config, *backend, false)?;
            write_manifest(&config, "gen-tests")?;
            let problems: Vec<Problem> = read_jsonl(problems)?;
            let mut all = Vec::new();
            for problem in &problems {
                let outcome = source.generate_tests(problem, count)?;
                log::info!(
                    "problem {}: {} tests ({} malformed dropped)",
                    problem.id,
                    outcome.items.len(),
                    outcome.report.dropped_malformed
                );
                all.extend(outcome.items);
            }
            let path = config.pipeline.output_root.join("tests.jsonl");
            write_jsonl(&path, all.iter())?;
            log::info!("wrote {} tests to {}", all.len(), path.display());
            Ok(CmdOutcome::Clean)
        }
        Command::GenSolutions {
            problems,
            per_problem,
            backend,
        } => {
            let count = per_problem.unwrap_or(config.pipeline.candidates_per_problem);
            if count < 1 {
                return Err(DispatchError::Usage("--per-problem must be >= 1".into()));
            }
            let source = make_source(&config, *backend, false)?;
            write_manifest(&config, "gen-solutions")?;
            let problems: Vec<Problem> = read_jsonl(problems)?;
            let mut all = Vec::new();
            for problem in &problems {
                let outcome = source.sample_solutions(problem, count)?;
                log::info!(
                    "problem {}: {} candidates ({} absent)",
                    problem.id,
                    outcome.items.len(),
                    outcome.report.failed_requests
                );
                all.extend(outcome.items);
            }
            let path = config.pipeline.output_root.join("candidates.jsonl");
            write_jsonl(&path, all.iter())?;
            log::info!("wrote {} candidates to {}", all.len(), path.display());
            Ok(CmdOutcome::Clean)
        }
        Command::Execute {
            problems,
            tests,
            candidates,
            parallelism,
        } => {
            let parallelism = parallelism.unwrap_or(config.pipeline.parallelism);
            if parallelism < 1 {
                return Err(DispatchError::Usage("--parallelism must be >= 1".into()));
            }
            config
                .sandbox
                .validate()
                .map_err(|e| DispatchError::Usage(e.to_string()))?;
            write_manifest(&config, "execute")?;
            let problems: Vec<Problem> = read_jsonl(problems)?;
            let tests: Vec<TestCase> = read_jsonl(tests)?;
            let candidates: Vec<Candidate> = read_jsonl(candidates)?;
            let report = codeprobe_core::domain::validate_corpus(&problems, &tests, &candidates);
            if !report.is_ok() {
                for v in &report.violations {
                    log::error!("corpus violation: {}", v.message);
                }
                return Err(DispatchError::Fatal(anyhow::anyhow!(
                    "corpus has {} integrity violations",
                    report.violations.len()
                )));
            }
            let mut all = Vec::new();
            for problem in &problems {
                let suite: Vec<TestCase> = tests
                    .iter()
                    .filter(|t| t.problem_id == problem.id)
                    .cloned()
                    .collect();
                let pool: Vec<Candidate> = candidates
                    .iter()
                    .filter(|c| c.problem_id == problem.id)
                    .cloned()
                    .collect();
                if suite.is_empty() || pool.is_empty() {
                    continue;
                }
                all.extend(execute_pool(&pool, &suite, &config.sandbox, parallelism)?);
            }
            let path = config.pipeline.output_root.join("executions.jsonl");
            write_jsonl(&path, all.iter())?;
            log::info!("wrote {} outcomes to {}", all.len(), path.display());
            Ok(CmdOutcome::Clean)
        }
        Command::Select {
            problems,
            tests,
            candidates,
            executions,
            strategy,
            rho,
            tau,
            success_rate_threshold,
        } => {
            let selection = validated_selection(
                config.selection,
                strategy.as_deref(),
                *rho,
                *tau,
                *success_rate_threshold,
            )?;
            write_manifest(&config, "select")?;
            let problems: Vec<Problem> = read_jsonl(problems)?;
            let tests: Vec<TestCase> = read_jsonl(tests)?;
            let candidates: Vec<Candidate> = read_jsonl(candidates)?;
            let executions: Vec<ExecutionOutcome> = read_jsonl(executions)?;
            let mut results = Vec::new();
            for problem in &problems {
                let suite: Vec<TestCase> = tests
                    .iter()
                    .filter(|t| t.problem_id == problem.id)
                    .cloned()
                    .collect();
                let pool_candidates: Vec<Candidate> = candidates
                    .iter()
                    .filter(|c| c.problem_id == problem.id)
                    .cloned()
                    .collect();
                let pool = build_pool(&pool_candidates, &suite, &executions);
                let per_problem = SelectionConfig {
                    rng_seed: derive_seed(selection.rng_seed, crate::ids::stable_u64(&problem.id)),
                    ..selection
                };
                results.push(
                    select(&problem.id, &pool, &per_problem)
                        .map_err(|e| DispatchError::Fatal(anyhow::anyhow!(e.to_string())))?,
                );
            }
            let path = config.pipeline.output_root.join("selections.jsonl");
            write_jsonl(&path, results.iter())?;
            let selected = results.iter().filter(|r| r.selected.is_some()).count();
            log::info!(
                "selected {selected} of {} problems -> {}",
                results.len(),
                path.display()
            );
            Ok(CmdOutcome::Clean)
        }
        Command::BuildSft {
            problems,
            candidates,
            selections,
            iteration,
        } => {
            write_manifest(&config, "build-sft")?;
            let problems: Vec<Problem> = read_jsonl(problems)?;
            let candidates: Vec<Candidate> = read_jsonl(candidates)?;
            let selections: Vec<codeprobe_core::consensus::SelectionResult> =
                read_jsonl(selections)?;
            let problem_by_id: BTreeMap<&str, &Problem> =
                problems.iter().map(|p| (p.id.as_str(), p)).collect();
            let candidate_by_id: BTreeMap<&str, &Candidate> =
                candidates.iter().map(|c| (c.id.as_str(), c)).collect();
            let mut records = Vec::new();
            for selection in &selections {
                let Some(candidate_id) = &selection.selected else {
                    continue;
                };
                let (Some(problem), Some(candidate)) = (
                    problem_by_id.get(selection.problem_id.as_str()),
                    candidate_by_id.get(candidate_id.as_str()),
                ) else {
                    log::warn!(
                        "selection for {} references missing entities; skipped",
                        selection.problem_id
                    );
                    continue;
                };
                records.push(SftRecord {
                    instruction: instruction_text(problem),
                    response: candidate.source_code.clone(),
                    problem_id: problem.id.clone(),
                    candidate_id: candidate.id.clone(),
                    iteration: *iteration,
                    selection_strategy: config.selection.strategy,
                    quality: selection
                        .scores
                        .clone()
                        .unwrap_or(QualityScores { e: 0.0, s: 0, f: None }),
                });
            }
            let path = config.pipeline.output_root.join("sft.jsonl");
            write_jsonl(&path, records.iter())?;
            log::info!("wrote {} records to {}", records.len(), path.display());
            Ok(CmdOutcome::Clean)
        }
        Command::Iterate {
            iterations,
            backend,
        } => {
            let mut pipeline_cfg: PipelineConfig = config.pipeline_config();
            if let Some(n) = iterations {
                if *n < 1 {
                    return Err(DispatchError::Usage("--iterations must be >= 1".into()));
                }
                pipeline_cfg.max_iterations = *n;
            }
            pipeline_cfg
                .validate()
                .map_err(|e| DispatchError::Usage(e.to_string()))?;
            let source = make_source(&config, *backend, false)?;
            let holdout = if pipeline_cfg.validation_problems > 0 {
                Some(make_source(&config, *backend, true)?)
            } else {
                None
            };
            write_manifest(&config, "iterate")?;
            let outcomes =
                pipeline::run_loop(&pipeline_cfg, source.as_ref(), holdout.as_deref())?;
            let mut partial = false;
            for outcome in &outcomes {
                log::info!(
                    "iteration {}: {} problems, {} selected, {} rejected, {} failed, mean e {:.3}",
                    outcome.record.iteration,
                    outcome.record.problems_count,
                    outcome.record.selected_count,
                    outcome.rejected_problems,
                    outcome.failed_problems,
                    outcome.record.mean_e
                );
                partial |= outcome.failed_problems > 0;
            }
            Ok(if partial {
                CmdOutcome::Partial
            } else {
                CmdOutcome::Clean
            })
        }
        Command::Consolidate { iterations, dedup } => {
            let list: Vec<u32> = parse_list(iterations, "--iterations")?;
            if list.is_empty() {
                return Err(DispatchError::Usage(
                    "--iterations must name at least one iteration".into(),
                ));
            }
            write_manifest(&config, "consolidate")?;
            let path =
                pipeline::consolidate_dataset(&config.pipeline.output_root, &list, *dedup)?;
            log::info!("consolidated dataset at {}", path.display());
            Ok(CmdOutcome::Clean)
        }
        Command::Analyze {
            corpus,
            out,
            analyzer_config,
        } => {
            if !corpus.exists() {
                return Err(DispatchError::Usage(format!(
                    "corpus directory {} does not exist",
                    corpus.display()
                )));
            }
            let analyzer = match analyzer_config.as_ref().or(config.analyzer.config_path.as_ref())
            {
                Some(path) => {
                    AnalyzerConfig::load(path).map_err(|e| DispatchError::Usage(e.to_string()))?
                }
                None => AnalyzerConfig::builtin(),
            };
            let out_dir = out.clone().unwrap_or_else(|| corpus.join("analysis"));
            let report = analyze_corpus_dir(corpus, &out_dir, &analyzer)?;
            log::info!(
                "analyzed {} problems / {} candidates (config {}) -> {}",
                report.diversity.problem_count,
                report.diversity.candidate_count,
                &report.config_hash[..8],
                out_dir.display()
            );
            println!(
                "entropy mean {:.3} bits, complexity mean {:.2}, semantic mean {:.2}, profiled {}/{}",
                report.diversity.entropy_stats.mean,
                report.diversity.complexity_stats.mean,
                report.diversity.semantic_stats.mean,
                report.diversity.profiled_count,
                report.diversity.profiled_count + report.diversity.unprofiled_count
            );
            Ok(CmdOutcome::Clean)
        }
        Command::SimulateTheorem {
            n_list,
            k_list,
            p_list,
            m_offsets,
            m_list,
            trials,
        } => {
            if *trials < 1 {
                return Err(DispatchError::Usage("--trials must be >= 1".into()));
            }
            let ns: Vec<u32> = parse_list(n_list, "--n-list")?;
            let ks: Vec<u32> = parse_list(k_list, "--k-list")?;
            let ps: Vec<f64> = parse_list(p_list, "--p-list")?;
            let explicit_ms: Option<Vec<u32>> = match m_list {
                Some(text) => Some(parse_list(text, "--m-list")?),
                None => None,
            };
            let offsets: Vec<u32> = parse_list(m_offsets, "--m-offsets")?;
            if ns.is_empty() || ks.is_empty() || ps.is_empty() {
                return Err(DispatchError::Usage("parameter lists must be non-empty".into()));
            }
            for &p in &ps {
                if !(p > 0.0 && p < 1.0) {
                    return Err(DispatchError::Usage(format!("p must be in (0,1), got {p}")));
                }
            }
            write_manifest(&config, "simulate-theorem")?;

            let mut points: Vec<ConsensusSimParams> = Vec::new();
            for &n in &ns {
                for &k in &ks {
                    if k > n {
                        continue;
                    }
                    for &p in &ps {
                        let ms: Vec<u32> = match &explicit_ms {
                            Some(ms) => ms.clone(),
                            None => {
                                let bound = min_tests_bound(n, k, p)
                                    .map_err(|e| DispatchError::Usage(e.to_string()))?;
                                offsets.iter().map(|o| (bound + o).max(1)).collect()
                            }
                        };
                        for m in ms {
                            points.push(ConsensusSimParams {
                                n,
                                k,
                                p,
                                m,
                                trials: *trials,
                                rng_seed: derive_seed(
                                    config.selection.rng_seed,
                                    ((n as u64) << 40) ^ ((k as u64) << 24) ^ ((m as u64) << 8)
                                        ^ (p * 1000.0) as u64,
                                ),
                            });
                        }
                    }
                }
            }

            use rayon::prelude::*;
            let rows: Result<Vec<(ConsensusSimParams, SimReport)>, _> = points
                .par_iter()
                .map(|params| simulate_consensus(params).map(|r| (*params, r)))
                .collect();
            let rows = rows.map_err(|e| DispatchError::Fatal(anyhow::anyhow!(e.to_string())))?;

            #[derive(Serialize)]
            struct Row {
                n: u32,
                k: u32,
                p: f64,
                m: u32,
                trials: u32,
                empirical_correct_rate: f64,
                bound: f64,
                std_error: f64,
                bound_satisfied: bool,
                vacuous: bool,
            }
            let report: Vec<Row> = rows
                .iter()
                .map(|(params, r)| Row {
                    n: params.n,
                    k: params.k,
                    p: params.p,
                    m: params.m,
                    trials: params.trials,
                    empirical_correct_rate: r.empirical_correct_rate,
                    bound: r.bound,
                    std_error: r.std_error,
                    bound_satisfied: r.bound_satisfied,
                    vacuous: r.vacuous,
                })
                .collect();
            let path = config.pipeline.output_root.join("theorem_report.json");
            std::fs::write(
                &path,
                serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
            )
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;

            let mut violations = 0usize;
            for row in &report {
                let flag = if row.vacuous {
                    "vacuous"
                } else if row.bound_satisfied {
                    "ok"
                } else {
                    violations += 1;
                    "VIOLATED"
                };
                println!(
                    "n={:<3} k={:<2} p={:<4} m={:<2} rate={:.4} bound={:.4} [{flag}]",
                    row.n, row.k, row.p, row.m, row.empirical_correct_rate, row.bound
                );
            }
            log::info!("theorem sweep written to {}", path.display());
            if violations > 0 {
                log::error!("{violations} non-vacuous grid points violated the bound");
                return Err(DispatchError::Fatal(anyhow::anyhow!(
                    "consensus bound violated at {violations} grid points"
                )));
            }
            Ok(CmdOutcome::Clean)
        }
        Command::SimulateDynamics {
            mean,
            concentration,
            pool_size,
            iterations,
            seeds,
        } => {
            if *seeds < 1 {
                return Err(DispatchError::Usage("--seeds must be >= 1".into()));
            }
            let base = DynamicsSimParams {
                initial_quality_mean: *mean,
                initial_quality_concentration: *concentration,
                pool_size: *pool_size,
                iterations: *iterations,
                lift_estimator: LiftEstimator::ConsensusProxy,
                rng_seed: config.selection.rng_seed,
            };
            // Validate before side effects.
            simulate_dynamics(&DynamicsSimParams {
                pool_size: base.pool_size.min(8),
                iterations: 1,
                ..base
            })
            .map_err(|e| DispatchError::Usage(e.to_string()))?;
            write_manifest(&config, "simulate-dynamics")?;

            let mut traces = Vec::new();
            for s in 0..*seeds {
                let params = DynamicsSimParams {
                    rng_seed: derive_seed(config.selection.rng_seed, s as u64),
                    ..base
                };
                traces.push(simulate_dynamics(&params)?);
            }
            let path = config.pipeline.output_root.join("dynamics_report.json");
            std::fs::write(
                &path,
                serde_json::to_string_pretty(&traces).expect("traces serialize") + "\n",
            )
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
            for point in &traces[0] {
                println!(
                    "iter={} mean_quality={:.4} delta={:+.4}",
                    point.iteration, point.mean_quality, point.delta
                );
            }
            log::info!("{} dynamics traces written to {}", traces.len(), path.display());
            Ok(CmdOutcome::Clean)
        }
    }
}
