//! Per-iteration orchestration: generate problems, synthesize tests, sample
//! candidates, execute, select, and emit the training dataset, with
//! early-stopping bookkeeping across iterations.
//!
//! One iteration produces `iter-{t}/` under the output root containing
//! `problems.jsonl`, `tests.jsonl`, `candidates.jsonl`, `executions.jsonl`,
//! `selections.jsonl`, and `sft.jsonl`, terminated by a `DONE` marker; the
//! marker's absence excludes a crashed run from consolidation and
//! bookkeeping. Iteration directories are append-only: a completed iteration
//! is never rewritten.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use codeprobe_core::consensus::{select, PoolCandidate, SelectionConfig, SelectionResult};
use codeprobe_core::domain::{
    Candidate, ExecutionOutcome, IterationRecord, Problem, QualityScores, SftRecord, TestCase,
};
use codeprobe_core::seed::derive_seed;
use codeprobe_core::signature::{execution_success_rate, pass_fraction};

use crate::executor::{execute_pool, signature_for, ExecutorError, SandboxPolicy};
use crate::genclient::{GenError, GenerationSource};
use crate::ids::stable_u64;
use crate::jsonl::{append_jsonl, read_jsonl, write_jsonl, JsonlError};

/// Knobs for the full loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub problems_per_iteration: u32,
    pub tests_per_problem: u32,
    pub candidates_per_problem: u32,
    pub selection: SelectionConfig,
    pub sandbox: SandboxPolicy,
    pub max_iterations: u32,
    pub early_stop_patience: u32,
    pub output_root: PathBuf,
    /// Worker count for the execution matrix of one problem.
    pub parallelism: usize,
    /// Held-out problems for validation scoring; 0 disables scoring.
    pub validation_problems: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            problems_per_iteration: 8,
            tests_per_problem: 100,
            candidates_per_problem: 128,
            selection: SelectionConfig::default(),
            sandbox: SandboxPolicy::default(),
            max_iterations: 6,
            early_stop_patience: 2,
            output_root: PathBuf::from("runs/default"),
            parallelism: 8,
            validation_problems: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.problems_per_iteration < 1
            || self.tests_per_problem < 1
            || self.candidates_per_problem < 1
            || self.max_iterations < 1
        {
            return Err(PipelineError::InvalidArgs(
                "all generation counts and max_iterations must be >= 1".into(),
            ));
        }
        if self.early_stop_patience < 1 {
            return Err(PipelineError::InvalidArgs(
                "early_stop_patience must be >= 1".into(),
            ));
        }
        if self.parallelism < 1 {
            return Err(PipelineError::InvalidArgs("parallelism must be >= 1".into()));
        }
        self.selection
            .validate()
            .map_err(|e| PipelineError::InvalidArgs(e.to_string()))?;
        self.sandbox
            .validate()
            .map_err(|e| PipelineError::InvalidArgs(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    InvalidArgs(String),
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Executor(#[from] ExecutorError),
    #[error(transparent)]
    File(#[from] JsonlError),
    #[error("io failure at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("iteration {0} is incomplete (missing DONE marker)")]
    IncompleteIteration(u32),
    #[error("iteration {0} already has a DONE marker; directories are append-only")]
    AlreadyComplete(u32),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Result of one iteration beyond the persisted record.
#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub record: IterationRecord,
    /// Problems whose generation or execution failed and were skipped.
    pub failed_problems: u32,
    /// Mean e over selected candidates, when any problem selected.
    pub selected_mean_e: Option<f64>,
    pub rejected_problems: u32,
}

pub fn iter_dir(output_root: &Path, t: u32) -> PathBuf {
    output_root.join(format!("iter-{t}"))
}

fn done_path(output_root: &Path, t: u32) -> PathBuf {
    iter_dir(output_root, t).join("DONE")
}

/// Per-candidate quality measurements joined for selection.
pub fn build_pool(
    candidates: &[Candidate],
    tests: &[TestCase],
    outcomes: &[ExecutionOutcome],
) -> Vec<PoolCandidate> {
    let mut suite: Vec<&TestCase> = tests.iter().collect();
    suite.sort_by_key(|t| t.ordinal);
    let by_key: BTreeMap<(&str, &str), &ExecutionOutcome> = outcomes
        .iter()
        .map(|o| ((o.candidate_id.as_str(), o.test_id.as_str()), o))
        .collect();

    let mut pool = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let rows: Vec<&ExecutionOutcome> = suite
            .iter()
            .filter_map(|t| by_key.get(&(candidate.id.as_str(), t.id.as_str())).copied())
            .collect();
        if rows.len() != suite.len() {
            log::warn!(
                "candidate {} has {} of {} outcomes; skipping",
                candidate.id,
                rows.len(),
                suite.len()
            );
            continue;
        }
        let statuses: Vec<_> = rows.iter().map(|o| o.status).collect();
        let signature = match signature_for(&candidate.id, outcomes, tests) {
            Ok(sig) => sig,
            Err(e) => {
                log::warn!("candidate {}: {e}; skipping", candidate.id);
                continue;
            }
        };
        let perplexity = candidate
            .token_logprobs
            .as_deref()
            .and_then(|lps| codeprobe_core::consensus::perplexity(lps).ok());
        pool.push(PoolCandidate {
            candidate_id: candidate.id.clone(),
            signature,
            exec_success_rate: execution_success_rate(&statuses).unwrap_or(0.0),
            perplexity,
            pass_fraction: pass_fraction(&statuses).unwrap_or(0.0),
            outputs: Some(
                rows.iter()
                    .map(|o| o.captured_output.clone().unwrap_or_default())
                    .collect(),
            ),
        });
    }
    pool
}

/// The instruction text paired with a selected response: description plus
/// entry-point signature.
pub fn instruction_text(problem: &Problem) -> String {
    format!("{}\n\n{}", problem.description, problem.function_signature)
}

struct ProblemBundle {
    problem: Problem,
    tests: Vec<TestCase>,
    candidates: Vec<Candidate>,
    outcomes: Vec<ExecutionOutcome>,
    selection: SelectionResult,
    sft: Option<SftRecord>,
}

enum ProblemResult {
    Done(Box<ProblemBundle>),
    Failed(String),
    Fatal(PipelineError),
}

fn process_problem(
    t: u32,
    problem: Problem,
    cfg: &PipelineConfig,
    source: &dyn GenerationSource,
) -> ProblemResult {
    let tests = match source.generate_tests(&problem, cfg.tests_per_problem) {
        Ok(outcome) => outcome.items,
        Err(e @ (GenError::AuthFailure(_) | GenError::QuotaExhausted(_))) => {
            return ProblemResult::Fatal(e.into());
        }
        Err(e) => return ProblemResult::Failed(format!("{}: test generation: {e}", problem.id)),
    };
    if tests.is_empty() {
        return ProblemResult::Failed(format!("{}: no usable tests", problem.id));
    }
    let candidates = match source.sample_solutions(&problem, cfg.candidates_per_problem) {
        Ok(outcome) => outcome.items,
        Err(e @ (GenError::AuthFailure(_) | GenError::QuotaExhausted(_))) => {
            return ProblemResult::Fatal(e.into());
        }
        Err(e) => return ProblemResult::Failed(format!("{}: sampling: {e}", problem.id)),
    };
    if candidates.is_empty() {
        return ProblemResult::Failed(format!("{}: no usable candidates", problem.id));
    }

    let outcomes = match execute_pool(&candidates, &tests, &cfg.sandbox, cfg.parallelism) {
        Ok(outcomes) => outcomes,
        Err(e) => return ProblemResult::Fatal(e.into()),
    };

    let pool = build_pool(&candidates, &tests, &outcomes);
    // Per-problem selection seed is derived from the problem id, so a rerun
    // or a reordering of problems cannot change any problem's draw.
    let selection_cfg = SelectionConfig {
        rng_seed: derive_seed(cfg.selection.rng_seed, stable_u64(&problem.id)),
        ..cfg.selection
    };
    let selection = match select(&problem.id, &pool, &selection_cfg) {
        Ok(selection) => selection,
        Err(e) => return ProblemResult::Failed(format!("{}: selection: {e}", problem.id)),
    };

    let sft = selection.selected.as_ref().map(|candidate_id| {
        let chosen = candidates
            .iter()
            .find(|c| &c.id == candidate_id)
            .expect("selected id comes from this pool");
        SftRecord {
            instruction: instruction_text(&problem),
            response: chosen.source_code.clone(),
            problem_id: problem.id.clone(),
            candidate_id: candidate_id.clone(),
            iteration: t,
            selection_strategy: cfg.selection.strategy,
            quality: selection
                .scores
                .clone()
                .unwrap_or(QualityScores { e: 0.0, s: 0, f: None }),
        }
    });

    ProblemResult::Done(Box::new(ProblemBundle {
        problem,
        tests,
        candidates,
        outcomes,
        selection,
        sft,
    }))
}

/// Score the backend against a fixed held-out problem set: the fraction of
/// holdout problems whose single top sample passes every holdout test.
pub fn validation_score(
    cfg: &PipelineConfig,
    source: &dyn GenerationSource,
    holdout: &dyn GenerationSource,
) -> Result<Option<f64>, PipelineError> {
    if cfg.validation_problems == 0 {
        return Ok(None);
    }
    // Iteration 0 keys the holdout generation, so every pipeline iteration
    // scores against the same problems.
    let problems = holdout.generate_problems(cfg.validation_problems, 0)?.items;
    if problems.is_empty() {
        return Ok(None);
    }
    let mut passed = 0u32;
    for problem in &problems {
        let tests = holdout.generate_tests(problem, cfg.tests_per_problem)?.items;
        if tests.is_empty() {
            continue;
        }
        let sample = source.sample_solutions(problem, 1)?.items;
        let Some(candidate) = sample.first() else {
            continue;
        };
        let outcomes = execute_pool(
            std::slice::from_ref(candidate),
            &tests,
            &cfg.sandbox,
            cfg.parallelism,
        )?;
        if outcomes
            .iter()
            .all(|o| o.status == codeprobe_core::domain::ExecutionStatus::Pass)
        {
            passed += 1;
        }
    }
    Ok(Some(passed as f64 / problems.len() as f64))
}

/// Run one full iteration and persist its artifacts.
///
/// Problems are processed concurrently; outputs are written in problem
/// order, so identical inputs and seeds give byte-identical files.
pub fn run_iteration(
    t: u32,
    cfg: &PipelineConfig,
    source: &dyn GenerationSource,
    holdout: Option<&dyn GenerationSource>,
) -> Result<IterationOutcome, PipelineError> {
    cfg.validate()?;
    let dir = iter_dir(&cfg.output_root, t);
    if done_path(&cfg.output_root, t).exists() {
        return Err(PipelineError::AlreadyComplete(t));
    }
    if dir.exists() {
        // A directory without DONE is a crashed partial run; it was never
        // counted, so clearing it is safe.
        std::fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    }
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let problems = source
        .generate_problems(cfg.problems_per_iteration, t)?
        .items;
    let results: Vec<ProblemResult> = problems
        .into_par_iter()
        .map(|problem| process_problem(t, problem, cfg, source))
        .collect();

    let mut bundles: Vec<ProblemBundle> = Vec::new();
    let mut failed_problems = 0u32;
    for result in results {
        match result {
            ProblemResult::Done(bundle) => bundles.push(*bundle),
            ProblemResult::Failed(reason) => {
                log::warn!("problem skipped: {reason}");
                failed_problems += 1;
            }
            ProblemResult::Fatal(e) => return Err(e),
        }
    }

    let all_problems: Vec<&Problem> = bundles.iter().map(|b| &b.problem).collect();
    let all_tests: Vec<&TestCase> = bundles.iter().flat_map(|b| &b.tests).collect();
    let all_candidates: Vec<&Candidate> = bundles.iter().flat_map(|b| &b.candidates).collect();
    let all_outcomes: Vec<&ExecutionOutcome> = bundles.iter().flat_map(|b| &b.outcomes).collect();
    let all_selections: Vec<&SelectionResult> = bundles.iter().map(|b| &b.selection).collect();
    let all_sft: Vec<&SftRecord> = bundles.iter().filter_map(|b| b.sft.as_ref()).collect();

    write_jsonl(&dir.join("problems.jsonl"), all_problems.iter().copied())?;
    write_jsonl(&dir.join("tests.jsonl"), all_tests.iter().copied())?;
    write_jsonl(&dir.join("candidates.jsonl"), all_candidates.iter().copied())?;
    write_jsonl(&dir.join("executions.jsonl"), all_outcomes.iter().copied())?;
    write_jsonl(&dir.join("selections.jsonl"), all_selections.iter().copied())?;
    write_jsonl(&dir.join("sft.jsonl"), all_sft.iter().copied())?;

    // Pool-level and selected-set reliability, for the filtering invariant.
    let pool_es: Vec<f64> = bundles
        .iter()
        .flat_map(|b| {
            build_pool(&b.candidates, &b.tests, &b.outcomes)
                .into_iter()
                .map(|p| p.exec_success_rate)
        })
        .collect();
    let mean_e = if pool_es.is_empty() {
        0.0
    } else {
        pool_es.iter().sum::<f64>() / pool_es.len() as f64
    };
    let selected_es: Vec<f64> = bundles
        .iter()
        .filter_map(|b| b.selection.scores.as_ref().map(|s| s.e))
        .collect();
    let selected_mean_e = (!selected_es.is_empty())
        .then(|| selected_es.iter().sum::<f64>() / selected_es.len() as f64);
    if let Some(selected) = selected_mean_e {
        if selected < mean_e {
            log::warn!(
                "selected mean e {selected:.4} fell below pool mean {mean_e:.4}; \
                 reliability filtering should prevent this"
            );
        }
    }

    let fs: Vec<f64> = bundles
        .iter()
        .flat_map(|b| &b.candidates)
        .filter_map(|c| c.token_logprobs.as_deref())
        .filter_map(|lps| codeprobe_core::consensus::perplexity(lps).ok())
        .collect();
    let mean_f = (!fs.is_empty()).then(|| fs.iter().sum::<f64>() / fs.len() as f64);

    let validation = match holdout {
        Some(holdout) => validation_score(cfg, source, holdout)?,
        None => None,
    };

    let record = IterationRecord {
        iteration: t,
        problems_count: bundles.len() as u32,
        candidates_count: all_candidates.len() as u32,
        selected_count: all_sft.len() as u32,
        mean_e,
        mean_f,
        dataset_path: format!("iter-{t}/sft.jsonl"),
        validation_score: validation,
    };

    let done = done_path(&cfg.output_root, t);
    std::fs::write(&done, format!("iteration {t}\n")).map_err(io_err(&done))?;
    append_jsonl(&cfg.output_root.join("iterations.jsonl"), &record)?;

    let rejected_problems = all_selections
        .iter()
        .filter(|s| s.rejection_reason.is_some())
        .count() as u32;
    Ok(IterationOutcome {
        record,
        failed_problems,
        selected_mean_e,
        rejected_problems,
    })
}

/// True when the validation score has not improved over its running maximum
/// for `patience` consecutive scored iterations. Records without scores
/// never trigger a stop.
pub fn should_stop(records: &[IterationRecord], patience: u32) -> bool {
    if patience == 0 {
        return false;
    }
    let mut best = f64::NEG_INFINITY;
    let mut stale = 0u32;
    for record in records {
        let Some(score) = record.validation_score else {
            continue;
        };
        if score > best {
            best = score;
            stale = 0;
        } else {
            stale += 1;
            if stale >= patience {
                return true;
            }
        }
    }
    false
}

/// Run iterations until `max_iterations` or early stopping; returns all
/// iteration outcomes.
pub fn run_loop(
    cfg: &PipelineConfig,
    source: &dyn GenerationSource,
    holdout: Option<&dyn GenerationSource>,
) -> Result<Vec<IterationOutcome>, PipelineError> {
    cfg.validate()?;
    let mut outcomes: Vec<IterationOutcome> = Vec::new();
    for t in 0..cfg.max_iterations {
        let outcome = run_iteration(t, cfg, source, holdout)?;
        outcomes.push(outcome);
        let records: Vec<_> = outcomes.iter().map(|o| o.record.clone()).collect();
        if should_stop(&records, cfg.early_stop_patience) {
            log::info!("early stopping after iteration {t}");
            break;
        }
    }
    Ok(outcomes)
}

/// Merge the listed iterations' datasets into `sft-consolidated.jsonl`.
///
/// With `dedup`, exact `(instruction, response)` duplicates collapse and the
/// earliest iteration's record is kept.
pub fn consolidate_dataset(
    output_root: &Path,
    iterations: &[u32],
    dedup: bool,
) -> Result<PathBuf, PipelineError> {
    if iterations.is_empty() {
        return Err(PipelineError::InvalidArgs(
            "iteration list must be non-empty".into(),
        ));
    }
    let mut ordered: Vec<u32> = iterations.to_vec();
    ordered.sort_unstable();
    ordered.dedup();

    let mut merged: Vec<SftRecord> = Vec::new();
    let mut seen: std::collections::BTreeSet<(String, String)> = std::collections::BTreeSet::new();
    for &t in &ordered {
        if !done_path(output_root, t).exists() {
            return Err(PipelineError::IncompleteIteration(t));
        }
        let records: Vec<SftRecord> = read_jsonl(&iter_dir(output_root, t).join("sft.jsonl"))?;
        for record in records {
            if dedup {
                let key = (record.instruction.clone(), record.response.clone());
                if !seen.insert(key) {
                    continue;
                }
            }
            merged.push(record);
        }
    }
    let out = output_root.join("sft-consolidated.jsonl");
    write_jsonl(&out, merged.iter())?;
    Ok(out)
}
