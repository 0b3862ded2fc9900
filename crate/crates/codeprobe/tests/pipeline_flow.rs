//! Library-level pipeline flow against the stub backend and the real
//! executor: iteration artifacts, bookkeeping invariants, consolidation,
//! and corpus ingestion.

use std::path::Path;

use codeprobe::executor::SandboxPolicy;
use codeprobe::genclient::stub::StubSource;
use codeprobe::genclient::{ingest_files, GenerationSource};
use codeprobe::jsonl::{read_jsonl, JsonlError};
use codeprobe::pipeline::{
    consolidate_dataset, iter_dir, run_iteration, run_loop, PipelineConfig, PipelineError,
};
use codeprobe_core::consensus::SelectionResult;
use codeprobe_core::domain::{
    Candidate, ExecutionOutcome, IterationRecord, Problem, SftRecord, TestCase,
};

fn small_config(root: &Path) -> PipelineConfig {
    PipelineConfig {
        problems_per_iteration: 3,
        tests_per_problem: 6,
        candidates_per_problem: 10,
        max_iterations: 2,
        output_root: root.to_path_buf(),
        parallelism: 8,
        sandbox: SandboxPolicy {
            time_limit_ms: 400,
            interpreter_command: "python3 -I -S {file}".into(),
            ..SandboxPolicy::default()
        },
        ..PipelineConfig::default()
    }
}

#[test]
fn iteration_emits_complete_artifacts_with_consistent_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let source = StubSource::new(21);
    let outcome = run_iteration(0, &cfg, &source, None).unwrap();

    let iter0 = iter_dir(dir.path(), 0);
    for file in [
        "problems.jsonl",
        "tests.jsonl",
        "candidates.jsonl",
        "executions.jsonl",
        "selections.jsonl",
        "sft.jsonl",
        "DONE",
    ] {
        assert!(iter0.join(file).exists(), "missing {file}");
    }

    let problems: Vec<Problem> = read_jsonl(&iter0.join("problems.jsonl")).unwrap();
    let tests: Vec<TestCase> = read_jsonl(&iter0.join("tests.jsonl")).unwrap();
    let candidates: Vec<Candidate> = read_jsonl(&iter0.join("candidates.jsonl")).unwrap();
    let executions: Vec<ExecutionOutcome> = read_jsonl(&iter0.join("executions.jsonl")).unwrap();
    let selections: Vec<SelectionResult> = read_jsonl(&iter0.join("selections.jsonl")).unwrap();
    let sft: Vec<SftRecord> = read_jsonl(&iter0.join("sft.jsonl")).unwrap();

    assert_eq!(problems.len(), 3);
    assert_eq!(tests.len(), 18);
    assert_eq!(candidates.len(), 30);
    // The execution matrix is complete: one outcome per candidate-test pair.
    assert_eq!(executions.len(), 30 * 6);
    assert_eq!(selections.len(), 3);

    // Every sft record's candidate appears in the selections with the same
    // strategy and a populated selected field.
    for record in &sft {
        let selection = selections
            .iter()
            .find(|s| s.problem_id == record.problem_id)
            .expect("every sft problem has a selection");
        assert_eq!(selection.selected.as_ref(), Some(&record.candidate_id));
        assert!(selection.rejection_reason.is_none());
        assert_eq!(record.selection_strategy, cfg.selection.strategy);
        assert!(record.quality.e >= cfg.selection.rho);
        assert!(record.quality.s >= cfg.selection.tau);
        assert!(!record.instruction.is_empty() && !record.response.is_empty());
    }
    assert_eq!(outcome.record.selected_count as usize, sft.len());
    assert!(outcome.record.selected_count <= outcome.record.problems_count);

    // Reliability filtering must not select below the pool's mean e.
    if let Some(selected_mean) = outcome.selected_mean_e {
        assert!(
            selected_mean >= outcome.record.mean_e,
            "selected {selected_mean} < pool {}",
            outcome.record.mean_e
        );
    }

    // Bookkeeping row landed in iterations.jsonl.
    let records: Vec<IterationRecord> =
        read_jsonl(&dir.path().join("iterations.jsonl")).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0], outcome.record);
}

#[test]
fn completed_iterations_are_append_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let source = StubSource::new(5);
    run_iteration(0, &cfg, &source, None).unwrap();
    let err = run_iteration(0, &cfg, &source, None).unwrap_err();
    assert!(matches!(err, PipelineError::AlreadyComplete(0)), "got {err}");

    // A crashed partial directory (no DONE) is redone cleanly.
    let iter1 = iter_dir(dir.path(), 1);
    std::fs::create_dir_all(&iter1).unwrap();
    std::fs::write(iter1.join("problems.jsonl"), "partial garbage\n").unwrap();
    let outcome = run_iteration(1, &cfg, &source, None).unwrap();
    assert_eq!(outcome.record.iteration, 1);
    let problems: Vec<Problem> = read_jsonl(&iter1.join("problems.jsonl")).unwrap();
    assert_eq!(problems.len(), 3);
}

#[test]
fn loop_with_flat_validation_stops_early() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.max_iterations = 6;
    cfg.early_stop_patience = 2;
    cfg.validation_problems = 2;
    // Cheaper loop: fewer candidates per problem.
    cfg.candidates_per_problem = 6;
    let source = StubSource::new(77);
    let holdout = StubSource::new(1234);
    let outcomes = run_loop(&cfg, &source, Some(&holdout)).unwrap();
    // The stub's validation score is constant, so the score never improves
    // after the first record and the loop stops at patience.
    assert!(outcomes.len() < 6, "ran {} iterations", outcomes.len());
    assert!(outcomes
        .iter()
        .all(|o| o.record.validation_score.is_some()));
}

#[test]
fn consolidation_merges_and_dedups() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.max_iterations = 2;
    let source = StubSource::new(9);
    run_iteration(0, &cfg, &source, None).unwrap();
    run_iteration(1, &cfg, &source, None).unwrap();

    let sft0: Vec<SftRecord> =
        read_jsonl(&iter_dir(dir.path(), 0).join("sft.jsonl")).unwrap();
    let sft1: Vec<SftRecord> =
        read_jsonl(&iter_dir(dir.path(), 1).join("sft.jsonl")).unwrap();

    let merged_path = consolidate_dataset(dir.path(), &[0, 1], false).unwrap();
    let merged: Vec<SftRecord> = read_jsonl(&merged_path).unwrap();
    assert_eq!(merged.len(), sft0.len() + sft1.len());

    let deduped_path = consolidate_dataset(dir.path(), &[1, 0], true).unwrap();
    let deduped: Vec<SftRecord> = read_jsonl(&deduped_path).unwrap();
    let mut keys: std::collections::BTreeSet<(String, String)> = Default::default();
    for r in &deduped {
        assert!(keys.insert((r.instruction.clone(), r.response.clone())));
    }
    // Duplicates keep the earliest iteration's record even when the list
    // names iterations out of order.
    let duplicate_count = sft0.len() + sft1.len() - deduped.len();
    if duplicate_count > 0 {
        let zero_count = deduped.iter().filter(|r| r.iteration == 0).count();
        assert_eq!(zero_count, sft0.len(), "earliest records must win");
    }

    assert!(matches!(
        consolidate_dataset(dir.path(), &[5], true),
        Err(PipelineError::IncompleteIteration(5))
    ));
}

#[test]
fn emitted_corpus_ingests_clean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let source = StubSource::new(33);
    run_iteration(0, &cfg, &source, None).unwrap();
    let iter0 = iter_dir(dir.path(), 0);
    let (corpus, report) = ingest_files(
        &iter0.join("problems.jsonl"),
        &iter0.join("tests.jsonl"),
        &iter0.join("candidates.jsonl"),
    )
    .unwrap();
    assert!(report.is_ok(), "violations: {:?}", report.violations);
    assert_eq!(corpus.problems.len(), 3);

    // Round trip: ingested equals directly generated.
    let direct = source.generate_problems(3, 0).unwrap().items;
    assert_eq!(corpus.problems, direct);
}

#[test]
fn corrupt_line_fails_ingestion_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let source = StubSource::new(4);
    run_iteration(0, &cfg, &source, None).unwrap();
    let iter0 = iter_dir(dir.path(), 0);

    let candidates_path = iter0.join("candidates.jsonl");
    let mut lines: Vec<String> = std::fs::read_to_string(&candidates_path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    lines[2] = "{corrupt".into();
    std::fs::write(&candidates_path, lines.join("\n")).unwrap();

    let err = ingest_files(
        &iter0.join("problems.jsonl"),
        &iter0.join("tests.jsonl"),
        &candidates_path,
    )
    .unwrap_err();
    let text = err.to_string();
    assert!(text.contains(":3:"), "error should name line 3: {text}");
}

#[test]
fn empty_corpus_ingests_empty() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["problems.jsonl", "tests.jsonl", "candidates.jsonl"] {
        std::fs::write(dir.path().join(name), "").unwrap();
    }
    let (corpus, report) = ingest_files(
        &dir.path().join("problems.jsonl"),
        &dir.path().join("tests.jsonl"),
        &dir.path().join("candidates.jsonl"),
    )
    .unwrap();
    assert!(corpus.problems.is_empty() && corpus.tests.is_empty() && corpus.candidates.is_empty());
    assert!(report.is_ok());

    let missing = ingest_files(
        &dir.path().join("nope.jsonl"),
        &dir.path().join("tests.jsonl"),
        &dir.path().join("candidates.jsonl"),
    );
    assert!(matches!(
        missing,
        Err(codeprobe::genclient::IngestError::File(JsonlError::Unreadable { .. }))
    ));
}
