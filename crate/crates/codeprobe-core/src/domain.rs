//! Shared domain model: problems, tests, candidates, execution outcomes, and
//! the records emitted by the curation pipeline.
//!
//! All types are immutable value objects after construction and serialize to
//! line-delimited JSON with `lower_snake_case` field names. IDs are opaque
//! caller-supplied strings; the pipeline derives them from content hashes so
//! reruns are idempotent.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Problem difficulty bucket assigned at generation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

/// A generated programming task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub title: String,
    /// Natural-language specification text.
    pub description: String,
    /// Entry-point contract: name, parameters, return.
    pub function_signature: String,
    pub difficulty: Difficulty,
    /// Numeric difficulty rating in `[0, 10]`.
    pub rating: f64,
    /// Optional implementation-structure sketch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skeleton: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    /// Pipeline iteration in which the problem was generated.
    pub iteration_born: u32,
}

/// One self-checking test: harness code that invokes the entry point and
/// exits zero on pass, nonzero on fail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub problem_id: String,
    pub harness_code: String,
    /// Position within the suite; defines signature bit order.
    pub ordinal: u32,
}

/// Sampling provenance for a candidate solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingMeta {
    pub temperature: f64,
    pub top_p: f64,
    pub sample_index: u32,
}

impl Default for SamplingMeta {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            top_p: 1.0,
            sample_index: 0,
        }
    }
}

/// One sampled solution for a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub problem_id: String,
    pub source_code: String,
    /// Natural-log token probabilities, when the sampling endpoint supplied
    /// them. Every element must be `<= 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<f64>>,
    #[serde(default)]
    pub sampling_meta: SamplingMeta,
    pub iteration_born: u32,
}

/// Outcome of executing one candidate against one test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionStatus {
    /// Combined program exited with success code within limits.
    Pass,
    /// Completed run with nonzero exit code.
    Fail,
    /// Interpreter launch failure or crash signal.
    Error,
    /// Wall time exceeded the configured limit.
    Timeout,
}

impl ExecutionStatus {
    /// Whether the run executed at all (pass and fail both count; error and
    /// timeout are the non-executing outcomes).
    pub fn executed(self) -> bool {
        matches!(self, ExecutionStatus::Pass | ExecutionStatus::Fail)
    }
}

/// Record of a single candidate-test execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub candidate_id: String,
    pub test_id: String,
    pub status: ExecutionStatus,
    pub duration_ms: u64,
    /// First 4 KiB of combined stdout/stderr, when captured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub captured_output: Option<String>,
}

/// Ordered pass bit-vector over a problem's test suite: bit `j` is 1 iff the
/// outcome on the test with ordinal `j` is a pass. The all-ones vector means
/// the candidate passes every test.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExecutionSignature {
    #[serde(
        serialize_with = "serialize_bits",
        deserialize_with = "deserialize_bits"
    )]
    bits: Vec<bool>,
}

impl ExecutionSignature {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// True iff every bit is set, i.e. the candidate passes all tests.
    pub fn is_all_pass(&self) -> bool {
        !self.bits.is_empty() && self.bits.iter().all(|b| *b)
    }

    /// Count of passed tests.
    pub fn pass_count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

impl core::fmt::Display for ExecutionSignature {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        for b in &self.bits {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl core::str::FromStr for ExecutionSignature {
    type Err = &'static str;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err("signature bits must be '0' or '1'"),
            }
        }
        Ok(Self { bits })
    }
}

fn serialize_bits<S: Serializer>(bits: &[bool], s: S) -> Result<S::Ok, S::Error> {
    let text: String = bits.iter().map(|b| if *b { '1' } else { '0' }).collect();
    s.serialize_str(&text)
}

fn deserialize_bits<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
    let text = <&str>::deserialize(d)?;
    text.parse::<ExecutionSignature>()
        .map(|sig| sig.bits)
        .map_err(serde::de::Error::custom)
}

/// Per-candidate quality aggregates: execution success rate `e`, consensus
/// strength `s` (size of the candidate's cluster), and perplexity `f` when
/// token log-probabilities are available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScores {
    pub e: f64,
    pub s: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
}

/// Maximal set of candidates sharing one execution signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusCluster {
    pub signature: ExecutionSignature,
    pub member_ids: Vec<String>,
    pub size: u32,
}

impl ConsensusCluster {
    pub fn new(signature: ExecutionSignature, member_ids: Vec<String>) -> Self {
        let size = member_ids.len() as u32;
        Self {
            signature,
            member_ids,
            size,
        }
    }
}

/// Selection strategy used to pick a training response for a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Hierarchical rule: reliability filter, largest non-trivial cluster,
    /// intra-cluster argmax on (e, -f).
    Consensus,
    /// Uniform pick among all-pass candidates (else among all).
    Random,
    /// Pick from the dominant output-hash cluster.
    Cluster,
    /// Global minimum perplexity.
    LowPpl,
    /// Uniform pick among candidates above a pass-fraction threshold.
    SuccessRate,
}

/// An instruction-response training pair with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SftRecord {
    /// Problem description plus function signature.
    pub instruction: String,
    /// Selected solution source.
    pub response: String,
    pub problem_id: String,
    pub candidate_id: String,
    pub iteration: u32,
    pub selection_strategy: SelectionStrategy,
    pub quality: QualityScores,
}

/// Per-iteration bookkeeping appended to `iterations.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub problems_count: u32,
    pub candidates_count: u32,
    pub selected_count: u32,
    /// Mean execution success rate over the iteration's candidates.
    pub mean_e: f64,
    /// Mean perplexity over candidates that carry one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_f: Option<f64>,
    pub dataset_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_score: Option<f64>,
}

/// Kind of referential-integrity or invariant violation found in a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DuplicateId,
    DanglingProblemRef,
    OrdinalGap,
    OrdinalDuplicate,
    EmptyField,
    RatingOutOfRange,
    PositiveLogprob,
}

/// One violation, naming the offending entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub entity_id: String,
    pub message: String,
}

/// Result of corpus validation. Violations are data, not failures: an empty
/// report means the corpus is well-formed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check referential integrity and type invariants across a corpus.
///
/// Detects duplicate ids, dangling `problem_id` references, ordinal gaps and
/// duplicates within a problem's test suite, empty required fields, ratings
/// outside `[0, 10]`, and positive token log-probabilities.
pub fn validate_corpus(
    problems: &[Problem],
    tests: &[TestCase],
    candidates: &[Candidate],
) -> ValidationReport {
    let mut violations = Vec::new();
    let mut problem_ids: BTreeSet<&str> = BTreeSet::new();

    for p in problems {
        if p.id.is_empty() {
            violations.push(Violation {
                kind: ViolationKind::EmptyField,
                entity_id: p.id.clone(),
                message: "problem id is empty".into(),
            });
        } else if !problem_ids.insert(&p.id) {
            violations.push(Violation {
                kind: ViolationKind::DuplicateId,
                entity_id: p.id.clone(),
                message: format!("duplicate problem id {}", p.id),
            });
        }
        if p.description.is_empty() {
            violations.push(Violation {
                kind: ViolationKind::EmptyField,
                entity_id: p.id.clone(),
                message: "problem description is empty".into(),
            });
        }
        if p.function_signature.is_empty() {
            violations.push(Violation {
                kind: ViolationKind::EmptyField,
                entity_id: p.id.clone(),
                message: "problem function_signature is empty".into(),
            });
        }
        if !(0.0..=10.0).contains(&p.rating) {
            violations.push(Violation {
                kind: ViolationKind::RatingOutOfRange,
                entity_id: p.id.clone(),
                message: format!("rating {} outside [0, 10]", p.rating),
            });
        }
    }

    let mut test_ids: BTreeSet<&str> = BTreeSet::new();
    let mut suite_ordinals: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for t in tests {
        if !test_ids.insert(&t.id) {
            violations.push(Violation {
                kind: ViolationKind::DuplicateId,
                entity_id: t.id.clone(),
                message: format!("duplicate test id {}", t.id),
            });
        }
        if !problem_ids.contains(t.problem_id.as_str()) {
            violations.push(Violation {
                kind: ViolationKind::DanglingProblemRef,
                entity_id: t.id.clone(),
                message: format!("test {} references unknown problem {}", t.id, t.problem_id),
            });
        }
        if t.harness_code.is_empty() {
            violations.push(Violation {
                kind: ViolationKind::EmptyField,
                entity_id: t.id.clone(),
                message: "test harness_code is empty".into(),
            });
        }
        suite_ordinals.entry(&t.problem_id).or_default().push(t.ordinal);
    }

    // Ordinals within one suite must be exactly 0..m-1: signature bits are
    // positional, so gaps or duplicates corrupt every downstream cluster.
    for (problem_id, mut ordinals) in suite_ordinals {
        ordinals.sort_unstable();
        let m = ordinals.len() as u32;
        let mut seen: BTreeSet<u32> = BTreeSet::new();
        for &o in &ordinals {
            if !seen.insert(o) {
                violations.push(Violation {
                    kind: ViolationKind::OrdinalDuplicate,
                    entity_id: problem_id.into(),
                    message: format!("problem {problem_id} has duplicate test ordinal {o}"),
                });
            }
        }
        for expected in 0..m {
            if !seen.contains(&expected) {
                violations.push(Violation {
                    kind: ViolationKind::OrdinalGap,
                    entity_id: problem_id.into(),
                    message: format!("problem {problem_id} is missing test ordinal {expected}"),
                });
            }
        }
    }

    let mut candidate_ids: BTreeSet<&str> = BTreeSet::new();
    for c in candidates {
        if !candidate_ids.insert(&c.id) {
            violations.push(Violation {
                kind: ViolationKind::DuplicateId,
                entity_id: c.id.clone(),
                message: format!("duplicate candidate id {}", c.id),
            });
        }
        if !problem_ids.contains(c.problem_id.as_str()) {
            violations.push(Violation {
                kind: ViolationKind::DanglingProblemRef,
                entity_id: c.id.clone(),
                message: format!(
                    "candidate {} references unknown problem {}",
                    c.id, c.problem_id
                ),
            });
        }
        if c.source_code.is_empty() {
            violations.push(Violation {
                kind: ViolationKind::EmptyField,
                entity_id: c.id.clone(),
                message: "candidate source_code is empty".into(),
            });
        }
        if let Some(lps) = &c.token_logprobs {
            if lps.iter().any(|lp| *lp > 0.0) {
                violations.push(Violation {
                    kind: ViolationKind::PositiveLogprob,
                    entity_id: c.id.clone(),
                    message: format!("candidate {} has a token logprob > 0", c.id),
                });
            }
        }
    }

    ValidationReport { violations }
}
