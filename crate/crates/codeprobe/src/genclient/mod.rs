//! Corpus sources: an OpenAI-compatible chat-completions client driving the
//! five generation stages, and a deterministic stub for offline runs and
//! reproducibility tests.
//!
//! Problem, test, and solution generation all flow through the
//! [`GenerationSource`] trait so the pipeline never knows which backend is
//! behind it.

pub mod http;
pub mod parse;
pub mod stub;
pub mod templates;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use codeprobe_core::domain::{Candidate, Problem, SamplingMeta, TestCase, ValidationReport};

use crate::ids::content_id;
use crate::jsonl::{read_jsonl, JsonlError};
use parse::{parse_code_payload, parse_problem_payload, parse_rating_payload};
use templates::{RenderVars, Stage, StageTemplates};

/// Connection and sampling settings for the text-generation endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenEndpointConfig {
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the credential. The value
    /// itself never enters config, logs, or errors.
    pub api_key_env: String,
    pub request_timeout_ms: u64,
    pub max_retries: u32,
    /// Sampling temperature for solutions (diversity-favoring default).
    pub temperature: f64,
    pub top_p: f64,
    pub want_logprobs: bool,
    /// Temperature for problem generation.
    pub problem_temperature: f64,
    /// Base delay of the exponential backoff on transport and 5xx failures.
    pub retry_backoff_ms: u64,
    /// Concurrent in-flight requests for one sampling batch.
    pub max_in_flight: usize,
    pub max_tokens: u32,
}

impl Default for GenEndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model_name: "local".into(),
            api_key_env: "CODEPROBE_API_KEY".into(),
            request_timeout_ms: 60_000,
            max_retries: 3,
            temperature: 0.8,
            top_p: 0.95,
            want_logprobs: true,
            problem_temperature: 1.0,
            retry_backoff_ms: 500,
            max_in_flight: 8,
            max_tokens: 2048,
        }
    }
}

impl GenEndpointConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.base_url.is_empty() {
            return Err(GenError::InvalidArgs("base_url is empty".into()));
        }
        if self.temperature < 0.0 || self.problem_temperature < 0.0 {
            return Err(GenError::InvalidArgs("temperature must be >= 0".into()));
        }
        if self.max_in_flight == 0 {
            return Err(GenError::InvalidArgs("max_in_flight must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation arguments: {0}")]
    InvalidArgs(String),
    #[error("endpoint unreachable after retries: {0}")]
    EndpointUnreachable(String),
    #[error("authentication failed (status {0})")]
    AuthFailure(u16),
    #[error("quota exhausted (status {0})")]
    QuotaExhausted(u16),
    #[error("endpoint protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Template(#[from] templates::TemplateError),
}

/// Per-operation bookkeeping: how many raw generations were requested,
/// produced, dropped as malformed, or lost to failed requests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenReport {
    pub requested: u32,
    pub produced: u32,
    pub dropped_malformed: u32,
    pub failed_requests: u32,
}

/// Items plus the report describing what was lost on the way.
#[derive(Debug, Clone)]
pub struct GenOutcome<T> {
    pub items: Vec<T>,
    pub report: GenReport,
}

/// A backend able to produce problems, tests, and candidate solutions.
pub trait GenerationSource: Send + Sync {
    fn generate_problems(&self, count: u32, iteration: u32) -> Result<GenOutcome<Problem>, GenError>;
    fn generate_tests(&self, problem: &Problem, target_count: u32)
        -> Result<GenOutcome<TestCase>, GenError>;
    fn sample_solutions(&self, problem: &Problem, n: u32) -> Result<GenOutcome<Candidate>, GenError>;
}

/// One prompt for the transport layer.
#[derive(Debug, Clone, Serialize)]
pub struct ChatRequest {
    pub prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub want_logprobs: bool,
    pub max_tokens: u32,
}

/// One completion back from the transport layer.
#[derive(Debug, Clone)]
pub struct Completion {
    pub text: String,
    pub token_logprobs: Option<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum TransportError {
    /// Connection, DNS, or timeout trouble before an HTTP status arrived.
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("http status {status}")]
    Status { status: u16, body: String },
    #[error("malformed response body: {0}")]
    BadBody(String),
}

/// Blocking request channel; implemented by the HTTP client and by test
/// fakes.
pub trait ChatTransport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<Completion, TransportError>;
}

/// The endpoint-backed generation client: renders stage prompts, calls the
/// transport with retries, and parses generations into domain objects.
/// Unparseable generations are dropped and counted, never repaired.
pub struct EndpointClient<T: ChatTransport> {
    cfg: GenEndpointConfig,
    templates: StageTemplates,
    transport: T,
}

impl<T: ChatTransport> EndpointClient<T> {
    pub fn new(
        cfg: GenEndpointConfig,
        templates: StageTemplates,
        transport: T,
    ) -> Result<Self, GenError> {
        cfg.validate()?;
        templates.validate()?;
        Ok(Self {
            cfg,
            templates,
            transport,
        })
    }

    /// Send with exponential backoff on transport and 5xx failures only;
    /// 4xx fails fast since retrying a caller error is harmful.
    fn send_with_retries(&self, request: &ChatRequest) -> Result<Completion, GenError> {
        let mut last: Option<GenError> = None;
        for attempt in 0..=self.cfg.max_retries {
            match self.transport.send(request) {
                Ok(completion) => return Ok(completion),
                Err(TransportError::Status { status: 401, .. })
                | Err(TransportError::Status { status: 403, .. }) => {
                    return Err(GenError::AuthFailure(401));
                }
                Err(TransportError::Status { status: 429, .. }) => {
                    return Err(GenError::QuotaExhausted(429));
                }
                Err(TransportError::Status { status, body }) if status < 500 => {
                    return Err(GenError::Protocol(format!("status {status}: {body}")));
                }
                Err(TransportError::BadBody(detail)) => {
                    return Err(GenError::Protocol(detail));
                }
                Err(err) => {
                    last = Some(GenError::EndpointUnreachable(err.to_string()));
                    if attempt < self.cfg.max_retries {
                        let delay = self.cfg.retry_backoff_ms.saturating_mul(1 << attempt);
                        std::thread::sleep(std::time::Duration::from_millis(delay));
                    }
                }
            }
        }
        Err(last.unwrap_or_else(|| GenError::EndpointUnreachable("no attempts made".into())))
    }

    fn stage_request(&self, stage: Stage, vars: &RenderVars<'_>) -> Result<ChatRequest, GenError> {
        let prompt = self.templates.render(stage, vars)?;
        let temperature = match stage {
            Stage::ProblemGen => self.cfg.problem_temperature,
            _ => self.cfg.temperature,
        };
        Ok(ChatRequest {
            prompt,
            temperature,
            top_p: self.cfg.top_p,
            want_logprobs: self.cfg.want_logprobs && stage == Stage::SolutionSampling,
            max_tokens: self.cfg.max_tokens,
        })
    }
}

impl<T: ChatTransport> GenerationSource for EndpointClient<T> {
    /// Generate problems, passing each through the difficulty-rating and
    /// skeleton stages. A problem whose payload or rating is malformed is
    /// dropped; a missing skeleton is tolerated (the field is optional).
    fn generate_problems(
        &self,
        count: u32,
        iteration: u32,
    ) -> Result<GenOutcome<Problem>, GenError> {
        if count < 1 {
            return Err(GenError::InvalidArgs("count must be >= 1".into()));
        }
        let mut report = GenReport {
            requested: count,
            ..GenReport::default()
        };
        let mut problems = Vec::new();
        for i in 0..count {
            let vars = RenderVars::default();
            let request = self.stage_request(Stage::ProblemGen, &vars)?;
            let completion = match self.send_with_retries(&request) {
                Ok(c) => c,
                Err(e @ (GenError::AuthFailure(_) | GenError::QuotaExhausted(_))) => {
                    return Err(e);
                }
                Err(_) => {
                    report.failed_requests += 1;
                    continue;
                }
            };
            let Some(draft) = parse_problem_payload(&completion.text) else {
                report.dropped_malformed += 1;
                continue;
            };

            let rating_vars = RenderVars {
                description: &draft.description,
                signature: &draft.function_signature,
                ..RenderVars::default()
            };
            let rating_request = self.stage_request(Stage::DifficultyRating, &rating_vars)?;
            let rating = match self.send_with_retries(&rating_request) {
                Ok(c) => parse_rating_payload(&c.text),
                Err(e @ (GenError::AuthFailure(_) | GenError::QuotaExhausted(_))) => return Err(e),
                Err(_) => {
                    report.failed_requests += 1;
                    continue;
                }
            };
            let Some(rating) = rating else {
                report.dropped_malformed += 1;
                continue;
            };

            let skeleton_request = self.stage_request(Stage::SkeletonGen, &rating_vars)?;
            let skeleton = match self.send_with_retries(&skeleton_request) {
                Ok(c) => parse_code_payload(&c.text),
                Err(e @ (GenError::AuthFailure(_) | GenError::QuotaExhausted(_))) => return Err(e),
                Err(_) => None,
            };

            let id = content_id(
                "prob",
                i as u64,
                &format!("{}\n{}\n{}", draft.title, draft.description, draft.function_signature),
            );
            problems.push(Problem {
                id,
                title: draft.title,
                description: draft.description,
                function_signature: draft.function_signature,
                difficulty: rating.difficulty,
                rating: rating.rating,
                skeleton,
                category: rating.category,
                iteration_born: iteration,
            });
        }
        if problems.is_empty() && report.failed_requests == count {
            return Err(GenError::EndpointUnreachable(
                "every generation request failed".into(),
            ));
        }
        report.produced = problems.len() as u32;
        Ok(GenOutcome {
            items: problems,
            report,
        })
    }

    /// Ask for a batch of assertion harnesses; each fenced block in the
    /// response becomes one test. Exact-text duplicates collapse and
    /// ordinals are re-densified to 0..m-1.
    fn generate_tests(
        &self,
        problem: &Problem,
        target_count: u32,
    ) -> Result<GenOutcome<TestCase>, GenError> {
        if target_count < 1 {
            return Err(GenError::InvalidArgs("target_count must be >= 1".into()));
        }
        let mut report = GenReport {
            requested: target_count,
            ..GenReport::default()
        };
        let vars = RenderVars {
            description: &problem.description,
            signature: &problem.function_signature,
            count: target_count,
            ..RenderVars::default()
        };
        let request = self.stage_request(Stage::TestGen, &vars)?;
        let completion = self.send_with_retries(&request)?;

        let blocks = parse::extract_fenced_blocks(&completion.text);
        if blocks.is_empty() {
            report.dropped_malformed += 1;
            return Ok(GenOutcome {
                items: Vec::new(),
                report,
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut tests = Vec::new();
        for block in blocks {
            let harness = block.trim().to_string();
            if harness.is_empty() {
                report.dropped_malformed += 1;
                continue;
            }
            if !seen.insert(harness.clone()) {
                continue; // exact duplicate
            }
            let ordinal = tests.len() as u32;
            tests.push(TestCase {
                id: content_id("test", ordinal as u64, &format!("{}\n{harness}", problem.id)),
                problem_id: problem.id.clone(),
                harness_code: harness,
                ordinal,
            });
        }
        report.produced = tests.len() as u32;
        Ok(GenOutcome {
            items: tests,
            report,
        })
    }

    /// Sample `n` candidates concurrently (bounded by `max_in_flight`).
    /// Failed requests are retried and then recorded as absent; malformed
    /// completions are dropped and counted.
    fn sample_solutions(&self, problem: &Problem, n: u32) -> Result<GenOutcome<Candidate>, GenError> {
        if n < 1 {
            return Err(GenError::InvalidArgs("n must be >= 1".into()));
        }
        let mut report = GenReport {
            requested: n,
            ..GenReport::default()
        };
        let vars = RenderVars {
            description: &problem.description,
            signature: &problem.function_signature,
            skeleton: problem.skeleton.as_deref().unwrap_or(""),
            ..RenderVars::default()
        };
        let request = self.stage_request(Stage::SolutionSampling, &vars)?;

        // Fan the batch out over a bounded worker pool; slot order keeps
        // the result deterministic given deterministic completions.
        let results: Vec<Option<Result<Completion, GenError>>> = {
            let mut slots: Vec<Option<Result<Completion, GenError>>> =
                (0..n).map(|_| None).collect();
            let next = std::sync::atomic::AtomicU32::new(0);
            let slot_refs = std::sync::Mutex::new(&mut slots);
            std::thread::scope(|scope| {
                for _ in 0..self.cfg.max_in_flight.min(n as usize) {
                    scope.spawn(|| loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= n {
                            return;
                        }
                        let result = self.send_with_retries(&request);
                        let mut guard = slot_refs.lock().unwrap();
                        guard[i as usize] = Some(result);
                    });
                }
            });
            slots
        };

        let mut candidates = Vec::new();
        for (i, slot) in results.into_iter().enumerate() {
            match slot.expect("every slot filled") {
                Ok(completion) => {
                    let Some(source) = parse_code_payload(&completion.text) else {
                        report.dropped_malformed += 1;
                        continue;
                    };
                    let token_logprobs = completion.token_logprobs.filter(|lps| {
                        !lps.is_empty() && lps.iter().all(|lp| *lp <= 0.0)
                    });
                    candidates.push(Candidate {
                        id: content_id("cand", i as u64, &source),
                        problem_id: problem.id.clone(),
                        source_code: source,
                        token_logprobs,
                        sampling_meta: SamplingMeta {
                            temperature: self.cfg.temperature,
                            top_p: self.cfg.top_p,
                            sample_index: i as u32,
                        },
                        iteration_born: problem.iteration_born,
                    });
                }
                Err(e @ (GenError::AuthFailure(_) | GenError::QuotaExhausted(_))) => return Err(e),
                Err(_) => report.failed_requests += 1,
            }
        }
        if candidates.is_empty() && report.failed_requests == n {
            return Err(GenError::EndpointUnreachable(
                "every sampling request failed".into(),
            ));
        }
        report.produced = candidates.len() as u32;
        Ok(GenOutcome {
            items: candidates,
            report,
        })
    }
}

/// A parsed corpus with its validation report.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub problems: Vec<Problem>,
    pub tests: Vec<TestCase>,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    File(#[from] JsonlError),
}

/// Load a corpus from three line-delimited files and validate referential
/// integrity. Violations are returned alongside the corpus, not raised.
pub fn ingest_files(
    problems_path: &Path,
    tests_path: &Path,
    candidates_path: &Path,
) -> Result<(Corpus, ValidationReport), IngestError> {
    let corpus = Corpus {
        problems: read_jsonl(problems_path)?,
        tests: read_jsonl(tests_path)?,
        candidates: read_jsonl(candidates_path)?,
    };
    let report = codeprobe_core::domain::validate_corpus(
        &corpus.problems,
        &corpus.tests,
        &corpus.candidates,
    );
    Ok((corpus, report))
}
