//! Deterministic offline generation backend.
//!
//! Synthesizes small arithmetic problems with executable assert-style tests
//! and a candidate pool of known composition: behaviorally identical correct
//! variants, several distinct wrong implementations, crash-on-signal
//! candidates, candidates that crash only on part of the input space, and
//! infinite loops. Everything derives from the seed, the iteration, and the
//! problem content, so reruns are byte-identical regardless of scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use codeprobe_core::domain::{Candidate, Difficulty, Problem, SamplingMeta, TestCase};
use codeprobe_core::seed::derive_seed;

use super::{GenError, GenOutcome, GenReport, GenerationSource};
use crate::ids::{content_id, stable_u64};

/// Seeded synthetic corpus source.
#[derive(Debug, Clone, Copy)]
pub struct StubSource {
    pub seed: u64,
}

impl StubSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Add,
    Sub,
    Max,
    Min,
    AbsDiff,
    Mul,
}

const OPS: [Op; 6] = [Op::Add, Op::Sub, Op::Max, Op::Min, Op::AbsDiff, Op::Mul];

impl Op {
    fn keyword(self) -> &'static str {
        match self {
            Op::Add => "sum",
            Op::Sub => "difference",
            Op::Max => "maximum",
            Op::Min => "minimum",
            Op::AbsDiff => "absolute difference",
            Op::Mul => "product",
        }
    }

    fn category(self) -> &'static str {
        match self {
            Op::Add => "math:add",
            Op::Sub => "math:sub",
            Op::Max => "math:max",
            Op::Min => "math:min",
            Op::AbsDiff => "math:absdiff",
            Op::Mul => "math:mul",
        }
    }

    fn from_category(category: Option<&str>) -> Op {
        match category {
            Some("math:sub") => Op::Sub,
            Some("math:max") => Op::Max,
            Some("math:min") => Op::Min,
            Some("math:absdiff") => Op::AbsDiff,
            Some("math:mul") => Op::Mul,
            _ => Op::Add,
        }
    }

    fn apply(self, a: i64, b: i64) -> i64 {
        match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Max => a.max(b),
            Op::Min => a.min(b),
            Op::AbsDiff => (a - b).abs(),
            Op::Mul => a * b,
        }
    }

    /// Behaviorally identical correct implementations with different shapes.
    fn correct_variants(self) -> [String; 4] {
        let expr: [String; 4] = match self {
            Op::Add => [
                "    return a + b".into(),
                "    return b + a".into(),
                "    total = a\n    total += b\n    return total".into(),
                "    return sum([a, b])".into(),
            ],
            Op::Sub => [
                "    return a - b".into(),
                "    return -(b - a)".into(),
                "    result = a\n    result -= b\n    return result".into(),
                "    return a + (-b)".into(),
            ],
            Op::Max => [
                "    return max(a, b)".into(),
                "    return a if a >= b else b".into(),
                "    best = a\n    if b > best:\n        best = b\n    return best".into(),
                "    return max([a, b])".into(),
            ],
            Op::Min => [
                "    return min(a, b)".into(),
                "    return a if a <= b else b".into(),
                "    low = a\n    if b < low:\n        low = b\n    return low".into(),
                "    return min([a, b])".into(),
            ],
            Op::AbsDiff => [
                "    return abs(a - b)".into(),
                "    return abs(b - a)".into(),
                "    d = a - b\n    if d < 0:\n        d = -d\n    return d".into(),
                "    return max(a, b) - min(a, b)".into(),
            ],
            Op::Mul => [
                "    return a * b".into(),
                "    return b * a".into(),
                "    result = a\n    result *= b\n    return result".into(),
                "    total = 0\n    for _ in range(abs(b)):\n        total += a\n    return total if b >= 0 else -total".into(),
            ],
        };
        expr.map(|body| format!("def solve(a, b):\n{body}"))
    }

    /// Plausible-but-wrong implementations; each is wrong in its own way so
    /// failures scatter across distinct signatures.
    fn wrong_variants(self) -> [String; 3] {
        let bodies: [String; 3] = match self {
            Op::Add => [
                "    return a - b".into(),
                "    return a + b + 1".into(),
                "    return a * b".into(),
            ],
            Op::Sub => [
                "    return b - a".into(),
                "    return a - b - 1".into(),
                "    return abs(a - b)".into(),
            ],
            Op::Max => [
                "    return min(a, b)".into(),
                "    return a".into(),
                "    return a if a > b else b - 1".into(),
            ],
            Op::Min => [
                "    return max(a, b)".into(),
                "    return b".into(),
                "    return a if a < b else b + 1".into(),
            ],
            Op::AbsDiff => [
                "    return a - b".into(),
                "    return abs(a + b)".into(),
                "    return abs(a) - abs(b)".into(),
            ],
            Op::Mul => [
                "    return a * b + 1".into(),
                "    return a * a".into(),
                "    return a + b".into(),
            ],
        };
        bodies.map(|body| format!("def solve(a, b):\n{body}"))
    }

    fn crash_variant(self) -> String {
        "def solve(a, b):\n    import os\n    import signal\n    os.kill(os.getpid(), signal.SIGKILL)".into()
    }

    fn flaky_variant(self) -> String {
        // Crashes on part of the input space, yielding 0 < e < 1.
        let body = match self {
            Op::Add => "a + b",
            Op::Sub => "a - b",
            Op::Max => "max(a, b)",
            Op::Min => "min(a, b)",
            Op::AbsDiff => "abs(a - b)",
            Op::Mul => "a * b",
        };
        format!(
            "def solve(a, b):\n    if a > 10:\n        import os\n        import signal\n        os.kill(os.getpid(), signal.SIGKILL)\n    return {body}"
        )
    }

    fn spin_variant(self) -> String {
        "def solve(a, b):\n    while True:\n        pass".into()
    }
}

const FILLERS: [&str; 6] = [
    "The inputs may be negative or zero.",
    "Inputs fit comfortably in native integers.",
    "Both values are supplied as plain integers.",
    "The function is called once per test.",
    "No input validation is required beyond the stated range.",
    "Arguments arrive in the order given by the signature.",
];

const LEADS: [&str; 4] = [
    "Compute",
    "Return",
    "Calculate",
    "Produce",
];

impl GenerationSource for StubSource {
    fn generate_problems(
        &self,
        count: u32,
        iteration: u32,
    ) -> Result<GenOutcome<Problem>, GenError> {
        if count < 1 {
            return Err(GenError::InvalidArgs("count must be >= 1".into()));
        }
        let mut problems = Vec::with_capacity(count as usize);
        for i in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                self.seed,
                ((iteration as u64) << 32) | i as u64,
            ));
            let op = OPS[rng.gen_range(0..OPS.len())];
            let lead = LEADS[rng.gen_range(0..LEADS.len())];
            let filler_a = FILLERS[rng.gen_range(0..FILLERS.len())];
            let filler_b = FILLERS[rng.gen_range(0..FILLERS.len())];
            let bound = rng.gen_range(40..=90);
            let description = format!(
                "{lead} the {} of two integers a and b. {filler_a} {filler_b} \
                 It is guaranteed that -{bound} <= a, b <= {bound}. \
                 Return the result as an integer.",
                op.keyword(),
            );
            let title = format!("Pairwise {}", op.keyword());
            let signature = "def solve(a, b):".to_string();
            let rating = rng.gen_range(5..=40) as f64 / 10.0;
            let difficulty = if rating <= 10.0 / 3.0 {
                Difficulty::Easy
            } else {
                Difficulty::Medium
            };
            let id = content_id(
                "prob",
                i as u64,
                &format!("{title}\n{description}\n{signature}"),
            );
            problems.push(Problem {
                id,
                title,
                description,
                function_signature: signature,
                difficulty,
                rating,
                skeleton: Some(
                    "def solve(a, b):\n    # combine a and b\n    result = 0\n    return result"
                        .into(),
                ),
                category: Some(op.category().into()),
                iteration_born: iteration,
            });
        }
        Ok(GenOutcome {
            report: GenReport {
                requested: count,
                produced: problems.len() as u32,
                ..GenReport::default()
            },
            items: problems,
        })
    }

    fn generate_tests(
        &self,
        problem: &Problem,
        target_count: u32,
    ) -> Result<GenOutcome<TestCase>, GenError> {
        if target_count < 1 {
            return Err(GenError::InvalidArgs("target_count must be >= 1".into()));
        }
        let op = Op::from_category(problem.category.as_deref());
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(self.seed, stable_u64(&problem.id) ^ 0x7e57));
        let mut seen = std::collections::BTreeSet::new();
        let mut tests = Vec::with_capacity(target_count as usize);
        while tests.len() < target_count as usize {
            let a = rng.gen_range(-60i64..=60);
            let b = rng.gen_range(-60i64..=60);
            if !seen.insert((a, b)) {
                continue;
            }
            let expected = op.apply(a, b);
            let ordinal = tests.len() as u32;
            let harness = format!("assert solve({a}, {b}) == {expected}");
            tests.push(TestCase {
                id: content_id("test", ordinal as u64, &format!("{}\n{harness}", problem.id)),
                problem_id: problem.id.clone(),
                harness_code: harness,
                ordinal,
            });
        }
        Ok(GenOutcome {
            report: GenReport {
                requested: target_count,
                produced: tests.len() as u32,
                ..GenReport::default()
            },
            items: tests,
        })
    }

    fn sample_solutions(&self, problem: &Problem, n: u32) -> Result<GenOutcome<Candidate>, GenError> {
        if n < 1 {
            return Err(GenError::InvalidArgs("n must be >= 1".into()));
        }
        let op = Op::from_category(problem.category.as_deref());
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(self.seed, stable_u64(&problem.id) ^ 0xca4d));
        let mut candidates = Vec::with_capacity(n as usize);
        for i in 0..n {
            let roll: f64 = rng.gen();
            // Composition:.40 correct, .40 wrong, .08 crash, .06 flaky, .06 spin.
            let (source, logprob_center) = if roll < 0.40 {
                let v = &op.correct_variants()[rng.gen_range(0..4)];
                (v.clone(), -0.04)
            } else if roll < 0.80 {
                let v = &op.wrong_variants()[rng.gen_range(0..3)];
                (v.clone(), -0.25)
            } else if roll < 0.88 {
                (op.crash_variant(), -0.55)
            } else if roll < 0.94 {
                (op.flaky_variant(), -0.45)
            } else {
                (op.spin_variant(), -0.60)
            };
            // A tail of candidates arrives without logprobs, as file-ingested
            // pools would.
            let token_logprobs = if rng.gen_bool(0.95) {
                let len = rng.gen_range(12..=28);
                Some(
                    (0..len)
                        .map(|_| (logprob_center + rng.gen_range(-15..=15) as f64 / 1000.0).min(0.0))
                        .collect(),
                )
            } else {
                None
            };
            candidates.push(Candidate {
                id: content_id("cand", i as u64, &source),
                problem_id: problem.id.clone(),
                source_code: source,
                token_logprobs,
                sampling_meta: SamplingMeta {
                    temperature: 0.8,
                    top_p: 0.95,
                    sample_index: i,
                },
                iteration_born: problem.iteration_born,
            });
        }
        Ok(GenOutcome {
            report: GenReport {
                requested: n,
                produced: candidates.len() as u32,
                ..GenReport::default()
            },
            items: candidates,
        })
    }
}
