//! Acceptance suite: one test per acceptance criterion, each printing a
//! `[PASS]` line with its measured detail (visible with `--nocapture`).
//!
//! Run with: `cargo test -p codeprobe --test acceptance`

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use codeprobe::executor::{execute_pool, SandboxPolicy};
use codeprobe::jsonl::read_jsonl;
use codeprobe_core::analysis::{
    compare_filtered, lexical_entropy, pearson_r, DatasetEntry, SemanticCategory,
    SemanticTaxonomy,
};
use codeprobe_core::consensus::{
    pass_at_k, select_hierarchical, PoolCandidate, RejectionReason, SelectionConfig,
};
use codeprobe_core::domain::{Candidate, ExecutionSignature, ExecutionStatus, TestCase};
use codeprobe_core::seed::derive_seed;
use codeprobe_core::syntax::syntax_profile;
use codeprobe_core::theory::{
    min_tests_bound, simulate_consensus, simulate_dynamics, ConsensusSimParams,
    DynamicsSimParams, LiftEstimator,
};

fn pass_line(criterion: &str, detail: String, started: Instant) {
    println!(
        "[PASS] {criterion}: {detail} ({:.1}s)",
        started.elapsed().as_secs_f64()
    );
}

// Theorem validation: over the full parameter grid, the empirical
// correct-cluster rate clears the theoretical lower bound minus three
// binomial standard errors at every non-vacuous point.
#[test]
fn criterion_theorem_validation_grid() {
    let started = Instant::now();
    let trials = 10_000;
    let mut checked = 0usize;
    let mut vacuous = 0usize;
    let mut min_margin = f64::INFINITY;
    for n in [50u32, 100, 128] {
        for k in [5u32, 10, 25] {
            for p in [0.1f64, 0.25, 0.5] {
                let bound_m = min_tests_bound(n, k, p).unwrap().max(1);
                for m in [bound_m, bound_m + 2, bound_m + 6] {
                    let params = ConsensusSimParams {
                        n,
                        k,
                        p,
                        m,
                        trials,
                        rng_seed: derive_seed(
                            0xACCE97,
                            ((n as u64) << 32) ^ ((k as u64) << 16) ^ ((m as u64) << 8)
                                ^ (p * 100.0) as u64,
                        ),
                    };
                    let report = simulate_consensus(&params).unwrap();
                    if report.vacuous {
                        vacuous += 1;
                        continue;
                    }
                    checked += 1;
                    let margin = report.empirical_correct_rate
                        - (report.bound - 3.0 * report.std_error);
                    min_margin = min_margin.min(margin);
                    assert!(
                        report.bound_satisfied,
                        "bound violated at n={n} k={k} p={p} m={m}: rate {} < bound {} - 3se {}",
                        report.empirical_correct_rate, report.bound, report.std_error
                    );
                }
            }
        }
    }
    assert!(checked >= 10, "grid must contain non-vacuous points");
    pass_line(
        "theorem-validation",
        format!(
            "{checked} non-vacuous points ok ({vacuous} vacuous skipped), min margin {min_margin:.4}, {trials} trials/point"
        ),
        started,
    );
}

/// Synthetic pool with planted qualities: candidates pass each of `m` tests
/// with probability equal to their quality; the observed pass-fraction
/// stands in for the execution success rate.
fn planted_pool(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (Vec<PoolCandidate>, Vec<f64>) {
    use rand_distr::Distribution;
    let beta = rand_distr::Beta::new(1.2, 0.8).unwrap(); // mean 0.6, concentration 2
    let qualities: Vec<f64> = (0..n).map(|_| beta.sample(rng)).collect();
    let pool = qualities
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let bits: Vec<bool> = (0..m).map(|_| rng.gen_bool(q)).collect();
            let pass = bits.iter().filter(|b| **b).count() as f64 / m as f64;
            PoolCandidate {
                candidate_id: format!("c{i:03}"),
                signature: ExecutionSignature::new(bits),
                exec_success_rate: pass,
                perplexity: None,
                pass_fraction: pass,
                outputs: None,
            }
        })
        .collect();
    (pool, qualities)
}

// Quality lift: consensus selection picks candidates whose planted quality
// exceeds the pool mean (one-sided t-test, p < 0.01), and the dynamics
// simulation's mean-quality trace is non-decreasing across seeds.
#[test]
fn criterion_quality_lift_and_dynamics() {
    let started = Instant::now();
    let cfg = SelectionConfig::default();
    let mut deltas = Vec::with_capacity(1000);
    let mut rejected = 0usize;
    for trial in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0x11F7, trial));
        let (pool, qualities) = planted_pool(&mut rng, 64, 8);
        let result = select_hierarchical("lift", &pool, &cfg);
        match result.selected {
            Some(id) => {
                let idx: usize = id[1..].parse().unwrap();
                let pool_mean = qualities.iter().sum::<f64>() / qualities.len() as f64;
                deltas.push(qualities[idx] - pool_mean);
            }
            None => rejected += 1,
        }
    }
    assert!(rejected < 50, "{rejected} of 1000 pools rejected");
    let n = deltas.len() as f64;
    let mean = deltas.iter().sum::<f64>() / n;
    let sd = (deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = mean / (sd / n.sqrt());
    // One-sided critical value at p = 0.01 for ~1000 degrees of freedom.
    assert!(mean > 0.0 && t > 2.33, "delta {mean:.4}, t {t:.2}");

    let mut worst_step = f64::INFINITY;
    for seed in 0..100u64 {
        let params = DynamicsSimParams {
            initial_quality_mean: 0.5,
            initial_quality_concentration: 2.0,
            pool_size: 10_000,
            iterations: 5,
            lift_estimator: LiftEstimator::ConsensusProxy,
            rng_seed: derive_seed(0xD9A1, seed),
        };
        let trace = simulate_dynamics(&params).unwrap();
        assert_eq!(trace.len(), 5);
        for w in trace.windows(2) {
            let step = w[1].mean_quality - w[0].mean_quality;
            worst_step = worst_step.min(step);
            assert!(
                step >= 0.0,
                "seed {seed}: mean quality decreased {} -> {}",
                w[0].mean_quality,
                w[1].mean_quality
            );
        }
    }
    pass_line(
        "quality-lift",
        format!(
            "mean delta {mean:.4} over {} pools (t = {t:.1}); 100 dynamics traces non-decreasing (worst step {worst_step:+.5})",
            deltas.len()
        ),
        started,
    );
}

/// Independent brute-force reference of filter -> max-cluster ->
/// lexicographic argmax, sharing no code with the implementation.
fn brute_force_select(pool: &[PoolCandidate], cfg: &SelectionConfig) -> Result<String, RejectionReason> {
    if pool.is_empty() {
        return Err(RejectionReason::EmptyPool);
    }
    let survivors: Vec<&PoolCandidate> = pool
        .iter()
        .filter(|c| c.exec_success_rate >= cfg.rho)
        .collect();
    if survivors.is_empty() {
        return Err(RejectionReason::AllFiltered);
    }
    let mut groups: std::collections::HashMap<String, Vec<&PoolCandidate>> = Default::default();
    for c in &survivors {
        groups.entry(c.signature.to_string()).or_default().push(c);
    }
    let mut best: Option<(&str, &Vec<&PoolCandidate>, f64)> = None;
    for (key, members) in &groups {
        if (members.len() as u32) < cfg.tau {
            continue;
        }
        let mean_e =
            members.iter().map(|c| c.exec_success_rate).sum::<f64>() / members.len() as f64;
        let replace = match &best {
            None => true,
            Some((bk, bm, be)) => {
                if members.len() != bm.len() {
                    members.len() > bm.len()
                } else if mean_e != *be {
                    mean_e > *be
                } else {
                    key.as_str() < *bk
                }
            }
        };
        if replace {
            best = Some((key, members, mean_e));
        }
    }
    let Some((_, members, _)) = best else {
        return Err(RejectionReason::NoNontrivialCluster);
    };
    let mut winner = members[0];
    for c in &members[1..] {
        let (e1, f1) = (winner.exec_success_rate, winner.perplexity.unwrap_or(f64::INFINITY));
        let (e2, f2) = (c.exec_success_rate, c.perplexity.unwrap_or(f64::INFINITY));
        let wins = if e2 != e1 {
            e2 > e1
        } else if f2 != f1 {
            f2 < f1
        } else {
            c.candidate_id < winner.candidate_id
        };
        if wins {
            winner = c;
        }
    }
    Ok(winner.candidate_id.clone())
}

// Selection oracle equivalence: exact match on 10,000 randomized pools.
#[test]
fn criterion_selection_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x09AC1E);
    let cfg = SelectionConfig::default();
    let mut selections = 0usize;
    for trial in 0..10_000 {
        let n = rng.gen_range(1..=64);
        let m = rng.gen_range(1..=16);
        let pool: Vec<PoolCandidate> = (0..n)
            .map(|i| {
                let template: u64 = rng.gen_range(0..4);
                let bits: Vec<bool> = (0..m)
                    .map(|j| {
                        if rng.gen_bool(0.8) {
                            (template >> (j % 4)) & 1 == 1
                        } else {
                            rng.gen_bool(0.5)
                        }
                    })
                    .collect();
                let e = rng.gen_range(6..=10) as f64 / 10.0;
                PoolCandidate {
                    candidate_id: format!("c{i:03}"),
                    signature: ExecutionSignature::new(bits),
                    exec_success_rate: e,
                    perplexity: rng
                        .gen_bool(0.7)
                        .then(|| 1.0 + rng.gen_range(0..=20) as f64 / 100.0),
                    pass_fraction: e,
                    outputs: None,
                }
            })
            .collect();
        let expected = brute_force_select(&pool, &cfg);
        let actual = select_hierarchical("p", &pool, &cfg);
        let actual = match (actual.selected, actual.rejection_reason) {
            (Some(id), None) => Ok(id),
            (None, Some(reason)) => Err(reason),
            other => panic!("exactly one side must be set: {other:?}"),
        };
        assert_eq!(actual, expected, "trial {trial}");
        if actual.is_ok() {
            selections += 1;
        }
    }
    pass_line(
        "selection-oracle",
        format!("10000/10000 exact matches ({selections} selections)"),
        started,
    );
}

// Pass@k estimator: exhaustive subset enumeration for all n <= 8, plus the
// n=5, c=2, k=3 fixture.
#[test]
fn criterion_pass_at_k_enumeration() {
    let started = Instant::now();
    let mut points = 0usize;
    for n in 1u64..=8 {
        for c in 0..=n {
            for k in 1..=n {
                let mut containing = 0u64;
                let mut total = 0u64;
                for mask in 0u32..(1u32 << n) {
                    if mask.count_ones() as u64 != k {
                        continue;
                    }
                    total += 1;
                    if (0..c).any(|i| mask & (1 << i) != 0) {
                        containing += 1;
                    }
                }
                let expected = containing as f64 / total as f64;
                let actual = pass_at_k(n, c, k).unwrap();
                assert!(
                    (actual - expected).abs() < 1e-12,
                    "n={n} c={c} k={k}: {actual} vs {expected}"
                );
                points += 1;
            }
        }
    }
    let fixture = pass_at_k(5, 2, 3).unwrap();
    assert!((fixture - 0.9).abs() < 1e-12);
    pass_line(
        "pass-at-k",
        format!("{points} (n,c,k) points exact to 1e-12; pass@3(5,2) = {fixture}"),
        started,
    );
}

/// The planted 10x10 executor fixture: candidate i's expected status on
/// test ordinal j is fully known.
fn executor_fixture() -> (Vec<Candidate>, Vec<TestCase>, Vec<[ExecutionStatus; 10]>) {
    use ExecutionStatus::{Error, Fail, Pass, Timeout};
    let candidate = |id: &str, body: &str| Candidate {
        id: id.into(),
        problem_id: "probe".into(),
        source_code: format!("def probe(x):\n{body}"),
        token_logprobs: None,
        sampling_meta: Default::default(),
        iteration_born: 0,
    };
    let kill = "        import os\n        import signal\n        os.kill(os.getpid(), signal.SIGKILL)";
    let candidates = vec![
        candidate("c0", "    return x * x"),
        candidate("c1", "    return x ** 2"),
        candidate("c2", "    return x * x if x % 2 == 0 else -1"),
        candidate("c3", "    return -7"),
        candidate(
            "c4",
            "    import os\n    import signal\n    os.kill(os.getpid(), signal.SIGKILL)",
        ),
        candidate("c5", &format!("    if x >= 5:\n{kill}\n    return x * x")),
        candidate("c6", "    while True:\n        pass"),
        candidate(
            "c7",
            "    if x == 3:\n        while True:\n            pass\n    return x * x",
        ),
        candidate("c8", "    return x * x if x > 0 else 1"),
        candidate("c9", "    raise ValueError('nope')"),
    ];
    let tests: Vec<TestCase> = (0..10)
        .map(|i| TestCase {
            id: format!("t{i}"),
            problem_id: "probe".into(),
            harness_code: format!("assert probe({i}) == {}", i * i),
            ordinal: i as u32,
        })
        .collect();
    let row = |statuses: [ExecutionStatus; 10]| statuses;
    let expected = vec![
        row([Pass; 10]),
        row([Pass; 10]),
        row([Pass, Fail, Pass, Fail, Pass, Fail, Pass, Fail, Pass, Fail]),
        row([Fail; 10]),
        row([Error; 10]),
        row([Pass, Pass, Pass, Pass, Pass, Error, Error, Error, Error, Error]),
        row([Timeout; 10]),
        row([Pass, Pass, Pass, Timeout, Pass, Pass, Pass, Pass, Pass, Pass]),
        row([Fail, Pass, Pass, Pass, Pass, Pass, Pass, Pass, Pass, Pass]),
        row([Fail; 10]),
    ];
    (candidates, tests, expected)
}

fn status_matrix(
    outcomes: &[codeprobe_core::domain::ExecutionOutcome],
    candidates: &[Candidate],
    tests: &[TestCase],
) -> Vec<[ExecutionStatus; 10]> {
    let mut matrix = vec![[ExecutionStatus::Error; 10]; candidates.len()];
    for outcome in outcomes {
        let ci = candidates
            .iter()
            .position(|c| c.id == outcome.candidate_id)
            .unwrap();
        let ti = tests.iter().position(|t| t.id == outcome.test_id).unwrap();
        matrix[ci][tests[ti].ordinal as usize] = outcome.status;
    }
    matrix
}

// Executor soundness: the parallel execution matrix equals the planted
// fixture bit-for-bit across 20 repeated runs; timeout fixtures spin far
// beyond the 10x margin and fast fixtures finish far below it.
#[test]
fn criterion_executor_soundness() {
    let started = Instant::now();
    let (candidates, tests, expected) = executor_fixture();
    let policy = SandboxPolicy {
        time_limit_ms: 300,
        interpreter_command: "python3 -I -S {file}".into(),
        ..SandboxPolicy::default()
    };

    // Sequential reference.
    let reference = execute_pool(&candidates, &tests, &policy, 1).unwrap();
    assert_eq!(reference.len(), 100);
    let reference_matrix = status_matrix(&reference, &candidates, &tests);
    assert_eq!(reference_matrix, expected, "sequential reference vs plant");
    for outcome in &reference {
        if outcome.status == ExecutionStatus::Timeout {
            assert!(outcome.duration_ms >= policy.time_limit_ms);
        }
    }

    for run in 0..20 {
        let outcomes = execute_pool(&candidates, &tests, &policy, 8).unwrap();
        assert_eq!(outcomes.len(), 100);
        let matrix = status_matrix(&outcomes, &candidates, &tests);
        assert_eq!(matrix, expected, "parallel run {run} diverged from plant");
    }
    pass_line(
        "executor-soundness",
        "20 parallel runs x 100 executions identical to the sequential reference".into(),
        started,
    );
}

// End-to-end determinism: two `iterate` CLI runs against the stub backend
// with identical seeds produce byte-identical sft.jsonl.
#[test]
fn criterion_end_to_end_determinism() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("run.toml");
    std::fs::write(
        &config_path,
        r#"
[pipeline]
problems_per_iteration = 3
tests_per_problem = 6
candidates_per_problem = 8
max_iterations = 2
parallelism = 8

[sandbox]
time_limit_ms = 400
interpreter_command = "python3 -I -S {file}"
"#,
    )
    .unwrap();

    let run = |root: &std::path::Path| {
        let output = std::process::Command::new(env!("CARGO_BIN_EXE_codeprobe"))
            .args([
                "--config",
                config_path.to_str().unwrap(),
                "--output-root",
                root.to_str().unwrap(),
                "--seed",
                "424242",
                "iterate",
            ])
            .output()
            .expect("binary runs");
        assert_eq!(
            output.status.code(),
            Some(0),
            "iterate failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    };
    let root_a = dir.path().join("a");
    let root_b = dir.path().join("b");
    run(&root_a);
    run(&root_b);

    let mut compared = 0usize;
    for t in 0..2 {
        let a = std::fs::read(root_a.join(format!("iter-{t}/sft.jsonl"))).unwrap();
        let b = std::fs::read(root_b.join(format!("iter-{t}/sft.jsonl"))).unwrap();
        assert!(!a.is_empty(), "iteration {t} produced an empty dataset");
        assert_eq!(a, b, "iteration {t} sft.jsonl differs between runs");
        compared += 1;
    }
    // The records are substantive: parse and sanity-check one file.
    let records: Vec<codeprobe_core::domain::SftRecord> =
        read_jsonl(&root_a.join("iter-0/sft.jsonl")).unwrap();
    assert!(!records.is_empty());
    pass_line(
        "end-to-end-determinism",
        format!(
            "{compared} iterations byte-identical across runs ({} records in iter-0)",
            records.len()
        ),
        started,
    );
}

fn acceptance_taxonomy() -> SemanticTaxonomy {
    let mk = |name: &str, terms: &[&str]| SemanticCategory {
        name: name.into(),
        keywords: terms.iter().map(|t| ((*t).to_string(), 0.5)).collect(),
    };
    SemanticTaxonomy {
        categories: vec![
            mk("data_structures", &["list", "heap"]),
            mk("algorithms", &["sort", "greedy"]),
            mk("string_processing", &["reverse", "substring"]),
            mk("math", &["sum", "prime"]),
            mk("graphs", &["graph", "path"]),
            mk("dynamic_programming", &["memoization"]),
            mk("io_parsing", &["parse"]),
        ],
    }
}

/// Source templates with distinct construct mixes; the template choice is
/// independent of the planted quality.
const SOURCE_TEMPLATES: [(&str, &str); 6] = [
    ("def f(xs):\n    total = 0\n    for x in xs:\n        total += x\n    return total\n", "sum the list"),
    ("def f(xs):\n    if not xs:\n        return 0\n    return max(xs)\n", "largest heap value"),
    ("def f(xs):\n    return [x * x for x in xs]\n", "sort of squares"),
    ("def f(s):\n    return s[::-1]\n", "reverse the substring"),
    ("def f(n):\n    try:\n        return 1 // n\n    except ZeroDivisionError:\n        return 0\n", "parse a prime"),
    ("def f(a, b):\n    while b:\n        a, b = b, a % b\n    return a\n", "graph path gcd"),
];

// Analyzer oracles: the entropy, cyclomatic, and correlation fixtures, plus
// the filtering comparison on synthetic pools: consensus filtering raises
// the success rate without collapsing structural diversity.
#[test]
fn criterion_analyzer_oracles() {
    let started = Instant::now();

    // Entropy fixture: 1.5 bits.
    let h = lexical_entropy("a a b b c c c c").unwrap();
    assert!((h - 1.5).abs() < 1e-12, "entropy {h}");

    // Cyclomatic fixtures: 1 and 3.
    let straight = syntax_profile("def f(x):\n    y = x + 1\n    z = y * 2\n    return z\n").unwrap();
    assert_eq!(straight.cyclomatic, 1);
    let branched = syntax_profile(
        "def f(xs):\n    total = 0\n    for x in xs:\n        if x > 0:\n            total += x\n    return total\n",
    )
    .unwrap();
    assert_eq!(branched.cyclomatic, 3);

    // Pearson: affine invariance and fixture match to 1e-9.
    let xs = [1.2, 2.4, 3.1, 4.8, 5.5, 6.1, 7.9, 8.2, 9.6, 10.3];
    let ys = [0.9, 2.1, 2.8, 5.2, 5.1, 6.4, 7.5, 8.9, 9.1, 11.2];
    let r = pearson_r(&xs, &ys).unwrap();
    let expected = {
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let syy: f64 = ys.iter().map(|y| y * y).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    };
    assert!((r - expected).abs() < 1e-9);
    let xs2: Vec<f64> = xs.iter().map(|x| 2.5 * x + 3.0).collect();
    let ys2: Vec<f64> = ys.iter().map(|y| 0.2 * y - 10.0).collect();
    let r2 = pearson_r(&xs2, &ys2).unwrap();
    assert!((r - r2).abs() < 1e-9, "affine invariance violated");

    // Filtering comparison on seeded synthetic pools: the filtered subset is
    // the winning consensus cluster; source structure is independent of the
    // planted quality.
    let taxonomy = acceptance_taxonomy();
    let cfg = SelectionConfig::default();
    let mut success_deltas = Vec::new();
    let mut structural_rel_deltas = Vec::new();
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0xF16, seed));
        let (pool, _qualities) = planted_pool(&mut rng, 300, 8);
        let templates: Vec<usize> = (0..pool.len())
            .map(|_| rng.gen_range(0..SOURCE_TEMPLATES.len()))
            .collect();
        let entry = |i: usize| {
            let (source, text) = SOURCE_TEMPLATES[templates[i]];
            DatasetEntry {
                source_code: format!("{source}# v{i}\n"),
                text: text.to_string(),
                pass_fraction: pool[i].pass_fraction,
                error_free: true,
                profile: syntax_profile(source).ok(),
            }
        };
        let full: Vec<DatasetEntry> = (0..pool.len()).map(entry).collect();
        let result = select_hierarchical("syn", &pool, &cfg);
        let Some(cluster) = result.cluster else {
            continue;
        };
        let member_set: std::collections::BTreeSet<&str> =
            cluster.member_ids.iter().map(|s| s.as_str()).collect();
        let filtered: Vec<DatasetEntry> = (0..pool.len())
            .filter(|i| member_set.contains(pool[*i].candidate_id.as_str()))
            .map(entry)
            .collect();
        let report = compare_filtered(&full, &filtered, &taxonomy).unwrap();
        success_deltas.push(report.success_rate_delta);
        structural_rel_deltas
            .push(report.structural_entropy_delta.abs() / report.full.structural_entropy);
    }
    assert!(success_deltas.len() >= 45, "too many rejected pools");
    let mean_success = success_deltas.iter().sum::<f64>() / success_deltas.len() as f64;
    let mean_rel = structural_rel_deltas.iter().sum::<f64>() / structural_rel_deltas.len() as f64;
    assert!(mean_success > 0.0, "success-rate delta {mean_success}");
    assert!(mean_rel < 0.10, "structural entropy rel delta {mean_rel}");

    pass_line(
        "analyzer-oracles",
        format!(
            "entropy/cyclomatic/pearson fixtures exact; filtering: success delta {mean_success:+.3}, structural rel delta {mean_rel:.3} over {} pools",
            success_deltas.len()
        ),
        started,
    );
}

// Filter threshold boundary: e = 0.79 is rejected and e = 0.80 retained
// under rho = 0.8, with e computed from actual 100-outcome status vectors.
#[test]
fn criterion_filter_threshold_boundary() {
    let started = Instant::now();
    use codeprobe_core::signature::execution_success_rate;
    let statuses_79: Vec<ExecutionStatus> = (0..100)
        .map(|i| {
            if i < 21 {
                ExecutionStatus::Error
            } else {
                ExecutionStatus::Pass
            }
        })
        .collect();
    let statuses_80: Vec<ExecutionStatus> = (0..100)
        .map(|i| {
            if i < 20 {
                ExecutionStatus::Timeout
            } else {
                ExecutionStatus::Pass
            }
        })
        .collect();
    let e_79 = execution_success_rate(&statuses_79).unwrap();
    let e_80 = execution_success_rate(&statuses_80).unwrap();

    let cand = |id: &str, e: f64| PoolCandidate {
        candidate_id: id.into(),
        signature: "11".parse().unwrap(),
        exec_success_rate: e,
        perplexity: None,
        pass_fraction: e,
        outputs: None,
    };
    let cfg = SelectionConfig::default();

    let rejected = select_hierarchical("p", &[cand("a", e_79), cand("b", e_79)], &cfg);
    assert_eq!(rejected.rejection_reason, Some(RejectionReason::AllFiltered));

    let retained = select_hierarchical("p", &[cand("a", e_80), cand("b", e_80)], &cfg);
    assert!(retained.selected.is_some());
    assert_eq!(retained.scores.unwrap().e, 0.8);

    pass_line(
        "filter-threshold-boundary",
        format!("e={e_79} rejected, e={e_80} retained at rho=0.8"),
        started,
    );
}
