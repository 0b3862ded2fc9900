//! Corpus diversity diagnostics: lexical entropy, complexity and semantic
//! coverage scoring, perplexity stratification, and filtered-vs-full dataset
//! comparison.
//!
//! Keyword lists, component caps, and weights are configuration, not code —
//! the companion crate ships the default data files. Every score here is a
//! pure function of its inputs so reports are reproducible given the same
//! config.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::perplexity;
use crate::domain::{Candidate, Problem};
use crate::stats::{self, Histogram, SummaryStats};
use crate::syntax::{syntax_profile, Construct, SyntaxProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("text has no tokens")]
pub struct EmptyText;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PearsonError {
    #[error("need at least two paired samples of equal length")]
    TooFewSamples,
    #[error("an argument has zero variance")]
    DegenerateInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no candidate carries both perplexity and execution results")]
pub struct NoScoredCandidates;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("dataset is empty")]
pub struct EmptyDataset;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("complexity weights must be non-negative and sum to 1, got {0}")]
    BadWeights(f64),
    #[error("component caps must be >= 1")]
    ZeroCap,
    #[error("taxonomy must have exactly 7 categories, got {0}")]
    WrongCategoryCount(usize),
    #[error("taxonomy category {0} has an empty keyword list")]
    EmptyCategory(String),
    #[error("taxonomy keyword {0:?} is not lowercase")]
    NonLowercaseKeyword(String),
}

/// Tokenize text the way every analyzer metric does: lowercase, split on
/// non-alphanumeric characters, drop empties.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

/// Shannon entropy in bits of the text's token frequency distribution.
pub fn lexical_entropy(text: &str) -> Result<f64, EmptyText> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(EmptyText);
    }
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for t in &tokens {
        *counts.entry(t).or_insert(0) += 1;
    }
    Ok(stats::entropy_bits(counts.values().map(|c| *c as f64)))
}

/// Saturation points normalizing each complexity component to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentCaps {
    pub params: u32,
    pub length_tokens: u32,
    pub keywords: u32,
    pub constraints: u32,
}

/// Weights and caps for the 0-10 complexity score aggregating parameter
/// count, description length, algorithmic keywords, and constraint phrases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityWeights {
    pub w_params: f64,
    pub w_length: f64,
    pub w_keywords: f64,
    pub w_constraints: f64,
    pub caps: ComponentCaps,
}

impl Default for ComplexityWeights {
    fn default() -> Self {
        Self {
            w_params: 0.25,
            w_length: 0.25,
            w_keywords: 0.25,
            w_constraints: 0.25,
            caps: ComponentCaps {
                params: 6,
                length_tokens: 240,
                keywords: 8,
                constraints: 6,
            },
        }
    }
}

impl ComplexityWeights {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let ws = [self.w_params, self.w_length, self.w_keywords, self.w_constraints];
        if ws.iter().any(|w| *w < 0.0) {
            return Err(ConfigError::BadWeights(f64::NAN));
        }
        let sum: f64 = ws.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::BadWeights(sum));
        }
        let caps = &self.caps;
        if caps.params == 0 || caps.length_tokens == 0 || caps.keywords == 0 || caps.constraints == 0
        {
            return Err(ConfigError::ZeroCap);
        }
        Ok(())
    }
}

/// Seven named keyword categories with per-keyword weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticTaxonomy {
    pub categories: Vec<SemanticCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticCategory {
    pub name: String,
    /// Keyword (lowercase, possibly multi-word) to weight.
    pub keywords: BTreeMap<String, f64>,
}

impl SemanticTaxonomy {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.categories.len() != 7 {
            return Err(ConfigError::WrongCategoryCount(self.categories.len()));
        }
        for cat in &self.categories {
            if cat.keywords.is_empty() {
                return Err(ConfigError::EmptyCategory(cat.name.clone()));
            }
            for kw in cat.keywords.keys() {
                if kw.chars().any(|c| c.is_uppercase()) {
                    return Err(ConfigError::NonLowercaseKeyword(kw.clone()));
                }
            }
        }
        Ok(())
    }

    /// Union of all keywords, for the complexity score's keyword component.
    pub fn all_keywords(&self) -> BTreeSet<&str> {
        self.categories
            .iter()
            .flat_map(|c| c.keywords.keys().map(|k| k.as_str()))
            .collect()
    }
}

/// Whether the tokenized `keyword` occurs as a contiguous token run in
/// `tokens`. Single-word keywords reduce to whole-token membership.
fn keyword_matches(tokens: &[String], keyword: &str) -> bool {
    let kw_tokens = tokenize(keyword);
    if kw_tokens.is_empty() || kw_tokens.len() > tokens.len() {
        return false;
    }
    tokens
        .windows(kw_tokens.len())
        .any(|w| w.iter().zip(&kw_tokens).all(|(a, b)| a == b))
}

/// Count parameters in an entry-point signature: comma-separated entries at
/// the top nesting level of the first parenthesized group.
pub fn count_signature_params(function_signature: &str) -> u32 {
    let Some(open) = function_signature.find('(') else {
        return 0;
    };
    let inner = &function_signature[open + 1..];
    let mut depth = 0i32;
    let mut current_len = 0usize;
    let mut count = 0u32;
    for c in inner.chars() {
        match c {
            '(' | '[' | '{' => {
                depth += 1;
                current_len += 1;
            }
            ')' | ']' | '}' if depth > 0 => {
                depth -= 1;
                current_len += 1;
            }
            ')' => {
                if current_len > 0 {
                    count += 1;
                }
                return count;
            }
            ',' if depth == 0 => {
                if current_len > 0 {
                    count += 1;
                }
                current_len = 0;
            }
            c if c.is_whitespace() => {}
            _ => current_len += 1,
        }
    }
    if current_len > 0 {
        count += 1;
    }
    count
}

/// Count total occurrences of constraint phrases in the lowercased
/// description (substring matches, non-overlapping per phrase).
pub fn count_constraint_hits(description: &str, markers: &[String]) -> u32 {
    let text = description.to_lowercase();
    let mut hits = 0u32;
    for marker in markers {
        if marker.is_empty() {
            continue;
        }
        let mut rest = text.as_str();
        while let Some(pos) = rest.find(marker.as_str()) {
            hits += 1;
            rest = &rest[pos + marker.len()..];
        }
    }
    hits
}

/// The 0-10 problem complexity score: each component is normalized by its
/// cap, clamped to 1, combined by the weights, and scaled by 10.
pub fn complexity_score(
    problem: &Problem,
    weights: &ComplexityWeights,
    algorithmic_keywords: &BTreeSet<&str>,
    constraint_markers: &[String],
) -> f64 {
    let tokens = tokenize(&problem.description);
    let params = count_signature_params(&problem.function_signature);
    let keyword_hits = algorithmic_keywords
        .iter()
        .filter(|kw| keyword_matches(&tokens, kw))
        .count() as u32;
    let constraint_hits = count_constraint_hits(&problem.description, constraint_markers);

    let caps = &weights.caps;
    let component = |x: u32, cap: u32| (x as f64 / cap as f64).min(1.0);
    10.0 * (weights.w_params * component(params, caps.params)
        + weights.w_length * component(tokens.len() as u32, caps.length_tokens)
        + weights.w_keywords * component(keyword_hits, caps.keywords)
        + weights.w_constraints * component(constraint_hits, caps.constraints))
}

/// Per-category and total semantic coverage of a problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticCoverage {
    /// Sum of matched keyword weights across categories, clamped to [0, 10].
    pub score: f64,
    pub per_category: BTreeMap<String, f64>,
}

/// Score a problem against the taxonomy: each category contributes the sum
/// of weights of its keywords that appear (whole-token) in the description.
pub fn semantic_coverage(problem: &Problem, taxonomy: &SemanticTaxonomy) -> SemanticCoverage {
    semantic_coverage_of_text(&problem.description, taxonomy)
}

/// Same scoring applied to raw text (used for dataset-level comparisons).
pub fn semantic_coverage_of_text(text: &str, taxonomy: &SemanticTaxonomy) -> SemanticCoverage {
    let tokens = tokenize(text);
    let mut per_category = BTreeMap::new();
    let mut total = 0.0;
    for cat in &taxonomy.categories {
        let score: f64 = cat
            .keywords
            .iter()
            .filter(|(kw, _)| keyword_matches(&tokens, kw))
            .map(|(_, w)| *w)
            .sum();
        total += score;
        per_category.insert(cat.name.clone(), score);
    }
    SemanticCoverage {
        score: total.clamp(0.0, 10.0),
        per_category,
    }
}

/// Sample Pearson correlation coefficient.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64, PearsonError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(PearsonError::TooFewSamples);
    }
    let n = xs.len() as f64;
    let mx = stats::mean(xs);
    let my = stats::mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let _ = n;
    if sxx == 0.0 || syy == 0.0 {
        return Err(PearsonError::DegenerateInput);
    }
    Ok(sxy / libm::sqrt(sxx * syy))
}

/// One scored candidate for perplexity stratification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerplexityEntry {
    pub perplexity: f64,
    pub pass_fraction: f64,
}

/// Pass-fraction above which a candidate counts as high-success.
pub const HIGH_SUCCESS_CUT: f64 = 0.8;

/// Quartiles of perplexity plus a 2x2 contingency of low perplexity against
/// high execution success.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratificationReport {
    pub count: u64,
    pub threshold: f64,
    /// q1, median, q3 of perplexity.
    pub quartiles: [f64; 3],
    pub low_f_high_success: u64,
    pub low_f_low_success: u64,
    pub high_f_high_success: u64,
    pub high_f_low_success: u64,
    /// Fraction of high-success candidates with perplexity at or below the
    /// threshold; absent when there are no high-success candidates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high_success_below_threshold: Option<f64>,
    /// Unconditional fraction at or below the threshold.
    pub below_threshold: f64,
}

pub fn stratify_by_perplexity(
    entries: &[PerplexityEntry],
    threshold: f64,
) -> Result<StratificationReport, NoScoredCandidates> {
    if entries.is_empty() {
        return Err(NoScoredCandidates);
    }
    let mut sorted: Vec<f64> = entries.iter().map(|e| e.perplexity).collect();
    sorted.sort_by(f64::total_cmp);
    let quartiles = [
        stats::quantile(&sorted, 0.25),
        stats::quantile(&sorted, 0.5),
        stats::quantile(&sorted, 0.75),
    ];

    let mut cells = [0u64; 4];
    for e in entries {
        let low_f = e.perplexity <= threshold;
        let high_success = e.pass_fraction >= HIGH_SUCCESS_CUT;
        let idx = match (low_f, high_success) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        cells[idx] += 1;
    }
    let high_success_total = cells[0] + cells[2];
    Ok(StratificationReport {
        count: entries.len() as u64,
        threshold,
        quartiles,
        low_f_high_success: cells[0],
        low_f_low_success: cells[1],
        high_f_high_success: cells[2],
        high_f_low_success: cells[3],
        high_success_below_threshold: (high_success_total > 0)
            .then(|| cells[0] as f64 / high_success_total as f64),
        below_threshold: (cells[0] + cells[1]) as f64 / entries.len() as f64,
    })
}

/// One training example as seen by the filtered-vs-full comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub source_code: String,
    /// Instruction or problem text, scored against the semantic taxonomy.
    pub text: String,
    pub pass_fraction: f64,
    /// True when no execution produced an error or timeout.
    pub error_free: bool,
    pub profile: Option<SyntaxProfile>,
}

/// Quality and diversity measurements of one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    /// Mean pass-fraction.
    pub success_rate: f64,
    /// Fraction of entries whose executions were all error-free.
    pub error_free_rate: f64,
    /// Distinct source texts over total entries.
    pub uniqueness_ratio: f64,
    /// Entropy in bits of the aggregate construct histogram.
    pub structural_entropy: f64,
    /// Entropy in bits of the aggregate per-category semantic mass.
    pub semantic_entropy: f64,
}

/// Side-by-side metrics with filtered-minus-full deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub full: DatasetMetrics,
    pub filtered: DatasetMetrics,
    pub success_rate_delta: f64,
    pub error_free_rate_delta: f64,
    pub uniqueness_delta: f64,
    pub structural_entropy_delta: f64,
    pub semantic_entropy_delta: f64,
}

fn dataset_metrics(entries: &[DatasetEntry], taxonomy: &SemanticTaxonomy) -> DatasetMetrics {
    let n = entries.len() as f64;
    let success_rate = entries.iter().map(|e| e.pass_fraction).sum::<f64>() / n;
    let error_free_rate = entries.iter().filter(|e| e.error_free).count() as f64 / n;
    let distinct: BTreeSet<&str> = entries.iter().map(|e| e.source_code.as_str()).collect();

    let mut construct_totals: BTreeMap<Construct, u64> = BTreeMap::new();
    for e in entries.iter().filter_map(|e| e.profile.as_ref()) {
        for (c, count) in &e.node_histogram {
            *construct_totals.entry(*c).or_insert(0) += *count as u64;
        }
    }
    let mut semantic_totals: BTreeMap<String, f64> = BTreeMap::new();
    for e in entries {
        let coverage = semantic_coverage_of_text(&e.text, taxonomy);
        for (cat, score) in coverage.per_category {
            *semantic_totals.entry(cat).or_insert(0.0) += score;
        }
    }

    DatasetMetrics {
        success_rate,
        error_free_rate,
        uniqueness_ratio: distinct.len() as f64 / n,
        structural_entropy: stats::entropy_bits(construct_totals.values().map(|c| *c as f64)),
        semantic_entropy: stats::entropy_bits(semantic_totals.values().copied()),
    }
}

/// Compare a filtered dataset against the full dataset it came from.
pub fn compare_filtered(
    full: &[DatasetEntry],
    filtered: &[DatasetEntry],
    taxonomy: &SemanticTaxonomy,
) -> Result<ComparisonReport, EmptyDataset> {
    if full.is_empty() || filtered.is_empty() {
        return Err(EmptyDataset);
    }
    let full_metrics = dataset_metrics(full, taxonomy);
    let filtered_metrics = dataset_metrics(filtered, taxonomy);
    Ok(ComparisonReport {
        success_rate_delta: filtered_metrics.success_rate - full_metrics.success_rate,
        error_free_rate_delta: filtered_metrics.error_free_rate - full_metrics.error_free_rate,
        uniqueness_delta: filtered_metrics.uniqueness_ratio - full_metrics.uniqueness_ratio,
        structural_entropy_delta: filtered_metrics.structural_entropy
            - full_metrics.structural_entropy,
        semantic_entropy_delta: filtered_metrics.semantic_entropy - full_metrics.semantic_entropy,
        full: full_metrics,
        filtered: filtered_metrics,
    })
}

/// Distribution of per-problem lexical entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyStats {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    /// Histogram over [0, 10] bits; carries the CDF per bin.
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityStats {
    pub mean: f64,
    pub std: f64,
    pub quartiles: [f64; 3],
}

/// Corpus-level diversity report: the quantities behind entropy, complexity
/// vs semantic coverage, syntax-structure, and perplexity plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub problem_count: u64,
    pub candidate_count: u64,
    pub entropy_stats: EntropyStats,
    pub complexity_stats: SummaryStats,
    pub semantic_stats: SummaryStats,
    /// Pearson r between complexity and semantic coverage; absent when
    /// either is degenerate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_r: Option<f64>,
    pub ast_node_histogram: BTreeMap<Construct, u64>,
    pub cyclomatic_stats: SummaryStats,
    pub length_stats: SummaryStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perplexity_stats: Option<PerplexityStats>,
    /// Candidates profiled vs rejected by the tolerant parser, so coverage
    /// is visible in every report.
    pub profiled_count: u64,
    pub unprofiled_count: u64,
}

/// Per-problem and per-candidate raw values backing a [`DiversityReport`],
/// for plot-data emission.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiversitySamples {
    pub entropy: Vec<f64>,
    /// (problem_id, complexity, semantic) triples.
    pub scores: Vec<(String, f64, f64)>,
    pub cyclomatic: Vec<f64>,
    pub lines: Vec<f64>,
    pub perplexity: Vec<f64>,
}

/// Compute the full diversity report plus the raw per-item samples.
pub fn build_diversity_report(
    problems: &[Problem],
    candidates: &[Candidate],
    weights: &ComplexityWeights,
    taxonomy: &SemanticTaxonomy,
    constraint_markers: &[String],
) -> (DiversityReport, DiversitySamples) {
    let keywords = taxonomy.all_keywords();
    let mut samples = DiversitySamples::default();

    for p in problems {
        if let Ok(h) = lexical_entropy(&p.description) {
            samples.entropy.push(h);
        }
        let complexity = complexity_score(p, weights, &keywords, constraint_markers);
        let semantic = semantic_coverage(p, taxonomy).score;
        samples.scores.push((p.id.clone(), complexity, semantic));
    }

    let mut ast_node_histogram: BTreeMap<Construct, u64> = BTreeMap::new();
    let mut profiled = 0u64;
    let mut unprofiled = 0u64;
    for c in candidates {
        match syntax_profile(&c.source_code) {
            Ok(profile) => {
                profiled += 1;
                for (construct, count) in &profile.node_histogram {
                    *ast_node_histogram.entry(*construct).or_insert(0) += *count as u64;
                }
                samples.cyclomatic.push(profile.cyclomatic as f64);
                samples.lines.push(profile.lines as f64);
            }
            Err(_) => unprofiled += 1,
        }
        if let Some(lps) = &c.token_logprobs {
            if let Ok(f) = perplexity(lps) {
                samples.perplexity.push(f);
            }
        }
    }

    let complexities: Vec<f64> = samples.scores.iter().map(|s| s.1).collect();
    let semantics: Vec<f64> = samples.scores.iter().map(|s| s.2).collect();
    let correlation_r = pearson_r(&complexities, &semantics).ok();

    let perplexity_stats = (!samples.perplexity.is_empty()).then(|| {
        let mut sorted = samples.perplexity.clone();
        sorted.sort_by(f64::total_cmp);
        PerplexityStats {
            mean: stats::mean(&samples.perplexity),
            std: stats::sample_std(&samples.perplexity),
            quartiles: [
                stats::quantile(&sorted, 0.25),
                stats::quantile(&sorted, 0.5),
                stats::quantile(&sorted, 0.75),
            ],
        }
    });

    let entropy_summary = stats::summarize(&samples.entropy);
    let report = DiversityReport {
        problem_count: problems.len() as u64,
        candidate_count: candidates.len() as u64,
        entropy_stats: EntropyStats {
            mean: entropy_summary.mean,
            std: entropy_summary.std,
            median: entropy_summary.median,
            histogram: Histogram::build(&samples.entropy, 0.0, 10.0, 40),
        },
        complexity_stats: stats::summarize(&complexities),
        semantic_stats: stats::summarize(&semantics),
        correlation_r,
        ast_node_histogram,
        cyclomatic_stats: stats::summarize(&samples.cyclomatic),
        length_stats: stats::summarize(&samples.lines),
        perplexity_stats,
        profiled_count: profiled,
        unprofiled_count: unprofiled,
    };
    (report, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Difficulty;
    use alloc::vec;

    fn taxonomy() -> SemanticTaxonomy {
        let names = [
            "data_structures",
            "algorithms",
            "string_processing",
            "math",
            "graphs",
            "dynamic_programming",
            "io_parsing",
        ];
        let keywords: [&[(&str, f64)]; 7] = [
            &[("stack", 0.5), ("queue", 0.5), ("heap", 0.5)],
            &[("dijkstra", 0.5), ("greedy", 0.5), ("sort", 0.5)],
            &[("substring", 0.5), ("palindrome", 0.5)],
            &[("prime", 0.5), ("modulo", 0.5)],
            &[("graph", 0.5), ("traversal", 0.5)],
            &[("memoization", 0.5), ("dynamic programming", 0.7)],
            &[("parse", 0.5), ("tokenize", 0.5)],
        ];
        SemanticTaxonomy {
            categories: names
                .iter()
                .zip(keywords)
                .map(|(name, kws)| SemanticCategory {
                    name: (*name).into(),
                    keywords: kws.iter().map(|(k, w)| ((*k).into(), *w)).collect(),
                })
                .collect(),
        }
    }

    fn problem(description: &str, signature: &str) -> Problem {
        Problem {
            id: "p0".into(),
            title: "t".into(),
            description: description.into(),
            function_signature: signature.into(),
            difficulty: Difficulty::Easy,
            rating: 5.0,
            skeleton: None,
            category: None,
            iteration_born: 0,
        }
    }

    #[test]
    fn entropy_of_eight_distinct_tokens_is_three_bits() {
        let h = lexical_entropy("a b c d e f g h").unwrap();
        assert!((h - 3.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_of_repeated_token_is_zero() {
        let text = vec!["loop"; 50].join(" ");
        assert_eq!(lexical_entropy(&text).unwrap(), 0.0);
    }

    // Oracle: hand evaluation of -(1/4 log 1/4 + 1/4 log 1/4 + 1/2 log 1/2).
    #[test]
    fn entropy_fixture_is_one_and_a_half_bits() {
        let h = lexical_entropy("a a b b c c c c").unwrap();
        assert!((h - 1.5).abs() < 1e-12);
    }

    #[test]
    fn entropy_is_invariant_under_duplication_and_case() {
        let text = "reverse the linked list in place";
        let h1 = lexical_entropy(text).unwrap();
        let doubled = alloc::format!("{text} {text}");
        let h2 = lexical_entropy(&doubled).unwrap();
        assert!((h1 - h2).abs() < 1e-12);
        let upper = lexical_entropy("REVERSE the Linked LIST in place").unwrap();
        assert!((h1 - upper).abs() < 1e-12);
        assert_eq!(lexical_entropy("... !!"), Err(EmptyText));
    }

    #[test]
    fn signature_param_counting() {
        assert_eq!(count_signature_params("def add(a, b):"), 2);
        assert_eq!(count_signature_params("def f():"), 0);
        assert_eq!(count_signature_params("def g(xs, mapping={1: (2, 3)}, k=7):"), 3);
        assert_eq!(count_signature_params("no parens here"), 0);
    }

    #[test]
    fn minimal_problem_scores_near_zero() {
        let p = problem("sum", "def f():");
        let score = complexity_score(
            &p,
            &ComplexityWeights::default(),
            &taxonomy().all_keywords(),
            &[],
        );
        assert!(score < 1.0, "score {score}");
    }

    #[test]
    fn saturating_problem_scores_ten() {
        let description = alloc::format!(
            "{} stack queue heap dijkstra greedy sort substring palindrome prime modulo \
             graph traversal memoization parse tokenize it is guaranteed that 1 <= n <= 10 \
             at most 5 at least 2 it is guaranteed that 0 <= k <= 9 at most 7 at least 1",
            vec!["word"; 240].join(" ")
        );
        let p = problem(&description, "def f(a, b, c, d, e, f, g, h):");
        let score = complexity_score(
            &p,
            &ComplexityWeights::default(),
            &taxonomy().all_keywords(),
            &[
                "guaranteed".into(),
                "at most".into(),
                "at least".into(),
                "<=".into(),
            ],
        );
        assert!((score - 10.0).abs() < 1e-9, "score {score}");
    }

    // Oracle: hand-computed weighted sum for 3 params, 120 tokens, 2
    // keywords, 1 constraint under default weights and caps.
    #[test]
    fn fixture_matches_hand_computed_weighted_sum() {
        let mut words = vec!["word"; 116].join(" ");
        words.push_str(" dijkstra greedy constraints guaranteed");
        let p = problem(&words, "def f(a, b, c):");
        let markers = vec!["guaranteed".to_string()];
        let tokens = tokenize(&p.description);
        assert_eq!(tokens.len(), 120);
        let score = complexity_score(
            &p,
            &ComplexityWeights::default(),
            &taxonomy().all_keywords(),
            &markers,
        );
        let expected =
            10.0 * (0.25 * (3.0 / 6.0) + 0.25 * (120.0 / 240.0) + 0.25 * (2.0 / 8.0)
                + 0.25 * (1.0 / 6.0));
        assert!((score - expected).abs() < 1e-12, "{score} vs {expected}");
        assert!((expected - 3.5416666666666665).abs() < 1e-12);
    }

    #[test]
    fn complexity_is_monotone_below_caps() {
        let base = problem(&vec!["word"; 50].join(" "), "def f(a):");
        let more_params = problem(&vec!["word"; 50].join(" "), "def f(a, b, c):");
        let weights = ComplexityWeights::default();
        let tax = taxonomy();
        let kws = tax.all_keywords();
        assert!(
            complexity_score(&more_params, &weights, &kws, &[])
                > complexity_score(&base, &weights, &kws, &[])
        );
    }

    #[test]
    fn semantic_coverage_counts_matched_weights() {
        let tax = taxonomy();
        let none = semantic_coverage(&problem("plain text with no terms", "f()"), &tax);
        assert_eq!(none.score, 0.0);
        assert!(none.per_category.values().all(|v| *v == 0.0));

        let one = semantic_coverage(&problem("use a greedy approach", "f()"), &tax);
        assert!((one.score - 0.5).abs() < 1e-12);
        assert!((one.per_category["algorithms"] - 0.5).abs() < 1e-12);

        // Multi-word keyword must match as a contiguous token run.
        let dp = semantic_coverage(&problem("classic dynamic programming task", "f()"), &tax);
        assert!((dp.per_category["dynamic_programming"] - 0.7).abs() < 1e-12);
        let scrambled = semantic_coverage(&problem("programming that is dynamic", "f()"), &tax);
        assert_eq!(scrambled.per_category["dynamic_programming"], 0.0);
    }

    // Oracle: brute-force scan over the keyword table.
    #[test]
    fn semantic_coverage_matches_brute_force_scan() {
        let tax = taxonomy();
        let text = "find the shortest path with dijkstra on a graph using a heap and a stack";
        let cov = semantic_coverage(&problem(text, "f()"), &tax);
        let tokens = tokenize(text);
        let mut expected = 0.0;
        for cat in &tax.categories {
            for (kw, w) in &cat.keywords {
                if tokenize(kw)
                    .iter()
                    .all(|t| tokens.contains(t))
                    && keyword_matches(&tokens, kw)
                {
                    expected += w;
                }
            }
        }
        assert!((cov.score - expected).abs() < 1e-12);
        assert!((cov.score - 2.0).abs() < 1e-12); // dijkstra, graph, heap, stack
    }

    #[test]
    fn pearson_trivial_lines() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((pearson_r(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson_r(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(
            pearson_r(&xs, &[1.0, 1.0, 1.0, 1.0]),
            Err(PearsonError::DegenerateInput)
        );
        assert_eq!(pearson_r(&[1.0], &[2.0]), Err(PearsonError::TooFewSamples));
    }

    // Oracle: direct covariance-formula evaluation on a fixed 10-point set.
    #[test]
    fn pearson_matches_direct_formula_on_fixture() {
        let xs = [1.2, 2.4, 3.1, 4.8, 5.5, 6.1, 7.9, 8.2, 9.6, 10.3];
        let ys = [0.9, 2.1, 2.8, 5.2, 5.1, 6.4, 7.5, 8.9, 9.1, 11.2];
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let syy: f64 = ys.iter().map(|y| y * y).sum();
        let expected = (n * sxy - sx * sy)
            / (libm::sqrt(n * sxx - sx * sx) * libm::sqrt(n * syy - sy * sy));
        assert!((pearson_r(&xs, &ys).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn pearson_is_invariant_under_positive_affine_transforms() {
        let xs = [1.0, 4.0, 2.0, 8.0, 5.0];
        let ys = [2.0, 5.0, 1.0, 9.0, 6.0];
        let r = pearson_r(&xs, &ys).unwrap();
        let xs2: Vec<f64> = xs.iter().map(|x| 3.5 * x + 11.0).collect();
        let ys2: Vec<f64> = ys.iter().map(|y| 0.01 * y - 4.0).collect();
        let r2 = pearson_r(&xs2, &ys2).unwrap();
        assert!((r - r2).abs() < 1e-12);
    }

    #[test]
    fn stratification_trivial_cases() {
        let all_good: Vec<PerplexityEntry> = (0..10)
            .map(|_| PerplexityEntry {
                perplexity: 1.0,
                pass_fraction: 1.0,
            })
            .collect();
        let report = stratify_by_perplexity(&all_good, 1.05).unwrap();
        assert_eq!(report.high_success_below_threshold, Some(1.0));
        assert_eq!(report.below_threshold, 1.0);
        assert_eq!(stratify_by_perplexity(&[], 1.05), Err(NoScoredCandidates));
    }

    #[test]
    fn stratification_contingency_matches_plant() {
        // Exactly the low-perplexity half passes.
        let mut entries = Vec::new();
        for i in 0..20 {
            let low = i < 10;
            entries.push(PerplexityEntry {
                perplexity: if low { 1.01 } else { 1.2 },
                pass_fraction: if low { 1.0 } else { 0.1 },
            });
        }
        let report = stratify_by_perplexity(&entries, 1.05).unwrap();
        assert_eq!(report.low_f_high_success, 10);
        assert_eq!(report.high_f_low_success, 10);
        assert_eq!(report.low_f_low_success, 0);
        assert_eq!(report.high_f_high_success, 0);
        assert_eq!(report.high_success_below_threshold, Some(1.0));
        assert_eq!(report.below_threshold, 0.5);
    }

    fn entry(source: &str, text: &str, pass: f64, error_free: bool) -> DatasetEntry {
        DatasetEntry {
            source_code: source.into(),
            text: text.into(),
            pass_fraction: pass,
            error_free,
            profile: syntax_profile(source).ok(),
        }
    }

    #[test]
    fn identical_datasets_have_zero_deltas() {
        let tax = taxonomy();
        let data = vec![
            entry("def f(a):\n    return a + 1\n", "sort the list", 0.5, true),
            entry("def g(a):\n    return a * 2\n", "use a heap", 1.0, false),
        ];
        let report = compare_filtered(&data, &data, &tax).unwrap();
        assert_eq!(report.success_rate_delta, 0.0);
        assert_eq!(report.error_free_rate_delta, 0.0);
        assert_eq!(report.structural_entropy_delta, 0.0);
        assert_eq!(report.semantic_entropy_delta, 0.0);
    }

    #[test]
    fn dropping_error_producers_raises_error_free_rate() {
        let tax = taxonomy();
        let good = entry("def f(a):\n    return a + 1\n", "sum", 1.0, true);
        let bad = entry("def g(a):\n    return a / 0\n", "sum", 0.0, false);
        let full = vec![good.clone(), bad];
        let filtered = vec![good];
        let report = compare_filtered(&full, &filtered, &tax).unwrap();
        assert!(report.error_free_rate_delta > 0.0);
        assert!(report.success_rate_delta > 0.0);
        assert!(compare_filtered(&[], &filtered, &tax).is_err());
    }

    #[test]
    fn diversity_report_histograms_are_consistent() {
        let problems = vec![
            problem("sort the array with a greedy pass", "def f(xs):"),
            problem("parse the input and count primes", "def g(s, n):"),
            problem("reverse a substring in place", "def h(s):"),
        ];
        let candidates = vec![
            Candidate {
                id: "c0".into(),
                problem_id: "p0".into(),
                source_code: "def f(xs):\n    return sorted(xs)\n".into(),
                token_logprobs: Some(vec![-0.01, -0.05]),
                sampling_meta: Default::default(),
                iteration_born: 0,
            },
            Candidate {
                id: "c1".into(),
                problem_id: "p0".into(),
                source_code: "def f(((\n".into(), // unprofilable
                token_logprobs: None,
                sampling_meta: Default::default(),
                iteration_born: 0,
            },
        ];
        let weights = ComplexityWeights::default();
        let tax = taxonomy();
        let (report, samples) =
            build_diversity_report(&problems, &candidates, &weights, &tax, &[]);
        assert_eq!(report.problem_count, 3);
        assert_eq!(report.candidate_count, 2);
        assert_eq!(report.profiled_count, 1);
        assert_eq!(report.unprofiled_count, 1);
        assert_eq!(report.entropy_stats.histogram.total() as usize, samples.entropy.len());
        assert!(report.perplexity_stats.is_some());
        if let Some(r) = report.correlation_r {
            assert!((-1.0..=1.0).contains(&r));
        }
        let node_total: u64 = report.ast_node_histogram.values().sum();
        assert!(node_total > 0);
    }

    #[test]
    fn weight_validation_catches_bad_sums() {
        let mut w = ComplexityWeights::default();
        assert!(w.validate().is_ok());
        w.w_params = 0.5;
        assert!(w.validate().is_err());
        let mut tax = taxonomy();
        assert!(tax.validate().is_ok());
        tax.categories.pop();
        assert!(matches!(
            tax.validate(),
            Err(ConfigError::WrongCategoryCount(6))
        ));
    }
}
