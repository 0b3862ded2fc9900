//! Corpus analysis IO: loads the analyzer configuration, runs the diversity
//! and stratification metrics over a corpus directory, and emits
//! `report.json` plus flat plot-data CSV files.
//!
//! Every report records the hash of the configuration it ran under, since
//! keyword lists, caps, and weights are data, not code.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use codeprobe_core::analysis::{
    build_diversity_report, compare_filtered, stratify_by_perplexity, ComparisonReport,
    ComplexityWeights, DatasetEntry, DiversityReport, PerplexityEntry, SemanticTaxonomy,
    StratificationReport,
};
use codeprobe_core::consensus::{perplexity, SelectionResult};
use codeprobe_core::domain::{Candidate, ExecutionOutcome, Problem};
use codeprobe_core::signature::pass_fraction;
use codeprobe_core::syntax::syntax_profile;

use crate::ids::config_hash;
use crate::jsonl::{read_jsonl, JsonlError};
use crate::pipeline::instruction_text;

/// Analyzer configuration: complexity weights and caps, the semantic keyword
/// taxonomy, constraint-phrase markers, and the perplexity threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub weights: ComplexityWeights,
    pub taxonomy: SemanticTaxonomy,
    pub constraint_markers: Vec<String>,
    pub perplexity_threshold: f64,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    File(#[from] JsonlError),
    #[error("cannot read analyzer config {path}: {source}")]
    ConfigUnreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed analyzer config {path}: {source}")]
    ConfigMalformed {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid analyzer config: {0}")]
    ConfigInvalid(String),
    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl AnalyzerConfig {
    /// The shipped defaults from `data/analyzer_defaults.json`.
    pub fn builtin() -> Self {
        let cfg: Self = serde_json::from_str(include_str!("../data/analyzer_defaults.json"))
            .expect("shipped analyzer defaults parse");
        cfg.validate().expect("shipped analyzer defaults are valid");
        cfg
    }

    pub fn load(path: &Path) -> Result<Self, AnalyzeError> {
        let text = std::fs::read_to_string(path).map_err(|source| {
            AnalyzeError::ConfigUnreadable {
                path: path.to_path_buf(),
                source,
            }
        })?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|source| AnalyzeError::ConfigMalformed {
                path: path.to_path_buf(),
                source,
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AnalyzeError> {
        self.weights
            .validate()
            .map_err(|e| AnalyzeError::ConfigInvalid(e.to_string()))?;
        self.taxonomy
            .validate()
            .map_err(|e| AnalyzeError::ConfigInvalid(e.to_string()))?;
        if self.perplexity_threshold < 1.0 {
            return Err(AnalyzeError::ConfigInvalid(
                "perplexity_threshold must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Stable hash of the canonical JSON form, recorded in every report.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        config_hash(&canonical)
    }
}

/// Everything `report.json` carries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub config_hash: String,
    pub diversity: DiversityReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stratification: Option<StratificationReport>,
    /// Full-vs-selected dataset comparison, when selections are available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filtering: Option<ComparisonReport>,
}

/// Run the analyzer over a corpus directory and write `report.json` plus
/// `entropy_hist.csv`, `complexity_vs_semantic.csv`, `ppl_vs_success.csv`,
/// and `ast_hist.csv` into `out_dir`.
pub fn analyze_corpus_dir(
    corpus_dir: &Path,
    out_dir: &Path,
    cfg: &AnalyzerConfig,
) -> Result<AnalysisReport, AnalyzeError> {
    let problems: Vec<Problem> = read_jsonl(&corpus_dir.join("problems.jsonl"))?;
    let candidates: Vec<Candidate> = read_jsonl(&corpus_dir.join("candidates.jsonl"))?;
    let executions: Vec<ExecutionOutcome> = {
        let path = corpus_dir.join("executions.jsonl");
        if path.exists() {
            read_jsonl(&path)?
        } else {
            Vec::new()
        }
    };
    let selections: Vec<SelectionResult> = {
        let path = corpus_dir.join("selections.jsonl");
        if path.exists() {
            read_jsonl(&path)?
        } else {
            Vec::new()
        }
    };

    let (diversity, samples) = build_diversity_report(
        &problems,
        &candidates,
        &cfg.weights,
        &cfg.taxonomy,
        &cfg.constraint_markers,
    );

    // Per-candidate pass fractions from execution outcomes.
    let mut statuses_by_candidate: BTreeMap<&str, Vec<codeprobe_core::domain::ExecutionStatus>> =
        BTreeMap::new();
    for outcome in &executions {
        statuses_by_candidate
            .entry(outcome.candidate_id.as_str())
            .or_default()
            .push(outcome.status);
    }
    // (pass fraction, all outcomes executed without error/timeout).
    let execution_stats: BTreeMap<&str, (f64, bool)> = statuses_by_candidate
        .iter()
        .filter_map(|(id, statuses)| {
            pass_fraction(statuses)
                .ok()
                .map(|f| (*id, (f, statuses.iter().all(|s| s.executed()))))
        })
        .collect();

    let mut scored: Vec<(String, PerplexityEntry)> = Vec::new();
    for candidate in &candidates {
        let Some(lps) = candidate.token_logprobs.as_deref() else {
            continue;
        };
        let Ok(f) = perplexity(lps) else { continue };
        let Some(&(pass, _)) = execution_stats.get(candidate.id.as_str()) else {
            continue;
        };
        scored.push((
            candidate.id.clone(),
            PerplexityEntry {
                perplexity: f,
                pass_fraction: pass,
            },
        ));
    }
    let stratification = if scored.is_empty() {
        None
    } else {
        let entries: Vec<PerplexityEntry> = scored.iter().map(|(_, e)| *e).collect();
        stratify_by_perplexity(&entries, cfg.perplexity_threshold).ok()
    };

    let filtering =
        comparison_from_selections(&problems, &candidates, &execution_stats, &selections, cfg);

    let report = AnalysisReport {
        config_hash: cfg.hash(),
        diversity,
        stratification,
        filtering,
    };

    std::fs::create_dir_all(out_dir).map_err(|source| AnalyzeError::Unwritable {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let write = |name: &str, contents: String| -> Result<(), AnalyzeError> {
        let path = out_dir.join(name);
        std::fs::write(&path, contents).map_err(|source| AnalyzeError::Unwritable { path, source })
    };

    write(
        "report.json",
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;

    let hist = &report.diversity.entropy_stats.histogram;
    let mut entropy_csv = String::from("bin_lo,bin_hi,count,cdf\n");
    for (i, (count, cdf)) in hist.counts.iter().zip(&hist.cdf).enumerate() {
        let lo = hist.lo + i as f64 * hist.bin_width;
        entropy_csv.push_str(&format!("{lo},{},{count},{cdf}\n", lo + hist.bin_width));
    }
    write("entropy_hist.csv", entropy_csv)?;

    let mut scores_csv = String::from("problem_id,complexity,semantic\n");
    for (id, complexity, semantic) in &samples.scores {
        scores_csv.push_str(&format!("{id},{complexity},{semantic}\n"));
    }
    write("complexity_vs_semantic.csv", scores_csv)?;

    let mut ppl_csv = String::from("candidate_id,perplexity,pass_fraction\n");
    for (id, entry) in &scored {
        ppl_csv.push_str(&format!("{id},{},{}\n", entry.perplexity, entry.pass_fraction));
    }
    write("ppl_vs_success.csv", ppl_csv)?;

    let mut ast_csv = String::from("construct,count\n");
    for (construct, count) in &report.diversity.ast_node_histogram {
        let name = serde_json::to_value(construct)
            .expect("construct serializes")
            .as_str()
            .expect("construct is a string")
            .to_string();
        ast_csv.push_str(&format!("{name},{count}\n"));
    }
    write("ast_hist.csv", ast_csv)?;

    Ok(report)
}

/// Compare the full candidate pool against the consensus-selected subset
/// when selections are present.
fn comparison_from_selections(
    problems: &[Problem],
    candidates: &[Candidate],
    execution_stats: &BTreeMap<&str, (f64, bool)>,
    selections: &[SelectionResult],
    cfg: &AnalyzerConfig,
) -> Option<ComparisonReport> {
    if selections.is_empty() || execution_stats.is_empty() {
        return None;
    }
    let instructions: BTreeMap<&str, String> = problems
        .iter()
        .map(|p| (p.id.as_str(), instruction_text(p)))
        .collect();
    let entry_of = |candidate: &Candidate| -> Option<DatasetEntry> {
        let &(pass, error_free) = execution_stats.get(candidate.id.as_str())?;
        Some(DatasetEntry {
            source_code: candidate.source_code.clone(),
            text: instructions
                .get(candidate.problem_id.as_str())
                .cloned()
                .unwrap_or_default(),
            pass_fraction: pass,
            error_free,
            profile: syntax_profile(&candidate.source_code).ok(),
        })
    };

    let selected_ids: std::collections::BTreeSet<&str> = selections
        .iter()
        .filter_map(|s| s.selected.as_deref())
        .collect();
    if selected_ids.is_empty() {
        return None;
    }
    let full: Vec<DatasetEntry> = candidates.iter().filter_map(entry_of).collect();
    let filtered: Vec<DatasetEntry> = candidates
        .iter()
        .filter(|c| selected_ids.contains(c.id.as_str()))
        .filter_map(entry_of)
        .collect();
    compare_filtered(&full, &filtered, &cfg.taxonomy).ok()
}
