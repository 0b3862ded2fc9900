//! The single structured run configuration: one TOML document with
//! per-module sections. CLI flags override fields one-to-one; credentials
//! come only from environment variables named here, never from values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use codeprobe_core::consensus::SelectionConfig;

use crate::executor::SandboxPolicy;
use crate::genclient::GenEndpointConfig;
use crate::pipeline::PipelineConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Unreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config {path}: {source}")]
    Malformed {
        path: PathBuf,
        source: toml::de::Error,
    },
}

/// Which backend produces problems, tests, and candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Deterministic synthetic corpus; no network.
    Stub,
    /// OpenAI-compatible chat-completions endpoint.
    Endpoint,
}

/// `[pipeline]` section: counts, limits, and paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSection {
    pub problems_per_iteration: u32,
    pub tests_per_problem: u32,
    pub candidates_per_problem: u32,
    pub max_iterations: u32,
    pub early_stop_patience: u32,
    pub output_root: PathBuf,
    pub parallelism: usize,
    pub validation_problems: u32,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let defaults = PipelineConfig::default();
        Self {
            problems_per_iteration: defaults.problems_per_iteration,
            tests_per_problem: defaults.tests_per_problem,
            candidates_per_problem: defaults.candidates_per_problem,
            max_iterations: defaults.max_iterations,
            early_stop_patience: defaults.early_stop_patience,
            output_root: defaults.output_root,
            parallelism: defaults.parallelism,
            validation_problems: defaults.validation_problems,
        }
    }
}

/// `[generation]` section: backend choice and stub seeding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSection {
    pub backend: BackendKind,
    pub stub_seed: u64,
    /// Directory of stage templates; the shipped defaults when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub templates_dir: Option<PathBuf>,
}

impl Default for GenerationSection {
    fn default() -> Self {
        Self {
            backend: BackendKind::Stub,
            stub_seed: 0,
            templates_dir: None,
        }
    }
}

/// `[analyzer]` section: optional path to a custom analyzer config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyzerSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_path: Option<PathBuf>,
}

/// The whole config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub pipeline: PipelineSection,
    pub selection: SelectionConfig,
    pub sandbox: SandboxPolicy,
    pub endpoint: GenEndpointConfig,
    pub generation: GenerationSection,
    pub analyzer: AnalyzerSection,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Malformed {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Assemble the pipeline's nested config from the flat sections.
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            problems_per_iteration: self.pipeline.problems_per_iteration,
            tests_per_problem: self.pipeline.tests_per_problem,
            candidates_per_problem: self.pipeline.candidates_per_problem,
            selection: self.selection,
            sandbox: self.sandbox.clone(),
            max_iterations: self.pipeline.max_iterations,
            early_stop_patience: self.pipeline.early_stop_patience,
            output_root: self.pipeline.output_root.clone(),
            parallelism: self.pipeline.parallelism,
            validation_problems: self.pipeline.validation_problems,
        }
    }
}
