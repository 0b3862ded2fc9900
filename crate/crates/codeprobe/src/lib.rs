//! IO and orchestration around `codeprobe-core`: the sandboxed subprocess
//! executor, generation backends (HTTP endpoint and deterministic stub), the
//! per-iteration curation pipeline, line-delimited file formats, corpus
//! analysis output, and the CLI.

pub mod analyze;
pub mod cli;
pub mod config;
pub mod executor;
pub mod genclient;
pub mod ids;
pub mod jsonl;
pub mod logging;
pub mod pipeline;

pub use codeprobe_core as core;
