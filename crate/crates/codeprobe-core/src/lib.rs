//! Core algorithms for execution-driven curation of sampled program candidates.
//!
//! Candidates for a programming problem are run against a test suite, their
//! per-test outcomes are collapsed into execution signatures, and candidates
//! with identical signatures form consensus clusters. The selection rules in
//! [`consensus`] pick one representative per problem; [`theory`] checks the
//! probabilistic guarantee behind that choice by simulation; [`analysis`] and
//! [`syntax`] compute corpus diversity diagnostics.
//!
//! This crate is `no_std` (with `alloc`) and does no IO. Subprocess execution,
//! HTTP generation backends, file formats, and the CLI live in the `codeprobe`
//! companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod consensus;
pub mod domain;
pub mod seed;
pub mod signature;
pub mod stats;
pub mod syntax;
pub mod theory;

pub use domain::{
    Candidate, ConsensusCluster, Difficulty, ExecutionOutcome, ExecutionSignature,
    ExecutionStatus, IterationRecord, Problem, QualityScores, SftRecord, TestCase,
    ValidationReport, Violation,
};
