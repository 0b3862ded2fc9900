//! Collapsing per-test outcomes into execution signatures and success rates.
//!
//! A signature keeps only pass vs not-pass per ordinal; the execution success
//! rate counts how many tests executed at all (pass and fail both count,
//! error and timeout do not).

use alloc::vec;

use thiserror::Error;

use crate::domain::{ExecutionSignature, ExecutionStatus};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignatureError {
    #[error("outcome ordinal {ordinal} out of range for suite of size {suite_size}")]
    OrdinalOutOfRange { ordinal: u32, suite_size: usize },
    #[error("duplicate outcome for ordinal {0}")]
    DuplicateOrdinal(u32),
    #[error("missing outcome for ordinal {0}")]
    MissingOrdinal(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no outcomes supplied")]
pub struct EmptyOutcomes;

/// Build a candidate's execution signature from `(ordinal, status)` pairs.
///
/// The pairs must cover ordinals `0..suite_size` exactly once; bit `j` is set
/// iff the outcome at ordinal `j` is a pass. Fail, error, and timeout all map
/// to 0.
pub fn signature_of(
    outcomes: &[(u32, ExecutionStatus)],
    suite_size: usize,
) -> Result<ExecutionSignature, SignatureError> {
    let mut bits = vec![None; suite_size];
    for &(ordinal, status) in outcomes {
        let slot = bits
            .get_mut(ordinal as usize)
            .ok_or(SignatureError::OrdinalOutOfRange { ordinal, suite_size })?;
        if slot.is_some() {
            return Err(SignatureError::DuplicateOrdinal(ordinal));
        }
        *slot = Some(status == ExecutionStatus::Pass);
    }
    let mut collected = vec![false; suite_size];
    for (ordinal, bit) in bits.into_iter().enumerate() {
        collected[ordinal] = bit.ok_or(SignatureError::MissingOrdinal(ordinal as u32))?;
    }
    Ok(ExecutionSignature::new(collected))
}

/// Fraction of outcomes that executed at all: `|{t : status not in {error,
/// timeout}}| / |T|`.
pub fn execution_success_rate(statuses: &[ExecutionStatus]) -> Result<f64, EmptyOutcomes> {
    if statuses.is_empty() {
        return Err(EmptyOutcomes);
    }
    let executed = statuses.iter().filter(|s| s.executed()).count();
    Ok(executed as f64 / statuses.len() as f64)
}

/// Fraction of outcomes with status pass.
pub fn pass_fraction(statuses: &[ExecutionStatus]) -> Result<f64, EmptyOutcomes> {
    if statuses.is_empty() {
        return Err(EmptyOutcomes);
    }
    let passed = statuses
        .iter()
        .filter(|s| **s == ExecutionStatus::Pass)
        .count();
    Ok(passed as f64 / statuses.len() as f64)
}
