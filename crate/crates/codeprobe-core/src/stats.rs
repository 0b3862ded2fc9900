//! Small descriptive-statistics helpers shared by the simulators and the
//! corpus analyzer.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Mean, sample standard deviation, and median of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1 denominator); 0 for samples of size < 2.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    libm::sqrt(ss / (xs.len() - 1) as f64)
}

/// Quantile by linear interpolation between closest ranks; `q` in `[0, 1]`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(xs: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile(&sorted, 0.5)
}

pub fn summarize(xs: &[f64]) -> SummaryStats {
    SummaryStats {
        mean: mean(xs),
        std: sample_std(xs),
        median: median(xs),
    }
}

/// Shannon entropy in bits of a distribution given by non-negative counts or
/// weights. Zero entries contribute nothing; an all-zero input has entropy 0.
pub fn entropy_bits(weights: impl IntoIterator<Item = f64>) -> f64 {
    let weights: Vec<f64> = weights.into_iter().filter(|w| *w > 0.0).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -weights
        .iter()
        .map(|w| {
            let p = w / total;
            p * libm::log2(p)
        })
        .sum::<f64>()
}

/// Fixed-width histogram with cumulative fractions, for plot-data emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// Cumulative fraction of samples at or below each bin's upper edge.
    pub cdf: Vec<f64>,
}

impl Histogram {
    /// Bin `xs` into `bins` equal-width bins over `[lo, hi]`; values outside
    /// the range clamp into the edge bins.
    pub fn build(xs: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let bins = bins.max(1);
        let bin_width = (hi - lo) / bins as f64;
        let mut counts = alloc::vec![0u64; bins];
        for &x in xs {
            let idx = if bin_width > 0.0 {
                (((x - lo) / bin_width) as isize).clamp(0, bins as isize - 1) as usize
            } else {
                0
            };
            counts[idx] += 1;
        }
        let total: u64 = counts.iter().sum();
        let mut cdf = Vec::with_capacity(bins);
        let mut running = 0u64;
        for &c in &counts {
            running += c;
            cdf.push(if total > 0 {
                running as f64 / total as f64
            } else {
                0.0
            });
        }
        Self {
            lo,
            bin_width,
            counts,
            cdf,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}
