//! Statistical kernel: Wilcoxon signed-rank tests with Hodges-Lehmann
//! intervals, Bonferroni adjustment, least squares with influence filtering,
//! and descriptive summaries.

mod descriptives;
mod ols;
mod wilcoxon;

pub use descriptives::{mean, median, quantile, summarize, Summary};
pub use ols::{ols_fit, Coefficient, OlsOptions, OlsResult, INTERCEPT};
pub use wilcoxon::{exact_signed_rank_counts, kth_walsh_average, signed_ranks, walsh_averages, wilcoxon_signed_rank, WilcoxonResult, EXACT_LIMIT};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("no observations")]
    Empty,
    #[error("significance level {0} is outside (0, 1)")]
    BadAlpha(f64),
    #[error("family size must be at least 1")]
    BadFamilySize,
    #[error("design has {rows} rows for {columns} columns")]
    TooFewRows { rows: usize, columns: usize },
    #[error("row {row} has {found} values, expected {expected}")]
    DimensionMismatch { row: usize, found: usize, expected: usize },
    #[error("design is rank deficient; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("non-finite value in input")]
    NonFinite,
}

/// Per-test significance level under a Bonferroni correction for `m` tests.
pub fn bonferroni(alpha: f64, m: usize) -> Result<f64, StatsError> {
    if m == 0 {
        return Err(StatsError::BadFamilySize);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::BadAlpha(alpha));
    }
    Ok(alpha / m as f64)
}

/// Confidence level widened for a family of `m` intervals.
pub fn widen_ci(level: f64, m: usize) -> Result<f64, StatsError> {
    Ok(1.0 - bonferroni(1.0 - level, m)?)
}
