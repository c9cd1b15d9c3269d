//! Pair-correlation and counting-statistics estimators.

mod counting;
mod fit;
mod g2;
mod histogram;

pub use counting::{counting_statistics, CountingStats, ExcessSign, Subvolume};
pub use fit::{fit_correlation, FitResult, MAX_FIT_ITERATIONS};
pub use g2::{normalize_g2, CorrelationCurve, CorrelationResult};
pub use histogram::{
    average_horizontal, average_transverse, normalization_histogram, pair_histogram, AxisMode, BinSpec, PairHistogram,
    PairNormalization,
};
