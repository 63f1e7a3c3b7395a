//! Uncertainty-aware feature attribution.
//!
//! Attribution methods are noisy: re-explaining slightly perturbed inputs
//! yields visibly different maps. This crate samples many explanations of
//! one input and distills them with exact binomial median tests into
//! artifacts with statistical guarantees:
//!
//! * a **significance map** labelling each feature important / unimportant /
//!   undecided at a chosen level,
//! * per-feature **confidence bounds** on the explanation score, and
//! * a **smoothed map** (an order-statistic trimmed mean) that is robust to
//!   heavy-tailed explanation noise,
//!
//! plus faithfulness and stability metrics to evaluate the resulting maps,
//! and binary/JSON formats to persist them.

pub mod error;
pub mod io;
pub mod map;
pub mod matrix;
pub mod metrics;
pub mod sampling;
pub mod stat;

pub use error::{Error, Result};
pub use io::{read_sample_matrix, write_sample_matrix, RunManifest};
pub use map::{
    confidence_bundle, jenks_break, significance_map, significance_map_two_sided, smoothgrad_map,
    tie_break, ConfidenceBundle, Label, SignificanceMap, DEFAULT_TIE_VARIANCE,
};
pub use matrix::SampleMatrix;
pub use metrics::{
    context_bias_faithfulness, deletion, fat, fdt, insertion, mstd, overall, rank_descending,
    robust_deletion, robust_fat, robust_fdt, robust_insertion, robust_st, st, MetricsReport,
    Segmenter, TokenDeletion,
};
pub use sampling::{
    apply_noise, sample_explanations, Attributor, Input, NoiseSpec, Predictor, SynonymTable,
};
pub use stat::{
    binom_tail_geq, confidence_indices, min_samples, pvalue_median_eq, pvalue_median_geq,
    pvalue_median_leq, smoothgrad_asymptotic_ci, ConfidenceIndices, PValue, Sided, TestConfig,
};
