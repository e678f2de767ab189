//! Propensity-score 1:M matching estimators of the average treatment effect,
//! with optimal augmentation of the propensity model, plug-in variance
//! estimation, closed-form calculators for a Gaussian design and a Monte
//! Carlo harness.

// negated float comparisons are used on purpose so that NaN fails checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod data;
pub mod error;
pub mod linalg;
pub mod logit;
pub mod matching;
pub mod nuisance;
pub mod pipeline;
pub mod simulate;
pub mod variance;

pub use data::{load_csv, read_csv, save_csv, split_sample, write_csv, CsvSchema, Dataset, SplitIndex};
pub use error::{Error, Result};
pub use logit::{fit_mle, DesignSpec, PropensityFit};
pub use matching::{ate_matching, ate_matching_imputed, match_1m, MatchResult};
