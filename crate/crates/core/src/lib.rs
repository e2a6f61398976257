//! Concatenated target-decoy FDR estimation and control.
//!
//! * [`psm`]: identifications, ranking, peptide-level rollup, count profiles.
//! * [`estimator`]: `(N_dec + c) / (r * max(N_tar, 1))` at a threshold.
//! * [`controller`]: threshold selection, including the Benjamini-Hochberg
//!   comparison.
//! * [`oracle`]: exact expectations by exhaustive enumeration.
//! * [`montecarlo`]: seeded synthetic experiments.

pub mod controller;
pub mod error;
pub mod estimator;
pub mod montecarlo;
pub mod oracle;
pub mod psm;

pub use controller::{control, fdp_of, select, ControlPolicy, Method, Threshold, ThresholdReport};
pub use error::{Error, Result};
pub use estimator::{estimate_at, estimate_curve, monotone_min_fdr, EstimatorConfig, FdrEstimate};
pub use psm::{
    count_profile, mean_redundancy, rank, rollup_peptide_level, CountProfile, Identification, Origin, RankedList,
    RedundancyFilter, Truth,
};
