//! Kurtosis contrast laws for linear mixtures.
//!
//! Sources, mixing geometry, kurtosis statistics, symmetric FastICA, the
//! redundancy bounds and model-order screen, sign-consistent purification,
//! and the experiment harness that ties them together. Numeric code is
//! generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases below are the
//! usual entry points.

// `!(x > y)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod ica;
pub mod io;
pub mod linalg;
pub mod mixing;
pub mod purification;
pub mod scalar;
pub mod seeding;
pub mod sources;
pub mod stats;

pub use diagnostics::{
    default_c_b_policy, redundancy_bound, reff_bound, screen_model_order, viability_check, ScreeningReport, Verdict,
    Viability,
};
pub use error::{Error, Result};
pub use experiments::{run_experiment, ExperimentConfig, ExperimentName, TrialRecord};
pub use ica::{fastica_symmetric_cubic, unmixing_error, whiten, IcaResult, WhiteningResult};
pub use mixing::{
    balance_constant, block_balance_probe, effective_width, make_balanced_weights, make_powerlaw_weights,
    noisy_projection_kurtosis, population_projection_kurtosis, projection_weights, BlockBalanceProbe, MixingMatrix,
    ProjectionWeights,
};
pub use purification::{
    oracle_purify, purified_lower_bound, purify_and_rerun, purify_data, Preliminary, PurifyReport, select_sign_consistent, PurificationMode, PurificationPlan,
    PurifiedProjection, RerunResult, SignSelection,
};
pub use scalar::Scalar;
pub use sources::{sample_sources, standardize, SourceKind, SourceMatrix, SourceSpec};
pub use stats::{
    bootstrap_sigma0, excess_kurtosis, fit_inverse_law, sample_excess_kurtosis, wilcoxon_signed_rank_one_sided,
    FitResult, KurtosisEstimate, RankTestResult,
};

pub type SourceMatrix64 = SourceMatrix<f64>;
pub type SourceMatrix32 = SourceMatrix<f32>;
pub type MixingMatrix64 = MixingMatrix<f64>;
pub type MixingMatrix32 = MixingMatrix<f32>;
pub type ProjectionWeights64 = ProjectionWeights<f64>;
pub type ProjectionWeights32 = ProjectionWeights<f32>;
pub type KurtosisEstimate64 = KurtosisEstimate<f64>;
pub type FitResult64 = FitResult<f64>;
pub type IcaResult64 = IcaResult<f64>;
pub type WhiteningResult64 = WhiteningResult<f64>;
pub type ScreeningReport64 = ScreeningReport<f64>;
pub type PurificationPlan64 = PurificationPlan<f64>;
pub type PurifiedProjection64 = PurifiedProjection<f64>;
