//! Marginal and conditional treatment-effect estimands.
//!
//! The crate covers three layers:
//!
//! * estimand calculus: MTE, CTEM, PACTE and CTEX under parametric
//!   outcome-generating models, with closed forms where they exist;
//! * trial simulation and GLM fitting;
//! * population adjustment for anchored indirect comparisons (MAIC, plug-in
//!   and G-computation STC) plus a simulation bench that measures the bias of
//!   pooling incompatible summary measures.

pub mod adjust;
pub mod bench;
pub mod config;
pub mod covariate;
pub mod dependence;
pub mod equality;
pub mod error;
pub mod estimand;
pub mod link;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod trial;

pub use adjust::{
    anchored_itc, compatibility_check, maic_estimate, maic_weights, stc_gcomp, stc_plugin,
    AdjustmentMethod, AdjustmentResult, EstimandLabel, ItcResult, MaicWeights,
};
pub use bench::{emit_report, run_scenario, true_estimands, BenchReport, ScenarioConfig};
pub use covariate::CovariateDistribution;
pub use dependence::{dependence_probe, DependenceProbe, SharedMoments, Verdict};
pub use equality::{equality_matrix, expected_pattern, EqualityMatrix};
pub use error::{Error, Result};
pub use estimand::{
    closed_form_mte, ctem, ctex, mte, pacte, CtexCurve, Estimand, EstimandReport,
};
pub use link::{LinkFunction, Scale};
pub use model::{Coefficients, Family, OutcomeModel};
pub use quadrature::{expectation, QuadratureSettings};
pub use trial::{
    aggregate, conditional_estimate, fit_glm, simulate_trial, AggregateSummary, Formula, GlmFit,
    OutcomeKind, TrialConfig, TrialIpd,
};
