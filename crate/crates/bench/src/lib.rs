//! Shared fixtures for the criterion benchmarks in `benches/`.

use estimand_core::trial::{simulate_trial, TrialConfig, TrialIpd};
use estimand_core::{Coefficients, CovariateDistribution, LinkFunction, OutcomeModel};

/// Logit model with a treatment-by-covariate interaction, the heaviest
/// single-covariate case for the fitting and weighting routines.
pub fn logit_model() -> OutcomeModel {
    OutcomeModel::canonical(LinkFunction::Logit, Coefficients::linear(-0.5, 1.0, 0.8, 0.4))
        .expect("fixture model is valid")
}

pub fn index_law() -> CovariateDistribution {
    CovariateDistribution::normal(0.5, 1.0).expect("fixture law is valid")
}

pub fn trial_config(n: usize) -> TrialConfig {
    TrialConfig::new(logit_model(), index_law(), n, 42)
}

pub fn logit_trial(n: usize) -> TrialIpd {
    simulate_trial(&trial_config(n)).expect("fixture trial simulates")
}
