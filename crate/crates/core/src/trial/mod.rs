//! Randomized-trial simulation, aggregate summaries, and GLM fitting.

mod aggregate;
mod glm;
mod io;
mod simulate;

pub use aggregate::{
    aggregate, conditional_estimate, AggregateOptions, AggregateSummary, ArmSummary,
    ConditionalEstimate, EffectEstimate, TwoByTwo,
};
pub use glm::{fit_glm, fit_glm_with, Formula, GlmFit, GlmOptions};
pub use io::{read_ipd_csv, read_summary_csv, write_ipd_csv, write_summary_csv};
pub use simulate::{default_names, simulate_trial, OutcomeKind, TrialConfig, TrialIpd};
