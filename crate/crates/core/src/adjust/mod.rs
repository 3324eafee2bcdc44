//! Population adjustment for anchored indirect comparisons.
//!
//! Each estimator returns an [`AdjustmentResult`] tagged with the estimand it
//! targets, so that [`compatibility_check`] can refuse to pool a marginal
//! estimate with a conditional one.

mod io;
mod itc;
mod maic;
mod stc;

pub use io::{write_itc_csv, write_results_csv, ITC_CSV_HEADER, RESULTS_CSV_HEADER};
pub use itc::{anchored_itc, compatibility_check, methodologies, Compatibility, ItcResult, Methodology};
pub use maic::{maic_estimate, maic_weights, moment_matrix, moment_targets, MaicWeights, MomentOrder};
pub use stc::{stc_gcomp, stc_plugin, GcompOptions, GcompSe};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::Scale;
use crate::trial::AggregateSummary;

/// The estimand an estimate targets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimandLabel {
    Mte,
    Ctem,
    Pacte,
    /// The treatment coefficient of a regression adjusting for exactly these covariates.
    ConditionalOnSet(Vec<String>),
}

impl EstimandLabel {
    pub fn is_marginal(&self) -> bool {
        matches!(self, EstimandLabel::Mte)
    }

    pub fn conditional_on(set: &[String]) -> Self {
        EstimandLabel::ConditionalOnSet(set.to_vec())
    }
}

impl fmt::Display for EstimandLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimandLabel::Mte => f.write_str("MTE"),
            EstimandLabel::Ctem => f.write_str("CTEM"),
            EstimandLabel::Pacte => f.write_str("PACTE"),
            EstimandLabel::ConditionalOnSet(set) => write!(f, "conditional({})", set.join(";")),
        }
    }
}

impl std::str::FromStr for EstimandLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MTE" => Ok(EstimandLabel::Mte),
            "CTEM" => Ok(EstimandLabel::Ctem),
            "PACTE" => Ok(EstimandLabel::Pacte),
            _ => s
                .strip_prefix("conditional(")
                .and_then(|rest| rest.strip_suffix(')'))
                .map(|inner| {
                    EstimandLabel::ConditionalOnSet(
                        inner.split(';').filter(|v| !v.is_empty()).map(str::to_string).collect(),
                    )
                })
                .ok_or_else(|| Error::InvalidInput(format!("unknown estimand label '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AdjustmentMethod {
    #[serde(rename = "MAIC")]
    Maic,
    #[serde(rename = "STCPlugin")]
    StcPlugin,
    #[serde(rename = "STCGcomp")]
    StcGcomp,
    /// Unadjusted arm contrast, as published.
    Crude,
    /// A published covariate-adjusted treatment coefficient.
    ConditionalRegression,
}

impl AdjustmentMethod {
    pub fn name(self) -> &'static str {
        match self {
            AdjustmentMethod::Maic => "MAIC",
            AdjustmentMethod::StcPlugin => "STCPlugin",
            AdjustmentMethod::StcGcomp => "STCGcomp",
            AdjustmentMethod::Crude => "Crude",
            AdjustmentMethod::ConditionalRegression => "ConditionalRegression",
        }
    }

    /// The estimand each method targets. Conditional regression has no fixed
    /// label because it depends on the adjustment set.
    pub fn estimand(self) -> Option<EstimandLabel> {
        match self {
            AdjustmentMethod::Maic | AdjustmentMethod::StcGcomp | AdjustmentMethod::Crude => {
                Some(EstimandLabel::Mte)
            }
            AdjustmentMethod::StcPlugin => Some(EstimandLabel::Ctem),
            AdjustmentMethod::ConditionalRegression => None,
        }
    }
}

impl fmt::Display for AdjustmentMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AdjustmentMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            AdjustmentMethod::Maic,
            AdjustmentMethod::StcPlugin,
            AdjustmentMethod::StcGcomp,
            AdjustmentMethod::Crude,
            AdjustmentMethod::ConditionalRegression,
        ]
        .into_iter()
        .find(|m| m.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| Error::InvalidInput(format!("unknown adjustment method '{s}'")))
    }
}

/// A treatment-effect estimate together with the estimand it targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentResult {
    pub estimate: f64,
    /// Non-negative; exactly zero only for noiseless data.
    pub se: f64,
    pub scale: Scale,
    pub estimand_label: EstimandLabel,
    pub method: AdjustmentMethod,
    /// The population the estimate refers to.
    pub population: String,
}

impl AdjustmentResult {
    /// The crude marginal estimate published in a trial summary.
    pub fn from_marginal(summary: &AggregateSummary, population: &str) -> Self {
        AdjustmentResult {
            estimate: summary.marginal.value,
            se: summary.marginal.se,
            scale: summary.marginal.scale,
            estimand_label: EstimandLabel::Mte,
            method: AdjustmentMethod::Crude,
            population: population.to_string(),
        }
    }

    /// The published conditional estimate, if the summary carries one.
    pub fn from_conditional(summary: &AggregateSummary, population: &str) -> Result<Self> {
        let c = summary.conditional.as_ref().ok_or_else(|| {
            Error::InvalidInput("summary has no conditional estimate".into())
        })?;
        Ok(AdjustmentResult {
            estimate: c.value,
            se: c.se,
            scale: c.scale,
            estimand_label: EstimandLabel::conditional_on(&c.conditioning_set),
            method: AdjustmentMethod::ConditionalRegression,
            population: population.to_string(),
        })
    }
}
