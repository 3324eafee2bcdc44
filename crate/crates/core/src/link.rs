//! Link functions and the effect scales they induce.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A GLM link `g` mapping a conditional mean onto the linear-predictor scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkFunction {
    Identity,
    Log,
    Logit,
}

impl LinkFunction {
    /// `g(mu)`. Fails when `mu` lies outside the link's domain.
    pub fn apply(self, mu: f64) -> Result<f64> {
        match self {
            LinkFunction::Identity => Ok(mu),
            LinkFunction::Log => {
                if mu > 0.0 && mu.is_finite() {
                    Ok(mu.ln())
                } else {
                    Err(Error::NumericDomain(format!("log link undefined at mean {mu}")))
                }
            }
            LinkFunction::Logit => {
                if mu > 0.0 && mu < 1.0 {
                    Ok(logit(mu))
                } else {
                    Err(Error::NumericDomain(format!("logit link undefined at mean {mu}")))
                }
            }
        }
    }

    /// `g^{-1}(eta)`.
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            LinkFunction::Identity => eta,
            LinkFunction::Log => eta.exp(),
            LinkFunction::Logit => expit(eta),
        }
    }

    /// Derivative of the inverse link, `d mu / d eta`.
    pub fn inverse_derivative(self, eta: f64) -> f64 {
        match self {
            LinkFunction::Identity => 1.0,
            LinkFunction::Log => eta.exp(),
            LinkFunction::Logit => {
                let p = expit(eta);
                p * (1.0 - p)
            }
        }
    }

    /// Derivative of the link, `g'(mu)`.
    pub fn derivative(self, mu: f64) -> f64 {
        match self {
            LinkFunction::Identity => 1.0,
            LinkFunction::Log => 1.0 / mu,
            LinkFunction::Logit => 1.0 / (mu * (1.0 - mu)),
        }
    }

    /// The additive scale on which contrasts under this link are reported.
    pub fn scale(self) -> Scale {
        match self {
            LinkFunction::Identity => Scale::MeanDifference,
            LinkFunction::Log => Scale::LogRiskRatio,
            LinkFunction::Logit => Scale::LogOddsRatio,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkFunction::Identity => "identity",
            LinkFunction::Log => "log",
            LinkFunction::Logit => "logit",
        }
    }
}

impl fmt::Display for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Numerically stable logistic function.
pub fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    if p < 0.5 {
        p.ln() - (-p).ln_1p()
    } else {
        (p / (1.0 - p)).ln()
    }
}

/// Additive scale of a treatment-effect summary measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Mean difference; a risk difference for binary outcomes.
    MeanDifference,
    /// Log risk ratio; a log rate ratio for counts with fixed person-time.
    LogRiskRatio,
    LogOddsRatio,
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::MeanDifference => "mean_difference",
            Scale::LogRiskRatio => "log_risk_ratio",
            Scale::LogOddsRatio => "log_odds_ratio",
        }
    }

    /// The link whose linear predictor this scale contrasts.
    pub fn link(self) -> LinkFunction {
        match self {
            Scale::MeanDifference => LinkFunction::Identity,
            Scale::LogRiskRatio => LinkFunction::Log,
            Scale::LogOddsRatio => LinkFunction::Logit,
        }
    }

    /// Contrast two natural-scale means on this scale.
    pub fn contrast(self, treated: f64, control: f64) -> Result<f64> {
        let link = self.link();
        Ok(link.apply(treated)? - link.apply(control)?)
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_difference" => Ok(Scale::MeanDifference),
            "log_risk_ratio" => Ok(Scale::LogRiskRatio),
            "log_odds_ratio" => Ok(Scale::LogOddsRatio),
            other => Err(Error::InvalidInput(format!("unknown scale '{other}'"))),
        }
    }
}
