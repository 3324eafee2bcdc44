//! Outcome-generating mechanisms.
//!
//! Each model specifies `E(Y^t | X = x) = g^{-1}(eta(t, x))` for a single
//! covariate, with one of three linear-predictor shapes: homogeneous
//! (no treatment interaction), linear interaction, or quadratic interaction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::LinkFunction;

/// Conditional outcome distribution around the conditional mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Family {
    /// Normal noise with standard deviation `sigma`. `sigma = 0` gives noiseless outcomes.
    Gaussian { sigma: f64 },
    Poisson,
    Bernoulli,
}

impl Family {
    /// The canonical link for this family.
    pub fn canonical_link(self) -> LinkFunction {
        match self {
            Family::Gaussian { .. } => LinkFunction::Identity,
            Family::Poisson => LinkFunction::Log,
            Family::Bernoulli => LinkFunction::Logit,
        }
    }

    /// The default family paired with a link, Gaussian noise defaulting to sd 1.
    pub fn for_link(link: LinkFunction) -> Self {
        match link {
            LinkFunction::Identity => Family::Gaussian { sigma: 1.0 },
            LinkFunction::Log => Family::Poisson,
            LinkFunction::Logit => Family::Bernoulli,
        }
    }
}

/// Linear-predictor coefficients for the three illustrative mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Coefficients {
    /// `b0 + bx*x + bt*t`
    Homogeneous { b0: f64, bx: f64, bt: f64 },
    /// `b0 + bx*x + bt*t + bxt*x*t`
    LinearHeterogeneous { b0: f64, bx: f64, bt: f64, bxt: f64 },
    /// `b0 + b1*x + b2*x^2 + bt*t + b1t*x*t + b2t*x^2*t`
    Quadratic {
        b0: f64,
        b1: f64,
        b2: f64,
        bt: f64,
        b1t: f64,
        b2t: f64,
    },
}

impl Coefficients {
    pub fn homogeneous(b0: f64, bx: f64, bt: f64) -> Self {
        Coefficients::Homogeneous { b0, bx, bt }
    }

    pub fn linear(b0: f64, bx: f64, bt: f64, bxt: f64) -> Self {
        Coefficients::LinearHeterogeneous { b0, bx, bt, bxt }
    }

    pub fn quadratic(b0: f64, b1: f64, b2: f64, bt: f64, b1t: f64, b2t: f64) -> Self {
        Coefficients::Quadratic {
            b0,
            b1,
            b2,
            bt,
            b1t,
            b2t,
        }
    }

    /// Polynomial coefficients `(c0, c1, c2)` of the linear predictor in `x` for arm `t`.
    pub fn arm_polynomial(&self, t: u8) -> [f64; 3] {
        let t = f64::from(t);
        match *self {
            Coefficients::Homogeneous { b0, bx, bt } => [b0 + bt * t, bx, 0.0],
            Coefficients::LinearHeterogeneous { b0, bx, bt, bxt } => {
                [b0 + bt * t, bx + bxt * t, 0.0]
            }
            Coefficients::Quadratic {
                b0,
                b1,
                b2,
                bt,
                b1t,
                b2t,
            } => [b0 + bt * t, b1 + b1t * t, b2 + b2t * t],
        }
    }

    /// Polynomial coefficients `(bt, b1t, b2t)` of the treatment contrast in `x`.
    pub fn contrast_polynomial(&self) -> [f64; 3] {
        match *self {
            Coefficients::Homogeneous { bt, .. } => [bt, 0.0, 0.0],
            Coefficients::LinearHeterogeneous { bt, bxt, .. } => [bt, bxt, 0.0],
            Coefficients::Quadratic { bt, b1t, b2t, .. } => [bt, b1t, b2t],
        }
    }

    pub fn treatment(&self) -> f64 {
        self.contrast_polynomial()[0]
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self, Coefficients::Homogeneous { .. })
    }

    pub fn form_name(&self) -> &'static str {
        match self {
            Coefficients::Homogeneous { .. } => "homogeneous",
            Coefficients::LinearHeterogeneous { .. } => "linear_heterogeneous",
            Coefficients::Quadratic { .. } => "quadratic",
        }
    }

    fn values(&self) -> Vec<f64> {
        match *self {
            Coefficients::Homogeneous { b0, bx, bt } => vec![b0, bx, bt],
            Coefficients::LinearHeterogeneous { b0, bx, bt, bxt } => vec![b0, bx, bt, bxt],
            Coefficients::Quadratic {
                b0,
                b1,
                b2,
                bt,
                b1t,
                b2t,
            } => vec![b0, b1, b2, bt, b1t, b2t],
        }
    }
}

/// Evaluates `c0 + c1*x + c2*x^2`.
pub(crate) fn poly(c: [f64; 3], x: f64) -> f64 {
    c[0] + c[1] * x + c[2] * x * x
}

/// A complete outcome-generating mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    link: LinkFunction,
    family: Family,
    coefficients: Coefficients,
    person_time: f64,
}

impl OutcomeModel {
    /// Builds a model, rejecting family/link pairings other than the canonical ones.
    pub fn new(link: LinkFunction, family: Family, coefficients: Coefficients) -> Result<Self> {
        if family.canonical_link() != link {
            return Err(Error::InvalidModel(format!(
                "family {family:?} requires the {} link, got {link}",
                family.canonical_link()
            )));
        }
        if let Family::Gaussian { sigma } = family {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "gaussian noise sd must be finite and non-negative, got {sigma}"
                )));
            }
        }
        if coefficients.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("coefficients must be finite".into()));
        }
        Ok(OutcomeModel {
            link,
            family,
            coefficients,
            person_time: 1.0,
        })
    }

    /// Model with the link's default family (Gaussian sd 1, Poisson, Bernoulli).
    pub fn canonical(link: LinkFunction, coefficients: Coefficients) -> Result<Self> {
        Self::new(link, Family::for_link(link), coefficients)
    }

    pub fn link(&self) -> LinkFunction {
        self.link
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    pub fn person_time(&self) -> f64 {
        self.person_time
    }

    /// Number of covariates the model conditions on.
    pub fn arity(&self) -> usize {
        1
    }

    /// Same model with different coefficients.
    pub fn with_coefficients(&self, coefficients: Coefficients) -> Result<Self> {
        Self::new(self.link, self.family, coefficients)
    }

    fn offset(&self) -> f64 {
        match self.link {
            LinkFunction::Log => self.person_time.ln(),
            _ => 0.0,
        }
    }

    pub(crate) fn check_arity(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.arity() {
            return Err(Error::Arity {
                expected: self.arity(),
                got: x.len(),
            });
        }
        Ok(x[0])
    }

    /// The linear predictor `eta(t, x)`, including the log person-time offset under the log link.
    pub fn linear_predictor(&self, t: u8, x: &[f64]) -> Result<f64> {
        let x = self.check_arity(x)?;
        Ok(self.eta(t, x))
    }

    pub(crate) fn eta(&self, t: u8, x: f64) -> f64 {
        poly(self.coefficients.arm_polynomial(t), x) + self.offset()
    }

    /// `E(Y^t | X = x) = g^{-1}(eta(t, x))`.
    pub fn conditional_mean(&self, t: u8, x: &[f64]) -> Result<f64> {
        let eta = self.linear_predictor(t, x)?;
        let mu = self.link.inverse(eta);
        if !mu.is_finite() {
            return Err(Error::NumericDomain(format!(
                "conditional mean overflowed at t={t}, x={x:?} (eta={eta})"
            )));
        }
        Ok(mu)
    }

    pub(crate) fn mean_at(&self, t: u8, x: f64) -> f64 {
        self.link.inverse(self.eta(t, x))
    }

    /// Treatment contrast on the linear-predictor scale at covariate value `x`,
    /// evaluated from the coefficients.
    pub(crate) fn contrast_at(&self, x: f64) -> f64 {
        poly(self.coefficients.contrast_polynomial(), x)
    }
}
