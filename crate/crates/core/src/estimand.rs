//! Marginal and conditional estimands on the linear-predictor scale.
//!
//! * CTEX(x): contrast of link-transformed conditional means at `X = x`.
//! * CTEM: CTEX at the covariate mean.
//! * PACTE: CTEX averaged over the covariate law.
//! * MTE: contrast of link-transformed marginal means, i.e. averaging happens
//!   on the natural scale before the link is applied.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::covariate::CovariateDistribution;
use crate::error::{Error, Result};
use crate::link::{LinkFunction, Scale};
use crate::model::{Coefficients, OutcomeModel};
use crate::quadrature::{expectation, QuadratureSettings};

/// The three population-level summary measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimand {
    Mte,
    Ctem,
    Pacte,
}

impl Estimand {
    pub const ALL: [Estimand; 3] = [Estimand::Mte, Estimand::Ctem, Estimand::Pacte];

    pub fn label(self) -> &'static str {
        match self {
            Estimand::Mte => "MTE",
            Estimand::Ctem => "CTEM",
            Estimand::Pacte => "PACTE",
        }
    }
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn scalar_mean(model: &OutcomeModel, dist: &CovariateDistribution) -> Result<f64> {
    model.check_arity(&dist.mean())
}

/// CTEX at `x`, evaluated from the model's treatment-interaction terms.
pub fn ctex(model: &OutcomeModel, x: &[f64]) -> Result<f64> {
    let x = model.check_arity(x)?;
    Ok(model.contrast_at(x))
}

/// CTEX computed literally as `g(E(Y^1|x)) - g(E(Y^0|x))`.
///
/// Agrees with [`ctex`] up to round-off; fails if a conditional mean leaves
/// the link's domain after rounding.
pub fn ctex_via_means(model: &OutcomeModel, x: &[f64]) -> Result<f64> {
    let link = model.link();
    let treated = model.conditional_mean(1, x)?;
    let control = model.conditional_mean(0, x)?;
    Ok(link.apply(treated)? - link.apply(control)?)
}

pub fn ctem(model: &OutcomeModel, dist: &CovariateDistribution) -> Result<f64> {
    ctex(model, &dist.mean())
}

pub fn pacte(
    model: &OutcomeModel,
    dist: &CovariateDistribution,
    settings: &QuadratureSettings,
) -> Result<f64> {
    scalar_mean(model, dist)?;
    expectation(dist, |x| model.contrast_at(x[0]), settings)
}

/// Marginal means `(E(Y^0), E(Y^1))` on the natural scale.
pub fn marginal_means(
    model: &OutcomeModel,
    dist: &CovariateDistribution,
    settings: &QuadratureSettings,
) -> Result<(f64, f64)> {
    scalar_mean(model, dist)?;
    check_integrable(model, dist)?;
    let control = expectation(dist, |x| model.mean_at(0, x[0]), settings)?;
    let treated = expectation(dist, |x| model.mean_at(1, x[0]), settings)?;
    Ok((control, treated))
}

/// Under the log link a quadratic term can make `E[exp(eta)]` diverge for a
/// normal covariate; quadrature would silently return a finite number.
fn check_integrable(model: &OutcomeModel, dist: &CovariateDistribution) -> Result<()> {
    if model.link() != LinkFunction::Log {
        return Ok(());
    }
    if let CovariateDistribution::Normal { sd, .. } = dist {
        for t in [0u8, 1] {
            let c2 = model.coefficients().arm_polynomial(t)[2];
            if c2 >= 1.0 / (2.0 * sd * sd) {
                return Err(Error::NumericDomain(format!(
                    "marginal mean E(Y^{t}) is infinite: quadratic coefficient {c2} >= 1/(2 sd^2) = {}",
                    1.0 / (2.0 * sd * sd)
                )));
            }
        }
    }
    Ok(())
}

pub fn mte(
    model: &OutcomeModel,
    dist: &CovariateDistribution,
    settings: &QuadratureSettings,
) -> Result<f64> {
    let (control, treated) = marginal_means(model, dist, settings)?;
    let link = model.link();
    let g1 = link.apply(treated).map_err(|e| marginal_domain(e, 1))?;
    let g0 = link.apply(control).map_err(|e| marginal_domain(e, 0))?;
    Ok(g1 - g0)
}

fn marginal_domain(e: Error, t: u8) -> Error {
    Error::NumericDomain(format!("marginal mean for t={t} outside link domain: {e}"))
}

/// MTE together with a quadrature error estimate from doubling the node count.
pub fn mte_with_error(
    model: &OutcomeModel,
    dist: &CovariateDistribution,
    settings: &QuadratureSettings,
) -> Result<(f64, f64)> {
    let value = mte(model, dist, settings)?;
    if dist.is_finite_support() {
        return Ok((value, 0.0));
    }
    let refined = mte(model, dist, &settings.refined())?;
    Ok((value, (refined - value).abs()))
}

/// MTE in closed form, where one exists: every identity-link model, and the
/// homogeneous log-link model.
pub fn closed_form_mte(model: &OutcomeModel, dist: &CovariateDistribution) -> Option<f64> {
    let mean = scalar_mean(model, dist).ok()?;
    let var = dist.variance()[0];
    let coef = model.coefficients();
    match (model.link(), coef) {
        (LinkFunction::Identity, _) => {
            let [bt, b1t, b2t] = coef.contrast_polynomial();
            Some(bt + b1t * mean + b2t * (mean * mean + var))
        }
        (LinkFunction::Log, Coefficients::Homogeneous { bt, .. }) => Some(*bt),
        _ => None,
    }
}

/// Closed-form CTEM: the contrast polynomial at the covariate mean.
pub fn closed_form_ctem(model: &OutcomeModel, dist: &CovariateDistribution) -> Option<f64> {
    let mean = scalar_mean(model, dist).ok()?;
    let [bt, b1t, b2t] = model.coefficients().contrast_polynomial();
    Some(bt + b1t * mean + b2t * mean * mean)
}

/// Closed-form PACTE: `bt + b1t E(X) + b2t E(X^2)`.
pub fn closed_form_pacte(model: &OutcomeModel, dist: &CovariateDistribution) -> Option<f64> {
    let mean = scalar_mean(model, dist).ok()?;
    let second = dist.second_moment()[0];
    let [bt, b1t, b2t] = model.coefficients().contrast_polynomial();
    Some(bt + b1t * mean + b2t * second)
}

/// A CTEX function of the covariates, with a human-readable formula.
#[derive(Debug, Clone)]
pub struct CtexCurve {
    model: OutcomeModel,
    pub description: String,
}

impl CtexCurve {
    pub fn new(model: &OutcomeModel) -> Self {
        let [bt, b1t, b2t] = model.coefficients().contrast_polynomial();
        let description = match model.coefficients() {
            Coefficients::Homogeneous { .. } => format!("CTEX(x) = {bt}"),
            Coefficients::LinearHeterogeneous { .. } => format!("CTEX(x) = {bt} + {b1t}*x"),
            Coefficients::Quadratic { .. } => format!("CTEX(x) = {bt} + {b1t}*x + {b2t}*x^2"),
        };
        CtexCurve {
            model: *model,
            description,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        ctex(&self.model, x)
    }
}

/// Which estimands in a report came from a closed-form expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedFormFlags {
    pub mte: bool,
    pub ctem: bool,
    pub pacte: bool,
}

/// MTE, CTEM and PACTE for one model and covariate law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimandReport {
    pub mte: f64,
    pub ctem: f64,
    pub pacte: f64,
    pub scale: Scale,
    pub closed_form: ClosedFormFlags,
    /// Quadrature error estimate for the numerically integrated MTE.
    pub mte_error: f64,
}

impl EstimandReport {
    pub fn compute(
        model: &OutcomeModel,
        dist: &CovariateDistribution,
        settings: &QuadratureSettings,
    ) -> Result<Self> {
        let (mte, mte_error) = mte_with_error(model, dist, settings)?;
        let report = EstimandReport {
            mte,
            ctem: ctem(model, dist)?,
            pacte: pacte(model, dist, settings)?,
            scale: model.link().scale(),
            closed_form: ClosedFormFlags {
                mte: closed_form_mte(model, dist).is_some(),
                ctem: true,
                pacte: true,
            },
            mte_error,
        };
        for (name, v) in [("MTE", report.mte), ("CTEM", report.ctem), ("PACTE", report.pacte)] {
            if !v.is_finite() {
                return Err(Error::NumericDomain(format!("{name} is not finite ({v})")));
            }
        }
        Ok(report)
    }

    pub fn get(&self, estimand: Estimand) -> f64 {
        match estimand {
            Estimand::Mte => self.mte,
            Estimand::Ctem => self.ctem,
            Estimand::Pacte => self.pacte,
        }
    }

    pub const CSV_HEADER: &'static str =
        "scale,MTE,CTEM,PACTE,MTE_closed_form,CTEM_closed_form,PACTE_closed_form,MTE_quadrature_error";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:e}",
            self.scale,
            self.mte,
            self.ctem,
            self.pacte,
            self.closed_form.mte,
            self.closed_form.ctem,
            self.closed_form.pacte,
            self.mte_error
        )
    }
}
