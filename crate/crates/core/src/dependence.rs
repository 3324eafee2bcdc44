//! Probes of how the MTE responds to changes in the covariate law.
//!
//! A probe is evidence for one pair of laws, not a proof of invariance.

use serde::{Deserialize, Serialize};

use crate::covariate::CovariateDistribution;
use crate::error::{Error, Result};
use crate::estimand::mte;
use crate::link::LinkFunction;
use crate::model::{Coefficients, OutcomeModel};
use crate::quadrature::QuadratureSettings;

/// Default `|shift|` below which a probe is called invariant.
pub const INVARIANCE_TOLERANCE: f64 = 1e-8;

/// Moments the base and perturbed laws are declared to share.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharedMoments {
    None,
    Mean,
    MeanAndVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Invariant,
    Dependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependenceProbe {
    pub mte_base: f64,
    pub mte_perturbed: f64,
    pub mte_shift: f64,
    pub verdict: Verdict,
    pub tolerance: f64,
}

fn check_shared(
    base: &CovariateDistribution,
    perturbed: &CovariateDistribution,
    shared: SharedMoments,
) -> Result<()> {
    let close = |a: &[f64], b: &[f64]| {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-10 * (1.0 + x.abs()))
    };
    let mean_ok = close(&base.mean(), &perturbed.mean());
    let var_ok = close(&base.variance(), &perturbed.variance());
    let ok = match shared {
        SharedMoments::None => base.dim() == perturbed.dim(),
        SharedMoments::Mean => mean_ok,
        SharedMoments::MeanAndVariance => mean_ok && var_ok,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "laws do not share the declared moments ({shared:?}): means {:?} vs {:?}, variances {:?} vs {:?}",
            base.mean(),
            perturbed.mean(),
            base.variance(),
            perturbed.variance()
        )))
    }
}

pub fn dependence_probe(
    model: &OutcomeModel,
    base: &CovariateDistribution,
    perturbed: &CovariateDistribution,
    shared: SharedMoments,
    settings: &QuadratureSettings,
    tolerance: f64,
) -> Result<DependenceProbe> {
    check_shared(base, perturbed, shared)?;
    let mte_base = mte(model, base, settings)?;
    let mte_perturbed = mte(model, perturbed, settings)?;
    let mte_shift = mte_perturbed - mte_base;
    let verdict = if mte_shift.abs() <= tolerance {
        Verdict::Invariant
    } else {
        Verdict::Dependent
    };
    Ok(DependenceProbe {
        mte_base,
        mte_perturbed,
        mte_shift,
        verdict,
        tolerance,
    })
}

/// One row of the marginal-estimand dependence taxonomy, with the verdict it should produce.
#[derive(Debug, Clone)]
pub struct TaxonomyCase {
    pub table: &'static str,
    pub description: &'static str,
    pub model: OutcomeModel,
    pub base: CovariateDistribution,
    pub perturbed: CovariateDistribution,
    pub shared: SharedMoments,
    pub expected: Verdict,
}

/// Probe cases covering every link under each of the three model forms.
pub fn taxonomy_cases() -> Vec<TaxonomyCase> {
    let normal = |m, s| CovariateDistribution::normal(m, s).expect("valid normal");
    let two_point = |m: f64| {
        CovariateDistribution::discrete(vec![m - 1.0, m + 1.0], vec![0.5, 0.5]).expect("valid")
    };
    let model = |link, c| OutcomeModel::canonical(link, c).expect("valid model");
    let hom = Coefficients::homogeneous(0.5, 1.0, 1.0);
    let lin = Coefficients::linear(0.5, 1.0, 1.0, 0.5);
    let quad = Coefficients::quadratic(0.5, 0.5, -0.3, 1.0, 0.4, 0.3);
    use LinkFunction::*;
    use Verdict::*;
    vec![
        TaxonomyCase {
            table: "homogeneous",
            description: "identity: prognostic covariate law shifted and rescaled",
            model: model(Identity, hom),
            base: normal(0.0, 1.0),
            perturbed: normal(1.0, 2.0),
            shared: SharedMoments::None,
            expected: Invariant,
        },
        TaxonomyCase {
            table: "homogeneous",
            description: "log: prognostic covariate law shifted and rescaled",
            model: model(Log, hom),
            base: normal(0.0, 1.0),
            perturbed: normal(1.0, 2.0),
            shared: SharedMoments::None,
            expected: Invariant,
        },
        TaxonomyCase {
            table: "homogeneous",
            description: "logit: prognostic covariate variance changed",
            model: model(Logit, hom),
            base: normal(0.0, 1.0),
            perturbed: normal(0.0, 2.0),
            shared: SharedMoments::Mean,
            expected: Dependent,
        },
        TaxonomyCase {
            table: "homogeneous",
            description: "logit: same mean and variance, different shape",
            model: model(Logit, hom),
            base: normal(0.0, 1.0),
            perturbed: two_point(0.0),
            shared: SharedMoments::MeanAndVariance,
            expected: Dependent,
        },
        TaxonomyCase {
            table: "linear_heterogeneous",
            description: "identity: effect-modifier variance changed, mean fixed",
            model: model(Identity, lin),
            base: normal(0.5, 1.0),
            perturbed: normal(0.5, 2.0),
            shared: SharedMoments::Mean,
            expected: Invariant,
        },
        TaxonomyCase {
            table: "linear_heterogeneous",
            description: "identity: effect-modifier mean changed",
            model: model(Identity, lin),
            base: normal(0.5, 1.0),
            perturbed: normal(1.0, 1.0),
            shared: SharedMoments::None,
            expected: Dependent,
        },
        TaxonomyCase {
            table: "linear_heterogeneous",
            description: "log: effect-modifier variance changed, mean fixed",
            model: model(Log, lin),
            base: normal(0.5, 1.0),
            perturbed: normal(0.5, 2.0),
            shared: SharedMoments::Mean,
            expected: Dependent,
        },
        TaxonomyCase {
            table: "linear_heterogeneous",
            description: "logit: effect-modifier variance changed, mean fixed",
            model: model(Logit, lin),
            base: normal(0.5, 1.0),
            perturbed: normal(0.5, 2.0),
            shared: SharedMoments::Mean,
            expected: Dependent,
        },
        TaxonomyCase {
            table: "quadratic",
            description: "identity: same mean and variance, different shape",
            model: model(Identity, quad),
            base: normal(0.0, 1.0),
            perturbed: two_point(0.0),
            shared: SharedMoments::MeanAndVariance,
            expected: Invariant,
        },
        TaxonomyCase {
            table: "quadratic",
            description: "identity: effect-modifier variance changed, mean fixed",
            model: model(Identity, quad),
            base: normal(0.0, 1.0),
            perturbed: normal(0.0, 2.0),
            shared: SharedMoments::Mean,
            expected: Dependent,
        },
        TaxonomyCase {
            table: "quadratic",
            description: "log: same mean and variance, different shape",
            model: model(Log, quad),
            base: normal(0.0, 1.0),
            perturbed: two_point(0.0),
            shared: SharedMoments::MeanAndVariance,
            expected: Dependent,
        },
        TaxonomyCase {
            table: "quadratic",
            description: "logit: same mean and variance, different shape",
            model: model(Logit, quad),
            base: normal(0.0, 1.0),
            perturbed: two_point(0.0),
            shared: SharedMoments::MeanAndVariance,
            expected: Dependent,
        },
        TaxonomyCase {
            table: "quadratic",
            description: "logit: effect-modifier variance changed, mean fixed",
            model: model(Logit, quad),
            base: normal(0.0, 1.0),
            perturbed: normal(0.0, 1.5),
            shared: SharedMoments::Mean,
            expected: Dependent,
        },
    ]
}
