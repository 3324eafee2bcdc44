//! Covariate laws with exact moment access and sampling.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The law of the baseline covariate vector `X`.
///
/// Univariate laws describe a single covariate; `Product` stacks independent
/// univariate components into a vector. Use the constructors, which validate;
/// values deserialized from config must pass [`CovariateDistribution::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum CovariateDistribution {
    Normal { mean: f64, sd: f64 },
    Bernoulli { p: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    Product { components: Vec<CovariateDistribution> },
}

impl CovariateDistribution {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        let d = CovariateDistribution::Normal { mean, sd };
        d.validate()?;
        Ok(d)
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        let d = CovariateDistribution::Bernoulli { p };
        d.validate()?;
        Ok(d)
    }

    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let d = CovariateDistribution::Discrete { values, probs };
        d.validate()?;
        Ok(d)
    }

    /// Point mass at `x`.
    pub fn point(x: f64) -> Result<Self> {
        Self::discrete(vec![x], vec![1.0])
    }

    /// Independent product; nested products are flattened.
    pub fn product(components: Vec<CovariateDistribution>) -> Result<Self> {
        let mut flat = Vec::with_capacity(components.len());
        for c in components {
            match c {
                CovariateDistribution::Product { components } => flat.extend(components),
                other => flat.push(other),
            }
        }
        let d = CovariateDistribution::Product { components: flat };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CovariateDistribution::Normal { mean, sd } => {
                if !mean.is_finite() || !(*sd > 0.0 && sd.is_finite()) {
                    return Err(Error::InvalidDistribution(format!(
                        "normal needs finite mean and sd > 0, got mean={mean}, sd={sd}"
                    )));
                }
            }
            CovariateDistribution::Bernoulli { p } => {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "bernoulli p must lie in (0, 1), got {p}"
                    )));
                }
            }
            CovariateDistribution::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::InvalidDistribution(format!(
                        "discrete law needs matching non-empty values and probs ({} vs {})",
                        values.len(),
                        probs.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidDistribution("discrete values must be finite".into()));
                }
                if probs.iter().any(|&p| !(p > 0.0)) {
                    return Err(Error::InvalidDistribution("discrete probs must all be > 0".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidDistribution(format!(
                        "discrete probs must sum to 1, got {total}"
                    )));
                }
            }
            CovariateDistribution::Product { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidDistribution("product law needs components".into()));
                }
                for c in components {
                    if matches!(c, CovariateDistribution::Product { .. }) {
                        return Err(Error::InvalidDistribution(
                            "nested product laws must be flattened".into(),
                        ));
                    }
                    c.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Number of covariates.
    pub fn dim(&self) -> usize {
        match self {
            CovariateDistribution::Product { components } => components.len(),
            _ => 1,
        }
    }

    /// Univariate components, in covariate order.
    pub fn components(&self) -> &[CovariateDistribution] {
        match self {
            CovariateDistribution::Product { components } => components,
            single => std::slice::from_ref(single),
        }
    }

    /// True when every component has finite support.
    pub fn is_finite_support(&self) -> bool {
        self.components()
            .iter()
            .all(|c| !matches!(c, CovariateDistribution::Normal { .. }))
    }

    pub fn mean(&self) -> Vec<f64> {
        self.components().iter().map(|c| c.univariate_moments().0).collect()
    }

    pub fn variance(&self) -> Vec<f64> {
        self.components().iter().map(|c| c.univariate_moments().1).collect()
    }

    pub fn second_moment(&self) -> Vec<f64> {
        self.components().iter().map(|c| c.univariate_moments().2).collect()
    }

    /// (mean, variance, second moment) of a univariate law.
    fn univariate_moments(&self) -> (f64, f64, f64) {
        match self {
            CovariateDistribution::Normal { mean, sd } => {
                let var = sd * sd;
                (*mean, var, var + mean * mean)
            }
            CovariateDistribution::Bernoulli { p } => (*p, p * (1.0 - p), *p),
            CovariateDistribution::Discrete { values, probs } => {
                let m: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum();
                let var: f64 = values.iter().zip(probs).map(|(v, p)| p * (v - m) * (v - m)).sum();
                let second: f64 = values.iter().zip(probs).map(|(v, p)| p * v * v).sum();
                (m, var, second)
            }
            CovariateDistribution::Product { .. } => unreachable!("product has no scalar moments"),
        }
    }

    /// Draws one covariate vector into `out` (length `dim()`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (c, slot) in self.components().iter().zip(out.iter_mut()) {
            *slot = c.sample_univariate(rng);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }

    fn sample_univariate<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            CovariateDistribution::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            CovariateDistribution::Bernoulli { p } => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            CovariateDistribution::Discrete { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("validated non-empty")
            }
            CovariateDistribution::Product { .. } => unreachable!("product sampled per component"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    #[test]
    fn validation_rejects_bad_laws() {
        assert!(CovariateDistribution::normal(0.0, 0.0).is_err());
        assert!(CovariateDistribution::bernoulli(1.0).is_err());
        assert!(CovariateDistribution::discrete(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(CovariateDistribution::discrete(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(CovariateDistribution::discrete(vec![0.0], vec![0.5, 0.5]).is_err());
        assert!(CovariateDistribution::product(vec![]).is_err());
    }

    #[test]
    fn product_flattens() {
        let inner = CovariateDistribution::product(vec![
            CovariateDistribution::bernoulli(0.3).unwrap(),
            CovariateDistribution::normal(1.0, 2.0).unwrap(),
        ])
        .unwrap();
        let outer =
            CovariateDistribution::product(vec![inner, CovariateDistribution::point(4.0).unwrap()])
                .unwrap();
        assert_eq!(outer.dim(), 3);
        assert_eq!(outer.mean(), vec![0.3, 1.0, 4.0]);
        assert_eq!(outer.variance()[2], 0.0);
    }

    #[test]
    fn sampling_is_deterministic_and_on_support() {
        let d = CovariateDistribution::discrete(vec![-1.0, 2.0, 5.0], vec![0.2, 0.3, 0.5]).unwrap();
        let mut a = stream_rng(11, 0);
        let mut b = stream_rng(11, 0);
        for _ in 0..100 {
            let x = d.sample(&mut a);
            assert_eq!(x, d.sample(&mut b));
            assert!([-1.0, 2.0, 5.0].contains(&x[0]));
        }
    }

    fn law() -> impl Strategy<Value = CovariateDistribution> {
        prop_oneof![
            (-5.0f64..5.0, 0.01f64..4.0).prop_map(|(m, s)| CovariateDistribution::normal(m, s).unwrap()),
            (0.01f64..0.99).prop_map(|p| CovariateDistribution::bernoulli(p).unwrap()),
            prop::collection::vec((-10.0f64..10.0, 0.05f64..1.0), 1..6).prop_map(|pairs| {
                let total: f64 = pairs.iter().map(|p| p.1).sum();
                let values = pairs.iter().map(|p| p.0).collect();
                let mut probs: Vec<f64> = pairs.iter().map(|p| p.1 / total).collect();
                let drift: f64 = 1.0 - probs.iter().sum::<f64>();
                probs[0] += drift;
                CovariateDistribution::discrete(values, probs).unwrap()
            }),
        ]
    }

    proptest! {
        #[test]
        fn second_moment_is_variance_plus_mean_squared(d in law()) {
            let m = d.mean()[0];
            let v = d.variance()[0];
            let s = d.second_moment()[0];
            prop_assert!((s - (v + m * m)).abs() <= 1e-12 * (1.0 + s.abs()));
        }
    }
}
