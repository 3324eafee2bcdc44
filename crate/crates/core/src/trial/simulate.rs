use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariate::CovariateDistribution;
use crate::error::{Error, Result};
use crate::model::{Family, OutcomeModel};
use crate::rng::stream_rng;

/// Support of the outcome variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Binary,
    Count,
    Continuous,
}

impl OutcomeKind {
    pub fn for_family(family: Family) -> Self {
        match family {
            Family::Gaussian { .. } => OutcomeKind::Continuous,
            Family::Poisson => OutcomeKind::Count,
            Family::Bernoulli => OutcomeKind::Binary,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OutcomeKind::Binary => "binary",
            OutcomeKind::Count => "count",
            OutcomeKind::Continuous => "continuous",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(OutcomeKind::Binary),
            "count" => Ok(OutcomeKind::Count),
            "continuous" => Ok(OutcomeKind::Continuous),
            other => Err(Error::InvalidInput(format!("unknown outcome kind '{other}'"))),
        }
    }

    /// Most specific kind consistent with the observed outcomes.
    pub fn infer(y: &[f64]) -> Self {
        if y.iter().all(|&v| v == 0.0 || v == 1.0) {
            OutcomeKind::Binary
        } else if y.iter().all(|&v| v >= 0.0 && v.fract() == 0.0) {
            OutcomeKind::Count
        } else {
            OutcomeKind::Continuous
        }
    }
}

/// A simple randomized trial: covariates drawn from `dist`, treatment
/// assigned by independent coin flips with probability `allocation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub model: OutcomeModel,
    pub dist: CovariateDistribution,
    pub n: usize,
    pub allocation: f64,
    pub seed: u64,
}

impl TrialConfig {
    pub fn new(model: OutcomeModel, dist: CovariateDistribution, n: usize, seed: u64) -> Self {
        TrialConfig {
            model,
            dist,
            n,
            allocation: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidInput(format!("trial size must be >= 2, got {}", self.n)));
        }
        if !(self.allocation > 0.0 && self.allocation < 1.0) {
            return Err(Error::InvalidInput(format!(
                "allocation must lie in (0, 1), got {}",
                self.allocation
            )));
        }
        self.dist.validate()?;
        if self.dist.dim() != self.model.arity() {
            return Err(Error::Arity {
                expected: self.model.arity(),
                got: self.dist.dim(),
            });
        }
        Ok(())
    }
}

/// Subject-level trial data, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialIpd {
    covariate_names: Vec<String>,
    x: Vec<f64>,
    t: Vec<u8>,
    y: Vec<f64>,
    outcome: OutcomeKind,
    provenance: Option<TrialConfig>,
}

impl TrialIpd {
    /// Builds IPD from row-major covariates (`n * k` values).
    pub fn new(
        covariate_names: Vec<String>,
        x: Vec<f64>,
        t: Vec<u8>,
        y: Vec<f64>,
        outcome: OutcomeKind,
    ) -> Result<Self> {
        let n = t.len();
        let k = covariate_names.len();
        if y.len() != n || x.len() != n * k {
            return Err(Error::InvalidInput(format!(
                "inconsistent IPD columns: {n} treatments, {} outcomes, {} covariate values for {k} covariates",
                y.len(),
                x.len()
            )));
        }
        if let Some(bad) = t.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidInput(format!("treatment must be 0 or 1, got {bad}")));
        }
        let support_ok = match outcome {
            OutcomeKind::Binary => y.iter().all(|&v| v == 0.0 || v == 1.0),
            OutcomeKind::Count => y.iter().all(|&v| v >= 0.0 && v.fract() == 0.0),
            OutcomeKind::Continuous => y.iter().all(|v| v.is_finite()),
        };
        if !support_ok {
            return Err(Error::InvalidInput(format!(
                "outcomes fall outside the {} support",
                outcome.name()
            )));
        }
        Ok(TrialIpd {
            covariate_names,
            x,
            t,
            y,
            outcome,
            provenance: None,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn x(&self, i: usize) -> &[f64] {
        let k = self.dim();
        &self.x[i * k..(i + 1) * k]
    }

    pub fn covariates(&self) -> &[f64] {
        &self.x
    }

    pub fn treatments(&self) -> &[u8] {
        &self.t
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.y
    }

    pub fn outcome_kind(&self) -> OutcomeKind {
        self.outcome
    }

    pub fn provenance(&self) -> Option<&TrialConfig> {
        self.provenance.as_ref()
    }

    /// Subjects per arm, `[control, treated]`.
    pub fn arm_sizes(&self) -> [usize; 2] {
        let treated = self.t.iter().filter(|&&t| t == 1).count();
        [self.len() - treated, treated]
    }

    pub fn covariate_index(&self, name: &str) -> Result<usize> {
        self.covariate_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown covariate '{name}'")))
    }

    /// Rows `idx` (with repetition) as a new data set.
    pub fn resample(&self, idx: &[usize]) -> TrialIpd {
        let k = self.dim();
        let mut x = Vec::with_capacity(idx.len() * k);
        for &i in idx {
            x.extend_from_slice(self.x(i));
        }
        TrialIpd {
            covariate_names: self.covariate_names.clone(),
            x,
            t: idx.iter().map(|&i| self.t[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            outcome: self.outcome,
            provenance: None,
        }
    }
}

/// Default covariate names `x1..xk`.
pub fn default_names(k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("x{j}")).collect()
}

fn draw_outcome<R: Rng>(family: Family, mean: f64, rng: &mut R) -> Result<f64> {
    Ok(match family {
        Family::Gaussian { sigma } => {
            let z: f64 = StandardNormal.sample(rng);
            if sigma == 0.0 {
                mean
            } else {
                mean + sigma * z
            }
        }
        Family::Poisson => {
            if mean <= 0.0 {
                0.0
            } else {
                let law = Poisson::new(mean)
                    .map_err(|e| Error::NumericDomain(format!("poisson mean {mean}: {e}")))?;
                law.sample(rng)
            }
        }
        Family::Bernoulli => {
            if rng.random::<f64>() < mean {
                1.0
            } else {
                0.0
            }
        }
    })
}

/// Simulates one trial. Row `i` draws from its own stream keyed by `(seed, i)`,
/// so the result is independent of how rows are scheduled across threads.
pub fn simulate_trial(config: &TrialConfig) -> Result<TrialIpd> {
    config.validate()?;
    let k = config.dist.dim();
    let model = &config.model;
    let rows: Vec<Result<(Vec<f64>, u8, f64)>> = (0..config.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(config.seed, i as u64);
            let x = config.dist.sample(&mut rng);
            let t = u8::from(rng.random::<f64>() < config.allocation);
            let mean = model.conditional_mean(t, &x)?;
            let y = draw_outcome(model.family(), mean, &mut rng)?;
            Ok((x, t, y))
        })
        .collect();
    let mut x = Vec::with_capacity(config.n * k);
    let mut t = Vec::with_capacity(config.n);
    let mut y = Vec::with_capacity(config.n);
    for row in rows {
        let (xi, ti, yi) = row?;
        x.extend_from_slice(&xi);
        t.push(ti);
        y.push(yi);
    }
    Ok(TrialIpd {
        covariate_names: default_names(k),
        x,
        t,
        y,
        outcome: OutcomeKind::for_family(model.family()),
        provenance: Some(config.clone()),
    })
}
