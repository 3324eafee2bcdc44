//! Matching-adjusted indirect comparison: entropy-balancing weights that
//! reproduce a competitor trial's published covariate moments.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{AdjustmentMethod, AdjustmentResult, EstimandLabel};
use crate::error::{Error, Result};
use crate::link::{logit, Scale};
use crate::trial::{AggregateSummary, TrialIpd};

const GRADIENT_TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 500;
const MIN_ARM_WEIGHT: f64 = 1e-6;

/// Which covariate moments the weights must reproduce.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentOrder {
    #[default]
    First,
    /// Means and second raw moments, needed when effect modification is quadratic.
    FirstAndSecond,
}

/// Solution of the moment-matching problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MaicWeights {
    pub alpha: Vec<f64>,
    /// Normalized to sum to one.
    pub weights: Vec<f64>,
    pub ess: f64,
    pub iterations: usize,
    pub moment_names: Vec<String>,
}

/// Builds the `n x m` moment matrix for the named covariates (all when empty),
/// with squared columns appended for second-moment matching.
pub fn moment_matrix(ipd: &TrialIpd, covariates: &[String], order: MomentOrder) -> Result<(DMatrix<f64>, Vec<String>)> {
    let cols: Vec<usize> = if covariates.is_empty() {
        (0..ipd.dim()).collect()
    } else {
        covariates.iter().map(|c| ipd.covariate_index(c)).collect::<Result<_>>()?
    };
    let mut names: Vec<String> = cols.iter().map(|&j| ipd.covariate_names()[j].clone()).collect();
    let k = cols.len();
    let m = match order {
        MomentOrder::First => k,
        MomentOrder::FirstAndSecond => {
            names.extend(cols.iter().map(|&j| format!("{}^2", ipd.covariate_names()[j])));
            2 * k
        }
    };
    let matrix = DMatrix::from_fn(ipd.len(), m, |i, c| {
        let v = ipd.x(i)[cols[c % k]];
        if c < k {
            v
        } else {
            v * v
        }
    });
    Ok((matrix, names))
}

/// Target moments taken from a published summary, in the layout of [`moment_matrix`].
/// Second raw moments are reconstructed as `sd^2 + mean^2`.
pub fn moment_targets(summary: &AggregateSummary, covariates: &[String], order: MomentOrder) -> Result<Vec<f64>> {
    let idx: Vec<usize> = if covariates.is_empty() {
        (0..summary.covariate_names.len()).collect()
    } else {
        covariates
            .iter()
            .map(|c| {
                summary
                    .covariate_names
                    .iter()
                    .position(|n| n == c)
                    .ok_or_else(|| Error::InvalidInput(format!("summary does not report covariate '{c}'")))
            })
            .collect::<Result<_>>()?
    };
    let mut targets: Vec<f64> = idx.iter().map(|&j| summary.covariate_means[j]).collect();
    if order == MomentOrder::FirstAndSecond {
        targets.extend(idx.iter().map(|&j| {
            let (m, s) = (summary.covariate_means[j], summary.covariate_sds[j]);
            s * s + m * m
        }));
    }
    Ok(targets)
}

/// `log sum exp(z alpha)` with the normalized weights and their logits.
fn objective(z: &DMatrix<f64>, alpha: &DVector<f64>) -> (f64, DVector<f64>) {
    let eta = z * alpha;
    let peak = eta.max();
    let raw = eta.map(|e| (e - peak).exp());
    let total = raw.sum();
    (peak + total.ln(), raw / total)
}

fn infeasible(index: usize, names: &[String], residual: f64) -> Error {
    Error::InfeasibleTarget {
        index,
        name: names.get(index).cloned().unwrap_or_else(|| format!("moment {index}")),
        residual,
    }
}

/// Solves for `w_i ∝ exp(alpha' (x_i - target))` so that the weighted moments
/// equal `targets`, by damped Newton on the convex log-sum-exp objective.
pub fn maic_weights(x: &DMatrix<f64>, targets: &[f64]) -> Result<MaicWeights> {
    let names: Vec<String> = (0..targets.len()).map(|j| format!("moment {j}")).collect();
    maic_weights_named(x, targets, &names)
}

pub(crate) fn maic_weights_named(x: &DMatrix<f64>, targets: &[f64], names: &[String]) -> Result<MaicWeights> {
    let (n, m) = x.shape();
    if targets.len() != m {
        return Err(Error::Arity {
            expected: m,
            got: targets.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidInput("no subjects to weight".into()));
    }
    // Necessary hull condition, moment by moment: each target must lie
    // strictly inside the observed range, or coincide with a constant column.
    for j in 0..m {
        let col = x.column(j);
        let (lo, hi) = (col.min(), col.max());
        let t = targets[j];
        let inside = (lo < t && t < hi) || (lo == hi && t == lo);
        if !inside || !t.is_finite() {
            return Err(infeasible(j, names, if t <= lo { t - lo } else { t - hi }));
        }
    }
    let z = DMatrix::from_fn(n, m, |i, j| x[(i, j)] - targets[j]);
    let mut alpha = DVector::zeros(m);
    let (mut value, mut w) = objective(&z, &alpha);
    let mut iterations = 0;
    loop {
        let gradient = z.tr_mul(&w);
        let norm = gradient.amax();
        if norm < GRADIENT_TOLERANCE {
            break;
        }
        if iterations == MAX_ITERATIONS {
            let j = gradient.iamax();
            return Err(infeasible(j, names, gradient[j]));
        }
        iterations += 1;
        // Hessian is the weighted covariance of z.
        let zw = DMatrix::from_fn(n, m, |i, j| z[(i, j)] * w[i].sqrt());
        let mut hessian = zw.tr_mul(&zw) - &gradient * gradient.transpose();
        let ridge = 1e-14 * hessian.trace().max(1e-300);
        for j in 0..m {
            hessian[(j, j)] += ridge;
        }
        let step = match hessian.clone().cholesky() {
            Some(chol) => chol.solve(&gradient),
            None => gradient.clone(),
        };
        let mut t = 1.0;
        let slope = gradient.dot(&step);
        loop {
            let candidate = &alpha - &step * t;
            let (v, cw) = objective(&z, &candidate);
            // Near the optimum the objective decrease is lost in summation
            // noise, so a step that halves the gradient is also accepted.
            let armijo = v <= value - 1e-4 * t * slope;
            if armijo || z.tr_mul(&cw).amax() < 0.5 * norm || t < 1e-12 {
                alpha = candidate;
                value = v;
                w = cw;
                break;
            }
            t *= 0.5;
        }
    }
    let raw_sum: f64 = w.iter().sum();
    let sq: f64 = w.iter().map(|v| v * v).sum();
    Ok(MaicWeights {
        alpha: alpha.iter().copied().collect(),
        ess: raw_sum * raw_sum / sq,
        weights: w.iter().copied().collect(),
        iterations,
        moment_names: names.to_vec(),
    })
}

impl MaicWeights {
    /// Weights matching `targets` on the named covariates of `ipd`.
    pub fn fit(ipd: &TrialIpd, covariates: &[String], order: MomentOrder, targets: &[f64]) -> Result<Self> {
        let (x, names) = moment_matrix(ipd, covariates, order)?;
        maic_weights_named(&x, targets, &names)
    }
}

/// Contrast of two arm means on `scale` and its derivatives with respect to each mean.
pub(crate) fn mean_contrast(scale: Scale, m0: f64, m1: f64) -> Result<(f64, f64, f64)> {
    let domain = |ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(Error::NumericDomain(format!(
                "arm means ({m0}, {m1}) fall outside the domain of the {scale} scale"
            )))
        }
    };
    match scale {
        Scale::MeanDifference => Ok((m1 - m0, -1.0, 1.0)),
        Scale::LogRiskRatio => {
            domain(m0 > 0.0 && m1 > 0.0)?;
            Ok((m1.ln() - m0.ln(), -1.0 / m0, 1.0 / m1))
        }
        Scale::LogOddsRatio => {
            domain(m0 > 0.0 && m0 < 1.0 && m1 > 0.0 && m1 < 1.0)?;
            Ok((logit(m1) - logit(m0), -1.0 / (m0 * (1.0 - m0)), 1.0 / (m1 * (1.0 - m1))))
        }
    }
}

/// Weighted arm-mean contrast on `scale`. The standard error is the robust
/// sandwich variance of each weighted mean, treating the weights as fixed.
pub fn maic_estimate(ipd: &TrialIpd, weights: &MaicWeights, scale: Scale, population: &str) -> Result<AdjustmentResult> {
    let w = &weights.weights;
    if w.len() != ipd.len() {
        return Err(Error::Arity {
            expected: ipd.len(),
            got: w.len(),
        });
    }
    let t = ipd.treatments();
    let y = ipd.outcomes();
    let total: f64 = w.iter().sum();
    let mut mean = [0.0; 2];
    let mut var = [0.0; 2];
    for arm in 0..2u8 {
        let a = arm as usize;
        let rows = || (0..ipd.len()).filter(move |&i| t[i] == arm);
        let sw: f64 = rows().map(|i| w[i]).sum();
        if sw / total < MIN_ARM_WEIGHT {
            return Err(Error::DegenerateArm {
                arm,
                weight: sw / total,
            });
        }
        let m = rows().map(|i| w[i] * y[i]).sum::<f64>() / sw;
        mean[a] = m;
        var[a] = rows().map(|i| (w[i] * (y[i] - m)).powi(2)).sum::<f64>() / (sw * sw);
    }
    let (estimate, d0, d1) = mean_contrast(scale, mean[0], mean[1])?;
    let se = (d0 * d0 * var[0] + d1 * d1 * var[1]).sqrt();
    Ok(AdjustmentResult {
        estimate,
        se,
        scale,
        estimand_label: EstimandLabel::Mte,
        method: AdjustmentMethod::Maic,
        population: population.to_string(),
    })
}
