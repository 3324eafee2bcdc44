//! Canonical-link GLM fitting by iteratively reweighted least squares.
//!
//! The family is fixed by the link (identity/Gaussian, log/Poisson,
//! logit/Bernoulli), so Fisher scoring coincides with Newton-Raphson and the
//! observed and expected information agree.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::simulate::TrialIpd;
use crate::error::{Error, Result};
use crate::link::LinkFunction;

/// Outcome-regression specification. Columns appear in the order
/// intercept, covariate terms, treatment, treatment interactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// `1 + t`
    TreatmentOnly,
    /// `1 + x + t`
    MainEffects,
    /// `1 + x + t + x:t`
    Interaction,
    /// `1 + x + x^2 + t + x:t + x^2:t`
    QuadraticInteraction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmOptions {
    /// Covariates to include, by name; `None` means all of them.
    pub covariates: Option<Vec<String>>,
    /// Covariates are entered as `x - center` when set (one value per included covariate).
    pub center: Option<Vec<f64>>,
    pub max_iterations: usize,
    /// Convergence threshold on the per-observation score, `max_j |U_j| / n`.
    pub tolerance: f64,
    /// Logistic coefficients beyond this magnitude are treated as separation.
    pub separation_bound: f64,
}

impl Default for GlmOptions {
    fn default() -> Self {
        GlmOptions {
            covariates: None,
            center: None,
            max_iterations: 100,
            tolerance: 1e-10,
            separation_bound: 30.0,
        }
    }
}

/// Maps covariates and treatment to a design row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct DesignSpec {
    formula: Formula,
    columns: Vec<usize>,
    center: Vec<f64>,
}

impl DesignSpec {
    fn new(ipd: &TrialIpd, formula: Formula, options: &GlmOptions) -> Result<Self> {
        let columns = match &options.covariates {
            None => (0..ipd.dim()).collect(),
            Some(names) => names
                .iter()
                .map(|n| ipd.covariate_index(n))
                .collect::<Result<Vec<_>>>()?,
        };
        let center = match &options.center {
            None => vec![0.0; columns.len()],
            Some(c) if c.len() == columns.len() => c.clone(),
            Some(c) => {
                return Err(Error::Arity {
                    expected: columns.len(),
                    got: c.len(),
                })
            }
        };
        Ok(DesignSpec {
            formula,
            columns,
            center,
        })
    }

    fn width(&self) -> usize {
        let k = self.columns.len();
        match self.formula {
            Formula::TreatmentOnly => 2,
            Formula::MainEffects => k + 2,
            Formula::Interaction => 2 * k + 2,
            Formula::QuadraticInteraction => 4 * k + 2,
        }
    }

    fn names(&self, covariate_names: &[String]) -> Vec<String> {
        let xs: Vec<&str> = self.columns.iter().map(|&j| covariate_names[j].as_str()).collect();
        let mut names = vec!["(intercept)".to_string()];
        match self.formula {
            Formula::TreatmentOnly => names.push("t".into()),
            Formula::MainEffects => {
                names.extend(xs.iter().map(|x| x.to_string()));
                names.push("t".into());
            }
            Formula::Interaction => {
                names.extend(xs.iter().map(|x| x.to_string()));
                names.push("t".into());
                names.extend(xs.iter().map(|x| format!("{x}:t")));
            }
            Formula::QuadraticInteraction => {
                names.extend(xs.iter().map(|x| x.to_string()));
                names.extend(xs.iter().map(|x| format!("{x}^2")));
                names.push("t".into());
                names.extend(xs.iter().map(|x| format!("{x}:t")));
                names.extend(xs.iter().map(|x| format!("{x}^2:t")));
            }
        }
        names
    }

    /// Writes the design row for covariates `x` (full covariate vector) and treatment `t`.
    pub(crate) fn row(&self, x: &[f64], t: u8, out: &mut [f64]) {
        let t = f64::from(t);
        let k = self.columns.len();
        out[0] = 1.0;
        let centered = |j: usize| x[self.columns[j]] - self.center[j];
        match self.formula {
            Formula::TreatmentOnly => out[1] = t,
            Formula::MainEffects => {
                for j in 0..k {
                    out[1 + j] = centered(j);
                }
                out[1 + k] = t;
            }
            Formula::Interaction => {
                for j in 0..k {
                    let c = centered(j);
                    out[1 + j] = c;
                    out[2 + k + j] = c * t;
                }
                out[1 + k] = t;
            }
            Formula::QuadraticInteraction => {
                for j in 0..k {
                    let c = centered(j);
                    out[1 + j] = c;
                    out[1 + k + j] = c * c;
                    out[2 + 2 * k + j] = c * t;
                    out[2 + 3 * k + j] = c * c * t;
                }
                out[1 + 2 * k] = t;
            }
        }
    }

    fn treatment_index(&self) -> usize {
        let k = self.columns.len();
        match self.formula {
            Formula::TreatmentOnly => 1,
            Formula::MainEffects | Formula::Interaction => 1 + k,
            Formula::QuadraticInteraction => 1 + 2 * k,
        }
    }
}

/// A fitted outcome regression.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Inverse information, scaled by the estimated dispersion for Gaussian fits.
    pub covariance: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Final `max_j |U_j| / n`.
    pub score_norm: f64,
    pub dispersion: f64,
    pub link: LinkFunction,
    pub formula: Formula,
    pub(crate) spec: DesignSpec,
}

impl GlmFit {
    pub fn treatment_index(&self) -> usize {
        self.spec.treatment_index()
    }

    pub fn treatment_coefficient(&self) -> f64 {
        self.coefficients[self.treatment_index()]
    }

    pub fn treatment_se(&self) -> f64 {
        let j = self.treatment_index();
        self.covariance[(j, j)].max(0.0).sqrt()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|j| self.coefficients[j])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|j| self.covariance[(j, j)].max(0.0).sqrt())
    }

    /// Design row for a covariate vector (in the data's covariate order) under treatment `t`.
    pub fn design_row(&self, x: &[f64], t: u8) -> Vec<f64> {
        let mut row = vec![0.0; self.coefficients.len()];
        self.spec.row(x, t, &mut row);
        row
    }

    pub fn linear_predictor(&self, x: &[f64], t: u8) -> f64 {
        self.design_row(x, t)
            .iter()
            .zip(&self.coefficients)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Standard error of `c' beta`.
    pub fn contrast_se(&self, c: &[f64]) -> f64 {
        let v = DVector::from_column_slice(c);
        (v.transpose() * &self.covariance * &v)[(0, 0)].max(0.0).sqrt()
    }
}

pub fn fit_glm(ipd: &TrialIpd, formula: Formula, link: LinkFunction) -> Result<GlmFit> {
    fit_glm_with(ipd, formula, link, &GlmOptions::default())
}

const CHUNK: usize = 4096;

struct Pass {
    info: DMatrix<f64>,
    score: DVector<f64>,
    loglik: f64,
}

fn loglik_term(link: LinkFunction, y: f64, eta: f64) -> f64 {
    match link {
        LinkFunction::Identity => -0.5 * (y - eta) * (y - eta),
        LinkFunction::Log => y * eta - eta.exp(),
        // log(1 + e^eta), stably
        LinkFunction::Logit => {
            let softplus = if eta > 0.0 {
                eta + (-eta).exp().ln_1p()
            } else {
                eta.exp().ln_1p()
            };
            y * eta - softplus
        }
    }
}

/// One sweep over the data. Partial sums are formed over fixed chunks and
/// reduced in chunk order, so the result does not depend on thread scheduling.
fn sweep(
    ipd: &TrialIpd,
    spec: &DesignSpec,
    link: LinkFunction,
    beta: &DVector<f64>,
    need_info: bool,
) -> Pass {
    let p = beta.len();
    let n = ipd.len();
    let chunk_pass = |range: std::ops::Range<usize>| {
        let mut info = DMatrix::<f64>::zeros(if need_info { p } else { 0 }, if need_info { p } else { 0 });
        let mut score = DVector::<f64>::zeros(p);
        let mut loglik = 0.0;
        let mut row = vec![0.0; p];
        for i in range {
            spec.row(ipd.x(i), ipd.treatments()[i], &mut row);
            let eta: f64 = row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let y = ipd.outcomes()[i];
            let mu = link.inverse(eta);
            let resid = y - mu;
            loglik += loglik_term(link, y, eta);
            for a in 0..p {
                score[a] += row[a] * resid;
            }
            if need_info {
                let w = link.inverse_derivative(eta);
                for a in 0..p {
                    let wa = w * row[a];
                    for b in 0..=a {
                        info[(a, b)] += wa * row[b];
                    }
                }
            }
        }
        Pass { info, score, loglik }
    };
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Pass> = if chunks <= 1 {
        vec![chunk_pass(0..n)]
    } else {
        (0..chunks)
            .into_par_iter()
            .map(|c| chunk_pass(c * CHUNK..((c + 1) * CHUNK).min(n)))
            .collect()
    };
    let mut total = Pass {
        info: DMatrix::zeros(if need_info { p } else { 0 }, if need_info { p } else { 0 }),
        score: DVector::zeros(p),
        loglik: 0.0,
    };
    for part in parts {
        if need_info {
            total.info += part.info;
        }
        total.score += part.score;
        total.loglik += part.loglik;
    }
    if need_info {
        for a in 0..p {
            for b in 0..a {
                total.info[(b, a)] = total.info[(a, b)];
            }
        }
    }
    total
}

fn initial_beta(ipd: &TrialIpd, link: LinkFunction, p: usize) -> DVector<f64> {
    let mut beta = DVector::zeros(p);
    let mean_y = ipd.outcomes().iter().sum::<f64>() / ipd.len() as f64;
    beta[0] = match link {
        LinkFunction::Identity => mean_y,
        LinkFunction::Log => mean_y.max(1e-8).ln(),
        LinkFunction::Logit => {
            let m = mean_y.clamp(1e-6, 1.0 - 1e-6);
            (m / (1.0 - m)).ln()
        }
    };
    beta
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn fit_glm_with(
    ipd: &TrialIpd,
    formula: Formula,
    link: LinkFunction,
    options: &GlmOptions,
) -> Result<GlmFit> {
    let spec = DesignSpec::new(ipd, formula, options)?;
    let p = spec.width();
    let n = ipd.len();
    if n <= p {
        return Err(Error::SingularDesign(format!("{n} observations for {p} coefficients")));
    }
    let names = spec.names(ipd.covariate_names());
    let nf = n as f64;

    let mut beta = initial_beta(ipd, link, p);
    let mut pass = sweep(ipd, &spec, link, &beta, true);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        let chol = pass.info.clone().cholesky().ok_or_else(|| {
            Error::SingularDesign(format!("information matrix not positive definite ({names:?})"))
        })?;
        let step = chol.solve(&pass.score);
        // A small score alone is not enough: under separation the likelihood
        // flattens while the Newton step keeps pushing coefficients outward.
        if max_abs(&pass.score) / nf < options.tolerance
            && max_abs(&step) <= 1e-6 * (1.0 + max_abs(&beta))
        {
            converged = true;
            break;
        }
        iterations += 1;
        let mut scale = 1.0;
        let mut candidate = &beta + &step;
        let mut next = sweep(ipd, &spec, link, &candidate, true);
        let mut halvings = 0;
        while !(next.loglik >= pass.loglik - 1e-12 * pass.loglik.abs().max(1.0)) && halvings < 30 {
            scale *= 0.5;
            halvings += 1;
            candidate = &beta + &step * scale;
            next = sweep(ipd, &spec, link, &candidate, true);
        }
        beta = candidate;
        pass = next;
        if link == LinkFunction::Logit {
            if let Some((j, v)) = beta
                .iter()
                .enumerate()
                .find(|(_, v)| v.abs() > options.separation_bound)
            {
                return Err(Error::Separation {
                    name: names[j].clone(),
                    value: *v,
                });
            }
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericDomain("IRLS produced non-finite coefficients".into()));
        }
    }
    if !converged && max_abs(&pass.score) / nf < options.tolerance {
        converged = true;
    }

    let chol = pass.info.clone().cholesky().ok_or_else(|| {
        Error::SingularDesign(format!("information matrix not positive definite ({names:?})"))
    })?;
    let inverse = chol.inverse();
    let dispersion = match link {
        LinkFunction::Identity => {
            let rss: f64 = (0..n)
                .map(|i| {
                    let mut row = vec![0.0; p];
                    spec.row(ipd.x(i), ipd.treatments()[i], &mut row);
                    let fitted: f64 = row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
                    let r = ipd.outcomes()[i] - fitted;
                    r * r
                })
                .sum();
            rss / (n - p) as f64
        }
        _ => 1.0,
    };
    let mut covariance = inverse * dispersion;
    for a in 0..p {
        for b in 0..a {
            let avg = 0.5 * (covariance[(a, b)] + covariance[(b, a)]);
            covariance[(a, b)] = avg;
            covariance[(b, a)] = avg;
        }
    }
    Ok(GlmFit {
        names,
        coefficients: beta.iter().copied().collect(),
        covariance,
        converged,
        iterations,
        score_norm: max_abs(&pass.score) / nf,
        dispersion,
        link,
        formula,
        spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariate::CovariateDistribution;
    use crate::model::{Coefficients, Family, OutcomeModel};
    use crate::trial::simulate::{simulate_trial, OutcomeKind, TrialConfig};

    fn ipd_from(rows: &[(f64, u8, f64)], kind: OutcomeKind) -> TrialIpd {
        TrialIpd::new(
            vec!["x1".into()],
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| r.1).collect(),
            rows.iter().map(|r| r.2).collect(),
            kind,
        )
        .unwrap()
    }

    #[test]
    fn noiseless_linear_data_is_interpolated() {
        let model = OutcomeModel::new(
            LinkFunction::Identity,
            Family::Gaussian { sigma: 0.0 },
            Coefficients::homogeneous(1.0, 2.0, 0.5),
        )
        .unwrap();
        let ipd = simulate_trial(&TrialConfig::new(
            model,
            CovariateDistribution::normal(0.0, 1.0).unwrap(),
            500,
            4,
        ))
        .unwrap();
        let fit = fit_glm(&ipd, Formula::MainEffects, LinkFunction::Identity).unwrap();
        assert!(fit.converged);
        for (got, want) in fit.coefficients.iter().zip([1.0, 2.0, 0.5]) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        assert_eq!(fit.names, vec!["(intercept)", "x1", "t"]);
    }

    /// Binary x, binary t: the interaction model is saturated, so fitted cell
    /// probabilities equal observed proportions.
    #[test]
    fn saturated_logistic_matches_cell_logits() {
        // counts of (events, total) per (x, t) cell
        let cells = [((0.0, 0u8), (12, 40)), ((0.0, 1), (25, 45)), ((1.0, 0), (30, 50)), ((1.0, 1), (44, 52))];
        let mut rows = Vec::new();
        for ((x, t), (e, n)) in cells {
            for i in 0..n {
                rows.push((x, t, if i < e { 1.0 } else { 0.0 }));
            }
        }
        let ipd = ipd_from(&rows, OutcomeKind::Binary);
        let fit = fit_glm(&ipd, Formula::Interaction, LinkFunction::Logit).unwrap();
        let lg = |e: f64, n: f64| (e / (n - e)).ln();
        let l00 = lg(12.0, 40.0);
        let l01 = lg(25.0, 45.0);
        let l10 = lg(30.0, 50.0);
        let l11 = lg(44.0, 52.0);
        let oracle = [l00, l10 - l00, l01 - l00, (l11 - l10) - (l01 - l00)];
        for (got, want) in fit.coefficients.iter().zip(oracle) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn treatment_only_logit_is_log_odds_ratio() {
        let mut rows = Vec::new();
        for (t, e, n) in [(1u8, 10, 20), (0, 5, 20)] {
            for i in 0..n {
                rows.push((0.0, t, if i < e { 1.0 } else { 0.0 }));
            }
        }
        let ipd = ipd_from(&rows, OutcomeKind::Binary);
        let fit = fit_glm(&ipd, Formula::TreatmentOnly, LinkFunction::Logit).unwrap();
        assert!((fit.treatment_coefficient() - 3f64.ln()).abs() < 1e-8);
        let woolf = (1.0f64 / 10.0 + 1.0 / 10.0 + 1.0 / 5.0 + 1.0 / 15.0).sqrt();
        assert!((fit.treatment_se() - woolf).abs() < 1e-8);
    }

    #[test]
    fn covariance_is_symmetric_and_converged_score_small() {
        let model =
            OutcomeModel::canonical(LinkFunction::Log, Coefficients::linear(0.2, 0.4, 0.3, -0.2)).unwrap();
        let ipd = simulate_trial(&TrialConfig::new(
            model,
            CovariateDistribution::normal(0.0, 1.0).unwrap(),
            3000,
            8,
        ))
        .unwrap();
        let fit = fit_glm(&ipd, Formula::Interaction, LinkFunction::Log).unwrap();
        assert!(fit.converged);
        assert!(fit.score_norm < 1e-10);
        let c = &fit.covariance;
        for a in 0..c.nrows() {
            for b in 0..c.ncols() {
                assert!((c[(a, b)] - c[(b, a)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        // every subject treated: the treatment column equals the intercept
        let rows: Vec<_> = (0..20).map(|i| (i as f64, 1u8, (i % 3) as f64)).collect();
        let ipd = ipd_from(&rows, OutcomeKind::Count);
        assert!(matches!(
            fit_glm(&ipd, Formula::MainEffects, LinkFunction::Log),
            Err(Error::SingularDesign(_))
        ));
    }

    #[test]
    fn separation_is_detected() {
        let rows: Vec<_> = (0..40)
            .map(|i| {
                let x = i as f64 - 19.5;
                (x, (i % 2) as u8, if x > 0.0 { 1.0 } else { 0.0 })
            })
            .collect();
        let ipd = ipd_from(&rows, OutcomeKind::Binary);
        assert!(matches!(
            fit_glm(&ipd, Formula::MainEffects, LinkFunction::Logit),
            Err(Error::Separation { .. })
        ));
    }

    #[test]
    fn centering_moves_treatment_coefficient_to_the_center() {
        let model = OutcomeModel::new(
            LinkFunction::Identity,
            Family::Gaussian { sigma: 0.0 },
            Coefficients::linear(0.0, 1.0, 1.0, 0.5),
        )
        .unwrap();
        let ipd = simulate_trial(&TrialConfig::new(
            model,
            CovariateDistribution::normal(0.0, 1.0).unwrap(),
            300,
            5,
        ))
        .unwrap();
        let opts = GlmOptions {
            center: Some(vec![0.8]),
            ..Default::default()
        };
        let fit = fit_glm_with(&ipd, Formula::Interaction, LinkFunction::Identity, &opts).unwrap();
        assert!((fit.treatment_coefficient() - 1.4).abs() < 1e-10);
        let raw = fit_glm(&ipd, Formula::Interaction, LinkFunction::Identity).unwrap();
        let at = raw.coefficient("t").unwrap() + 0.8 * raw.coefficient("x1:t").unwrap();
        assert!((at - fit.treatment_coefficient()).abs() < 1e-10);
    }
}
