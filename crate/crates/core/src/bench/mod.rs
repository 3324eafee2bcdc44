//! Simulation study of anchored comparisons that pool compatible or
//! incompatible summary measures.
//!
//! Each replicate simulates an index trial (A vs C) and a competitor trial
//! (B vs C), adjusts the index trial to the competitor population, takes the
//! competitor's published estimate, and forms the anchored contrast. Bias is
//! scored against the true A-vs-B contrast for the estimand the index-side
//! method targets, so any bias is attributable to the competitor side.

mod report;

pub use report::{emit_report, run_dir_name, RESULTS_CSV_HEADER, TRUTH_CSV_HEADER};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjust::{
    anchored_itc, compatibility_check, maic_estimate, moment_targets, stc_gcomp, stc_plugin, AdjustmentMethod,
    AdjustmentResult, EstimandLabel, GcompOptions, GcompSe, MaicWeights, MomentOrder,
};
use crate::config::{checked_distribution, ModelConfig};
use crate::covariate::CovariateDistribution;
use crate::error::{Error, Result};
use crate::equality::equality_matrix;
use crate::estimand::EstimandReport;
use crate::link::Scale;
use crate::model::OutcomeModel;
use crate::quadrature::QuadratureSettings;
use crate::rng::derive_seed;
use crate::trial::{aggregate, conditional_estimate, simulate_trial, AggregateOptions, AggregateSummary, Formula, TrialConfig, TrialIpd};

pub const DEFAULT_REPLICATIONS: usize = 2000;
pub const DEFAULT_TRIAL_SIZE: usize = 2000;
/// Replicate failures above this fraction abort the run.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;
const Z_95: f64 = 1.959_963_984_540_054;

/// What the competitor trial publishes for B vs C.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcReporting {
    MarginalCrude,
    ConditionalCoefficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pairing {
    pub ac_method: AdjustmentMethod,
    pub bc_reporting: BcReporting,
    /// Covariates the competitor's regression adjusts for (all when empty).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conditioning_set: Vec<String>,
}

impl Pairing {
    pub fn describe(&self) -> String {
        match self.bc_reporting {
            BcReporting::MarginalCrude => format!("{}+MarginalCrude", self.ac_method),
            BcReporting::ConditionalCoefficient => format!("{}+ConditionalCoefficient", self.ac_method),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GcompSeKind {
    Bootstrap,
    DeltaMethod,
}

fn default_n() -> usize {
    DEFAULT_TRIAL_SIZE
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_formula() -> Formula {
    Formula::Interaction
}

fn default_gcomp_se() -> GcompSeKind {
    GcompSeKind::DeltaMethod
}

fn default_bootstrap() -> usize {
    200
}

/// The `[bench]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSettings {
    #[serde(default = "default_n")]
    pub n_ac: usize,
    #[serde(default = "default_n")]
    pub n_bc: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    /// Outcome regression used by both STC flavors.
    #[serde(default = "default_formula")]
    pub formula: Formula,
    #[serde(default)]
    pub moments: MomentOrder,
    #[serde(default = "default_gcomp_se")]
    pub gcomp_se: GcompSeKind,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_replicates: usize,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
    #[serde(default, rename = "pairing")]
    pub pairings: Vec<Pairing>,
}

fn default_nodes() -> usize {
    crate::quadrature::DEFAULT_NODES
}

/// A complete bench scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Outcome model of the index trial (A vs C); also used for B vs C unless `model_bc` is set.
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_bc: Option<ModelConfig>,
    pub dist_ac: CovariateDistribution,
    pub dist_bc: CovariateDistribution,
    pub bench: BenchSettings,
}

/// Resolved, validated scenario.
#[derive(Debug, Clone)]
struct Scenario {
    model_ac: OutcomeModel,
    model_bc: OutcomeModel,
    quadrature: QuadratureSettings,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.resolve().map(|_| ())
    }

    fn resolve(&self) -> Result<Scenario> {
        let model_ac = self.model.to_model()?;
        let model_bc = match &self.model_bc {
            Some(m) => m.to_model()?,
            None => model_ac,
        };
        if model_ac.link() != model_bc.link() {
            return Err(Error::Config("[model] and [model_bc] must share a link".into()));
        }
        checked_distribution(&self.dist_ac, "dist_ac")?;
        checked_distribution(&self.dist_bc, "dist_bc")?;
        if self.dist_ac.dim() != model_ac.arity() || self.dist_bc.dim() != model_ac.arity() {
            return Err(Error::Config(format!(
                "covariate laws must have dimension {} to match the model",
                model_ac.arity()
            )));
        }
        let b = &self.bench;
        if b.replications < 2 {
            return Err(Error::Config(format!("[bench] replications must be >= 2, got {}", b.replications)));
        }
        if b.n_ac < 2 || b.n_bc < 2 {
            return Err(Error::Config("[bench] trial sizes must be >= 2".into()));
        }
        if b.quadrature_nodes == 0 {
            return Err(Error::Config("[bench] quadrature_nodes must be positive".into()));
        }
        if matches!(b.formula, Formula::TreatmentOnly | Formula::MainEffects) {
            return Err(Error::Config("[bench] formula must be interaction or quadratic_interaction".into()));
        }
        for p in &b.pairings {
            if p.ac_method == AdjustmentMethod::ConditionalRegression {
                return Err(Error::Config("ConditionalRegression is a reporting choice, not an index-trial method".into()));
            }
            if p.bc_reporting == BcReporting::MarginalCrude && !p.conditioning_set.is_empty() {
                return Err(Error::Config(format!(
                    "pairing {} has a conditioning set but reports a marginal estimate",
                    p.describe()
                )));
            }
        }
        Ok(Scenario {
            model_ac,
            model_bc,
            quadrature: QuadratureSettings::with_nodes(b.quadrature_nodes),
        })
    }

    fn gcomp_options(&self, q: &QuadratureSettings, seed: u64) -> GcompOptions {
        GcompOptions {
            se: match self.bench.gcomp_se {
                GcompSeKind::DeltaMethod => GcompSe::DeltaMethod,
                GcompSeKind::Bootstrap => GcompSe::Bootstrap {
                    replicates: self.bench.bootstrap_replicates,
                    seed,
                },
            },
            quadrature: q.clone(),
        }
    }
}

/// Estimands in the competitor population for A vs C, B vs C, and their difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueEstimands {
    pub scale: Scale,
    pub ac: EstimandReport,
    pub bc: EstimandReport,
}

impl TrueEstimands {
    pub fn mte_bc(&self) -> f64 {
        self.ac.mte
    }

    pub fn ctem_bc(&self) -> f64 {
        self.ac.ctem
    }

    pub fn pacte_bc(&self) -> f64 {
        self.ac.pacte
    }

    /// True A-vs-B contrast for an estimand label; `None` for
    /// conditional-on-set labels, which have no population-level oracle here.
    pub fn ab(&self, label: &EstimandLabel) -> Option<f64> {
        match label {
            EstimandLabel::Mte => Some(self.ac.mte - self.bc.mte),
            EstimandLabel::Ctem => Some(self.ac.ctem - self.bc.ctem),
            EstimandLabel::Pacte => Some(self.ac.pacte - self.bc.pacte),
            EstimandLabel::ConditionalOnSet(_) => None,
        }
    }
}

/// Oracle estimands under the competitor covariate law.
pub fn true_estimands(config: &ScenarioConfig) -> Result<TrueEstimands> {
    let s = config.resolve()?;
    Ok(TrueEstimands {
        scale: s.model_ac.link().scale(),
        ac: EstimandReport::compute(&s.model_ac, &config.dist_bc, &s.quadrature)?,
        bc: EstimandReport::compute(&s.model_bc, &config.dist_bc, &s.quadrature)?,
    })
}

/// Summary statistics of one pairing across replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub pairing: Pairing,
    pub ac_label: EstimandLabel,
    pub bc_label: EstimandLabel,
    pub compatible: bool,
    pub diagnosis: String,
    pub truth: f64,
    pub mean_est: f64,
    pub bias: f64,
    pub empirical_se: f64,
    pub mc_se: f64,
    pub coverage_95: f64,
    pub mean_se: f64,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<PairingReport>,
    pub truth: TrueEstimands,
    pub replications: usize,
    pub seed: u64,
    /// Rendered equality matrix of the index model in the competitor population.
    pub matrix: String,
}

/// Target law rebuilt from the competitor's published covariate summaries,
/// keeping the family of each component of the true law.
fn reported_law(dist: &CovariateDistribution, summary: &AggregateSummary) -> Result<CovariateDistribution> {
    let parts: Vec<CovariateDistribution> = dist
        .components()
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let (m, s) = (summary.covariate_means[j], summary.covariate_sds[j]);
            match c {
                CovariateDistribution::Normal { .. } => CovariateDistribution::normal(m, s),
                CovariateDistribution::Bernoulli { .. } => CovariateDistribution::bernoulli(m.clamp(0.0, 1.0)),
                other => Ok(other.clone()),
            }
        })
        .collect::<Result<_>>()?;
    if parts.len() == 1 {
        Ok(parts.into_iter().next().expect("one component"))
    } else {
        CovariateDistribution::product(parts)
    }
}

struct Replicate {
    /// One entry per pairing: `(estimate, se)` or `None` on failure.
    itc: Vec<Option<(f64, f64)>>,
}

fn run_replicate(config: &ScenarioConfig, s: &Scenario, r: usize) -> Result<Replicate> {
    let b = &config.bench;
    let seed = b.seed;
    let ac_ipd = simulate_trial(&TrialConfig::new(
        s.model_ac,
        config.dist_ac.clone(),
        b.n_ac,
        derive_seed(seed, &[r as u64, 0]),
    ))?;
    let bc_ipd = simulate_trial(&TrialConfig::new(
        s.model_bc,
        config.dist_bc.clone(),
        b.n_bc,
        derive_seed(seed, &[r as u64, 1]),
    ))?;
    let link = s.model_ac.link();
    let scale = link.scale();
    let bc_summary = aggregate(&bc_ipd, scale, AggregateOptions::default());

    let mut ac_cache: Vec<(AdjustmentMethod, Option<AdjustmentResult>)> = Vec::new();
    let mut itc = Vec::with_capacity(b.pairings.len());
    for p in &b.pairings {
        let ac = match ac_cache.iter().find(|(m, _)| *m == p.ac_method) {
            Some((_, res)) => res.clone(),
            None => {
                let res = bc_summary
                    .as_ref()
                    .ok()
                    .and_then(|summary| index_estimate(config, s, p.ac_method, &ac_ipd, summary, r).ok());
                ac_cache.push((p.ac_method, res.clone()));
                res
            }
        };
        let bc = bc_summary.as_ref().ok().and_then(|summary| match p.bc_reporting {
            BcReporting::MarginalCrude => Some(AdjustmentResult::from_marginal(summary, "BC")),
            BcReporting::ConditionalCoefficient => {
                let set = if p.conditioning_set.is_empty() {
                    bc_ipd.covariate_names().to_vec()
                } else {
                    p.conditioning_set.clone()
                };
                let mut with = summary.clone();
                with.conditional = Some(conditional_estimate(&bc_ipd, link, &set).ok()?);
                AdjustmentResult::from_conditional(&with, "BC").ok()
            }
        });
        itc.push(match (ac, bc) {
            (Some(ac), Some(bc)) => anchored_itc(&ac, &bc).ok().map(|i| (i.delta_ab, i.se)),
            _ => None,
        });
    }
    Ok(Replicate { itc })
}

fn index_estimate(
    config: &ScenarioConfig,
    s: &Scenario,
    method: AdjustmentMethod,
    ipd: &TrialIpd,
    bc: &AggregateSummary,
    r: usize,
) -> Result<AdjustmentResult> {
    let b = &config.bench;
    let link = s.model_ac.link();
    match method {
        AdjustmentMethod::Maic => {
            let targets = moment_targets(bc, &[], b.moments)?;
            let weights = MaicWeights::fit(ipd, &[], b.moments, &targets)?;
            maic_estimate(ipd, &weights, link.scale(), "BC")
        }
        AdjustmentMethod::StcPlugin => stc_plugin(ipd, &bc.covariate_means, link, b.formula, "BC"),
        AdjustmentMethod::StcGcomp => {
            let target = reported_law(&config.dist_bc, bc)?;
            let opts = config.gcomp_options(&s.quadrature, derive_seed(b.seed, &[r as u64, 2]));
            stc_gcomp(ipd, &target, link, b.formula, &opts, "BC")
        }
        AdjustmentMethod::Crude => {
            let summary = aggregate(ipd, link.scale(), AggregateOptions::default())?;
            Ok(AdjustmentResult::from_marginal(&summary, "AC"))
        }
        AdjustmentMethod::ConditionalRegression => Err(Error::Config(
            "ConditionalRegression cannot be an index-trial method".into(),
        )),
    }
}

fn label_for(p: &Pairing, names: &[String]) -> (EstimandLabel, EstimandLabel) {
    let ac = p.ac_method.estimand().unwrap_or(EstimandLabel::Mte);
    let bc = match p.bc_reporting {
        BcReporting::MarginalCrude => EstimandLabel::Mte,
        BcReporting::ConditionalCoefficient => EstimandLabel::ConditionalOnSet(if p.conditioning_set.is_empty() {
            names.to_vec()
        } else {
            p.conditioning_set.clone()
        }),
    };
    (ac, bc)
}

/// Runs every replicate (in parallel, each on its own seed streams) and
/// summarizes each pairing. Deterministic given the config.
pub fn run_scenario(config: &ScenarioConfig) -> Result<BenchReport> {
    let s = config.resolve()?;
    let truth = true_estimands(config)?;
    let b = &config.bench;
    let replicates: Vec<Replicate> = (0..b.replications)
        .into_par_iter()
        .map(|r| run_replicate(config, &s, r))
        .collect::<Result<_>>()?;

    let names = crate::trial::default_names(config.dist_ac.dim());
    let mut rows = Vec::with_capacity(b.pairings.len());
    for (k, p) in b.pairings.iter().enumerate() {
        let (ac_label, bc_label) = label_for(p, &names);
        let truth_ab = truth.ab(&ac_label).ok_or_else(|| {
            Error::Config(format!("no oracle for estimand {ac_label}"))
        })?;
        let ok: Vec<(f64, f64)> = replicates.iter().filter_map(|rep| rep.itc[k]).collect();
        let failures = b.replications - ok.len();
        if failures as f64 > MAX_FAILURE_FRACTION * b.replications as f64 || ok.len() < 2 {
            return Err(Error::ReplicateFailures {
                failed: failures,
                total: b.replications,
                context: format!("pairing {}", p.describe()),
            });
        }
        let m = ok.len() as f64;
        let mean_est = ok.iter().map(|v| v.0).sum::<f64>() / m;
        let empirical_se = (ok.iter().map(|v| (v.0 - mean_est).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
        let covered = ok.iter().filter(|(est, se)| (est - truth_ab).abs() <= Z_95 * se).count();
        let probe = |label: &EstimandLabel| AdjustmentResult {
            estimate: 0.0,
            se: 0.0,
            scale: truth.scale,
            estimand_label: label.clone(),
            method: AdjustmentMethod::Crude,
            population: "BC".into(),
        };
        let compat = compatibility_check(&probe(&ac_label), &probe(&bc_label));
        rows.push(PairingReport {
            pairing: p.clone(),
            ac_label,
            bc_label,
            compatible: compat.compatible,
            diagnosis: compat.diagnosis,
            truth: truth_ab,
            mean_est,
            bias: mean_est - truth_ab,
            empirical_se,
            mc_se: empirical_se / m.sqrt(),
            coverage_95: covered as f64 / m,
            mean_se: ok.iter().map(|v| v.1).sum::<f64>() / m,
            successes: ok.len(),
            failures,
        });
    }
    let matrix = equality_matrix(&s.model_ac, &config.dist_bc, &s.quadrature, None)?.render(&format!(
        "{} {} model, competitor population",
        s.model_ac.link(),
        s.model_ac.coefficients().form_name()
    ));
    Ok(BenchReport {
        rows,
        truth,
        replications: b.replications,
        seed: b.seed,
        matrix,
    })
}
