use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use estimand_core::adjust::{
    anchored_itc, maic_estimate, moment_targets, stc_gcomp, stc_plugin, write_itc_csv, write_results_csv,
    AdjustmentMethod, AdjustmentResult, GcompOptions, GcompSe, MaicWeights, MomentOrder,
};
use estimand_core::bench::{emit_report, run_dir_name, run_scenario, ScenarioConfig};
use estimand_core::config::{checked_distribution, read_toml, ModelConfig};
use estimand_core::equality::equality_matrix;
use estimand_core::quadrature::{QuadratureSettings, DEFAULT_NODES};
use estimand_core::trial::{
    aggregate, conditional_estimate, read_ipd_csv, read_summary_csv, simulate_trial, write_ipd_csv,
    write_summary_csv, AggregateOptions, AggregateSummary, Formula, TrialConfig, TrialIpd,
};
use estimand_core::{CovariateDistribution, Error, EstimandReport, LinkFunction, Scale};

/// Why a subcommand stopped.
#[derive(Debug)]
pub enum Failure {
    Core(Error),
    /// Figure panels whose equality pattern differs from the expected shading.
    FigureMismatch(Vec<String>),
}

impl Failure {
    pub fn code(&self) -> &'static str {
        match self {
            Failure::Core(e) => e.code(),
            Failure::FigureMismatch(_) => "E_FIGURE_MISMATCH",
        }
    }

    /// 1 for configuration and input problems, 2 for numeric failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_numeric() => 2,
            Failure::Core(_) => 1,
            Failure::FigureMismatch(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::FigureMismatch(panels) => {
                write!(f, "equality pattern differs from the expected shading in panel(s) {}", panels.join(", "))
            }
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

pub type Outcome = Result<(), Failure>;

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn quadrature(nodes: Option<usize>) -> Result<QuadratureSettings, Error> {
    match nodes {
        Some(0) => Err(Error::Config("--quadrature-nodes must be positive".into())),
        Some(n) => Ok(QuadratureSettings::with_nodes(n)),
        None => Ok(QuadratureSettings::with_nodes(DEFAULT_NODES)),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimandsConfig {
    model: ModelConfig,
    dist: CovariateDistribution,
    /// Equality tolerance for the matrix; defaults to the quadrature-aware choice.
    tolerance: Option<f64>,
}

pub fn estimands(config: &Path, out: &Path, nodes: Option<usize>) -> Outcome {
    let cfg: EstimandsConfig = read_toml(config)?;
    let model = cfg.model.to_model()?;
    checked_distribution(&cfg.dist, "dist")?;
    let q = quadrature(nodes)?;
    let report = EstimandReport::compute(&model, &cfg.dist, &q)?;
    let matrix = equality_matrix(&model, &cfg.dist, &q, cfg.tolerance)?;
    create_dir(out)?;
    let csv = format!(
        "link,form,{}\n{},{},{}\n",
        EstimandReport::CSV_HEADER,
        model.link(),
        model.coefficients().form_name(),
        report.csv_row()
    );
    write_file(&out.join("estimands.csv"), &csv)?;
    let title = format!("{} link, {} model", model.link(), model.coefficients().form_name());
    write_file(&out.join("matrix.txt"), &matrix.render(&title))?;
    print!("{csv}");
    Ok(())
}

fn default_allocation() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialSection {
    n: usize,
    #[serde(default = "default_allocation")]
    allocation: f64,
    #[serde(default)]
    seed: u64,
    /// Scale of the crude marginal estimate; defaults to the model's link scale.
    scale: Option<Scale>,
    /// Adjustment set for a reported conditional estimate.
    conditioning_set: Option<Vec<String>>,
    #[serde(default)]
    continuity_correction: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    model: ModelConfig,
    dist: CovariateDistribution,
    trial: TrialSection,
}

pub fn simulate(config: &Path, out: &Path, seed: Option<u64>) -> Outcome {
    let cfg: SimulateConfig = read_toml(config)?;
    let model = cfg.model.to_model()?;
    checked_distribution(&cfg.dist, "dist")?;
    let t = &cfg.trial;
    let trial = TrialConfig {
        model,
        dist: cfg.dist.clone(),
        n: t.n,
        allocation: t.allocation,
        seed: seed.unwrap_or(t.seed),
    };
    trial.validate().map_err(|e| Error::Config(format!("[trial]: {e}")))?;
    let ipd = simulate_trial(&trial)?;
    let scale = t.scale.unwrap_or(model.link().scale());
    let options = AggregateOptions {
        continuity_correction: t.continuity_correction,
    };
    let mut summary = aggregate(&ipd, scale, options)?;
    if let Some(set) = &t.conditioning_set {
        summary.conditional = Some(conditional_estimate(&ipd, model.link(), set)?);
    }
    create_dir(out)?;
    write_ipd_csv(&ipd, &out.join("ipd.csv"))?;
    write_summary_csv(&summary, &out.join("summary.csv"))?;
    println!(
        "simulated {} subjects; crude {} = {} (se {})",
        ipd.len(),
        scale,
        summary.marginal.value,
        summary.marginal.se
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BcReport {
    MarginalCrude,
    ConditionalCoefficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SeKind {
    Bootstrap,
    DeltaMethod,
}

fn default_methods() -> Vec<AdjustmentMethod> {
    vec![AdjustmentMethod::Maic, AdjustmentMethod::StcPlugin, AdjustmentMethod::StcGcomp]
}

fn default_formula() -> Formula {
    Formula::Interaction
}

fn default_bc_report() -> BcReport {
    BcReport::MarginalCrude
}

fn default_se() -> SeKind {
    SeKind::Bootstrap
}

fn default_bootstrap() -> usize {
    1000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdjustSection {
    /// Index-trial IPD (A vs C), relative to the config file.
    ipd: PathBuf,
    /// Competitor summary (B vs C), relative to the config file.
    summary: PathBuf,
    link: LinkFunction,
    #[serde(default = "default_methods")]
    methods: Vec<AdjustmentMethod>,
    #[serde(default = "default_formula")]
    formula: Formula,
    #[serde(default)]
    moments: MomentOrder,
    #[serde(default = "default_bc_report")]
    bc_reporting: BcReport,
    #[serde(default = "default_se")]
    gcomp_se: SeKind,
    #[serde(default = "default_bootstrap")]
    bootstrap_replicates: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdjustConfig {
    adjust: AdjustSection,
}

fn relative_to(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new(".")).join(p)
    }
}

/// Target covariate law from published moments: Bernoulli for covariates
/// that are binary in the index IPD, normal otherwise.
fn summary_law(ipd: &TrialIpd, summary: &AggregateSummary) -> Result<CovariateDistribution, Error> {
    let mut parts = Vec::with_capacity(ipd.dim());
    for (j, name) in ipd.covariate_names().iter().enumerate() {
        let k = summary
            .covariate_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidInput(format!("summary does not report covariate '{name}'")))?;
        let (m, s) = (summary.covariate_means[k], summary.covariate_sds[k]);
        let binary = (0..ipd.len()).all(|i| matches!(ipd.x(i)[j], v if v == 0.0 || v == 1.0));
        parts.push(if binary {
            CovariateDistribution::bernoulli(m)?
        } else {
            CovariateDistribution::normal(m, s)?
        });
    }
    if parts.len() == 1 {
        Ok(parts.remove(0))
    } else {
        CovariateDistribution::product(parts)
    }
}

pub fn adjust(config: &Path, out: &Path, seed: Option<u64>, nodes: Option<usize>) -> Outcome {
    let cfg: AdjustConfig = read_toml(config)?;
    let a = &cfg.adjust;
    let ipd = read_ipd_csv(&relative_to(config, &a.ipd), None)?;
    let summary = read_summary_csv(&relative_to(config, &a.summary))?;
    let scale = a.link.scale();
    let q = quadrature(nodes)?;
    let seed = seed.unwrap_or(a.seed);

    let bc = match a.bc_reporting {
        BcReport::MarginalCrude => AdjustmentResult::from_marginal(&summary, "BC"),
        BcReport::ConditionalCoefficient => AdjustmentResult::from_conditional(&summary, "BC")?,
    };
    let mut results = Vec::new();
    for &method in &a.methods {
        let r = match method {
            AdjustmentMethod::Maic => {
                let targets = moment_targets(&summary, ipd.covariate_names(), a.moments)?;
                let w = MaicWeights::fit(&ipd, &[], a.moments, &targets)?;
                println!("MAIC effective sample size {:.1} of {}", w.ess, ipd.len());
                maic_estimate(&ipd, &w, scale, "BC")?
            }
            AdjustmentMethod::StcPlugin => {
                let means = moment_targets(&summary, ipd.covariate_names(), MomentOrder::First)?;
                stc_plugin(&ipd, &means, a.link, a.formula, "BC")?
            }
            AdjustmentMethod::StcGcomp => {
                let target = summary_law(&ipd, &summary)?;
                let options = GcompOptions {
                    se: match a.gcomp_se {
                        SeKind::Bootstrap => GcompSe::Bootstrap {
                            replicates: a.bootstrap_replicates,
                            seed,
                        },
                        SeKind::DeltaMethod => GcompSe::DeltaMethod,
                    },
                    quadrature: q.clone(),
                };
                stc_gcomp(&ipd, &target, a.link, a.formula, &options, "BC")?
            }
            AdjustmentMethod::Crude => {
                let s = aggregate(&ipd, scale, AggregateOptions::default())?;
                AdjustmentResult::from_marginal(&s, "AC")
            }
            AdjustmentMethod::ConditionalRegression => {
                return Err(Error::Config("ConditionalRegression describes published estimates, not an adjustment method".into()).into())
            }
        };
        results.push(r);
    }
    let itc = results
        .iter()
        .map(|ac| anchored_itc(ac, &bc))
        .collect::<Result<Vec<_>, _>>()?;
    create_dir(out)?;
    let mut all = results.clone();
    all.push(bc);
    write_results_csv(&all, &out.join("results.csv"))?;
    write_itc_csv(&itc, &out.join("itc.csv"))?;
    for r in &itc {
        println!(
            "{} vs {}: delta_AB = {} (se {})",
            r.ac.method, r.bc.method, r.delta_ab, r.se
        );
    }
    Ok(())
}

pub fn bench(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    replications: Option<usize>,
    nodes: Option<usize>,
) -> Outcome {
    let mut cfg: ScenarioConfig = read_toml(config)?;
    if let Some(s) = seed {
        cfg.bench.seed = s;
    }
    if let Some(r) = replications {
        cfg.bench.replications = r;
    }
    if let Some(n) = nodes {
        cfg.bench.quadrature_nodes = n;
    }
    cfg.validate()?;
    let dir = out.join(run_dir_name(&cfg)?);
    let report = run_scenario(&cfg)?;
    emit_report(&report, &dir)?;
    let effective = toml::to_string(&cfg)
        .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    write_file(&dir.join("config.toml"), &effective)?;
    for row in &report.rows {
        println!(
            "{:<36} bias {:+.4} (mc_se {:.4}) coverage {:.3}{}",
            row.pairing.describe(),
            row.bias,
            row.mc_se,
            row.coverage_95,
            if row.compatible { "" } else { "  [incompatible]" }
        );
    }
    println!("{}", dir.display());
    Ok(())
}
