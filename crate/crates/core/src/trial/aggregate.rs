//! Publication-style summaries of a trial: covariate moments, per-arm
//! outcome tables, and crude marginal effect estimates.

use serde::{Deserialize, Serialize};

use super::glm::{fit_glm_with, Formula, GlmOptions};
use super::simulate::{OutcomeKind, TrialIpd};
use crate::error::{Error, Result};
use crate::link::{LinkFunction, Scale};

/// Cells of a treatment-by-outcome table: `a` treated events, `b` treated
/// non-events, `c` control events, `d` control non-events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoByTwo {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl TwoByTwo {
    pub fn total(&self) -> f64 {
        self.a + self.b + self.c + self.d
    }

    fn corrected(&self) -> TwoByTwo {
        TwoByTwo {
            a: self.a + 0.5,
            b: self.b + 0.5,
            c: self.c + 0.5,
            d: self.d + 0.5,
        }
    }

    fn has_zero(&self) -> bool {
        [self.a, self.b, self.c, self.d].contains(&0.0)
    }

    /// Crude estimate on `scale` with its large-sample standard error.
    pub fn estimate(&self, scale: Scale) -> Result<(f64, f64)> {
        let TwoByTwo { a, b, c, d } = *self;
        let (n1, n0) = (a + b, c + d);
        match scale {
            Scale::LogOddsRatio => {
                if self.has_zero() {
                    return Err(Error::DegenerateTable(format!(
                        "zero cell in 2x2 table {self:?}; enable continuity correction"
                    )));
                }
                Ok(((a * d / (b * c)).ln(), (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d).sqrt()))
            }
            Scale::LogRiskRatio => {
                if a == 0.0 || c == 0.0 {
                    return Err(Error::DegenerateTable(format!(
                        "zero events in an arm {self:?}; enable continuity correction"
                    )));
                }
                let est = ((a / n1) / (c / n0)).ln();
                Ok((est, (1.0 / a - 1.0 / n1 + 1.0 / c - 1.0 / n0).sqrt()))
            }
            Scale::MeanDifference => {
                let (p1, p0) = (a / n1, c / n0);
                Ok((p1 - p0, (p1 * (1.0 - p1) / n1 + p0 * (1.0 - p0) / n0).sqrt()))
            }
        }
    }
}

/// Per-arm outcome summary, shaped by the outcome type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ArmSummary {
    Binary(TwoByTwo),
    /// Index 0 is control, 1 treated.
    Continuous { n: [usize; 2], mean: [f64; 2], sd: [f64; 2] },
    /// Event totals and person-time per arm, control first.
    Count { events: [f64; 2], exposure: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub value: f64,
    pub se: f64,
    pub scale: Scale,
}

/// A covariate-adjusted treatment coefficient and the covariates it conditions on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEstimate {
    pub value: f64,
    pub se: f64,
    pub scale: Scale,
    pub conditioning_set: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub n: usize,
    pub outcome: OutcomeKind,
    pub covariate_names: Vec<String>,
    pub covariate_means: Vec<f64>,
    pub covariate_sds: Vec<f64>,
    pub arms: ArmSummary,
    pub marginal: EffectEstimate,
    pub conditional: Option<ConditionalEstimate>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AggregateOptions {
    /// Add 0.5 to every cell of a binary table (or every event count) before estimating.
    pub continuity_correction: bool,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
    (mean, sd, n)
}

fn arm_summary(ipd: &TrialIpd) -> ArmSummary {
    let t = ipd.treatments();
    let y = ipd.outcomes();
    let arm = |a: u8| (0..ipd.len()).filter(move |&i| t[i] == a).map(move |i| y[i]);
    match ipd.outcome_kind() {
        OutcomeKind::Binary => {
            let (e1, n1) = (arm(1).sum::<f64>(), arm(1).count() as f64);
            let (e0, n0) = (arm(0).sum::<f64>(), arm(0).count() as f64);
            ArmSummary::Binary(TwoByTwo {
                a: e1,
                b: n1 - e1,
                c: e0,
                d: n0 - e0,
            })
        }
        OutcomeKind::Continuous => {
            let (m0, s0, n0) = mean_sd(arm(0));
            let (m1, s1, n1) = mean_sd(arm(1));
            ArmSummary::Continuous {
                n: [n0, n1],
                mean: [m0, m1],
                sd: [s0, s1],
            }
        }
        OutcomeKind::Count => ArmSummary::Count {
            events: [arm(0).sum(), arm(1).sum()],
            exposure: [arm(0).count() as f64, arm(1).count() as f64],
        },
    }
}

impl ArmSummary {
    /// Crude marginal estimate on `scale`.
    pub fn estimate(&self, scale: Scale, options: AggregateOptions) -> Result<EffectEstimate> {
        let (value, se) = match self {
            ArmSummary::Binary(table) => {
                let table = if options.continuity_correction {
                    table.corrected()
                } else {
                    *table
                };
                table.estimate(scale)?
            }
            ArmSummary::Continuous { n, mean, sd } => {
                if scale != Scale::MeanDifference {
                    return Err(Error::InvalidInput(format!(
                        "continuous outcomes support only the mean difference scale, not {scale}"
                    )));
                }
                let (n0, n1) = (n[0] as f64, n[1] as f64);
                let pooled = ((n1 - 1.0) * sd[1] * sd[1] + (n0 - 1.0) * sd[0] * sd[0]) / (n1 + n0 - 2.0);
                (mean[1] - mean[0], (pooled * (1.0 / n1 + 1.0 / n0)).sqrt())
            }
            ArmSummary::Count { events, exposure } => {
                let mut ev = *events;
                if options.continuity_correction {
                    ev = [ev[0] + 0.5, ev[1] + 0.5];
                }
                let (r0, r1) = (ev[0] / exposure[0], ev[1] / exposure[1]);
                match scale {
                    Scale::LogRiskRatio => {
                        if ev[0] == 0.0 || ev[1] == 0.0 {
                            return Err(Error::DegenerateTable(format!(
                                "zero events in an arm ({ev:?}); enable continuity correction"
                            )));
                        }
                        ((r1 / r0).ln(), (1.0 / ev[1] + 1.0 / ev[0]).sqrt())
                    }
                    Scale::MeanDifference => (
                        r1 - r0,
                        (ev[1] / (exposure[1] * exposure[1]) + ev[0] / (exposure[0] * exposure[0])).sqrt(),
                    ),
                    Scale::LogOddsRatio => {
                        return Err(Error::InvalidInput(
                            "odds ratios are undefined for count outcomes".into(),
                        ))
                    }
                }
            }
        };
        if !value.is_finite() || !(se > 0.0 && se.is_finite()) {
            return Err(Error::DegenerateTable(format!(
                "crude {scale} estimate {value} has standard error {se}"
            )));
        }
        Ok(EffectEstimate { value, se, scale })
    }
}

/// Summarizes a trial and computes the crude marginal estimate on `scale`.
pub fn aggregate(ipd: &TrialIpd, scale: Scale, options: AggregateOptions) -> Result<AggregateSummary> {
    let [n0, n1] = ipd.arm_sizes();
    if n0 == 0 || n1 == 0 {
        return Err(Error::DegenerateTable(format!("empty arm (control {n0}, treated {n1})")));
    }
    let k = ipd.dim();
    let mut covariate_means = Vec::with_capacity(k);
    let mut covariate_sds = Vec::with_capacity(k);
    for j in 0..k {
        let (m, s, _) = mean_sd((0..ipd.len()).map(|i| ipd.x(i)[j]));
        covariate_means.push(m);
        covariate_sds.push(s);
    }
    let arms = arm_summary(ipd);
    let marginal = arms.estimate(scale, options)?;
    Ok(AggregateSummary {
        n: ipd.len(),
        outcome: ipd.outcome_kind(),
        covariate_names: ipd.covariate_names().to_vec(),
        covariate_means,
        covariate_sds,
        arms,
        marginal,
        conditional: None,
    })
}

/// Treatment coefficient of a main-effects regression on `conditioning_set`,
/// as a trial would report from a multivariable analysis.
pub fn conditional_estimate(
    ipd: &TrialIpd,
    link: LinkFunction,
    conditioning_set: &[String],
) -> Result<ConditionalEstimate> {
    let options = GlmOptions {
        covariates: Some(conditioning_set.to_vec()),
        ..Default::default()
    };
    let formula = if conditioning_set.is_empty() {
        Formula::TreatmentOnly
    } else {
        Formula::MainEffects
    };
    let fit = fit_glm_with(ipd, formula, link, &options)?;
    Ok(ConditionalEstimate {
        value: fit.treatment_coefficient(),
        se: fit.treatment_se(),
        scale: link.scale(),
        conditioning_set: conditioning_set.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_ipd(cells: [(u8, usize, usize); 2]) -> TrialIpd {
        let mut t = Vec::new();
        let mut y = Vec::new();
        for (arm, events, n) in cells {
            for i in 0..n {
                t.push(arm);
                y.push(if i < events { 1.0 } else { 0.0 });
            }
        }
        let x = vec![0.0; t.len()];
        TrialIpd::new(vec!["x1".into()], x, t, y, OutcomeKind::Binary).unwrap()
    }

    #[test]
    fn woolf_log_odds_ratio() {
        let ipd = binary_ipd([(1, 10, 20), (0, 5, 20)]);
        let s = aggregate(&ipd, Scale::LogOddsRatio, AggregateOptions::default()).unwrap();
        assert_eq!(
            s.arms,
            ArmSummary::Binary(TwoByTwo {
                a: 10.0,
                b: 10.0,
                c: 5.0,
                d: 15.0
            })
        );
        assert!((s.marginal.value - 3f64.ln()).abs() < 1e-12);
        assert!((s.marginal.value - 1.0986).abs() < 1e-4);
        assert!((s.marginal.se - 0.6831).abs() < 1e-4);
    }

    #[test]
    fn identical_arms_give_null_estimates() {
        let ipd = binary_ipd([(1, 7, 20), (0, 7, 20)]);
        for scale in [Scale::LogOddsRatio, Scale::LogRiskRatio, Scale::MeanDifference] {
            let s = aggregate(&ipd, scale, AggregateOptions::default()).unwrap();
            assert_eq!(s.marginal.value, 0.0, "{scale}");
        }
    }

    #[test]
    fn continuous_mean_difference() {
        let t = vec![1, 1, 1, 0, 0, 0];
        let y = vec![2.0, 3.0, 4.0, 0.5, 1.5, 2.5];
        let ipd = TrialIpd::new(vec!["x1".into()], vec![0.0; 6], t, y, OutcomeKind::Continuous).unwrap();
        let s = aggregate(&ipd, Scale::MeanDifference, AggregateOptions::default()).unwrap();
        assert!((s.marginal.value - 1.5).abs() < 1e-15);
        // pooled sd 1, se = sqrt(2/3)
        assert!((s.marginal.se - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(aggregate(&ipd, Scale::LogOddsRatio, AggregateOptions::default()).is_err());
    }

    #[test]
    fn zero_cells_need_explicit_correction() {
        let ipd = binary_ipd([(1, 0, 10), (0, 4, 10)]);
        let err = aggregate(&ipd, Scale::LogOddsRatio, AggregateOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateTable(_)));
        let s = aggregate(
            &ipd,
            Scale::LogOddsRatio,
            AggregateOptions {
                continuity_correction: true,
            },
        )
        .unwrap();
        let expected = ((0.5f64 * 6.5) / (10.5 * 4.5)).ln();
        assert!((s.marginal.value - expected).abs() < 1e-12);
    }

    #[test]
    fn count_log_rate_ratio() {
        let t = vec![1, 1, 0, 0];
        let y = vec![3.0, 5.0, 1.0, 3.0];
        let ipd = TrialIpd::new(vec!["x1".into()], vec![0.0; 4], t, y, OutcomeKind::Count).unwrap();
        let s = aggregate(&ipd, Scale::LogRiskRatio, AggregateOptions::default()).unwrap();
        assert!((s.marginal.value - 2f64.ln()).abs() < 1e-12);
        assert!((s.marginal.se - (1.0f64 / 8.0 + 1.0 / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn table_totals_match_n() {
        let ipd = binary_ipd([(1, 3, 17), (0, 9, 23)]);
        let s = aggregate(&ipd, Scale::LogOddsRatio, AggregateOptions::default()).unwrap();
        match s.arms {
            ArmSummary::Binary(tab) => assert_eq!(tab.total() as usize, s.n),
            _ => unreachable!(),
        }
    }
}
