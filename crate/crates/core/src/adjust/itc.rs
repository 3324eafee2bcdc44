//! The anchored indirect comparison and estimand-compatibility checks.

use serde::{Deserialize, Serialize};

use super::{AdjustmentResult, EstimandLabel};
use crate::error::{Error, Result};

/// A versus B through the common comparator C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItcResult {
    pub delta_ab: f64,
    pub se: f64,
    pub population: String,
    pub ac: AdjustmentResult,
    pub bc: AdjustmentResult,
}

/// `delta_AB = delta_AC - delta_BC` with independent-trial variance.
/// Refuses to combine estimates on different scales.
pub fn anchored_itc(ac: &AdjustmentResult, bc: &AdjustmentResult) -> Result<ItcResult> {
    if ac.scale != bc.scale {
        return Err(Error::ScaleMismatch {
            left: ac.scale.name().into(),
            right: bc.scale.name().into(),
        });
    }
    let population = if ac.population == bc.population {
        ac.population.clone()
    } else {
        format!("{}|{}", ac.population, bc.population)
    };
    Ok(ItcResult {
        delta_ab: ac.estimate - bc.estimate,
        se: (ac.se * ac.se + bc.se * bc.se).sqrt(),
        population,
        ac: ac.clone(),
        bc: bc.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compatibility {
    pub compatible: bool,
    pub diagnosis: String,
}

fn sorted(set: &[String]) -> Vec<&str> {
    let mut v: Vec<&str> = set.iter().map(String::as_str).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Whether two estimates target the same summary measure and may be pooled.
/// Symmetric in its arguments.
pub fn compatibility_check(ac: &AdjustmentResult, bc: &AdjustmentResult) -> Compatibility {
    let mut problems = Vec::new();
    let (a, b) = (&ac.estimand_label, &bc.estimand_label);
    if a.is_marginal() != b.is_marginal() {
        problems.push("marginal vs conditional".to_string());
    } else {
        match (a, b) {
            (EstimandLabel::ConditionalOnSet(x), EstimandLabel::ConditionalOnSet(y)) => {
                if sorted(x) != sorted(y) {
                    problems.push("conditioning sets differ".to_string());
                }
            }
            _ if a != b => {
                let mut names = [a.to_string(), b.to_string()];
                names.sort();
                problems.push(format!("conditional estimands differ ({} vs {})", names[0], names[1]));
            }
            _ => {}
        }
    }
    if ac.scale != bc.scale {
        let mut names = [ac.scale.name(), bc.scale.name()];
        names.sort_unstable();
        problems.push(format!("scales differ ({} vs {})", names[0], names[1]));
    }
    if problems.is_empty() {
        Compatibility {
            compatible: true,
            diagnosis: format!("compatible: both {} on the {} scale", a, ac.scale),
        }
    } else {
        Compatibility {
            compatible: false,
            diagnosis: problems.join("; "),
        }
    }
}

/// A population-adjustment methodology and the estimands it can target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Methodology {
    pub name: &'static str,
    pub estimands: &'static [&'static str],
    /// Whether this crate implements the estimator (the rest are listed for reference).
    pub implemented: bool,
}

/// Methodologies for anchored comparisons and the summary measures they estimate.
pub fn methodologies() -> &'static [Methodology] {
    const TABLE: &[Methodology] = &[
        Methodology {
            name: "MAIC",
            estimands: &["MTE"],
            implemented: true,
        },
        Methodology {
            name: "STC (plug-in)",
            estimands: &["CTEM"],
            implemented: true,
        },
        Methodology {
            name: "STC (G-computation)",
            estimands: &["MTE"],
            implemented: true,
        },
        Methodology {
            name: "ML-NMR",
            estimands: &["PACTE", "MTE"],
            implemented: false,
        },
        Methodology {
            name: "NMI",
            estimands: &["CTEM"],
            implemented: false,
        },
        Methodology {
            name: "cross-NMR",
            estimands: &["CTEM"],
            implemented: false,
        },
    ];
    TABLE
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjust::AdjustmentMethod;
    use crate::link::Scale;

    fn result(estimate: f64, se: f64, label: EstimandLabel, scale: Scale) -> AdjustmentResult {
        AdjustmentResult {
            estimate,
            se,
            scale,
            estimand_label: label,
            method: AdjustmentMethod::Maic,
            population: "BC".into(),
        }
    }

    #[test]
    fn anchored_difference_arithmetic() {
        let ac = result(0.5, 0.3, EstimandLabel::Mte, Scale::LogOddsRatio);
        let bc = result(0.2, 0.4, EstimandLabel::Mte, Scale::LogOddsRatio);
        let r = anchored_itc(&ac, &bc).unwrap();
        assert!((r.delta_ab - 0.3).abs() < 1e-15);
        assert!((r.se - 0.5).abs() < 1e-15);
        assert_eq!(anchored_itc(&ac, &ac).unwrap().delta_ab, 0.0);
        let swapped = anchored_itc(&bc, &ac).unwrap();
        assert_eq!(swapped.delta_ab, -r.delta_ab);
        assert_eq!(swapped.se, r.se);
    }

    #[test]
    fn scale_mismatch_is_an_error() {
        let ac = result(0.5, 0.3, EstimandLabel::Mte, Scale::LogOddsRatio);
        let bc = result(0.2, 0.4, EstimandLabel::Mte, Scale::LogRiskRatio);
        assert!(matches!(anchored_itc(&ac, &bc), Err(Error::ScaleMismatch { .. })));
    }

    #[test]
    fn compatibility_diagnoses() {
        let mte = result(0.0, 1.0, EstimandLabel::Mte, Scale::LogOddsRatio);
        assert!(compatibility_check(&mte, &mte).compatible);

        let age_sex = result(
            0.0,
            1.0,
            EstimandLabel::ConditionalOnSet(vec!["age".into(), "sex".into()]),
            Scale::LogOddsRatio,
        );
        let c = compatibility_check(&mte, &age_sex);
        assert!(!c.compatible);
        assert_eq!(c.diagnosis, "marginal vs conditional");

        let age = result(0.0, 1.0, EstimandLabel::ConditionalOnSet(vec!["age".into()]), Scale::LogOddsRatio);
        let c = compatibility_check(&age, &age_sex);
        assert!(!c.compatible);
        assert_eq!(c.diagnosis, "conditioning sets differ");

        let sex_age = result(
            0.0,
            1.0,
            EstimandLabel::ConditionalOnSet(vec!["sex".into(), "age".into()]),
            Scale::LogOddsRatio,
        );
        assert!(compatibility_check(&age_sex, &sex_age).compatible);
    }

    #[test]
    fn compatibility_is_symmetric() {
        let labels = [
            EstimandLabel::Mte,
            EstimandLabel::Ctem,
            EstimandLabel::Pacte,
            EstimandLabel::ConditionalOnSet(vec!["x1".into()]),
            EstimandLabel::ConditionalOnSet(vec!["x1".into(), "x2".into()]),
        ];
        let scales = [Scale::LogOddsRatio, Scale::MeanDifference];
        for a in &labels {
            for b in &labels {
                for &sa in &scales {
                    for &sb in &scales {
                        let x = result(0.0, 1.0, a.clone(), sa);
                        let y = result(0.0, 1.0, b.clone(), sb);
                        let (l, r) = (compatibility_check(&x, &y), compatibility_check(&y, &x));
                        assert_eq!(l.compatible, r.compatible);
                        if !l.compatible {
                            assert_eq!(l.diagnosis, r.diagnosis);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn methodology_table() {
        let t = methodologies();
        let find = |n: &str| t.iter().find(|m| m.name == n).unwrap();
        assert_eq!(find("MAIC").estimands, ["MTE"]);
        assert_eq!(find("ML-NMR").estimands, ["PACTE", "MTE"]);
        assert!(!find("NMI").implemented);
    }
}
