//! Pairwise equality of MTE, CTEM and PACTE, and the shading patterns they
//! are expected to follow for each model form and link.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::covariate::CovariateDistribution;
use crate::error::{Error, Result};
use crate::estimand::{Estimand, EstimandReport};
use crate::link::LinkFunction;
use crate::model::{Coefficients, OutcomeModel};
use crate::quadrature::QuadratureSettings;

/// Absolute tolerance for comparing closed-form estimands.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-8;

/// Symmetric, reflexive, transitive equality relation over `Estimand::ALL`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualityMatrix {
    entries: [[bool; 3]; 3],
    pub tolerance: f64,
}

fn idx(e: Estimand) -> usize {
    match e {
        Estimand::Mte => 0,
        Estimand::Ctem => 1,
        Estimand::Pacte => 2,
    }
}

impl EqualityMatrix {
    /// Builds the relation from raw pairwise decisions, closing it under
    /// symmetry and transitivity.
    pub fn from_pairs(mut entries: [[bool; 3]; 3], tolerance: f64) -> Self {
        for i in 0..3 {
            entries[i][i] = true;
            for j in 0..3 {
                if entries[i][j] || entries[j][i] {
                    entries[i][j] = true;
                    entries[j][i] = true;
                }
            }
        }
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    if entries[i][k] && entries[k][j] {
                        entries[i][j] = true;
                    }
                }
            }
        }
        EqualityMatrix { entries, tolerance }
    }

    /// Matrix from a list of equal pairs; everything else differs.
    pub fn with_equal_pairs(pairs: &[(Estimand, Estimand)], tolerance: f64) -> Self {
        let mut entries = [[false; 3]; 3];
        for &(a, b) in pairs {
            entries[idx(a)][idx(b)] = true;
        }
        Self::from_pairs(entries, tolerance)
    }

    pub fn equal(&self, a: Estimand, b: Estimand) -> bool {
        self.entries[idx(a)][idx(b)]
    }

    pub fn entries(&self) -> [[bool; 3]; 3] {
        self.entries
    }

    /// Off-diagonal cells on which two matrices disagree.
    pub fn disagreements(&self, other: &EqualityMatrix) -> Vec<(Estimand, Estimand)> {
        let mut out = Vec::new();
        for a in Estimand::ALL {
            for b in Estimand::ALL {
                if idx(a) < idx(b) && self.equal(a, b) != other.equal(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// 3x3 text grid: `[*]` diagonal, `[#]` equal, `[ ]` different.
    pub fn render(&self, title: &str) -> String {
        let mut s = String::new();
        writeln!(s, "{title}").unwrap();
        write!(s, "{:8}", "").unwrap();
        for e in Estimand::ALL {
            write!(s, "{:<7}", e.label()).unwrap();
        }
        s.truncate(s.trim_end().len());
        s.push('\n');
        for a in Estimand::ALL {
            write!(s, "{:<8}", a.label()).unwrap();
            for b in Estimand::ALL {
                let cell = if a == b {
                    "[*]"
                } else if self.equal(a, b) {
                    "[#]"
                } else {
                    "[ ]"
                };
                write!(s, "{cell:<7}").unwrap();
            }
            s.truncate(s.trim_end().len());
            s.push('\n');
        }
        s
    }
}

/// Default tolerance: tight when every estimand has a closed form, otherwise
/// three times the quadrature error estimate (never below the closed-form tolerance).
pub fn default_tolerance(report: &EstimandReport) -> f64 {
    if report.closed_form.mte {
        CLOSED_FORM_TOLERANCE
    } else {
        CLOSED_FORM_TOLERANCE.max(3.0 * report.mte_error)
    }
}

pub fn equality_matrix(
    model: &OutcomeModel,
    dist: &CovariateDistribution,
    settings: &QuadratureSettings,
    tol: Option<f64>,
) -> Result<EqualityMatrix> {
    let report = EstimandReport::compute(model, dist, settings)?;
    let tol = tol.unwrap_or_else(|| default_tolerance(&report));
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("equality tolerance must be > 0, got {tol}")));
    }
    Ok(matrix_from_report(&report, tol))
}

pub fn matrix_from_report(report: &EstimandReport, tol: f64) -> EqualityMatrix {
    let mut entries = [[false; 3]; 3];
    for a in Estimand::ALL {
        for b in Estimand::ALL {
            entries[idx(a)][idx(b)] = (report.get(a) - report.get(b)).abs() <= tol;
        }
    }
    EqualityMatrix::from_pairs(entries, tol)
}

/// Shading expected for a model form under a link.
///
/// Linear-predictor contrasts that are constant or linear in `x` make CTEM
/// equal PACTE; the identity link additionally makes MTE equal PACTE, and the
/// log link does so only for homogeneous models.
pub fn expected_pattern(coefficients: &Coefficients, link: LinkFunction) -> EqualityMatrix {
    use Estimand::*;
    let pairs: &[(Estimand, Estimand)] = match (coefficients, link) {
        (Coefficients::Homogeneous { .. }, LinkFunction::Identity | LinkFunction::Log) => {
            &[(Mte, Ctem), (Ctem, Pacte)]
        }
        (Coefficients::Homogeneous { .. }, LinkFunction::Logit) => &[(Ctem, Pacte)],
        (Coefficients::LinearHeterogeneous { .. }, LinkFunction::Identity) => {
            &[(Mte, Ctem), (Ctem, Pacte)]
        }
        (Coefficients::LinearHeterogeneous { .. }, _) => &[(Ctem, Pacte)],
        (Coefficients::Quadratic { .. }, LinkFunction::Identity) => &[(Mte, Pacte)],
        (Coefficients::Quadratic { .. }, _) => &[],
    };
    EqualityMatrix::with_equal_pairs(pairs, 0.0)
}
