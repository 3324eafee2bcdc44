//! TOML configuration documents shared by the command-line driver and the bench.
//!
//! A model section names its link, its coefficient form and the coefficients:
//!
//! ```toml
//! [model]
//! link = "logit"
//! form = "homogeneous"
//! b0 = 0.0
//! bx = 2.0
//! bt = 1.0
//! ```
//!
//! Covariate laws use the `law` tag, e.g. `law = "normal"`, `mean = 0.5`, `sd = 1.0`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::covariate::CovariateDistribution;
use crate::error::{Error, Result};
use crate::link::LinkFunction;
use crate::model::{Coefficients, Family, OutcomeModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    Homogeneous,
    LinearHeterogeneous,
    Quadratic,
}

/// The `[model]` table of a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub link: LinkFunction,
    pub form: Form,
    /// Gaussian noise sd for identity-link models (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub b0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bx: Option<f64>,
    #[serde(default)]
    pub bt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bxt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2t: Option<f64>,
}

impl ModelConfig {
    pub fn to_model(&self) -> Result<OutcomeModel> {
        let unexpected = |names: &[(&str, Option<f64>)]| -> Result<()> {
            match names.iter().find(|(_, v)| v.is_some()) {
                Some((name, _)) => Err(Error::Config(format!(
                    "coefficient '{name}' does not belong to the {:?} form",
                    self.form
                ))),
                None => Ok(()),
            }
        };
        let coefficients = match self.form {
            Form::Homogeneous => {
                unexpected(&[("bxt", self.bxt), ("b1", self.b1), ("b2", self.b2), ("b1t", self.b1t), ("b2t", self.b2t)])?;
                Coefficients::homogeneous(self.b0, self.bx.unwrap_or(0.0), self.bt)
            }
            Form::LinearHeterogeneous => {
                unexpected(&[("b1", self.b1), ("b2", self.b2), ("b1t", self.b1t), ("b2t", self.b2t)])?;
                Coefficients::linear(self.b0, self.bx.unwrap_or(0.0), self.bt, self.bxt.unwrap_or(0.0))
            }
            Form::Quadratic => {
                unexpected(&[("bx", self.bx), ("bxt", self.bxt)])?;
                Coefficients::quadratic(
                    self.b0,
                    self.b1.unwrap_or(0.0),
                    self.b2.unwrap_or(0.0),
                    self.bt,
                    self.b1t.unwrap_or(0.0),
                    self.b2t.unwrap_or(0.0),
                )
            }
        };
        let family = match (self.link, self.sigma) {
            (LinkFunction::Identity, Some(sigma)) => Family::Gaussian { sigma },
            (_, Some(_)) => {
                return Err(Error::Config(format!(
                    "'sigma' applies only to identity-link models, not {}",
                    self.link
                )))
            }
            (link, None) => Family::for_link(link),
        };
        OutcomeModel::new(self.link, family, coefficients).map_err(|e| Error::Config(e.to_string()))
    }
}

/// A validated covariate law from config.
pub fn checked_distribution(dist: &CovariateDistribution, section: &str) -> Result<()> {
    dist.validate()
        .map_err(|e| Error::Config(format!("[{section}]: {e}")))
}

/// Parses a TOML document; syntax and schema errors carry the line and column.
pub fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_toml(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Deserialize)]
    struct Doc {
        model: ModelConfig,
        dist: CovariateDistribution,
    }

    #[test]
    fn parses_a_model_and_law() {
        let doc: Doc = parse_toml(
            "[model]\nlink = \"logit\"\nform = \"homogeneous\"\nb0 = 0.0\nbx = 2.0\nbt = 1.0\n\n[dist]\nlaw = \"bernoulli\"\np = 0.5\n",
            Path::new("x.toml"),
        )
        .unwrap();
        let model = doc.model.to_model().unwrap();
        assert_eq!(*model.coefficients(), Coefficients::homogeneous(0.0, 2.0, 1.0));
        assert_eq!(model.family(), Family::Bernoulli);
        assert_eq!(doc.dist, CovariateDistribution::bernoulli(0.5).unwrap());
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse_toml::<Doc>("[model]\nlink = \"logit\"\nform = homogeneous\n", Path::new("bad.toml")).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = parse_toml::<Doc>(
            "[model]\nlink = \"logit\"\nform = \"homogeneous\"\nbogus = 1.0\n[dist]\nlaw = \"bernoulli\"\np = 0.5\n",
            Path::new("bad.toml"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
    }

    #[test]
    fn misplaced_coefficients_are_rejected() {
        let cfg = ModelConfig {
            link: LinkFunction::Identity,
            form: Form::Homogeneous,
            sigma: None,
            b0: 0.0,
            bx: Some(1.0),
            bt: 1.0,
            bxt: Some(0.5),
            b1: None,
            b2: None,
            b1t: None,
            b2t: None,
        };
        assert!(matches!(cfg.to_model(), Err(Error::Config(_))));
    }
}
