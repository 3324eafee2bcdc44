//! `verify-figures`: equality patterns of the canonical figure parameterizations.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use estimand_core::config::{checked_distribution, parse_toml, ModelConfig};
use estimand_core::equality::{equality_matrix, expected_pattern};
use estimand_core::{CovariateDistribution, Error, Estimand};

use crate::commands::{create_dir, quadrature, write_file, Failure, Outcome};

const SHIPPED: [(&str, &str); 3] = [
    ("configs/figure1.toml", include_str!("../configs/figure1.toml")),
    ("configs/figure2.toml", include_str!("../configs/figure2.toml")),
    ("configs/figure3.toml", include_str!("../configs/figure3.toml")),
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Panel {
    name: String,
    model: ModelConfig,
    tolerance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FigureConfig {
    title: String,
    dist: CovariateDistribution,
    #[serde(rename = "panel")]
    panels: Vec<Panel>,
}

pub fn verify(config: Option<&Path>, out: Option<&Path>, nodes: Option<usize>) -> Outcome {
    let q = quadrature(nodes)?;
    let sources: Vec<(String, String)> = match config {
        Some(p) => vec![(
            p.display().to_string(),
            std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        )],
        None => SHIPPED.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect(),
    };
    let mut text = String::new();
    let mut csv = String::from("panel,link,form,MTE,CTEM,PACTE,MTE=CTEM,MTE=PACTE,CTEM=PACTE,matches_expected\n");
    let mut mismatched = Vec::new();
    for (name, source) in &sources {
        let fig: FigureConfig = parse_toml(source, Path::new(name))?;
        checked_distribution(&fig.dist, "dist")?;
        writeln!(text, "== {} ==", fig.title).unwrap();
        for panel in &fig.panels {
            let model = panel.model.to_model()?;
            let report = estimand_core::EstimandReport::compute(&model, &fig.dist, &q)?;
            let matrix = equality_matrix(&model, &fig.dist, &q, panel.tolerance)?;
            let expected = expected_pattern(model.coefficients(), model.link());
            let diff = matrix.disagreements(&expected);
            let title = format!(
                "Figure {} ({} link, {})",
                panel.name,
                model.link(),
                model.coefficients().form_name()
            );
            text.push_str(&matrix.render(&title));
            if diff.is_empty() {
                writeln!(text, "matches expected shading\n").unwrap();
            } else {
                let cells: Vec<String> = diff.iter().map(|(a, b)| format!("{}/{}", a.label(), b.label())).collect();
                writeln!(text, "MISMATCH at {}\n", cells.join(", ")).unwrap();
                mismatched.push(panel.name.clone());
            }
            let eq = |a, b| matrix.equal(a, b).to_string();
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{}",
                panel.name,
                model.link(),
                model.coefficients().form_name(),
                report.mte,
                report.ctem,
                report.pacte,
                eq(Estimand::Mte, Estimand::Ctem),
                eq(Estimand::Mte, Estimand::Pacte),
                eq(Estimand::Ctem, Estimand::Pacte),
                diff.is_empty()
            )
            .unwrap();
        }
    }
    print!("{text}");
    if let Some(out) = out {
        create_dir(out)?;
        write_file(&out.join("figures.txt"), &text)?;
        write_file(&out.join("figures.csv"), &csv)?;
    }
    if mismatched.is_empty() {
        Ok(())
    } else {
        Err(Failure::FigureMismatch(mismatched))
    }
}
