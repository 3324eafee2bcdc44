//! Bench output: results and truth tables, the equality matrix, and a bias plot.

use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use sha2::{Digest, Sha256};

use super::{BcReporting, BenchReport, ScenarioConfig};
use crate::error::{Error, Result};

pub const RESULTS_CSV_HEADER: [&str; 17] = [
    "pairing",
    "ac_method",
    "bc_reporting",
    "conditioning_set",
    "ac_estimand_label",
    "bc_estimand_label",
    "scale",
    "compatible",
    "truth",
    "mean_est",
    "bias",
    "empirical_se",
    "mc_se",
    "coverage_95",
    "mean_se",
    "successes",
    "failures",
];

pub const TRUTH_CSV_HEADER: [&str; 6] = ["population", "contrast", "scale", "MTE", "CTEM", "PACTE"];

/// Run directory name derived from the SHA-256 of the effective config.
pub fn run_dir_name(config: &ScenarioConfig) -> Result<String> {
    let canonical = toml::to_string(config).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    let digest = Sha256::digest(canonical.as_bytes());
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    Ok(format!("run-{hex}"))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `results.csv`, `truth.csv`, `matrix.txt` and `bias.png` into `dir`.
pub fn emit_report(report: &BenchReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scale = report.truth.scale.name().to_string();

    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.pairing.describe(),
                r.pairing.ac_method.name().to_string(),
                match r.pairing.bc_reporting {
                    BcReporting::MarginalCrude => "marginal_crude".into(),
                    BcReporting::ConditionalCoefficient => "conditional_coefficient".into(),
                },
                r.pairing.conditioning_set.join(";"),
                r.ac_label.to_string(),
                r.bc_label.to_string(),
                scale.clone(),
                r.compatible.to_string(),
                r.truth.to_string(),
                r.mean_est.to_string(),
                r.bias.to_string(),
                r.empirical_se.to_string(),
                r.mc_se.to_string(),
                r.coverage_95.to_string(),
                r.mean_se.to_string(),
                r.successes.to_string(),
                r.failures.to_string(),
            ]
        })
        .collect();
    write_csv(&dir.join("results.csv"), &RESULTS_CSV_HEADER, &rows)?;

    let t = &report.truth;
    let truth_rows: Vec<Vec<String>> = [
        ("A_vs_C", t.ac.mte, t.ac.ctem, t.ac.pacte),
        ("B_vs_C", t.bc.mte, t.bc.ctem, t.bc.pacte),
        ("A_vs_B", t.ac.mte - t.bc.mte, t.ac.ctem - t.bc.ctem, t.ac.pacte - t.bc.pacte),
    ]
    .iter()
    .map(|(c, m, ct, p)| {
        vec![
            "BC".into(),
            c.to_string(),
            scale.clone(),
            m.to_string(),
            ct.to_string(),
            p.to_string(),
        ]
    })
    .collect();
    write_csv(&dir.join("truth.csv"), &TRUTH_CSV_HEADER, &truth_rows)?;

    let matrix_path = dir.join("matrix.txt");
    fs::write(&matrix_path, &report.matrix).map_err(|e| Error::io(&matrix_path, e))?;

    let png = dir.join("bias.png");
    bias_plot(report)
        .save(&png)
        .map_err(|e| Error::io(&png, std::io::Error::other(e)))?;
    Ok(())
}

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
const GREY: Rgb<u8> = Rgb([200, 200, 200]);
const COMPATIBLE: Rgb<u8> = Rgb([46, 139, 87]);
const INCOMPATIBLE: Rgb<u8> = Rgb([200, 60, 50]);

fn fill(img: &mut RgbImage, x0: u32, x1: u32, y0: u32, y1: u32, c: Rgb<u8>) {
    let (w, h) = img.dimensions();
    for x in x0.min(x1)..=x0.max(x1).min(w - 1) {
        for y in y0.min(y1)..=y0.max(y1).min(h - 1) {
            img.put_pixel(x, y, c);
        }
    }
}

/// Bias bars (green when the pairing is compatible, red otherwise) with
/// whiskers at one Monte Carlo standard error, around a zero line.
fn bias_plot(report: &BenchReport) -> RgbImage {
    const H: u32 = 320;
    const PAD: u32 = 30;
    const SLOT: u32 = 120;
    let k = report.rows.len() as u32;
    let w = (2 * PAD + SLOT * k).max(200);
    let mut img = RgbImage::from_pixel(w, H, WHITE);

    let mut lo: f64 = 0.0;
    let mut hi: f64 = 0.0;
    for r in &report.rows {
        lo = lo.min(r.bias - r.mc_se);
        hi = hi.max(r.bias + r.mc_se);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let span = (hi - lo) * 1.1;
    let top = hi + (span - (hi - lo)) / 2.0;
    let to_y = |v: f64| -> u32 {
        let frac = (top - v) / span;
        (PAD as f64 + frac * (H - 2 * PAD) as f64).round().clamp(0.0, (H - 1) as f64) as u32
    };

    fill(&mut img, PAD, PAD, PAD, H - PAD, GREY);
    let zero = to_y(0.0);
    fill(&mut img, PAD, w - PAD, zero, zero, BLACK);
    for (i, r) in report.rows.iter().enumerate() {
        let x0 = PAD + SLOT * i as u32 + 30;
        let x1 = x0 + SLOT - 60;
        let colour = if r.compatible { COMPATIBLE } else { INCOMPATIBLE };
        fill(&mut img, x0, x1, zero, to_y(r.bias), colour);
        let mid = (x0 + x1) / 2;
        let (ylo, yhi) = (to_y(r.bias - r.mc_se), to_y(r.bias + r.mc_se));
        fill(&mut img, mid, mid, yhi, ylo, BLACK);
        fill(&mut img, mid - 8, mid + 8, yhi, yhi, BLACK);
        fill(&mut img, mid - 8, mid + 8, ylo, ylo, BLACK);
    }
    img
}
