use std::fs::File;
use std::path::Path;

use super::{compatibility_check, AdjustmentResult, ItcResult};
use crate::error::{Error, Result};

pub const RESULTS_CSV_HEADER: [&str; 6] = ["method", "estimand_label", "scale", "population", "estimate", "se"];

pub const ITC_CSV_HEADER: [&str; 11] = [
    "population",
    "scale",
    "delta_ab",
    "se",
    "ac_method",
    "ac_estimand_label",
    "bc_method",
    "bc_estimand_label",
    "compatible",
    "diagnosis",
    "note",
];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_results_csv(results: &[AdjustmentResult], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RESULTS_CSV_HEADER).map_err(|e| csv_err(path, e))?;
    for r in results {
        w.write_record([
            r.method.name().to_string(),
            r.estimand_label.to_string(),
            r.scale.name().to_string(),
            r.population.clone(),
            r.estimate.to_string(),
            r.se.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_itc_csv(results: &[ItcResult], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(ITC_CSV_HEADER).map_err(|e| csv_err(path, e))?;
    for r in results {
        let c = compatibility_check(&r.ac, &r.bc);
        let note = if c.compatible {
            ""
        } else {
            "incompatible summary measures: delta_ab mixes estimands"
        };
        w.write_record([
            r.population.clone(),
            r.ac.scale.name().to_string(),
            r.delta_ab.to_string(),
            r.se.to_string(),
            r.ac.method.name().to_string(),
            r.ac.estimand_label.to_string(),
            r.bc.method.name().to_string(),
            r.bc.estimand_label.to_string(),
            c.compatible.to_string(),
            c.diagnosis,
            note.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
