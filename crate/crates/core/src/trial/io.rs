//! CSV persistence for IPD and aggregate summaries.
//!
//! IPD files hold one column per covariate followed by `t` and `y`. Summary
//! files are two-column `key,value` tables so they stay readable by hand.

use std::fs::File;
use std::path::Path;

use super::aggregate::{AggregateSummary, ArmSummary, ConditionalEstimate, EffectEstimate, TwoByTwo};
use super::simulate::{OutcomeKind, TrialIpd};
use crate::error::{Error, Result};
use crate::link::Scale;

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn parse_err(path: &Path, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message,
    }
}

pub fn write_ipd_csv(ipd: &TrialIpd, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<&str> = ipd.covariate_names().iter().map(String::as_str).collect();
    header.extend(["t", "y"]);
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..ipd.len() {
        record.clear();
        record.extend(ipd.x(i).iter().map(|v| v.to_string()));
        record.push(ipd.treatments()[i].to_string());
        record.push(ipd.outcomes()[i].to_string());
        w.write_record(&record).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads IPD written by [`write_ipd_csv`]. When `outcome` is `None` the type
/// is inferred from the values in `y`.
pub fn read_ipd_csv(path: &Path, outcome: Option<OutcomeKind>) -> Result<TrialIpd> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let t_col = cols
        .iter()
        .position(|&c| c == "t")
        .ok_or_else(|| parse_err(path, "missing column 't'".into()))?;
    let y_col = cols
        .iter()
        .position(|&c| c == "y")
        .ok_or_else(|| parse_err(path, "missing column 'y'".into()))?;
    let x_cols: Vec<usize> = (0..cols.len()).filter(|&j| j != t_col && j != y_col).collect();
    let names = x_cols.iter().map(|&j| cols[j].to_string()).collect();

    let (mut x, mut t, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = row + 2;
        let num = |j: usize| -> Result<f64> {
            rec.get(j)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| parse_err(path, format!("line {line}: column '{}' is not a number", cols[j])))
        };
        for &j in &x_cols {
            x.push(num(j)?);
        }
        let tv = num(t_col)?;
        if tv != 0.0 && tv != 1.0 {
            return Err(parse_err(path, format!("line {line}: treatment must be 0 or 1, got {tv}")));
        }
        t.push(tv as u8);
        y.push(num(y_col)?);
    }
    let outcome = outcome.unwrap_or_else(|| OutcomeKind::infer(&y));
    TrialIpd::new(names, x, t, y, outcome)
}

fn push(rows: &mut Vec<(String, String)>, key: impl Into<String>, value: impl ToString) {
    rows.push((key.into(), value.to_string()));
}

fn summary_rows(s: &AggregateSummary) -> Vec<(String, String)> {
    let mut rows = Vec::new();
    push(&mut rows, "n", s.n);
    push(&mut rows, "outcome", s.outcome.name());
    for (j, name) in s.covariate_names.iter().enumerate() {
        push(&mut rows, format!("mean.{name}"), s.covariate_means[j]);
        push(&mut rows, format!("sd.{name}"), s.covariate_sds[j]);
    }
    match &s.arms {
        ArmSummary::Binary(tab) => {
            push(&mut rows, "events.treated", tab.a);
            push(&mut rows, "nonevents.treated", tab.b);
            push(&mut rows, "events.control", tab.c);
            push(&mut rows, "nonevents.control", tab.d);
        }
        ArmSummary::Continuous { n, mean, sd } => {
            for (arm, i) in [("control", 0), ("treated", 1)] {
                push(&mut rows, format!("n.{arm}"), n[i]);
                push(&mut rows, format!("outcome_mean.{arm}"), mean[i]);
                push(&mut rows, format!("outcome_sd.{arm}"), sd[i]);
            }
        }
        ArmSummary::Count { events, exposure } => {
            for (arm, i) in [("control", 0), ("treated", 1)] {
                push(&mut rows, format!("events.{arm}"), events[i]);
                push(&mut rows, format!("exposure.{arm}"), exposure[i]);
            }
        }
    }
    push(&mut rows, "marginal.scale", s.marginal.scale.name());
    push(&mut rows, "marginal.estimate", s.marginal.value);
    push(&mut rows, "marginal.se", s.marginal.se);
    if let Some(c) = &s.conditional {
        push(&mut rows, "conditional.scale", c.scale.name());
        push(&mut rows, "conditional.estimate", c.value);
        push(&mut rows, "conditional.se", c.se);
        push(&mut rows, "conditional.set", c.conditioning_set.join(";"));
    }
    rows
}

pub fn write_summary_csv(summary: &AggregateSummary, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["key", "value"]).map_err(|e| csv_err(path, e))?;
    for (k, v) in summary_rows(summary) {
        w.write_record([k, v]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

struct Rows<'a> {
    path: &'a Path,
    rows: Vec<(String, String)>,
}

impl Rows<'_> {
    fn str(&self, key: &str) -> Result<&str> {
        self.rows
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| parse_err(self.path, format!("missing key '{key}'")))
    }

    fn has(&self, key: &str) -> bool {
        self.rows.iter().any(|(k, _)| k == key)
    }

    fn num(&self, key: &str) -> Result<f64> {
        let v = self.str(key)?;
        v.trim()
            .parse()
            .map_err(|_| parse_err(self.path, format!("key '{key}': '{v}' is not a number")))
    }

    fn scale(&self, key: &str) -> Result<Scale> {
        self.str(key)?.parse().map_err(|e: Error| parse_err(self.path, e.to_string()))
    }
}

pub fn read_summary_csv(path: &Path) -> Result<AggregateSummary> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != 2 {
            return Err(parse_err(path, format!("expected key,value rows, got {} fields", rec.len())));
        }
        rows.push((rec[0].trim().to_string(), rec[1].trim().to_string()));
    }
    let rows = Rows { path, rows };

    let outcome = OutcomeKind::parse(rows.str("outcome")?)?;
    let covariate_names: Vec<String> = rows
        .rows
        .iter()
        .filter_map(|(k, _)| k.strip_prefix("mean.").map(str::to_string))
        .collect();
    let mut covariate_means = Vec::new();
    let mut covariate_sds = Vec::new();
    for name in &covariate_names {
        covariate_means.push(rows.num(&format!("mean.{name}"))?);
        covariate_sds.push(rows.num(&format!("sd.{name}"))?);
    }
    let arms = match outcome {
        OutcomeKind::Binary => ArmSummary::Binary(TwoByTwo {
            a: rows.num("events.treated")?,
            b: rows.num("nonevents.treated")?,
            c: rows.num("events.control")?,
            d: rows.num("nonevents.control")?,
        }),
        OutcomeKind::Continuous => ArmSummary::Continuous {
            n: [rows.num("n.control")? as usize, rows.num("n.treated")? as usize],
            mean: [rows.num("outcome_mean.control")?, rows.num("outcome_mean.treated")?],
            sd: [rows.num("outcome_sd.control")?, rows.num("outcome_sd.treated")?],
        },
        OutcomeKind::Count => ArmSummary::Count {
            events: [rows.num("events.control")?, rows.num("events.treated")?],
            exposure: [rows.num("exposure.control")?, rows.num("exposure.treated")?],
        },
    };
    let marginal = EffectEstimate {
        value: rows.num("marginal.estimate")?,
        se: rows.num("marginal.se")?,
        scale: rows.scale("marginal.scale")?,
    };
    let conditional = if rows.has("conditional.estimate") {
        let set = rows.str("conditional.set")?;
        Some(ConditionalEstimate {
            value: rows.num("conditional.estimate")?,
            se: rows.num("conditional.se")?,
            scale: rows.scale("conditional.scale")?,
            conditioning_set: set.split(';').filter(|s| !s.is_empty()).map(str::to_string).collect(),
        })
    } else {
        None
    };
    Ok(AggregateSummary {
        n: rows.num("n")? as usize,
        outcome,
        covariate_names,
        covariate_means,
        covariate_sds,
        arms,
        marginal,
        conditional,
    })
}
