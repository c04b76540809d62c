//! CSV exchange format for logistic-regression datasets.
//!
//! One row per observation, header `label,v_1,...,v_{d_x}`. Values are written
//! with Rust's shortest round-trip float formatting, so export followed by
//! import reproduces the covariates bit for bit.

use std::io::{Read, Write};

use super::LogisticRegressionModel;
use crate::error::{Error, Result};

pub fn write_logistic_csv<W: Write>(model: &LogisticRegressionModel, out: W) -> Result<()> {
    let d_x = crate::models::Model::dim_latent(model);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["label".to_string()];
    header.extend((1..=d_x).map(|k| format!("v_{k}")));
    w.write_record(&header)?;
    for (i, label) in model.labels().iter().enumerate() {
        let mut row = vec![label.to_string()];
        row.extend(model.covariate(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_logistic_csv`]; `sigma` is the prior
/// scale, which the file does not carry.
pub fn read_logistic_csv<R: Read>(input: R, sigma: f64) -> Result<LogisticRegressionModel> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.is_empty() {
        return Err(Error::Format("empty header".into()));
    }
    for (k, name) in header.iter().enumerate() {
        let expected = if k == 0 { "label".to_string() } else { format!("v_{k}") };
        if name != expected {
            return Err(Error::Format(format!(
                "column {} is named `{name}`, expected `{expected}`",
                k + 1
            )));
        }
    }
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row_no = line + 2;
        let label = match rec.get(0) {
            Some("0") => 0u8,
            Some("1") => 1u8,
            other => {
                return Err(Error::Format(format!(
                    "row {row_no}: label must be 0 or 1, got {other:?}"
                )))
            }
        };
        let v = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(k, s)| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {row_no}: column v_{} is not a number: `{s}`", k + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        labels.push(label);
        rows.push(v);
    }
    LogisticRegressionModel::new(labels, rows, sigma)
}
