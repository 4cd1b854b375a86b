//! CSV ingestion into [`Dataset`] and a matching writer for round trips.

use std::path::Path;

use drrd_core::Dataset;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

fn default_delimiter() -> char {
    ','
}

/// Maps file columns onto the (y, w, z) layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub outcome_col: String,
    pub running_col: String,
    #[serde(default)]
    pub covariate_cols: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

impl CsvSchema {
    pub fn validate(&self) -> Result<()> {
        if !self.delimiter.is_ascii() {
            return Err(CliError::Config(format!(
                "CSV delimiter must be an ASCII character, got `{}`",
                self.delimiter
            )));
        }
        let mut names: Vec<&str> = std::iter::once(self.outcome_col.as_str())
            .chain(std::iter::once(self.running_col.as_str()))
            .chain(self.covariate_cols.iter().map(String::as_str))
            .collect();
        names.sort_unstable();
        for pair in names.windows(2) {
            if pair[0] == pair[1] {
                return Err(CliError::Config(format!(
                    "CSV schema mentions column `{}` twice",
                    pair[0]
                )));
            }
        }
        Ok(())
    }
}

/// Reads the named columns of a headered CSV file as reals.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    schema.validate()?;
    let display = path.display().to_string();
    let io_err = |source| CliError::IoFailure {
        path: display.clone(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => io_err(io),
            other => CliError::Config(format!("{display}: {other:?}")),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| CliError::Config(format!("{display}: {e}")))?
        .clone();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::MissingColumn {
                column: name.to_string(),
                path: display.clone(),
            })
    };
    let y_idx = col_index(&schema.outcome_col)?;
    let w_idx = col_index(&schema.running_col)?;
    let z_idx: Vec<usize> = schema
        .covariate_cols
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;

    let mut y = Vec::new();
    let mut w = Vec::new();
    let mut z = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::UnparseableValue {
            value: "<malformed record>".into(),
            column: "-".into(),
            path: display.clone(),
            line: e
                .position()
                .map(|p| p.line())
                .unwrap_or(i as u64 + 2),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(i as u64 + 2);
        let parse = |idx: usize, column: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            match raw.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::UnparseableValue {
                    value: raw.to_string(),
                    column: column.to_string(),
                    path: display.clone(),
                    line,
                }),
            }
        };
        y.push(parse(y_idx, &schema.outcome_col)?);
        w.push(parse(w_idx, &schema.running_col)?);
        for (k, &idx) in z_idx.iter().enumerate() {
            z.push(parse(idx, &schema.covariate_cols[k])?);
        }
    }
    if y.is_empty() {
        return Err(CliError::EmptyFile { path: display });
    }
    Ok(Dataset::new(y, w, z, z_idx.len())?)
}

/// Writes a dataset using the schema's column names; the inverse of
/// [`load_csv`] up to float formatting (shortest round-trippable decimals,
/// so a round trip reproduces values exactly).
pub fn write_dataset(path: &Path, data: &Dataset, schema: &CsvSchema) -> Result<()> {
    schema.validate()?;
    if data.z_cols() != schema.covariate_cols.len() {
        return Err(CliError::Config(format!(
            "dataset has {} covariate columns but the schema names {}",
            data.z_cols(),
            schema.covariate_cols.len()
        )));
    }
    let display = path.display().to_string();
    let mut writer = csv::WriterBuilder::new()
        .delimiter(schema.delimiter as u8)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::IoFailure {
                path: display.clone(),
                source: io,
            },
            other => CliError::Config(format!("{display}: {other:?}")),
        })?;

    let mut header = vec![schema.outcome_col.clone(), schema.running_col.clone()];
    header.extend(schema.covariate_cols.iter().cloned());
    let io_wrap = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::IoFailure {
            path: display.clone(),
            source: io,
        },
        other => CliError::Config(format!("{display}: {other:?}")),
    };
    writer.write_record(&header).map_err(io_wrap)?;
    for i in 0..data.n() {
        let mut row = vec![data.y()[i].to_string(), data.w()[i].to_string()];
        row.extend(data.z_row(i).iter().map(|v| v.to_string()));
        writer.write_record(&row).map_err(io_wrap)?;
    }
    writer.flush().map_err(|e| CliError::IoFailure {
        path: display.clone(),
        source: e,
    })?;
    Ok(())
}
