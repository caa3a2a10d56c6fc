// Copyright 2026 The tomolab Authors
// SPDX-License-Identifier: Apache-2.0

//! CSV and JSON file formats. Floats are written with 17 significant digits
//! so every file reads back bit-identical.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::CumulantState;
use crate::tomography::{GridSpec, TomogramPoint, TomographyLine};

pub const TRAJECTORY_HEADER: [&str; 6] = ["t", "mean_q", "mean_p", "var_q", "var_p", "cov_qp"];
pub const TOMOGRAM_HEADER: [&str; 5] = ["x", "mu", "nu", "value", "noise_sigma"];
pub const WIGNER_HEADER: [&str; 3] = ["q", "p", "w"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expected header {expected:?}, found {found:?}")]
    Header { expected: Vec<String>, found: Vec<String> },
    /// `row` counts data rows from 1.
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_rows<W: Write>(w: W, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn read_rows<R: Read>(r: R, header: &[&str]) -> Result<Vec<Vec<f64>>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(IoError::Header {
            expected: header.iter().map(|s| s.to_string()).collect(),
            found,
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let values = rec
            .iter()
            .zip(header)
            .map(|(field, name)| {
                let v: f64 = field.parse().map_err(|_| IoError::Row {
                    row,
                    message: format!("{name} = {field:?} is not a number"),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(IoError::Row {
                        row,
                        message: format!("{name} = {v} is not finite"),
                    })
                }
            })
            .collect::<Result<Vec<f64>, IoError>>()?;
        rows.push(values);
    }
    Ok(rows)
}

/// One trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub state: CumulantState,
}

pub fn write_trajectory<W: Write>(w: W, rows: &[TrajectoryRow]) -> Result<(), IoError> {
    write_rows(
        w,
        &TRAJECTORY_HEADER,
        rows.iter().map(|r| {
            let s = r.state;
            vec![r.t, s.mean_q, s.mean_p, s.var_q, s.var_p, s.cov_qp]
        }),
    )
}

pub fn read_trajectory<R: Read>(r: R) -> Result<Vec<TrajectoryRow>, IoError> {
    read_rows(r, &TRAJECTORY_HEADER)?
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let state = CumulantState::new(v[1], v[2], v[3], v[4], v[5]).map_err(|e| IoError::Row {
                row: i + 1,
                message: e.to_string(),
            })?;
            Ok(TrajectoryRow { t: v[0], state })
        })
        .collect()
}

pub fn write_tomogram<W: Write>(w: W, points: &[TomogramPoint]) -> Result<(), IoError> {
    write_rows(
        w,
        &TOMOGRAM_HEADER,
        points.iter().map(|p| vec![p.x, p.line.mu, p.line.nu, p.value, p.noise_sigma]),
    )
}

/// Reads tomogram points. Densities are not sign-checked here so callers can
/// name the offending row in their own error.
pub fn read_tomogram<R: Read>(r: R) -> Result<Vec<TomogramPoint>, IoError> {
    read_rows(r, &TOMOGRAM_HEADER)?
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let row = i + 1;
            let line = TomographyLine::new(v[1], v[2]).map_err(|e| IoError::Row {
                row,
                message: e.to_string(),
            })?;
            if v[4] < 0.0 {
                return Err(IoError::Row {
                    row,
                    message: format!("noise_sigma = {} is negative", v[4]),
                });
            }
            Ok(TomogramPoint {
                x: v[0],
                line,
                value: v[3],
                noise_sigma: v[4],
            })
        })
        .collect()
}

/// Grid metadata stored next to a Wigner CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerSidecar {
    pub grid: GridSpec,
    /// Always `"q_outer_p_inner"`.
    pub order: WignerOrder,
    /// State the grid was evaluated for, rescaled units.
    pub state: CumulantState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WignerOrder {
    QOuterPInner,
}

pub fn write_wigner<W: Write>(w: W, values: &[(f64, f64, f64)]) -> Result<(), IoError> {
    write_rows(w, &WIGNER_HEADER, values.iter().map(|&(q, p, v)| vec![q, p, v]))
}

pub fn read_wigner<R: Read>(r: R, grid: &GridSpec) -> Result<Vec<(f64, f64, f64)>, IoError> {
    let rows = read_rows(r, &WIGNER_HEADER)?;
    let expected = grid.q_count * grid.p_count;
    if rows.len() != expected {
        return Err(IoError::Row {
            row: rows.len(),
            message: format!("grid needs {expected} rows"),
        });
    }
    Ok(rows.into_iter().map(|v| (v[0], v[1], v[2])).collect())
}

pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<(), IoError> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(csv::Error::from)?;
    Ok(())
}
