//! CSV emission for trajectories and sweeps.
//!
//! Every real number is written as `{:.16e}`, i.e. 17 significant digits,
//! which is enough to round-trip any binary64 value. Undefined entries
//! (the tail of the omega column, for instance) are left empty.

use std::io::{self, Write};

use hivnsfd_core::{SweepCell, TrajectoryRecord};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("cannot write output: {0}")]
    Sink(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
}

pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row of a trajectory table: the step index and the remaining columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub n: usize,
    pub values: Vec<Option<f64>>,
}

/// A trajectory as written to CSV: `n,t,X,Y,V,Z[,omega][,lyapunov]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    /// Column names after `n`.
    pub columns: Vec<String>,
    pub rows: Vec<SeriesRow>,
}

impl SeriesTable {
    pub fn from_trajectory(traj: &TrajectoryRecord) -> Self {
        let mut columns: Vec<String> = ["t", "X", "Y", "V", "Z"].map(String::from).to_vec();
        let omega = traj.monitors.as_ref().map(|m| &m.omega);
        let lyapunov = traj.lyapunov.as_ref().map(|l| &l.values);
        if omega.is_some() {
            columns.push("omega".into());
        }
        if lyapunov.is_some() {
            columns.push("lyapunov".into());
        }
        let rows = traj
            .states()
            .iter()
            .enumerate()
            .map(|(n, s)| {
                let mut values = vec![
                    Some(traj.time(n)),
                    Some(s.x),
                    Some(s.y),
                    Some(s.v),
                    Some(s.z),
                ];
                if let Some(series) = omega {
                    values.push(series.get(n).copied());
                }
                if let Some(series) = lyapunov {
                    values.push(series.get(n).copied());
                }
                SeriesRow { n, values }
            })
            .collect();
        Self { columns, rows }
    }

    /// Writes the table and returns the number of bytes written.
    pub fn write_to<W: Write>(&self, dest: W) -> Result<usize, TableError> {
        let mut counted = Counting {
            inner: dest,
            bytes: 0,
        };
        {
            let mut writer = csv::Writer::from_writer(&mut counted);
            let mut header = vec!["n"];
            header.extend(self.columns.iter().map(String::as_str));
            writer.write_record(&header)?;
            let mut record = Vec::with_capacity(header.len());
            for row in &self.rows {
                record.clear();
                record.push(row.n.to_string());
                record.extend(
                    row.values
                        .iter()
                        .map(|v| v.map(format_number).unwrap_or_default()),
                );
                writer.write_record(&record)?;
            }
            writer.flush()?;
        }
        Ok(counted.bytes)
    }

    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.get(0) != Some("n") {
            return Err(TableError::Malformed {
                row: 0,
                message: "first column must be `n`".into(),
            });
        }
        let columns = header.iter().skip(1).map(String::from).collect();
        let mut rows = Vec::new();
        for (index, record) in reader.records().enumerate() {
            let record = record?;
            let row = index + 1;
            let bad = |message: String| TableError::Malformed { row, message };
            let n = record[0]
                .parse()
                .map_err(|_| bad(format!("bad step index `{}`", &record[0])))?;
            let values = record
                .iter()
                .skip(1)
                .map(|field| match field {
                    "" => Ok(None),
                    text => text
                        .parse::<f64>()
                        .map(Some)
                        .map_err(|_| bad(format!("bad number `{text}`"))),
                })
                .collect::<Result<_, _>>()?;
            rows.push(SeriesRow { n, values });
        }
        Ok(Self { columns, rows })
    }
}

/// Writes `traj` as CSV and returns the byte count.
pub fn emit_csv<W: Write>(traj: &TrajectoryRecord, dest: W) -> Result<usize, TableError> {
    SeriesTable::from_trajectory(traj).write_to(dest)
}

pub const SWEEP_HEADER: [&str; 10] = [
    "beta",
    "c",
    "tau",
    "r0",
    "r1",
    "predicted",
    "observed",
    "agree",
    "near_threshold",
    "sup_error",
];

/// One row per sweep cell, in grid order.
pub fn emit_sweep_csv<W: Write>(cells: &[SweepCell], dest: W) -> Result<usize, TableError> {
    let mut counted = Counting {
        inner: dest,
        bytes: 0,
    };
    {
        let mut writer = csv::Writer::from_writer(&mut counted);
        writer.write_record(SWEEP_HEADER)?;
        for cell in cells {
            writer.write_record([
                format_number(cell.beta),
                format_number(cell.c),
                format_number(cell.tau),
                format_number(cell.r0),
                format_number(cell.r1),
                cell.predicted.name().to_owned(),
                cell.observed.name().to_owned(),
                cell.agree.to_string(),
                cell.near_threshold.to_string(),
                format_number(cell.sup_error),
            ])?;
        }
        writer.flush()?;
    }
    Ok(counted.bytes)
}

struct Counting<W> {
    inner: W,
    bytes: usize,
}

impl<W: Write> Write for Counting<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let written = self.inner.write(buf)?;
        self.bytes += written;
        Ok(written)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}
