//! The observed panel `x_{it}` and its CSV ingestion.
//!
//! Values are held as an `n × T` [`DMatrix`], which nalgebra stores
//! column-major, so each cross-section `x_t` is a contiguous slice.

use std::io;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum cross-sectional dimension accepted by [`load_csv`].
pub const MIN_SERIES: usize = 2;
/// Minimum number of time points accepted by [`load_csv`].
pub const MIN_LENGTH: usize = 8;

/// How the rows of a CSV file map onto the panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Each CSV row is one series; columns are time points.
    #[default]
    RowsAreSeries,
    /// Each CSV row is one time point; columns are series.
    RowsAreTime,
}

/// An `n × T` panel of real-valued time series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    values: DMatrix<f64>,
    centered: bool,
    labels: Option<Vec<String>>,
}

impl TimeSeriesPanel {
    /// Wraps a matrix of shape `n × T`. Non-finite entries are rejected.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Dimension("panel must be non-empty".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (i, t) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::Input(format!(
                "non-finite value at series {}, time {}",
                i + 1,
                t + 1
            )));
        }
        Ok(Self {
            values,
            centered: false,
            labels: None,
        })
    }

    /// Builds a panel from one `Vec` per series.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let len = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != len) {
            return Err(Error::Format("series have different lengths".into()));
        }
        Self::new(DMatrix::from_fn(n, len, |i, t| rows[i][t]))
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Dimension(format!(
                "{} labels supplied for {} series",
                labels.len(),
                self.n()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Cross-sectional dimension.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of time points.
    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// The cross-section `x_t` at zero-based time index `t`.
    pub fn column(&self, t: usize) -> &[f64] {
        let n = self.n();
        &self.values.as_slice()[t * n..(t + 1) * n]
    }

    /// Subtracts each series' sample mean.
    pub fn center(&self) -> Self {
        let mut values = self.values.clone();
        for mut row in values.row_iter_mut() {
            let mean = row.mean();
            row.add_scalar_mut(-mean);
        }
        Self {
            values,
            centered: true,
            labels: self.labels.clone(),
        }
    }

    /// Writes the panel as CSV with shortest round-trip float formatting.
    pub fn write_csv<W: io::Write>(&self, out: W, orientation: Orientation) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Format(e.to_string());
        let (outer, inner) = match orientation {
            Orientation::RowsAreSeries => (self.n(), self.len()),
            Orientation::RowsAreTime => (self.len(), self.n()),
        };
        if let (Orientation::RowsAreTime, Some(labels)) = (orientation, &self.labels) {
            w.write_record(labels).map_err(csv_err)?;
        }
        let mut fields = Vec::with_capacity(inner);
        for a in 0..outer {
            fields.clear();
            for b in 0..inner {
                let v = match orientation {
                    Orientation::RowsAreSeries => self.values[(a, b)],
                    Orientation::RowsAreTime => self.values[(b, a)],
                };
                fields.push(format!("{v:?}"));
            }
            w.write_record(&fields).map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<output>".into(),
            source,
        })
    }
}

/// Reads a rectangular numeric CSV file into a panel.
///
/// A first line containing any non-numeric field is treated as a header.
/// With [`Orientation::RowsAreTime`] the header supplies series labels.
pub fn load_csv(path: impl AsRef<Path>, orientation: Orientation) -> Result<TimeSeriesPanel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, orientation)
}

/// Parses CSV text; see [`load_csv`].
pub fn parse_csv(text: &str, orientation: Orientation) -> Result<TimeSeriesPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;

    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if idx == 0 && record.iter().any(|f| f.parse::<f64>().is_err()) {
            header = Some(record.iter().map(str::to_owned).collect());
            width = Some(record.len());
            continue;
        }
        match width {
            Some(w) if w != record.len() => {
                return Err(Error::Format(format!(
                    "ragged rows: line {line} has {} fields, expected {w}",
                    record.len()
                )))
            }
            _ => width = Some(record.len()),
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: line,
                col: col + 1,
                message: format!("'{field}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    col: col + 1,
                    message: format!("'{field}' is not a finite number"),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::Dimension("no numeric rows".into()));
    }
    let outer = rows.len();
    let inner = rows[0].len();
    let (n, len) = match orientation {
        Orientation::RowsAreSeries => (outer, inner),
        Orientation::RowsAreTime => (inner, outer),
    };
    if n < MIN_SERIES || len < MIN_LENGTH {
        return Err(Error::Dimension(format!(
            "panel is {n} × {len}; need at least {MIN_SERIES} series and {MIN_LENGTH} time points"
        )));
    }
    let values = match orientation {
        Orientation::RowsAreSeries => DMatrix::from_fn(n, len, |i, t| rows[i][t]),
        Orientation::RowsAreTime => DMatrix::from_fn(n, len, |i, t| rows[t][i]),
    };
    let panel = TimeSeriesPanel::new(values)?;
    match (orientation, header) {
        (Orientation::RowsAreTime, Some(labels)) => panel.with_labels(labels),
        _ => Ok(panel),
    }
}
