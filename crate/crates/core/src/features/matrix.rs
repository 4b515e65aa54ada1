use std::borrow::Borrow;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureSpec};
use crate::flow::Flow;
use crate::labels::FlowLabels;
use crate::scalar::Scalar;

pub const LABEL_COLUMNS: [&str; 5] = ["label_class", "label_tunnel", "label_app", "label_mtu", "label_dataset"];

/// Dense row-major matrix of finite reals with named columns and per-row
/// ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeatureMatrix<T> {
    column_names: Vec<String>,
    data: Vec<T>,
    n_rows: usize,
    row_labels: Vec<FlowLabels>,
}

impl<T: Scalar> FeatureMatrix<T> {
    /// Builds a matrix, rejecting ragged rows and non-finite values.
    pub fn from_rows(
        column_names: Vec<String>,
        rows: Vec<Vec<T>>,
        row_labels: Vec<FlowLabels>,
    ) -> Result<Self, FeatureError> {
        let width = column_names.len();
        let mut data = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(FeatureError::RowWidth {
                    row: i,
                    got: row.len(),
                    expected: width,
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(FeatureError::NonFinite {
                    row: i,
                    column: column_names[j].clone(),
                });
            }
            data.extend_from_slice(row);
        }
        let mut labels = row_labels;
        labels.resize(rows.len(), FlowLabels::default());
        Ok(FeatureMatrix {
            column_names,
            data,
            n_rows: rows.len(),
            row_labels: labels,
        })
    }

    /// Unnamed, unlabeled matrix; columns are named `x0, x1, ...`.
    pub fn from_plain(rows: Vec<Vec<T>>) -> Result<Self, FeatureError> {
        let width = rows.first().map_or(0, Vec::len);
        let names = (0..width).map(|j| format!("x{j}")).collect();
        Self::from_rows(names, rows, Vec::new())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row_labels(&self) -> &[FlowLabels] {
        &self.row_labels
    }

    pub fn row(&self, i: usize) -> &[T] {
        let w = self.n_cols();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n_cols() + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    /// New matrix holding the given rows in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            column_names: self.column_names.clone(),
            data,
            n_rows: idx.len(),
            row_labels: idx.iter().map(|&i| self.row_labels[i].clone()).collect(),
        }
    }

    /// Writes the matrix as CSV with the five label columns appended.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(out);
        let header = self
            .column_names
            .iter()
            .map(String::as_str)
            .chain(LABEL_COLUMNS.iter().copied());
        w.write_record(header)?;
        for (i, labels) in self.row_labels.iter().enumerate() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| render_real(v.as_f64())).collect();
            rec.push(labels.traffic_class.map(|c| c.to_string()).unwrap_or_default());
            rec.push(labels.tunnel_kind.map(|c| c.to_string()).unwrap_or_default());
            rec.push(labels.app_kind.map(|c| c.to_string()).unwrap_or_default());
            rec.push(labels.mtu.map(|c| c.to_string()).unwrap_or_default());
            rec.push(labels.dataset_tag.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a CSV written by [`FeatureMatrix::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self, FeatureError> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let n_features = header
            .len()
            .checked_sub(LABEL_COLUMNS.len())
            .filter(|&n| header[n..] == LABEL_COLUMNS)
            .ok_or_else(|| FeatureError::CsvFormat {
                line: 1,
                reason: "header does not end with the label columns".into(),
            })?;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad = |reason: String| FeatureError::CsvFormat { line, reason };
            let row = rec
                .iter()
                .take(n_features)
                .map(|s| s.parse::<f64>().map(T::of).map_err(|e| bad(format!("`{s}`: {e}"))))
                .collect::<Result<Vec<T>, _>>()?;
            let field = |j: usize| rec.get(n_features + j).filter(|s| !s.is_empty());
            let parse_err = |e: crate::labels::LabelParseError| bad(e.to_string());
            labels.push(FlowLabels {
                traffic_class: field(0).map(str::parse).transpose().map_err(parse_err)?,
                tunnel_kind: field(1).map(str::parse).transpose().map_err(parse_err)?,
                app_kind: field(2).map(str::parse).transpose().map_err(parse_err)?,
                mtu: field(3)
                    .map(str::parse::<u16>)
                    .transpose()
                    .map_err(|e| bad(e.to_string()))?,
                dataset_tag: field(4).map(str::to_string),
            });
            rows.push(row);
        }
        Self::from_rows(header[..n_features].to_vec(), rows, labels)
    }
}

/// Renders a real with 9 significant digits, shortest form.
pub fn render_real(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().unwrap_or(v);
    if rounded == 0.0 {
        "0".to_string()
    } else {
        format!("{rounded}")
    }
}

/// Materializes `spec` over `flows`, one row per flow in input order.
/// Accepts owned flows or references.
pub fn build_matrix<T: Scalar, F: Borrow<Flow> + Sync>(
    flows: &[F],
    spec: &FeatureSpec,
) -> Result<FeatureMatrix<T>, FeatureError> {
    spec.validate()?;
    let names = spec.column_names();
    let rows: Vec<Vec<T>> = flows.par_iter().map(|f| spec.row(f.borrow())).collect();
    let labels = flows.iter().map(|f| f.borrow().labels.clone()).collect();
    FeatureMatrix::from_rows(names, rows, labels)
}
