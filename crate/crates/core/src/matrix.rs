//! Dense row-major feature matrix aligned to case identifiers.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("matrix has {values} values, expected {rows} rows x {cols} columns")]
    Shape { rows: usize, cols: usize, values: usize },
    #[error("non-finite value at row {row}, column `{column}`")]
    NonFinite { row: usize, column: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    case_ids: Vec<String>,
    column_names: Vec<String>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(
        case_ids: Vec<String>,
        column_names: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self, MatrixError> {
        let (rows, cols) = (case_ids.len(), column_names.len());
        if rows * cols != values.len() {
            return Err(MatrixError::Shape {
                rows,
                cols,
                values: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite {
                row: pos / cols,
                column: column_names[pos % cols].clone(),
            });
        }
        Ok(Self {
            case_ids,
            column_names,
            values,
        })
    }

    pub fn from_rows(
        case_ids: Vec<String>,
        column_names: Vec<String>,
        rows: &[Vec<f64>],
    ) -> Result<Self, MatrixError> {
        let values = rows.iter().flatten().copied().collect();
        Self::new(case_ids, column_names, values)
    }

    pub fn n_rows(&self) -> usize {
        self.case_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn case_ids(&self) -> &[String] {
        &self.case_ids
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.get(r, col)).collect()
    }

    /// Copies the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let p = self.n_cols();
        let mut values = Vec::with_capacity(rows.len() * p);
        let mut case_ids = Vec::with_capacity(rows.len());
        for &r in rows {
            values.extend_from_slice(self.row(r));
            case_ids.push(self.case_ids[r].clone());
        }
        FeatureMatrix {
            case_ids,
            column_names: self.column_names.clone(),
            values,
        }
    }

    /// Writes `case_id` followed by every encoded column.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["case_id".to_string()];
        header.extend(self.column_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.case_ids[i].clone()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FeatureMatrix {
        FeatureMatrix::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["x".into(), "y".into()],
            &[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
        )
        .unwrap()
    }

    #[test]
    fn shape_is_checked() {
        let err = FeatureMatrix::new(vec!["a".into()], vec!["x".into(), "y".into()], vec![1.0]);
        assert!(matches!(err, Err(MatrixError::Shape { .. })));
    }

    #[test]
    fn nan_is_rejected() {
        let err = FeatureMatrix::new(vec!["a".into()], vec!["x".into()], vec![f64::NAN]);
        assert_eq!(
            err,
            Err(MatrixError::NonFinite {
                row: 0,
                column: "x".into()
            })
        );
    }

    #[test]
    fn select_rows_keeps_alignment() {
        let m = small().select_rows(&[2, 0]);
        assert_eq!(m.case_ids(), &["c".to_string(), "a".to_string()]);
        assert_eq!(m.row(0), &[5.0, 6.0]);
        assert_eq!(m.column(1), vec![6.0, 2.0]);
    }

    #[test]
    fn csv_dump_has_header() {
        let mut buf = Vec::new();
        small().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("case_id,x,y\na,1,2\n"));
    }
}
