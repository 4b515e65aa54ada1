use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::scalar::Scalar;

/// Per-column standardization to zero mean and unit variance. Constant
/// columns are only centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Standardizer<T> {
    mean: Vec<T>,
    scale: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(x: &FeatureMatrix<T>) -> Self {
        let d = x.n_cols();
        let n = T::of(x.n_rows().max(1) as f64);
        let mut mean = vec![T::zero(); d];
        for row in x.rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m = *m + v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut var = vec![T::zero(); d];
        for row in x.rows() {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                *s = *s + (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > T::zero() {
                    sd
                } else {
                    T::one()
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform_row(&self, row: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(
            row.iter()
                .zip(&self.mean)
                .zip(&self.scale)
                .map(|((&v, &m), &s)| (v - m) / s),
        );
    }

    pub fn transform(&self, x: &FeatureMatrix<T>) -> Vec<Vec<T>> {
        x.rows()
            .map(|r| {
                let mut out = Vec::with_capacity(r.len());
                self.transform_row(r, &mut out);
                out
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizes_columns() {
        let x = FeatureMatrix::from_plain(vec![vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&x);
        let t = s.transform(&x);
        assert_eq!(t, vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
    }
}
