use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::numerics::Matrix;
use crate::{Error, Result};

/// Lower bound on the per-variable standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-variable z-score statistics fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(series: &Matrix<f64>, rows: Range<usize>) -> Result<Self> {
        if rows.is_empty() || rows.end > series.rows() {
            return Err(Error::Data(format!(
                "cannot fit scaler on rows {rows:?} of a {}-row series",
                series.rows()
            )));
        }
        let n = rows.len() as f64;
        let m = series.cols();
        let mut mean = vec![0.0; m];
        for r in rows.clone() {
            for (acc, v) in mean.iter_mut().zip(series.row(r)) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= n);
        let mut var = vec![0.0; m];
        for r in rows {
            for ((acc, v), mu) in var.iter_mut().zip(series.row(r)).zip(&mean) {
                *acc += (v - mu).powi(2);
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    pub fn scale(&self, series: &Matrix<f64>) -> Matrix<f64> {
        Matrix::from_fn(series.rows(), series.cols(), |r, c| {
            (series.get(r, c) - self.mean[c]) / self.std[c]
        })
    }

    pub fn unscale(&self, series: &Matrix<f64>) -> Matrix<f64> {
        Matrix::from_fn(series.rows(), series.cols(), |r, c| {
            series.get(r, c) * self.std[c] + self.mean[c]
        })
    }
}

/// Z-score every variable with statistics from `train_rows` only.
pub fn standardize(series: &Matrix<f64>, train_rows: Range<usize>) -> Result<(Matrix<f64>, Scaler)> {
    let scaler = Scaler::fit(series, train_rows)?;
    Ok((scaler.scale(series), scaler))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn constant_column_becomes_zero() {
        let s = Matrix::from_fn(10, 2, |r, c| if c == 0 { 3.0 } else { r as f64 });
        let (z, scaler) = standardize(&s, 0..10).unwrap();
        assert!((0..10).all(|r| z.get(r, 0) == 0.0));
        assert_eq!(scaler.std[0], STD_FLOOR);
    }

    #[test]
    fn already_standard_is_identity() {
        let s = Matrix::from_rows(&[[1.0], [-1.0], [1.0], [-1.0]]).unwrap();
        let (z, _) = standardize(&s, 0..4).unwrap();
        assert!(z.max_abs_diff(&s).unwrap() < 1e-6);
    }

    #[test]
    fn stats_come_from_train_rows_only() {
        let s = Matrix::from_rows(&[[0.0], [2.0], [1000.0]]).unwrap();
        let (_, scaler) = standardize(&s, 0..2).unwrap();
        assert_eq!(scaler.mean, vec![1.0]);
        assert_eq!(scaler.std, vec![1.0]);
    }

    #[test]
    fn round_trip() {
        let mut rng = Rng::new(0);
        let s = Matrix::from_fn(50, 3, |_, c| 100.0 * c as f64 + 7.0 * rng.normal());
        let (z, scaler) = standardize(&s, 0..30).unwrap();
        assert!(scaler.unscale(&z).max_abs_diff(&s).unwrap() < 1e-5);
    }

    #[test]
    fn empty_train_range_rejected() {
        let s = Matrix::<f64>::zeros(5, 1);
        assert!(standardize(&s, 2..2).is_err());
    }
}
