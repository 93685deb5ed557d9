//! Per-window, per-variable standardization applied around the network.

use crate::numerics::{Matrix, Real};
use crate::{Error, Result};

/// Added to the window standard deviation before dividing.
pub const INSTANCE_NORM_EPS: f64 = 1e-5;

/// Location and scale of each normalized series.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats<T = f32> {
    pub mean: Vec<T>,
    /// `std + INSTANCE_NORM_EPS`.
    pub scale: Vec<T>,
}

/// Normalize each row (one series) of `x` to zero mean and unit std.
pub fn normalize_rows<T: Real>(x: &Matrix<T>) -> (Matrix<T>, NormStats<T>) {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    let mut mean = Vec::with_capacity(x.rows());
    let mut scale = Vec::with_capacity(x.rows());
    let n = x.cols().max(1) as f64;
    for r in 0..x.rows() {
        let row = x.row(r);
        let mu = row.iter().map(|v| v.to_f64()).sum::<f64>() / n;
        let var = row.iter().map(|v| (v.to_f64() - mu).powi(2)).sum::<f64>() / n;
        let s = var.sqrt() + INSTANCE_NORM_EPS;
        for (o, v) in out.row_mut(r).iter_mut().zip(row) {
            *o = T::from_f64((v.to_f64() - mu) / s);
        }
        mean.push(T::from_f64(mu));
        scale.push(T::from_f64(s));
    }
    (out, NormStats { mean, scale })
}

/// Undo [`normalize_rows`] on per-row predictions.
pub fn denormalize_rows<T: Real>(pred: &mut Matrix<T>, stats: &NormStats<T>) -> Result<()> {
    if stats.mean.len() != pred.rows() {
        return Err(Error::Dimension(format!(
            "normalization stats cover {} series, prediction has {} rows",
            stats.mean.len(),
            pred.rows()
        )));
    }
    for r in 0..pred.rows() {
        let (mu, s) = (stats.mean[r], stats.scale[r]);
        for v in pred.row_mut(r) {
            *v = *v * s + mu;
        }
    }
    Ok(())
}

/// Normalize a `L x M` window column by column.
pub fn instance_normalize<T: Real>(x: &Matrix<T>) -> Result<(Matrix<T>, NormStats<T>)> {
    if x.rows() < 2 {
        return Err(Error::Dimension(format!(
            "instance normalization needs at least 2 time steps, got {}",
            x.rows()
        )));
    }
    let (normed, stats) = normalize_rows(&x.transpose());
    Ok((normed.transpose(), stats))
}

/// Map a normalized `T x M` forecast back to the window's scale.
pub fn instance_denormalize<T: Real>(pred: &Matrix<T>, stats: &NormStats<T>) -> Result<Matrix<T>> {
    let mut rows = pred.transpose();
    denormalize_rows(&mut rows, stats)?;
    Ok(rows.transpose())
}
