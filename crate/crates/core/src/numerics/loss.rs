use super::{Matrix, Real};
use crate::{Error, Result};

/// Mean squared error over every entry, with its gradient w.r.t. `pred`.
pub fn mse_loss<T: Real>(pred: &Matrix<T>, target: &Matrix<T>) -> Result<(f64, Matrix<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::Dimension(format!(
            "mse: prediction {}x{} vs target {}x{}",
            pred.rows(),
            pred.cols(),
            target.rows(),
            target.cols()
        )));
    }
    let count = pred.len().max(1) as f64;
    let mut loss = 0.0;
    let scale = T::from_f64(2.0 / count);
    let grad = pred.zip_with(target, "mse", |p, t| {
        let d = p - t;
        loss += (d * d).to_f64();
        scale * d
    })?;
    Ok((loss / count, grad))
}

/// Mean absolute error over every entry.
pub fn mae<T: Real>(pred: &Matrix<T>, target: &Matrix<T>) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::Dimension(format!(
            "mae: prediction {}x{} vs target {}x{}",
            pred.rows(),
            pred.cols(),
            target.rows(),
            target.cols()
        )));
    }
    let total: f64 = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| (p.to_f64() - t.to_f64()).abs())
        .sum();
    Ok(total / pred.len().max(1) as f64)
}
