use crate::numerics::{avg_pool_rows, avg_pool_rows_backward, Matrix, Real};
use crate::Result;

/// Latent vectors of every variable and their smooth/residual split.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState<T = f32> {
    pub latent: Matrix<T>,
    pub smooth: Matrix<T>,
    pub residual: Matrix<T>,
}

/// `smooth = AvgPool(latent)` row by row, `residual = latent - smooth`.
pub fn feature_decompose<T: Real>(latent: &Matrix<T>, kernel: usize) -> Result<LatentState<T>> {
    let smooth = avg_pool_rows(latent, kernel)?;
    let residual = latent.sub(&smooth)?;
    Ok(LatentState {
        latent: latent.clone(),
        smooth,
        residual,
    })
}

/// Gradient w.r.t. the latent given gradients of both parts.
pub fn feature_decompose_backward<T: Real>(
    grad_smooth: &Matrix<T>,
    grad_residual: &Matrix<T>,
    kernel: usize,
) -> Result<Matrix<T>> {
    // d/dX: residual passes straight through, smooth and -residual go through pool^T
    let through_pool = avg_pool_rows_backward(&grad_smooth.sub(grad_residual)?, kernel)?;
    grad_residual.add(&through_pool)
}
