//! Same-length moving average with replicate (edge-value) padding.

use super::{Matrix, Real};
use crate::{Error, Result};

/// Validate an averaging kernel for vectors of length `len`.
pub fn check_pool_kernel(kernel: usize, len: usize) -> Result<()> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "pooling kernel must be a positive odd number, got {kernel}"
        )));
    }
    if len > 0 && kernel > 2 * len - 1 {
        return Err(Error::Config(format!(
            "pooling kernel {kernel} too wide for length {len} (max {})",
            2 * len - 1
        )));
    }
    Ok(())
}

/// `out[i]` is the mean of `x` over `[i - h, i + h]`, `h = (kernel - 1) / 2`,
/// where out-of-range positions take the nearest edge value.
pub fn avgpool1d_same<T: Real>(x: &[T], kernel: usize) -> Result<Vec<T>> {
    check_pool_kernel(kernel, x.len())?;
    let mut out = vec![T::ZERO; x.len()];
    pool_into(x, kernel, &mut out);
    Ok(out)
}

fn pool_into<T: Real>(x: &[T], kernel: usize, out: &mut [T]) {
    let n = x.len() as isize;
    if n == 0 {
        return;
    }
    let half = (kernel / 2) as isize;
    let inv = T::ONE / T::from_f64(kernel as f64);
    for (i, o) in out.iter_mut().enumerate() {
        let i = i as isize;
        let mut acc = T::ZERO;
        for j in i - half..=i + half {
            acc += x[j.clamp(0, n - 1) as usize];
        }
        *o = acc * inv;
    }
}

/// Pool every row of `x` independently.
pub fn avg_pool_rows<T: Real>(x: &Matrix<T>, kernel: usize) -> Result<Matrix<T>> {
    check_pool_kernel(kernel, x.cols())?;
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        pool_into(x.row(r), kernel, out.row_mut(r));
    }
    Ok(out)
}

/// Adjoint of [`avg_pool_rows`]: routes each output gradient back to the
/// (clamped) inputs it averaged.
pub fn avg_pool_rows_backward<T: Real>(grad: &Matrix<T>, kernel: usize) -> Result<Matrix<T>> {
    check_pool_kernel(kernel, grad.cols())?;
    let n = grad.cols() as isize;
    let half = (kernel / 2) as isize;
    let inv = T::ONE / T::from_f64(kernel as f64);
    let mut out = Matrix::zeros(grad.rows(), grad.cols());
    for r in 0..grad.rows() {
        let g = grad.row(r);
        let o = out.row_mut(r);
        for i in 0..n {
            let gi = g[i as usize] * inv;
            for j in i - half..=i + half {
                o[j.clamp(0, n - 1) as usize] += gi;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Windowed mean written straight from the definition, with an explicit
    /// padded copy of the input.
    fn oracle(x: &[f64], k: usize) -> Vec<f64> {
        let h = k / 2;
        let mut padded = vec![x[0]; h];
        padded.extend_from_slice(x);
        padded.extend(std::iter::repeat_n(*x.last().unwrap(), h));
        (0..x.len())
            .map(|i| padded[i..i + k].iter().sum::<f64>() / k as f64)
            .collect()
    }

    #[test]
    fn worked_example() {
        let out = avgpool1d_same(&[1.0f64, 2.0, 3.0, 4.0], 3).unwrap();
        let want = [4.0 / 3.0, 2.0, 3.0, 11.0 / 3.0];
        for (o, w) in out.iter().zip(want) {
            assert!((o - w).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_one_is_identity() {
        let x = [0.3f64, -1.0, 7.5];
        assert_eq!(avgpool1d_same(&x, 1).unwrap(), x.to_vec());
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(matches!(avgpool1d_same(&[1.0f64; 8], 4), Err(Error::Config(_))));
        assert!(avgpool1d_same(&[1.0f64; 3], 7).is_err());
        assert!(avgpool1d_same(&[1.0f64; 3], 5).is_ok());
    }

    #[test]
    fn backward_is_adjoint() {
        // <pool(x), g> == <x, pool^T(g)>
        let x = Matrix::<f64>::from_fn(2, 9, |r, c| ((r * 9 + c) as f64).sin());
        let g = Matrix::<f64>::from_fn(2, 9, |r, c| ((r * 7 + c * 3) as f64).cos());
        let lhs: f64 = avg_pool_rows(&x, 5)
            .unwrap()
            .hadamard(&g)
            .unwrap()
            .sum();
        let rhs: f64 = x
            .hadamard(&avg_pool_rows_backward(&g, 5).unwrap())
            .unwrap()
            .sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn matches_definition(x in prop::collection::vec(-100.0f64..100.0, 1..40), hk in 0usize..6) {
            let k = 2 * hk + 1;
            prop_assume!(k < 2 * x.len());
            let got = avgpool1d_same(&x, k).unwrap();
            for (g, w) in got.iter().zip(oracle(&x, k)) {
                prop_assert!((g - w).abs() < 1e-9);
            }
        }

        #[test]
        fn constants_preserved(c in -1e3f64..1e3, len in 1usize..64, hk in 0usize..12) {
            let k = 2 * hk + 1;
            prop_assume!(k < 2 * len);
            let out = avgpool1d_same(&vec![c; len], k).unwrap();
            for v in out {
                prop_assert!((v - c).abs() < 1e-12);
            }
        }

        #[test]
        fn linear(
            x in prop::collection::vec(-10.0f64..10.0, 16),
            y in prop::collection::vec(-10.0f64..10.0, 16),
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
        ) {
            let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = avgpool1d_same(&combo, 5).unwrap();
            let px = avgpool1d_same(&x, 5).unwrap();
            let py = avgpool1d_same(&y, 5).unwrap();
            for i in 0..16 {
                prop_assert!((lhs[i] - (a * px[i] + b * py[i])).abs() < 1e-12);
            }
        }
    }
}
