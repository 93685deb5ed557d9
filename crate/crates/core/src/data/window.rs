use std::ops::Range;

use crate::numerics::{Matrix, Real};

/// One `(history, future)` training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample<T = f64> {
    /// `L x M`.
    pub history: Matrix<T>,
    /// `T x M`, starting right after `history`.
    pub future: Matrix<T>,
    /// Row of the series where `history` starts.
    pub origin_index: usize,
}

/// Number of windows in `len` rows.
pub fn window_count(len: usize, lookback: usize, horizon: usize, stride: usize) -> usize {
    if len < lookback + horizon || stride == 0 {
        0
    } else {
        (len - lookback - horizon) / stride + 1
    }
}

/// Every window start inside `range`, stepping by `stride`.
pub fn window_origins(range: Range<usize>, lookback: usize, horizon: usize, stride: usize) -> Vec<usize> {
    let n = window_count(range.len(), lookback, horizon, stride);
    (0..n).map(|i| range.start + i * stride).collect()
}

/// Lazily cut windows from `series` rows in `range`.
pub fn windows<'a>(
    series: &'a Matrix<f64>,
    range: Range<usize>,
    lookback: usize,
    horizon: usize,
    stride: usize,
) -> impl Iterator<Item = WindowSample> + 'a {
    window_origins(range, lookback, horizon, stride)
        .into_iter()
        .map(move |origin| cut(series, origin, lookback, horizon))
}

/// Copy the window starting at `origin` out of `series`.
pub fn cut<T: Real>(series: &Matrix<f64>, origin: usize, lookback: usize, horizon: usize) -> WindowSample<T> {
    let m = series.cols();
    let take = |start: usize, len: usize| Matrix::from_fn(len, m, |t, c| T::from_f64(series.get(start + t, c)));
    WindowSample {
        history: take(origin, lookback),
        future: take(origin + lookback, horizon),
        origin_index: origin,
    }
}
