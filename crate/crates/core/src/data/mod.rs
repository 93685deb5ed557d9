//! Dataset ingestion, splitting, standardization and windowing.

mod csv;
mod scale;
mod split;
mod window;

use std::ops::Range;

pub use self::csv::{
    dataset_dir, load_csv, read_csv, DatasetSpec, Frequency, RawSeries, SplitPolicy, DATA_DIR_ENV,
};
pub use scale::{standardize, Scaler, STD_FLOOR};
pub use split::{split, SplitRanges};
pub use window::{cut, window_count, window_origins, windows, WindowSample};

use crate::numerics::Matrix;
use crate::Result;

/// Start rows of every window in one split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSet {
    pub origins: Vec<usize>,
    pub lookback: usize,
    pub horizon: usize,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }
}

/// A standardized series with its split layout, ready for training.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub name: String,
    /// Standardized values, `rows x M`.
    pub series: Matrix<f64>,
    pub columns: Vec<String>,
    pub scaler: Scaler,
    pub splits: SplitRanges,
    pub lookback: usize,
    pub horizon: usize,
}

impl PreparedData {
    /// Split, fit the scaler on the train rows and standardize.
    pub fn new(
        name: impl Into<String>,
        values: &Matrix<f64>,
        columns: Vec<String>,
        policy: SplitPolicy,
        lookback: usize,
        horizon: usize,
    ) -> Result<Self> {
        let splits = split(values.rows(), policy, lookback, horizon)?;
        let (series, scaler) = standardize(values, splits.train.clone())?;
        Ok(Self {
            name: name.into(),
            series,
            columns,
            scaler,
            splits,
            lookback,
            horizon,
        })
    }

    pub fn load(name: impl Into<String>, spec: &DatasetSpec, lookback: usize, horizon: usize) -> Result<Self> {
        let raw = load_csv(spec)?;
        Self::new(name, &raw.values, raw.columns, spec.split, lookback, horizon)
    }

    pub fn variables(&self) -> usize {
        self.series.cols()
    }

    fn window_set(&self, scope: &Range<usize>, stride: usize) -> WindowSet {
        let rows = self.splits.with_history(scope, self.lookback);
        WindowSet {
            origins: window_origins(rows, self.lookback, self.horizon, stride),
            lookback: self.lookback,
            horizon: self.horizon,
        }
    }

    pub fn train_windows(&self, stride: usize) -> WindowSet {
        self.window_set(&self.splits.train, stride)
    }

    pub fn val_windows(&self, stride: usize) -> WindowSet {
        self.window_set(&self.splits.val, stride)
    }

    pub fn test_windows(&self, stride: usize) -> WindowSet {
        self.window_set(&self.splits.test, stride)
    }
}
