use std::ops::Range;

use super::SplitPolicy;
use crate::{Error, Result};

const ETTH_MONTH: usize = 30 * 24;
const ETTM_MONTH: usize = 30 * 24 * 4;

/// Row ranges whose values each split is scored on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitRanges {
    /// Rows a split may read: validation and test histories reach back up
    /// to `lookback` rows into the preceding split.
    pub fn with_history(&self, scope: &Range<usize>, lookback: usize) -> Range<usize> {
        if scope.start == self.train.start {
            scope.clone()
        } else {
            scope.start.saturating_sub(lookback)..scope.end
        }
    }
}

/// Cut `rows` rows according to `policy` and check each split can hold at
/// least one `(lookback, horizon)` window.
pub fn split(rows: usize, policy: SplitPolicy, lookback: usize, horizon: usize) -> Result<SplitRanges> {
    let ranges = match policy {
        SplitPolicy::Etth | SplitPolicy::Ettm => {
            let month = if policy == SplitPolicy::Etth { ETTH_MONTH } else { ETTM_MONTH };
            let (a, b, c) = (12 * month, 16 * month, 20 * month);
            if rows < c {
                return Err(Error::Data(format!(
                    "{policy} split needs at least {c} rows, series has {rows}"
                )));
            }
            SplitRanges {
                train: 0..a,
                val: a..b,
                test: b..c,
            }
        }
        SplitPolicy::Ratio { train, val } => {
            policy.validate()?;
            let n_train = fraction(rows, train);
            let n_val = fraction(rows, val);
            SplitRanges {
                train: 0..n_train,
                val: n_train..n_train + n_val,
                test: (n_train + n_val).min(rows)..rows,
            }
        }
    };
    let window = lookback + horizon;
    let train_ok = ranges.train.len() >= window;
    // val/test may borrow history, so they only need `horizon` own rows
    let val_ok = ranges.with_history(&ranges.val, lookback).len() >= window && ranges.val.len() >= horizon;
    let test_ok = ranges.with_history(&ranges.test, lookback).len() >= window && ranges.test.len() >= horizon;
    if !(train_ok && val_ok && test_ok) {
        let min = match policy {
            SplitPolicy::Ratio { train, val } => {
                let smallest = train.min(val).min(1.0 - train - val).max(1e-9);
                ((window as f64 / smallest).ceil() as usize).max(window)
            }
            _ => window,
        };
        return Err(Error::Data(format!(
            "series of {rows} rows is too short for lookback {lookback} + horizon {horizon} in every split \
             (train {:?}, val {:?}, test {:?}); need roughly {min} rows",
            ranges.train, ranges.val, ranges.test
        )));
    }
    Ok(ranges)
}

fn fraction(rows: usize, frac: f64) -> usize {
    // guard against 0.7 * 100 = 69.999...
    ((rows as f64 * frac) + 1e-9).floor() as usize
}
