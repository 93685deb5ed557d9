//! Adam, the early-stopping training loop and evaluation.

mod optim;
mod report;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use optim::{adam_step, AdamConfig, AdamState};
pub use report::{append_summary, fingerprint, EpochRecord, RunReport, SUMMARY_HEADER};

use crate::data::{cut, PreparedData, WindowSet};
use crate::model::{Batch, PatchMlp};
use crate::numerics::{Matrix, Parameterized, Real, Rng};
use crate::{Error, Result};

/// Seed stream for parameter initialization.
pub const INIT_STREAM: u64 = 0;
/// Seed stream for mini-batch shuffling.
pub const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Stop after this many optimizer steps, if set.
    pub max_steps: Option<usize>,
    /// Window stride for the train split.
    pub train_stride: usize,
    /// Window stride for val and test.
    pub eval_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 32,
            max_epochs: 30,
            patience: 5,
            seed: 2024,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_steps: None,
            train_stride: 1,
            eval_stride: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be > 0");
        }
        if self.patience == 0 {
            return bad("patience must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1");
        }
        if self.train_stride == 0 || self.eval_stride == 0 {
            return bad("strides must be >= 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return bad("adam betas must lie in [0, 1) and eps must be > 0");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// What to do after an epoch's validation score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

/// Stops once `patience` consecutive epochs fail to beat the best val score.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            since_best: 0,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn observe(&mut self, score: f64) -> Verdict {
        if score < self.best {
            self.best = score;
            self.since_best = 0;
            Verdict::Improved
        } else {
            self.since_best += 1;
            if self.since_best >= self.patience {
                Verdict::Stop
            } else {
                Verdict::Continue
            }
        }
    }
}

/// Mean squared and mean absolute error over a window set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
}

/// Running sums behind [`Metrics`], accumulated serially in double precision.
#[derive(Debug, Clone, Copy, Default)]
pub struct MetricSums {
    squared: f64,
    absolute: f64,
    count: usize,
}

impl MetricSums {
    pub fn add<T: Real>(&mut self, pred: &Matrix<T>, target: &Matrix<T>) -> Result<()> {
        if pred.shape() != target.shape() {
            return Err(Error::Dimension(format!(
                "predictions are {}x{}, targets {}x{}",
                pred.rows(),
                pred.cols(),
                target.rows(),
                target.cols()
            )));
        }
        for (p, t) in pred.as_slice().iter().zip(target.as_slice()) {
            let d = p.to_f64() - t.to_f64();
            self.squared += d * d;
            self.absolute += d.abs();
        }
        self.count += pred.len();
        Ok(())
    }

    pub fn finish(&self) -> Result<Metrics> {
        if self.count == 0 {
            return Err(Error::Data("no entries to score".into()));
        }
        Ok(Metrics {
            mse: self.squared / self.count as f64,
            mae: self.absolute / self.count as f64,
        })
    }
}

/// Build a stacked batch for the windows starting at `origins`.
pub fn make_batch<T: Real>(data: &PreparedData, origins: &[usize]) -> Result<Batch<T>> {
    let (h, f): (Vec<Matrix<T>>, Vec<Matrix<T>>) = origins
        .iter()
        .map(|&o| {
            let w = cut::<T>(&data.series, o, data.lookback, data.horizon);
            (w.history, w.future)
        })
        .unzip();
    Batch::from_windows(&h, Some(&f))
}

/// MSE and MAE of `model` over every (window, step, variable) entry.
///
/// Sums are accumulated serially in double precision, batch by batch.
pub fn evaluate<T: Real>(
    model: &mut PatchMlp<T>,
    data: &PreparedData,
    windows: &WindowSet,
    batch_size: usize,
) -> Result<Metrics> {
    if windows.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty window set".into()));
    }
    let mut sums = MetricSums::default();
    for chunk in windows.origins.chunks(batch_size.max(1)) {
        let batch = make_batch::<T>(data, chunk)?;
        let pred = model.forward_batch(&batch, false)?;
        sums.add(&pred, batch.targets.as_ref().expect("evaluation batch has targets"))?;
    }
    sums.finish()
}

/// Train with Adam and early stopping on val MSE.
///
/// On return `model` holds the best-val parameters and the report carries
/// its test metrics. `effective_config` and `notes` are left for the caller.
pub fn train<T: Real>(model: &mut PatchMlp<T>, data: &PreparedData, config: &TrainConfig) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let train_set = data.train_windows(config.train_stride);
    let val_set = data.val_windows(config.eval_stride);
    let test_set = data.test_windows(config.eval_stride);
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Data(format!(
            "need at least one train and one val window, got {} and {}",
            train_set.len(),
            val_set.len()
        )));
    }

    model.set_dropout_seed(config.seed);
    model.zero_grads();
    let mut shuffle_rng = Rng::stream(config.seed, SHUFFLE_STREAM);
    let mut state = AdamState::new();
    let adam = config.adam();
    let mut order = train_set.origins.clone();
    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, Vec<Matrix<T>>)> = None;
    let mut stopper = EarlyStopping::new(config.patience);
    let mut steps = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            if config.max_steps.is_some_and(|cap| steps >= cap) {
                break;
            }
            let ctx = |e: Error| e.context(format_args!("epoch {epoch}, batch {b}"));
            let batch = make_batch::<T>(data, chunk).map_err(ctx)?;
            loss_sum += model.train_step_loss(&batch).map_err(ctx)?;
            adam_step(model, &mut state, &adam).map_err(ctx)?;
            batches += 1;
            steps += 1;
        }
        let val = evaluate(model, data, &val_set, config.batch_size)
            .map_err(|e| e.context(format_args!("epoch {epoch}, validation")))?;
        epochs.push(EpochRecord {
            epoch,
            train_loss: if batches > 0 { loss_sum / batches as f64 } else { f64::NAN },
            val_mse: val.mse,
        });
        match stopper.observe(val.mse) {
            Verdict::Improved => best = Some((val.mse, epoch, model.snapshot())),
            Verdict::Continue => {}
            Verdict::Stop => {
                stopped_early = true;
                break;
            }
        }
        if config.max_steps.is_some_and(|cap| steps >= cap) {
            break;
        }
    }

    let (best_val_mse, best_epoch, params) = best.expect("at least one epoch ran");
    model.restore(&params);
    let train_metrics = evaluate(model, data, &train_set, config.batch_size)?;
    let test = if test_set.is_empty() {
        Metrics { mse: f64::NAN, mae: f64::NAN }
    } else {
        evaluate(model, data, &test_set, config.batch_size)?
    };

    let mut notes = Vec::new();
    if config.train_stride != 1 || config.eval_stride != 1 {
        notes.push(format!(
            "windows subsampled: train stride {}, eval stride {}",
            config.train_stride, config.eval_stride
        ));
    }
    Ok(RunReport {
        dataset: data.name.clone(),
        lookback: data.lookback,
        horizon: data.horizon,
        seed: config.seed,
        fingerprint: fingerprint(model.config(), config),
        test_mse: test.mse,
        test_mae: test.mae,
        train_mse: train_metrics.mse,
        best_epoch,
        best_val_mse,
        steps,
        stopped_early,
        epochs,
        train_windows: train_set.len(),
        val_windows: val_set.len(),
        test_windows: test_set.len(),
        param_count: model.param_count(),
        seconds: start.elapsed().as_secs_f64(),
        model: model.config().clone(),
        train: config.clone(),
        scale_dims: model.config().dims(),
        effective_config: Default::default(),
        notes,
    })
}
