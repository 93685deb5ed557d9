//! The full PatchMLP forward/backward pass.
//!
//! Internally a batch of `B` windows is stacked "series-major": row
//! `b * M + m` holds variable `m` of sample `b`. Every per-variable layer
//! then runs as one matrix product over all rows, and the inter-variable
//! MLP flips each `M x d_model` block to reach across variables.

use super::{
    feature_decompose, feature_decompose_backward, normalize_rows, Decomposition, MlpBlock, ModelConfig,
    MultiScaleEmbedding, NormStats,
};
use crate::numerics::{avg_pool_rows, LinearLayer, Matrix, Param, Parameterized, Real, Rng};
use crate::{Error, Result};

/// Seed stream used for dropout masks, separate from init and shuffling.
pub const DROPOUT_STREAM: u64 = 2;

/// A batch of windows in the stacked layout, with optional targets.
#[derive(Debug, Clone)]
pub struct Batch<T = f32> {
    /// `(B*M) x L`.
    pub inputs: Matrix<T>,
    /// `(B*M) x T`.
    pub targets: Option<Matrix<T>>,
    pub size: usize,
    pub variables: usize,
}

impl<T: Real> Batch<T> {
    /// Stack `L x M` histories (and optional `T x M` futures).
    pub fn from_windows(histories: &[Matrix<T>], futures: Option<&[Matrix<T>]>) -> Result<Self> {
        let variables = histories.first().map_or(0, |h| h.cols());
        let inputs = stack_transposed(histories, variables)?;
        let targets = match futures {
            Some(f) => {
                if f.len() != histories.len() {
                    return Err(Error::Dimension(format!(
                        "{} histories but {} futures",
                        histories.len(),
                        f.len()
                    )));
                }
                Some(stack_transposed(f, variables)?)
            }
            None => None,
        };
        Ok(Self {
            inputs,
            targets,
            size: histories.len(),
            variables,
        })
    }

    /// Split stacked `(B*M) x T` predictions back into `T x M` matrices.
    pub fn unstack(&self, stacked: &Matrix<T>) -> Result<Vec<Matrix<T>>> {
        unstack_transposed(stacked, self.variables)
    }
}

fn stack_transposed<T: Real>(windows: &[Matrix<T>], variables: usize) -> Result<Matrix<T>> {
    let len = windows.first().map_or(0, |w| w.rows());
    let mut out = Matrix::zeros(windows.len() * variables, len);
    for (b, w) in windows.iter().enumerate() {
        if w.shape() != (len, variables) {
            return Err(Error::Dimension(format!(
                "window {b} is {}x{}, expected {len}x{variables}",
                w.rows(),
                w.cols()
            )));
        }
        for t in 0..len {
            for (m, &v) in w.row(t).iter().enumerate() {
                out.set(b * variables + m, t, v);
            }
        }
    }
    Ok(out)
}

fn unstack_transposed<T: Real>(stacked: &Matrix<T>, variables: usize) -> Result<Vec<Matrix<T>>> {
    if variables == 0 || !stacked.rows().is_multiple_of(variables) {
        return Err(Error::Dimension(format!(
            "{} stacked rows do not split into {variables} variables",
            stacked.rows()
        )));
    }
    let len = stacked.cols();
    Ok((0..stacked.rows() / variables)
        .map(|b| Matrix::from_fn(len, variables, |t, m| stacked.get(b * variables + m, t)))
        .collect())
}

/// Patch-based MLP forecaster.
#[derive(Debug, Clone)]
pub struct PatchMlp<T = f32> {
    config: ModelConfig,
    /// Embeds the window (or its trend, under input decomposition).
    embed: MultiScaleEmbedding<T>,
    /// Embeds the remainder under input decomposition.
    remainder_embed: Option<MultiScaleEmbedding<T>>,
    /// Channel-mixing stack: smooth part, or the whole latent without decomposition.
    smooth_blocks: Vec<MlpBlock<T>>,
    /// Channel-independent stack over the residual part.
    residual_blocks: Vec<MlpBlock<T>>,
    smooth_head: LinearLayer<T>,
    residual_head: Option<LinearLayer<T>>,
    dropout_rng: Rng,
    norm: Option<NormStats<T>>,
    gradient_fault: bool,
}

impl<T: Real> PatchMlp<T> {
    /// Build and initialize every layer from `rng` in a fixed order.
    pub fn init(config: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let width = config.latent_dim();
        let embed = MultiScaleEmbedding::init(config, rng);
        let remainder_embed =
            (config.decomposition == Decomposition::Input).then(|| MultiScaleEmbedding::init(config, rng));
        let split = config.decomposition != Decomposition::Off;
        let smooth_blocks = (0..config.num_blocks)
            .map(|_| MlpBlock::init(config, config.use_inter_variable, rng))
            .collect::<Result<Vec<_>>>()?;
        let residual_blocks = if split {
            (0..config.num_blocks)
                .map(|_| MlpBlock::init(config, false, rng))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let smooth_head = LinearLayer::init_uniform(width, config.horizon, rng);
        let residual_head = split.then(|| LinearLayer::init_uniform(width, config.horizon, rng));
        Ok(Self {
            config: config.clone(),
            embed,
            remainder_embed,
            smooth_blocks,
            residual_blocks,
            smooth_head,
            residual_head,
            dropout_rng: Rng::stream(0, DROPOUT_STREAM),
            norm: None,
            gradient_fault: false,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Reseed the generator that draws dropout masks.
    pub fn set_dropout_seed(&mut self, seed: u64) {
        self.dropout_rng = Rng::stream(seed, DROPOUT_STREAM);
    }

    /// Test hook: perturb one gradient after every backward pass so that
    /// gradient checking has a negative control.
    #[doc(hidden)]
    pub fn set_gradient_fault(&mut self, on: bool) {
        self.gradient_fault = on;
    }

    fn check_inputs(&self, batch: &Batch<T>) -> Result<()> {
        let c = &self.config;
        if batch.variables != c.variables || batch.inputs.cols() != c.lookback {
            return Err(Error::Dimension(format!(
                "batch has {} variables x {} steps, model expects {} x {}",
                batch.variables,
                batch.inputs.cols(),
                c.variables,
                c.lookback
            )));
        }
        if let Some(t) = &batch.targets {
            if t.cols() != c.horizon || t.rows() != batch.inputs.rows() {
                return Err(Error::Dimension(format!(
                    "targets are {}x{}, expected {}x{}",
                    t.rows(),
                    t.cols(),
                    batch.inputs.rows(),
                    c.horizon
                )));
            }
        }
        Ok(())
    }

    /// Stacked `(B*M) x T` predictions in the original scale.
    pub fn forward_batch(&mut self, batch: &Batch<T>, training: bool) -> Result<Matrix<T>> {
        self.check_inputs(batch)?;
        let series = if self.config.use_instance_norm {
            let (normed, stats) = normalize_rows(&batch.inputs);
            self.norm = Some(stats);
            normed
        } else {
            self.norm = None;
            batch.inputs.clone()
        };

        let rng = &mut self.dropout_rng;
        let (smooth_in, residual_in) = match self.config.decomposition {
            Decomposition::Latent => {
                let latent = self.embed.forward(&series)?;
                let parts = feature_decompose(&latent, self.config.pool_kernel)?;
                (parts.smooth, Some(parts.residual))
            }
            Decomposition::Input => {
                let trend = avg_pool_rows(&series, self.config.input_pool_kernel)?;
                let remainder = series.sub(&trend)?;
                let remainder_embed = self.remainder_embed.as_mut().expect("input decomposition embedding");
                (self.embed.forward(&trend)?, Some(remainder_embed.forward(&remainder)?))
            }
            Decomposition::Off => (self.embed.forward(&series)?, None),
        };

        let mut h = smooth_in;
        for block in &mut self.smooth_blocks {
            h = block.forward(&h, rng, training)?;
        }
        let mut pred = self.smooth_head.forward(&h)?;

        if let Some(mut r) = residual_in {
            for block in &mut self.residual_blocks {
                r = block.forward(&r, rng, training)?;
            }
            let head = self.residual_head.as_mut().expect("residual head");
            pred.add_assign(&head.forward(&r)?)?;
        }

        if let Some(stats) = &self.norm {
            super::denormalize_rows(&mut pred, stats)?;
        }
        if !pred.all_finite() {
            return Err(Error::Numeric("forward produced non-finite predictions".into()));
        }
        Ok(pred)
    }

    /// Backpropagate the gradient of the loss w.r.t. the stacked predictions.
    pub fn backward_batch(&mut self, grad: &Matrix<T>) -> Result<()> {
        let mut grad = grad.clone();
        if let Some(stats) = &self.norm {
            // pred = y * scale + mean with constant stats
            for r in 0..grad.rows() {
                let s = stats.scale[r];
                grad.row_mut(r).iter_mut().for_each(|g| *g *= s);
            }
        }

        let mut g_smooth = self.smooth_head.backward(&grad)?;
        for block in self.smooth_blocks.iter_mut().rev() {
            g_smooth = block.backward(&g_smooth)?;
        }
        let g_residual = match self.residual_head.as_mut() {
            Some(head) => {
                let mut g = head.backward(&grad)?;
                for block in self.residual_blocks.iter_mut().rev() {
                    g = block.backward(&g)?;
                }
                Some(g)
            }
            None => None,
        };

        match (self.config.decomposition, g_residual) {
            (Decomposition::Latent, Some(g_r)) => {
                let g_latent = feature_decompose_backward(&g_smooth, &g_r, self.config.pool_kernel)?;
                self.embed.backward(&g_latent)?;
            }
            (Decomposition::Input, Some(g_r)) => {
                self.embed.backward(&g_smooth)?;
                self.remainder_embed
                    .as_mut()
                    .expect("input decomposition embedding")
                    .backward(&g_r)?;
            }
            _ => self.embed.backward(&g_smooth)?,
        }

        if self.gradient_fault {
            self.smooth_head.weight.grad.scale(T::from_f64(1.25));
        }
        Ok(())
    }

    /// Forecast `T x M` futures for `L x M` histories.
    pub fn forward(&mut self, histories: &[Matrix<T>], training: bool) -> Result<Vec<Matrix<T>>> {
        let batch = Batch::from_windows(histories, None)?;
        let pred = self.forward_batch(&batch, training)?;
        batch.unstack(&pred)
    }

    /// Forward, MSE over every entry, backward. Returns the loss.
    pub fn train_step_loss(&mut self, batch: &Batch<T>) -> Result<f64> {
        let targets = batch
            .targets
            .as_ref()
            .ok_or_else(|| Error::State("training batch has no targets".into()))?;
        let pred = self.forward_batch(batch, true)?;
        let (loss, grad) = crate::numerics::mse_loss(&pred, targets)?;
        self.backward_batch(&grad)?;
        Ok(loss)
    }
}

impl<T: Real> Parameterized<T> for PatchMlp<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.embed.visit_params(&mut |n, p| f(&format!("embed.{n}"), p));
        if let Some(e) = &self.remainder_embed {
            e.visit_params(&mut |n, p| f(&format!("remainder_embed.{n}"), p));
        }
        for (i, b) in self.smooth_blocks.iter().enumerate() {
            b.visit_params(&mut |n, p| f(&format!("smooth.{i}.{n}"), p));
        }
        for (i, b) in self.residual_blocks.iter().enumerate() {
            b.visit_params(&mut |n, p| f(&format!("residual.{i}.{n}"), p));
        }
        self.smooth_head.visit_params(&mut |n, p| f(&format!("smooth_head.{n}"), p));
        if let Some(h) = &self.residual_head {
            h.visit_params(&mut |n, p| f(&format!("residual_head.{n}"), p));
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.embed.visit_params_mut(&mut |n, p| f(&format!("embed.{n}"), p));
        if let Some(e) = &mut self.remainder_embed {
            e.visit_params_mut(&mut |n, p| f(&format!("remainder_embed.{n}"), p));
        }
        for (i, b) in self.smooth_blocks.iter_mut().enumerate() {
            b.visit_params_mut(&mut |n, p| f(&format!("smooth.{i}.{n}"), p));
        }
        for (i, b) in self.residual_blocks.iter_mut().enumerate() {
            b.visit_params_mut(&mut |n, p| f(&format!("residual.{i}.{n}"), p));
        }
        self.smooth_head.visit_params_mut(&mut |n, p| f(&format!("smooth_head.{n}"), p));
        if let Some(h) = &mut self.residual_head {
            h.visit_params_mut(&mut |n, p| f(&format!("residual_head.{n}"), p));
        }
    }
}

/// Initialize a fresh network; identical seeds give bit-identical weights.
pub fn init_params<T: Real>(config: &ModelConfig, rng: &mut Rng) -> Result<PatchMlp<T>> {
    PatchMlp::init(config, rng)
}
