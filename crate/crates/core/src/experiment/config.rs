use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{DatasetSpec, Frequency, SplitPolicy};
use crate::model::{Decomposition, ModelConfig};
use crate::numerics::{ActivationKind, Matrix};
use crate::synth::SynthSpec;
use crate::training::TrainConfig;
use crate::{Error, Result};

/// The five experiment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    Bench,
    Sweep,
    Ablate,
    Gradcheck,
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Command::Train),
            "bench" => Ok(Command::Bench),
            "sweep" => Ok(Command::Sweep),
            "ablate" => Ok(Command::Ablate),
            "gradcheck" => Ok(Command::Gradcheck),
            other => Err(Error::Config(format!("unknown command '{other}'"))),
        }
    }
}

/// Sweep axes, matching the hyperparameter studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Patch,
    Lookback,
    Lr,
    DModel,
    Blocks,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Patch => "patch",
            SweepAxis::Lookback => "lookback",
            SweepAxis::Lr => "lr",
            SweepAxis::DModel => "d_model",
            SweepAxis::Blocks => "blocks",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "patch" => Ok(SweepAxis::Patch),
            "lookback" => Ok(SweepAxis::Lookback),
            "lr" => Ok(SweepAxis::Lr),
            "d_model" => Ok(SweepAxis::DModel),
            "blocks" => Ok(SweepAxis::Blocks),
            other => Err(Error::Config(format!(
                "axis: unknown sweep axis '{other}' (expected patch, lookback, lr, d_model or blocks)"
            ))),
        }
    }
}

/// Where the series comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SynthSpec),
    File(DatasetSpec),
}

/// Every knob of an experiment, settable by `key = value`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// `synth`, an ETT name (`ETTh1`, ...) or a CSV path.
    pub dataset: String,
    pub split: String,
    pub train_frac: f64,
    pub val_frac: f64,
    pub columns: Vec<String>,
    pub synth: SynthSpec,
    /// Architecture template; lookback/horizon/variables are filled per run.
    pub model: ModelConfig,
    pub patch_scales: Option<Vec<usize>>,
    pub train: TrainConfig,
    pub horizons: Vec<usize>,
    pub axis: SweepAxis,
    pub sweep_patch: Vec<usize>,
    pub sweep_lookback: Vec<usize>,
    pub sweep_lr: Vec<f64>,
    pub sweep_d_model: Vec<usize>,
    pub sweep_blocks: Vec<usize>,
    pub ablate_cases: Vec<usize>,
    /// Instance-norm settings the bench grid is run under.
    pub bench_instance_norm: Vec<bool>,
    pub gradcheck_eps: f64,
    /// Deliberately corrupt one gradient (gradcheck negative control).
    pub corrupt_gradient: bool,
    pub out_dir: PathBuf,
    pub save_checkpoint: bool,
    explicit: BTreeSet<String>,
}

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "dataset",
    "split",
    "train_frac",
    "val_frac",
    "columns",
    "synth_length",
    "synth_variables",
    "synth_periods",
    "synth_amplitudes",
    "synth_trend",
    "synth_noise",
    "synth_coupling",
    "synth_lags",
    "synth_ar",
    "synth_seed",
    "lookback",
    "horizon",
    "variables",
    "patch_scales",
    "scale_dims",
    "d_model",
    "num_blocks",
    "hidden_mult",
    "pool_kernel",
    "input_pool_kernel",
    "dropout",
    "activation",
    "decomposition",
    "use_mpe",
    "use_dot_product",
    "use_inter_variable",
    "use_instance_norm",
    "lr",
    "batch_size",
    "max_epochs",
    "patience",
    "seed",
    "max_steps",
    "train_stride",
    "eval_stride",
    "horizons",
    "axis",
    "sweep_patch",
    "sweep_lookback",
    "sweep_lr",
    "sweep_d_model",
    "sweep_blocks",
    "ablate_cases",
    "bench_instance_norm",
    "gradcheck_eps",
    "corrupt_gradient",
    "out_dir",
    "save_checkpoint",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut synth = SynthSpec::periodic(4000, 3, &[24, 168], 0);
        synth.amplitudes = vec![1.0, 0.5];
        synth.noise_sigma = 0.1;
        Self {
            dataset: "synth".into(),
            split: "ratio".into(),
            train_frac: 0.7,
            val_frac: 0.1,
            columns: Vec::new(),
            synth,
            model: ModelConfig::new(96, 96, 1),
            patch_scales: None,
            train: TrainConfig::default(),
            horizons: vec![96, 192, 336, 720],
            axis: SweepAxis::Patch,
            sweep_patch: vec![1, 2, 4, 8, 16],
            sweep_lookback: vec![192, 288, 384, 480, 576, 672, 768],
            sweep_lr: vec![1e-4, 5e-4, 1e-3, 5e-3, 1e-2],
            sweep_d_model: vec![64, 128, 256, 512, 1024],
            sweep_blocks: vec![1, 2, 3, 4],
            ablate_cases: (1..=9).collect(),
            bench_instance_norm: vec![true],
            gradcheck_eps: 1e-5,
            corrupt_gradient: false,
            out_dir: PathBuf::from("runs"),
            save_checkpoint: true,
            explicit: BTreeSet::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got '{value}'"))),
    }
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Defaults for `command`. Gradient checking starts from a tiny network
    /// so that finite differences stay fast.
    pub fn for_command(command: Command) -> Self {
        let mut c = Self::default();
        if command == Command::Gradcheck {
            let mut m = ModelConfig::new(8, 4, 2);
            m.patch_scales = vec![2, 4];
            m.d_model = 8;
            m.num_blocks = 1;
            m.hidden_mult = 2.0;
            m.pool_kernel = 3;
            m.input_pool_kernel = 3;
            m.dropout = 0.0;
            c.model = m;
            c.patch_scales = Some(vec![2, 4]);
        }
        c
    }

    /// Parse `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", i + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| e.context(format_args!("line {}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display()))?;
        self.apply_text(&text).map_err(|e| e.context(path.display()))
    }

    /// Keys given explicitly through a file or flag.
    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// Set one key. Dashes in `key` are read as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().trim_start_matches("--").replace('-', "_");
        let k = key.as_str();
        let m = &mut self.model;
        let t = &mut self.train;
        let s = &mut self.synth;
        match k {
            "dataset" => self.dataset = value.trim().to_string(),
            "split" => {
                SplitPolicy::parse(value, 0.7, 0.1).map_err(|e| e.context("split"))?;
                self.split = value.trim().to_ascii_lowercase();
            }
            "train_frac" => self.train_frac = parse(k, value)?,
            "val_frac" => self.val_frac = parse(k, value)?,
            "columns" => self.columns = parse_list(k, value)?,
            "synth_length" => s.length = parse(k, value)?,
            "synth_variables" => s.variables = parse(k, value)?,
            "synth_periods" => s.periods = parse_list(k, value)?,
            "synth_amplitudes" => s.amplitudes = parse_list(k, value)?,
            "synth_trend" => s.trend_slope = parse(k, value)?,
            "synth_noise" => s.noise_sigma = parse(k, value)?,
            "synth_coupling" => {
                s.coupling = match value.trim() {
                    "none" | "" => None,
                    "identity" => Some(Matrix::identity(s.variables)),
                    list => {
                        let w: Vec<f64> = parse_list(k, list)?;
                        let n = (w.len() as f64).sqrt() as usize;
                        if n * n != w.len() {
                            return Err(Error::Config(format!(
                                "{k}: {} weights do not form a square matrix",
                                w.len()
                            )));
                        }
                        Some(Matrix::from_vec(n, n, w)?)
                    }
                }
            }
            "synth_lags" => s.lags = parse_list(k, value)?,
            "synth_ar" => s.latent_ar = parse(k, value)?,
            "synth_seed" => s.seed = parse(k, value)?,
            "lookback" => m.lookback = parse(k, value)?,
            "horizon" => m.horizon = parse(k, value)?,
            "variables" => m.variables = parse(k, value)?,
            "patch_scales" => self.patch_scales = Some(parse_list(k, value)?),
            "scale_dims" => m.scale_dims = parse_list(k, value)?,
            "d_model" => m.d_model = parse(k, value)?,
            "num_blocks" => m.num_blocks = parse(k, value)?,
            "hidden_mult" => m.hidden_mult = parse(k, value)?,
            "pool_kernel" => m.pool_kernel = parse(k, value)?,
            "input_pool_kernel" => m.input_pool_kernel = parse(k, value)?,
            "dropout" => m.dropout = parse(k, value)?,
            "activation" => m.activation = parse::<ActivationKind>(k, value)?,
            "decomposition" => m.decomposition = parse::<Decomposition>(k, value)?,
            "use_mpe" => m.use_mpe = parse_bool(k, value)?,
            "use_dot_product" => m.use_dot_product = parse_bool(k, value)?,
            "use_inter_variable" => m.use_inter_variable = parse_bool(k, value)?,
            "use_instance_norm" => m.use_instance_norm = parse_bool(k, value)?,
            "lr" => t.lr = parse(k, value)?,
            "batch_size" => t.batch_size = parse(k, value)?,
            "max_epochs" => t.max_epochs = parse(k, value)?,
            "patience" => t.patience = parse(k, value)?,
            "seed" => t.seed = parse(k, value)?,
            "max_steps" => {
                t.max_steps = match value.trim() {
                    "none" | "" => None,
                    v => Some(parse(k, v)?),
                }
            }
            "train_stride" => t.train_stride = parse(k, value)?,
            "eval_stride" => t.eval_stride = parse(k, value)?,
            "horizons" => self.horizons = parse_list(k, value)?,
            "axis" => self.axis = value.parse()?,
            "sweep_patch" => self.sweep_patch = parse_list(k, value)?,
            "sweep_lookback" => self.sweep_lookback = parse_list(k, value)?,
            "sweep_lr" => self.sweep_lr = parse_list(k, value)?,
            "sweep_d_model" => self.sweep_d_model = parse_list(k, value)?,
            "sweep_blocks" => self.sweep_blocks = parse_list(k, value)?,
            "ablate_cases" => self.ablate_cases = parse_list(k, value)?,
            "bench_instance_norm" => {
                self.bench_instance_norm = value
                    .split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(|v| parse_bool(k, v))
                    .collect::<Result<_>>()?
            }
            "gradcheck_eps" => self.gradcheck_eps = parse(k, value)?,
            "corrupt_gradient" => self.corrupt_gradient = parse_bool(k, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            "save_checkpoint" => self.save_checkpoint = parse_bool(k, value)?,
            _ => {
                return Err(Error::Config(format!(
                    "unknown key '{key}' (known keys: {})",
                    KEYS.join(", ")
                )))
            }
        }
        self.explicit.insert(key);
        Ok(())
    }

    /// The full effective configuration, one entry per key.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let m = &self.model;
        let t = &self.train;
        let s = &self.synth;
        let coupling = match &s.coupling {
            None => "none".to_string(),
            Some(w) => join(w.as_slice()),
        };
        let patch = self
            .patch_scales
            .clone()
            .unwrap_or_else(|| ModelConfig::new(m.lookback, m.horizon, m.variables).patch_scales);
        let pairs: Vec<(&str, String)> = vec![
            ("dataset", self.dataset.clone()),
            ("split", self.split.clone()),
            ("train_frac", self.train_frac.to_string()),
            ("val_frac", self.val_frac.to_string()),
            ("columns", join(&self.columns)),
            ("synth_length", s.length.to_string()),
            ("synth_variables", s.variables.to_string()),
            ("synth_periods", join(&s.periods)),
            ("synth_amplitudes", join(&s.amplitudes)),
            ("synth_trend", s.trend_slope.to_string()),
            ("synth_noise", s.noise_sigma.to_string()),
            ("synth_coupling", coupling),
            ("synth_lags", join(&s.lags)),
            ("synth_ar", s.latent_ar.to_string()),
            ("synth_seed", s.seed.to_string()),
            ("lookback", m.lookback.to_string()),
            ("horizon", m.horizon.to_string()),
            ("variables", m.variables.to_string()),
            ("patch_scales", join(&patch)),
            ("scale_dims", join(&m.scale_dims)),
            ("d_model", m.d_model.to_string()),
            ("num_blocks", m.num_blocks.to_string()),
            ("hidden_mult", m.hidden_mult.to_string()),
            ("pool_kernel", m.pool_kernel.to_string()),
            ("input_pool_kernel", m.input_pool_kernel.to_string()),
            ("dropout", m.dropout.to_string()),
            ("activation", m.activation.to_string()),
            ("decomposition", m.decomposition.to_string()),
            ("use_mpe", m.use_mpe.to_string()),
            ("use_dot_product", m.use_dot_product.to_string()),
            ("use_inter_variable", m.use_inter_variable.to_string()),
            ("use_instance_norm", m.use_instance_norm.to_string()),
            ("lr", t.lr.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("max_epochs", t.max_epochs.to_string()),
            ("patience", t.patience.to_string()),
            ("seed", t.seed.to_string()),
            ("max_steps", t.max_steps.map_or("none".into(), |v| v.to_string())),
            ("train_stride", t.train_stride.to_string()),
            ("eval_stride", t.eval_stride.to_string()),
            ("horizons", join(&self.horizons)),
            ("axis", self.axis.name().to_string()),
            ("sweep_patch", join(&self.sweep_patch)),
            ("sweep_lookback", join(&self.sweep_lookback)),
            ("sweep_lr", join(&self.sweep_lr)),
            ("sweep_d_model", join(&self.sweep_d_model)),
            ("sweep_blocks", join(&self.sweep_blocks)),
            ("ablate_cases", join(&self.ablate_cases)),
            ("bench_instance_norm", join(&self.bench_instance_norm)),
            ("gradcheck_eps", self.gradcheck_eps.to_string()),
            ("corrupt_gradient", self.corrupt_gradient.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("save_checkpoint", self.save_checkpoint.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// `key = value` lines in the same format [`ExperimentConfig::apply_text`] reads.
    pub fn echo_text(&self) -> String {
        let echo = self.echo();
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", echo[*k]))
            .collect()
    }

    /// Model configuration for one run. Without explicit patch scales the
    /// defaults are re-derived for `lookback`.
    pub fn model_for(&self, lookback: usize, horizon: usize, variables: usize) -> ModelConfig {
        let mut m = self.model.clone();
        m.lookback = lookback;
        m.horizon = horizon;
        m.variables = variables;
        m.patch_scales = self
            .patch_scales
            .clone()
            .unwrap_or_else(|| ModelConfig::new(lookback, horizon, variables).patch_scales);
        m
    }

    pub fn split_policy(&self) -> Result<SplitPolicy> {
        SplitPolicy::parse(&self.split, self.train_frac, self.val_frac).map_err(|e| e.context("split"))
    }

    /// Resolve `dataset` to a generator or a file.
    pub fn source(&self) -> Result<DataSource> {
        if self.dataset.eq_ignore_ascii_case("synth") {
            self.synth.validate().map_err(|e| e.context("synth"))?;
            return Ok(DataSource::Synthetic(self.synth.clone()));
        }
        let mut spec = match DatasetSpec::ett(&self.dataset) {
            Ok(spec) if !self.is_explicit("split") => spec,
            Ok(spec) => DatasetSpec {
                split: self.split_policy()?,
                ..spec
            },
            Err(_) => DatasetSpec {
                path: PathBuf::from(&self.dataset),
                freq: Frequency::Hourly,
                split: self.split_policy()?,
                target_columns: None,
            },
        };
        if !self.columns.is_empty() {
            spec.target_columns = Some(self.columns.clone());
        }
        Ok(DataSource::File(spec))
    }
}
