use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numerics::{check_pool_kernel, ActivationKind};
use crate::{Error, Result};

/// How (and whether) the series is split into a smooth and a residual part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decomposition {
    /// Moving average over the embedded latent vector.
    #[default]
    Latent,
    /// Moving average over the raw window, each part embedded separately.
    Input,
    /// No split: the whole latent goes through the mixing stack.
    Off,
}

impl fmt::Display for Decomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decomposition::Latent => "latent",
            Decomposition::Input => "input",
            Decomposition::Off => "off",
        })
    }
}

impl FromStr for Decomposition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "latent" | "true" | "on" | "yes" | "1" => Ok(Decomposition::Latent),
            "input" | "raw" => Ok(Decomposition::Input),
            "off" | "false" | "no" | "none" | "0" => Ok(Decomposition::Off),
            other => Err(Error::Config(format!(
                "unknown decomposition '{other}' (expected latent, input or off)"
            ))),
        }
    }
}

/// Architectural hyperparameters of a PatchMLP network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Look-back window length `L`.
    pub lookback: usize,
    /// Forecast horizon `T`.
    pub horizon: usize,
    /// Number of variables `M`.
    pub variables: usize,
    /// Patch lengths, each dividing `lookback`.
    pub patch_scales: Vec<usize>,
    /// Per-scale embedding widths. Empty means "derive from `d_model`".
    pub scale_dims: Vec<usize>,
    /// Target latent width. With explicit `scale_dims` it must equal the
    /// concatenated width exactly.
    pub d_model: usize,
    pub num_blocks: usize,
    /// Hidden width of every MLP relative to its input width.
    pub hidden_mult: f64,
    /// Moving-average kernel over the latent vector.
    pub pool_kernel: usize,
    /// Moving-average kernel over the raw window (input decomposition only).
    pub input_pool_kernel: usize,
    pub dropout: f64,
    pub activation: ActivationKind,
    pub decomposition: Decomposition,
    pub use_mpe: bool,
    pub use_dot_product: bool,
    pub use_inter_variable: bool,
    pub use_instance_norm: bool,
}

impl ModelConfig {
    /// Defaults for a given problem size. Patch scales that do not divide
    /// `lookback` are dropped; if none survive the window is one patch.
    pub fn new(lookback: usize, horizon: usize, variables: usize) -> Self {
        let mut scales: Vec<usize> = [4, 8, 12, 24]
            .into_iter()
            .filter(|p| lookback > 0 && lookback.is_multiple_of(*p))
            .collect();
        if scales.is_empty() {
            scales.push(lookback.max(1));
        }
        Self {
            lookback,
            horizon,
            variables,
            patch_scales: scales,
            scale_dims: Vec::new(),
            d_model: 512,
            num_blocks: 2,
            hidden_mult: 1.0,
            pool_kernel: 13,
            input_pool_kernel: 25,
            dropout: 0.1,
            activation: ActivationKind::Gelu,
            decomposition: Decomposition::Latent,
            use_mpe: true,
            use_dot_product: true,
            use_inter_variable: true,
            use_instance_norm: true,
        }
    }

    /// Patch scales actually embedded: all of them, or just the first when
    /// multi-scale embedding is switched off.
    pub fn scales(&self) -> Vec<usize> {
        if self.use_mpe {
            self.patch_scales.clone()
        } else {
            self.patch_scales.iter().take(1).copied().collect()
        }
    }

    /// Embedding width for each entry of [`ModelConfig::scales`].
    pub fn dims(&self) -> Vec<usize> {
        let scales = self.scales();
        if self.use_mpe && !self.scale_dims.is_empty() {
            return self.scale_dims.clone();
        }
        balanced_dims(self.lookback, &scales, self.d_model)
    }

    /// Exact latent width: `sum_i (L / p_i) * d_i`.
    pub fn latent_dim(&self) -> usize {
        self.scales()
            .iter()
            .zip(self.dims())
            .map(|(&p, d)| (self.lookback / p.max(1)) * d)
            .sum()
    }

    pub fn intra_hidden(&self) -> usize {
        hidden_width(self.hidden_mult, self.latent_dim())
    }

    pub fn inter_hidden(&self) -> usize {
        hidden_width(self.hidden_mult, self.variables)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.lookback < 2 {
            return cfg(format!("lookback must be at least 2, got {}", self.lookback));
        }
        if self.horizon == 0 {
            return cfg("horizon must be at least 1".into());
        }
        if self.variables == 0 {
            return cfg("variables must be at least 1".into());
        }
        if self.num_blocks == 0 {
            return cfg("num_blocks must be at least 1".into());
        }
        if self.patch_scales.is_empty() {
            return cfg("patch_scales must not be empty".into());
        }
        for &p in &self.patch_scales {
            if p == 0 || !self.lookback.is_multiple_of(p) {
                return cfg(format!(
                    "patch scale {p} does not divide lookback {}",
                    self.lookback
                ));
            }
        }
        if !self.scale_dims.is_empty() {
            if self.scale_dims.len() != self.patch_scales.len() {
                return cfg(format!(
                    "scale_dims has {} entries but patch_scales has {}",
                    self.scale_dims.len(),
                    self.patch_scales.len()
                ));
            }
            if self.scale_dims.contains(&0) {
                return cfg("scale_dims entries must be positive".into());
            }
            if self.use_mpe && self.latent_dim() != self.d_model {
                return cfg(format!(
                    "d_model {} does not equal the concatenated embedding width {}",
                    self.d_model,
                    self.latent_dim()
                ));
            }
        }
        if self.d_model == 0 {
            return cfg("d_model must be positive".into());
        }
        if !(self.hidden_mult.is_finite() && self.hidden_mult > 0.0) {
            return cfg(format!("hidden_mult must be positive, got {}", self.hidden_mult));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return cfg(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.decomposition == Decomposition::Latent {
            check_pool_kernel(self.pool_kernel, self.latent_dim())?;
        }
        if self.decomposition == Decomposition::Input {
            check_pool_kernel(self.input_pool_kernel, self.lookback)?;
        }
        Ok(())
    }
}

fn hidden_width(mult: f64, width: usize) -> usize {
    ((mult * width as f64).round() as usize).max(1)
}

/// Split `d_model` evenly across scales: each scale should contribute
/// `d_model / |P|` latent entries, i.e. `d_i ≈ share / N_i` with
/// `N_i = L / p_i`. Rounding slack goes to the first scale when it divides.
pub fn balanced_dims(lookback: usize, scales: &[usize], d_model: usize) -> Vec<usize> {
    if scales.is_empty() {
        return Vec::new();
    }
    let share = d_model as f64 / scales.len() as f64;
    let counts: Vec<usize> = scales.iter().map(|&p| (lookback / p.max(1)).max(1)).collect();
    let mut dims: Vec<usize> = counts
        .iter()
        .map(|&n| ((share / n as f64).round() as usize).max(1))
        .collect();
    let total: usize = counts.iter().zip(&dims).map(|(n, d)| n * d).sum();
    let slack = d_model as isize - total as isize;
    let step = (slack as f64 / counts[0] as f64).round() as isize;
    if step != 0 {
        dims[0] = (dims[0] as isize + step).max(1) as usize;
    }
    dims
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scales_for_96() {
        let c = ModelConfig::new(96, 96, 7);
        assert_eq!(c.patch_scales, vec![4, 8, 12, 24]);
        c.validate().unwrap();
        // 24*5 + 12*11 + 8*16 + 4*32
        assert_eq!(c.dims(), vec![5, 11, 16, 32]);
        assert_eq!(c.latent_dim(), 508);
    }

    #[test]
    fn exact_split_when_possible() {
        assert_eq!(balanced_dims(8, &[2, 4], 16), vec![2, 4]);
        assert_eq!(balanced_dims(96, &[4, 8, 12, 24], 576), vec![6, 12, 18, 36]);
    }

    #[test]
    fn explicit_dims_must_match_d_model() {
        let mut c = ModelConfig::new(8, 4, 2);
        c.patch_scales = vec![2, 4];
        c.scale_dims = vec![2, 3];
        c.d_model = 14;
        c.pool_kernel = 3;
        c.validate().unwrap();
        c.d_model = 15;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn non_dividing_scale_rejected() {
        let mut c = ModelConfig::new(12, 4, 1);
        c.patch_scales = vec![5];
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_scale_when_mpe_off() {
        let mut c = ModelConfig::new(96, 96, 7);
        c.use_mpe = false;
        assert_eq!(c.scales(), vec![4]);
        assert_eq!(c.dims(), vec![21]);
    }

    #[test]
    fn decomposition_parse() {
        assert_eq!("true".parse::<Decomposition>().unwrap(), Decomposition::Latent);
        assert_eq!("input".parse::<Decomposition>().unwrap(), Decomposition::Input);
        assert_eq!("off".parse::<Decomposition>().unwrap(), Decomposition::Off);
        assert!("sideways".parse::<Decomposition>().is_err());
    }
}
