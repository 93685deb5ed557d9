use super::ModelConfig;
use crate::numerics::{LinearLayer, Matrix, Param, Parameterized, Real, Rng};
use crate::{Error, Result};

/// Multi-scale patch embedding.
///
/// For each patch length `p_i` the window is cut into `L / p_i`
/// non-overlapping patches, each patch goes through that scale's linear
/// layer (`p_i -> d_i`), and the per-patch vectors are flattened row-major.
/// Scale outputs are concatenated in configuration order.
#[derive(Debug, Clone)]
pub struct MultiScaleEmbedding<T = f32> {
    lookback: usize,
    scales: Vec<usize>,
    layers: Vec<LinearLayer<T>>,
}

impl<T: Real> MultiScaleEmbedding<T> {
    pub fn init(config: &ModelConfig, rng: &mut Rng) -> Self {
        let scales = config.scales();
        let layers = scales
            .iter()
            .zip(config.dims())
            .map(|(&p, d)| LinearLayer::init_uniform(p, d, rng))
            .collect();
        Self {
            lookback: config.lookback,
            scales,
            layers,
        }
    }

    /// Build from explicit per-scale layers (`layers[i]` maps `scales[i] -> d_i`).
    pub fn from_layers(lookback: usize, scales: Vec<usize>, layers: Vec<LinearLayer<T>>) -> Result<Self> {
        if scales.len() != layers.len() {
            return Err(Error::Config(format!(
                "{} scales but {} layers",
                scales.len(),
                layers.len()
            )));
        }
        for (&p, layer) in scales.iter().zip(&layers) {
            if p == 0 || !lookback.is_multiple_of(p) {
                return Err(Error::Config(format!(
                    "patch scale {p} does not divide lookback {lookback}"
                )));
            }
            if layer.input_dim() != p {
                return Err(Error::Config(format!(
                    "layer for scale {p} takes {} inputs",
                    layer.input_dim()
                )));
            }
        }
        Ok(Self {
            lookback,
            scales,
            layers,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.scales
            .iter()
            .zip(&self.layers)
            .map(|(&p, l)| (self.lookback / p) * l.output_dim())
            .sum()
    }

    fn segment_widths(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        // (patch count, per-patch width, segment width)
        self.scales.iter().zip(&self.layers).map(move |(&p, l)| {
            let n = self.lookback / p;
            (n, l.output_dim(), n * l.output_dim())
        })
    }

    /// Embed every row (one series of length `L`) of `series`.
    pub fn forward(&mut self, series: &Matrix<T>) -> Result<Matrix<T>> {
        self.run(series, true)
    }

    fn run(&mut self, series: &Matrix<T>, cache: bool) -> Result<Matrix<T>> {
        if series.cols() != self.lookback {
            return Err(Error::Dimension(format!(
                "embedding expects series of length {}, got {}x{}",
                self.lookback,
                series.rows(),
                series.cols()
            )));
        }
        let rows = series.rows();
        let mut out = Matrix::zeros(rows, self.output_dim());
        let mut offset = 0;
        for (i, &p) in self.scales.iter().enumerate() {
            let n = self.lookback / p;
            let patches = series.clone().reshape(rows * n, p)?;
            let layer = &mut self.layers[i];
            let emb = if cache {
                layer.forward(&patches)?
            } else {
                layer.apply(&patches)?
            };
            let d = layer.output_dim();
            let flat = emb.reshape(rows, n * d)?;
            out.write_columns(offset, &flat)?;
            offset += n * d;
        }
        Ok(out)
    }

    /// Embed one length-`L` series into its latent vector.
    pub fn embed_series(&mut self, x: &[T]) -> Result<Vec<T>> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.run(&m, false)?.into_vec())
    }

    /// Accumulate parameter gradients from the latent gradient.
    pub fn backward(&mut self, grad: &Matrix<T>) -> Result<()> {
        let rows = grad.rows();
        let widths: Vec<_> = self.segment_widths().collect();
        let mut offset = 0;
        for (layer, (n, d, w)) in self.layers.iter_mut().zip(widths) {
            let g = grad.columns(offset, w)?.reshape(rows * n, d)?;
            layer.backward_params(&g)?;
            offset += w;
        }
        Ok(())
    }
}

impl<T: Real> Parameterized<T> for MultiScaleEmbedding<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        for (p, layer) in self.scales.iter().zip(&self.layers) {
            layer.visit_params(&mut |n, param| f(&format!("patch{p}.{n}"), param));
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        for (p, layer) in self.scales.iter().zip(&mut self.layers) {
            layer.visit_params_mut(&mut |n, param| f(&format!("patch{p}.{n}"), param));
        }
    }
}

/// Functional form: embed a single series with the given per-scale layers.
pub fn multi_scale_patch_embed<T: Real>(
    x: &[T],
    config: &ModelConfig,
    layers: &[LinearLayer<T>],
) -> Result<Vec<T>> {
    config.validate()?;
    let mut embed = MultiScaleEmbedding::from_layers(config.lookback, config.scales(), layers.to_vec())?;
    embed.embed_series(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lookback: usize, scales: Vec<usize>, dims: Vec<usize>) -> ModelConfig {
        let mut c = ModelConfig::new(lookback, 1, 1);
        c.d_model = scales.iter().zip(&dims).map(|(p, d)| lookback / p * d).sum();
        c.patch_scales = scales;
        c.scale_dims = dims;
        c.pool_kernel = 1;
        c
    }

    #[test]
    fn shape_law() {
        let c = cfg(4, vec![2], vec![3]);
        let mut rng = Rng::new(0);
        let mut e = MultiScaleEmbedding::<f64>::init(&c, &mut rng);
        assert_eq!(e.embed_series(&[1.0, 2.0, 3.0, 4.0]).unwrap().len(), 6);
        assert_eq!(c.latent_dim(), 6);
    }

    #[test]
    fn identity_embedding_reproduces_input() {
        let c = cfg(4, vec![2], vec![2]);
        let layer = LinearLayer::from_parts(Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        let out = multi_scale_patch_embed(&[1.0f64, 2.0, 3.0, 4.0], &c, &[layer]).unwrap();
        assert_eq!(out, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn segments_match_single_scale_runs() {
        // Oracle: embed each patch by hand with explicit loops, one scale at a time.
        let c = cfg(8, vec![2, 4], vec![2, 3]);
        assert_eq!(c.latent_dim(), 14);
        let mut rng = Rng::new(8);
        let layers = vec![
            LinearLayer::<f64>::init_uniform(2, 2, &mut rng),
            LinearLayer::<f64>::init_uniform(4, 3, &mut rng),
        ];
        let x: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin()).collect();
        let got = multi_scale_patch_embed(&x, &c, &layers).unwrap();

        let mut want = Vec::new();
        for (layer, p) in layers.iter().zip([2usize, 4]) {
            let w = &layer.weight.value;
            for patch in x.chunks(p) {
                for o in 0..w.rows() {
                    let mut acc = layer.bias.value.get(0, o);
                    for (j, v) in patch.iter().enumerate() {
                        acc += w.get(o, j) * v;
                    }
                    want.push(acc);
                }
            }
        }
        assert_eq!(got.len(), 14);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let c = cfg(4, vec![2], vec![2]);
        let mut rng = Rng::new(0);
        let mut e = MultiScaleEmbedding::<f32>::init(&c, &mut rng);
        assert!(matches!(e.forward(&Matrix::zeros(2, 5)), Err(Error::Dimension(_))));
    }
}
