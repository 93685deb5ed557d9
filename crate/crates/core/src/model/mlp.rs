//! The MLP layer: an intra-variable MLP shared across variables, and an
//! inter-variable MLP shared across latent positions whose output gates its
//! own input.

use super::ModelConfig;
use crate::numerics::{Activation, ActivationKind, Dropout, LinearLayer, Matrix, Param, Parameterized, Real, Rng};
use crate::{Error, Result};

/// Two-layer MLP over each variable's latent vector, with a skip connection.
#[derive(Debug, Clone)]
pub struct IntraVariableMlp<T = f32> {
    pub fc1: LinearLayer<T>,
    pub fc2: LinearLayer<T>,
    act: Activation<T>,
    drop1: Dropout<T>,
    drop2: Dropout<T>,
}

impl<T: Real> IntraVariableMlp<T> {
    pub fn new(fc1: LinearLayer<T>, fc2: LinearLayer<T>, activation: ActivationKind, dropout: f64) -> Result<Self> {
        if fc1.output_dim() != fc2.input_dim() || fc1.input_dim() != fc2.output_dim() {
            return Err(Error::Config("intra MLP layers do not chain back to the input width".into()));
        }
        Ok(Self {
            fc1,
            fc2,
            act: Activation::new(activation),
            drop1: Dropout::new(dropout)?,
            drop2: Dropout::new(dropout)?,
        })
    }

    pub fn init(width: usize, hidden: usize, activation: ActivationKind, dropout: f64, rng: &mut Rng) -> Result<Self> {
        let fc1 = LinearLayer::init_uniform(width, hidden, rng);
        let fc2 = LinearLayer::init_uniform(hidden, width, rng);
        Self::new(fc1, fc2, activation, dropout)
    }

    /// `z` is `(rows) x d_model`; every row is processed with the same weights.
    pub fn forward(&mut self, z: &Matrix<T>, rng: &mut Rng, training: bool) -> Result<Matrix<T>> {
        let h = self.fc1.forward(z)?;
        let a = self.act.forward(&h);
        let a = self.drop1.forward(&a, rng, training);
        let y = self.fc2.forward(&a)?;
        let mut y = self.drop2.forward(&y, rng, training);
        y.add_assign(z)?;
        Ok(y)
    }

    pub fn backward(&mut self, grad: &Matrix<T>) -> Result<Matrix<T>> {
        let g = self.drop2.backward(grad)?;
        let g = self.fc2.backward(&g)?;
        let g = self.drop1.backward(&g)?;
        let g = self.act.backward(&g)?;
        let mut g = self.fc1.backward(&g)?;
        g.add_assign(grad)?;
        Ok(g)
    }
}

impl<T: Real> Parameterized<T> for IntraVariableMlp<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.fc1.visit_params(&mut |n, p| f(&format!("fc1.{n}"), p));
        self.fc2.visit_params(&mut |n, p| f(&format!("fc2.{n}"), p));
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.fc1.visit_params_mut(&mut |n, p| f(&format!("fc1.{n}"), p));
        self.fc2.visit_params_mut(&mut |n, p| f(&format!("fc2.{n}"), p));
    }
}

/// Two-layer MLP across variables at each latent position.
///
/// Its output `V` is combined with its input `U` elementwise: `V ⊙ U` with
/// the dot-product mechanism on, `V + U` with it off.
#[derive(Debug, Clone)]
pub struct InterVariableMlp<T = f32> {
    pub fc1: LinearLayer<T>,
    pub fc2: LinearLayer<T>,
    act: Activation<T>,
    drop: Dropout<T>,
    dot_product: bool,
    cache: Option<(Matrix<T>, Matrix<T>)>,
}

impl<T: Real> InterVariableMlp<T> {
    pub fn new(
        fc1: LinearLayer<T>,
        fc2: LinearLayer<T>,
        activation: ActivationKind,
        dropout: f64,
        dot_product: bool,
    ) -> Result<Self> {
        if fc1.output_dim() != fc2.input_dim() || fc1.input_dim() != fc2.output_dim() {
            return Err(Error::Config("inter MLP layers do not chain back to the variable count".into()));
        }
        Ok(Self {
            fc1,
            fc2,
            act: Activation::new(activation),
            drop: Dropout::new(dropout)?,
            dot_product,
            cache: None,
        })
    }

    pub fn init(
        variables: usize,
        hidden: usize,
        activation: ActivationKind,
        dropout: f64,
        dot_product: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        let fc1 = LinearLayer::init_uniform(variables, hidden, rng);
        let fc2 = LinearLayer::init_uniform(hidden, variables, rng);
        Self::new(fc1, fc2, activation, dropout, dot_product)
    }

    pub fn variables(&self) -> usize {
        self.fc1.input_dim()
    }

    /// `u` stacks `B` samples of `M x d_model` blocks.
    pub fn forward(&mut self, u: &Matrix<T>, rng: &mut Rng, training: bool) -> Result<Matrix<T>> {
        let m = self.variables();
        let width = u.cols();
        let ut = u.transpose_blocks(m)?;
        let h = self.fc1.forward(&ut)?;
        let a = self.act.forward(&h);
        let a = self.drop.forward(&a, rng, training);
        let vt = self.fc2.forward(&a)?;
        let v = vt.transpose_blocks(width)?;
        let out = if self.dot_product { v.hadamard(u)? } else { v.add(u)? };
        self.cache = Some((u.clone(), v));
        Ok(out)
    }

    pub fn backward(&mut self, grad: &Matrix<T>) -> Result<Matrix<T>> {
        let (u, v) = self
            .cache
            .take()
            .ok_or_else(|| Error::State("inter-variable backward without forward".into()))?;
        let (grad_v, mut grad_u) = if self.dot_product {
            (grad.hadamard(&u)?, grad.hadamard(&v)?)
        } else {
            (grad.clone(), grad.clone())
        };
        let g = grad_v.transpose_blocks(self.variables())?;
        let g = self.fc2.backward(&g)?;
        let g = self.drop.backward(&g)?;
        let g = self.act.backward(&g)?;
        let g = self.fc1.backward(&g)?;
        grad_u.add_assign(&g.transpose_blocks(u.cols())?)?;
        Ok(grad_u)
    }
}

impl<T: Real> Parameterized<T> for InterVariableMlp<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.fc1.visit_params(&mut |n, p| f(&format!("fc1.{n}"), p));
        self.fc2.visit_params(&mut |n, p| f(&format!("fc2.{n}"), p));
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.fc1.visit_params_mut(&mut |n, p| f(&format!("fc1.{n}"), p));
        self.fc2.visit_params_mut(&mut |n, p| f(&format!("fc2.{n}"), p));
    }
}

/// One MLP block: intra-variable MLP, then (when mixing) the inter-variable
/// MLP plus a block-level skip from the block input.
#[derive(Debug, Clone)]
pub struct MlpBlock<T = f32> {
    pub intra: IntraVariableMlp<T>,
    pub inter: Option<InterVariableMlp<T>>,
}

impl<T: Real> MlpBlock<T> {
    pub fn init(config: &ModelConfig, mixing: bool, rng: &mut Rng) -> Result<Self> {
        let width = config.latent_dim();
        let intra = IntraVariableMlp::init(width, config.intra_hidden(), config.activation, config.dropout, rng)?;
        let inter = if mixing {
            Some(InterVariableMlp::init(
                config.variables,
                config.inter_hidden(),
                config.activation,
                config.dropout,
                config.use_dot_product,
                rng,
            )?)
        } else {
            None
        };
        Ok(Self { intra, inter })
    }

    pub fn is_mixing(&self) -> bool {
        self.inter.is_some()
    }

    pub fn forward(&mut self, z: &Matrix<T>, rng: &mut Rng, training: bool) -> Result<Matrix<T>> {
        let u = self.intra.forward(z, rng, training)?;
        match &mut self.inter {
            Some(inter) => {
                let mut out = inter.forward(&u, rng, training)?;
                out.add_assign(z)?;
                Ok(out)
            }
            None => Ok(u),
        }
    }

    pub fn backward(&mut self, grad: &Matrix<T>) -> Result<Matrix<T>> {
        match &mut self.inter {
            Some(inter) => {
                let grad_u = inter.backward(grad)?;
                let mut g = self.intra.backward(&grad_u)?;
                g.add_assign(grad)?;
                Ok(g)
            }
            None => self.intra.backward(grad),
        }
    }
}

impl<T: Real> Parameterized<T> for MlpBlock<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        self.intra.visit_params(&mut |n, p| f(&format!("intra.{n}"), p));
        if let Some(inter) = &self.inter {
            inter.visit_params(&mut |n, p| f(&format!("inter.{n}"), p));
        }
    }
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        self.intra.visit_params_mut(&mut |n, p| f(&format!("intra.{n}"), p));
        if let Some(inter) = &mut self.inter {
            inter.visit_params_mut(&mut |n, p| f(&format!("inter.{n}"), p));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, mse_loss};

    fn zero_intra(width: usize, hidden: usize) -> IntraVariableMlp<f64> {
        IntraVariableMlp::new(
            LinearLayer::zeros(width, hidden),
            LinearLayer::zeros(hidden, width),
            ActivationKind::Gelu,
            0.0,
        )
        .unwrap()
    }

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = Rng::new(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.normal())
    }

    #[test]
    fn zero_weights_intra_is_pure_residual() {
        let mut mlp = zero_intra(8, 16);
        let z = random(3, 8, 1);
        let out = mlp.forward(&z, &mut Rng::new(0), true).unwrap();
        assert_eq!(out, z);
    }

    #[test]
    fn intra_is_row_equivariant() {
        let mut rng = Rng::new(3);
        let mut mlp = IntraVariableMlp::<f64>::init(8, 16, ActivationKind::Gelu, 0.0, &mut rng).unwrap();
        let z = random(2, 8, 4);
        let swapped = Matrix::from_rows(&[z.row(1), z.row(0)]).unwrap();
        let a = mlp.forward(&z, &mut rng, false).unwrap();
        let b = mlp.forward(&swapped, &mut rng, false).unwrap();
        assert_eq!(a.row(0), b.row(1));
        assert_eq!(a.row(1), b.row(0));
    }

    struct Harness<L> {
        layer: L,
        input: Matrix<f64>,
        target: Matrix<f64>,
    }

    macro_rules! harness_params {
        ($t:ty) => {
            impl Parameterized<f64> for Harness<$t> {
                fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<f64>)) {
                    self.layer.visit_params(f)
                }
                fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<f64>)) {
                    self.layer.visit_params_mut(f)
                }
            }
        };
    }
    harness_params!(IntraVariableMlp<f64>);
    harness_params!(InterVariableMlp<f64>);
    harness_params!(MlpBlock<f64>);

    /// Also checks the input gradient by treating the input as a parameter.
    fn input_grad_error<F>(input: &Matrix<f64>, mut f: F) -> f64
    where
        F: FnMut(&Matrix<f64>, bool) -> (f64, Option<Matrix<f64>>),
    {
        let (_, g) = f(input, true);
        let g = g.unwrap();
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..input.len() {
            let mut p = input.clone();
            p.as_mut_slice()[i] += eps;
            let up = f(&p, false).0;
            p.as_mut_slice()[i] -= 2.0 * eps;
            let down = f(&p, false).0;
            worst = worst.max(crate::numerics::relative_error(g.as_slice()[i], (up - down) / (2.0 * eps)));
        }
        worst
    }

    #[test]
    fn intra_gradients() {
        let mut rng = Rng::new(5);
        let mut h = Harness {
            layer: IntraVariableMlp::<f64>::init(8, 16, ActivationKind::Gelu, 0.0, &mut rng).unwrap(),
            input: random(2, 8, 6),
            target: random(2, 8, 7),
        };
        let r = grad_check(&mut h, 1e-5, |h, back| {
            let mut rng = Rng::new(0);
            let y = h.layer.forward(&h.input, &mut rng, false)?;
            let (l, g) = mse_loss(&y, &h.target)?;
            if back {
                h.layer.backward(&g)?;
            }
            Ok(l)
        })
        .unwrap();
        assert!(r.max_relative_error < 1e-4, "{r:?}");

        let target = h.target.clone();
        let err = input_grad_error(&h.input, |x, back| {
            let y = h.layer.forward(x, &mut Rng::new(0), false).unwrap();
            let (l, g) = mse_loss(&y, &target).unwrap();
            let gx = back.then(|| h.layer.backward(&g).unwrap());
            (l, gx)
        });
        assert!(err < 1e-4, "input grad error {err}");
    }

    #[test]
    fn inter_single_variable_identity_squares() {
        let id = || LinearLayer::<f64>::from_parts(Matrix::identity(1), vec![0.0]).unwrap();
        let mut mlp = InterVariableMlp::new(id(), id(), ActivationKind::Relu, 0.0, true).unwrap();
        let u = Matrix::from_rows(&[[0.5, 2.0, 3.0]]).unwrap();
        let out = mlp.forward(&u, &mut Rng::new(0), false).unwrap();
        assert_eq!(out.as_slice(), &[0.25, 4.0, 9.0]);
    }

    #[test]
    fn inter_ones_output_is_multiplicative_identity() {
        // fc2 has zero weights and unit bias, so V is all ones whatever the input
        let fc1 = LinearLayer::<f64>::init_uniform(3, 6, &mut Rng::new(1));
        let fc2 = LinearLayer::from_parts(Matrix::zeros(3, 6), vec![1.0; 3]).unwrap();
        let mut mlp = InterVariableMlp::new(fc1, fc2, ActivationKind::Gelu, 0.0, true).unwrap();
        let u = random(6, 5, 9); // two samples of 3 variables
        assert_eq!(mlp.forward(&u, &mut Rng::new(0), false).unwrap(), u);
    }

    #[test]
    fn inter_gradients_with_dot_product() {
        for dot in [true, false] {
            let mut rng = Rng::new(10);
            let mut h = Harness {
                layer: InterVariableMlp::<f64>::init(3, 6, ActivationKind::Gelu, 0.0, dot, &mut rng).unwrap(),
                input: random(3, 8, 11),
                target: random(3, 8, 12),
            };
            let r = grad_check(&mut h, 1e-5, |h, back| {
                let y = h.layer.forward(&h.input, &mut Rng::new(0), false)?;
                let (l, g) = mse_loss(&y, &h.target)?;
                if back {
                    h.layer.backward(&g)?;
                }
                Ok(l)
            })
            .unwrap();
            assert!(r.max_relative_error < 1e-4, "dot={dot}: {r:?}");

            let target = h.target.clone();
            let err = input_grad_error(&h.input, |x, back| {
                let y = h.layer.forward(x, &mut Rng::new(0), false).unwrap();
                let (l, g) = mse_loss(&y, &target).unwrap();
                (l, back.then(|| h.layer.backward(&g).unwrap()))
            });
            assert!(err < 1e-4, "dot={dot}: input grad error {err}");
        }
    }

    fn block_config(variables: usize) -> ModelConfig {
        let mut c = ModelConfig::new(8, 4, variables);
        c.patch_scales = vec![4];
        c.scale_dims = vec![4];
        c.d_model = 8;
        c.hidden_mult = 2.0;
        c.dropout = 0.0;
        c.pool_kernel = 3;
        c
    }

    #[test]
    fn zero_block_without_mixing_is_identity() {
        let mut block = MlpBlock {
            intra: zero_intra(8, 16),
            inter: None,
        };
        let z = random(2, 8, 3);
        assert_eq!(block.forward(&z, &mut Rng::new(0), true).unwrap(), z);
    }

    #[test]
    fn non_mixing_block_is_channel_independent() {
        let mut block = MlpBlock::<f64>::init(&block_config(2), false, &mut Rng::new(4)).unwrap();
        let z = random(2, 8, 5);
        let base = block.forward(&z, &mut Rng::new(0), false).unwrap();
        let mut z2 = z.clone();
        for v in z2.row_mut(1) {
            *v += 3.0;
        }
        let moved = block.forward(&z2, &mut Rng::new(0), false).unwrap();
        assert_eq!(base.row(0), moved.row(0));
        assert_ne!(base.row(1), moved.row(1));
    }

    #[test]
    fn mixing_block_matches_staged_composition() {
        let cfg = block_config(2);
        let mut block = MlpBlock::<f64>::init(&cfg, true, &mut Rng::new(6)).unwrap();
        let z = random(2, 8, 7);
        let out = block.forward(&z, &mut Rng::new(0), false).unwrap();

        // Stage by hand: U = intra(Z); V = per-column inter MLP over variables; out = V*U + Z.
        let kind = cfg.activation;
        let mut intra = block.intra.clone();
        let u = intra.forward(&z, &mut Rng::new(0), false).unwrap();
        let inter = block.inter.as_ref().unwrap();
        let mut want = Matrix::zeros(2, 8);
        for col in 0..8 {
            let x = [u.get(0, col), u.get(1, col)];
            let w1 = &inter.fc1.weight.value;
            let hidden: Vec<f64> = (0..w1.rows())
                .map(|h| kind.eval(inter.fc1.bias.value.get(0, h) + w1.get(h, 0) * x[0] + w1.get(h, 1) * x[1]))
                .collect();
            let w2 = &inter.fc2.weight.value;
            for (m, &xm) in x.iter().enumerate() {
                let v: f64 = inter.fc2.bias.value.get(0, m)
                    + hidden.iter().enumerate().map(|(h, a)| w2.get(m, h) * a).sum::<f64>();
                want.set(m, col, v * xm + z.get(m, col));
            }
        }
        assert!(out.max_abs_diff(&want).unwrap() < 1e-12);
    }

    #[test]
    fn block_gradients() {
        let cfg = block_config(3);
        for mixing in [true, false] {
            let mut h = Harness {
                layer: MlpBlock::<f64>::init(&cfg, mixing, &mut Rng::new(20)).unwrap(),
                input: random(6, 8, 21),
                target: random(6, 8, 22),
            };
            let r = grad_check(&mut h, 1e-5, |h, back| {
                let y = h.layer.forward(&h.input, &mut Rng::new(0), false)?;
                let (l, g) = mse_loss(&y, &h.target)?;
                if back {
                    h.layer.backward(&g)?;
                }
                Ok(l)
            })
            .unwrap();
            assert!(r.max_relative_error < 1e-4, "mixing={mixing}: {r:?}");
            let target = h.target.clone();
            let err = input_grad_error(&h.input, |x, back| {
                let y = h.layer.forward(x, &mut Rng::new(0), false).unwrap();
                let (l, g) = mse_loss(&y, &target).unwrap();
                (l, back.then(|| h.layer.backward(&g).unwrap()))
            });
            assert!(err < 1e-4, "mixing={mixing}: input grad error {err}");
        }
    }
}
