use super::{Matrix, Param, Parameterized, Real, Rng};
use crate::{Error, Result};

/// Affine map `y = W x + b` applied to every row of a batch.
#[derive(Debug, Clone)]
pub struct LinearLayer<T = f32> {
    /// `out x in`.
    pub weight: Param<T>,
    /// `1 x out`.
    pub bias: Param<T>,
    cache: Option<Matrix<T>>,
}

impl<T: Real> LinearLayer<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Param::new(Matrix::zeros(output, input)),
            bias: Param::new(Matrix::zeros(1, output)),
            cache: None,
        }
    }

    pub fn from_parts(weight: Matrix<T>, bias: Vec<T>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::Dimension(format!(
                "bias of length {} does not match weight {}x{}",
                bias.len(),
                weight.rows(),
                weight.cols()
            )));
        }
        let out = bias.len();
        Ok(Self {
            weight: Param::new(weight),
            bias: Param::new(Matrix::from_vec(1, out, bias)?),
            cache: None,
        })
    }

    /// Uniform(-a, a) weights with `a = 1/sqrt(fan_in)`; zero bias.
    pub fn init_uniform(input: usize, output: usize, rng: &mut Rng) -> Self {
        let mut layer = Self::zeros(input, output);
        let a = 1.0 / (input.max(1) as f64).sqrt();
        for w in layer.weight.value.as_mut_slice() {
            *w = T::from_f64(rng.uniform_range(-a, a));
        }
        layer
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.weight.value.cols()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn forward(&mut self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let out = self.apply(x)?;
        self.cache = Some(x.clone());
        Ok(out)
    }

    /// Forward without caching the input.
    pub fn apply(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "linear layer expects {} input columns, got a {}x{} input (weight is {}x{})",
                self.input_dim(),
                x.rows(),
                x.cols(),
                self.output_dim(),
                self.input_dim()
            )));
        }
        let (batch, out_dim) = (x.rows(), self.output_dim());
        let mut out = Matrix::zeros(batch, out_dim);
        let bias = self.bias.value.as_slice();
        for r in 0..batch {
            out.row_mut(r).copy_from_slice(bias);
        }
        T::gemm(
            batch,
            self.input_dim(),
            out_dim,
            T::ONE,
            x.as_slice(),
            false,
            self.weight.value.as_slice(),
            true,
            T::ONE,
            out.as_mut_slice(),
        );
        Ok(out)
    }

    /// Accumulate parameter gradients and return the gradient w.r.t. the input.
    pub fn backward(&mut self, grad_out: &Matrix<T>) -> Result<Matrix<T>> {
        self.accumulate(grad_out, true).map(|g| g.expect("input grad requested"))
    }

    /// Accumulate parameter gradients only; for layers that sit directly on data.
    pub fn backward_params(&mut self, grad_out: &Matrix<T>) -> Result<()> {
        self.accumulate(grad_out, false).map(|_| ())
    }

    fn accumulate(&mut self, grad_out: &Matrix<T>, want_input: bool) -> Result<Option<Matrix<T>>> {
        let x = self
            .cache
            .take()
            .ok_or_else(|| Error::State("linear backward called without a cached forward".into()))?;
        if grad_out.rows() != x.rows() || grad_out.cols() != self.output_dim() {
            return Err(Error::Dimension(format!(
                "linear backward: grad {}x{} does not match output {}x{}",
                grad_out.rows(),
                grad_out.cols(),
                x.rows(),
                self.output_dim()
            )));
        }
        let (batch, in_dim, out_dim) = (x.rows(), self.input_dim(), self.output_dim());
        // grad_weight += grad_out^T x
        T::gemm(
            out_dim,
            batch,
            in_dim,
            T::ONE,
            grad_out.as_slice(),
            true,
            x.as_slice(),
            false,
            T::ONE,
            self.weight.grad.as_mut_slice(),
        );
        for row in grad_out.row_iter() {
            for (g, &v) in self.bias.grad.as_mut_slice().iter_mut().zip(row) {
                *g += v;
            }
        }
        if !want_input {
            return Ok(None);
        }
        let mut grad_in = Matrix::zeros(batch, in_dim);
        T::gemm(
            batch,
            out_dim,
            in_dim,
            T::ONE,
            grad_out.as_slice(),
            false,
            self.weight.value.as_slice(),
            false,
            T::ZERO,
            grad_in.as_mut_slice(),
        );
        Ok(Some(grad_in))
    }
}

impl<T: Real> Parameterized<T> for LinearLayer<T> {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<T>)) {
        f("weight", &self.weight);
        f("bias", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::mse_loss;

    fn layer(w: &[[f64; 2]], b: &[f64]) -> LinearLayer<f64> {
        LinearLayer::from_parts(Matrix::from_rows(w).unwrap(), b.to_vec()).unwrap()
    }

    #[test]
    fn identity_forward() {
        let mut l = layer(&[[1.0, 0.0], [0.0, 1.0]], &[0.0, 0.0]);
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert_eq!(l.forward(&x).unwrap(), x);
    }

    #[test]
    fn hand_multiplied_forward() {
        // rows of x are e1, e2, so out rows are the weight columns plus bias
        let mut l = layer(&[[2.0, 3.0], [4.0, 5.0]], &[1.0, 1.0]);
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let y = l.forward(&x).unwrap();
        assert_eq!(y, Matrix::from_rows(&[[3.0, 5.0], [4.0, 6.0]]).unwrap());
    }

    #[test]
    fn empty_batch() {
        let mut l = layer(&[[2.0, 3.0], [4.0, 5.0]], &[1.0, 1.0]);
        let y = l.forward(&Matrix::zeros(0, 2)).unwrap();
        assert_eq!(y.shape(), (0, 2));
        let g = l.backward(&Matrix::zeros(0, 2)).unwrap();
        assert_eq!(g.shape(), (0, 2));
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let mut l = LinearLayer::<f32>::zeros(3, 2);
        let err = l.forward(&Matrix::zeros(4, 5)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("4x5") && msg.contains("2x3"), "{msg}");
    }

    #[test]
    fn backward_without_forward_is_state_error() {
        let mut l = LinearLayer::<f32>::zeros(3, 2);
        assert!(matches!(
            l.backward(&Matrix::zeros(1, 2)),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn zero_grad_out_gives_zero_everything() {
        let mut rng = Rng::new(3);
        let mut l = LinearLayer::<f64>::init_uniform(2, 3, &mut rng);
        l.forward(&Matrix::from_rows(&[[0.5, -1.0]]).unwrap()).unwrap();
        let g = l.backward(&Matrix::zeros(1, 3)).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
        assert!(l.weight.grad.as_slice().iter().all(|&v| v == 0.0));
        assert!(l.bias.grad.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_backward_passes_grad_through() {
        let mut l = layer(&[[1.0, 0.0], [0.0, 1.0]], &[0.0, 0.0]);
        l.forward(&Matrix::from_rows(&[[3.0, 4.0]]).unwrap()).unwrap();
        let g = Matrix::from_rows(&[[0.25, -2.0]]).unwrap();
        assert_eq!(l.backward(&g).unwrap(), g);
    }

    #[test]
    fn random_case_matches_central_differences() {
        // 3 samples, 2 -> 3 map, loss = mse(y, target)
        let mut rng = Rng::new(11);
        let mut l = LinearLayer::<f64>::init_uniform(2, 3, &mut rng);
        for b in l.bias.value.as_mut_slice() {
            *b = rng.uniform_range(-1.0, 1.0);
        }
        let x = Matrix::from_fn(3, 2, |_, _| rng.uniform_range(-1.0, 1.0));
        let target = Matrix::from_fn(3, 3, |_, _| rng.uniform_range(-1.0, 1.0));

        let y = l.forward(&x).unwrap();
        let (_, g) = mse_loss(&y, &target).unwrap();
        let gx = l.backward(&g).unwrap();

        let eps = 1e-5;
        let loss_of = |l: &LinearLayer<f64>, x: &Matrix<f64>| {
            mse_loss(&l.apply(x).unwrap(), &target).unwrap().0
        };
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-12);
        let mut worst: f64 = 0.0;
        for i in 0..l.weight.value.len() {
            let mut p = l.clone();
            p.weight.value.as_mut_slice()[i] += eps;
            let up = loss_of(&p, &x);
            p.weight.value.as_mut_slice()[i] -= 2.0 * eps;
            let down = loss_of(&p, &x);
            worst = worst.max(rel(l.weight.grad.as_slice()[i], (up - down) / (2.0 * eps)));
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.as_mut_slice()[i] += eps;
            let up = loss_of(&l, &xp);
            xp.as_mut_slice()[i] -= 2.0 * eps;
            let down = loss_of(&l, &xp);
            worst = worst.max(rel(gx.as_slice()[i], (up - down) / (2.0 * eps)));
        }
        assert!(worst < 1e-6, "worst relative error {worst}");
    }

    #[test]
    fn init_bound_for_fan_in_100() {
        let mut rng = Rng::new(5);
        let l = LinearLayer::<f32>::init_uniform(100, 50, &mut rng);
        assert!(l.weight.value.as_slice().iter().all(|w| w.abs() < 0.1));
        assert!(l.bias.value.as_slice().iter().all(|&b| b == 0.0));
    }
}
