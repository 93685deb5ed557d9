use crate::numerics::{Parameterized, Real};
use crate::{Error, Result};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter in visit order.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    /// Steps taken so far.
    pub t: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One Adam update with bias correction; gradients are zeroed afterwards.
///
/// A non-finite gradient aborts before any parameter is touched.
pub fn adam_step<T: Real, P: Parameterized<T> + ?Sized>(
    model: &mut P,
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    let mut bad = None;
    model.visit_params(&mut |name, p| {
        if bad.is_none() && !p.grad.all_finite() {
            bad = Some(name.to_string());
        }
    });
    if let Some(name) = bad {
        return Err(Error::Numeric(format!("non-finite gradient in {name}")));
    }

    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    let mut idx = 0;
    let AdamState { m, v, .. } = state;
    model.visit_params_mut(&mut |_, p| {
        if m.len() <= idx {
            m.push(vec![0.0; p.value.len()]);
            v.push(vec![0.0; p.value.len()]);
        }
        let (m, v) = (&mut m[idx], &mut v[idx]);
        let grads = p.grad.as_slice().to_vec();
        for (i, (w, g)) in p.value.as_mut_slice().iter_mut().zip(grads).enumerate() {
            let g = g.to_f64();
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
            let step = config.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + config.eps);
            *w = T::from_f64(w.to_f64() - step);
        }
        p.zero_grad();
        idx += 1;
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Matrix, Param};

    struct Scalar(Param<f64>);

    impl Parameterized<f64> for Scalar {
        fn visit_params(&self, f: &mut dyn FnMut(&str, &Param<f64>)) {
            f("theta", &self.0)
        }
        fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<f64>)) {
            f("theta", &mut self.0)
        }
    }

    fn scalar(v: f64) -> Scalar {
        Scalar(Param::new(Matrix::filled(1, 1, v)))
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = scalar(0.7);
        let mut state = AdamState::new();
        for _ in 0..5 {
            adam_step(&mut s, &mut state, &AdamConfig::default()).unwrap();
        }
        assert_eq!(s.0.value.get(0, 0), 0.7);
    }

    fn run_quadratic() -> Vec<f64> {
        let mut s = scalar(1.0);
        let mut state = AdamState::new();
        let cfg = AdamConfig { lr: 0.1, ..Default::default() };
        let mut path = vec![1.0];
        for _ in 0..20 {
            let th = s.0.value.get(0, 0);
            s.0.grad.set(0, 0, 2.0 * th);
            adam_step(&mut s, &mut state, &cfg).unwrap();
            assert_eq!(s.0.grad.get(0, 0), 0.0);
            path.push(s.0.value.get(0, 0));
        }
        path
    }

    #[test]
    fn quadratic_matches_scalar_simulation() {
        // scalar simulation of the same recurrence
        let (mut th, mut m, mut v) = (1.0f64, 0.0, 0.0);
        let mut want = vec![1.0];
        for t in 1..=20 {
            let g = 2.0 * th;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            th -= 0.1 * (m / (1.0 - 0.9f64.powi(t))) / ((v / (1.0 - 0.999f64.powi(t))).sqrt() + 1e-8);
            want.push(th);
        }
        let path = run_quadratic();
        for (a, b) in path.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        // |theta| shrinks until momentum carries it through zero (step 12)
        let cross = path.iter().position(|v| *v < 0.0).unwrap();
        assert_eq!(cross, 12);
        for w in path[..cross].windows(2) {
            assert!(w[1].abs() < w[0].abs(), "{path:?}");
        }
        assert!(path[20].abs() < 0.3);
    }

    #[test]
    fn deterministic() {
        assert_eq!(run_quadratic(), run_quadratic());
    }

    #[test]
    fn non_finite_gradient_named() {
        let mut s = scalar(1.0);
        s.0.grad.set(0, 0, f64::NAN);
        let err = adam_step(&mut s, &mut AdamState::new(), &AdamConfig::default()).unwrap_err();
        assert!(matches!(&err, Error::Numeric(m) if m.contains("theta")));
        assert_eq!(s.0.value.get(0, 0), 1.0);
    }
}
