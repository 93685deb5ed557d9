use super::{Matrix, Real, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone)]
enum Cached<T> {
    Empty,
    Identity,
    Mask(Matrix<T>),
}

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` during
/// training so inference needs no rescaling.
#[derive(Debug, Clone)]
pub struct Dropout<T = f32> {
    rate: f64,
    cache: Cached<T>,
}

impl<T: Real> Dropout<T> {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        Ok(Self {
            rate,
            cache: Cached::Empty,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn forward(&mut self, x: &Matrix<T>, rng: &mut Rng, training: bool) -> Matrix<T> {
        if !training || self.rate == 0.0 {
            self.cache = Cached::Identity;
            return x.clone();
        }
        let keep = T::from_f64(1.0 / (1.0 - self.rate));
        let mask = Matrix::from_fn(x.rows(), x.cols(), |_, _| {
            if rng.uniform() < self.rate {
                T::ZERO
            } else {
                keep
            }
        });
        let out = x.hadamard(&mask).expect("mask has the input's shape");
        self.cache = Cached::Mask(mask);
        out
    }

    pub fn backward(&mut self, grad: &Matrix<T>) -> Result<Matrix<T>> {
        match std::mem::replace(&mut self.cache, Cached::Empty) {
            Cached::Empty => Err(Error::State("dropout backward without forward".into())),
            Cached::Identity => Ok(grad.clone()),
            Cached::Mask(mask) => grad.hadamard(&mask),
        }
    }
}

/// Functional form of [`Dropout::forward`].
pub fn dropout<T: Real>(x: &Matrix<T>, rate: f64, rng: &mut Rng, training: bool) -> Result<Matrix<T>> {
    Ok(Dropout::new(rate)?.forward(x, rng, training))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_zero_is_identity() {
        let x = Matrix::<f32>::from_fn(4, 4, |r, c| (r + c) as f32);
        let mut rng = Rng::new(0);
        assert_eq!(dropout(&x, 0.0, &mut rng, true).unwrap(), x);
    }

    #[test]
    fn inference_is_bit_exact_identity() {
        let x = Matrix::<f32>::from_fn(4, 4, |r, c| (r as f32 - 1.3) * (c as f32 + 0.7));
        let mut rng = Rng::new(0);
        assert_eq!(dropout(&x, 0.9, &mut rng, false).unwrap(), x);
    }

    #[test]
    fn rate_one_rejected() {
        assert!(matches!(Dropout::<f32>::new(1.0), Err(Error::Config(_))));
        assert!(Dropout::<f32>::new(-0.1).is_err());
    }

    #[test]
    fn half_rate_preserves_mean() {
        let x = Matrix::<f64>::filled(1, 100_000, 1.0);
        let mut rng = Rng::new(42);
        let y = dropout(&x, 0.5, &mut rng, true).unwrap();
        let mean = y.sum() / y.len() as f64;
        assert!((0.97..=1.03).contains(&mean), "mean {mean}");
    }

    #[test]
    fn backward_reuses_mask() {
        let x = Matrix::<f64>::filled(3, 3, 2.0);
        let mut rng = Rng::new(1);
        let mut d = Dropout::new(0.5).unwrap();
        let y = d.forward(&x, &mut rng, true);
        let g = d.backward(&Matrix::filled(3, 3, 1.0)).unwrap();
        for (yv, gv) in y.as_slice().iter().zip(g.as_slice()) {
            assert_eq!(*yv, 2.0 * gv);
        }
    }
}
