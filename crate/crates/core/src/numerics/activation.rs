use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Matrix, Real};
use crate::{Error, Result};

/// Elementwise nonlinearity used inside the MLP sub-layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    /// GELU, tanh approximation.
    #[default]
    Gelu,
    Relu,
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActivationKind::Gelu => "gelu",
            ActivationKind::Relu => "relu",
        })
    }
}

impl FromStr for ActivationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gelu" => Ok(ActivationKind::Gelu),
            "relu" => Ok(ActivationKind::Relu),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

impl ActivationKind {
    #[inline]
    pub fn eval<T: Real>(self, x: T) -> T {
        match self {
            ActivationKind::Gelu => {
                let c = T::from_f64(SQRT_2_OVER_PI);
                let a = T::from_f64(GELU_CUBIC);
                let half = T::from_f64(0.5);
                half * x * (T::ONE + (c * (x + a * x * x * x)).tanh())
            }
            ActivationKind::Relu => {
                if x > T::ZERO {
                    x
                } else {
                    T::ZERO
                }
            }
        }
    }

    #[inline]
    pub fn derivative<T: Real>(self, x: T) -> T {
        match self {
            ActivationKind::Gelu => {
                let c = T::from_f64(SQRT_2_OVER_PI);
                let a = T::from_f64(GELU_CUBIC);
                let half = T::from_f64(0.5);
                let t = (c * (x + a * x * x * x)).tanh();
                let inner = c * (T::ONE + T::from_f64(3.0 * GELU_CUBIC) * x * x);
                half * (T::ONE + t) + half * x * (T::ONE - t * t) * inner
            }
            ActivationKind::Relu => {
                if x > T::ZERO {
                    T::ONE
                } else {
                    T::ZERO
                }
            }
        }
    }
}

/// Activation layer caching its input for the backward pass.
#[derive(Debug, Clone)]
pub struct Activation<T = f32> {
    pub kind: ActivationKind,
    cache: Option<Matrix<T>>,
}

impl<T: Real> Activation<T> {
    pub fn new(kind: ActivationKind) -> Self {
        Self { kind, cache: None }
    }

    pub fn forward(&mut self, x: &Matrix<T>) -> Matrix<T> {
        let kind = self.kind;
        let out = x.map(|v| kind.eval(v));
        self.cache = Some(x.clone());
        out
    }

    pub fn backward(&mut self, grad: &Matrix<T>) -> Result<Matrix<T>> {
        let x = self
            .cache
            .take()
            .ok_or_else(|| Error::State("activation backward without forward".into()))?;
        let kind = self.kind;
        grad.zip_with(&x, "activation backward", |g, v| g * kind.derivative(v))
    }
}
