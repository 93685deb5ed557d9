//! PatchMLP long-term forecasting: multi-scale patch embedding, latent
//! moving-average decomposition and intra/inter-variable MLP mixing, with the
//! data pipeline, optimizer and experiment commands around it.

pub mod data;
pub mod error;
pub mod experiment;
pub mod model;
pub mod numerics;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use numerics::{Matrix, Real, Rng};
