//! Dense numerics: a row-major matrix, paired forward/backward layers,
//! parameter storage and a finite-difference gradient checker.

mod activation;
mod dropout;
mod gradcheck;
mod linear;
mod loss;
mod matrix;
mod param;
mod pool;
mod real;
mod rng;

pub use activation::{Activation, ActivationKind};
pub use dropout::{dropout, Dropout};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, REL_ERROR_FLOOR};
pub use linear::LinearLayer;
pub use loss::{mae, mse_loss};
pub use matrix::Matrix;
pub use param::{Param, Parameterized};
pub use pool::{avg_pool_rows, avg_pool_rows_backward, avgpool1d_same, check_pool_kernel};
pub use real::Real;
pub use rng::Rng;
