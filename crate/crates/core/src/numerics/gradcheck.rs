//! Central-difference gradient checking in double precision.

use super::{Param, Parameterized};
use crate::{Error, Result};

/// Relative error below this magnitude is measured against the floor
/// instead, so gradients that are zero up to rounding do not blow up.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `<parameter path>[<flat index>]` of the worst entry.
    pub worst_param: String,
    pub analytic: f64,
    pub numeric: f64,
    pub entries_checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compare analytic gradients of every parameter entry against
/// `(f(θ+eps) − f(θ−eps)) / (2·eps)`.
///
/// `loss_fn(model, backward)` must evaluate the loss deterministically and,
/// when `backward` is true, accumulate parameter gradients (they are zeroed
/// before the call).
pub fn grad_check<M, F>(model: &mut M, eps: f64, mut loss_fn: F) -> Result<GradCheckReport>
where
    M: Parameterized<f64>,
    F: FnMut(&mut M, bool) -> Result<f64>,
{
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Config(format!("grad_check eps must be positive, got {eps}")));
    }
    model.zero_grads();
    let base = loss_fn(model, true)?;
    if !base.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {base} at the base point")));
    }

    let mut analytic: Vec<(String, Vec<f64>)> = Vec::new();
    model.visit_params(&mut |name, p: &Param<f64>| {
        analytic.push((name.to_string(), p.grad.as_slice().to_vec()));
    });

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_param: String::new(),
        analytic: 0.0,
        numeric: 0.0,
        entries_checked: 0,
    };

    for (pi, (name, grads)) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let up = perturbed_loss(model, pi, i, eps, &mut loss_fn)?;
            let down = perturbed_loss(model, pi, i, -eps, &mut loss_fn)?;
            let numeric = (up - down) / (2.0 * eps);
            let err = relative_error(a, numeric);
            report.entries_checked += 1;
            if err > report.max_relative_error || report.worst_param.is_empty() {
                report.max_relative_error = err;
                report.worst_param = format!("{name}[{i}]");
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    model.zero_grads();
    Ok(report)
}

fn perturbed_loss<M, F>(model: &mut M, target: usize, index: usize, delta: f64, loss_fn: &mut F) -> Result<f64>
where
    M: Parameterized<f64>,
    F: FnMut(&mut M, bool) -> Result<f64>,
{
    nudge(model, target, index, delta);
    let loss = loss_fn(model, false);
    nudge(model, target, index, -delta);
    let loss = loss?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite loss {loss} after perturbing parameter #{target}[{index}]"
        )));
    }
    Ok(loss)
}

fn nudge<M: Parameterized<f64>>(model: &mut M, target: usize, index: usize, delta: f64) {
    let mut k = 0;
    model.visit_params_mut(&mut |_, p| {
        if k == target {
            p.value.as_mut_slice()[index] += delta;
        }
        k += 1;
    });
}
