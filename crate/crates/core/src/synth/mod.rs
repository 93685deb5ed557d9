//! Deterministic synthetic series with known structure.
//!
//! Each variable is a trend plus sinusoids with per-variable random phases,
//! optionally plus a mix of shared AR(1) latents (each variable may see them
//! with its own delay), plus gaussian noise.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::numerics::{Matrix, Rng};
use crate::{Error, Result};

const PHASE_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const LATENT_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub length: usize,
    pub variables: usize,
    pub periods: Vec<usize>,
    /// One amplitude per period.
    pub amplitudes: Vec<f64>,
    pub trend_slope: f64,
    pub noise_sigma: f64,
    /// `M x M` weights mixing the shared latents into each variable.
    pub coupling: Option<Matrix<f64>>,
    /// Per-variable delay applied to the mixed latents. Empty means none.
    pub lags: Vec<usize>,
    /// AR(1) coefficient of every latent; latents have unit stationary variance.
    pub latent_ar: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Sinusoids only.
    pub fn periodic(length: usize, variables: usize, periods: &[usize], seed: u64) -> Self {
        Self {
            length,
            variables,
            periods: periods.to_vec(),
            amplitudes: vec![1.0; periods.len()],
            trend_slope: 0.0,
            noise_sigma: 0.0,
            coupling: None,
            lags: Vec::new(),
            latent_ar: 0.9,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.length == 0 || self.variables == 0 {
            return bad("synthetic series needs length >= 1 and variables >= 1".into());
        }
        if let Some(p) = self.periods.iter().find(|&&p| p < 2) {
            return bad(format!("period {p} is below 2"));
        }
        if self.amplitudes.len() != self.periods.len() {
            return bad(format!(
                "{} amplitudes for {} periods",
                self.amplitudes.len(),
                self.periods.len()
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if let Some(c) = &self.coupling {
            if c.shape() != (self.variables, self.variables) {
                return bad(format!(
                    "coupling is {}x{}, expected {m}x{m}",
                    c.rows(),
                    c.cols(),
                    m = self.variables
                ));
            }
        }
        if !self.lags.is_empty() && self.lags.len() != self.variables {
            return bad(format!("{} lags for {} variables", self.lags.len(), self.variables));
        }
        if self.latent_ar.abs() >= 1.0 || self.latent_ar.is_nan() {
            return bad(format!("latent_ar must lie in (-1, 1), got {}", self.latent_ar));
        }
        Ok(())
    }
}

/// Generate a `length x M` series.
pub fn generate(spec: &SynthSpec) -> Result<Matrix<f64>> {
    spec.validate()?;
    let (n, m) = (spec.length, spec.variables);
    let mut out = Matrix::zeros(n, m);

    let mut phase_rng = Rng::stream(spec.seed, PHASE_STREAM);
    let phases: Vec<Vec<f64>> = (0..m)
        .map(|_| spec.periods.iter().map(|_| phase_rng.uniform_range(0.0, TAU)).collect())
        .collect();
    for t in 0..n {
        for (v, ph) in phases.iter().enumerate() {
            let mut x = spec.trend_slope * t as f64;
            for ((&p, &a), &phi) in spec.periods.iter().zip(&spec.amplitudes).zip(ph) {
                // reduce t mod p so the sinusoid is exactly periodic
                x += a * (TAU * (t % p) as f64 / p as f64 + phi).sin();
            }
            out.set(t, v, x);
        }
    }

    if let Some(w) = &spec.coupling {
        let max_lag = spec.lags.iter().copied().max().unwrap_or(0);
        let latents = ar_latents(n + max_lag, m, spec.latent_ar, spec.seed);
        for t in 0..n {
            for v in 0..m {
                let lag = spec.lags.get(v).copied().unwrap_or(0);
                let z = latents.row(t + max_lag - lag);
                let mixed: f64 = w.row(v).iter().zip(z).map(|(a, b)| a * b).sum();
                out.set(t, v, out.get(t, v) + mixed);
            }
        }
    }

    if spec.noise_sigma > 0.0 {
        let mut rng = Rng::stream(spec.seed, NOISE_STREAM);
        for x in out.as_mut_slice() {
            *x += spec.noise_sigma * rng.normal();
        }
    }
    Ok(out)
}

fn ar_latents(n: usize, k: usize, phi: f64, seed: u64) -> Matrix<f64> {
    let mut rng = Rng::stream(seed, LATENT_STREAM);
    let innovation = (1.0 - phi * phi).sqrt();
    let mut z = Matrix::zeros(n, k);
    let mut state: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
    for t in 0..n {
        for (j, s) in state.iter_mut().enumerate() {
            *s = phi * *s + innovation * rng.normal();
            z.set(t, j, *s);
        }
    }
    z
}

/// Column names used when writing synthetic series.
pub fn column_names(variables: usize) -> Vec<String> {
    (0..variables).map(|v| format!("x{v}")).collect()
}

/// Write `series` in the dataset CSV layout (integer step as timestamp).
pub fn write_csv(path: &Path, series: &Matrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::from(e).context(path.display()))?;
    let mut header = vec!["step".to_string()];
    header.extend(column_names(series.cols()));
    w.write_record(&header)?;
    for (t, row) in series.row_iter().enumerate() {
        let mut rec = vec![t.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_period_is_exactly_periodic() {
        let s = generate(&SynthSpec::periodic(240, 3, &[24], 5)).unwrap();
        for t in 0..216 {
            for v in 0..3 {
                assert_eq!(s.get(t, v), s.get(t + 24, v));
            }
        }
    }

    #[test]
    fn noise_variance_matches_sigma() {
        let mut spec = SynthSpec::periodic(100_000, 1, &[], 9);
        spec.noise_sigma = 0.5;
        let s = generate(&spec).unwrap();
        let n = s.len() as f64;
        let mean = s.sum() / n;
        let var = s.as_slice().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!((var / 0.25 - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn same_seed_bit_identical() {
        let mut spec = SynthSpec::periodic(500, 2, &[24, 7], 3);
        spec.noise_sigma = 0.3;
        spec.coupling = Some(Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap());
        spec.lags = vec![0, 4];
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        spec.seed = 4;
        let other = generate(&spec).unwrap();
        spec.seed = 3;
        assert_ne!(generate(&spec).unwrap(), other);
    }

    #[test]
    fn identity_coupling_gives_independent_latents() {
        let mut spec = SynthSpec::periodic(20_000, 2, &[], 1);
        spec.coupling = Some(Matrix::identity(2));
        let s = generate(&spec).unwrap();
        let n = s.rows() as f64;
        let cov: f64 = s.row_iter().map(|r| r[0] * r[1]).sum::<f64>() / n;
        assert!(cov.abs() < 0.1, "cross covariance {cov}");
        let var0: f64 = s.row_iter().map(|r| r[0] * r[0]).sum::<f64>() / n;
        assert!((var0 - 1.0).abs() < 0.15, "latent variance {var0}");
    }

    #[test]
    fn lag_delays_the_shared_latent() {
        let mut spec = SynthSpec::periodic(100, 2, &[], 2);
        spec.coupling = Some(Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0]]).unwrap());
        spec.lags = vec![0, 6];
        let s = generate(&spec).unwrap();
        for t in 6..100 {
            assert_eq!(s.get(t, 1), s.get(t - 6, 0));
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = SynthSpec::periodic(10, 1, &[1], 0);
        assert!(spec.validate().is_err());
        spec.periods = vec![4];
        spec.noise_sigma = -1.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = generate(&SynthSpec::periodic(30, 2, &[6], 0)).unwrap();
        write_csv(&path, &s).unwrap();
        let raw = crate::data::read_csv(&path, None).unwrap();
        assert_eq!(raw.columns, column_names(2));
        assert_eq!(raw.values, s);
    }
}
