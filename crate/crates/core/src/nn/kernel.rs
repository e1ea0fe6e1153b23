//! RBF kernel pooling over a row of similarities.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sign convention of the kernel exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelForm {
    /// `exp(-(s - mu)^2 / (2 sigma^2))`.
    Gaussian,
    /// `exp(+(s - mu)^2 / (2 sigma^2))`, kept only for comparison runs.
    PositiveExponent,
}

impl Default for KernelForm {
    fn default() -> Self {
        if cfg!(feature = "printed-kernel") {
            KernelForm::PositiveExponent
        } else {
            KernelForm::Gaussian
        }
    }
}

/// Floor added before taking the log of a kernel feature.
pub const LOG_GUARD: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelBank {
    pub mus: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub form: KernelForm,
}

impl Default for KernelBank {
    /// Exact-match kernel (mu=1, sigma=1e-3) plus mu in {0.9, 0.7, ..., -0.9}
    /// with sigma=0.1: eleven kernels.
    fn default() -> Self {
        let mut mus = vec![1.0];
        let mut sigmas = vec![1e-3];
        for i in 0..10 {
            mus.push(0.9 - 0.2 * i as f64);
            sigmas.push(0.1);
        }
        Self {
            mus,
            sigmas,
            form: KernelForm::default(),
        }
    }
}

impl KernelBank {
    pub fn new(mus: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        let bank = Self {
            mus,
            sigmas,
            form: KernelForm::default(),
        };
        bank.validate()?;
        Ok(bank)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mus.is_empty() || self.mus.len() != self.sigmas.len() {
            return Err(Error::Shape(
                "kernel bank needs matching, non-empty mu and sigma lists".into(),
            ));
        }
        if self.sigmas.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("kernel sigma must be positive"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mus.is_empty()
    }

    fn sign(&self) -> f64 {
        match self.form {
            KernelForm::Gaussian => -1.0,
            KernelForm::PositiveExponent => 1.0,
        }
    }

    /// `K_h = sum_k exp(sign * (s_k - mu_h)^2 / (2 sigma_h^2))` for each kernel.
    pub fn pool(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        let sign = self.sign();
        Ok(self
            .mus
            .iter()
            .zip(&self.sigmas)
            .map(|(&mu, &sigma)| {
                let denom = 2.0 * sigma * sigma;
                row.iter()
                    .map(|&s| (sign * (s - mu).powi(2) / denom).exp())
                    .sum()
            })
            .collect())
    }

    /// Gradient w.r.t. the similarity row given `dL/dK`.
    pub fn pool_backward(&self, row: &[f64], dk: &[f64]) -> Vec<f64> {
        let sign = self.sign();
        let mut ds = vec![0.0; row.len()];
        for ((&mu, &sigma), &g) in self.mus.iter().zip(&self.sigmas).zip(dk) {
            if g == 0.0 {
                continue;
            }
            let denom = 2.0 * sigma * sigma;
            for (d, &s) in ds.iter_mut().zip(row) {
                let e = (sign * (s - mu).powi(2) / denom).exp();
                *d += g * e * sign * 2.0 * (s - mu) / denom;
            }
        }
        ds
    }

    /// Guarded log of pooled features: `ln(K_h + 1e-10)`.
    pub fn log_pool(&self, row: &[f64]) -> Result<Vec<f64>> {
        Ok(self.pool(row)?.into_iter().map(|k| (k + LOG_GUARD).ln()).collect())
    }

    /// Gradient of `log_pool` w.r.t. the row given `dL/dlogK`.
    pub fn log_pool_backward(&self, row: &[f64], dlog: &[f64]) -> Vec<f64> {
        let k = self.pool(row).expect("validated bank");
        let dk: Vec<f64> = dlog.iter().zip(&k).map(|(g, k)| g / (k + LOG_GUARD)).collect();
        self.pool_backward(row, &dk)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bank_shape() {
        let b = KernelBank::default();
        assert_eq!(b.len(), 11);
        assert_eq!(b.mus[0], 1.0);
        assert!((b.mus[10] + 0.9).abs() < 1e-12);
        assert_eq!(b.form, KernelForm::Gaussian);
    }

    #[test]
    fn pooling_at_the_mean_counts_entries() {
        let b = KernelBank::new(vec![0.3], vec![0.1]).unwrap();
        assert!((b.pool(&[0.3; 7]).unwrap()[0] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_tail_is_tiny() {
        let b = KernelBank::new(vec![0.0], vec![0.1]).unwrap();
        assert!(b.pool(&[0.6]).unwrap()[0] < 1e-7);
    }

    #[test]
    fn rejects_non_positive_sigma() {
        assert!(KernelBank::new(vec![0.0], vec![0.0]).is_err());
        assert!(KernelBank::new(vec![0.0], vec![-1.0]).is_err());
    }
}
