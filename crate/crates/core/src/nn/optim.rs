use serde::{Deserialize, Serialize};

use super::ParamTensor;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sgd,
    Adam,
}

/// Minimising optimizer over an ordered list of parameter tensors. The
/// moment buffers are bound to that order on the first step.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    pub algorithm: Algorithm,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn sgd(lr: f64) -> Self {
        Self::new(Algorithm::Sgd, lr)
    }

    pub fn adam(lr: f64) -> Self {
        Self::new(Algorithm::Adam, lr)
    }

    pub fn new(algorithm: Algorithm, lr: f64) -> Self {
        Self {
            algorithm,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Apply one update using the accumulated gradients, then zero them.
    pub fn step(&mut self, params: &mut [&mut ParamTensor]) -> Result<()> {
        for p in params.iter() {
            if let Some(i) = p.grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("{}[{i}] gradient", p.name)));
            }
        }
        match self.algorithm {
            Algorithm::Sgd => {
                for p in params.iter_mut() {
                    for (v, g) in p.values.iter_mut().zip(&p.grad) {
                        *v -= self.lr * g;
                    }
                }
            }
            Algorithm::Adam => {
                if self.m.is_empty() {
                    self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
                    self.v = self.m.clone();
                }
                if self.m.len() != params.len()
                    || self.m.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len())
                {
                    return Err(Error::Shape("optimizer state does not match parameters".into()));
                }
                self.t += 1;
                let bc1 = 1.0 - self.beta1.powi(self.t as i32);
                let bc2 = 1.0 - self.beta2.powi(self.t as i32);
                for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
                    for k in 0..p.values.len() {
                        let g = p.grad[k];
                        m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g;
                        v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g * g;
                        let mhat = m[k] / bc1;
                        let vhat = v[k] / bc2;
                        p.values[k] -= self.lr * mhat / (vhat.sqrt() + self.eps);
                    }
                }
            }
        }
        for p in params.iter_mut() {
            if let Some(i) = p.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{}[{i}]", p.name)));
            }
            p.zero_grad();
        }
        Ok(())
    }
}
