//! Small differentiable-numerics kernel.
//!
//! Every op exposes a forward pass and a hand-written backward pass that
//! accumulates into [`ParamTensor::grad`]. There is no tape: callers keep
//! the forward caches they need and replay them in reverse.

pub mod checkpoint;
pub mod cosine;
pub mod dense;
pub mod gradcheck;
pub mod kernel;
pub mod lstm;
pub mod optim;
pub mod param;

pub use cosine::{cosine, cosine_backward, cosine_or_zero};
pub use dense::{Activation, Dense, DenseCache};
pub use kernel::{KernelBank, KernelForm};
pub use lstm::{LstmCache, LstmCell};
pub use optim::{Algorithm, Optimizer};
pub use param::ParamTensor;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(sigmoid(x))` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::INFINITY {
        // degenerate: all mass on the +inf entries
        let n = logits.iter().filter(|&&l| l == f64::INFINITY).count() as f64;
        return logits
            .iter()
            .map(|&l| if l == f64::INFINITY { 1.0 / n } else { 0.0 })
            .collect();
    }
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `log softmax(logits)[index]`.
pub fn log_softmax_at(logits: &[f64], index: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::INFINITY {
        return softmax(logits)[index].ln();
    }
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    logits[index] - lse
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
