//! Interaction-based ranker: word-by-word cosine matrix, RBF kernel
//! pooling, log-sum over query words and a linear output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{pair_loss, pair_loss_grad, SupInputs};
use crate::nn::{cosine_backward, cosine_or_zero, dot, KernelBank, ParamTensor};
use crate::unsup::ScoreMatrix;
use crate::Result;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionParams {
    pub kernels: KernelBank,
}

/// `phi = sum_i log K(S_i)` with `S_ik = cos(q_i, c_k)`.
/// Zero-norm word vectors give similarity 0.
pub fn match_features(qv: &[&[f64]], cv: &[&[f64]], bank: &KernelBank) -> Result<Vec<f64>> {
    let mut phi = vec![0.0; bank.len()];
    for q in qv {
        let row: Vec<f64> = cv.iter().map(|c| cosine_or_zero(q, c)).collect();
        for (p, v) in phi.iter_mut().zip(bank.log_pool(&row)?) {
            *p += v;
        }
    }
    Ok(phi)
}

/// Gradients of `dphi · phi` w.r.t. the query and candidate word vectors.
pub fn match_features_backward(qv: &[&[f64]], cv: &[&[f64]], bank: &KernelBank, dphi: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut dq: Vec<Vec<f64>> = qv.iter().map(|q| vec![0.0; q.len()]).collect();
    let mut dc: Vec<Vec<f64>> = cv.iter().map(|c| vec![0.0; c.len()]).collect();
    for (i, q) in qv.iter().enumerate() {
        let row: Vec<f64> = cv.iter().map(|c| cosine_or_zero(q, c)).collect();
        let ds = bank.log_pool_backward(&row, dphi);
        for (k, c) in cv.iter().enumerate() {
            let (gq, gc) = cosine_backward(q, c, ds[k]);
            crate::nn::axpy(1.0, &gq, &mut dq[i]);
            crate::nn::axpy(1.0, &gc, &mut dc[k]);
        }
    }
    (dq, dc)
}

/// Multiplier on the match features before the linear output. Empty kernels
/// contribute about -23 per query word, so unscaled features are in the
/// hundreds and a unit-step optimizer overshoots.
pub const FEATURE_SCALE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct InteractionModel {
    pub kernels: KernelBank,
    pub weight: ParamTensor,
    pub bias: ParamTensor,
}

impl InteractionModel {
    pub fn new(p: &InteractionParams, seed: u64) -> Result<Self> {
        p.kernels.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            kernels: p.kernels.clone(),
            weight: ParamTensor::uniform("int.w", &[p.kernels.len()], 0.01, &mut rng),
            bias: ParamTensor::zeros("int.b", &[1]),
        })
    }

    fn features<'a>(&self, all: &'a [f64], nc: usize, q: usize, c: usize) -> &'a [f64] {
        let h = self.kernels.len();
        let at = (q * nc + c) * h;
        &all[at..at + h]
    }

    pub fn score_features(&self, phi: &[f64]) -> f64 {
        FEATURE_SCALE * dot(&self.weight.values, phi) + self.bias.values[0]
    }

    pub fn score_pair(&self, inputs: &SupInputs, q: usize, c: usize) -> Result<f64> {
        let all = inputs.kernel_features(&self.kernels)?;
        Ok(self.score_features(self.features(&all, inputs.corpus.num_candidates(), q, c)))
    }

    pub fn score_matrix(&self, name: &str, inputs: &SupInputs) -> Result<ScoreMatrix> {
        let all = inputs.kernel_features(&self.kernels)?;
        let nc = inputs.corpus.num_candidates();
        ScoreMatrix::from_fn(name, &inputs.corpus, |q, c| Ok(self.score_features(self.features(&all, nc, q, c))))
    }

    pub fn accumulate(&mut self, inputs: &SupInputs, pairs: &[(usize, usize)], targets: &[f64]) -> Result<f64> {
        let all = inputs.kernel_features(&self.kernels)?;
        let nc = inputs.corpus.num_candidates();
        let mut loss = 0.0;
        for (&(q, c), &t) in pairs.iter().zip(targets) {
            let phi = self.features(&all, nc, q, c);
            let r = self.score_features(phi);
            loss += pair_loss(r, t);
            let g = pair_loss_grad(r, t);
            crate::nn::axpy(g * FEATURE_SCALE, phi, &mut self.weight.grad);
            self.bias.grad[0] += g;
        }
        Ok(loss)
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_relative_error, STEP};
    use rand::Rng;

    fn vecs(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn exact_match_feature_is_maximal_for_identical_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bank = KernelBank::default();
        let q = vecs(&mut rng, 4, 6);
        let qr: Vec<&[f64]> = q.iter().map(Vec::as_slice).collect();
        let same = match_features(&qr, &qr, &bank).unwrap();
        for _ in 0..5 {
            let other = vecs(&mut rng, 4, 6);
            let or: Vec<&[f64]> = other.iter().map(Vec::as_slice).collect();
            assert!(same[0] >= match_features(&qr, &or, &bank).unwrap()[0]);
        }
    }

    #[test]
    fn scaling_a_word_vector_leaves_features_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bank = KernelBank::default();
        let q = vecs(&mut rng, 3, 5);
        let c = vecs(&mut rng, 4, 5);
        let mut c2 = c.clone();
        c2[1].iter_mut().for_each(|v| *v *= 2.0);
        let qr: Vec<&[f64]> = q.iter().map(Vec::as_slice).collect();
        let a = match_features(&qr, &c.iter().map(Vec::as_slice).collect::<Vec<_>>(), &bank).unwrap();
        let b = match_features(&qr, &c2.iter().map(Vec::as_slice).collect::<Vec<_>>(), &bank).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn word_vector_gradient_matches_finite_differences() {
        let bank = KernelBank::default();
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (nq, nc, d) = (3, 4, 5);
            let q = vecs(&mut rng, nq, d);
            let c = vecs(&mut rng, nc, d);
            let w: Vec<f64> = (0..bank.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let qr: Vec<&[f64]> = q.iter().map(Vec::as_slice).collect();
            let cr: Vec<&[f64]> = c.iter().map(Vec::as_slice).collect();
            let (dq, dc) = match_features_backward(&qr, &cr, &bank, &w);
            let flat: Vec<f64> = q.iter().chain(&c).flatten().copied().collect();
            let analytic: Vec<f64> = dq.iter().chain(&dc).flatten().copied().collect();
            let f = |x: &[f64]| {
                let rows: Vec<&[f64]> = x.chunks(d).collect();
                let phi = match_features(&rows[..nq], &rows[nq..], &bank).unwrap();
                dot(&w, &phi)
            };
            let err = max_relative_error(f, &flat, &analytic, STEP);
            assert!(err < 1e-3, "seed {seed}: {err}");
        }
    }
}
