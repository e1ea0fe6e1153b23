//! The three-step LSTM policy over pipeline configurations.
//!
//! Step 1 samples one keep/drop indicator per unsupervised model from a
//! 2-way softmax of `f(h1 ⊙ w_i)`; step 2 samples a k category from
//! `softmax(g(h2))`; step 3 samples supervised-model indicators from
//! `q(h3 ⊙ u_i)`. The step inputs are a learned `x1`, the sum of the
//! selected `w_i`, and the selected `z_t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{softmax, Activation, Algorithm, Dense, DenseCache, LstmCache, LstmCell, Optimizer, ParamTensor};
use crate::{Error, Result};

/// Extra draws allowed when a mask step samples no model at all.
pub const MAX_RESAMPLES: usize = 10;

pub const DEFAULT_INIT_SCALE: f64 = 0.5;

/// One concrete pipeline.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub unsup: Vec<bool>,
    pub k_index: usize,
    pub k: usize,
    pub sup: Vec<bool>,
}

impl Configuration {
    pub fn validate(&self, n_unsup: usize, k_values: &[usize], n_sup: usize) -> Result<()> {
        if self.unsup.len() != n_unsup || self.sup.len() != n_sup || self.k_index >= k_values.len() {
            return Err(Error::Shape(format!(
                "configuration ({} unsupervised, k index {}, {} supervised) does not fit a {n_unsup}/{}/{n_sup} search space",
                self.unsup.len(),
                self.k_index,
                self.sup.len(),
                k_values.len()
            )));
        }
        if !self.unsup.contains(&true) || !self.sup.contains(&true) {
            return Err(Error::invalid("configuration selects no model in a step"));
        }
        if self.k != k_values[self.k_index] {
            return Err(Error::invalid("k does not match its category"));
        }
        Ok(())
    }

    pub fn unsup_indicator(&self) -> Vec<u8> {
        self.unsup.iter().map(|&b| b as u8).collect()
    }

    pub fn sup_indicator(&self) -> Vec<u8> {
        self.sup.iter().map(|&b| b as u8).collect()
    }
}

/// Steps whose choice is fixed rather than sampled.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Clamp {
    pub unsup: Option<Vec<bool>>,
    pub k_index: Option<usize>,
    pub sup: Option<Vec<bool>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerParams {
    pub lstm: LstmCell,
    pub x1: ParamTensor,
    /// `[n_unsup, hidden]`
    pub w: ParamTensor,
    /// `[tau, hidden]`
    pub z: ParamTensor,
    /// `[n_sup, hidden]`
    pub u: ParamTensor,
    pub f: Dense,
    pub g: Dense,
    pub q: Dense,
    pub k_values: Vec<usize>,
    pub clamp: Clamp,
}

struct Trace {
    cache1: LstmCache,
    h1: Vec<f64>,
    heads1: Vec<DenseCache>,
    cache2: LstmCache,
    head2: DenseCache,
    cache3: LstmCache,
    h3: Vec<f64>,
    heads3: Vec<DenseCache>,
}

/// A sampled configuration with its bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub config: Configuration,
    pub log_prob: f64,
    /// A mask step that fell back to its most likely entry.
    pub forced: bool,
}

fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn check_logits(logits: &[f64], what: &str) -> Result<()> {
    if logits.iter().any(|l| l.is_nan()) {
        return Err(Error::NonFinite(format!("{what} logits")));
    }
    Ok(())
}

/// `ln p[index]`, exact for degenerate (infinite-logit) heads.
fn log_prob_at(logits: &[f64], index: usize) -> f64 {
    crate::nn::log_softmax_at(logits, index)
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

/// `d/dlogits` of `coef_lp * ln p[index] + coef_h * H(p)`.
fn head_grad(logits: &[f64], index: Option<usize>, coef_lp: f64, coef_h: f64) -> Vec<f64> {
    let p = softmax(logits);
    let h = entropy(&p);
    p.iter()
        .enumerate()
        .map(|(j, &pj)| {
            let mut g = 0.0;
            if let Some(i) = index {
                g += coef_lp * (if i == j { 1.0 } else { 0.0 } - pj);
            }
            if coef_h != 0.0 && pj > 0.0 {
                g -= coef_h * pj * (pj.ln() + h);
            }
            g
        })
        .collect()
}

impl ControllerParams {
    pub fn new(n_unsup: usize, k_values: Vec<usize>, n_sup: usize, hidden: usize, seed: u64) -> Result<Self> {
        Self::with_init_scale(n_unsup, k_values, n_sup, hidden, seed, DEFAULT_INIT_SCALE)
    }

    /// Parameters drawn uniformly from `[-s, s]`.
    pub fn with_init_scale(n_unsup: usize, k_values: Vec<usize>, n_sup: usize, hidden: usize, seed: u64, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::invalid("controller init scale must be positive"));
        }
        if n_unsup == 0 || n_sup == 0 || k_values.is_empty() || hidden == 0 {
            return Err(Error::invalid("controller needs non-empty registries, K_VALUES and hidden size"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tau = k_values.len();
        Ok(Self {
            lstm: LstmCell::new("ctrl.lstm", hidden, hidden, s, &mut rng),
            x1: ParamTensor::uniform("ctrl.x1", &[hidden], s, &mut rng),
            w: ParamTensor::uniform("ctrl.w", &[n_unsup, hidden], s, &mut rng),
            z: ParamTensor::uniform("ctrl.z", &[tau, hidden], s, &mut rng),
            u: ParamTensor::uniform("ctrl.u", &[n_sup, hidden], s, &mut rng),
            f: Dense::new("ctrl.f", hidden, 2, Activation::Identity, s, &mut rng),
            g: Dense::new("ctrl.g", hidden, tau, Activation::Identity, s, &mut rng),
            q: Dense::new("ctrl.q", hidden, 2, Activation::Identity, s, &mut rng),
            k_values,
            clamp: Clamp::default(),
        })
    }

    pub fn with_clamp(mut self, clamp: Clamp) -> Result<Self> {
        if let Some(m) = &clamp.unsup {
            if m.len() != self.n_unsup() || !m.contains(&true) {
                return Err(Error::invalid("clamped unsupervised mask is invalid"));
            }
        }
        if let Some(t) = clamp.k_index {
            if t >= self.k_values.len() {
                return Err(Error::invalid(format!("clamped k index {t} is out of range")));
            }
        }
        if let Some(m) = &clamp.sup {
            if m.len() != self.n_sup() || !m.contains(&true) {
                return Err(Error::invalid("clamped supervised mask is invalid"));
            }
        }
        self.clamp = clamp;
        Ok(self)
    }

    pub fn hidden(&self) -> usize {
        self.lstm.hidden()
    }

    pub fn n_unsup(&self) -> usize {
        self.w.shape[0]
    }

    pub fn n_sup(&self) -> usize {
        self.u.shape[0]
    }

    pub fn tau(&self) -> usize {
        self.k_values.len()
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut v: Vec<&ParamTensor> = self.lstm.params().into_iter().collect();
        v.extend([&self.x1, &self.w, &self.z, &self.u]);
        v.extend(self.f.params());
        v.extend(self.g.params());
        v.extend(self.q.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut v: Vec<&mut ParamTensor> = self.lstm.params_mut().into_iter().collect();
        v.extend([&mut self.x1, &mut self.w, &mut self.z, &mut self.u]);
        v.extend(self.f.params_mut());
        v.extend(self.g.params_mut());
        v.extend(self.q.params_mut());
        v
    }

    fn binary_heads(head: &Dense, h: &[f64], emb: &ParamTensor, what: &str) -> Result<Vec<DenseCache>> {
        (0..emb.shape[0])
            .map(|i| {
                let c = head.forward(&hadamard(h, emb.row(i)))?;
                check_logits(&c.output, what)?;
                Ok(c)
            })
            .collect()
    }

    fn step1(&self) -> Result<(Vec<f64>, Vec<f64>, LstmCache, Vec<DenseCache>)> {
        let d = self.hidden();
        let (h1, c1, cache1) = self.lstm.forward(&self.x1.values, &vec![0.0; d], &vec![0.0; d])?;
        let heads1 = Self::binary_heads(&self.f, &h1, &self.w, "step-1")?;
        Ok((h1, c1, cache1, heads1))
    }

    fn x2(&self, mask: &[bool]) -> Vec<f64> {
        let mut x = vec![0.0; self.hidden()];
        for (i, _) in mask.iter().enumerate().filter(|(_, &on)| on) {
            crate::nn::axpy(1.0, self.w.row(i), &mut x);
        }
        x
    }

    fn step2(&self, mask: &[bool], h1: &[f64], c1: &[f64]) -> Result<(Vec<f64>, Vec<f64>, LstmCache, DenseCache)> {
        let (h2, c2, cache2) = self.lstm.forward(&self.x2(mask), h1, c1)?;
        let head2 = self.g.forward(&h2)?;
        check_logits(&head2.output, "step-2")?;
        Ok((h2, c2, cache2, head2))
    }

    fn step3(&self, k_index: usize, h2: &[f64], c2: &[f64]) -> Result<(Vec<f64>, LstmCache, Vec<DenseCache>)> {
        let (h3, _, cache3) = self.lstm.forward(self.z.row(k_index), h2, c2)?;
        let heads3 = Self::binary_heads(&self.q, &h3, &self.u, "step-3")?;
        Ok((h3, cache3, heads3))
    }

    fn trace(&self, config: &Configuration) -> Result<Trace> {
        config.validate(self.n_unsup(), &self.k_values, self.n_sup())?;
        let (h1, c1, cache1, heads1) = self.step1()?;
        let (h2, c2, cache2, head2) = self.step2(&config.unsup, &h1, &c1)?;
        let (h3, cache3, heads3) = self.step3(config.k_index, &h2, &c2)?;
        Ok(Trace {
            cache1,
            h1,
            heads1,
            cache2,
            head2,
            cache3,
            h3,
            heads3,
        })
    }

    fn log_prob_of(&self, t: &Trace, config: &Configuration) -> f64 {
        let mut lp = 0.0;
        if self.clamp.unsup.is_none() {
            for (c, &on) in t.heads1.iter().zip(&config.unsup) {
                lp += log_prob_at(&c.output, on as usize);
            }
        }
        if self.clamp.k_index.is_none() {
            lp += log_prob_at(&t.head2.output, config.k_index);
        }
        if self.clamp.sup.is_none() {
            for (c, &on) in t.heads3.iter().zip(&config.sup) {
                lp += log_prob_at(&c.output, on as usize);
            }
        }
        lp
    }

    /// Summed entropy of the sampled (non-clamped) step distributions along
    /// `config`'s path.
    pub fn entropy(&self, config: &Configuration) -> Result<f64> {
        let t = self.trace(config)?;
        let mut h = 0.0;
        if self.clamp.unsup.is_none() {
            h += t.heads1.iter().map(|c| entropy(&softmax(&c.output))).sum::<f64>();
        }
        if self.clamp.k_index.is_none() {
            h += entropy(&softmax(&t.head2.output));
        }
        if self.clamp.sup.is_none() {
            h += t.heads3.iter().map(|c| entropy(&softmax(&c.output))).sum::<f64>();
        }
        Ok(h)
    }

    /// `Σ ln P(indicator)` over every sampled choice of `config`.
    pub fn action_log_prob(&self, config: &Configuration) -> Result<f64> {
        let t = self.trace(config)?;
        Ok(self.log_prob_of(&t, config))
    }

    /// Accumulate `coef_lp * ∇ log π(config) + coef_h * ∇ H` into the
    /// parameter gradients; returns `log π(config)`.
    pub fn accumulate_grad(&mut self, config: &Configuration, coef_lp: f64, coef_h: f64) -> Result<f64> {
        let t = self.trace(config)?;
        let lp = self.log_prob_of(&t, config);
        let d = self.hidden();

        // step 3
        let mut dh3 = vec![0.0; d];
        if self.clamp.sup.is_none() {
            for (i, c) in t.heads3.iter().enumerate() {
                let dl = head_grad(&c.output, Some(config.sup[i] as usize), coef_lp, coef_h);
                let dx = self.q.backward(c, &dl);
                for k in 0..d {
                    dh3[k] += dx[k] * self.u.values[i * d + k];
                    self.u.grad[i * d + k] += dx[k] * t.h3[k];
                }
            }
        }
        let (dx3, dh2_from3, dc2) = self.lstm.backward(&t.cache3, &dh3, &vec![0.0; d]);
        crate::nn::axpy(1.0, &dx3, self.z.grad_row_mut(config.k_index));

        // step 2
        let mut dh2 = dh2_from3;
        if self.clamp.k_index.is_none() {
            let dl = head_grad(&t.head2.output, Some(config.k_index), coef_lp, coef_h);
            let dx = self.g.backward(&t.head2, &dl);
            crate::nn::axpy(1.0, &dx, &mut dh2);
        }
        let (dx2, dh1_from2, dc1) = self.lstm.backward(&t.cache2, &dh2, &dc2);
        for (i, _) in config.unsup.iter().enumerate().filter(|(_, &on)| on) {
            crate::nn::axpy(1.0, &dx2, self.w.grad_row_mut(i));
        }

        // step 1
        let mut dh1 = dh1_from2;
        if self.clamp.unsup.is_none() {
            for (i, c) in t.heads1.iter().enumerate() {
                let dl = head_grad(&c.output, Some(config.unsup[i] as usize), coef_lp, coef_h);
                let dx = self.f.backward(c, &dl);
                for k in 0..d {
                    dh1[k] += dx[k] * self.w.values[i * d + k];
                    self.w.grad[i * d + k] += dx[k] * t.h1[k];
                }
            }
        }
        let (dx1, _, _) = self.lstm.backward(&t.cache1, &dh1, &dc1);
        crate::nn::axpy(1.0, &dx1, &mut self.x1.grad);
        Ok(lp)
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(ParamTensor::zero_grad);
    }

    /// Select probability of each binary head.
    fn select_probs(heads: &[DenseCache]) -> Vec<f64> {
        heads.iter().map(|c| softmax(&c.output)[1]).collect()
    }

    fn sample_mask<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> (Vec<bool>, bool) {
        for _ in 0..=MAX_RESAMPLES {
            let mask: Vec<bool> = probs.iter().map(|&p| rng.random::<f64>() < p).collect();
            if mask.contains(&true) {
                return (mask, false);
            }
        }
        (one_hot(probs.len(), argmax(probs)), true)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Sample> {
        let (h1, c1, _, heads1) = self.step1()?;
        let mut forced = false;
        let unsup = match &self.clamp.unsup {
            Some(m) => m.clone(),
            None => {
                let (m, f) = Self::sample_mask(&Self::select_probs(&heads1), rng);
                forced |= f;
                m
            }
        };
        let (h2, c2, _, head2) = self.step2(&unsup, &h1, &c1)?;
        let k_index = match self.clamp.k_index {
            Some(t) => t,
            None => sample_categorical(&softmax(&head2.output), rng),
        };
        let (_, _, heads3) = self.step3(k_index, &h2, &c2)?;
        let sup = match &self.clamp.sup {
            Some(m) => m.clone(),
            None => {
                let (m, f) = Self::sample_mask(&Self::select_probs(&heads3), rng);
                forced |= f;
                m
            }
        };
        let config = Configuration {
            unsup,
            k_index,
            k: self.k_values[k_index],
            sup,
        };
        let log_prob = self.action_log_prob(&config)?;
        Ok(Sample {
            config,
            log_prob,
            forced,
        })
    }

    pub fn sample_configuration(&self, seed: u64) -> Result<Sample> {
        self.sample(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Most likely choice at each step (an empty mask falls back to its
    /// most likely entry).
    pub fn greedy(&self) -> Result<Configuration> {
        let (h1, c1, _, heads1) = self.step1()?;
        let pick = |probs: Vec<f64>| -> Vec<bool> {
            let m: Vec<bool> = probs.iter().map(|&p| p > 0.5).collect();
            if m.contains(&true) {
                m
            } else {
                one_hot(probs.len(), argmax(&probs))
            }
        };
        let unsup = self.clamp.unsup.clone().unwrap_or_else(|| pick(Self::select_probs(&heads1)));
        let (h2, c2, _, head2) = self.step2(&unsup, &h1, &c1)?;
        let k_index = self.clamp.k_index.unwrap_or_else(|| argmax(&softmax(&head2.output)));
        let (_, _, heads3) = self.step3(k_index, &h2, &c2)?;
        let sup = self.clamp.sup.clone().unwrap_or_else(|| pick(Self::select_probs(&heads3)));
        Ok(Configuration {
            unsup,
            k_index,
            k: self.k_values[k_index],
            sup,
        })
    }

    /// Exact distribution of [`Self::sample`] outcomes, including the
    /// resampling rule. Exponential in the registry sizes.
    pub fn enumerate(&self) -> Result<Vec<(Configuration, f64)>> {
        if self.n_unsup() + self.n_sup() > 16 {
            return Err(Error::invalid("search space too large to enumerate"));
        }
        let (h1, c1, _, heads1) = self.step1()?;
        let step1 = match &self.clamp.unsup {
            Some(m) => vec![(m.clone(), 1.0)],
            None => mask_distribution(&Self::select_probs(&heads1)),
        };
        let mut out = Vec::new();
        for (unsup, p1) in step1 {
            let (h2, c2, _, head2) = self.step2(&unsup, &h1, &c1)?;
            let step2: Vec<(usize, f64)> = match self.clamp.k_index {
                Some(t) => vec![(t, 1.0)],
                None => softmax(&head2.output).into_iter().enumerate().collect(),
            };
            for (k_index, p2) in step2 {
                let (_, _, heads3) = self.step3(k_index, &h2, &c2)?;
                let step3 = match &self.clamp.sup {
                    Some(m) => vec![(m.clone(), 1.0)],
                    None => mask_distribution(&Self::select_probs(&heads3)),
                };
                for (sup, p3) in step3 {
                    out.push((
                        Configuration {
                            unsup: unsup.clone(),
                            k_index,
                            k: self.k_values[k_index],
                            sup,
                        },
                        p1 * p2 * p3,
                    ));
                }
            }
        }
        Ok(out)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn one_hot(n: usize, i: usize) -> Vec<bool> {
    (0..n).map(|j| j == i).collect()
}

fn sample_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // rounding: last entry with positive mass
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// Distribution over non-empty masks of independent indicators, with up to
/// [`MAX_RESAMPLES`] redraws of an empty mask and a forced argmax after.
fn mask_distribution(probs: &[f64]) -> Vec<(Vec<bool>, f64)> {
    let n = probs.len();
    let p_empty: f64 = probs.iter().map(|p| 1.0 - p).product();
    let tries = MAX_RESAMPLES as i32 + 1;
    let scale: f64 = (0..tries).map(|j| p_empty.powi(j)).sum();
    let forced = one_hot(n, argmax(probs));
    (1u32..(1 << n))
        .map(|bits| {
            let mask: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
            let p: f64 = mask
                .iter()
                .zip(probs)
                .map(|(&on, &p)| if on { p } else { 1.0 - p })
                .product();
            let extra = if mask == forced { p_empty.powi(tries) } else { 0.0 };
            (mask, p * scale + extra)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    /// Exponential moving average of past rewards.
    #[default]
    Ema,
    /// Raw REINFORCE (baseline fixed at 0).
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub kind: BaselineKind,
    pub decay: f64,
    pub value: Option<f64>,
}

impl Default for Baseline {
    fn default() -> Self {
        Self::ema(0.9)
    }
}

impl Baseline {
    pub fn ema(decay: f64) -> Self {
        Self {
            kind: BaselineKind::Ema,
            decay,
            value: None,
        }
    }

    pub fn none() -> Self {
        Self {
            kind: BaselineKind::None,
            decay: 0.0,
            value: None,
        }
    }

    /// Baseline used against `reward`; the EMA starts at the first reward.
    pub fn current(&self, reward: f64) -> f64 {
        match self.kind {
            BaselineKind::Ema => self.value.unwrap_or(reward),
            BaselineKind::None => 0.0,
        }
    }

    pub fn observe(&mut self, reward: f64) {
        if self.kind == BaselineKind::Ema {
            let b = self.current(reward);
            self.value = Some(self.decay * b + (1.0 - self.decay) * reward);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReinforceParams {
    pub algorithm: Algorithm,
    pub lr: f64,
    pub entropy_coef: f64,
}

impl Default for ReinforceParams {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Adam,
            lr: 0.02,
            entropy_coef: 0.0,
        }
    }
}

/// REINFORCE state: baseline plus optimizer moments.
#[derive(Clone, Debug)]
pub struct Reinforce {
    pub params: ReinforceParams,
    pub baseline: Baseline,
    optimizer: Optimizer,
}

impl Reinforce {
    pub fn new(params: ReinforceParams, baseline: Baseline) -> Self {
        let optimizer = Optimizer::new(params.algorithm, params.lr);
        Self {
            params,
            baseline,
            optimizer,
        }
    }

    /// One ascent step along `(R - b) ∇ log π(config)`; the baseline is
    /// updated afterwards. Returns the baseline value that was used.
    pub fn update(&mut self, controller: &mut ControllerParams, config: &Configuration, reward: f64) -> Result<f64> {
        self.update_batch(controller, &[(config.clone(), reward)])
    }

    /// Monte Carlo version over several sampled configurations: the gradient
    /// is averaged and the baseline sees the mean reward. Nothing moves when
    /// every advantage is zero and there is no entropy term.
    pub fn update_batch(&mut self, controller: &mut ControllerParams, batch: &[(Configuration, f64)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::invalid("no sampled configuration to learn from"));
        }
        if batch.iter().any(|(_, r)| !r.is_finite()) {
            return Err(Error::NonFinite("reward".into()));
        }
        let n = batch.len() as f64;
        let mean_reward = batch.iter().map(|(_, r)| r).sum::<f64>() / n;
        let b = self.baseline.current(mean_reward);
        controller.zero_grad();
        let mut touched = false;
        for (config, reward) in batch {
            let advantage = reward - b;
            if advantage != 0.0 || self.params.entropy_coef != 0.0 {
                controller.accumulate_grad(config, advantage / n, self.params.entropy_coef / n)?;
                touched = true;
            }
        }
        if touched {
            // the optimizer descends; flip the sign to ascend
            for t in controller.params_mut() {
                t.grad.iter_mut().for_each(|g| *g = -*g);
            }
            self.optimizer.step(&mut controller.params_mut())?;
        }
        self.baseline.observe(mean_reward);
        Ok(b)
    }
}

/// One line of the episode log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    #[serde(rename = "I1")]
    pub i1: Vec<u8>,
    pub k_index: usize,
    pub k: usize,
    #[serde(rename = "I3")]
    pub i3: Vec<u8>,
    #[serde(rename = "Ru")]
    pub ru: f64,
    #[serde(rename = "Rs")]
    pub rs: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub baseline: f64,
    pub log_prob: f64,
    pub forced: bool,
}

impl EpisodeLog {
    pub fn config(&self) -> Configuration {
        Configuration {
            unsup: self.i1.iter().map(|&b| b == 1).collect(),
            k_index: self.k_index,
            k: self.k,
            sup: self.i3.iter().map(|&b| b == 1).collect(),
        }
    }
}
