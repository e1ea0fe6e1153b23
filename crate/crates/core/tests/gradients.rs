mod common;

use rand::seq::index::sample;

use autoweaks::controller::{Configuration, ControllerParams};
use autoweaks::nn::gradcheck::{relative_error, STEP};
use autoweaks::nn::{Activation, ParamTensor};
use autoweaks::sup::{SupModel, SupModelRegistry, BUILTIN_SUP};
use autoweaks::synth::{generate_synthetic, SynthParams};
use autoweaks::trainer::{sup_inputs, RunConfig};

use common::*;

const TOL: f64 = 1e-3;

#[test]
fn primitive_ops_pass_finite_differences() {
    for seed in 0..20 {
        for (name, e) in [
            ("dense tanh", dense_grad_error(seed, Activation::Tanh)),
            ("dense identity", dense_grad_error(seed, Activation::Identity)),
            ("cosine", cosine_grad_error(seed)),
            ("kernel pooling", kernel_grad_error(seed)),
            ("lstm unroll", lstm_unroll_grad_error(seed)),
            ("pair loss", loss_grad_error(seed)),
        ] {
            assert!(e <= TOL, "{name} seed {seed}: {e}");
        }
    }
}

/// Compare `analytic` (flattened parameter gradients) with central
/// differences of `loss` on `n` random coordinates.
fn check_coordinates<M: Clone>(
    model: &M,
    params: impl Fn(&mut M) -> Vec<&mut ParamTensor>,
    loss: impl Fn(&M) -> f64,
    analytic: &[f64],
    n: usize,
    seed: u64,
) -> f64 {
    let total = analytic.len();
    let mut worst: f64 = 0.0;
    for idx in sample(&mut rng(seed), total, n.min(total)) {
        let at = |delta: f64| {
            let mut m = model.clone();
            let mut offset = idx;
            for p in params(&mut m) {
                if offset < p.values.len() {
                    p.values[offset] += delta;
                    break;
                }
                offset -= p.values.len();
            }
            loss(&m)
        };
        let numeric = (at(STEP) - at(-STEP)) / (2.0 * STEP);
        worst = worst.max(relative_error(analytic[idx], numeric));
    }
    worst
}

#[test]
fn supervised_models_backprop_matches_finite_differences() {
    let data = generate_synthetic(&SynthParams { n_queries: 6, n_candidates: 12, seed: 4, ..SynthParams::default() }).unwrap();
    let mut cfg = RunConfig::default();
    cfg.sup_embeddings.dim = 8;
    cfg.sup_embeddings.epochs = 2;
    let inputs = sup_inputs(&cfg, data.corpus).unwrap();
    let pairs = vec![(0, 1), (0, 4), (2, 7), (3, 3), (5, 11)];
    let targets = vec![1.0, 0.0, 1.0, 0.0, 1.0];
    for name in BUILTIN_SUP {
        let spec = SupModelRegistry::builtin(name).unwrap();
        for seed in 0..3 {
            let mut model = SupModel::init(&spec, &inputs, seed).unwrap();
            model.params_mut().into_iter().for_each(|p| p.zero_grad());
            model.accumulate(&inputs, &pairs, &targets, 9).unwrap();
            let analytic: Vec<f64> = model.params().iter().flat_map(|p| p.grad.clone()).collect();
            let loss = |m: &SupModel| {
                let mut m = m.clone();
                m.accumulate(&inputs, &pairs, &targets, 9).unwrap()
            };
            let e = check_coordinates(&model, |m| m.params_mut(), loss, &analytic, 60, seed);
            assert!(e <= TOL, "{name} seed {seed}: {e}");
        }
    }
}

#[test]
fn controller_log_prob_and_entropy_gradients() {
    for seed in 0..5 {
        let c = ControllerParams::new(3, vec![10, 20, 30], 2, 8, seed).unwrap();
        let config: Configuration = c.sample_configuration(seed).unwrap().config;
        for (a, b) in [(1.0, 0.0), (0.0, 1.0), (-0.7, 0.3)] {
            let mut m = c.clone();
            m.zero_grad();
            m.accumulate_grad(&config, a, b).unwrap();
            let analytic: Vec<f64> = m.params().iter().flat_map(|p| p.grad.clone()).collect();
            let loss = |m: &ControllerParams| a * m.action_log_prob(&config).unwrap() + b * m.entropy(&config).unwrap();
            let e = check_coordinates(&c, |m| m.params_mut(), loss, &analytic, 80, seed);
            assert!(e <= TOL, "seed {seed} coefs ({a}, {b}): {e}");
        }
    }
}
