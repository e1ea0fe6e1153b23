mod common;

use autoweaks::controller::{Clamp, ControllerParams};
use autoweaks::corpus::split_annotations;
use autoweaks::nn::gradcheck::numeric_gradient;
use autoweaks::synth::{generate_synthetic, SynthParams};
use autoweaks::trainer::{best_log, Pipeline, RunConfig};
use autoweaks::unsup::{bm25_matrix, ScoreMatrix, UnsupModelRegistry};

use common::*;

/// An unsupervised set of {bm25, pure noise}: averaging in the noise can
/// only hurt.
fn rigged_pipeline(seed: u64) -> Pipeline {
    let data = generate_synthetic(&SynthParams { n_queries: 40, n_candidates: 120, seed, ..SynthParams::default() }).unwrap();
    let (validation, _) = split_annotations(&data.annotations, seed).unwrap();
    let unsup = UnsupModelRegistry::from_names(&["bm25", "noise"]).unwrap();
    let matrices = vec![
        bm25_matrix("bm25", &data.corpus, 1.2, 0.75).unwrap(),
        ScoreMatrix::noise("noise", &data.corpus, seed).unwrap(),
    ];
    let mut cfg = RunConfig { unsup, k_values: vec![5, 10], episodes: 25, seed, ..RunConfig::default() };
    cfg.episode_train.epochs = 1;
    cfg.sup_embeddings.epochs = 3;
    Pipeline::new(cfg, data.corpus, matrices, &validation).unwrap()
}

#[test]
fn search_drops_the_noise_scorer() {
    let mut excluded = 0;
    for seed in 0..5 {
        let p = rigged_pipeline(seed);
        let (logs, controller) = p.search(Clamp::default(), |_| {}).unwrap();
        assert!(logs.iter().all(|l| (0.0..=2.0).contains(&l.r)), "reward out of bounds");
        let best_r = logs.iter().map(|l| l.r).fold(f64::NEG_INFINITY, f64::max);
        let (best, r) = p.select(&logs, &controller).unwrap();
        assert_eq!(r, best_r);
        assert_eq!(best_log(&logs).unwrap().config(), best);
        if best.unsup == [true, false] {
            excluded += 1;
        }
    }
    assert!(excluded >= 4, "noise excluded in {excluded}/5 seeds");
}

/// Expected toy reward as a function of the flattened controller parameters.
fn expected_reward(c: &ControllerParams, flat: &[f64]) -> f64 {
    let mut m = c.clone();
    let mut at = 0;
    for p in m.params_mut() {
        let n = p.values.len();
        p.values.copy_from_slice(&flat[at..at + n]);
        at += n;
    }
    m.enumerate().unwrap().iter().map(|(cfg, p)| p * toy_reward(cfg)).sum()
}

#[test]
fn reinforce_estimate_points_along_the_true_gradient() {
    for seed in 0..3 {
        let c = ControllerParams::new(1, vec![10], 2, 6, seed).unwrap();
        let flat: Vec<f64> = c.params().iter().flat_map(|p| p.values.clone()).collect();
        let truth = numeric_gradient(|v| expected_reward(&c, v), &flat, 1e-5);
        // invalid masks are resampled, so the policy is conditioned on
        // validity; the score-function estimate is unbiased for that
        // distribution once the mean reward is subtracted
        let mean = expected_reward(&c, &flat);

        let mut m = c.clone();
        m.zero_grad();
        let mut r = rng(seed + 100);
        let n = 4000;
        for _ in 0..n {
            let s = m.sample(&mut r).unwrap();
            m.accumulate_grad(&s.config, (toy_reward(&s.config) - mean) / n as f64, 0.0).unwrap();
        }
        let estimate: Vec<f64> = m.params().iter().flat_map(|p| p.grad.clone()).collect();
        let dot: f64 = truth.iter().zip(&estimate).map(|(a, b)| a * b).sum();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cos = dot / (norm(&truth) * norm(&estimate));
        assert!(cos > 0.8, "seed {seed}: cosine {cos}");
    }
}

#[test]
fn toy_policy_concentrates_on_the_rewarded_mask() {
    for seed in 0..3 {
        let probs = run_toy(seed, 200);
        assert!(probs[0] < 0.9);
        assert!(*probs.last().unwrap() > 0.9, "seed {seed}: {:?}", &probs[probs.len() - 5..]);
    }
}
