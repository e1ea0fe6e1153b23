//! Independent oracles shared by the integration and acceptance targets.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use autoweaks::controller::{Baseline, Configuration, ControllerParams, Reinforce, ReinforceParams, DEFAULT_INIT_SCALE};
use autoweaks::eval::EvalList;
use autoweaks::nn::gradcheck::{max_relative_error, STEP};
use autoweaks::nn::{cosine, cosine_backward, Activation, Dense, KernelBank, LstmCell};
use autoweaks::sup::{pair_loss, pair_loss_grad};
use autoweaks::unsup::ScoreMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A list of 1 positive + 99 negatives with ids in shuffled order and
/// scores drawn from a handful of levels so that ties are common.
pub fn random_list(seed: u64) -> (EvalList, Vec<f64>) {
    let mut r = rng(seed);
    let mut ids: Vec<String> = (0..100).map(|i| format!("c{i:03}")).collect();
    ids.shuffle(&mut r);
    let levels = r.random_range(2..8);
    let scores = (0..100)
        .map(|_| {
            if r.random_bool(0.8) {
                r.random_range(0..levels) as f64 / levels as f64
            } else {
                r.random::<f64>()
            }
        })
        .collect();
    let list = EvalList {
        query: "q".into(),
        query_pos: 0,
        candidates: (0..100).collect(),
        candidate_ids: ids,
    };
    (list, scores)
}

/// Position of entry 0 after a full sort by (score desc, id asc).
pub fn oracle_rank(scores: &[f64], ids: &[String]) -> usize {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(ids[a].cmp(&ids[b])));
    idx.iter().position(|&i| i == 0).unwrap() + 1
}

/// `(hr@k, ndcg@k, mrr)` written out from the definitions.
pub fn oracle_metrics(ranks: &[usize], k: usize) -> (f64, f64, f64) {
    let n = ranks.len() as f64;
    let mut hr = 0.0;
    let mut ndcg = 0.0;
    let mut rr = 0.0;
    for &r in ranks {
        if r <= k {
            hr += 1.0;
            ndcg += 1.0 / ((r + 1) as f64).log2();
        }
        rr += 1.0 / r as f64;
    }
    (hr / n, ndcg / n, rr / n)
}

/// Top-k by repeated selection of the best remaining entry.
pub fn oracle_top_k(row: &[f64], ids: &[String], k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut left: Vec<usize> = (0..row.len()).collect();
    let mut top = Vec::new();
    for _ in 0..k {
        let mut best = 0;
        for j in 1..left.len() {
            let (a, b) = (left[j], left[best]);
            if row[a] > row[b] || (row[a] == row[b] && ids[a] < ids[b]) {
                best = j;
            }
        }
        top.push(left.remove(best));
    }
    (top, left)
}

/// Random matrix with heavy ties and shuffled candidate ids.
pub fn random_matrix(seed: u64, nq: usize, nc: usize) -> ScoreMatrix {
    let mut r = rng(seed);
    let mut cids: Vec<String> = (0..nc).map(|i| format!("c{i:04}")).collect();
    cids.shuffle(&mut r);
    let levels = r.random_range(2..6);
    let values = (0..nq * nc)
        .map(|_| if r.random_bool(0.5) { r.random_range(0..levels) as f64 } else { r.random_range(-3.0..3.0) })
        .collect();
    ScoreMatrix::new("m", (0..nq).map(|i| format!("q{i}")).collect(), cids, values).unwrap()
}

fn uniform(r: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-s..s)).collect()
}

/// Dense layer: gradient w.r.t. weights, bias and input of `c · y`.
pub fn dense_grad_error(seed: u64, act: Activation) -> f64 {
    let mut r = rng(seed);
    let (n_in, n_out) = (5, 4);
    let layer = Dense::new("d", n_in, n_out, act, 0.5, &mut r);
    let x = uniform(&mut r, n_in, 1.0);
    let c = uniform(&mut r, n_out, 1.0);
    let nw = n_in * n_out;
    let unpack = |v: &[f64]| {
        let mut l = layer.clone();
        l.weight.values = v[..nw].to_vec();
        l.bias.values = v[nw..nw + n_out].to_vec();
        (l, v[nw + n_out..].to_vec())
    };
    let loss = |v: &[f64]| {
        let (l, x) = unpack(v);
        let y = l.forward(&x).unwrap().output;
        y.iter().zip(&c).map(|(a, b)| a * b).sum()
    };
    let mut point = layer.weight.values.clone();
    point.extend(&layer.bias.values);
    point.extend(&x);
    let (mut l, x) = unpack(&point);
    let cache = l.forward(&x).unwrap();
    let dx = l.backward(&cache, &c);
    let mut analytic = l.weight.grad.clone();
    analytic.extend(&l.bias.grad);
    analytic.extend(dx);
    max_relative_error(loss, &point, &analytic, STEP)
}

pub fn cosine_grad_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = 6;
    let point = uniform(&mut r, 2 * n, 1.0);
    let (du, dv) = cosine_backward(&point[..n], &point[n..], 1.0);
    let analytic: Vec<f64> = du.into_iter().chain(dv).collect();
    max_relative_error(|v| cosine(&v[..n], &v[n..]).unwrap(), &point, &analytic, STEP)
}

/// Log kernel pooling of a random similarity row, default kernel bank.
pub fn kernel_grad_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let bank = KernelBank::default();
    let row = uniform(&mut r, 8, 0.95);
    let c = uniform(&mut r, bank.len(), 1.0);
    let loss = |v: &[f64]| bank.log_pool(v).unwrap().iter().zip(&c).map(|(a, b)| a * b).sum();
    let analytic = bank.log_pool_backward(&row, &c);
    max_relative_error(loss, &row, &analytic, STEP)
}

/// Three-step LSTM unroll, loss `c · h_3`, gradient w.r.t. every
/// parameter and every input.
pub fn lstm_unroll_grad_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n_in, d) = (3, 4);
    let cell = LstmCell::new("l", n_in, d, 0.5, &mut r);
    let xs = uniform(&mut r, 3 * n_in, 1.0);
    let c = uniform(&mut r, d, 1.0);
    let sizes = [cell.w_x.len(), cell.w_h.len(), cell.bias.len()];
    let unpack = |v: &[f64]| {
        let mut l = cell.clone();
        let (a, rest) = v.split_at(sizes[0]);
        let (b, rest) = rest.split_at(sizes[1]);
        let (bias, x) = rest.split_at(sizes[2]);
        l.w_x.values = a.to_vec();
        l.w_h.values = b.to_vec();
        l.bias.values = bias.to_vec();
        (l, x.to_vec())
    };
    let loss = |v: &[f64]| {
        let (l, x) = unpack(v);
        let (mut h, mut cc) = (vec![0.0; d], vec![0.0; d]);
        for t in 0..3 {
            let (h2, c2, _) = l.forward(&x[t * n_in..(t + 1) * n_in], &h, &cc).unwrap();
            h = h2;
            cc = c2;
        }
        h.iter().zip(&c).map(|(a, b)| a * b).sum()
    };
    let mut point = cell.w_x.values.clone();
    point.extend(&cell.w_h.values);
    point.extend(&cell.bias.values);
    point.extend(&xs);
    let (mut l, x) = unpack(&point);
    let (mut h, mut cc) = (vec![0.0; d], vec![0.0; d]);
    let mut caches = Vec::new();
    for t in 0..3 {
        let (h2, c2, cache) = l.forward(&x[t * n_in..(t + 1) * n_in], &h, &cc).unwrap();
        caches.push(cache);
        h = h2;
        cc = c2;
    }
    let mut dh = c.clone();
    let mut dc = vec![0.0; d];
    let mut dxs = vec![Vec::new(); 3];
    for t in (0..3).rev() {
        let (dx, dh_prev, dc_prev) = l.backward(&caches[t], &dh, &dc);
        dxs[t] = dx;
        dh = dh_prev;
        dc = dc_prev;
    }
    let mut analytic = l.w_x.grad.clone();
    analytic.extend(&l.w_h.grad);
    analytic.extend(&l.bias.grad);
    analytic.extend(dxs.concat());
    max_relative_error(loss, &point, &analytic, STEP)
}

/// Pair loss w.r.t. the score for both targets.
pub fn loss_grad_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let s = r.random_range(-6.0..6.0);
    [0.0, 1.0]
        .iter()
        .map(|&t| max_relative_error(|v| pair_loss(v[0], t), &[s], &[pair_loss_grad(s, t)], STEP))
        .fold(0.0, f64::max)
}

/// Controller for the rigged toy: one fixed unsupervised model, one k,
/// two supervised models.
pub fn toy_controller(seed: u64) -> ControllerParams {
    ControllerParams::with_init_scale(1, vec![10], 2, 32, seed, DEFAULT_INIT_SCALE).unwrap()
}

/// Exact probability that the sampled supervised mask equals `target`.
pub fn prob_sup_mask(c: &ControllerParams, target: &[bool]) -> f64 {
    c.enumerate().unwrap().iter().filter(|(cfg, _)| cfg.sup == target).map(|(_, p)| p).sum()
}

pub fn toy_reward(cfg: &Configuration) -> f64 {
    if cfg.sup == [true, false] {
        1.0
    } else {
        0.0
    }
}

/// Run `updates` REINFORCE steps on the toy and return `P(optimal)` after
/// each one.
pub fn run_toy(seed: u64, updates: usize) -> Vec<f64> {
    let mut c = toy_controller(seed);
    let mut learner = Reinforce::new(ReinforceParams::default(), Baseline::ema(0.9));
    let mut r = rng(seed ^ 0x5eed);
    (0..updates)
        .map(|_| {
            let s = c.sample(&mut r).unwrap();
            learner.update(&mut c, &s.config, toy_reward(&s.config)).unwrap();
            prob_sup_mask(&c, &[true, false])
        })
        .collect()
}

/// Total-variation distance between two distributions over the same keys.
pub fn tv_distance<K: Ord + Clone>(p: &std::collections::BTreeMap<K, f64>, q: &std::collections::BTreeMap<K, f64>) -> f64 {
    let keys: std::collections::BTreeSet<K> = p.keys().chain(q.keys()).cloned().collect();
    0.5 * keys.iter().map(|k| (p.get(k).unwrap_or(&0.0) - q.get(k).unwrap_or(&0.0)).abs()).sum::<f64>()
}

/// Per-step `(analytic, empirical)` marginals of a controller over
/// `draws` samples: unsupervised mask, k index, supervised mask.
pub fn step_tv_distances(c: &ControllerParams, draws: usize, seed: u64) -> [f64; 3] {
    use std::collections::BTreeMap;
    type Marg = (BTreeMap<Vec<bool>, f64>, BTreeMap<usize, f64>, BTreeMap<Vec<bool>, f64>);
    let mut analytic: Marg = Default::default();
    for (cfg, p) in c.enumerate().unwrap() {
        *analytic.0.entry(cfg.unsup.clone()).or_default() += p;
        *analytic.1.entry(cfg.k_index).or_default() += p;
        *analytic.2.entry(cfg.sup.clone()).or_default() += p;
    }
    let mut emp: Marg = Default::default();
    let mut r = rng(seed);
    let w = 1.0 / draws as f64;
    for _ in 0..draws {
        let cfg = c.sample(&mut r).unwrap().config;
        *emp.0.entry(cfg.unsup.clone()).or_default() += w;
        *emp.1.entry(cfg.k_index).or_default() += w;
        *emp.2.entry(cfg.sup.clone()).or_default() += w;
    }
    [tv_distance(&analytic.0, &emp.0), tv_distance(&analytic.1, &emp.1), tv_distance(&analytic.2, &emp.2)]
}

/// Hand evaluation of BM25 (k1 = 1.2, b = 0.75) on a three-candidate corpus.
///
/// Candidates: c1 = "apple banana apple" (3 tokens), c2 = "banana cherry"
/// (2), c3 = "cherry cherry cherry date" (4); avgdl = 3, so the length term
/// `k1 (1 - b + b |c| / avgdl)` is 1.2, 0.9 and 1.5. idf is ln(8/3) for
/// df = 1 and ln(1.6) for df = 2. Queries: q1 = "apple cherry",
/// q2 = "banana banana date".
pub fn bm25_hand_table() -> [[f64; 3]; 2] {
    let idf1 = (8.0f64 / 3.0).ln();
    let idf2 = 1.6f64.ln();
    [
        // apple tf 2 in c1: 2 * 2.2 / (2 + 1.2); cherry tf 1 in c2 and 3 in c3
        [idf1 * 4.4 / 3.2, idf2 * 2.2 / 1.9, idf2 * 6.6 / 4.5],
        // banana counted twice: tf 1 in c1 and c2; date tf 1 in c3
        [2.0 * idf2 * 2.2 / 2.2, 2.0 * idf2 * 2.2 / 1.9, idf1 * 2.2 / 2.5],
    ]
}

pub fn bm25_hand_corpus() -> autoweaks::corpus::Corpus {
    use autoweaks::corpus::{build_corpus, RawDocument, Role};
    build_corpus(
        &[
            RawDocument::new("q1", Role::Query, "apple cherry"),
            RawDocument::new("q2", Role::Query, "banana banana date"),
            RawDocument::new("c1", Role::Candidate, "apple banana apple"),
            RawDocument::new("c2", Role::Candidate, "banana cherry"),
            RawDocument::new("c3", Role::Candidate, "cherry cherry cherry date"),
        ],
        50,
        50,
    )
    .unwrap()
}

/// Outcome of one end-to-end synthetic run with an injected noise scorer.
#[derive(Debug)]
pub struct EndToEnd {
    pub final_test_mrr: f64,
    pub best_single_test_mrr: f64,
    pub best_single: String,
    pub all_models_test_mrr: f64,
    pub noise_frequency: f64,
    pub rewards: Vec<f64>,
}

/// Synthetic corpus (100 queries, 300 candidates, 6 topics, noise 0.3),
/// every builtin unsupervised model plus `noise`, default search budget.
pub fn end_to_end(seed: u64) -> EndToEnd {
    use autoweaks::corpus::split_annotations;
    use autoweaks::experiment::FREQUENCY_WINDOW;
    use autoweaks::synth::{generate_synthetic, SynthParams};
    use autoweaks::trainer::{pretrain_all, Pipeline, RunConfig};
    use autoweaks::unsup::{UnsupModelRegistry, BUILTIN_UNSUP};

    let data = generate_synthetic(&SynthParams { seed, ..SynthParams::default() }).unwrap();
    let (validation, test) = split_annotations(&data.annotations, seed).unwrap();
    let mut names: Vec<&str> = BUILTIN_UNSUP.to_vec();
    names.push("noise");
    let cfg = RunConfig { unsup: UnsupModelRegistry::from_names(&names).unwrap(), seed, workers: 1, ..RunConfig::default() };
    let pre = pretrain_all(&data.corpus, &cfg.unsup, seed, None, 1).unwrap();
    let p = Pipeline::new(cfg, data.corpus.clone(), pre.matrices, &validation).unwrap();
    let test_lists = p.test_lists(&test).unwrap();

    let (best_single, best_single_test_mrr) = p
        .unsup_metrics(Some(&test_lists))
        .unwrap()
        .into_iter()
        .filter(|(n, _, _)| n != "noise")
        .map(|(n, _, t)| (n, t.unwrap().mrr))
        .fold((String::new(), f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let result = p.joint_train(Default::default(), Some(&test_lists), |_| {}).unwrap();
    let noise = names.len() - 1;
    let window: Vec<_> = result.logs.iter().rev().take(FREQUENCY_WINDOW).collect();
    let noise_frequency = window.iter().filter(|l| l.i1[noise] == 1).count() as f64 / window.len() as f64;
    let weaks = p.all_models_baseline(Some(&test_lists)).unwrap();
    EndToEnd {
        final_test_mrr: result.final_model.test.unwrap().mrr,
        best_single_test_mrr,
        best_single,
        all_models_test_mrr: weaks.final_model.test.unwrap().mrr,
        noise_frequency,
        rewards: result.logs.iter().map(|l| l.r).collect(),
    }
}

/// Hex SHA-256 of every file under `root`, keyed by relative path.
pub fn tree_hashes(root: &std::path::Path) -> std::collections::BTreeMap<String, String> {
    use sha2::{Digest, Sha256};
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut std::collections::BTreeMap<String, String>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, hex::encode(Sha256::digest(std::fs::read(&p).unwrap())));
            }
        }
    }
    let mut out = Default::default();
    walk(root, root, &mut out);
    out
}

/// Small synthetic run directory: documents written by `gen_synth`, then
/// ingested with a reduced search budget.
pub fn small_run(dir: &std::path::Path, data_dir: &std::path::Path, extra: &[&str]) -> autoweaks::experiment::Run {
    use autoweaks::config::ExperimentConfig;
    use autoweaks::experiment::{gen_synth, ingest, Run};
    use autoweaks::synth::SynthParams;
    let params = SynthParams { n_queries: 40, n_candidates: 120, seed: 3, ..SynthParams::default() };
    let (docs, ann) = gen_synth(&params, data_dir).unwrap();
    let mut cfg = ExperimentConfig::default();
    let mut o = vec![
        format!("documents={}", docs.display()),
        format!("annotations={}", ann.display()),
        format!("output={}", dir.display()),
        "unsup_models=bm25,word2vec,noise".into(),
        "k_values=5,10".into(),
        "episodes=6".into(),
        "episode_epochs=1".into(),
        "final_epochs=3".into(),
        "word_epochs=3".into(),
        "workers=1".into(),
    ];
    o.extend(extra.iter().map(|s| s.to_string()));
    cfg.apply_overrides(&o).unwrap();
    ingest(&cfg).unwrap();
    Run::open::<&str>(dir, &[]).unwrap()
}
