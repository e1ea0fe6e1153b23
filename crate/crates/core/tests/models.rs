mod common;

use autoweaks::corpus::{build_corpus, AnnotationSet, RawDocument, Role, Split};
use autoweaks::eval::{build_eval_lists, evaluate_matrix, EvalList, NEGATIVES_PER_POSITIVE};
use autoweaks::graph::build_graph;
use autoweaks::nn::cosine;
use autoweaks::pseudo::{sample_training_pairs, top_k_labels};
use autoweaks::sup::{objective, train_supervised, SupModel, SupModelRegistry, TrainParams, BUILTIN_SUP};
use autoweaks::synth::{common_word, generate_synthetic, topic_word, SynthParams, SyntheticData};
use autoweaks::trainer::{sup_inputs, RunConfig};
use autoweaks::unsup::line::train_proximity;
use autoweaks::unsup::{bm25_matrix, train_text_embeddings, Order, ProximityParams, ScoreMatrix, SkipGramParams};

fn lists(data: &SyntheticData, seed: u64) -> Vec<EvalList> {
    let ann = AnnotationSet::new(Split::Validation, data.annotations.clone()).unwrap();
    build_eval_lists(&ann, &data.corpus, seed, NEGATIVES_PER_POSITIVE).unwrap()
}

#[test]
fn bm25_is_perfect_without_noise() {
    let data = generate_synthetic(&SynthParams { vocab_per_topic: 10, doc_len: 12, noise_rate: 0.0, ..SynthParams::default() }).unwrap();
    let m = bm25_matrix("bm25", &data.corpus, 1.2, 0.75).unwrap();
    let metrics = evaluate_matrix(&lists(&data, 1), &m).unwrap();
    assert_eq!(metrics.mrr, 1.0, "{metrics:?}");
    assert_eq!(metrics.hr5, 1.0);
}

#[test]
fn bm25_degrades_with_noise() {
    let p = SynthParams { vocab_per_topic: 10, doc_len: 12, ..SynthParams::default() };
    let clean = generate_synthetic(&SynthParams { noise_rate: 0.0, ..p.clone() }).unwrap();
    let noisy = generate_synthetic(&SynthParams { noise_rate: 0.6, common_vocab: 5, ..p }).unwrap();
    let mrr = |d: &SyntheticData| evaluate_matrix(&lists(d, 1), &bm25_matrix("bm25", &d.corpus, 1.2, 0.75).unwrap()).unwrap().mrr;
    assert!(mrr(&noisy) < mrr(&clean));
}

#[test]
fn word_vectors_cluster_by_topic() {
    let data = generate_synthetic(&SynthParams { vocab_per_topic: 15, doc_len: 12, ..SynthParams::default() }).unwrap();
    let table = train_text_embeddings(&data.corpus, &SkipGramParams { epochs: 20, ..SkipGramParams::default() }).unwrap();
    let (mut same, mut cross) = (Vec::new(), Vec::new());
    for t in 0..3 {
        for j in 0..5 {
            let a = table.get(&topic_word(t, j)).unwrap();
            same.push(cosine(a, table.get(&topic_word(t, j + 5)).unwrap()).unwrap());
            cross.push(cosine(a, table.get(&topic_word(t + 1, j)).unwrap()).unwrap());
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&same) > mean(&cross) + 0.1, "same {} cross {}", mean(&same), mean(&cross));
    assert!(table.get(&common_word(0)).is_some());
}

#[test]
fn first_order_proximity_separates_components() {
    // two disconnected blocks sharing no words
    let docs: Vec<RawDocument> = ["aa bb cc", "bb cc dd", "xx yy zz", "yy zz ww"]
        .iter()
        .enumerate()
        .map(|(i, t)| RawDocument::new(format!("c{i}"), Role::Candidate, *t))
        .chain([RawDocument::new("q0", Role::Query, "aa dd"), RawDocument::new("q1", Role::Query, "xx ww")])
        .collect();
    let corpus = build_corpus(&docs, 10, 10).unwrap();
    let g = build_graph(&corpus);
    let table = train_proximity(&g, Order::First, &ProximityParams { dim: 8, ..ProximityParams::default() }, 3).unwrap();
    let v = |n: usize| table.row(n);
    let (q0, q1) = (g.query_node(0), g.query_node(1));
    let (c0, c2) = (g.candidate_node(corpus.candidate_pos("c0").unwrap()), g.candidate_node(corpus.candidate_pos("c2").unwrap()));
    let aa = g.word_node(corpus.vocab().id("aa").unwrap());
    let xx = g.word_node(corpus.vocab().id("xx").unwrap());
    assert!(cosine(v(q0), v(aa)).unwrap() > cosine(v(q0), v(xx)).unwrap());
    assert!(cosine(v(q1), v(xx)).unwrap() > cosine(v(q1), v(aa)).unwrap());
    assert!(cosine(v(c0), v(aa)).unwrap() > cosine(v(c2), v(aa)).unwrap());
}

#[test]
fn random_scores_hit_five_percent() {
    let data = generate_synthetic(&SynthParams::default()).unwrap();
    let l = lists(&data, 2);
    let hr: f64 = (0..10)
        .map(|s| evaluate_matrix(&l, &ScoreMatrix::noise("noise", &data.corpus, s).unwrap()).unwrap().hr5)
        .sum::<f64>()
        / 10.0;
    assert!((hr - 0.05).abs() <= 0.01, "hr@5 {hr} over {} lists", l.len());
}

/// Oracle pseudo labels with `k` planted to the positives per query.
fn planted(seed: u64, noise_rate: f64) -> (SyntheticData, Vec<EvalList>, Vec<autoweaks::pseudo::Triple>, autoweaks::sup::SupInputs) {
    // word vectors need the full-size corpus to carry topic signal
    let data = generate_synthetic(&SynthParams { noise_rate, seed, ..SynthParams::default() }).unwrap();
    let eval = lists(&data, seed);
    let ann = AnnotationSet::new(Split::Validation, data.annotations.clone()).unwrap();
    let oracle = ScoreMatrix::oracle("oracle", &data.corpus, &[&ann]).unwrap();
    let k = data.annotations.len() / data.corpus.num_queries();
    let labels = top_k_labels(&oracle, k).unwrap();
    let triples = sample_training_pairs(&labels, 1, seed).unwrap();
    let inputs = sup_inputs(&RunConfig { seed, ..RunConfig::default() }, data.corpus.clone()).unwrap();
    (data, eval, triples, inputs)
}

#[test]
fn supervised_training_beats_initialization() {
    for seed in 0..3 {
        let (_, eval, triples, inputs) = planted(seed, 0.3);
        for name in BUILTIN_SUP {
            let spec = SupModelRegistry::builtin(name).unwrap();
            let mut model = SupModel::init(&spec, &inputs, seed).unwrap();
            let before_mrr = evaluate_matrix(&eval, &model.score_matrix(name, &inputs).unwrap()).unwrap().mrr;
            let before = objective(&model, &inputs, &triples).unwrap();
            train_supervised(&mut model, &inputs, &triples, &TrainParams { epochs: 1, seed, ..TrainParams::default() }).unwrap();
            let after_one = objective(&model, &inputs, &triples).unwrap();
            assert!(after_one < before, "{name} seed {seed}: objective {before} -> {after_one}");
            train_supervised(&mut model, &inputs, &triples, &TrainParams { epochs: 4, seed: seed + 10, ..TrainParams::default() }).unwrap();
            let after_mrr = evaluate_matrix(&eval, &model.score_matrix(name, &inputs).unwrap()).unwrap().mrr;
            assert!(after_mrr > before_mrr, "{name} seed {seed}: mrr {before_mrr} -> {after_mrr}");
        }
    }
}

#[test]
fn planted_labels_without_noise_are_learned() {
    for seed in 0..3 {
        let (_, eval, triples, inputs) = planted(seed, 0.0);
        for name in BUILTIN_SUP {
            let spec = SupModelRegistry::builtin(name).unwrap();
            let mut model = SupModel::init(&spec, &inputs, seed).unwrap();
            train_supervised(&mut model, &inputs, &triples, &TrainParams { epochs: 6, seed, ..TrainParams::default() }).unwrap();
            let mrr = evaluate_matrix(&eval, &model.score_matrix(name, &inputs).unwrap()).unwrap().mrr;
            assert!(mrr >= 0.9, "{name} seed {seed}: mrr {mrr}");
        }
    }
}
