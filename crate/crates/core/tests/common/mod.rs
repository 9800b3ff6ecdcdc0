#![allow(dead_code)]

use dsre_core::corpus::synthetic::{generate_synthetic, SyntheticConfig, SyntheticCorpus};
use dsre_core::corpus::{Instance, InstanceBag, PairId, Span, Token};
use dsre_core::encoder::StaticEmbeddings;
use dsre_core::model::{Model, ModelConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn tok(text: &str, pos: &str) -> Token {
    Token {
        text: text.into(),
        pos: pos.into(),
    }
}

/// Instance over `words` (all tagged NN unless listed in `verbs`) with
/// single-token entities at `e1` and `e2`.
pub fn instance(sid: &str, words: &[&str], e1: usize, e2: usize, verbs: &[usize]) -> Instance {
    let tokens = words
        .iter()
        .enumerate()
        .map(|(i, w)| tok(w, if verbs.contains(&i) { "VBD" } else { "NN" }))
        .collect();
    Instance::new(sid, tokens, Span::new(e1, e1 + 1), Span::new(e2, e2 + 1)).unwrap()
}

pub fn bag(e1: &str, e2: &str, instances: Vec<Instance>, relations: &[&str]) -> InstanceBag {
    InstanceBag {
        pair_id: PairId::new(e1, e2),
        instances,
        relations: relations.iter().map(|r| r.to_string()).collect(),
    }
}

/// A small generated corpus with low-dimensional vectors, quick to train on.
pub fn small_corpus(noise_rate: f64, seed: u64) -> SyntheticCorpus {
    generate_synthetic(&SyntheticConfig {
        noise_rate,
        num_relations: 4,
        bags_per_relation: 6,
        bag_size: 3,
        seed,
        test_fraction: 0.34,
        embedding_dim: 24,
        ..Default::default()
    })
    .unwrap()
}

/// Encoder sized to match [`small_corpus`] vectors; output stays 256.
pub fn small_model_config() -> ModelConfig {
    let mut c = ModelConfig::default();
    c.encoder.d_word = 24;
    c
}

pub fn embeddings(corpus: &SyntheticCorpus) -> StaticEmbeddings {
    StaticEmbeddings::from_pairs(corpus.embeddings.clone()).unwrap()
}

pub fn untrained_model(corpus: &SyntheticCorpus, seed: u64) -> Model {
    let emb = embeddings(corpus);
    Model::init(
        small_model_config(),
        &corpus.train,
        corpus.schema.clone(),
        Some(&emb),
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
    .unwrap()
}
