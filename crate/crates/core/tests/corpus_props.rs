mod common;

use std::collections::BTreeMap;

use dsre_core::corpus::synthetic::{generate_synthetic, SyntheticConfig, SyntheticFiles};
use dsre_core::corpus::{
    featurize, group_bags, load_corpus, read_instances, write_corpus, CorpusOptions, Instance, LabeledInstance, PairId,
    Span, Token, Vocab,
};
use proptest::prelude::*;

const WORDS: &[&str] = &["delhi", "india", "is", "in", "the", "capital", "of", "founded", "met", "a"];
const TAGS: &[&str] = &["NN", "NNP", "VBD", "VBZ", "IN", "DT"];

fn instance_strategy(sid: usize) -> impl Strategy<Value = Instance> {
    (2usize..14)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((0..WORDS.len(), 0..TAGS.len()), n),
                0..n,
                0..n,
                1usize..3,
                any::<bool>(),
            )
        })
        .prop_filter_map("entities must not overlap", move |(toks, a, b, w, swap)| {
            let n = toks.len();
            let (lo, hi) = (a.min(b), a.max(b));
            let s1 = Span::new(lo, (lo + w).min(hi));
            let s2 = Span::new(hi, (hi + 1).min(n));
            if s1.is_empty() || s2.is_empty() || s1.intersects(&s2) {
                return None;
            }
            let tokens = toks
                .into_iter()
                .map(|(w, t)| Token {
                    text: WORDS[w].into(),
                    pos: TAGS[t].into(),
                })
                .collect();
            let (e1, e2) = if swap { (s2, s1) } else { (s1, s2) };
            Instance::new(format!("s{sid:04}"), tokens, e1, e2).ok()
        })
}

fn labeled_strategy() -> impl Strategy<Value = Vec<LabeledInstance>> {
    prop::collection::vec((0usize..4, 0usize..3), 1..20).prop_flat_map(|keys| {
        let parts: Vec<_> = keys
            .into_iter()
            .enumerate()
            .map(|(i, (pair, rel))| {
                instance_strategy(i).prop_map(move |instance| LabeledInstance {
                    pair_id: PairId::new(format!("e{pair}"), format!("f{pair}")),
                    relations: if pair % 2 == 0 { vec![format!("/r/{rel}")] } else { vec![] },
                    instance,
                })
            })
            .collect();
        parts
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_load_is_identity(instances in labeled_strategy()) {
        let bags = group_bags(instances);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        write_corpus(&path, &bags).unwrap();
        let opts = CorpusOptions { memory_capacity: usize::MAX, ..Default::default() };
        prop_assert_eq!(load_corpus(&path, &opts).unwrap(), bags);
    }

    #[test]
    fn grouping_preserves_multiplicity(instances in labeled_strategy()) {
        let n = instances.len();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        write_corpus(&path, &group_bags(instances)).unwrap();
        prop_assert_eq!(read_instances(&path, 100).unwrap().len(), n);
        let opts = CorpusOptions { memory_capacity: usize::MAX, ..Default::default() };
        let total: usize = load_corpus(&path, &opts).unwrap().iter().map(|b| b.instances.len()).sum();
        prop_assert_eq!(total, n);
    }

    #[test]
    fn truncation_keeps_file_order_prefix(instances in labeled_strategy(), cap in 1usize..5) {
        let full = group_bags(instances);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        write_corpus(&path, &full).unwrap();
        let cut = load_corpus(&path, &CorpusOptions { memory_capacity: cap, ..Default::default() }).unwrap();
        for (f, c) in full.iter().zip(&cut) {
            prop_assert!(c.instances.len() <= cap);
            prop_assert_eq!(&c.instances[..], &f.instances[..f.instances.len().min(cap)]);
        }
    }

    #[test]
    fn featurize_is_pure(inst in instance_strategy(0)) {
        let words = Vocab::from_tokens(inst.tokens.iter().map(|t| t.text.as_str()).take(3));
        let tags = Vocab::from_tokens(TAGS.iter().copied());
        let a = featurize(&inst, &words, &tags);
        let b = featurize(&inst.clone(), &words.clone(), &tags.clone());
        prop_assert_eq!(&a, &b);
        for (t, (&o1, &o2)) in a.pos1_offsets.iter().zip(&a.pos2_offsets).enumerate() {
            prop_assert!((-30..=30).contains(&o1) && (-30..=30).contains(&o2));
            prop_assert_eq!(o1 == 0, inst.e1_span.contains(t));
            prop_assert_eq!(o2 == 0, inst.e2_span.contains(t));
        }
    }
}

fn vbd_tokens(inst: &Instance) -> Vec<&str> {
    inst.tokens.iter().filter(|t| t.pos == "VBD").map(|t| t.text.as_str()).collect()
}

#[test]
fn noiseless_bags_are_decided_by_their_majority_verb() {
    let corpus = generate_synthetic(&SyntheticConfig::default()).unwrap();
    let lexicon: BTreeMap<&str, usize> = corpus
        .lexicons
        .iter()
        .enumerate()
        .flat_map(|(k, verbs)| verbs.iter().map(move |v| (v.as_str(), k + 1)))
        .collect();
    for bag in corpus.train.iter().chain(&corpus.test) {
        let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
        for inst in &bag.instances {
            for v in vbd_tokens(inst) {
                if let Some(&r) = lexicon.get(v) {
                    *votes.entry(r).or_default() += 1;
                }
            }
        }
        let (&winner, _) = votes.iter().max_by_key(|(r, n)| (**n, std::cmp::Reverse(**r))).unwrap();
        assert_eq!(corpus.schema.labels(bag).unwrap(), vec![winner], "bag {}", bag.pair_id);
    }
}

#[test]
fn noise_rate_half_gives_two_noise_instances_per_bag_of_four() {
    let corpus = generate_synthetic(&SyntheticConfig {
        noise_rate: 0.5,
        ..Default::default()
    })
    .unwrap();
    let bags: Vec<_> = corpus.train.iter().chain(&corpus.test).collect();
    let noise: usize = bags
        .iter()
        .flat_map(|b| &b.instances)
        .filter(|i| !corpus.evidence[&i.sentence_id])
        .count();
    let mean = noise as f64 / bags.len() as f64;
    // 400 bags: the standard error of the mean is 0.05
    assert!((mean - 2.0).abs() < 0.2, "mean noise per bag {mean}");
}

#[test]
fn noiseless_corpus_is_all_evidence() {
    let corpus = generate_synthetic(&SyntheticConfig::default()).unwrap();
    assert!(corpus.evidence.values().all(|e| *e));
}

#[test]
fn fixed_seed_gives_identical_files() {
    let config = SyntheticConfig {
        noise_rate: 0.3,
        bags_per_relation: 5,
        ..Default::default()
    };
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let f1 = generate_synthetic(&config).unwrap().write(d1.path()).unwrap();
    let f2 = generate_synthetic(&config).unwrap().write(d2.path()).unwrap();
    let files = |f: &SyntheticFiles| {
        [&f.train, &f.test, &f.schema, &f.embeddings, &f.sidecar, &f.train_gold, &f.test_gold]
            .map(|p| std::fs::read(p).unwrap())
    };
    assert_eq!(files(&f1), files(&f2));
}

#[test]
fn every_bag_mentions_only_its_pair() {
    let corpus = common::small_corpus(0.4, 3);
    for bag in corpus.train.iter().chain(&corpus.test) {
        for inst in &bag.instances {
            let ents = inst.entity_tokens();
            assert!(ents.contains(&bag.pair_id.e1.as_str()) && ents.contains(&bag.pair_id.e2.as_str()));
        }
    }
}
