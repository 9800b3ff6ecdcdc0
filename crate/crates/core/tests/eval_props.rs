mod common;

use dsre_core::corpus::synthetic::{generate_synthetic, SyntheticConfig};
use dsre_core::corpus::PairId;
use dsre_core::eval::{self, GoldSet, Prediction};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn predictions_strategy() -> impl Strategy<Value = (Vec<Prediction>, GoldSet)> {
    prop::collection::vec((0usize..6, 0usize..4, 0u8..8, any::<bool>()), 1..40).prop_filter_map(
        "need at least one gold fact",
        |rows| {
            let mut seen = std::collections::BTreeSet::new();
            let mut preds = Vec::new();
            let mut gold = GoldSet::new();
            for (e, r, s, g) in rows {
                if !seen.insert((e, r)) {
                    continue;
                }
                let pair_id = PairId::new(format!("e{e}"), "o");
                let relation = format!("/r/{r}");
                if g {
                    gold.insert((pair_id.clone(), relation.clone()));
                }
                // coarse scores so ties are common
                preds.push(Prediction { pair_id, relation, score: s as f64 / 8.0 });
            }
            (!gold.is_empty()).then_some((preds, gold))
        },
    )
}

/// Area from first principles: sort with the documented tie order, then
/// recount hits for every prefix.
fn brute_force_auc(preds: &[Prediction], gold: &GoldSet) -> f64 {
    let mut ranked: Vec<&Prediction> = preds.iter().collect();
    ranked.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.pair_id.cmp(&b.pair_id))
            .then(a.relation.cmp(&b.relation))
    });
    let is_gold = |p: &Prediction| gold.contains(&(p.pair_id.clone(), p.relation.clone()));
    let mut curve = Vec::new();
    for k in 1..=ranked.len() {
        let hits = ranked[..k].iter().filter(|p| is_gold(p)).count() as f64;
        curve.push((hits / gold.len() as f64, hits / k as f64));
    }
    let mut area = 0.0;
    let mut prev = (0.0, curve[0].1);
    for &(r, p) in &curve {
        area += (r - prev.0) * (p + prev.1) / 2.0;
        prev = (r, p);
    }
    area
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn curve_ignores_input_order((preds, gold) in predictions_strategy(), seed in any::<u64>()) {
        let mut shuffled = preds.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = eval::pr_curve(&preds, &gold).unwrap();
        let b = eval::pr_curve(&shuffled, &gold).unwrap();
        prop_assert_eq!(a.to_csv(), b.to_csv());
        prop_assert_eq!(a.auc.to_bits(), b.auc.to_bits());
    }

    #[test]
    fn curve_shape_invariants((preds, gold) in predictions_strategy()) {
        let c = eval::pr_curve(&preds, &gold).unwrap();
        prop_assert_eq!(c.points.len(), preds.len());
        prop_assert!(c.points[0].precision == 0.0 || c.points[0].precision == 1.0);
        for w in c.points.windows(2) {
            prop_assert!(w[1].recall >= w[0].recall);
            prop_assert!(w[1].score <= w[0].score);
        }
        for p in &c.points {
            prop_assert!((0.0..=1.0).contains(&p.precision) && (0.0..=1.0).contains(&p.recall));
        }
        prop_assert!((0.0..=1.0).contains(&c.auc));
    }

    #[test]
    fn auc_matches_brute_force((preds, gold) in predictions_strategy()) {
        let c = eval::pr_curve(&preds, &gold).unwrap();
        prop_assert!((c.auc - brute_force_auc(&preds, &gold)).abs() < 1e-12);
    }
}

#[test]
fn every_bag_gets_one_prediction_per_relation() {
    let corpus = common::small_corpus(0.3, 21);
    let emb = common::embeddings(&corpus);
    let model = common::untrained_model(&corpus, 21);
    let bags = &corpus.test[..3];
    let preds = eval::score_corpus(&model, bags, &emb, 1).unwrap();
    assert_eq!(preds.len(), 3 * 4);
    assert!(preds.iter().all(|p| p.relation != "NA"));
    for r in eval::run_bags(&model, bags, &emb, 1).unwrap() {
        assert_eq!(r.scores.len(), 5);
        assert!((r.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn parallel_scoring_is_bit_identical_to_serial() {
    let corpus = common::small_corpus(0.4, 22);
    let emb = common::embeddings(&corpus);
    let model = common::untrained_model(&corpus, 22);
    let bags: Vec<_> = corpus.train.iter().chain(&corpus.test).cloned().collect();
    let serial = eval::run_bags(&model, &bags, &emb, 1).unwrap();
    for threads in [2, 3, 8, 0] {
        let parallel = eval::run_bags(&model, &bags, &emb, threads).unwrap();
        assert_eq!(serial.len(), parallel.len());
        for (a, b) in serial.iter().zip(&parallel) {
            assert_eq!(a.pair_id, b.pair_id);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.scores), bits(&b.scores));
            for (x, y) in a.attention.iter().zip(&b.attention) {
                assert_eq!(bits(x), bits(y));
            }
        }
    }
}

#[test]
fn untrained_model_scores_near_the_shuffled_label_baseline() {
    let corpus = generate_synthetic(&SyntheticConfig {
        noise_rate: 0.3,
        num_relations: 4,
        bags_per_relation: 50,
        bag_size: 3,
        test_fraction: 0.5,
        embedding_dim: 24,
        seed: 23,
        ..Default::default()
    })
    .unwrap();
    let emb = common::embeddings(&corpus);
    let model = common::untrained_model(&corpus, 23);
    let preds = eval::score_corpus(&model, &corpus.test, &emb, 0).unwrap();
    let gold = eval::gold_from_bags(&corpus.test);
    let auc = eval::pr_curve(&preds, &gold).unwrap().auc;

    // expected area when scores carry no information about labels
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut scores: Vec<f64> = preds.iter().map(|p| p.score).collect();
    let trials = 200;
    let mut baseline = 0.0;
    for _ in 0..trials {
        scores.shuffle(&mut rng);
        let permuted: Vec<Prediction> = preds
            .iter()
            .zip(&scores)
            .map(|(p, &s)| Prediction { score: s, ..p.clone() })
            .collect();
        baseline += eval::pr_curve(&permuted, &gold).unwrap().auc / trials as f64;
    }
    let positive_rate = gold.len() as f64 / preds.len() as f64;
    assert!((baseline - positive_rate).abs() < 0.05, "baseline {baseline}, rate {positive_rate}");
    assert!((auc - baseline).abs() < 0.1, "untrained {auc}, baseline {baseline}");
}

#[test]
fn single_instance_bags_attend_fully_at_every_hop() {
    let corpus = common::small_corpus(0.3, 24);
    let emb = common::embeddings(&corpus);
    let model = common::untrained_model(&corpus, 24);
    let mut one = corpus.test[0].clone();
    one.instances.truncate(1);
    let report = eval::attention_report(&model, &[one], &emb).unwrap();
    let tsv = report.to_tsv();
    let row = tsv.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split('\t').collect();
    assert_eq!(&fields[3..3 + model.config.memory.hops], vec!["1.000"; model.config.memory.hops].as_slice());
}

#[test]
fn attention_report_columns_are_distributions() {
    let corpus = common::small_corpus(0.5, 25);
    let emb = common::embeddings(&corpus);
    let model = common::untrained_model(&corpus, 25);
    let report = eval::attention_report(&model, &corpus.test, &emb).unwrap();
    assert_eq!(report.bags.len(), corpus.test.len());
    for b in &report.bags {
        assert_eq!(b.attention.len(), model.config.memory.hops);
        for hop in &b.attention {
            assert_eq!(hop.len(), b.texts.len());
            assert!((hop.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    let tsv = report.to_tsv();
    let mut lines = tsv.lines();
    assert_eq!(lines.next().unwrap(), "pair_id\tinstance\tsentence_id\thop1\thop2\thop3\thop4\ttext");
    let rows: usize = report.bags.iter().map(|b| b.texts.len()).sum();
    assert_eq!(lines.count(), rows);

    let table = report.to_table();
    let first = &report.bags[0];
    assert!(table.starts_with(&format!("{}  gold: ", first.pair_id)));
    assert!(table.contains("hop 1") && table.contains("hop 4"));
    assert!(table.contains(&first.texts[0]));
}
