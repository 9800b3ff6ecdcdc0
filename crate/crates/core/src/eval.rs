//! Held-out evaluation: bag scoring, precision/recall curves, classification
//! metrics and attention reports.

use std::borrow::Cow;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use crate::corpus::{InstanceBag, PairId, RelationSchema};
use crate::encoder::StaticEmbeddings;
use crate::error::{Error, Result};
use crate::model::Model;

/// Gold facts as `(pair, relation)`.
pub type GoldSet = BTreeSet<(PairId, String)>;

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub pair_id: PairId,
    pub relation: String,
    pub score: f64,
}

/// Model output for one bag.
#[derive(Clone, Debug, PartialEq)]
pub struct BagResult {
    pub pair_id: PairId,
    /// Probabilities in schema order, NA included.
    pub scores: Vec<f64>,
    /// `attention[k][i]`: weight of instance `i` at hop `k + 1`.
    pub attention: Vec<Vec<f64>>,
}

fn resolve_threads(threads: usize) -> usize {
    if threads == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        threads
    }
}

/// Runs the model over every bag, in input order. Bags above the memory
/// capacity are cut to their first instances with a single warning.
/// `threads == 0` uses all available cores; the result does not depend on it.
pub fn run_bags(model: &Model, bags: &[InstanceBag], embeddings: &StaticEmbeddings, threads: usize) -> Result<Vec<BagResult>> {
    let capacity = model.config.memory.memory_capacity;
    let warned = AtomicBool::new(false);
    let heuristic = model.heuristic(embeddings);
    let one = |bag: &InstanceBag| -> Result<BagResult> {
        let bag: Cow<InstanceBag> = if bag.instances.len() > capacity {
            if !warned.swap(true, Ordering::Relaxed) {
                eprintln!(
                    "warning: bag {} has {} instances; keeping the first {capacity} (further warnings suppressed)",
                    bag.pair_id,
                    bag.instances.len()
                );
            }
            let mut cut = bag.clone();
            cut.truncate(capacity);
            Cow::Owned(cut)
        } else {
            Cow::Borrowed(bag)
        };
        let prepared = model.prepare(&bag, &heuristic, embeddings)?;
        let (scores, attention) = model.predict(&prepared)?;
        Ok(BagResult {
            pair_id: bag.pair_id.clone(),
            scores,
            attention,
        })
    };

    let threads = resolve_threads(threads).min(bags.len().max(1));
    if threads <= 1 {
        return bags.iter().map(one).collect();
    }
    let chunk = bags.len().div_ceil(threads);
    let parts: Vec<Result<Vec<BagResult>>> = std::thread::scope(|s| {
        let handles: Vec<_> = bags
            .chunks(chunk)
            .map(|part| s.spawn(|| part.iter().map(&one).collect::<Result<Vec<_>>>()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scoring thread panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(bags.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// One prediction per (bag, non-NA relation), sorted by pair then relation.
pub fn predictions(results: &[BagResult], schema: &RelationSchema) -> Vec<Prediction> {
    let mut out: Vec<Prediction> = results
        .iter()
        .flat_map(|r| {
            (1..schema.len()).map(move |k| Prediction {
                pair_id: r.pair_id.clone(),
                relation: schema.name(k).to_string(),
                score: r.scores[k],
            })
        })
        .collect();
    out.sort_by(|a, b| (&a.pair_id, &a.relation).cmp(&(&b.pair_id, &b.relation)));
    out
}

pub fn score_corpus(model: &Model, bags: &[InstanceBag], embeddings: &StaticEmbeddings, threads: usize) -> Result<Vec<Prediction>> {
    Ok(predictions(&run_bags(model, bags, embeddings, threads)?, &model.schema))
}

pub fn gold_from_bags(bags: &[InstanceBag]) -> GoldSet {
    bags.iter()
        .flat_map(|b| b.relations.iter().map(|r| (b.pair_id.clone(), r.clone())))
        .collect()
}

/// Reads `e1<TAB>e2<TAB>relation` lines; NA lines are ignored.
pub fn load_gold(path: &Path) -> Result<GoldSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut gold = GoldSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [e1, e2, rel] = fields[..] else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        };
        if rel != crate::corpus::NA {
            gold.insert((PairId::new(e1, e2), rel.to_string()));
        }
    }
    Ok(gold)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrPoint {
    pub rank: usize,
    pub pair_id: PairId,
    pub relation: String,
    pub score: f64,
    pub correct: bool,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub auc: f64,
}

/// Ranks predictions by descending score (ties by pair, then relation) and
/// records precision and recall at every rank.
///
/// The area is the trapezoid sum over consecutive (recall, precision) points,
/// starting from recall 0 at the rank-1 precision.
pub fn pr_curve(predictions: &[Prediction], gold: &GoldSet) -> Result<PrCurve> {
    if gold.is_empty() {
        return Err(Error::Empty("gold fact set"));
    }
    let mut ranked: Vec<&Prediction> = predictions.iter().collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.pair_id.cmp(&b.pair_id))
            .then_with(|| a.relation.cmp(&b.relation))
    });
    let total = gold.len() as f64;
    let mut hits = 0usize;
    let mut points = Vec::with_capacity(ranked.len());
    for (i, p) in ranked.into_iter().enumerate() {
        let correct = gold.contains(&(p.pair_id.clone(), p.relation.clone()));
        hits += correct as usize;
        points.push(PrPoint {
            rank: i + 1,
            pair_id: p.pair_id.clone(),
            relation: p.relation.clone(),
            score: p.score,
            correct,
            precision: hits as f64 / (i + 1) as f64,
            recall: hits as f64 / total,
        });
    }
    let mut auc = 0.0;
    let mut prev = points.first().map(|p| (0.0, p.precision));
    for p in &points {
        if let Some((r0, p0)) = prev {
            auc += (p.recall - r0) * (p.precision + p0) / 2.0;
        }
        prev = Some((p.recall, p.precision));
    }
    Ok(PrCurve { points, auc })
}

impl PrCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,score,correct,precision,recall\n");
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{:.9},{},{:.9},{:.9}",
                p.rank, p.score, p.correct as u8, p.precision, p.recall
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        format!("auc_pr={:.6}", self.auc)
    }
}

/// Index of the highest score; the first one wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Macro-averaged F1 over every class that occurs in `gold` or `predicted`.
pub fn macro_f1(gold: &[usize], predicted: &[usize]) -> f64 {
    assert_eq!(gold.len(), predicted.len(), "label lists differ in length");
    let classes: BTreeSet<usize> = gold.iter().chain(predicted).copied().collect();
    if classes.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for &c in &classes {
        let tp = gold.iter().zip(predicted).filter(|(g, p)| **g == c && **p == c).count() as f64;
        let fp = gold.iter().zip(predicted).filter(|(g, p)| **g != c && **p == c).count() as f64;
        let fn_ = gold.iter().zip(predicted).filter(|(g, p)| **g == c && **p != c).count() as f64;
        if tp > 0.0 {
            sum += 2.0 * tp / (2.0 * tp + fp + fn_);
        }
    }
    sum / classes.len() as f64
}

/// Bag-level classification: the first gold label against the argmax over
/// all relations, NA included.
pub fn classification_labels(results: &[BagResult], bags: &[InstanceBag], schema: &RelationSchema) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut gold = Vec::with_capacity(bags.len());
    let mut predicted = Vec::with_capacity(bags.len());
    for (r, b) in results.iter().zip(bags) {
        gold.push(schema.labels(b)?[0]);
        predicted.push(argmax(&r.scores));
    }
    Ok((gold, predicted))
}

/// Per-bag, per-hop attention alongside each sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionReport {
    pub hops: usize,
    pub bags: Vec<BagAttention>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BagAttention {
    pub pair_id: PairId,
    pub gold: Vec<String>,
    pub predicted: String,
    pub sentence_ids: Vec<String>,
    pub texts: Vec<String>,
    pub attention: Vec<Vec<f64>>,
}

pub fn attention_report(model: &Model, bags: &[InstanceBag], embeddings: &StaticEmbeddings) -> Result<AttentionReport> {
    let capacity = model.config.memory.memory_capacity;
    let results = run_bags(model, bags, embeddings, 1)?;
    let bags = results
        .into_iter()
        .zip(bags)
        .map(|(r, b)| {
            let kept = &b.instances[..b.instances.len().min(capacity)];
            BagAttention {
                pair_id: r.pair_id,
                gold: b.relations.iter().cloned().collect(),
                predicted: model.schema.name(argmax(&r.scores)).to_string(),
                sentence_ids: kept.iter().map(|i| i.sentence_id.clone()).collect(),
                texts: kept.iter().map(|i| i.text()).collect(),
                attention: r.attention,
            }
        })
        .collect();
    Ok(AttentionReport {
        hops: model.config.memory.hops,
        bags,
    })
}

impl AttentionReport {
    /// One row per instance, one probability column per hop.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("pair_id\tinstance\tsentence_id");
        for k in 1..=self.hops {
            let _ = write!(s, "\thop{k}");
        }
        s.push_str("\ttext\n");
        for b in &self.bags {
            for (i, (sid, text)) in b.sentence_ids.iter().zip(&b.texts).enumerate() {
                let _ = write!(s, "{}\t{i}\t{sid}", b.pair_id);
                for hop in &b.attention {
                    let _ = write!(s, "\t{:.3}", hop[i]);
                }
                let _ = writeln!(s, "\t{text}");
            }
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for b in &self.bags {
            let gold = if b.gold.is_empty() {
                crate::corpus::NA.to_string()
            } else {
                b.gold.join(", ")
            };
            let _ = writeln!(s, "{}  gold: {gold}  predicted: {}", b.pair_id, b.predicted);
            let _ = write!(s, "  {:>3}", "#");
            for k in 1..=self.hops {
                let _ = write!(s, "  {:>6}", format!("hop {k}"));
            }
            s.push_str("  sentence\n");
            for (i, text) in b.texts.iter().enumerate() {
                let _ = write!(s, "  {i:>3}");
                for hop in &b.attention {
                    let _ = write!(s, "  {:>6.3}", hop[i]);
                }
                let _ = writeln!(s, "  {text}");
            }
            s.push('\n');
        }
        s
    }
}
