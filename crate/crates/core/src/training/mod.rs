//! Multi-task objective and the training loop.
//!
//! The loss for a batch is the mean relation cross-entropy over its bags
//! plus `lambda_couple` times the mean masked squared error of the coupling
//! head over instance pairs drawn from consecutive bags (0 with 1, 2 with 3,
//! ...). Both terms share one encoder pass.

pub mod checkpoint;
mod config;
pub mod gradcheck;

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::TrainConfig;

use crate::corpus::{InstanceBag, RelationSchema};
use crate::coupling::{coupling_forward, masked_mse, sample_coupling_pairs};
use crate::encoder::StaticEmbeddings;
use crate::error::{Error, Result};
use crate::eval;
use crate::model::{Model, ModelConfig, ModelVars, PreparedBag};
use crate::numerics::{AdamState, Tape, Tensor, Var};
use crate::util::write_atomic;

/// One training example: a bag paired with one of its gold labels.
#[derive(Clone, Copy, Debug)]
pub struct Example<'p, 'a> {
    pub bag: &'p PreparedBag<'a>,
    pub label: usize,
}

/// Expands every bag into one example per gold relation (NA when it has none).
pub fn examples<'p, 'a>(bags: &'p [PreparedBag<'a>], schema: &RelationSchema) -> Result<Vec<Example<'p, 'a>>> {
    let mut out = Vec::new();
    for b in bags {
        for label in schema.labels(b.bag)? {
            out.push(Example { bag: b, label });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct LossOptions {
    pub lambda_couple: f64,
    pub max_pairs: usize,
}

impl From<&TrainConfig> for LossOptions {
    fn from(c: &TrainConfig) -> Self {
        LossOptions {
            lambda_couple: c.lambda_couple,
            max_pairs: c.m_max,
        }
    }
}

pub struct Loss {
    pub total: Var,
    pub relation: f64,
    /// `None` when coupling is disabled or no pair carried a target.
    pub coupling: Option<f64>,
}

pub fn total_loss<R: Rng>(
    tape: &mut Tape,
    vars: &ModelVars,
    model: &Model,
    batch: &[Example],
    embeddings: &StaticEmbeddings,
    options: LossOptions,
    rng: &mut R,
) -> Result<Loss> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let prepared: Vec<&PreparedBag> = batch.iter().map(|e| e.bag).collect();
    let (encodings, ranges) = model.encode_bags(tape, vars, &prepared)?;

    let mut terms = Vec::with_capacity(batch.len());
    for (ex, rows) in batch.iter().zip(&ranges) {
        let out = model.forward_rows(tape, vars, encodings, rows, ex.bag)?;
        let log_p = tape.log_softmax(out.logits, 1)?;
        let mut one_hot = vec![0.0; model.schema.len()];
        one_hot[ex.label] = -1.0;
        let pick = tape.constant(Tensor::row(one_hot));
        let nll = tape.mul(log_p, pick)?;
        terms.push(tape.sum(nll));
    }
    let stacked = tape.concat(&terms, 0)?;
    let relation = tape.mean(stacked);
    let relation_value = tape.value(relation).item();

    if options.lambda_couple == 0.0 {
        return Ok(Loss {
            total: relation,
            relation: relation_value,
            coupling: None,
        });
    }

    let mut rows_a = Vec::new();
    let mut rows_b = Vec::new();
    let mut targets = Vec::new();
    for k in (0..batch.len().saturating_sub(1)).step_by(2) {
        let (a, b) = (batch[k].bag, batch[k + 1].bag);
        if a.pair_id() == b.pair_id() {
            continue;
        }
        for p in sample_coupling_pairs(&a.bag.instances, &b.bag.instances, options.max_pairs, embeddings, rng) {
            rows_a.push(ranges[k][p.instance_a]);
            rows_b.push(ranges[k + 1][p.instance_b]);
            targets.push(p.targets());
        }
    }
    if rows_a.is_empty() {
        return Ok(Loss {
            total: relation,
            relation: relation_value,
            coupling: None,
        });
    }
    let h1 = tape.gather_rows(encodings, &rows_a)?;
    let h2 = tape.gather_rows(encodings, &rows_b)?;
    let g = coupling_forward(tape, &vars.coupling, h1, h2)?;
    let Some(coupling) = masked_mse(tape, g, &targets)? else {
        return Ok(Loss {
            total: relation,
            relation: relation_value,
            coupling: None,
        });
    };
    let coupling_value = tape.value(coupling).item();
    let weighted = tape.scale(coupling, options.lambda_couple);
    let total = tape.add(relation, weighted)?;
    Ok(Loss {
        total,
        relation: relation_value,
        coupling: Some(coupling_value),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_auc_pr: Option<f64>,
}

pub fn metrics_csv(rows: &[EpochMetrics]) -> String {
    let mut s = String::from("epoch,train_loss,dev_auc_pr\n");
    for r in rows {
        let dev = r.dev_auc_pr.map(|v| format!("{v:.6}")).unwrap_or_default();
        let _ = writeln!(s, "{},{:.8},{}", r.epoch, r.train_loss, dev);
    }
    s
}

pub struct TrainOutcome {
    pub model: Model,
    pub metrics: Vec<EpochMetrics>,
    pub initial_loss: f64,
}

/// Mean batch loss over `examples` without updating anything.
pub fn evaluate_loss(
    model: &Model,
    examples: &[Example],
    embeddings: &StaticEmbeddings,
    options: LossOptions,
    batch_size: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut n = 0;
    for batch in examples.chunks(batch_size) {
        let mut tape = Tape::new();
        let vars = model.params.bind(&mut tape);
        let loss = total_loss(&mut tape, &vars, model, batch, embeddings, options, &mut rng)?;
        total += tape.value(loss.total).item();
        n += 1;
    }
    Ok(total / n.max(1) as f64)
}

/// Trains a fresh model. When `output_dir` is given, writes `metrics.csv`,
/// `checkpoint_epoch<N>.ckpt` files and, after at least one epoch,
/// `final.ckpt` there.
pub fn train(
    train_bags: &[InstanceBag],
    schema: &RelationSchema,
    embeddings: &StaticEmbeddings,
    config: &TrainConfig,
    model_config: ModelConfig,
    dev: Option<&[InstanceBag]>,
    output_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_bags.is_empty() {
        return Err(Error::Empty("training corpus"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = Model::init(model_config, train_bags, schema.clone(), Some(embeddings), &mut rng)?;
    let heuristic = model.heuristic(embeddings);
    let prepared = train_bags
        .iter()
        .map(|b| model.prepare(b, &heuristic, embeddings))
        .collect::<Result<Vec<_>>>()?;
    let mut order = examples(&prepared, schema)?;
    let options = LossOptions::from(config);
    let snapshot = config.to_text();

    if let Some(dir) = output_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        checkpoint::save(&dir.join("checkpoint_epoch0.ckpt"), &model, &snapshot)?;
    }
    let initial_loss = evaluate_loss(&model, &order, embeddings, options, config.batch_bags, config.seed)?;

    let shapes: Vec<Vec<usize>> = model.params.named().iter().map(|(_, t)| t.shape().to_vec()).collect();
    let mut adam = AdamState::new(config.learning_rate, shapes.iter().map(Vec::as_slice))?;
    let mut metrics = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for batch in order.chunks(config.batch_bags) {
            let mut tape = Tape::new();
            let vars = model.params.bind(&mut tape);
            let loss = total_loss(&mut tape, &vars, &model, batch, embeddings, options, &mut rng)?;
            let value = tape.value(loss.total).item();
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    pair_ids: batch.iter().map(|e| e.bag.pair_id().to_string()).collect(),
                });
            }
            let grads = tape.backward(loss.total)?;
            let grads: Vec<Tensor> = vars.all().into_iter().map(|v| grads.get(v)).collect();
            adam.apply(model.params.tensors_mut(), &grads)?;
            epoch_loss += value;
            batches += 1;
        }
        let dev_auc_pr = match dev {
            Some(dev_bags) if !dev_bags.is_empty() => {
                let predictions = eval::score_corpus(&model, dev_bags, embeddings, 1)?;
                let gold = eval::gold_from_bags(dev_bags);
                if gold.is_empty() {
                    None
                } else {
                    Some(eval::pr_curve(&predictions, &gold)?.auc)
                }
            }
            _ => None,
        };
        metrics.push(EpochMetrics {
            epoch,
            train_loss: epoch_loss / batches as f64,
            dev_auc_pr,
        });
        if let Some(dir) = output_dir {
            write_atomic(&dir.join("metrics.csv"), metrics_csv(&metrics).as_bytes())?;
            if config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 {
                checkpoint::save(&dir.join(format!("checkpoint_epoch{epoch}.ckpt")), &model, &snapshot)?;
            }
        }
    }
    if let Some(dir) = output_dir {
        write_atomic(&dir.join("metrics.csv"), metrics_csv(&metrics).as_bytes())?;
        if config.epochs > 0 {
            checkpoint::save(&dir.join("final.ckpt"), &model, &snapshot)?;
        }
    }
    Ok(TrainOutcome {
        model,
        metrics,
        initial_loss,
    })
}
