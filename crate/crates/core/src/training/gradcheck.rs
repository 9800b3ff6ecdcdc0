//! Finite-difference check of the full multi-task loss on a tiny batch.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::synthetic::{generate_synthetic, SyntheticConfig};
use crate::corpus::InstanceBag;
use crate::encoder::StaticEmbeddings;
use crate::error::Result;
use crate::model::{Model, ModelConfig};
use crate::numerics::gradcheck::{check, Coord, GradCheckReport, DEFAULT_STEP};
use crate::numerics::{Tape, Tensor};
use crate::training::{examples, total_loss, LossOptions};

pub const DEFAULT_COORDS_PER_TENSOR: usize = 32;

/// Two bags of 3 and 2 instances over a 4-relation schema, with the static
/// embeddings the generator produced for them.
pub fn micro_batch(seed: u64) -> Result<(Vec<InstanceBag>, crate::corpus::RelationSchema, StaticEmbeddings)> {
    let corpus = generate_synthetic(&SyntheticConfig {
        noise_rate: 0.3,
        num_relations: 4,
        bags_per_relation: 1,
        bag_size: 3,
        seed,
        test_fraction: 0.0,
        ..Default::default()
    })?;
    let mut bags: Vec<InstanceBag> = corpus.train.into_iter().take(2).collect();
    bags[1].truncate(2);
    let embeddings = StaticEmbeddings::from_pairs(corpus.embeddings)?;
    Ok((bags, corpus.schema, embeddings))
}

/// Samples coordinates per tensor: half among entries with a nonzero
/// analytic gradient, the rest uniformly.
fn pick_coords<R: Rng>(grads: &[Tensor], per_tensor: usize, rng: &mut R) -> Vec<Coord> {
    let mut coords = Vec::new();
    for (t, g) in grads.iter().enumerate() {
        let nonzero: Vec<usize> = g
            .data()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        let k = (per_tensor / 2).min(nonzero.len());
        let mut chosen: Vec<usize> = sample(rng, nonzero.len(), k).into_iter().map(|i| nonzero[i]).collect();
        let rest = per_tensor.saturating_sub(k).min(g.numel());
        chosen.extend(sample(rng, g.numel(), rest));
        chosen.sort_unstable();
        chosen.dedup();
        coords.extend(chosen.into_iter().map(|i| (t, i)));
    }
    coords
}

pub fn check_model_gradients(
    model: &Model,
    bags: &[InstanceBag],
    embeddings: &StaticEmbeddings,
    options: LossOptions,
    seed: u64,
    per_tensor: usize,
) -> Result<GradCheckReport> {
    let heuristic = model.heuristic(embeddings);
    let prepared = bags
        .iter()
        .map(|b| model.prepare(b, &heuristic, embeddings))
        .collect::<Result<Vec<_>>>()?;
    let batch = examples(&prepared, &model.schema)?;

    let mut tape = Tape::new();
    let vars = model.params.bind(&mut tape);
    let loss = total_loss(&mut tape, &vars, model, &batch, embeddings, options, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let grads = tape.backward(loss.total)?;
    let analytic: Vec<Tensor> = vars.all().into_iter().map(|v| grads.get(v)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let coords = pick_coords(&analytic, per_tensor, &mut rng);
    let mut params: Vec<Tensor> = model.params.named().into_iter().map(|(_, t)| t.clone()).collect();
    let mut probe = model.clone();
    let f = |p: &[Tensor]| -> Result<f64> {
        for (slot, t) in probe.params.tensors_mut().into_iter().zip(p) {
            slot.data_mut().copy_from_slice(t.data());
        }
        let mut tape = Tape::new();
        let vars = probe.params.bind(&mut tape);
        let loss = total_loss(&mut tape, &vars, &probe, &batch, embeddings, options, &mut ChaCha8Rng::seed_from_u64(seed))?;
        Ok(tape.value(loss.total).item())
    };
    check(f, &mut params, &analytic, &coords, DEFAULT_STEP)
}

/// The seeded micro-batch check behind the `gradcheck` command.
pub fn run(seed: u64) -> Result<GradCheckReport> {
    let (bags, schema, embeddings) = micro_batch(seed)?;
    let model = Model::init(
        ModelConfig::default(),
        &bags,
        schema,
        Some(&embeddings),
        &mut ChaCha8Rng::seed_from_u64(seed),
    )?;
    let options = LossOptions {
        lambda_couple: 1.0,
        max_pairs: crate::coupling::DEFAULT_MAX_PAIRS,
    };
    check_model_gradients(&model, &bags, &embeddings, options, seed, DEFAULT_COORDS_PER_TENSOR)
}
