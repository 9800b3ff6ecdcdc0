//! Multi-hop attention over the instances of a bag.
//!
//! Instance encodings are projected into memory vectors `m_i` (matched
//! against the query) and output vectors `c_i` (aggregated into the
//! response). The first query is a heuristic mixture of memory vectors;
//! every hop then attends with `softmax(u . m_i)` and updates
//! `u <- u H + sum_i p_i c_i`. All maps act on row vectors.

use rand::Rng;

use crate::corpus::{InstanceBag, RelationSchema, DEFAULT_MEMORY_CAPACITY, NA};
use crate::encoder::{cosine, StaticEmbeddings};
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryConfig {
    pub hops: usize,
    pub memory_capacity: usize,
    pub latent_dim: usize,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            hops: 4,
            memory_capacity: DEFAULT_MEMORY_CAPACITY,
            latent_dim: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryParams {
    /// `latent x latent`, encoding -> memory vector.
    pub p_m: Tensor,
    /// `latent x latent`, encoding -> output vector.
    pub p_c: Tensor,
    /// `latent x latent` hop transition.
    pub h: Tensor,
    /// `latent x |R|` relation classifier.
    pub w_rel: Tensor,
    pub b_rel: Tensor,
}

fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    Tensor::uniform(&[rows, cols], (6.0 / (rows + cols) as f64).sqrt(), rng)
}

impl MemoryParams {
    pub fn init<R: Rng>(config: &MemoryConfig, num_relations: usize, rng: &mut R) -> Self {
        let d = config.latent_dim;
        MemoryParams {
            p_m: glorot(d, d, rng),
            p_c: glorot(d, d, rng),
            h: glorot(d, d, rng),
            w_rel: glorot(d, num_relations, rng),
            b_rel: Tensor::zeros(&[1, num_relations]),
        }
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("memory.p_m".into(), &self.p_m),
            ("memory.p_c".into(), &self.p_c),
            ("memory.h".into(), &self.h),
            ("memory.w_rel".into(), &self.w_rel),
            ("memory.b_rel".into(), &self.b_rel),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.p_m, &mut self.p_c, &mut self.h, &mut self.w_rel, &mut self.b_rel]
    }

    pub fn bind(&self, tape: &mut Tape) -> MemoryVars {
        MemoryVars {
            p_m: tape.param(self.p_m.clone()),
            p_c: tape.param(self.p_c.clone()),
            h: tape.param(self.h.clone()),
            w_rel: tape.param(self.w_rel.clone()),
            b_rel: tape.param(self.b_rel.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MemoryVars {
    pub p_m: Var,
    pub p_c: Var,
    pub h: Var,
    pub w_rel: Var,
    pub b_rel: Var,
}

impl MemoryVars {
    pub fn all(&self) -> Vec<Var> {
        vec![self.p_m, self.p_c, self.h, self.w_rel, self.b_rel]
    }
}

/// Per-hop attention over one bag.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionTrace {
    pub pair_id: String,
    /// `hops[k][i]`: probability of instance `i` at hop `k + 1`.
    pub hops: Vec<Vec<f64>>,
}

pub struct MemoryOutput {
    /// `1 x |R|` unnormalised relation scores.
    pub logits: Var,
    /// `1 x |R|` relation probabilities.
    pub scores: Var,
    pub attention: Vec<Vec<f64>>,
}

/// Runs the hops for one bag. `encodings` is `B x latent`; `initial` is the
/// heuristic mixing distribution over the `B` instances (a constant).
pub fn memnet_forward(
    tape: &mut Tape,
    vars: &MemoryVars,
    encodings: Var,
    initial: &[f64],
    config: &MemoryConfig,
) -> Result<MemoryOutput> {
    let b = tape.value(encodings).rows();
    if initial.is_empty() {
        return Err(Error::Empty("bag"));
    }
    if initial.len() != b {
        return Err(Error::Shape {
            op: "memnet_forward",
            left: tape.value(encodings).shape().to_vec(),
            right: vec![initial.len()],
        });
    }
    if b > config.memory_capacity {
        return Err(Error::InvalidArgument(format!(
            "bag of {b} instances exceeds memory capacity {}",
            config.memory_capacity
        )));
    }
    let memory = tape.matmul(encodings, vars.p_m)?;
    let output = tape.matmul(encodings, vars.p_c)?;
    let memory_t = tape.transpose(memory)?;

    let p0 = tape.constant(Tensor::row(initial.to_vec()));
    let mut u = tape.matmul(p0, memory)?;
    let mut attention = Vec::with_capacity(config.hops);
    for _ in 0..config.hops {
        let logits = tape.matmul(u, memory_t)?;
        let p = tape.softmax(logits, 1)?;
        attention.push(tape.value(p).data().to_vec());
        let o = tape.matmul(p, output)?;
        let carried = tape.matmul(u, vars.h)?;
        u = tape.add(carried, o)?;
    }
    let z = tape.matmul(u, vars.w_rel)?;
    let logits = tape.add_row(z, vars.b_rel)?;
    let scores = tape.softmax(logits, 1)?;
    Ok(MemoryOutput {
        logits,
        scores,
        attention,
    })
}

/// Lowercased non-empty pieces of a relation id split on `/`, `_` and `.`.
pub fn relation_phrase_tokens(relation: &str) -> Vec<String> {
    relation
        .split(['/', '_', '.'])
        .filter(|p| !p.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Representative {
    pub sentence_id: String,
    pub tokens: Vec<String>,
}

/// One entry per non-NA relation in schema order; `None` marks a relation
/// whose phrase matched no training instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepresentativeSet {
    pub relations: Vec<String>,
    pub entries: Vec<Option<Representative>>,
}

/// Shortest training instance sharing a token with each relation's phrase;
/// ties go to the lexicographically smaller sentence text, then sentence id.
pub fn select_representatives(bags: &[InstanceBag], schema: &RelationSchema) -> RepresentativeSet {
    let relations: Vec<String> = schema.relations().iter().filter(|r| *r != NA).cloned().collect();
    let entries = relations
        .iter()
        .map(|rel| {
            let phrase = relation_phrase_tokens(rel);
            bags.iter()
                .flat_map(|b| &b.instances)
                .filter(|inst| inst.tokens.iter().any(|t| phrase.contains(&t.text)))
                .map(|inst| (inst.len(), inst.text(), inst.sentence_id.clone(), inst))
                .min_by(|a, b| (a.0, &a.1, &a.2).cmp(&(b.0, &b.1, &b.2)))
                .map(|(_, _, sid, inst)| Representative {
                    sentence_id: sid,
                    tokens: inst.tokens.iter().map(|t| t.text.clone()).collect(),
                })
        })
        .collect();
    RepresentativeSet { relations, entries }
}

/// Scores bag instances against the representatives with static vectors.
#[derive(Clone, Debug)]
pub struct HeuristicAttention {
    representative_means: Vec<Vec<f64>>,
}

impl HeuristicAttention {
    pub fn new(reps: &RepresentativeSet, embeddings: &StaticEmbeddings) -> Self {
        HeuristicAttention {
            representative_means: reps
                .entries
                .iter()
                .flatten()
                .map(|r| embeddings.mean(r.tokens.iter().map(String::as_str)))
                .collect(),
        }
    }

    /// Best cosine against any non-empty representative, 0 if there are none.
    pub fn score<'a>(&self, tokens: impl IntoIterator<Item = &'a str>, embeddings: &StaticEmbeddings) -> f64 {
        let mean = embeddings.mean(tokens);
        self.representative_means
            .iter()
            .map(|r| cosine(&mean, r))
            .fold(None, |best: Option<f64>, s| Some(best.map_or(s, |b| b.max(s))))
            .unwrap_or(0.0)
    }

    /// Softmax of the per-instance scores.
    pub fn distribution(&self, bag: &InstanceBag, embeddings: &StaticEmbeddings) -> Vec<f64> {
        let scores: Vec<f64> = bag
            .instances
            .iter()
            .map(|inst| self.score(inst.tokens.iter().map(|t| t.text.as_str()), embeddings))
            .collect();
        softmax(&scores)
    }
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| x / total).collect()
}
