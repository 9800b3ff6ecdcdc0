//! Siamese coupling head and its similarity targets.
//!
//! Two instance encodings `h1`, `h2` from the same encoder are combined as
//! `[h1 * h2 : h1 - h2]` and mapped through a sigmoid layer to two outputs:
//! verb-phrase similarity (column 0) and entity-pair similarity (column 1).

use rand::seq::index::sample;
use rand::Rng;

use crate::corpus::Instance;
use crate::encoder::{cosine, StaticEmbeddings};
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};

pub const DEFAULT_MAX_PAIRS: usize = 25;
pub const VERB: usize = 0;
pub const ENTITY: usize = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingParams {
    /// `2 * latent x 2`
    pub w_g: Tensor,
    /// `1 x 2`
    pub b_g: Tensor,
}

impl CouplingParams {
    pub fn init<R: Rng>(latent_dim: usize, rng: &mut R) -> Self {
        let fan_in = 2 * latent_dim;
        CouplingParams {
            w_g: Tensor::uniform(&[fan_in, 2], (6.0 / (fan_in + 2) as f64).sqrt(), rng),
            b_g: Tensor::zeros(&[1, 2]),
        }
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        vec![("coupling.w_g".into(), &self.w_g), ("coupling.b_g".into(), &self.b_g)]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_g, &mut self.b_g]
    }

    pub fn bind(&self, tape: &mut Tape) -> CouplingVars {
        CouplingVars {
            w_g: tape.param(self.w_g.clone()),
            b_g: tape.param(self.b_g.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CouplingVars {
    pub w_g: Var,
    pub b_g: Var,
}

impl CouplingVars {
    pub fn all(&self) -> Vec<Var> {
        vec![self.w_g, self.b_g]
    }
}

/// Elementwise product and difference, joined column-wise.
pub fn combine(tape: &mut Tape, h1: Var, h2: Var) -> Result<Var> {
    let sym = tape.mul(h1, h2)?;
    let asym = tape.sub(h1, h2)?;
    tape.concat(&[sym, asym], 1)
}

/// `sigmoid([h1*h2 : h1-h2] W_g + b_g)` for `P` stacked pairs; returns `P x 2`.
pub fn coupling_forward(tape: &mut Tape, vars: &CouplingVars, h1: Var, h2: Var) -> Result<Var> {
    let joined = combine(tape, h1, h2)?;
    let z = tape.matmul(joined, vars.w_g)?;
    let z = tape.add_row(z, vars.b_g)?;
    Ok(tape.sigmoid(z))
}

/// Max pairwise cosine between the tokens of two phrases, clamped to `[0, 1]`.
/// `None` when either phrase has no token with a static vector.
pub fn similarity_target(a: &[&str], b: &[&str], embeddings: &StaticEmbeddings) -> Option<f64> {
    let va: Vec<&[f64]> = a.iter().filter_map(|t| embeddings.get(t)).collect();
    let vb: Vec<&[f64]> = b.iter().filter_map(|t| embeddings.get(t)).collect();
    let mut best: Option<f64> = None;
    for x in &va {
        for y in &vb {
            let s = cosine(x, y);
            best = Some(best.map_or(s, |m| m.max(s)));
        }
    }
    best.map(|s| s.clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingPair {
    pub instance_a: usize,
    pub instance_b: usize,
    pub target_verb: Option<f64>,
    pub target_ent: Option<f64>,
}

impl CouplingPair {
    pub fn targets(&self) -> [Option<f64>; 2] {
        [self.target_verb, self.target_ent]
    }
}

/// Cross product of two bags' instances, subsampled without replacement to
/// at most `max_pairs`, in row-major (a, b) order.
pub fn sample_coupling_pairs<R: Rng>(
    bag_a: &[Instance],
    bag_b: &[Instance],
    max_pairs: usize,
    embeddings: &StaticEmbeddings,
    rng: &mut R,
) -> Vec<CouplingPair> {
    let total = bag_a.len() * bag_b.len();
    let mut chosen: Vec<usize> = if total <= max_pairs {
        (0..total).collect()
    } else {
        sample(rng, total, max_pairs).into_vec()
    };
    chosen.sort_unstable();
    chosen
        .into_iter()
        .map(|k| {
            let (i, j) = (k / bag_b.len(), k % bag_b.len());
            let (a, b) = (&bag_a[i], &bag_b[j]);
            CouplingPair {
                instance_a: i,
                instance_b: j,
                target_verb: similarity_target(&a.verb_tokens(), &b.verb_tokens(), embeddings),
                target_ent: similarity_target(&a.entity_tokens(), &b.entity_tokens(), embeddings),
            }
        })
        .collect()
}

/// Squared error per output, averaged over the defined targets of each pair,
/// then over pairs with at least one defined target. Returns `None` when no
/// pair carries a target.
pub fn masked_mse(tape: &mut Tape, g: Var, targets: &[[Option<f64>; 2]]) -> Result<Option<Var>> {
    let rows = tape.value(g).rows();
    if rows != targets.len() || tape.value(g).cols() != 2 {
        return Err(Error::Shape {
            op: "masked_mse",
            left: tape.value(g).shape().to_vec(),
            right: vec![targets.len(), 2],
        });
    }
    let valid = targets.iter().filter(|t| t.iter().any(Option::is_some)).count();
    if valid == 0 {
        return Ok(None);
    }
    let mut target = Vec::with_capacity(rows * 2);
    let mut weight = Vec::with_capacity(rows * 2);
    for t in targets {
        let defined = t.iter().filter(|x| x.is_some()).count();
        for x in t {
            target.push(x.unwrap_or(0.0));
            weight.push(match x {
                Some(_) => 1.0 / (defined as f64 * valid as f64),
                None => 0.0,
            });
        }
    }
    let target = tape.constant(Tensor::matrix(rows, 2, target)?);
    let weight = tape.constant(Tensor::matrix(rows, 2, weight)?);
    let se = tape.squared_error(g, target)?;
    let weighted = tape.mul(se, weight)?;
    Ok(Some(tape.sum(weighted)))
}
