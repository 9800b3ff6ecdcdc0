//! Checkpoint container.
//!
//! Layout: the line `dsre-checkpoint 1`, a line holding the byte length of
//! a JSON header, the header itself (config snapshot, model shape,
//! vocabularies, schema, representatives and the tensor manifest), then the
//! tensors as little-endian `f32` in manifest order.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{RelationSchema, Vocab};
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::memory::{MemoryConfig, Representative, RepresentativeSet};
use crate::model::{Model, ModelConfig, ModelParams};
use crate::numerics::Tensor;
use crate::util::write_atomic;

const MAGIC: &str = "dsre-checkpoint 1";

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct RepresentativeRecord {
    sentence_id: String,
    tokens: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: String,
    d_word: usize,
    d_pos_tag: usize,
    d_position: usize,
    filter_widths: Vec<usize>,
    feature_maps_per_width: usize,
    hops: usize,
    memory_capacity: usize,
    latent_dim: usize,
    relations: Vec<String>,
    words: Vec<String>,
    pos_tags: Vec<String>,
    representatives: Vec<Option<RepresentativeRecord>>,
    tensors: Vec<ManifestEntry>,
}

pub fn to_bytes(model: &Model, config_snapshot: &str) -> Vec<u8> {
    let named = model.params.named();
    let mut offset = 0;
    let tensors = named
        .iter()
        .map(|(name, t)| {
            let e = ManifestEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
                offset,
            };
            offset += 4 * t.numel();
            e
        })
        .collect();
    let enc = &model.config.encoder;
    let mem = &model.config.memory;
    let header = Header {
        config: config_snapshot.to_string(),
        d_word: enc.d_word,
        d_pos_tag: enc.d_pos_tag,
        d_position: enc.d_position,
        filter_widths: enc.filter_widths.clone(),
        feature_maps_per_width: enc.feature_maps_per_width,
        hops: mem.hops,
        memory_capacity: mem.memory_capacity,
        latent_dim: mem.latent_dim,
        relations: model.schema.relations().to_vec(),
        words: model.words.tokens().to_vec(),
        pos_tags: model.pos_tags.tokens().to_vec(),
        representatives: model
            .representatives
            .entries
            .iter()
            .map(|e| {
                e.as_ref().map(|r| RepresentativeRecord {
                    sentence_id: r.sentence_id.clone(),
                    tokens: r.tokens.clone(),
                })
            })
            .collect(),
        tensors,
    };
    let json = serde_json::to_vec(&header).expect("serializable header");
    let mut out = Vec::with_capacity(json.len() + offset + 64);
    out.extend_from_slice(format!("{MAGIC}\n{}\n", json.len()).as_bytes());
    out.extend_from_slice(&json);
    for (_, t) in &named {
        for &x in t.data() {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

pub fn save(path: &Path, model: &Model, config_snapshot: &str) -> Result<()> {
    write_atomic(path, &to_bytes(model, config_snapshot))
}

fn take_line<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    let rest = &bytes[*pos..];
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
    *pos += end + 1;
    std::str::from_utf8(&rest[..end]).map_err(|_| Error::Checkpoint("header is not UTF-8".into()))
}

/// Parses a checkpoint; returns the model and its config snapshot.
pub fn from_bytes(bytes: &[u8]) -> Result<(Model, String)> {
    let mut pos = 0;
    if take_line(bytes, &mut pos)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let len: usize = take_line(bytes, &mut pos)?
        .parse()
        .map_err(|_| Error::Checkpoint("bad header length".into()))?;
    let json = bytes
        .get(pos..pos + len)
        .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let data = &bytes[pos + len..];

    let config = ModelConfig {
        encoder: EncoderConfig {
            d_word: header.d_word,
            d_pos_tag: header.d_pos_tag,
            d_position: header.d_position,
            filter_widths: header.filter_widths.clone(),
            feature_maps_per_width: header.feature_maps_per_width,
        },
        memory: MemoryConfig {
            hops: header.hops,
            memory_capacity: header.memory_capacity,
            latent_dim: header.latent_dim,
        },
    };
    config.validate()?;
    let schema = RelationSchema::new(header.relations)?;
    let words = Vocab::from_list(header.words);
    let pos_tags = Vocab::from_list(header.pos_tags);
    let representatives = RepresentativeSet {
        relations: schema.relations()[1..].to_vec(),
        entries: header
            .representatives
            .into_iter()
            .map(|e| {
                e.map(|r| Representative {
                    sentence_id: r.sentence_id,
                    tokens: r.tokens,
                })
            })
            .collect(),
    };

    // shapes come from the config; values are overwritten below
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = Model {
        params: ModelParams {
            encoder: crate::encoder::EncoderParams::init(&config.encoder, &words, &pos_tags, None, &mut rng),
            memory: crate::memory::MemoryParams::init(&config.memory, schema.len(), &mut rng),
            coupling: crate::coupling::CouplingParams::init(config.memory.latent_dim, &mut rng),
        },
        config,
        words,
        pos_tags,
        schema,
        representatives,
    };
    let expected: Vec<(String, Vec<usize>)> = model
        .params
        .named()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    if expected.len() != header.tensors.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, manifest lists {}",
            expected.len(),
            header.tensors.len()
        )));
    }
    for ((name, shape), (entry, slot)) in expected
        .iter()
        .zip(header.tensors.iter().zip(model.params.tensors_mut()))
    {
        if &entry.name != name || &entry.shape != shape {
            return Err(Error::Checkpoint(format!(
                "manifest entry {} {:?} does not match expected {} {:?}",
                entry.name, entry.shape, name, shape
            )));
        }
        let n = slot.numel();
        let raw = data
            .get(entry.offset..entry.offset + 4 * n)
            .ok_or_else(|| Error::Checkpoint(format!("data for {name} is truncated")))?;
        for (dst, chunk) in slot.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
        }
    }
    Ok((model, header.config))
}

pub fn load(path: &Path) -> Result<(Model, String)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

/// Rounds every parameter to single precision, as a checkpoint stores it.
pub fn round_to_f32(t: &mut Tensor) {
    for x in t.data_mut() {
        *x = *x as f32 as f64;
    }
}
