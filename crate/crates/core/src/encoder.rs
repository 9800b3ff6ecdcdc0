//! Embedding tables and the convolutional instance encoder.
//!
//! Each token becomes `word ++ pos ++ position1 ++ position2`; one
//! convolution layer per filter width slides over the token rows, applies
//! ReLU and max-pools over time. Width outputs are concatenated.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;

use crate::corpus::{FeatureMatrix, Vocab, OFFSET_TABLE_SIZE};
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};

pub const INIT_BOUND: f64 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    pub d_word: usize,
    pub d_pos_tag: usize,
    pub d_position: usize,
    pub filter_widths: Vec<usize>,
    pub feature_maps_per_width: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d_word: 300,
            d_pos_tag: 50,
            d_position: 50,
            filter_widths: vec![1, 2],
            feature_maps_per_width: 128,
        }
    }
}

impl EncoderConfig {
    pub fn token_dim(&self) -> usize {
        self.d_word + self.d_pos_tag + 2 * self.d_position
    }

    pub fn output_dim(&self) -> usize {
        self.feature_maps_per_width * self.filter_widths.len()
    }

    pub fn max_width(&self) -> usize {
        self.filter_widths.iter().copied().max().unwrap_or(1)
    }
}

/// Frozen pretrained vectors used for similarity targets and heuristic attention.
#[derive(Clone, Debug, Default)]
pub struct StaticEmbeddings {
    dim: usize,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
}

impl StaticEmbeddings {
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut out = StaticEmbeddings::default();
        for (w, v) in pairs {
            out.insert(w.into(), &v).map_err(Error::InvalidArgument)?;
        }
        Ok(out)
    }

    fn insert(&mut self, word: String, v: &[f64]) -> std::result::Result<(), String> {
        if self.index.is_empty() {
            self.dim = v.len();
        }
        if v.len() != self.dim || v.is_empty() {
            return Err(format!("vector for {word:?} has {} values, expected {}", v.len(), self.dim));
        }
        if self.index.contains_key(&word) {
            return Ok(());
        }
        self.index.insert(word, self.index.len());
        self.vectors.extend_from_slice(v);
        Ok(())
    }

    /// Text format: a token followed by its reals, whitespace separated.
    /// A leading `count dim` header line is skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut out = StaticEmbeddings::default();
        for (i, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let rest: Vec<&str> = fields.collect();
            if i == 0 && rest.len() == 1 && word.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> = rest.iter().map(|f| f.parse::<f64>()).collect();
            let v = parsed.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            out.insert(word.to_string(), &v).map_err(|message| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            })?;
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Mean vector of `tokens`, with unknown tokens counting as zero vectors.
    pub fn mean<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        let mut n = 0usize;
        for t in tokens {
            n += 1;
            if let Some(v) = self.get(t) {
                acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
            }
        }
        if n > 0 {
            acc.iter_mut().for_each(|a| *a /= n as f64);
        }
        acc
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvFilter {
    pub width: usize,
    /// `(width * token_dim) x feature_maps`
    pub weight: Tensor,
    /// `1 x feature_maps`
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub word_table: Tensor,
    pub pos_table: Tensor,
    pub position_table_1: Tensor,
    pub position_table_2: Tensor,
    pub filters: Vec<ConvFilter>,
}

impl EncoderParams {
    pub fn init<R: Rng>(
        config: &EncoderConfig,
        words: &Vocab,
        pos_tags: &Vocab,
        pretrained: Option<&StaticEmbeddings>,
        rng: &mut R,
    ) -> Self {
        let mut word_table = Tensor::uniform(&[words.len(), config.d_word], INIT_BOUND, rng);
        if let Some(pre) = pretrained.filter(|p| p.dim() == config.d_word) {
            for (i, w) in words.tokens().iter().enumerate() {
                if let Some(v) = pre.get(w) {
                    word_table.row_slice_mut(i).copy_from_slice(v);
                }
            }
        }
        let pos_table = Tensor::uniform(&[pos_tags.len(), config.d_pos_tag], INIT_BOUND, rng);
        let position_table_1 = Tensor::uniform(&[OFFSET_TABLE_SIZE, config.d_position], INIT_BOUND, rng);
        let position_table_2 = Tensor::uniform(&[OFFSET_TABLE_SIZE, config.d_position], INIT_BOUND, rng);
        let filters = config
            .filter_widths
            .iter()
            .map(|&w| {
                let fan_in = w * config.token_dim();
                let bound = (6.0 / (fan_in + config.feature_maps_per_width) as f64).sqrt();
                ConvFilter {
                    width: w,
                    weight: Tensor::uniform(&[fan_in, config.feature_maps_per_width], bound, rng),
                    bias: Tensor::zeros(&[1, config.feature_maps_per_width]),
                }
            })
            .collect();
        EncoderParams {
            word_table,
            pos_table,
            position_table_1,
            position_table_2,
            filters,
        }
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("encoder.word_table".to_string(), &self.word_table),
            ("encoder.pos_table".to_string(), &self.pos_table),
            ("encoder.position_table_1".to_string(), &self.position_table_1),
            ("encoder.position_table_2".to_string(), &self.position_table_2),
        ];
        for f in &self.filters {
            out.push((format!("encoder.conv{}.weight", f.width), &f.weight));
            out.push((format!("encoder.conv{}.bias", f.width), &f.bias));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![
            &mut self.word_table,
            &mut self.pos_table,
            &mut self.position_table_1,
            &mut self.position_table_2,
        ];
        for f in &mut self.filters {
            out.push(&mut f.weight);
            out.push(&mut f.bias);
        }
        out
    }

    pub fn bind(&self, tape: &mut Tape) -> EncoderVars {
        EncoderVars {
            word_table: tape.param(self.word_table.clone()),
            pos_table: tape.param(self.pos_table.clone()),
            position_table_1: tape.param(self.position_table_1.clone()),
            position_table_2: tape.param(self.position_table_2.clone()),
            filters: self
                .filters
                .iter()
                .map(|f| (f.width, tape.param(f.weight.clone()), tape.param(f.bias.clone())))
                .collect(),
        }
    }
}

/// Encoder parameters recorded on a tape.
#[derive(Clone, Debug)]
pub struct EncoderVars {
    pub word_table: Var,
    pub pos_table: Var,
    pub position_table_1: Var,
    pub position_table_2: Var,
    pub filters: Vec<(usize, Var, Var)>,
}

impl EncoderVars {
    pub fn all(&self) -> Vec<Var> {
        let mut out = vec![self.word_table, self.pos_table, self.position_table_1, self.position_table_2];
        for &(_, w, b) in &self.filters {
            out.push(w);
            out.push(b);
        }
        out
    }

    /// Stacked token rows of several instances, `sum(n) x token_dim`.
    pub fn embed(&self, tape: &mut Tape, instances: &[&FeatureMatrix]) -> Result<Var> {
        if instances.iter().any(|fm| fm.is_empty()) || instances.is_empty() {
            return Err(Error::Empty("instance"));
        }
        let words: Vec<usize> = instances.iter().flat_map(|fm| fm.word_ids.iter().copied()).collect();
        let pos: Vec<usize> = instances.iter().flat_map(|fm| fm.pos_ids.iter().copied()).collect();
        let p1: Vec<usize> = instances
            .iter()
            .flat_map(|fm| fm.pos1_offsets.iter().map(|&o| FeatureMatrix::offset_row(o)))
            .collect();
        let p2: Vec<usize> = instances
            .iter()
            .flat_map(|fm| fm.pos2_offsets.iter().map(|&o| FeatureMatrix::offset_row(o)))
            .collect();
        let w = tape.gather_rows(self.word_table, &words)?;
        let p = tape.gather_rows(self.pos_table, &pos)?;
        let q1 = tape.gather_rows(self.position_table_1, &p1)?;
        let q2 = tape.gather_rows(self.position_table_2, &p2)?;
        tape.concat(&[w, p, q1, q2], 1)
    }

    /// Convolution + ReLU + max-over-time for stacked token rows of
    /// instances with the given `lengths`. Returns `instances x output_dim`.
    ///
    /// An instance shorter than a filter is padded with zero rows to the
    /// filter width, giving it exactly one window.
    pub fn convolve(&self, tape: &mut Tape, rows: Var, lengths: &[usize]) -> Result<Var> {
        let total: usize = lengths.iter().sum();
        let shape = tape.value(rows).shape().to_vec();
        if lengths.is_empty() || lengths.contains(&0) {
            return Err(Error::Empty("instance"));
        }
        if shape.len() != 2 || shape[0] != total {
            return Err(Error::Shape {
                op: "convolve",
                left: shape,
                right: vec![total],
            });
        }
        let zero = tape.constant(Tensor::zeros(&[1, shape[1]]));
        let padded = tape.concat(&[rows, zero], 0)?;
        let zero_row = total;

        let mut pooled = Vec::with_capacity(self.filters.len());
        for &(width, weight, bias) in &self.filters {
            let mut taps: Vec<Vec<usize>> = vec![Vec::new(); width];
            let mut segments = Vec::with_capacity(lengths.len());
            let mut offset = 0;
            for &n in lengths {
                let start = taps[0].len();
                let windows = n.saturating_sub(width - 1).max(1);
                for p in 0..windows {
                    for (j, tap) in taps.iter_mut().enumerate() {
                        tap.push(if p + j < n { offset + p + j } else { zero_row });
                    }
                }
                segments.push((start, start + windows));
                offset += n;
            }
            let parts = taps
                .iter()
                .map(|idx| tape.gather_rows(padded, idx))
                .collect::<Result<Vec<_>>>()?;
            let unfolded = if parts.len() == 1 { parts[0] } else { tape.concat(&parts, 1)? };
            let z = tape.matmul(unfolded, weight)?;
            let z = tape.add_row(z, bias)?;
            let a = tape.relu(z);
            pooled.push(tape.segment_max(a, &segments)?);
        }
        if pooled.len() == 1 {
            Ok(pooled[0])
        } else {
            tape.concat(&pooled, 1)
        }
    }

    /// Encodes instances into one row each.
    pub fn encode(&self, tape: &mut Tape, instances: &[&FeatureMatrix]) -> Result<Var> {
        let rows = self.embed(tape, instances)?;
        let lengths: Vec<usize> = instances.iter().map(|fm| fm.len()).collect();
        self.convolve(tape, rows, &lengths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_config() -> EncoderConfig {
        EncoderConfig {
            d_word: 4,
            d_pos_tag: 2,
            d_position: 2,
            filter_widths: vec![1, 2],
            feature_maps_per_width: 3,
        }
    }

    fn fm(words: &[usize], p1: &[i32], p2: &[i32]) -> FeatureMatrix {
        FeatureMatrix {
            word_ids: words.to_vec(),
            pos_ids: vec![1; words.len()],
            pos1_offsets: p1.to_vec(),
            pos2_offsets: p2.to_vec(),
        }
    }

    fn params(config: &EncoderConfig, seed: u64) -> EncoderParams {
        let words = Vocab::from_tokens(["a", "b", "c", "d"]);
        let pos = Vocab::from_tokens(["NN"]);
        EncoderParams::init(config, &words, &pos, None, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn default_dimensions() {
        let c = EncoderConfig::default();
        assert_eq!(c.token_dim(), 450);
        assert_eq!(c.output_dim(), 256);
    }

    #[test]
    fn single_token_embeds_to_one_row() {
        let cfg = EncoderConfig::default();
        let p = params(&cfg, 1);
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        let e = vars.embed(&mut tape, &[&fm(&[2], &[0], &[0])]).unwrap();
        assert_eq!(tape.value(e).shape(), &[1, 450]);
    }

    #[test]
    fn embedding_row_is_concatenation_of_lookups() {
        let cfg = tiny_config();
        let p = params(&cfg, 2);
        let f = fm(&[3, 1, 3], &[0, 1, 2], &[-2, -1, 0]);
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        let e = vars.embed(&mut tape, &[&f]).unwrap();
        let out = tape.value(e);
        for t in 0..3 {
            let mut expected = p.word_table.row_slice(f.word_ids[t]).to_vec();
            expected.extend_from_slice(p.pos_table.row_slice(1));
            expected.extend_from_slice(p.position_table_1.row_slice(FeatureMatrix::offset_row(f.pos1_offsets[t])));
            expected.extend_from_slice(p.position_table_2.row_slice(FeatureMatrix::offset_row(f.pos2_offsets[t])));
            assert_eq!(out.row_slice(t), expected.as_slice());
        }
    }

    #[test]
    fn identical_tokens_identical_rows() {
        let cfg = tiny_config();
        let p = params(&cfg, 3);
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        let e = vars.embed(&mut tape, &[&fm(&[2, 2], &[1, 1], &[3, 3])]).unwrap();
        assert_eq!(tape.value(e).row_slice(0), tape.value(e).row_slice(1));
    }

    #[test]
    fn zero_everything_encodes_to_zero() {
        let cfg = EncoderConfig::default();
        let mut p = params(&cfg, 4);
        for t in p.tensors_mut() {
            t.data_mut().fill(0.0);
        }
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        let h = vars.encode(&mut tape, &[&fm(&[1, 2, 3], &[0, 1, 2], &[-2, -1, 0])]).unwrap();
        assert_eq!(tape.value(h).shape(), &[1, 256]);
        assert!(tape.value(h).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_position_width_one_picks_coordinate() {
        // weights select coordinate j of the only row: relu(emb[0][j] + bias)
        let cfg = tiny_config();
        let mut p = params(&cfg, 5);
        let j = 1;
        for f in &mut p.filters {
            f.weight.data_mut().fill(0.0);
        }
        let map = 0;
        let maps = cfg.feature_maps_per_width;
        p.filters[0].weight.data_mut()[j * maps + map] = 1.0;
        p.filters[0].bias.data_mut()[map] = 0.3;
        let f = fm(&[2], &[0], &[0]);
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        let h = vars.encode(&mut tape, &[&f]).unwrap();
        let emb_j = p.word_table.get(2, j);
        assert_eq!(tape.value(h).get(0, map), (emb_j + 0.3).max(0.0));
    }

    #[test]
    fn width_two_on_single_token_uses_zero_padding() {
        let cfg = tiny_config();
        let p = params(&cfg, 6);
        let f = fm(&[2], &[0], &[0]);
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        let rows = vars.embed(&mut tape, &[&f]).unwrap();
        let h = vars.encode(&mut tape, &[&f]).unwrap();
        let x = tape.value(rows).row_slice(0).to_vec();
        let maps = cfg.feature_maps_per_width;
        let w2 = &p.filters[1];
        for m in 0..maps {
            // only the first token's half of the window contributes
            let z: f64 = x.iter().enumerate().map(|(i, xi)| xi * w2.weight.get(i, m)).sum::<f64>() + w2.bias.get(0, m);
            assert!((tape.value(h).get(0, maps + m) - z.max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn width_one_features_ignore_token_order() {
        let cfg = tiny_config();
        let p = params(&cfg, 7);
        let a = fm(&[1, 2, 3], &[0, 1, 2], &[-2, -1, 0]);
        let b = fm(&[3, 1, 2], &[2, 0, 1], &[0, -2, -1]);
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        let h = vars.encode(&mut tape, &[&a, &b]).unwrap();
        let out = tape.value(h);
        let maps = cfg.feature_maps_per_width;
        assert_eq!(&out.row_slice(0)[..maps], &out.row_slice(1)[..maps]);
        assert_ne!(&out.row_slice(0)[maps..], &out.row_slice(1)[maps..]);
    }

    #[test]
    fn batched_encoding_matches_one_by_one() {
        let cfg = tiny_config();
        let p = params(&cfg, 8);
        let a = fm(&[1, 2, 3, 4], &[0, 1, 2, 3], &[-3, -2, -1, 0]);
        let b = fm(&[4], &[0], &[0]);
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        let both = vars.encode(&mut tape, &[&a, &b]).unwrap();
        let ha = vars.encode(&mut tape, &[&a]).unwrap();
        let hb = vars.encode(&mut tape, &[&b]).unwrap();
        assert_eq!(tape.value(both).row_slice(0), tape.value(ha).row_slice(0));
        assert_eq!(tape.value(both).row_slice(1), tape.value(hb).row_slice(0));
    }

    #[test]
    fn empty_instance_rejected() {
        let cfg = tiny_config();
        let p = params(&cfg, 9);
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        assert!(vars.encode(&mut tape, &[&fm(&[], &[], &[])]).is_err());
    }

    #[test]
    fn static_embeddings_load_and_oov() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), "2 3\nking 1 0 0\nqueen 0.5 0.5 0\n").unwrap();
        let s = StaticEmbeddings::load(f.path()).unwrap();
        assert_eq!(s.dim(), 3);
        assert_eq!(s.get("queen").unwrap(), &[0.5, 0.5, 0.0]);
        assert!(s.get("pawn").is_none());
        assert_eq!(s.mean(["pawn"]), vec![0.0; 3]);

        std::fs::write(f.path(), "king 1 0 0\nqueen 0.5 0.5\n").unwrap();
        assert!(matches!(StaticEmbeddings::load(f.path()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn pretrained_rows_copied_into_word_table() {
        let cfg = tiny_config();
        let words = Vocab::from_tokens(["a", "b"]);
        let pos = Vocab::from_tokens(["NN"]);
        let pre = StaticEmbeddings::from_pairs([("b", vec![1.0, 2.0, 3.0, 4.0])]).unwrap();
        let p = EncoderParams::init(&cfg, &words, &pos, Some(&pre), &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(p.word_table.row_slice(words.id("b")), &[1.0, 2.0, 3.0, 4.0]);
        assert!(p.word_table.row_slice(words.id("a")).iter().all(|x| x.abs() < INIT_BOUND));
    }
}
