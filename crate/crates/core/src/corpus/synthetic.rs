//! Seeded generator for labelled bags with known evidence/noise instances.
//!
//! Every relation owns a small verb lexicon; evidence sentences use one of
//! those verbs between the two entity mentions, noise sentences use a verb
//! from a shared pool that says nothing about the relation. Relations are
//! grouped two by two onto entity-type pairs, so entity types narrow the
//! label down but only the verb decides it. A matching static embedding
//! table clusters each relation's verbs and each type's entity names.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::io::corpus_lines;
use super::{Instance, InstanceBag, PairId, RelationSchema, Span, Token, NA};
use crate::error::{Error, Result};
use crate::util::write_atomic;

#[derive(Clone, Debug)]
pub struct SyntheticConfig {
    pub noise_rate: f64,
    pub num_relations: usize,
    pub bags_per_relation: usize,
    pub bag_size: usize,
    pub seed: u64,
    /// Share of each relation's bags held out for testing.
    pub test_fraction: f64,
    pub embedding_dim: usize,
    pub verbs_per_relation: usize,
    pub noise_verbs: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            noise_rate: 0.0,
            num_relations: 8,
            bags_per_relation: 50,
            bag_size: 4,
            seed: 13,
            test_fraction: 0.2,
            embedding_dim: 300,
            verbs_per_relation: 4,
            noise_verbs: 24,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("synthetic config: {m}")));
        if !(0.0..1.0).contains(&self.noise_rate) {
            return bad("noise_rate must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad("test_fraction must lie in [0, 1)");
        }
        if self.num_relations == 0 || self.bags_per_relation == 0 || self.bag_size == 0 {
            return bad("num_relations, bags_per_relation and bag_size must be positive");
        }
        if self.embedding_dim == 0 || self.verbs_per_relation == 0 || self.noise_verbs == 0 {
            return bad("embedding_dim, verbs_per_relation and noise_verbs must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub schema: RelationSchema,
    pub train: Vec<InstanceBag>,
    pub test: Vec<InstanceBag>,
    /// sentence id -> true for evidence, false for noise.
    pub evidence: BTreeMap<String, bool>,
    /// Verb lexicon of each non-NA relation, in schema order.
    pub lexicons: Vec<Vec<String>>,
    pub embeddings: Vec<(String, Vec<f64>)>,
}

/// Paths written by [`SyntheticCorpus::write`].
#[derive(Clone, Debug)]
pub struct SyntheticFiles {
    pub train: PathBuf,
    pub test: PathBuf,
    pub schema: PathBuf,
    pub embeddings: PathBuf,
    pub sidecar: PathBuf,
    pub train_gold: PathBuf,
    pub test_gold: PathBuf,
}

impl SyntheticFiles {
    pub fn in_dir(dir: &Path) -> Self {
        SyntheticFiles {
            train: dir.join("train.jsonl"),
            test: dir.join("test.jsonl"),
            schema: dir.join("schema.txt"),
            embeddings: dir.join("embeddings.txt"),
            sidecar: dir.join("sidecar.tsv"),
            train_gold: dir.join("train_gold.tsv"),
            test_gold: dir.join("test_gold.tsv"),
        }
    }
}

const FILLERS: &[(&str, &str)] = &[
    ("the", "DT"),
    ("a", "DT"),
    ("this", "DT"),
    ("of", "IN"),
    ("in", "IN"),
    ("with", "IN"),
    ("after", "IN"),
    ("near", "IN"),
    ("new", "JJ"),
    ("local", "JJ"),
    ("former", "JJ"),
    ("large", "JJ"),
    ("report", "NN"),
    ("year", "NN"),
    ("deal", "NN"),
    ("city", "NN"),
    ("week", "NN"),
    ("group", "NN"),
    ("also", "RB"),
    ("recently", "RB"),
    ("quietly", "RB"),
    (",", ","),
];

fn pseudo_word<R: Rng>(rng: &mut R, used: &mut HashSet<String>, syllables: usize) -> String {
    const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr"];
    const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
    loop {
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS[rng.gen_range(0..ONSETS.len())]);
            w.push_str(VOWELS[rng.gen_range(0..VOWELS.len())]);
        }
        if !FILLERS.iter().any(|(f, _)| *f == w) && used.insert(w.clone()) {
            return w;
        }
    }
}

fn unit<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    // sum of uniforms is close enough to isotropic for a 300-d toy table
    let v: Vec<f64> = (0..dim)
        .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>())
        .collect();
    normalize(v)
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / n).collect()
}

fn around<R: Rng>(rng: &mut R, centre: &[f64], spread: f64) -> Vec<f64> {
    let z = unit(rng, centre.len());
    normalize(centre.iter().zip(z).map(|(c, z)| c + spread * z).collect())
}

fn pick<'a, R: Rng, T>(rng: &mut R, xs: &'a [T]) -> &'a T {
    &xs[rng.gen_range(0..xs.len())]
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut used = HashSet::new();
    let dim = config.embedding_dim;
    let scale = 0.1 * (dim as f64).sqrt();
    let mut embeddings = Vec::new();

    let lexicons: Vec<Vec<String>> = (0..config.num_relations)
        .map(|_| {
            (0..config.verbs_per_relation)
                .map(|_| pseudo_word(&mut rng, &mut used, 3))
                .collect()
        })
        .collect();
    let noise_verbs: Vec<String> = (0..config.noise_verbs)
        .map(|_| pseudo_word(&mut rng, &mut used, 3))
        .collect();

    let type_pairs = config.num_relations.div_ceil(2);
    let bags_per_type_pair = 2 * config.bags_per_relation;
    let pool = ((3 * bags_per_type_pair) as f64).sqrt().ceil() as usize + 4;
    let entity_names: Vec<Vec<String>> = (0..2 * type_pairs)
        .map(|_| (0..pool).map(|_| pseudo_word(&mut rng, &mut used, 2)).collect())
        .collect();

    for lex in &lexicons {
        let centre = unit(&mut rng, dim);
        for v in lex {
            embeddings.push((v.clone(), around(&mut rng, &centre, 0.5)));
        }
    }
    for v in &noise_verbs {
        embeddings.push((v.clone(), unit(&mut rng, dim)));
    }
    for names in &entity_names {
        let centre = unit(&mut rng, dim);
        for n in names {
            embeddings.push((n.clone(), around(&mut rng, &centre, 0.6)));
        }
    }
    for (f, _) in FILLERS {
        embeddings.push((f.to_string(), unit(&mut rng, dim)));
    }
    for (_, v) in &mut embeddings {
        v.iter_mut().for_each(|x| *x *= scale);
    }

    let mut relations = vec![NA.to_string()];
    relations.extend(
        lexicons
            .iter()
            .enumerate()
            .map(|(k, lex)| format!("/synthetic/rel{k}_{}", lex[0])),
    );
    let schema = RelationSchema::new(relations)?;

    let mut used_pairs = HashSet::new();
    let mut evidence = BTreeMap::new();
    let mut train = Vec::new();
    let mut test = Vec::new();
    let n_train = ((1.0 - config.test_fraction) * config.bags_per_relation as f64).round() as usize;
    let mut sentence_counter = 0usize;

    for (k, lexicon) in lexicons.iter().enumerate() {
        let (head_type, tail_type) = (2 * (k / 2), 2 * (k / 2) + 1);
        for b in 0..config.bags_per_relation {
            let (e1, e2) = loop {
                let h = pick(&mut rng, &entity_names[head_type]).clone();
                let t = pick(&mut rng, &entity_names[tail_type]).clone();
                if used_pairs.insert((h.clone(), t.clone())) {
                    break (h, t);
                }
            };
            let mut instances = Vec::with_capacity(config.bag_size);
            for _ in 0..config.bag_size {
                let is_noise = rng.gen_bool(config.noise_rate);
                let verb = if is_noise {
                    pick(&mut rng, &noise_verbs).clone()
                } else {
                    pick(&mut rng, lexicon).clone()
                };
                let sid = format!("syn{sentence_counter:06}");
                sentence_counter += 1;
                evidence.insert(sid.clone(), !is_noise);
                instances.push(sentence(&mut rng, sid, &e1, &e2, &verb)?);
            }
            let bag = InstanceBag {
                pair_id: PairId::new(e1, e2),
                instances,
                relations: [schema.name(k + 1).to_string()].into_iter().collect(),
            };
            if b < n_train {
                train.push(bag);
            } else {
                test.push(bag);
            }
        }
    }
    train.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    test.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));

    Ok(SyntheticCorpus {
        schema,
        train,
        test,
        evidence,
        lexicons,
        embeddings,
    })
}

fn fillers<R: Rng>(rng: &mut R, max: usize) -> Vec<Token> {
    let n = rng.gen_range(0..=max);
    (0..n)
        .map(|_| {
            let (t, p) = FILLERS.choose(rng).expect("non-empty");
            Token {
                text: t.to_string(),
                pos: p.to_string(),
            }
        })
        .collect()
}

fn sentence<R: Rng>(rng: &mut R, sid: String, e1: &str, e2: &str, verb: &str) -> Result<Instance> {
    let swapped = rng.gen_bool(0.2);
    let (first, second) = if swapped { (e2, e1) } else { (e1, e2) };
    let entity = |t: &str| Token {
        text: t.to_string(),
        pos: "NNP".into(),
    };
    let mut tokens = fillers(rng, 2);
    let a = tokens.len();
    tokens.push(entity(first));
    tokens.extend(fillers(rng, 1));
    tokens.push(Token {
        text: verb.to_string(),
        pos: "VBD".into(),
    });
    tokens.extend(fillers(rng, 2));
    let b = tokens.len();
    tokens.push(entity(second));
    tokens.extend(fillers(rng, 2));
    let (s1, s2) = (Span::new(a, a + 1), Span::new(b, b + 1));
    let (e1_span, e2_span) = if swapped { (s2, s1) } else { (s1, s2) };
    Instance::new(sid, tokens, e1_span, e2_span)
}

pub fn gold_lines(bags: &[InstanceBag]) -> String {
    let mut out = String::new();
    for b in bags {
        for r in &b.relations {
            let _ = writeln!(out, "{}\t{}\t{}", b.pair_id.e1, b.pair_id.e2, r);
        }
    }
    out
}

impl SyntheticCorpus {
    pub fn embedding_lines(&self) -> String {
        let mut out = String::new();
        for (w, v) in &self.embeddings {
            out.push_str(w);
            for x in v {
                let _ = write!(out, " {x:.6}");
            }
            out.push('\n');
        }
        out
    }

    pub fn sidecar_lines(&self) -> String {
        let mut out = String::new();
        for (sid, ev) in &self.evidence {
            let _ = writeln!(out, "{sid}\t{}", if *ev { "evidence" } else { "noise" });
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<SyntheticFiles> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = SyntheticFiles::in_dir(dir);
        write_atomic(&files.train, corpus_lines(&self.train).as_bytes())?;
        write_atomic(&files.test, corpus_lines(&self.test).as_bytes())?;
        write_atomic(&files.schema, self.schema.to_text().as_bytes())?;
        write_atomic(&files.embeddings, self.embedding_lines().as_bytes())?;
        write_atomic(&files.sidecar, self.sidecar_lines().as_bytes())?;
        write_atomic(&files.train_gold, gold_lines(&self.train).as_bytes())?;
        write_atomic(&files.test_gold, gold_lines(&self.test).as_bytes())?;
        Ok(files)
    }
}

/// Reads a sidecar file back into sentence id -> is-evidence.
pub fn read_sidecar(path: &Path) -> Result<BTreeMap<String, bool>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = || Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("expected sentence_id<TAB>evidence|noise, got {line:?}"),
        };
        let (sid, flag) = line.split_once('\t').ok_or_else(parse_err)?;
        let ev = match flag {
            "evidence" => true,
            "noise" => false,
            _ => return Err(parse_err()),
        };
        out.insert(sid.to_string(), ev);
    }
    Ok(out)
}
