//! Instances, bags, schema and vocabularies.

mod features;
mod io;
pub mod synthetic;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use features::{extract_verb_span, featurize, FeatureMatrix, MAX_OFFSET, OFFSET_TABLE_SIZE};
pub use io::{group_bags, load_corpus, read_instances, write_corpus, CorpusOptions, LabeledInstance};

pub const NA: &str = "NA";
pub const DEFAULT_MAX_SENTENCE_LEN: usize = 100;
pub const DEFAULT_MEMORY_CAPACITY: usize = 10;

/// Half-open token range `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }

    pub fn intersects(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl From<[usize; 2]> for Span {
    fn from(v: [usize; 2]) -> Self {
        Span::new(v[0], v[1])
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub pos: String,
}

/// One sentence mentioning an entity pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub sentence_id: String,
    pub tokens: Vec<Token>,
    pub e1_span: Span,
    pub e2_span: Span,
    pub verb_span: Option<Span>,
}

impl Instance {
    /// Builds a validated instance; `verb_span` is derived from the POS tags.
    pub fn new(sentence_id: impl Into<String>, tokens: Vec<Token>, e1_span: Span, e2_span: Span) -> Result<Self> {
        let mut inst = Instance {
            sentence_id: sentence_id.into(),
            tokens,
            e1_span,
            e2_span,
            verb_span: None,
        };
        inst.validate(usize::MAX)?;
        inst.verb_span = extract_verb_span(&inst);
        Ok(inst)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn validate(&self, max_len: usize) -> Result<()> {
        let fail = |message: String| {
            Err(Error::InvalidInstance {
                sentence_id: self.sentence_id.clone(),
                message,
            })
        };
        let n = self.tokens.len();
        if n == 0 {
            return fail("no tokens".into());
        }
        if n > max_len {
            return fail(format!("{n} tokens exceeds maximum {max_len}"));
        }
        for (name, s) in [("e1", self.e1_span), ("e2", self.e2_span)] {
            if s.is_empty() || s.end > n {
                return fail(format!("{name} span [{}, {}) out of bounds for {n} tokens", s.start, s.end));
            }
        }
        if self.e1_span.intersects(&self.e2_span) {
            return fail("entity spans overlap".into());
        }
        Ok(())
    }

    pub fn text(&self) -> String {
        self.tokens.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
    }

    pub fn span_tokens(&self, span: Span) -> Vec<&str> {
        self.tokens[span.start..span.end].iter().map(|t| t.text.as_str()).collect()
    }

    /// Surface tokens of both entity mentions, e1 first.
    pub fn entity_tokens(&self) -> Vec<&str> {
        let mut out = self.span_tokens(self.e1_span);
        out.extend(self.span_tokens(self.e2_span));
        out
    }

    pub fn verb_tokens(&self) -> Vec<&str> {
        self.verb_span.map(|s| self.span_tokens(s)).unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairId {
    pub e1: String,
    pub e2: String,
}

impl PairId {
    pub fn new(e1: impl Into<String>, e2: impl Into<String>) -> Self {
        PairId {
            e1: e1.into(),
            e2: e2.into(),
        }
    }
}

impl std::fmt::Display for PairId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}|{}", self.e1, self.e2)
    }
}

/// All instances for one entity pair. Empty `relations` means NA.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceBag {
    pub pair_id: PairId,
    pub instances: Vec<Instance>,
    pub relations: BTreeSet<String>,
}

impl InstanceBag {
    /// Keeps the first `capacity` instances; returns whether anything was dropped.
    pub fn truncate(&mut self, capacity: usize) -> bool {
        let over = self.instances.len() > capacity;
        self.instances.truncate(capacity);
        over
    }
}

/// Relation ids with NA at index 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationSchema {
    relations: Vec<String>,
    index: HashMap<String, usize>,
}

impl RelationSchema {
    pub fn new(relations: Vec<String>) -> Result<Self> {
        if relations.first().map(String::as_str) != Some(NA) {
            return Err(Error::InvalidArgument(format!("relation schema must start with {NA}")));
        }
        let mut index = HashMap::new();
        for (i, r) in relations.iter().enumerate() {
            if r.is_empty() || index.insert(r.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("invalid or duplicate relation id {r:?}")));
            }
        }
        Ok(RelationSchema { relations, index })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let relations: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        Self::new(relations).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = self.relations.join("\n");
        s.push('\n');
        s
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn name(&self, i: usize) -> &str {
        &self.relations[i]
    }

    pub fn index_of(&self, relation: &str) -> Option<usize> {
        self.index.get(relation).copied()
    }

    /// Gold label indices for a bag; `[0]` (NA) when it has none.
    pub fn labels(&self, bag: &InstanceBag) -> Result<Vec<usize>> {
        if bag.relations.is_empty() {
            return Ok(vec![0]);
        }
        bag.relations
            .iter()
            .map(|r| {
                self.index_of(r)
                    .ok_or_else(|| Error::InvalidArgument(format!("bag {}: relation {r:?} not in schema", bag.pair_id)))
            })
            .collect()
    }
}

/// Token-to-id table with the unknown entry at id 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

pub const OOV: &str = "<unk>";

impl Vocab {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let sorted: BTreeSet<String> = tokens
            .into_iter()
            .map(|t| t.as_ref().to_string())
            .filter(|t| t != OOV)
            .collect();
        let mut all = vec![OOV.to_string()];
        all.extend(sorted);
        Self::from_list(all)
    }

    /// Rebuilds a vocabulary from its serialized id order (`<unk>` first).
    pub fn from_list(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab { tokens, index }
    }

    pub fn words(bags: &[InstanceBag]) -> Self {
        Self::from_tokens(bags.iter().flat_map(|b| &b.instances).flat_map(|i| &i.tokens).map(|t| &t.text))
    }

    pub fn pos_tags(bags: &[InstanceBag]) -> Self {
        Self::from_tokens(bags.iter().flat_map(|b| &b.instances).flat_map(|i| &i.tokens).map(|t| &t.pos))
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[cfg(test)]
pub(crate) fn tok(text: &str, pos: &str) -> Token {
    Token {
        text: text.into(),
        pos: pos.into(),
    }
}
