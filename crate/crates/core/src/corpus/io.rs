use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Instance, InstanceBag, PairId, Span, Token, DEFAULT_MAX_SENTENCE_LEN, DEFAULT_MEMORY_CAPACITY, NA};
use crate::error::{Error, Result};
use crate::util::write_atomic;

#[derive(Clone, Copy, Debug)]
pub struct CorpusOptions {
    pub max_sentence_len: usize,
    pub memory_capacity: usize,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            max_sentence_len: DEFAULT_MAX_SENTENCE_LEN,
            memory_capacity: DEFAULT_MEMORY_CAPACITY,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MentionRecord {
    id: String,
    span: Span,
}

#[derive(Serialize, Deserialize)]
struct LineRecord {
    sentence_id: String,
    tokens: Vec<Token>,
    e1: MentionRecord,
    e2: MentionRecord,
    #[serde(default)]
    relations: Vec<String>,
}

/// One corpus line: an instance with its pair and distant labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledInstance {
    pub pair_id: PairId,
    pub relations: Vec<String>,
    pub instance: Instance,
}

/// Cuts an over-long sentence to a `max_len` window centred between the entities.
fn window(record: &mut LineRecord, max_len: usize) -> std::result::Result<(), String> {
    let n = record.tokens.len();
    if n <= max_len {
        return Ok(());
    }
    let lo = record.e1.span.start.min(record.e2.span.start);
    let hi = record.e1.span.end.max(record.e2.span.end);
    if hi - lo > max_len {
        return Err(format!("entities span {} tokens, more than the maximum {max_len}", hi - lo));
    }
    let mid = (lo + hi) / 2;
    let start = mid
        .saturating_sub(max_len / 2)
        .min(n - max_len)
        .min(lo)
        .max(hi.saturating_sub(max_len));
    record.tokens = record.tokens[start..start + max_len].to_vec();
    for m in [&mut record.e1, &mut record.e2] {
        m.span = Span::new(m.span.start - start, m.span.end - start);
    }
    Ok(())
}

fn parse_line(line: &str, max_len: usize) -> std::result::Result<LabeledInstance, (Option<String>, String)> {
    let mut rec: LineRecord = serde_json::from_str(line).map_err(|e| (None, e.to_string()))?;
    for t in &mut rec.tokens {
        t.text = t.text.to_lowercase();
    }
    let sid = rec.sentence_id.clone();
    let bounds_ok = [&rec.e1, &rec.e2]
        .iter()
        .all(|m| m.span.start < m.span.end && m.span.end <= rec.tokens.len());
    if bounds_ok {
        window(&mut rec, max_len).map_err(|e| (Some(sid.clone()), e))?;
    }
    let instance = Instance::new(rec.sentence_id, rec.tokens, rec.e1.span, rec.e2.span).map_err(|e| (Some(sid), e.to_string()))?;
    Ok(LabeledInstance {
        pair_id: PairId::new(rec.e1.id, rec.e2.id),
        relations: rec.relations.into_iter().filter(|r| r != NA).collect(),
        instance,
    })
}

/// Parses every line of a corpus file, in file order.
pub fn read_instances(path: &Path, max_sentence_len: usize) -> Result<Vec<LabeledInstance>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line, max_sentence_len) {
            Ok(li) => out.push(li),
            Err((Some(sentence_id), message)) => return Err(Error::InvalidInstance { sentence_id, message }),
            Err((None, message)) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message,
                })
            }
        }
    }
    Ok(out)
}

/// Groups instances by pair id (sorted), keeping file order inside each bag.
pub fn group_bags(instances: Vec<LabeledInstance>) -> Vec<InstanceBag> {
    let mut groups: BTreeMap<PairId, (Vec<Instance>, BTreeSet<String>)> = BTreeMap::new();
    for li in instances {
        let entry = groups.entry(li.pair_id).or_default();
        entry.0.push(li.instance);
        entry.1.extend(li.relations);
    }
    groups
        .into_iter()
        .map(|(pair_id, (instances, relations))| InstanceBag {
            pair_id,
            instances,
            relations,
        })
        .collect()
}

pub fn load_corpus(path: &Path, opts: &CorpusOptions) -> Result<Vec<InstanceBag>> {
    let mut bags = group_bags(read_instances(path, opts.max_sentence_len)?);
    for b in &mut bags {
        b.truncate(opts.memory_capacity);
    }
    Ok(bags)
}

pub fn corpus_lines(bags: &[InstanceBag]) -> String {
    let mut out = String::new();
    for bag in bags {
        for inst in &bag.instances {
            let rec = LineRecord {
                sentence_id: inst.sentence_id.clone(),
                tokens: inst.tokens.clone(),
                e1: MentionRecord {
                    id: bag.pair_id.e1.clone(),
                    span: inst.e1_span,
                },
                e2: MentionRecord {
                    id: bag.pair_id.e2.clone(),
                    span: inst.e2_span,
                },
                relations: bag.relations.iter().cloned().collect(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("serializable"));
            out.push('\n');
        }
    }
    out
}

pub fn write_corpus(path: &Path, bags: &[InstanceBag]) -> Result<()> {
    write_atomic(path, corpus_lines(bags).as_bytes())
}
