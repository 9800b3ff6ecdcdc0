use super::{Instance, Span, Vocab};

/// Relative offsets are clipped to `[-MAX_OFFSET, MAX_OFFSET]`.
pub const MAX_OFFSET: i32 = 30;
pub const OFFSET_TABLE_SIZE: usize = 2 * MAX_OFFSET as usize + 1;

/// Index form of one instance, ready for embedding lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureMatrix {
    pub word_ids: Vec<usize>,
    pub pos_ids: Vec<usize>,
    pub pos1_offsets: Vec<i32>,
    pub pos2_offsets: Vec<i32>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.word_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_ids.is_empty()
    }

    /// Row of an offset in a position table.
    pub fn offset_row(offset: i32) -> usize {
        (offset + MAX_OFFSET) as usize
    }
}

/// Signed distance from token `t` to the nearest token of `span`; 0 inside.
fn offset(t: usize, span: Span) -> i32 {
    let d = if t < span.start {
        t as i64 - span.start as i64
    } else if t >= span.end {
        t as i64 - (span.end as i64 - 1)
    } else {
        0
    };
    d.clamp(-(MAX_OFFSET as i64), MAX_OFFSET as i64) as i32
}

pub fn featurize(instance: &Instance, words: &Vocab, pos_tags: &Vocab) -> FeatureMatrix {
    let n = instance.tokens.len();
    FeatureMatrix {
        word_ids: instance.tokens.iter().map(|t| words.id(&t.text)).collect(),
        pos_ids: instance.tokens.iter().map(|t| pos_tags.id(&t.pos)).collect(),
        pos1_offsets: (0..n).map(|t| offset(t, instance.e1_span)).collect(),
        pos2_offsets: (0..n).map(|t| offset(t, instance.e2_span)).collect(),
    }
}

/// The verb phrase between the two entity mentions.
///
/// Longest run of `V*`-tagged tokens strictly between the entities (leftmost
/// on ties); the whole gap when no token there is verb-tagged; `None` when
/// the mentions are adjacent.
pub fn extract_verb_span(instance: &Instance) -> Option<Span> {
    let (first, second) = if instance.e1_span.start < instance.e2_span.start {
        (instance.e1_span, instance.e2_span)
    } else {
        (instance.e2_span, instance.e1_span)
    };
    let gap = Span::new(first.end, second.start);
    if gap.is_empty() {
        return None;
    }
    let mut best: Option<Span> = None;
    let mut run_start = None;
    for i in gap.start..=gap.end {
        let is_verb = i < gap.end && instance.tokens[i].pos.starts_with('V');
        match (is_verb, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                let run = Span::new(s, i);
                if best.is_none_or(|b| run.len() > b.len()) {
                    best = Some(run);
                }
                run_start = None;
            }
            _ => {}
        }
    }
    best.or(Some(gap))
}
