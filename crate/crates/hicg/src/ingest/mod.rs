//! Clickstream ingestion: raw event parsing, sessionization, filtering,
//! temporal splitting and sample generation.
//!
//! The pipeline is `parse -> sessionize -> filter -> split -> fraction ->
//! sequence split`; every stage is a pure function and deterministic, so
//! rerunning the pipeline on unchanged input produces identical output.

pub mod adapters;
pub mod artifact;

use std::collections::HashMap;

use crate::error::{Error, Result};

/// A single record from a raw event log, before any vocabulary mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEvent {
    pub source_session_key: String,
    /// Epoch milliseconds UTC.
    pub timestamp: i64,
    pub item_token: String,
    pub behavior_label: String,
}

/// One interaction inside a session: dense item index, dense behavior-type
/// index and its timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Behavior {
    pub item: usize,
    pub btype: usize,
    pub timestamp: i64,
}

/// An ordered list of behaviors by one user within one bounded visit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub session_id: String,
    pub behaviors: Vec<Behavior>,
}

impl Session {
    pub fn len(&self) -> usize {
        self.behaviors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.behaviors.is_empty()
    }

    /// Timestamp of the first behavior; sessions are never constructed empty
    /// by the pipeline, but an empty session reports start 0.
    pub fn start_ts(&self) -> i64 {
        self.behaviors.first().map_or(0, |b| b.timestamp)
    }
}

/// Bidirectional token <-> dense index map. Indexes are assigned in
/// first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Result<Self> {
        let mut v = Vocab::new();
        for t in tokens {
            if v.index.contains_key(&t) {
                return Err(Error::data(format!("duplicate vocab token `{t}`")));
            }
            v.intern(&t);
        }
        Ok(v)
    }

    pub fn intern(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), i);
        i
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
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

/// A fully indexed dataset: vocabularies, the target behavior type and the
/// train/test session lists.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub item_vocab: Vocab,
    pub behavior_vocab: Vocab,
    pub target_type: usize,
    pub train_sessions: Vec<Session>,
    pub test_sessions: Vec<Session>,
}

impl Dataset {
    pub fn n_items(&self) -> usize {
        self.item_vocab.len()
    }

    pub fn n_behavior_types(&self) -> usize {
        self.behavior_vocab.len()
    }
}

/// A supervised sample: a session prefix plus the behavior that immediately
/// followed it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSample {
    pub prefix: Vec<Behavior>,
    pub label_item: usize,
    pub label_type: usize,
}

/// How raw events are grouped into sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionizeMode {
    /// Group strictly on the source session key.
    ByKey,
    /// Group on the key, then split whenever the gap between consecutive
    /// events exceeds `gap_ms`.
    ByGap { gap_ms: i64 },
}

/// An event whose tokens have been resolved through the vocabularies but
/// that still carries its grouping key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedEvent {
    pub source_session_key: String,
    pub behavior: Behavior,
}

/// Resolve raw events against the vocabularies, interning unseen item
/// tokens. Behavior labels must come from the declared vocabulary.
pub fn index_events(
    events: &[RawEvent],
    items: &mut Vocab,
    behaviors: &Vocab,
) -> Result<Vec<IndexedEvent>> {
    let mut out = Vec::with_capacity(events.len());
    for e in events {
        let btype = behaviors.get(&e.behavior_label).ok_or_else(|| {
            Error::data(format!(
                "behavior label `{}` not in declared vocabulary",
                e.behavior_label
            ))
        })?;
        out.push(IndexedEvent {
            source_session_key: e.source_session_key.clone(),
            behavior: Behavior {
                item: items.intern(&e.item_token),
                btype,
                timestamp: e.timestamp,
            },
        });
    }
    Ok(out)
}

/// Group indexed events into sessions.
///
/// Sessions come out in first-appearance order of their source key; within a
/// session, behaviors are sorted by timestamp with input order breaking ties.
/// `ByGap` then splits each key's stream wherever the gap between consecutive
/// events exceeds `gap_ms`; split parts are suffixed `#0`, `#1`, ...
pub fn sessionize(events: &[IndexedEvent], mode: SessionizeMode) -> Result<Vec<Session>> {
    if let SessionizeMode::ByGap { gap_ms } = mode {
        if gap_ms <= 0 {
            return Err(Error::config(format!(
                "sessionize gap must be positive, got {gap_ms} ms"
            )));
        }
    }

    let mut key_order: Vec<String> = Vec::new();
    let mut by_key: HashMap<String, Vec<Behavior>> = HashMap::new();
    for e in events {
        let entry = by_key.entry(e.source_session_key.clone()).or_insert_with(|| {
            key_order.push(e.source_session_key.clone());
            Vec::new()
        });
        entry.push(e.behavior);
    }

    let mut sessions = Vec::new();
    for key in key_order {
        let mut behaviors = by_key.remove(&key).unwrap();
        behaviors.sort_by_key(|b| b.timestamp); // stable: ties keep input order

        match mode {
            SessionizeMode::ByKey => sessions.push(Session {
                session_id: key,
                behaviors,
            }),
            SessionizeMode::ByGap { gap_ms } => {
                let mut part: Vec<Behavior> = Vec::new();
                let mut part_idx = 0usize;
                for b in behaviors {
                    if let Some(last) = part.last() {
                        if b.timestamp - last.timestamp > gap_ms {
                            sessions.push(Session {
                                session_id: format!("{key}#{part_idx}"),
                                behaviors: std::mem::take(&mut part),
                            });
                            part_idx += 1;
                        }
                    }
                    part.push(b);
                }
                if !part.is_empty() {
                    sessions.push(Session {
                        session_id: format!("{key}#{part_idx}"),
                        behaviors: part,
                    });
                }
            }
        }
    }
    Ok(sessions)
}

/// Drop rare items and short sessions, iterating to a fixed point.
///
/// Each round removes every occurrence of items seen fewer than
/// `min_item_freq` times across the current session set, then drops sessions
/// shorter than `min_session_len`. Removing sessions lowers item counts, so
/// the two rules are reapplied until neither changes anything.
pub fn filter_dataset(
    sessions: &[Session],
    min_session_len: usize,
    min_item_freq: usize,
) -> Result<Vec<Session>> {
    if min_session_len < 1 || min_item_freq < 1 {
        return Err(Error::config(format!(
            "filter thresholds must be >= 1, got min_session_len={min_session_len} min_item_freq={min_item_freq}"
        )));
    }

    let mut current: Vec<Session> = sessions.to_vec();
    loop {
        let mut freq: HashMap<usize, usize> = HashMap::new();
        for s in &current {
            for b in &s.behaviors {
                *freq.entry(b.item).or_insert(0) += 1;
            }
        }

        let mut changed = false;
        let mut next: Vec<Session> = Vec::with_capacity(current.len());
        for s in &current {
            let kept: Vec<Behavior> = s
                .behaviors
                .iter()
                .filter(|b| freq.get(&b.item).copied().unwrap_or(0) >= min_item_freq)
                .copied()
                .collect();
            if kept.len() != s.behaviors.len() {
                changed = true;
            }
            if kept.len() >= min_session_len {
                next.push(Session {
                    session_id: s.session_id.clone(),
                    behaviors: kept,
                });
            } else {
                changed = true;
            }
        }
        current = next;
        if !changed {
            return Ok(current);
        }
    }
}

/// Split sessions into train and test by session start time: sessions whose
/// start lies strictly within `window_ms` of the latest start go to test.
pub fn temporal_split(sessions: &[Session], window_ms: i64) -> (Vec<Session>, Vec<Session>) {
    let Some(max_start) = sessions.iter().map(Session::start_ts).max() else {
        return (Vec::new(), Vec::new());
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for s in sessions {
        if max_start - s.start_ts() < window_ms {
            test.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    (train, test)
}

/// An exact fraction, used for recency-based subsampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num == 0 || num > den {
            return Err(Error::config(format!(
                "fraction must satisfy 0 < num/den <= 1, got {num}/{den}"
            )));
        }
        Ok(Fraction { num, den })
    }

    pub fn one() -> Self {
        Fraction { num: 1, den: 1 }
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    /// ceil(self * n) in exact integer arithmetic.
    pub fn ceil_mul(&self, n: usize) -> usize {
        (self.num * n as u64).div_ceil(self.den) as usize
    }

    /// Parse `"a/b"` or a decimal like `"0.25"`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some((a, b)) = text.split_once('/') {
            let num: u64 = a
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad fraction numerator `{a}`")))?;
            let den: u64 = b
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad fraction denominator `{b}`")))?;
            Fraction::new(num, den)
        } else {
            let f: f64 = text
                .parse()
                .map_err(|_| Error::config(format!("bad fraction `{text}`")))?;
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::config(format!("fraction out of range: {f}")));
            }
            // Represent the decimal exactly over a power-of-ten denominator.
            const DEN: u64 = 1_000_000_000;
            let num = (f * DEN as f64).round() as u64;
            Fraction::new(num.max(1), DEN)
        }
    }
}

impl std::fmt::Display for Fraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Keep the `ceil(fraction * n)` sessions with the latest start timestamps,
/// preserving their original relative order.
pub fn take_recent_fraction(sessions: &[Session], fraction: Fraction) -> Vec<Session> {
    if fraction.is_one() {
        return sessions.to_vec();
    }
    let keep = fraction.ceil_mul(sessions.len());
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    // Most recent first; on equal start the later input index wins.
    order.sort_by(|&a, &b| {
        sessions[b]
            .start_ts()
            .cmp(&sessions[a].start_ts())
            .then(b.cmp(&a))
    });
    let mut selected: Vec<usize> = order.into_iter().take(keep).collect();
    selected.sort_unstable();
    selected.into_iter().map(|i| sessions[i].clone()).collect()
}

/// Expand one session into (prefix, next-behavior) samples.
///
/// For a session `b_1..b_T` this emits `(b_1..b_t, b_{t+1})` for every
/// `t < T`. With `restrict_to_target` set, only samples whose label behavior
/// has type `target_type` are kept. Sessions shorter than 2 produce nothing.
pub fn sequence_split(
    session: &Session,
    target_type: usize,
    restrict_to_target: bool,
) -> Vec<TrainingSample> {
    if session.len() < 2 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(session.len() - 1);
    for t in 1..session.len() {
        let label = session.behaviors[t];
        if restrict_to_target && label.btype != target_type {
            continue;
        }
        out.push(TrainingSample {
            prefix: session.behaviors[..t].to_vec(),
            label_item: label.item,
            label_type: label.btype,
        });
    }
    out
}

/// Sequence-split every session in order.
pub fn split_all(
    sessions: &[Session],
    target_type: usize,
    restrict_to_target: bool,
) -> Vec<TrainingSample> {
    sessions
        .iter()
        .flat_map(|s| sequence_split(s, target_type, restrict_to_target))
        .collect()
}

/// Outcome of remapping sessions onto a final vocabulary: behaviors whose
/// items are unknown get dropped, and sessions that fall below two behaviors
/// are removed entirely.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RemapStats {
    pub dropped_behaviors: usize,
    pub dropped_sessions: usize,
}

/// Build the final item vocabulary from the (post-filter) training sessions
/// only, remap both splits onto it, and count what the test split loses.
pub fn build_dataset(
    train: &[Session],
    test: &[Session],
    behavior_vocab: Vocab,
    target_token: &str,
    working_items: &Vocab,
) -> Result<(Dataset, RemapStats)> {
    let target_type = behavior_vocab
        .get(target_token)
        .ok_or_else(|| Error::config(format!("target behavior `{target_token}` not in vocabulary")))?;

    // Final vocabulary: training items in first-appearance order.
    let mut item_vocab = Vocab::new();
    for s in train {
        for b in &s.behaviors {
            let token = working_items
                .token(b.item)
                .ok_or_else(|| Error::data(format!("unresolvable item index {}", b.item)))?;
            item_vocab.intern(token);
        }
    }

    let remap = |sessions: &[Session], stats: Option<&mut RemapStats>| -> Result<Vec<Session>> {
        let mut out = Vec::with_capacity(sessions.len());
        let mut dropped_behaviors = 0usize;
        let mut dropped_sessions = 0usize;
        for s in sessions {
            let mut behaviors = Vec::with_capacity(s.behaviors.len());
            for b in &s.behaviors {
                let token = working_items
                    .token(b.item)
                    .ok_or_else(|| Error::data(format!("unresolvable item index {}", b.item)))?;
                match item_vocab.get(token) {
                    Some(item) => behaviors.push(Behavior { item, ..*b }),
                    None => dropped_behaviors += 1,
                }
            }
            if behaviors.len() >= 2 {
                out.push(Session {
                    session_id: s.session_id.clone(),
                    behaviors,
                });
            } else {
                dropped_sessions += 1;
            }
        }
        if let Some(stats) = stats {
            stats.dropped_behaviors += dropped_behaviors;
            stats.dropped_sessions += dropped_sessions;
        }
        Ok(out)
    };

    let train_sessions = remap(train, None)?;
    let mut stats = RemapStats::default();
    let test_sessions = remap(test, Some(&mut stats))?;

    Ok((
        Dataset {
            item_vocab,
            behavior_vocab,
            target_type,
            train_sessions,
            test_sessions,
        },
        stats,
    ))
}
