//! Synthetic clickstream generator.
//!
//! Sessions follow a type-keyed transition rule: the next target-type item
//! is a deterministic function of the last item AND the last behavior type
//! (per-type permutations of the item space), optionally perturbed by noise.
//! Non-target behaviors land on rule items with probability
//! `1 - offtarget_noise`, otherwise on uniform items, which makes the
//! "predict the next target-type item" task meaningful only for models that
//! can tell behavior types apart. Items can be confined to disjoint
//! co-occurrence clusters to exercise contrastive objectives.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::RawEvent;

/// Generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_items: usize,
    pub n_types: usize,
    pub n_sessions: usize,
    pub len_min: usize,
    pub len_max: usize,
    /// Probability that a target-type transition ignores the rule and lands
    /// uniformly inside the session's cluster.
    pub noise: f64,
    /// Same, for non-target behavior types. 1.0 makes conversions
    /// unpredictable; 0.0 makes every transition rule-exact.
    pub offtarget_noise: f64,
    /// Probability each behavior is of the target type (index 0).
    pub p_target: f64,
    /// Number of disjoint item clusters sessions are confined to.
    pub clusters: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_items: 50,
            n_types: 2,
            n_sessions: 2000,
            len_min: 4,
            len_max: 8,
            noise: 0.02,
            offtarget_noise: 1.0,
            p_target: 0.5,
            clusters: 1,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_items == 0 || self.n_sessions == 0 || self.n_types == 0 {
            return Err(Error::config("synthetic sizes must be positive".to_string()));
        }
        if self.len_min < 2 || self.len_max < self.len_min {
            return Err(Error::config(
                "session lengths must satisfy 2 <= len_min <= len_max".to_string(),
            ));
        }
        if self.clusters == 0 || !self.n_items.is_multiple_of(self.clusters) {
            return Err(Error::config(format!(
                "clusters must divide n_items evenly ({} items, {} clusters)",
                self.n_items, self.clusters
            )));
        }
        let cluster_size = self.n_items / self.clusters;
        if self.n_types > cluster_size {
            return Err(Error::config(
                "need at least as many items per cluster as behavior types".to_string(),
            ));
        }
        for (name, p) in [
            ("noise", self.noise),
            ("offtarget_noise", self.offtarget_noise),
            ("p_target", self.p_target),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }

    pub fn behavior_label(&self, btype: usize) -> String {
        match btype {
            0 => "view".to_string(),
            1 => "cart".to_string(),
            2 => "buy".to_string(),
            other => format!("t{other}"),
        }
    }

    pub fn behavior_labels(&self) -> Vec<String> {
        (0..self.n_types).map(|t| self.behavior_label(t)).collect()
    }
}

/// The deterministic transition rule: per-type permutations of the item
/// space, block-diagonal over clusters, with distinct images across types
/// for every item.
pub struct TransitionRule {
    /// base[item] = rule successor under type 0; other types compose a
    /// within-cluster rotation before the base permutation.
    base: Vec<usize>,
    cluster_size: usize,
}

impl TransitionRule {
    fn build(spec: &SynthSpec) -> TransitionRule {
        let cluster_size = spec.n_items / spec.clusters;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(101);
        let mut base = vec![0usize; spec.n_items];
        for c in 0..spec.clusters {
            let start = c * cluster_size;
            let mut targets: Vec<usize> = (start..start + cluster_size).collect();
            for i in (1..targets.len()).rev() {
                let j = rng.random_range(0..=i);
                targets.swap(i, j);
            }
            for (offset, &t) in targets.iter().enumerate() {
                base[start + offset] = t;
            }
        }
        TransitionRule { base, cluster_size }
    }

    /// Successor of `item` under behavior type `btype`. Types beyond 0
    /// pre-rotate the item within its cluster, so `next(i, a) != next(i, b)`
    /// whenever `a != b` (mod cluster size).
    pub fn next(&self, item: usize, btype: usize) -> usize {
        let start = (item / self.cluster_size) * self.cluster_size;
        let rotated = start + ((item - start) + btype) % self.cluster_size;
        self.base[rotated]
    }
}

/// Generated output: raw events plus the rule they were produced by.
pub struct SynthOutput {
    pub events: Vec<RawEvent>,
    pub rule: TransitionRule,
}

const SESSION_SPACING_MS: i64 = 120_000;
const EVENT_SPACING_MS: i64 = 60_000;

/// Generate the synthetic event stream. Deterministic in the `seed` field.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let rule = TransitionRule::build(spec);
    let cluster_size = spec.n_items / spec.clusters;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(202);

    let mut events = Vec::new();
    for s in 0..spec.n_sessions {
        let cluster = s % spec.clusters;
        let cluster_start = cluster * cluster_size;
        let len = rng.random_range(spec.len_min..=spec.len_max);
        let session_key = format!("s{s:06}");
        let base_ts = 1_600_000_000_000i64 + s as i64 * SESSION_SPACING_MS;

        let draw_type = |rng: &mut ChaCha8Rng| -> usize {
            if spec.n_types == 1 || rng.random::<f64>() < spec.p_target {
                0
            } else {
                rng.random_range(1..spec.n_types)
            }
        };
        let uniform_item =
            |rng: &mut ChaCha8Rng| -> usize { cluster_start + rng.random_range(0..cluster_size) };

        let mut item = uniform_item(&mut rng);
        let mut btype = draw_type(&mut rng);
        for t in 0..len {
            events.push(RawEvent {
                source_session_key: session_key.clone(),
                timestamp: base_ts + t as i64 * EVENT_SPACING_MS,
                item_token: format!("item{item:04}"),
                behavior_label: spec.behavior_label(btype),
            });
            if t + 1 == len {
                break;
            }
            let next_type = draw_type(&mut rng);
            let miss_rate = if next_type == 0 {
                spec.noise
            } else {
                spec.offtarget_noise
            };
            let next_item = if rng.random::<f64>() < miss_rate {
                uniform_item(&mut rng)
            } else {
                rule.next(item, btype)
            };
            item = next_item;
            btype = next_type;
        }
    }
    Ok(SynthOutput { events, rule })
}

/// Render events as the canonical CSV format.
pub fn to_canonical_csv(events: &[RawEvent]) -> String {
    let mut out = String::from("session_id,timestamp,item_id,behavior\n");
    for e in events {
        writeln!(
            out,
            "{},{},{},{}",
            e.source_session_key, e.timestamp, e.item_token, e.behavior_label
        )
        .unwrap();
    }
    out
}
