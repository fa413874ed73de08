//! Classical reference rankers: session popularity (S-POP) and item-overlap
//! session KNN.
//!
//! Both produce full-catalog score vectors whose values are distinct, so the
//! shared ranking code reproduces their intended order exactly.

use std::collections::{HashMap, HashSet};

use crate::eval::ScoreVector;
use crate::ingest::{Behavior, Session};

/// Turn a strict preference order over all items into a score vector with
/// strictly decreasing values.
fn order_to_scores(order: &[usize], n_items: usize) -> ScoreVector {
    debug_assert_eq!(order.len(), n_items);
    let mut scores = vec![0.0; n_items];
    for (pos, &item) in order.iter().enumerate() {
        scores[item] = (n_items - pos) as f64;
    }
    ScoreVector(scores)
}

/// Recommends the items of the current session by in-session frequency,
/// breaking ties by recency, then by global training popularity; items
/// absent from the session follow, ordered by global popularity.
pub struct SPop {
    popularity: Vec<u64>,
}

impl SPop {
    pub fn fit(train_sessions: &[Session], n_items: usize) -> SPop {
        let mut popularity = vec![0u64; n_items];
        for s in train_sessions {
            for b in &s.behaviors {
                popularity[b.item] += 1;
            }
        }
        SPop { popularity }
    }

    pub fn score(&self, prefix: &[Behavior]) -> ScoreVector {
        let n_items = self.popularity.len();
        let mut freq: HashMap<usize, usize> = HashMap::new();
        let mut last_pos: HashMap<usize, usize> = HashMap::new();
        for (pos, b) in prefix.iter().enumerate() {
            *freq.entry(b.item).or_insert(0) += 1;
            last_pos.insert(b.item, pos);
        }
        let mut order: Vec<usize> = (0..n_items).collect();
        order.sort_by(|&a, &b| {
            let fa = freq.get(&a).copied().unwrap_or(0);
            let fb = freq.get(&b).copied().unwrap_or(0);
            fb.cmp(&fa)
                .then_with(|| {
                    let ra = last_pos.get(&a).copied();
                    let rb = last_pos.get(&b).copied();
                    rb.cmp(&ra) // later position (more recent) first
                })
                .then_with(|| self.popularity[b].cmp(&self.popularity[a]))
                .then(a.cmp(&b))
        });
        order_to_scores(&order, n_items)
    }
}

/// Session KNN: similarity between the prefix and a training session is the
/// number of shared items; candidates from the top `k_neighbors` sessions are
/// scored by the summed similarity of the neighbors containing them. Items
/// already in the prefix are excluded (ranked last).
pub struct IKnn {
    /// item -> training session indices containing it
    inverted: HashMap<usize, Vec<usize>>,
    session_items: Vec<HashSet<usize>>,
    session_start: Vec<i64>,
    n_items: usize,
    pub k_neighbors: usize,
}

pub const DEFAULT_KNN_NEIGHBORS: usize = 500;

impl IKnn {
    pub fn fit(train_sessions: &[Session], n_items: usize, k_neighbors: usize) -> IKnn {
        let mut inverted: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut session_items = Vec::with_capacity(train_sessions.len());
        let mut session_start = Vec::with_capacity(train_sessions.len());
        for (idx, s) in train_sessions.iter().enumerate() {
            let items: HashSet<usize> = s.behaviors.iter().map(|b| b.item).collect();
            for &item in &items {
                inverted.entry(item).or_default().push(idx);
            }
            session_items.push(items);
            session_start.push(s.start_ts());
        }
        IKnn {
            inverted,
            session_items,
            session_start,
            n_items,
            k_neighbors,
        }
    }

    pub fn score(&self, prefix: &[Behavior]) -> ScoreVector {
        let prefix_items: HashSet<usize> = prefix.iter().map(|b| b.item).collect();

        // Count overlap per candidate session.
        let mut overlap: HashMap<usize, usize> = HashMap::new();
        for &item in &prefix_items {
            if let Some(sessions) = self.inverted.get(&item) {
                for &s in sessions {
                    *overlap.entry(s).or_insert(0) += 1;
                }
            }
        }
        let mut neighbors: Vec<(usize, usize)> = overlap.into_iter().collect();
        // Highest overlap first; recency breaks ties, then index for
        // determinism.
        neighbors.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then_with(|| self.session_start[b.0].cmp(&self.session_start[a.0]))
                .then(a.0.cmp(&b.0))
        });
        neighbors.truncate(self.k_neighbors);

        let mut candidate_score: HashMap<usize, u64> = HashMap::new();
        for &(sess, sim) in &neighbors {
            for &item in &self.session_items[sess] {
                if !prefix_items.contains(&item) {
                    *candidate_score.entry(item).or_insert(0) += sim as u64;
                }
            }
        }

        let mut order: Vec<usize> = (0..self.n_items).collect();
        order.sort_by(|&a, &b| {
            // Prefix items rank after everything ("has not touched").
            let pa = prefix_items.contains(&a);
            let pb = prefix_items.contains(&b);
            pa.cmp(&pb)
                .then_with(|| {
                    let sa = candidate_score.get(&a).copied().unwrap_or(0);
                    let sb = candidate_score.get(&b).copied().unwrap_or(0);
                    sb.cmp(&sa)
                })
                .then(a.cmp(&b))
        });
        order_to_scores(&order, self.n_items)
    }
}
