//! Top-K ranking evaluation: hit ratio and mean reciprocal rank over
//! next-item predictions, plus the classical reference rankers.

pub mod baselines;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TrainingSample;

/// Probability scores over the full item catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Whether the entries form a probability vector within `tol`.
    pub fn is_distribution(&self, tol: f64) -> bool {
        let sum: f64 = self.0.iter().sum();
        (sum - 1.0).abs() <= tol && self.0.iter().all(|&p| (-tol..=1.0 + tol).contains(&p))
    }
}

/// Top-K items in descending score order, ties broken by ascending index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedList {
    pub items: Vec<usize>,
    pub k: usize,
    pub full_catalog: bool,
}

pub fn top_k(scores: &ScoreVector, k: usize) -> RankedList {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores.0[b]
            .partial_cmp(&scores.0[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let full_catalog = k >= scores.len();
    order.truncate(k);
    RankedList {
        items: order,
        k,
        full_catalog,
    }
}

/// 1-based rank of `target` under the deterministic total order
/// (score descending, item index ascending).
pub fn rank_target(scores: &ScoreVector, target: usize) -> usize {
    let ts = scores.0[target];
    let mut ahead = 0usize;
    for (i, &s) in scores.0.iter().enumerate() {
        if s > ts || (s == ts && i < target) {
            ahead += 1;
        }
    }
    ahead + 1
}

/// Hit ratio: fraction of samples whose target ranked within the top K.
pub fn hr_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::data("hit ratio over zero samples is undefined".to_string()));
    }
    let hits = ranks.iter().filter(|&&r| r <= k).count();
    Ok(hits as f64 / ranks.len() as f64)
}

/// Mean reciprocal rank within the top K (0 contribution on miss).
/// Accumulates in input order.
pub fn mrr_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::data("MRR over zero samples is undefined".to_string()));
    }
    let mut sum = 0.0f64;
    for &r in ranks {
        if r <= k {
            sum += 1.0 / r as f64;
        }
    }
    Ok(sum / ranks.len() as f64)
}

/// Metrics at one K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMetrics {
    pub k: usize,
    pub hr: f64,
    pub mrr: f64,
    pub n_hit: usize,
}

/// Evaluation report over a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub per_k: Vec<KMetrics>,
    /// 1-based rank of the target per sample; `None` when the target was
    /// outside the scored catalog.
    pub ranks: Vec<Option<usize>>,
}

impl MetricsReport {
    pub fn at(&self, k: usize) -> Option<&KMetrics> {
        self.per_k.iter().find(|m| m.k == k)
    }

    /// Build a report from precomputed ranks.
    pub fn from_ranks(ranks: Vec<Option<usize>>, ks: &[usize]) -> Result<MetricsReport> {
        if ranks.is_empty() {
            return Err(Error::data("metrics over zero samples are undefined".to_string()));
        }
        // Misses count as an effectively infinite rank. Aggregation runs
        // over the sorted ranks so the report does not depend on sample
        // order, not even in the last float bit.
        let mut dense: Vec<usize> = ranks.iter().map(|r| r.unwrap_or(usize::MAX)).collect();
        dense.sort_unstable();
        let mut per_k = Vec::with_capacity(ks.len());
        for &k in ks {
            per_k.push(KMetrics {
                k,
                hr: hr_at_k(&dense, k)?,
                mrr: mrr_at_k(&dense, k)?,
                n_hit: dense.iter().filter(|&&r| r <= k).count(),
            });
        }
        Ok(MetricsReport {
            n: ranks.len(),
            per_k,
            ranks,
        })
    }
}

/// Score every test sample with `scorer`, rank its label and aggregate
/// HR/MRR at each requested K. Sample order does not affect the metrics.
pub fn evaluate<F>(scorer: F, samples: &[TrainingSample], ks: &[usize]) -> Result<MetricsReport>
where
    F: Fn(&TrainingSample) -> Result<ScoreVector>,
{
    if samples.is_empty() {
        return Err(Error::data("cannot evaluate on zero samples".to_string()));
    }
    let mut ranks = Vec::with_capacity(samples.len());
    for (i, sample) in samples.iter().enumerate() {
        let scores = scorer(sample)
            .map_err(|e| Error::data(format!("scorer failed on sample {i}: {e}")))?;
        ranks.push(if sample.label_item < scores.len() {
            Some(rank_target(&scores, sample.label_item))
        } else {
            None
        });
    }
    MetricsReport::from_ranks(ranks, ks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Behavior;
    use rand::Rng as _;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_rules() {
        let s = ScoreVector(vec![0.5, 0.3, 0.2]);
        assert_eq!(rank_target(&s, 0), 1);
        assert_eq!(rank_target(&s, 2), 3);

        // Unique max wins regardless of index.
        let s = ScoreVector(vec![0.1, 0.9, 0.0]);
        assert_eq!(rank_target(&s, 1), 1);

        // All equal: ascending index breaks ties.
        let s = ScoreVector(vec![0.25; 4]);
        assert_eq!(rank_target(&s, 0), 1);
        assert_eq!(rank_target(&s, 3), 4);
    }

    #[test]
    fn ranks_form_a_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(1..30);
            let scores =
                ScoreVector((0..n).map(|_| rng.random_range(0..5) as f64 * 0.125).collect());
            let mut ranks: Vec<usize> = (0..n).map(|t| rank_target(&scores, t)).collect();
            ranks.sort_unstable();
            assert_eq!(ranks, (1..=n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn hr_and_mrr_basics() {
        assert_eq!(hr_at_k(&[1, 25, 3, 100], 20).unwrap(), 0.5);
        assert_eq!(hr_at_k(&[1, 1, 1], 20).unwrap(), 1.0);
        assert_eq!(hr_at_k(&[30, 40], 20).unwrap(), 0.0);
        assert_eq!(mrr_at_k(&[1], 20).unwrap(), 1.0);
        assert_eq!(mrr_at_k(&[4], 20).unwrap(), 0.25);
        assert_eq!(mrr_at_k(&[21], 20).unwrap(), 0.0);
        assert!(hr_at_k(&[], 20).is_err());
        assert!(mrr_at_k(&[], 20).is_err());
    }

    fn sample(label: usize) -> TrainingSample {
        TrainingSample {
            prefix: vec![Behavior {
                item: 0,
                btype: 0,
                timestamp: 0,
            }],
            label_item: label,
            label_type: 0,
        }
    }

    #[test]
    fn perfect_scorer_scores_one() {
        let n = 10usize;
        let samples: Vec<TrainingSample> = (0..5).map(|i| sample(i % n)).collect();
        let report = evaluate(
            |s| {
                let mut v = vec![0.0; n];
                v[s.label_item] = 1.0;
                Ok(ScoreVector(v))
            },
            &samples,
            &[5, 20],
        )
        .unwrap();
        for m in &report.per_k {
            assert_eq!(m.hr, 1.0);
            assert_eq!(m.mrr, 1.0);
        }
    }

    #[test]
    fn single_sample_rank_two() {
        let report = evaluate(
            |_| Ok(ScoreVector(vec![0.6, 0.4, 0.0])),
            &[sample(1)],
            &[5],
        )
        .unwrap();
        assert_eq!(report.at(5).unwrap().hr, 1.0);
        assert_eq!(report.at(5).unwrap().mrr, 0.5);
        assert_eq!(report.ranks, vec![Some(2)]);
    }

    #[test]
    fn uniform_random_scorer_hits_at_expected_rate() {
        let n_items = 1000usize;
        let samples: Vec<TrainingSample> = (0..10_000).map(|i| sample(i % n_items)).collect();
        let rng = std::cell::RefCell::new(ChaCha8Rng::seed_from_u64(123));
        let report = evaluate(
            |_| {
                let mut r = rng.borrow_mut();
                Ok(ScoreVector((0..n_items).map(|_| r.random::<f64>()).collect()))
            },
            &samples,
            &[20],
        )
        .unwrap();
        let hr = report.at(20).unwrap().hr;
        assert!((hr - 0.02).abs() < 0.005, "HR@20 = {hr}");
    }

    #[test]
    fn evaluate_is_order_invariant() {
        let n = 50usize;
        let samples: Vec<TrainingSample> = (0..40).map(|i| sample((i * 7) % n)).collect();
        let scorer = |s: &TrainingSample| {
            let mut v = vec![0.0; n];
            for i in 0..n {
                v[i] = ((s.label_item * 31 + i * 17) % 101) as f64 / 101.0;
            }
            Ok(ScoreVector(v))
        };
        let a = evaluate(scorer, &samples, &[5, 20]).unwrap();
        let mut reversed = samples.clone();
        reversed.reverse();
        let b = evaluate(scorer, &reversed, &[5, 20]).unwrap();
        assert_eq!(a.per_k, b.per_k);
    }

    #[test]
    fn scorer_failure_names_the_sample() {
        let samples = vec![sample(0), sample(1)];
        let err = evaluate(
            |s| {
                if s.label_item == 1 {
                    Err(Error::numeric("boom".to_string()))
                } else {
                    Ok(ScoreVector(vec![1.0, 0.0]))
                }
            },
            &samples,
            &[5],
        )
        .unwrap_err();
        assert!(err.to_string().contains("sample 1"));
    }

    #[test]
    fn top_k_dedups_and_orders() {
        let s = ScoreVector(vec![0.1, 0.4, 0.4, 0.1]);
        let l = top_k(&s, 3);
        assert_eq!(l.items, vec![1, 2, 0]);
        assert!(!l.full_catalog);
        let l = top_k(&s, 10);
        assert!(l.full_catalog);
        assert_eq!(l.items.len(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mrr_bounded_by_hr_and_monotone(
                ranks in prop::collection::vec(1usize..200, 1..60),
                k1 in 1usize..50,
                k2 in 50usize..200,
            ) {
                let hr1 = hr_at_k(&ranks, k1).unwrap();
                let hr2 = hr_at_k(&ranks, k2).unwrap();
                let mrr1 = mrr_at_k(&ranks, k1).unwrap();
                let mrr2 = mrr_at_k(&ranks, k2).unwrap();
                prop_assert!(mrr1 <= hr1 + 1e-15);
                prop_assert!(mrr2 <= hr2 + 1e-15);
                prop_assert!(hr1 <= hr2 + 1e-15);
                prop_assert!(mrr1 <= mrr2 + 1e-15);
            }
        }
    }
}
