//! Leave-one-out ranking evaluation.
//!
//! Every user contributes a single test target, ranked over the full
//! vocabulary (no candidate sampling). With one relevant item the metric
//! forms collapse to closed expressions of the rank:
//!
//! - `recall@K  = 1[rank <= K]`
//! - `ndcg@K    = 1 / log2(rank + 1)` if within K else 0
//! - `precision@K = recall@K / K`
//! - `mrr@K     = 1 / rank` if within K else 0
//!
//! F1 is computed from the averaged precision and recall.

use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::Serialize;

use crate::backbone::RankingModel;
use crate::corpus::SplitView;
use crate::error::{Error, Result};

/// Metric means at one cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsAtK {
    pub k: usize,
    pub ndcg: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub mrr: f64,
}

/// Per-cutoff metric means over all evaluated users.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub evaluated_users: usize,
    pub at: Vec<MetricsAtK>,
}

impl MetricsReport {
    pub fn at_k(&self, k: usize) -> Option<&MetricsAtK> {
        self.at.iter().find(|m| m.k == k)
    }
}

/// Reports serialize flat with fixed `metric@K` keys, in cutoff order.
impl Serialize for MetricsReport {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(1 + 5 * self.at.len()))?;
        map.serialize_entry("evaluated_users", &self.evaluated_users)?;
        for m in &self.at {
            map.serialize_entry(&format!("ndcg@{}", m.k), &m.ndcg)?;
            map.serialize_entry(&format!("recall@{}", m.k), &m.recall)?;
            map.serialize_entry(&format!("precision@{}", m.k), &m.precision)?;
            map.serialize_entry(&format!("f1@{}", m.k), &m.f1)?;
            map.serialize_entry(&format!("mrr@{}", m.k), &m.mrr)?;
        }
        map.end()
    }
}

/// NDCG contribution of a single-target rank at cutoff `k`.
pub fn ndcg_at(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0 / ((rank as f64) + 1.0).log2()
    } else {
        0.0
    }
}

/// All single-target metrics for one rank: (ndcg, recall, precision, mrr).
pub fn metrics_from_rank(rank: usize, k: usize) -> (f64, f64, f64, f64) {
    debug_assert!(rank >= 1 && k >= 1);
    if rank <= k {
        (ndcg_at(rank, k), 1.0, 1.0 / k as f64, 1.0 / rank as f64)
    } else {
        (0.0, 0.0, 0.0, 0.0)
    }
}

/// F1 from averaged precision and recall; 0 when both are 0.
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Rank of one user's test target: context is the full sequence minus the
/// target, scored over the whole vocabulary with the exact tie-break.
pub fn rank_for_user(model: &impl RankingModel, split: &SplitView, user: u32) -> Result<usize> {
    let entry = split
        .eval_users
        .iter()
        .find(|u| u.user == user)
        .ok_or_else(|| Error::Contract(format!("user {user} has no test target")))?;
    Ok(model.rank_of(&entry.test_context(), entry.test_target))
}

/// Evaluate all users with test targets and average per-cutoff metrics.
pub fn evaluate(model: &impl RankingModel, split: &SplitView, ks: &[usize]) -> Result<MetricsReport> {
    if split.eval_users.is_empty() {
        return Err(Error::Contract("evaluate: no users with test targets".into()));
    }
    let ranks: Vec<usize> = split
        .eval_users
        .par_iter()
        .map(|u| model.rank_of(&u.test_context(), u.test_target))
        .collect();
    Ok(report_from_ranks(&ranks, ks))
}

/// Aggregate a rank list into a report (sequential reduce: the result is
/// independent of how the ranks were produced).
pub fn report_from_ranks(ranks: &[usize], ks: &[usize]) -> MetricsReport {
    let n = ranks.len() as f64;
    let at = ks
        .iter()
        .map(|&k| {
            let mut ndcg = 0.0;
            let mut recall = 0.0;
            let mut mrr = 0.0;
            for &rank in ranks {
                let (nd, re, _, mr) = metrics_from_rank(rank, k);
                ndcg += nd;
                recall += re;
                mrr += mr;
            }
            let (ndcg, recall, mrr) = (ndcg / n, recall / n, mrr / n);
            // Single-target protocol: mean precision is exactly recall / k.
            let precision = recall / k as f64;
            MetricsAtK {
                k,
                ndcg,
                recall,
                precision,
                f1: f1_from(precision, recall),
                mrr,
            }
        })
        .collect();
    MetricsReport {
        evaluated_users: ranks.len(),
        at,
    }
}
