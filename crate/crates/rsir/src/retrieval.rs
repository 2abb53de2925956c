//! Rank backends for the fidelity check.
//!
//! The exact backend scans every item. The clustered backend k-means the item
//! embeddings once per model, probes the `top_c` clusters whose centroids
//! align best with the context vector, and ranks only within the probed
//! candidates; an item outside them is treated as ranked beyond any
//! threshold, which can only make the fidelity check stricter.

use serde::{Deserialize, Serialize};

use crate::backbone::{RankingModel, SeqEmbModel};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// K-means partition of the item embedding space.
#[derive(Debug, Clone)]
pub struct ClusterIndex {
    dim: usize,
    /// Row-major `C x d`.
    centroids: Vec<f64>,
    assignment: Vec<u32>,
    members: Vec<Vec<u32>>,
    top_c: usize,
    /// Lloyd objective after each assignment phase; non-increasing.
    objective_trace: Vec<f64>,
}

/// Which rank backend the fidelity check uses.
#[derive(Debug, Clone)]
pub enum FidelityBackend {
    Exact,
    Clustered(ClusterIndex),
}

/// Backend selection as it appears in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendChoice {
    Exact,
    Clustered,
}

impl std::fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendChoice::Exact => write!(f, "exact"),
            BackendChoice::Clustered => write!(f, "clustered"),
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// K-means over item embeddings: seeded farthest-point initialization, then
/// Lloyd iterations until the assignment stops changing or `iters` is hit.
/// An empty cluster is reseeded to the point farthest from its nearest
/// centroid. Deterministic for a fixed seed.
pub fn build_index(
    model: &SeqEmbModel,
    n_clusters: usize,
    top_c: usize,
    iters: usize,
    seed: u64,
) -> Result<ClusterIndex> {
    let n_items = model.vocab_size();
    let dim = model.dim();
    if n_clusters == 0 || n_clusters > n_items {
        return Err(Error::Config(format!(
            "cluster count must be in [1, {n_items}], got {n_clusters}"
        )));
    }
    if top_c == 0 || top_c > n_clusters {
        return Err(Error::Config(format!(
            "top_c must be in [1, {n_clusters}], got {top_c}"
        )));
    }

    let point = |i: usize| model.embedding(i as u32);

    // Farthest-point init.
    let mut rng = stream_rng(seed, &[0x6b6d]);
    let mut centroids: Vec<f64> = Vec::with_capacity(n_clusters * dim);
    let first = rand::Rng::gen_range(&mut rng, 0..n_items);
    centroids.extend_from_slice(point(first));
    let mut min_dist: Vec<f64> = (0..n_items).map(|i| sq_dist(point(i), point(first))).collect();
    while centroids.len() / dim < n_clusters {
        let mut far = 0;
        for i in 1..n_items {
            if min_dist[i] > min_dist[far] {
                far = i;
            }
        }
        centroids.extend_from_slice(point(far));
        let c = &centroids[centroids.len() - dim..];
        for i in 0..n_items {
            let d = sq_dist(point(i), c);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }

    let mut assignment = vec![0u32; n_items];
    let mut objective_trace = Vec::new();
    for _ in 0..iters.max(1) {
        // Assignment phase (ties to the lowest cluster id).
        let mut changed = false;
        let mut objective = 0.0;
        for i in 0..n_items {
            let mut best = 0u32;
            let mut best_d = f64::INFINITY;
            for c in 0..n_clusters {
                let d = sq_dist(point(i), &centroids[c * dim..(c + 1) * dim]);
                if d < best_d {
                    best_d = d;
                    best = c as u32;
                }
            }
            objective += best_d;
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        let first_pass = objective_trace.is_empty();
        objective_trace.push(objective);
        if !changed && !first_pass {
            break;
        }

        // Update phase: means of assigned points; reseed empty clusters to
        // the globally worst-served point.
        let mut sums = vec![0.0; n_clusters * dim];
        let mut counts = vec![0usize; n_clusters];
        for i in 0..n_items {
            let c = assignment[i] as usize;
            counts[c] += 1;
            for k in 0..dim {
                sums[c * dim + k] += point(i)[k];
            }
        }
        for c in 0..n_clusters {
            if counts[c] > 0 {
                for k in 0..dim {
                    centroids[c * dim + k] = sums[c * dim + k] / counts[c] as f64;
                }
            }
        }
        for c in 0..n_clusters {
            if counts[c] == 0 {
                let mut far = 0;
                let mut far_d = -1.0;
                for i in 0..n_items {
                    let a = assignment[i] as usize;
                    let d = sq_dist(point(i), &centroids[a * dim..(a + 1) * dim]);
                    if d > far_d {
                        far_d = d;
                        far = i;
                    }
                }
                centroids[c * dim..(c + 1) * dim].copy_from_slice(point(far));
            }
        }
    }

    let mut members = vec![Vec::new(); n_clusters];
    for (i, &c) in assignment.iter().enumerate() {
        members[c as usize].push(i as u32);
    }

    Ok(ClusterIndex {
        dim,
        centroids,
        assignment,
        members,
        top_c,
        objective_trace,
    })
}

impl ClusterIndex {
    pub fn n_clusters(&self) -> usize {
        self.members.len()
    }

    pub fn top_c(&self) -> usize {
        self.top_c
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    pub fn members(&self, c: usize) -> &[u32] {
        &self.members[c]
    }

    /// Lloyd objective (sum of squared distances) after each assignment.
    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    /// Items of the `top_c` clusters whose centroids score highest against
    /// the context vector (inner product, ties to the lower cluster id).
    /// Result is sorted by item index.
    pub fn approx_candidates(&self, h: &[f64]) -> Vec<u32> {
        let mut order: Vec<usize> = (0..self.n_clusters()).collect();
        let scores: Vec<f64> = (0..self.n_clusters()).map(|c| dot(self.centroid(c), h)).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        let mut out: Vec<u32> = order
            .into_iter()
            .take(self.top_c)
            .flat_map(|c| self.members[c].iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// Rank of `item` within the probed candidate subset under the exact
    /// tie-break, or `None` when `item` is not probed at all.
    pub fn approx_rank_of(&self, model: &SeqEmbModel, h: &[f64], item: u32) -> Option<usize> {
        let candidates = self.approx_candidates(h);
        self.rank_within(model, h, &candidates, item)
    }

    fn rank_within(
        &self,
        model: &SeqEmbModel,
        h: &[f64],
        candidates: &[u32],
        item: u32,
    ) -> Option<usize> {
        if candidates.binary_search(&item).is_err() {
            return None;
        }
        let s = model.score_item(h, item);
        let mut rank = 1usize;
        for &c in candidates {
            let sc = model.score_item(h, c);
            if sc > s || (sc == s && c < item) {
                rank += 1;
            }
        }
        Some(rank)
    }

    /// Fidelity decision over the candidate subset: does any target rank
    /// within `tau`?
    pub(crate) fn accepts(
        &self,
        model: &SeqEmbModel,
        h: &[f64],
        targets: &std::collections::HashSet<u32>,
        tau: usize,
    ) -> bool {
        let candidates = self.approx_candidates(h);
        targets
            .iter()
            .any(|&t| matches!(self.rank_within(model, h, &candidates, t), Some(r) if r <= tau))
    }
}

/// A sampled fidelity-decision state for agreement measurement.
#[derive(Debug, Clone)]
pub struct SampleState {
    pub context: Vec<u32>,
    pub targets: Vec<u32>,
    pub tau: usize,
}

/// Agreement between two backends over sampled states, with a 95% Wilson
/// interval.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AgreementReport {
    pub states: usize,
    pub agreement: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

/// Fraction of states on which the two backends reach the same fidelity
/// decision.
pub fn agreement_report(
    model: &SeqEmbModel,
    a: &FidelityBackend,
    b: &FidelityBackend,
    states: &[SampleState],
) -> Result<AgreementReport> {
    if states.is_empty() {
        return Err(Error::Contract("agreement_report: no sample states".into()));
    }
    let mut agree = 0usize;
    for s in states {
        let targets: std::collections::HashSet<u32> = s.targets.iter().copied().collect();
        let da = crate::generator::fidelity_accept(a, model, &s.context, &targets, s.tau);
        let db = crate::generator::fidelity_accept(b, model, &s.context, &targets, s.tau);
        if da == db {
            agree += 1;
        }
    }
    let n = states.len() as f64;
    let p = agree as f64 / n;
    // Wilson score interval, z = 1.96.
    let z = 1.96f64;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    Ok(AgreementReport {
        states: states.len(),
        agreement: p,
        ci95_low: (center - half).max(0.0),
        ci95_high: (center + half).min(1.0),
    })
}

/// Default cluster count: `ceil(sqrt(|I|))`.
pub fn default_cluster_count(n_items: usize) -> usize {
    (n_items as f64).sqrt().ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::SeqEmbModel;

    fn model_from(embeddings: Vec<f64>, dim: usize) -> SeqEmbModel {
        let n = embeddings.len() / dim;
        SeqEmbModel::from_parts(n, dim, 0.8, embeddings)
    }

    #[test]
    fn single_cluster_holds_everyone_and_centroid_is_mean() {
        let m = model_from(vec![0.0, 0.0, 1.0, 0.0, 0.0, 3.0], 2);
        let idx = build_index(&m, 1, 1, 10, 1).unwrap();
        assert_eq!(idx.members(0).len(), 3);
        let c = idx.centroid(0);
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((c[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_cluster_per_item() {
        let m = SeqEmbModel::init(6, 3, 0.8, 3);
        let idx = build_index(&m, 6, 2, 10, 1).unwrap();
        for c in 0..6 {
            assert_eq!(idx.members(c).len(), 1);
        }
    }

    #[test]
    fn separated_blobs_recover_labels() {
        // Two tight blobs far apart in d = 2.
        let mut emb = Vec::new();
        let mut rng = crate::rng::stream_rng(9, &[0]);
        for i in 0..20 {
            let cx = if i < 10 { -10.0 } else { 10.0 };
            emb.push(cx + rand::Rng::gen_range(&mut rng, -0.1..0.1));
            emb.push(rand::Rng::gen_range(&mut rng, -0.1..0.1));
        }
        let m = model_from(emb, 2);
        let idx = build_index(&m, 2, 1, 25, 4).unwrap();
        let a = idx.assignment()[0];
        for i in 0..10 {
            assert_eq!(idx.assignment()[i], a);
        }
        let b = idx.assignment()[10];
        assert_ne!(a, b);
        for i in 10..20 {
            assert_eq!(idx.assignment()[i], b);
        }
    }

    #[test]
    fn objective_trace_non_increasing() {
        for seed in 0..5 {
            let m = SeqEmbModel::init(60, 8, 0.8, 100 + seed);
            let idx = build_index(&m, 8, 3, 25, seed).unwrap();
            for w in idx.objective_trace().windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "objective increased: {w:?}");
            }
        }
    }

    #[test]
    fn build_is_deterministic_per_seed() {
        let m = SeqEmbModel::init(40, 6, 0.8, 77);
        let a = build_index(&m, 7, 3, 25, 5).unwrap();
        let b = build_index(&m, 7, 3, 25, 5).unwrap();
        assert_eq!(a.assignment(), b.assignment());
        assert_eq!(a.centroids, b.centroids);
    }

    #[test]
    fn full_probe_covers_vocabulary() {
        let m = SeqEmbModel::init(30, 4, 0.8, 11);
        for (c, top_c) in [(1usize, 1usize), (5, 5)] {
            let idx = build_index(&m, c, top_c, 25, 2).unwrap();
            let h = m.encode_context(&[3, 7]).unwrap();
            let cand = idx.approx_candidates(&h);
            assert_eq!(cand.len(), 30);
        }
    }

    #[test]
    fn partial_probe_is_strictly_smaller() {
        let m = SeqEmbModel::init(50, 4, 0.8, 11);
        let idx = build_index(&m, 8, 3, 25, 2).unwrap();
        if (0..8).all(|c| !idx.members(c).is_empty()) {
            let h = m.encode_context(&[3]).unwrap();
            assert!(idx.approx_candidates(&h).len() < 50);
        }
    }

    #[test]
    fn aligned_context_probes_its_blob() {
        // Orthogonal blobs: items 0..3 on +x, 4..7 on +y.
        let mut emb = Vec::new();
        for i in 0..8 {
            if i < 4 {
                emb.extend_from_slice(&[1.0 + 0.01 * i as f64, 0.0]);
            } else {
                emb.extend_from_slice(&[0.0, 1.0 + 0.01 * i as f64]);
            }
        }
        let m = model_from(emb, 2);
        let idx = build_index(&m, 2, 1, 25, 3).unwrap();
        let h = vec![1.0, 0.0];
        let cand = idx.approx_candidates(&h);
        let cluster_of_0 = idx.assignment()[0];
        let want: Vec<u32> = (0..8u32).filter(|&i| idx.assignment()[i as usize] == cluster_of_0).collect();
        assert_eq!(cand, want);
        assert!(cand.contains(&0) && !cand.contains(&7));
    }

    #[test]
    fn single_cluster_rank_equals_exact() {
        use crate::backbone::RankingModel;
        let m = SeqEmbModel::init(25, 5, 0.8, 19);
        let idx = build_index(&m, 1, 1, 10, 1).unwrap();
        let ctx = vec![2u32, 9, 14];
        let h = m.encode_context(&ctx).unwrap();
        for item in 0..25u32 {
            let exact = m.rank_of(&ctx, item);
            let approx = idx.approx_rank_of(&m, &h, item).unwrap();
            assert_eq!(exact, approx);
        }
    }

    #[test]
    fn missing_item_returns_none() {
        let m = SeqEmbModel::init(30, 4, 0.8, 23);
        let idx = build_index(&m, 6, 1, 25, 2).unwrap();
        let h = m.encode_context(&[1]).unwrap();
        let cand = idx.approx_candidates(&h);
        let outside: Vec<u32> = (0..30u32).filter(|i| cand.binary_search(i).is_err()).collect();
        assert!(!outside.is_empty(), "top_c=1 of 6 clusters should not cover everything");
        for item in outside {
            assert_eq!(idx.approx_rank_of(&m, &h, item), None);
        }
    }

    #[test]
    fn agreement_of_exact_with_itself_is_one() {
        let m = SeqEmbModel::init(20, 4, 0.8, 31);
        let states: Vec<SampleState> = (0..50)
            .map(|i| SampleState {
                context: vec![i % 20],
                targets: vec![(i + 3) % 20, (i + 7) % 20],
                tau: 5,
            })
            .collect();
        let r = agreement_report(&m, &FidelityBackend::Exact, &FidelityBackend::Exact, &states).unwrap();
        assert_eq!(r.agreement, 1.0);
    }

    #[test]
    fn agreement_single_cluster_vs_exact_is_one() {
        let m = SeqEmbModel::init(20, 4, 0.8, 31);
        let idx = build_index(&m, 1, 1, 10, 1).unwrap();
        let states: Vec<SampleState> = (0..100)
            .map(|i| SampleState {
                context: vec![i % 20, (i * 3 + 1) % 20],
                targets: vec![(i + 5) % 20],
                tau: 1 + (i as usize % 10),
            })
            .collect();
        let r = agreement_report(&m, &FidelityBackend::Exact, &FidelityBackend::Clustered(idx), &states).unwrap();
        assert_eq!(r.agreement, 1.0);
    }
}
