//! Count-based first-order Markov backbone, the weak teacher.

use std::collections::BTreeMap;

use crate::corpus::SplitView;
use crate::error::{Error, Result};

use super::RankingModel;

/// Transition-count model scoring `P(v | last context item)` with add-alpha
/// smoothing. An empty context or an unseen last item scores uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    n_items: usize,
    alpha: f64,
    /// Sparse transition counts per source item.
    rows: Vec<BTreeMap<u32, u64>>,
    row_totals: Vec<u64>,
}

impl MarkovModel {
    /// Count adjacent pairs over the split's training sequences.
    pub fn train(split: &SplitView, alpha: f64) -> Result<MarkovModel> {
        if alpha <= 0.0 {
            return Err(Error::Config("markov alpha must be > 0".into()));
        }
        let n_items = split.vocab_size;
        let mut rows: Vec<BTreeMap<u32, u64>> = vec![BTreeMap::new(); n_items];
        let mut row_totals = vec![0u64; n_items];
        for seq in &split.training_sequences {
            for pair in seq.items.windows(2) {
                *rows[pair[0] as usize].entry(pair[1]).or_insert(0) += 1;
                row_totals[pair[0] as usize] += 1;
            }
        }
        Ok(MarkovModel {
            n_items,
            alpha,
            rows,
            row_totals,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn transition_count(&self, from: u32, to: u32) -> u64 {
        self.rows[from as usize].get(&to).copied().unwrap_or(0)
    }

    pub(crate) fn from_parts(
        n_items: usize,
        alpha: f64,
        entries: Vec<(u32, u32, u64)>,
    ) -> MarkovModel {
        let mut rows: Vec<BTreeMap<u32, u64>> = vec![BTreeMap::new(); n_items];
        let mut row_totals = vec![0u64; n_items];
        for (from, to, count) in entries {
            rows[from as usize].insert(to, count);
            row_totals[from as usize] += count;
        }
        MarkovModel {
            n_items,
            alpha,
            rows,
            row_totals,
        }
    }

    pub(crate) fn entries(&self) -> Vec<(u32, u32, u64)> {
        let mut out = Vec::new();
        for (from, row) in self.rows.iter().enumerate() {
            for (&to, &count) in row {
                out.push((from as u32, to, count));
            }
        }
        out
    }
}

impl RankingModel for MarkovModel {
    fn vocab_size(&self) -> usize {
        self.n_items
    }

    fn score_all(&self, context: &[u32]) -> Vec<f64> {
        let Some(&last) = context.last() else {
            return vec![1.0 / self.n_items as f64; self.n_items];
        };
        let total = self.row_totals[last as usize] as f64;
        let denom = total + self.n_items as f64 * self.alpha;
        let row = &self.rows[last as usize];
        (0..self.n_items as u32)
            .map(|v| (row.get(&v).copied().unwrap_or(0) as f64 + self.alpha) / denom)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SplitView, TrainSequence};

    fn split_of(sequences: Vec<Vec<u32>>, vocab: usize) -> SplitView {
        SplitView {
            training_sequences: sequences
                .into_iter()
                .enumerate()
                .map(|(u, items)| TrainSequence { user: u as u32, items })
                .collect(),
            eval_users: Vec::new(),
            vocab_size: vocab,
        }
    }

    #[test]
    fn hand_counted_transition_probability() {
        // Sequence (a, b, a, b) over |I| = 3: count(a -> b) = 2 of 2 from a.
        let alpha = 0.5;
        let m = MarkovModel::train(&split_of(vec![vec![0, 1, 0, 1]], 3), alpha).unwrap();
        let scores = m.score_all(&[0]);
        let want = (2.0 + alpha) / (2.0 + 3.0 * alpha);
        assert!((scores[1] - want).abs() < 1e-15);
    }

    #[test]
    fn unseen_last_item_scores_uniform() {
        let m = MarkovModel::train(&split_of(vec![vec![0, 1]], 4), 0.5).unwrap();
        let scores = m.score_all(&[3]);
        for s in &scores {
            assert!((s - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_context_scores_uniform() {
        let m = MarkovModel::train(&split_of(vec![vec![0, 1]], 4), 0.5).unwrap();
        let scores = m.score_all(&[]);
        assert_eq!(scores, vec![0.25; 4]);
    }

    #[test]
    fn large_alpha_approaches_uniform() {
        let m = MarkovModel::train(&split_of(vec![vec![0, 1, 0, 1]], 3), 1e9).unwrap();
        let scores = m.score_all(&[0]);
        for s in &scores {
            assert!((s - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn scores_form_a_distribution() {
        let m = MarkovModel::train(&split_of(vec![vec![0, 1, 2, 0, 2]], 3), 0.1).unwrap();
        for ctx in [vec![0], vec![1], vec![2]] {
            let sum: f64 = m.score_all(&ctx).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nonpositive_alpha_rejected() {
        assert!(MarkovModel::train(&split_of(vec![vec![0, 1]], 2), 0.0).is_err());
    }
}
