//! Recency-decay embedding backbone.
//!
//! Items live in a shared d-dimensional embedding table. A context is encoded
//! as the decay-weighted average of its item embeddings (most recent item
//! weight 1, previous items damped by `gamma` per step) and items are scored
//! by inner product against that vector. Training runs plain SGD on a
//! sampled-softmax cross-entropy loss with closed-form gradients.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::SplitView;
use crate::error::{Error, Result};
use crate::eval::ndcg_at;
use crate::rng::stream_rng;

use super::{RankingModel, TrainConfig};

// Stream tags keeping init / epoch / validation RNG usage disjoint.
const STREAM_INIT: u64 = 0x01;
const STREAM_EPOCH: u64 = 0x02;

/// Trainable embedding model with recency-decay context encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqEmbModel {
    n_items: usize,
    dim: usize,
    gamma: f64,
    /// Row-major `n_items x dim`.
    embeddings: Vec<f64>,
}

/// Sparse gradient: per-item dense rows, sorted by item index.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub by_item: Vec<(u32, Vec<f64>)>,
}

impl SeqEmbModel {
    /// Fresh model with embeddings uniform in `[-0.5/d, 0.5/d]`.
    pub fn init(n_items: usize, dim: usize, gamma: f64, seed: u64) -> SeqEmbModel {
        let mut rng = stream_rng(seed, &[STREAM_INIT]);
        let half = 0.5 / dim as f64;
        let embeddings = (0..n_items * dim).map(|_| rng.gen_range(-half..half)).collect();
        SeqEmbModel {
            n_items,
            dim,
            gamma,
            embeddings,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn embedding(&self, item: u32) -> &[f64] {
        let i = item as usize * self.dim;
        &self.embeddings[i..i + self.dim]
    }

    pub fn embeddings(&self) -> &[f64] {
        &self.embeddings
    }

    /// Assemble a model from an explicit row-major embedding table.
    pub fn from_parts(n_items: usize, dim: usize, gamma: f64, embeddings: Vec<f64>) -> SeqEmbModel {
        assert_eq!(embeddings.len(), n_items * dim);
        SeqEmbModel { n_items, dim, gamma, embeddings }
    }

    /// Decay-weighted context vector: `h = sum_j w_j e_{i_j} / sum_j w_j`
    /// with `w_j = gamma^(n-j)` so the most recent item has weight 1.
    pub fn encode_context(&self, items: &[u32]) -> Result<Vec<f64>> {
        if items.is_empty() {
            return Err(Error::Contract("encode_context: empty context".into()));
        }
        let (h, _) = self.encode_with_coeffs(items);
        Ok(h)
    }

    /// Context vector plus the normalized per-position coefficients
    /// `w_j / W`, needed for the chain rule through the average.
    fn encode_with_coeffs(&self, items: &[u32]) -> (Vec<f64>, Vec<f64>) {
        let n = items.len();
        let mut weights = vec![0.0; n];
        let mut w = 1.0;
        for j in (0..n).rev() {
            weights[j] = w;
            w *= self.gamma;
        }
        let total: f64 = weights.iter().sum();
        let mut h = vec![0.0; self.dim];
        for (j, &item) in items.iter().enumerate() {
            let coeff = weights[j] / total;
            weights[j] = coeff;
            let e = self.embedding(item);
            for k in 0..self.dim {
                h[k] += coeff * e[k];
            }
        }
        (h, weights)
    }

    /// Inner-product scores of every item against a context vector.
    pub fn score_vector(&self, h: &[f64]) -> Vec<f64> {
        debug_assert_eq!(h.len(), self.dim);
        let mut scores = Vec::with_capacity(self.n_items);
        for item in 0..self.n_items {
            let e = &self.embeddings[item * self.dim..(item + 1) * self.dim];
            scores.push(dot(h, e));
        }
        scores
    }

    /// Score of a single item against a context vector.
    pub fn score_item(&self, h: &[f64], item: u32) -> f64 {
        dot(h, self.embedding(item))
    }

    /// Sampled-softmax cross-entropy loss and its gradients for one step.
    ///
    /// The candidate set is `{target} U negatives`; the loss is
    /// `-log softmax(h . e_target)` over the candidates, computed with
    /// max-subtraction. Gradients cover every touched embedding: candidates
    /// get `(p_c - 1[c = target]) h`, prefix items get their share of the
    /// upstream gradient through the weighted average.
    pub fn loss_and_grad(&self, prefix: &[u32], target: u32, negatives: &[u32]) -> (f64, Gradients) {
        debug_assert!(!negatives.contains(&target));
        let (h, coeffs) = self.encode_with_coeffs(prefix);

        let mut candidates = Vec::with_capacity(negatives.len() + 1);
        candidates.push(target);
        candidates.extend_from_slice(negatives);

        let logits: Vec<f64> = candidates.iter().map(|&c| self.score_item(&h, c)).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let z_sum: f64 = exps.iter().sum();
        let loss = z_sum.ln() + max - logits[0];

        // d loss / d e_c = (p_c - 1[c=target]) * h, accumulated per item.
        let mut acc: std::collections::BTreeMap<u32, Vec<f64>> = std::collections::BTreeMap::new();
        let mut g_h = vec![0.0; self.dim];
        for (ci, &c) in candidates.iter().enumerate() {
            let p = exps[ci] / z_sum;
            let delta = p - if ci == 0 { 1.0 } else { 0.0 };
            let e = self.embedding(c);
            for k in 0..self.dim {
                g_h[k] += delta * e[k];
            }
            let row = acc.entry(c).or_insert_with(|| vec![0.0; self.dim]);
            for k in 0..self.dim {
                row[k] += delta * h[k];
            }
        }
        // Chain rule through h = sum_j coeff_j e_{i_j}.
        for (j, &item) in prefix.iter().enumerate() {
            let row = acc.entry(item).or_insert_with(|| vec![0.0; self.dim]);
            for k in 0..self.dim {
                row[k] += coeffs[j] * g_h[k];
            }
        }

        (
            loss,
            Gradients {
                by_item: acc.into_iter().collect(),
            },
        )
    }

    fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (item, g) in &grads.by_item {
            let base = *item as usize * self.dim;
            for k in 0..self.dim {
                self.embeddings[base + k] -= lr * g[k];
            }
        }
    }

    /// Fit a fresh model on the split's training sequences.
    pub fn train(
        split: &SplitView,
        dim: usize,
        gamma: f64,
        cfg: &TrainConfig,
        seed: u64,
    ) -> Result<SeqEmbModel> {
        cfg.validate()?;
        if split.training_sequences.is_empty() {
            return Err(Error::Contract("train: empty training view".into()));
        }
        let model = SeqEmbModel::init(split.vocab_size, dim, gamma, seed);
        Ok(fit(model, split, cfg, seed))
    }

    /// Continue training from this model's embeddings.
    pub fn fine_tune(&self, split: &SplitView, cfg: &TrainConfig, seed: u64) -> Result<SeqEmbModel> {
        cfg.validate()?;
        if split.vocab_size != self.n_items {
            return Err(Error::Contract(format!(
                "fine_tune: model has {} items but the corpus has {}",
                self.n_items, split.vocab_size
            )));
        }
        Ok(fit(self.clone(), split, cfg, seed))
    }

    /// Mean training loss of one pass over the split, without updating.
    /// Used by diagnostics and trend tests.
    pub fn mean_loss(&self, split: &SplitView, cfg: &TrainConfig, seed: u64) -> f64 {
        let mut rng = stream_rng(seed, &[STREAM_EPOCH, u64::MAX]);
        let mut total = 0.0;
        let mut steps = 0usize;
        for seq in &split.training_sequences {
            for t in 1..seq.items.len() {
                let negatives = sample_negatives(&mut rng, self.n_items, seq.items[t], cfg.negatives);
                let (loss, _) = self.loss_and_grad(&seq.items[..t], seq.items[t], &negatives);
                total += loss;
                steps += 1;
            }
        }
        if steps == 0 {
            0.0
        } else {
            total / steps as f64
        }
    }
}

impl RankingModel for SeqEmbModel {
    fn vocab_size(&self) -> usize {
        self.n_items
    }

    fn score_all(&self, context: &[u32]) -> Vec<f64> {
        let h = self
            .encode_context(context)
            .expect("score_all requires a nonempty context");
        self.score_vector(&h)
    }

    fn as_seq_emb(&self) -> Option<&SeqEmbModel> {
        Some(self)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sample_negatives(rng: &mut impl Rng, n_items: usize, target: u32, n_neg: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(n_neg);
    while out.len() < n_neg {
        let v = rng.gen_range(0..n_items as u32);
        if v != target {
            out.push(v);
        }
    }
    out
}

/// SGD over all positions of all training sequences, with early stopping on
/// validation NDCG@10 and best-snapshot return. Without validation targets
/// the full epoch budget runs and the final model is returned.
fn fit(mut model: SeqEmbModel, split: &SplitView, cfg: &TrainConfig, seed: u64) -> SeqEmbModel {
    let has_val = split.eval_users.iter().any(|u| u.val_target.is_some());
    let mut best = model.clone();
    let mut best_ndcg = f64::NEG_INFINITY;
    let mut stale_epochs = 0usize;

    for epoch in 0..cfg.epochs {
        let mut rng = stream_rng(seed, &[STREAM_EPOCH, cfg.batch_seed, epoch as u64]);
        let mut order: Vec<usize> = (0..split.training_sequences.len()).collect();
        order.shuffle(&mut rng);
        for si in order {
            let seq = &split.training_sequences[si];
            for t in 1..seq.items.len() {
                let target = seq.items[t];
                let negatives = sample_negatives(&mut rng, model.n_items, target, cfg.negatives);
                let (_, grads) = model.loss_and_grad(&seq.items[..t], target, &negatives);
                model.apply_gradients(&grads, cfg.learning_rate);
            }
        }
        if has_val {
            let ndcg = validation_ndcg10(&model, split);
            if ndcg > best_ndcg {
                best_ndcg = ndcg;
                best = model.clone();
                stale_epochs = 0;
            } else {
                stale_epochs += 1;
                if stale_epochs >= cfg.patience {
                    break;
                }
            }
        }
    }
    if has_val {
        best
    } else {
        model
    }
}

/// Mean NDCG@10 of validation targets ranked from their train prefixes.
pub(crate) fn validation_ndcg10(model: &impl RankingModel, split: &SplitView) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for user in &split.eval_users {
        let Some(val) = user.val_target else { continue };
        if user.train_prefix.is_empty() {
            continue;
        }
        let rank = model.rank_of(&user.train_prefix, val);
        total += ndcg_at(rank, 10);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{TrainSequence, UserSplit};

    fn tiny_model(n_items: usize, dim: usize, gamma: f64, seed: u64) -> SeqEmbModel {
        SeqEmbModel::init(n_items, dim, gamma, seed)
    }

    #[test]
    fn encode_single_item_is_its_embedding() {
        let m = tiny_model(4, 3, 0.8, 1);
        let h = m.encode_context(&[2]).unwrap();
        assert_eq!(h, m.embedding(2).to_vec());
    }

    #[test]
    fn encode_gamma_one_is_uniform_average() {
        let m = tiny_model(4, 3, 1.0, 1);
        let h = m.encode_context(&[0, 1]).unwrap();
        for k in 0..3 {
            let want = (m.embedding(0)[k] + m.embedding(1)[k]) / 2.0;
            assert!((h[k] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn encode_gamma_half_hand_arithmetic() {
        // gamma = 0.5, items (a, b): h = (0.5 e_a + e_b) / 1.5.
        let m = SeqEmbModel::from_parts(2, 2, 0.5, vec![1.0, 0.0, 0.0, 1.0]);
        let h = m.encode_context(&[0, 1]).unwrap();
        assert!((h[0] - 0.5 / 1.5).abs() < 1e-15);
        assert!((h[1] - 1.0 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn encode_empty_context_is_contract_error() {
        let m = tiny_model(4, 3, 0.8, 1);
        assert!(matches!(m.encode_context(&[]), Err(Error::Contract(_))));
    }

    #[test]
    fn scores_match_naive_double_loop() {
        let m = tiny_model(5, 4, 0.7, 3);
        let h = m.encode_context(&[1, 4, 2]).unwrap();
        let scores = m.score_vector(&h);
        for v in 0..5usize {
            let mut want = 0.0;
            for k in 0..4 {
                want += h[k] * m.embedding(v as u32)[k];
            }
            assert!((scores[v] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_and_aligned_scores() {
        let m = SeqEmbModel::from_parts(2, 2, 1.0, vec![1.0, 0.0, 0.0, 1.0]);
        let h = vec![1.0, 0.0];
        let scores = m.score_vector(&h);
        assert_eq!(scores[0], 1.0);
        assert_eq!(scores[1], 0.0);
    }

    #[test]
    fn uniform_candidates_loss_is_ln_card() {
        // All-zero embeddings: every candidate scores 0, |C| = 4.
        let m = SeqEmbModel::from_parts(6, 3, 0.8, vec![0.0; 18]);
        let (loss, _) = m.loss_and_grad(&[0, 1], 2, &[3, 4, 5]);
        assert!((loss - 4.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn saturated_softmax_has_tiny_gradient() {
        // Target embedding strongly aligned with the context item.
        let mut emb = vec![0.0; 8];
        emb[0] = 10.0; // item 0 = (10, 0)
        emb[2] = 10.0; // item 1 = (10, 0)
        emb[4] = -10.0; // item 2
        emb[6] = -10.0; // item 3
        let m = SeqEmbModel::from_parts(4, 2, 0.8, emb);
        let (_, grads) = m.loss_and_grad(&[0], 1, &[2, 3]);
        let norm: f64 = grads
            .by_item
            .iter()
            .flat_map(|(_, g)| g.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt();
        assert!(norm < 1e-10, "gradient norm {norm} should be ~0 at saturation");
    }

    #[test]
    fn loss_is_finite_at_extreme_scores() {
        let mut emb = vec![0.0; 4];
        emb[0] = 1e3;
        emb[2] = -1e3;
        let m = SeqEmbModel::from_parts(2, 2, 1.0, emb);
        let (loss, _) = m.loss_and_grad(&[0], 1, &[0]);
        assert!(loss.is_finite());
    }

    /// Central finite differences over every touched embedding component.
    fn finite_difference_check(m: &SeqEmbModel, prefix: &[u32], target: u32, negatives: &[u32]) {
        let (_, grads) = m.loss_and_grad(prefix, target, negatives);
        let eps = 1e-6;
        for (item, g) in &grads.by_item {
            for k in 0..m.dim {
                let mut plus = m.clone();
                plus.embeddings[*item as usize * m.dim + k] += eps;
                let mut minus = m.clone();
                minus.embeddings[*item as usize * m.dim + k] -= eps;
                let (lp, _) = plus.loss_and_grad(prefix, target, negatives);
                let (lm, _) = minus.loss_and_grad(prefix, target, negatives);
                let fd = (lp - lm) / (2.0 * eps);
                let denom = g[k].abs().max(fd.abs()).max(1e-3);
                assert!(
                    ((g[k] - fd) / denom).abs() < 1e-5,
                    "item {item} dim {k}: analytic {} vs fd {fd}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = stream_rng(99, &[7]);
        for trial in 0..20 {
            let n_items = 12;
            let m = tiny_model(n_items, 8, 0.6 + 0.4 * (trial % 2) as f64, 1000 + trial);
            let len = rng.gen_range(1..6);
            let prefix: Vec<u32> = (0..len).map(|_| rng.gen_range(0..n_items as u32)).collect();
            let target = rng.gen_range(0..n_items as u32);
            let negatives: Vec<u32> = (0..4)
                .map(|_| loop {
                    let v = rng.gen_range(0..n_items as u32);
                    if v != target {
                        break v;
                    }
                })
                .collect();
            finite_difference_check(&m, &prefix, target, &negatives);
        }
    }

    fn toy_split() -> SplitView {
        // Strictly alternating world over 4 items: 0 -> 1 -> 2 -> 3 -> 0.
        let mut training_sequences = Vec::new();
        let mut eval_users = Vec::new();
        for u in 0..20u32 {
            let start = u % 4;
            let items: Vec<u32> = (0..8).map(|t| (start + t) % 4).collect();
            let n = items.len();
            eval_users.push(UserSplit {
                user: u,
                train_prefix: items[..n - 2].to_vec(),
                val_target: Some(items[n - 2]),
                test_target: items[n - 1],
            });
            training_sequences.push(TrainSequence {
                user: u,
                items: items[..n - 2].to_vec(),
            });
        }
        SplitView {
            training_sequences,
            eval_users,
            vocab_size: 4,
        }
    }

    #[test]
    fn train_is_bit_deterministic() {
        let split = toy_split();
        let cfg = TrainConfig {
            epochs: 3,
            negatives: 2,
            ..TrainConfig::default()
        };
        let a = SeqEmbModel::train(&split, 8, 0.8, &cfg, 5).unwrap();
        let b = SeqEmbModel::train(&split, 8, 0.8, &cfg, 5).unwrap();
        assert_eq!(a.embeddings, b.embeddings);
        let c = SeqEmbModel::train(&split, 8, 0.8, &cfg, 6).unwrap();
        assert_ne!(a.embeddings, c.embeddings);
    }

    #[test]
    fn training_loss_decreases_on_separable_corpus() {
        let split = toy_split();
        let cfg = TrainConfig {
            epochs: 1,
            learning_rate: 0.1,
            negatives: 2,
            patience: 100,
            batch_seed: 0,
        };
        let mut model = SeqEmbModel::init(4, 8, 0.8, 11);
        let mut losses = Vec::new();
        for _ in 0..5 {
            losses.push(model.mean_loss(&split, &cfg, 123));
            model = model.fine_tune(&split, &cfg, 123).unwrap();
        }
        losses.push(model.mean_loss(&split, &cfg, 123));
        for w in losses.windows(2) {
            assert!(w[1] < w[0], "loss did not decrease: {losses:?}");
        }
    }

    #[test]
    fn trained_beats_untrained_on_validation() {
        let split = toy_split();
        let cfg = TrainConfig {
            epochs: 10,
            negatives: 2,
            ..TrainConfig::default()
        };
        let mut wins = 0;
        for seed in 0..5u64 {
            let untrained = SeqEmbModel::init(4, 8, 0.8, seed);
            let trained = SeqEmbModel::train(&split, 8, 0.8, &cfg, seed).unwrap();
            let before = validation_ndcg10(&untrained, &split);
            let after = validation_ndcg10(&trained, &split);
            if after > before {
                wins += 1;
            }
        }
        assert!(wins >= 4, "trained model won only {wins}/5 seeds");
    }

    #[test]
    fn fine_tune_zero_epochs_returns_input() {
        let split = toy_split();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let m = SeqEmbModel::init(4, 8, 0.8, 3);
        let out = m.fine_tune(&split, &cfg, 77).unwrap();
        assert_eq!(m.embeddings, out.embeddings);
    }

    #[test]
    fn fine_tune_with_tiny_lr_changes_nothing_measurable() {
        let split = toy_split();
        let cfg = TrainConfig {
            epochs: 5,
            negatives: 2,
            ..TrainConfig::default()
        };
        let m = SeqEmbModel::train(&split, 8, 0.8, &cfg, 3).unwrap();
        let before = validation_ndcg10(&m, &split);
        let tiny = TrainConfig {
            epochs: 2,
            learning_rate: 1e-9,
            ..cfg
        };
        let tuned = m.fine_tune(&split, &tiny, 9).unwrap();
        let after = validation_ndcg10(&tuned, &split);
        assert!((after - before).abs() < 1e-6, "{before} vs {after}");
    }

    #[test]
    fn fine_tune_dimension_mismatch_is_contract_error() {
        let split = toy_split();
        let m = SeqEmbModel::init(9, 8, 0.8, 3);
        let err = m.fine_tune(&split, &TrainConfig::default(), 1).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

}
