//! Next-item scoring backbones.
//!
//! Two concrete models implement the shared [`RankingModel`] contract: a
//! trainable recency-decay embedding model ([`SeqEmbModel`]) and a count-based
//! first-order Markov model ([`MarkovModel`], the weak teacher). Generation,
//! evaluation and the self-improvement loop only ever talk to the contract,
//! so backbones are interchangeable.

mod checkpoint;
mod markov;
mod seq_emb;

use serde::{Deserialize, Serialize};

use crate::corpus::SplitView;
use crate::error::{Error, Result};

pub use checkpoint::{load_markov, load_seq_emb};
pub use markov::MarkovModel;
pub use seq_emb::{Gradients, SeqEmbModel};

/// Shared scoring contract: a fitted model is immutable and can be queried
/// from any number of threads.
pub trait RankingModel: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// One finite score per vocabulary item for the given context.
    fn score_all(&self, context: &[u32]) -> Vec<f64>;

    /// 1-based rank of `item` under the context, ties broken by item index.
    fn rank_of(&self, context: &[u32], item: u32) -> usize {
        rank_from_scores(&self.score_all(context), item)
    }

    /// Embedding access for the clustered retrieval backend; `None` for
    /// backbones without an item embedding space.
    fn as_seq_emb(&self) -> Option<&SeqEmbModel> {
        None
    }
}

/// Rank of `item` within a score vector: one plus the number of items that
/// score strictly higher, plus lower-indexed ties.
pub fn rank_from_scores(scores: &[f64], item: u32) -> usize {
    let s = scores[item as usize];
    let mut rank = 1usize;
    for (u, &su) in scores.iter().enumerate() {
        if su > s || (su == s && (u as u32) < item) {
            rank += 1;
        }
    }
    rank
}

/// Training hyperparameters shared by both `train` and `fine_tune`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Uniform negatives per step (sampled with replacement, target excluded).
    pub negatives: usize,
    /// Early-stopping patience in epochs, on validation NDCG@10.
    pub patience: usize,
    /// Extra seed folded into the per-epoch sequence shuffle.
    pub batch_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            learning_rate: 0.05,
            negatives: 64,
            patience: 20,
            batch_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("train.learning_rate must be > 0".into()));
        }
        if self.negatives == 0 {
            return Err(Error::Config("train.negatives must be >= 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("train.patience must be >= 1".into()));
        }
        Ok(())
    }
}

/// Which backbone a config refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackboneKind {
    SeqEmb,
    Markov,
}

impl std::fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackboneKind::SeqEmb => write!(f, "seq_emb"),
            BackboneKind::Markov => write!(f, "markov"),
        }
    }
}

/// Constructor parameters for a backbone, enough to train one from a split.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub kind: BackboneKind,
    /// Embedding dimension (seq_emb).
    pub dim: usize,
    /// Recency decay in (0, 1] (seq_emb).
    pub gamma: f64,
    /// Additive smoothing (markov).
    pub alpha: f64,
}

impl Default for BackboneSpec {
    fn default() -> Self {
        BackboneSpec {
            kind: BackboneKind::SeqEmb,
            dim: 16,
            gamma: 0.8,
            alpha: 0.1,
        }
    }
}

impl BackboneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("backbone.dim must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("backbone.gamma must be in (0, 1]".into()));
        }
        if self.alpha <= 0.0 {
            return Err(Error::Config("backbone.alpha must be > 0".into()));
        }
        Ok(())
    }

    /// Fit a fresh model of this kind on the split.
    pub fn train(&self, split: &SplitView, cfg: &TrainConfig, seed: u64) -> Result<Backbone> {
        self.validate()?;
        match self.kind {
            BackboneKind::SeqEmb => {
                SeqEmbModel::train(split, self.dim, self.gamma, cfg, seed).map(Backbone::SeqEmb)
            }
            BackboneKind::Markov => MarkovModel::train(split, self.alpha).map(Backbone::Markov),
        }
    }

    /// Warm-start from an existing model of the same kind. Markov counts are
    /// sufficient statistics, so its fine-tune recounts the split.
    pub fn fine_tune(
        &self,
        model: &Backbone,
        split: &SplitView,
        cfg: &TrainConfig,
        seed: u64,
    ) -> Result<Backbone> {
        match (self.kind, model) {
            (BackboneKind::SeqEmb, Backbone::SeqEmb(m)) => {
                m.fine_tune(split, cfg, seed).map(Backbone::SeqEmb)
            }
            (BackboneKind::Markov, Backbone::Markov(_)) => {
                MarkovModel::train(split, self.alpha).map(Backbone::Markov)
            }
            _ => Err(Error::Contract(
                "fine_tune: model kind does not match the backbone spec".into(),
            )),
        }
    }
}

/// A fitted backbone of either kind.
#[derive(Debug, Clone)]
pub enum Backbone {
    SeqEmb(SeqEmbModel),
    Markov(MarkovModel),
}

impl Backbone {
    pub fn kind(&self) -> BackboneKind {
        match self {
            Backbone::SeqEmb(_) => BackboneKind::SeqEmb,
            Backbone::Markov(_) => BackboneKind::Markov,
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        checkpoint::save(self, path)
    }

    pub fn load(path: &std::path::Path) -> Result<Backbone> {
        checkpoint::load(path)
    }
}

impl RankingModel for Backbone {
    fn vocab_size(&self) -> usize {
        match self {
            Backbone::SeqEmb(m) => m.vocab_size(),
            Backbone::Markov(m) => m.vocab_size(),
        }
    }

    fn score_all(&self, context: &[u32]) -> Vec<f64> {
        match self {
            Backbone::SeqEmb(m) => m.score_all(context),
            Backbone::Markov(m) => m.score_all(context),
        }
    }

    fn as_seq_emb(&self) -> Option<&SeqEmbModel> {
        match self {
            Backbone::SeqEmb(m) => Some(m),
            Backbone::Markov(_) => None,
        }
    }
}
