//! The self-improvement driver: Train -> Generate -> Expand over K
//! iterations.
//!
//! Each iteration fits a model on the current dataset (fresh initialization
//! for the retrain variant, warm start for fine-tune), generates synthetic
//! sequences under fidelity control, merges survivors into the dataset and
//! evaluates on the original held-out targets, which never change: generated
//! data only ever enters the training side.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{dataset_information, ApEnConfig};
use crate::backbone::{Backbone, BackboneSpec, RankingModel, TrainConfig};
use crate::corpus::{Corpus, CorpusStats, SplitView};
use crate::error::{Error, Result};
use crate::eval::{evaluate, report_from_ranks, MetricsReport};
use crate::generator::{generate_dataset, GenerationConfig, GenerationStats};
use crate::retrieval::{build_index, default_cluster_count, BackendChoice, FidelityBackend};
use crate::rng::stream_seed;

const TRAIN_STREAM: u64 = 0x54;
const INDEX_STREAM: u64 = 0x49;

/// Retrain successors from scratch or fine-tune the previous model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RsirVariant {
    Retrain,
    FineTune,
}

impl std::fmt::Display for RsirVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RsirVariant::Retrain => write!(f, "retrain"),
            RsirVariant::FineTune => write!(f, "fine_tune"),
        }
    }
}

/// Settings for the clustered fidelity backend.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub backend: BackendChoice,
    /// 0 means `ceil(sqrt(|I|))`.
    pub clusters: usize,
    pub top_c: usize,
    pub kmeans_iters: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            backend: BackendChoice::Exact,
            clusters: 0,
            top_c: 3,
            kmeans_iters: 25,
        }
    }
}

/// Full loop configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RsirConfig {
    pub iterations: usize,
    pub variant: RsirVariant,
    pub backbone: BackboneSpec,
    pub train: TrainConfig,
    pub gen: GenerationConfig,
    pub retrieval: RetrievalConfig,
    pub eval_ks: Vec<usize>,
    pub apen: ApEnConfig,
    /// Master seed for training and index substreams.
    pub seed: u64,
}

impl Default for RsirConfig {
    fn default() -> Self {
        RsirConfig {
            iterations: 1,
            variant: RsirVariant::Retrain,
            backbone: BackboneSpec::default(),
            train: TrainConfig::default(),
            gen: GenerationConfig::default(),
            retrieval: RetrievalConfig::default(),
            eval_ks: vec![10, 20],
            apen: ApEnConfig::default(),
            seed: 42,
        }
    }
}

impl RsirConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("rsir.iterations must be >= 1".into()));
        }
        self.backbone.validate()?;
        self.train.validate()?;
        self.gen.validate()?;
        if self.eval_ks.is_empty() {
            return Err(Error::Config("eval.ks must not be empty".into()));
        }
        if self.retrieval.backend == BackendChoice::Clustered
            && self.backbone.kind != crate::backbone::BackboneKind::SeqEmb
        {
            return Err(Error::Config(
                "the clustered fidelity backend requires the seq_emb backbone".into(),
            ));
        }
        Ok(())
    }
}

/// Everything observed during one iteration.
#[derive(Debug, Clone, Serialize)]
pub struct IterationReport {
    pub k: u32,
    /// Sequence count after expansion.
    pub n_sequences: usize,
    /// Stats of the expanded dataset.
    pub stats: CorpusStats,
    pub gen_stats: GenerationStats,
    /// Mean reciprocal entropy of the expanded dataset, when computable.
    pub apen_prime_mean: Option<f64>,
    pub val_metrics: MetricsReport,
    pub test_metrics: MetricsReport,
    pub train_seconds: f64,
    pub gen_seconds: f64,
    /// Set when generation produced nothing and the dataset carried over.
    pub no_new_sequences: bool,
}

/// Mutable loop state passed between iterations.
pub struct RsirState {
    pub corpus: Corpus,
    pub model: Option<Backbone>,
}

pub(crate) fn train_seed(master: u64, k: u32) -> u64 {
    stream_seed(master, &[TRAIN_STREAM, u64::from(k)])
}

fn index_seed(master: u64, k: u32) -> u64 {
    stream_seed(master, &[INDEX_STREAM, u64::from(k)])
}

/// Construct the configured fidelity backend for a fitted model. The
/// clustered variant indexes the model's current embeddings.
pub fn build_backend(
    retrieval: &RetrievalConfig,
    model: &Backbone,
    seed: u64,
) -> Result<FidelityBackend> {
    match retrieval.backend {
        BackendChoice::Exact => Ok(FidelityBackend::Exact),
        BackendChoice::Clustered => {
            let seq_emb = model.as_seq_emb().ok_or_else(|| {
                Error::Config("clustered fidelity backend requires the seq_emb backbone".into())
            })?;
            let clusters = if retrieval.clusters == 0 {
                default_cluster_count(seq_emb.vocab_size())
            } else {
                retrieval.clusters
            };
            let index = build_index(
                seq_emb,
                clusters,
                retrieval.top_c.min(clusters),
                retrieval.kmeans_iters,
                seed,
            )?;
            Ok(FidelityBackend::Clustered(index))
        }
    }
}

fn make_backend(cfg: &RsirConfig, model: &Backbone, k: u32) -> Result<FidelityBackend> {
    build_backend(&cfg.retrieval, model, index_seed(cfg.seed, k))
}

/// Metrics over validation targets (context = train prefix).
pub fn evaluate_validation(
    model: &impl RankingModel,
    split: &SplitView,
    ks: &[usize],
) -> MetricsReport {
    use rayon::prelude::*;
    let ranks: Vec<usize> = split
        .eval_users
        .par_iter()
        .filter_map(|u| {
            let val = u.val_target?;
            if u.train_prefix.is_empty() {
                return None;
            }
            Some(model.rank_of(&u.train_prefix, val))
        })
        .collect();
    if ranks.is_empty() {
        return MetricsReport {
            evaluated_users: 0,
            at: Vec::new(),
        };
    }
    report_from_ranks(&ranks, ks)
}

/// Run iteration `k`: fit, generate, expand, evaluate.
pub fn run_iteration(state: RsirState, cfg: &RsirConfig, k: u32) -> Result<(RsirState, IterationReport)> {
    let split = state.corpus.split_leave_one_out();

    let train_start = Instant::now();
    let model = match (cfg.variant, &state.model) {
        (RsirVariant::FineTune, Some(prev)) => {
            cfg.backbone.fine_tune(prev, &split, &cfg.train, train_seed(cfg.seed, k))?
        }
        _ => cfg.backbone.train(&split, &cfg.train, train_seed(cfg.seed, k))?,
    };
    let train_seconds = train_start.elapsed().as_secs_f64();

    let gen_start = Instant::now();
    let backend = make_backend(cfg, &model, k)?;
    let (generated, gen_stats) = generate_dataset(&model, &state.corpus, &cfg.gen, &backend, k);
    let gen_seconds = gen_start.elapsed().as_secs_f64();

    let no_new_sequences = generated.is_empty();
    let (expanded, _) = state.corpus.expand(generated);

    let val_metrics = evaluate_validation(&model, &split, &cfg.eval_ks);
    let test_metrics = evaluate(&model, &split, &cfg.eval_ks)
        .map_err(|e| Error::Contract(format!("iteration {k}: {e}")))?;
    let stats = expanded.stats();
    let apen_prime_mean = dataset_information(&expanded, &cfg.apen).ok();

    let report = IterationReport {
        k,
        n_sequences: expanded.sequences().len(),
        stats,
        gen_stats,
        apen_prime_mean,
        val_metrics,
        test_metrics,
        train_seconds,
        gen_seconds,
        no_new_sequences,
    };
    Ok((
        RsirState {
            corpus: expanded,
            model: Some(model),
        },
        report,
    ))
}

/// Run the full loop for `cfg.iterations` iterations.
pub fn run_rsir(cfg: &RsirConfig, corpus: &Corpus) -> Result<Vec<IterationReport>> {
    cfg.validate()?;
    let mut state = RsirState {
        corpus: corpus.clone(),
        model: None,
    };
    let mut reports = Vec::with_capacity(cfg.iterations);
    for k in 0..cfg.iterations {
        let (next, report) = run_iteration(state, cfg, k as u32)
            .map_err(|e| Error::Contract(format!("iteration {k}: {e}")))?;
        state = next;
        reports.push(report);
    }
    Ok(reports)
}

/// Outcome of the weak-to-strong transfer experiment.
#[derive(Debug, Clone, Serialize)]
pub struct WeakToStrongReport {
    pub teacher: String,
    pub student: String,
    pub gen_stats: GenerationStats,
    /// Student trained on the original dataset alone.
    pub baseline: MetricsReport,
    /// Student trained on the teacher-augmented dataset.
    pub transferred: MetricsReport,
    /// `(k, metric, baseline, transferred, delta)` rows.
    pub deltas: Vec<MetricDelta>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricDelta {
    pub k: usize,
    pub metric: String,
    pub baseline: f64,
    pub transferred: f64,
    pub delta: f64,
}

/// Train a teacher on the original data, let it generate one augmentation
/// round under its own fidelity ranks, and compare a student trained on the
/// augmented dataset against the same student trained on the original data.
///
/// With identical teacher and student specs this reproduces the first two
/// models of a retrain loop exactly.
pub fn weak_to_strong(
    teacher_spec: &BackboneSpec,
    student_spec: &BackboneSpec,
    corpus: &Corpus,
    train: &TrainConfig,
    gen: &GenerationConfig,
    eval_ks: &[usize],
    seed: u64,
) -> Result<WeakToStrongReport> {
    let split0 = corpus.split_leave_one_out();
    let teacher = teacher_spec.train(&split0, train, train_seed(seed, 0))?;
    let (generated, gen_stats) =
        generate_dataset(&teacher, corpus, gen, &FidelityBackend::Exact, 0);
    let (augmented, _) = corpus.expand(generated);
    let split1 = augmented.split_leave_one_out();

    let student_seed = train_seed(seed, 1);
    let baseline_model = student_spec.train(&split0, train, student_seed)?;
    let transferred_model = student_spec.train(&split1, train, student_seed)?;

    let baseline = evaluate(&baseline_model, &split0, eval_ks)?;
    let transferred = evaluate(&transferred_model, &split1, eval_ks)?;

    let mut deltas = Vec::new();
    for (b, t) in baseline.at.iter().zip(&transferred.at) {
        for (name, bv, tv) in [
            ("ndcg", b.ndcg, t.ndcg),
            ("recall", b.recall, t.recall),
            ("precision", b.precision, t.precision),
            ("f1", b.f1, t.f1),
            ("mrr", b.mrr, t.mrr),
        ] {
            deltas.push(MetricDelta {
                k: b.k,
                metric: name.to_string(),
                baseline: bv,
                transferred: tv,
                delta: tv - bv,
            });
        }
    }

    Ok(WeakToStrongReport {
        teacher: teacher_spec.kind.to_string(),
        student: student_spec.kind.to_string(),
        gen_stats,
        baseline,
        transferred,
        deltas,
    })
}

/// CSV header for trajectory files.
pub const TRAJECTORY_HEADER: &str =
    "k,n_sequences,density,apen_prime_mean,ndcg@10,recall@10,ndcg@20,recall@20,train_seconds,gen_seconds";

/// One CSV row per iteration report.
pub fn trajectory_csv(reports: &[IterationReport]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for r in reports {
        let metric = |k: usize, f: fn(&crate::eval::MetricsAtK) -> f64| -> f64 {
            r.test_metrics.at_k(k).map(f).unwrap_or(f64::NAN)
        };
        out.push_str(&format!(
            "{},{},{:.9},{},{:.6},{:.6},{:.6},{:.6},{:.3},{:.3}\n",
            r.k,
            r.n_sequences,
            r.stats.density,
            r.apen_prime_mean.map_or("".to_string(), |v| format!("{v:.6}")),
            metric(10, |m| m.ndcg),
            metric(10, |m| m.recall),
            metric(20, |m| m.ndcg),
            metric(20, |m| m.recall),
            r.train_seconds,
            r.gen_seconds,
        ));
    }
    out
}
