//! Recursive self-improving data augmentation for sequential recommenders.
//!
//! The library implements a closed Train -> Generate -> Expand loop: a
//! next-item model is fitted on an interaction corpus, used to generate
//! synthetic user sequences under a rank-based fidelity check, and the
//! accepted sequences are merged back into the training set for the next
//! model generation. Everything is seed-deterministic and instrumented:
//! ranking metrics, data-quality analytics (approximate entropy, density),
//! clustering-based approximate retrieval for the fidelity check, noise
//! robustness sweeps, and a simulator for the error-dynamics recursion that
//! governs when self-training converges.
//!
//! Start with the runnable examples (`cargo run --example <name> -p rsir`):
//!
//! - `synth_and_ingest` — build a synthetic interaction world, ingest it
//! - `train_and_evaluate` — fit a backbone, report leave-one-out metrics
//! - `generate_sequences` — fidelity-controlled sequence generation
//! - `self_improvement_loop` — the full multi-iteration loop
//! - `weak_to_strong` — a weak teacher generating data for a stronger student
//! - `approximate_fidelity` — clustered retrieval vs exact rank decisions
//! - `noise_robustness` — augmentation under corrupted training data
//! - `data_quality` — entropy/density analytics across augmentation styles
//! - `error_dynamics` — the error recursion, its fixed point and breakdown
//!
//! The `rsir` binary exposes the same capabilities as subcommands.

pub mod analysis;
pub mod backbone;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod dynamics;
pub mod eval;
pub mod generator;
pub mod pipeline;
pub mod report;
pub mod retrieval;
mod rng;
pub mod synth;

mod error;

pub use error::{Error, Result};

pub use backbone::{Backbone, BackboneKind, MarkovModel, RankingModel, SeqEmbModel, TrainConfig};
pub use corpus::{Corpus, CorpusStats, Interaction, InteractionSequence, NoiseConfig, Origin, SplitView};
pub use dynamics::ErrorDynamicsParams;
pub use eval::MetricsReport;
pub use generator::{GenerationConfig, GenerationStats};
pub use pipeline::{IterationReport, RsirConfig, RsirVariant};
pub use retrieval::{ClusterIndex, FidelityBackend};
