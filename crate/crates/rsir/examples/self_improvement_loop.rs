//! The full loop: train, generate, expand, repeat.
//!
//! ```bash
//! cargo run --release -p rsir --example self_improvement_loop
//! ```

use rsir::backbone::{BackboneSpec, TrainConfig};
use rsir::corpus::{build_corpus, parse_interactions};
use rsir::generator::GenerationConfig;
use rsir::pipeline::{run_rsir, trajectory_csv, RsirConfig, RsirVariant};
use rsir::synth::{synth_world, SynthConfig};

fn main() {
    let world = synth_world(&SynthConfig {
        n_users: 300,
        n_items: 40,
        order: 1,
        seed: 30,
    })
    .unwrap();
    let corpus = build_corpus(&parse_interactions(&world.log).unwrap(), 1).unwrap();
    println!("starting from {} sequences", corpus.sequences().len());

    let cfg = RsirConfig {
        iterations: 3,
        variant: RsirVariant::Retrain,
        backbone: BackboneSpec::default(),
        train: TrainConfig {
            epochs: 8,
            negatives: 16,
            patience: 8,
            ..TrainConfig::default()
        },
        gen: GenerationConfig {
            tau: 5,
            trials: 3,
            exploit_p: 0.5,
            top_k: 3,
            max_len: 25,
            seed: 1,
            ..GenerationConfig::default()
        },
        seed: 4,
        ..RsirConfig::default()
    };

    let reports = run_rsir(&cfg, &corpus).unwrap();
    println!("\n{}", trajectory_csv(&reports));
    for r in &reports {
        let m = r.test_metrics.at_k(10).unwrap();
        println!(
            "iteration {}: {} sequences, density {:.4}, test ndcg@10 {:.4}, recall@10 {:.4}",
            r.k, r.n_sequences, r.stats.density, m.ndcg, m.recall
        );
    }
}
