//! Plain training vs one self-improvement round under injected noise.
//!
//! ```bash
//! cargo run --release -p rsir --example noise_robustness
//! ```

use rsir::backbone::{BackboneSpec, TrainConfig};
use rsir::corpus::{build_corpus, parse_interactions, NoiseConfig};
use rsir::generator::GenerationConfig;
use rsir::pipeline::weak_to_strong;
use rsir::synth::{synth_world, SynthConfig};

fn main() {
    let world = synth_world(&SynthConfig {
        n_users: 250,
        n_items: 40,
        order: 1,
        seed: 61,
    })
    .unwrap();
    let corpus = build_corpus(&parse_interactions(&world.log).unwrap(), 1).unwrap();

    let train = TrainConfig {
        epochs: 6,
        negatives: 16,
        ..TrainConfig::default()
    };
    let backbone = BackboneSpec::default();
    let gen = GenerationConfig {
        tau: 5,
        trials: 3,
        top_k: 3,
        max_len: 25,
        seed: 3,
        ..GenerationConfig::default()
    };

    println!("eta   base n@10   augmented n@10");
    for eta in [0.0, 0.2, 0.4, 0.6] {
        let noisy = corpus.inject_noise(&NoiseConfig { eta, seed: 17 }).unwrap();
        // One augmentation round on the corrupted data, paired seeds.
        let report = weak_to_strong(&backbone, &backbone, &noisy, &train, &gen, &[10], 6).unwrap();
        let base = report.baseline.at_k(10).unwrap().ndcg;
        let aug = report.transferred.at_k(10).unwrap().ndcg;
        println!("{eta:<5} {base:<11.4} {aug:.4}");
    }
}
