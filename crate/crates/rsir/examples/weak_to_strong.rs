//! A weak Markov teacher generates training data for an embedding student.
//!
//! ```bash
//! cargo run --release -p rsir --example weak_to_strong
//! ```

use rsir::backbone::{BackboneKind, BackboneSpec, TrainConfig};
use rsir::corpus::{build_corpus, parse_interactions};
use rsir::generator::GenerationConfig;
use rsir::pipeline::weak_to_strong;
use rsir::synth::{synth_world, SynthConfig};

fn main() {
    let world = synth_world(&SynthConfig {
        n_users: 300,
        n_items: 40,
        order: 1,
        seed: 44,
    })
    .unwrap();
    let corpus = build_corpus(&parse_interactions(&world.log).unwrap(), 1).unwrap();

    let train = TrainConfig {
        epochs: 4,
        negatives: 16,
        ..TrainConfig::default()
    };
    let gen = GenerationConfig {
        tau: 5,
        trials: 5,
        top_k: 3,
        max_len: 25,
        seed: 2,
        ..GenerationConfig::default()
    };
    let teacher = BackboneSpec {
        kind: BackboneKind::Markov,
        ..BackboneSpec::default()
    };
    let student = BackboneSpec::default();

    let report = weak_to_strong(&teacher, &student, &corpus, &train, &gen, &[10, 20], 3).unwrap();
    println!(
        "teacher {} generated {} sequences for student {}",
        report.teacher, report.gen_stats.accepted_sequences, report.student
    );
    println!("\nmetric          base      transferred   delta");
    for d in &report.deltas {
        println!(
            "{:>9}@{:<3} {:>8.4}   {:>8.4}     {:+.4}",
            d.metric, d.k, d.baseline, d.transferred, d.delta
        );
    }
}
