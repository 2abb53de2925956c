//! Train both backbone kinds and compare their leave-one-out metrics.
//!
//! ```bash
//! cargo run -p rsir --example train_and_evaluate
//! ```

use rsir::backbone::{BackboneKind, BackboneSpec, TrainConfig};
use rsir::corpus::{build_corpus, parse_interactions};
use rsir::eval::evaluate;
use rsir::synth::{synth_world, SynthConfig};

fn main() {
    let world = synth_world(&SynthConfig {
        n_users: 300,
        n_items: 40,
        order: 1,
        seed: 12,
    })
    .unwrap();
    let corpus = build_corpus(&parse_interactions(&world.log).unwrap(), 1).unwrap();
    let split = corpus.split_leave_one_out();

    let train = TrainConfig {
        epochs: 10,
        learning_rate: 0.05,
        negatives: 16,
        patience: 5,
        batch_seed: 0,
    };

    for kind in [BackboneKind::SeqEmb, BackboneKind::Markov] {
        let spec = BackboneSpec {
            kind,
            ..BackboneSpec::default()
        };
        let model = spec.train(&split, &train, 42).unwrap();
        let report = evaluate(&model, &split, &[10, 20]).unwrap();
        println!("{kind} over {} users:", report.evaluated_users);
        for m in &report.at {
            println!(
                "  @{:<2} ndcg={:.4} recall={:.4} precision={:.4} f1={:.4} mrr={:.4}",
                m.k, m.ndcg, m.recall, m.precision, m.f1, m.mrr
            );
        }
    }

    // Checkpoints round-trip bit-exactly.
    let spec = BackboneSpec::default();
    let model = spec.train(&split, &train, 42).unwrap();
    let dir = std::env::temp_dir().join("rsir_example_ckpt");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("model.ckpt");
    model.save(&path).unwrap();
    let loaded = rsir::Backbone::load(&path).unwrap();
    let a = evaluate(&model, &split, &[10]).unwrap();
    let b = evaluate(&loaded, &split, &[10]).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    println!("checkpoint round-trip verified at {}", path.display());
}
