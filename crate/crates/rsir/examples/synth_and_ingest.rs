//! Build a synthetic interaction world and ingest it as a corpus.
//!
//! ```bash
//! cargo run -p rsir --example synth_and_ingest
//! ```

use rsir::corpus::{build_corpus, parse_interactions};
use rsir::synth::{synth_world, SynthConfig};

fn main() {
    // 200 users walking a 30-item transition structure.
    let world = synth_world(&SynthConfig {
        n_users: 200,
        n_items: 30,
        order: 1,
        seed: 7,
    })
    .unwrap();
    println!("world log: {} lines", world.log.lines().count());

    let interactions = parse_interactions(&world.log).unwrap();
    let corpus = build_corpus(&interactions, 1).unwrap();
    let stats = corpus.stats();
    println!("users        = {}", stats.users);
    println!("items        = {}", stats.items);
    println!("interactions = {}", stats.interactions);
    println!("avg_length   = {:.2}", stats.avg_length);
    println!("sparsity     = {:.4}", stats.sparsity);
    println!("density      = {:.4}", stats.density);

    // The leave-one-out split holds the last item of each user out for
    // testing and the second-to-last for validation.
    let split = corpus.split_leave_one_out();
    println!(
        "split: {} training sequences, {} users with held-out targets",
        split.training_sequences.len(),
        split.eval_users.len()
    );

    // 5-core filtering removes rare users and items until stable.
    match build_corpus(&interactions, 5) {
        Ok(filtered) => {
            let s = filtered.stats();
            println!(
                "after 5-core: users = {}, items = {}, interactions = {}",
                s.users, s.items, s.interactions
            );
        }
        Err(e) => println!("5-core filtering: {e}"),
    }
}
