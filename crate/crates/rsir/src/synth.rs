//! Synthetic interaction worlds with known transition structure.
//!
//! Each item gets three preferred successors carrying 0.8 of the transition
//! mass (graded 0.5 / 0.2 / 0.1 so the top successor is unambiguous); the
//! remaining 0.2 spreads uniformly over the other items. Users are random
//! walks of length 5..=15 through this structure. Because the ground truth
//! is known, learnability and improvement claims can be checked directly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// World parameters.
#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_items: usize,
    /// Markov order of the transition structure. Order 1 uses a fixed
    /// per-item successor table; higher orders derive the successor set from
    /// the last `order` items.
    pub order: usize,
    pub seed: u64,
}

/// A generated world: the interaction log plus the ground-truth successor
/// table (order-1 worlds only).
#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub log: String,
    pub preferred: Option<Vec<[u32; 3]>>,
}

const MIN_LEN: usize = 5;
const MAX_LEN: usize = 15;

fn pick_successors(rng: &mut ChaCha8Rng, current: u32, n_items: usize) -> [u32; 3] {
    let mut out = [0u32; 3];
    let mut chosen = 0;
    while chosen < 3 {
        let cand = rng.gen_range(0..n_items as u32);
        if cand != current && !out[..chosen].contains(&cand) {
            out[chosen] = cand;
            chosen += 1;
        }
    }
    out
}

fn next_item(rng: &mut ChaCha8Rng, current: u32, successors: &[u32; 3], n_items: usize) -> u32 {
    let r = rng.gen::<f64>();
    if r < 0.5 {
        successors[0]
    } else if r < 0.7 {
        successors[1]
    } else if r < 0.8 {
        successors[2]
    } else {
        // Uniform over everything outside the preferred set.
        loop {
            let cand = rng.gen_range(0..n_items as u32);
            if !successors.contains(&cand) && cand != current {
                return cand;
            }
        }
    }
}

/// Build a world and render it as an interaction log, deterministically per
/// seed.
pub fn synth_world(cfg: &SynthConfig) -> Result<SynthWorld> {
    if cfg.n_items < 10 {
        return Err(Error::Config("synth world needs n_items >= 10".into()));
    }
    if cfg.order == 0 {
        return Err(Error::Config("synth world needs order >= 1".into()));
    }

    // Order-1 worlds precompute the table; higher orders derive successor
    // sets from the recent state on demand.
    let table: Option<Vec<[u32; 3]>> = (cfg.order == 1).then(|| {
        (0..cfg.n_items as u32)
            .map(|item| {
                let mut rng = stream_rng(cfg.seed, &[0x5cc, u64::from(item)]);
                pick_successors(&mut rng, item, cfg.n_items)
            })
            .collect()
    });
    let successors_of = |state: &[u32]| -> [u32; 3] {
        let current = *state.last().unwrap();
        match &table {
            Some(t) => t[current as usize],
            None => {
                let mut coords = vec![0x5cc_u64];
                coords.extend(state.iter().map(|&i| u64::from(i) + 1));
                let mut rng = stream_rng(cfg.seed, &coords);
                pick_successors(&mut rng, current, cfg.n_items)
            }
        }
    };

    let mut log = String::new();
    for user in 0..cfg.n_users {
        let mut rng = stream_rng(cfg.seed, &[0x3a1f, user as u64]);
        let len = rng.gen_range(MIN_LEN..=MAX_LEN);
        let mut walk: Vec<u32> = Vec::with_capacity(len);
        walk.push(rng.gen_range(0..cfg.n_items as u32));
        while walk.len() < len {
            let state_start = walk.len().saturating_sub(cfg.order);
            let succ = successors_of(&walk[state_start..]);
            let next = next_item(&mut rng, *walk.last().unwrap(), &succ, cfg.n_items);
            walk.push(next);
        }
        for (pos, item) in walk.iter().enumerate() {
            log.push_str(&format!("u{user}\ti{item}\t{pos}\n"));
        }
    }

    Ok(SynthWorld {
        log,
        preferred: table,
    })
}
