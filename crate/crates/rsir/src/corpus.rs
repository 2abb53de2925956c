//! Interaction corpus: ingestion, preprocessing, splitting and expansion.
//!
//! A [`Corpus`] holds one chronologically ordered item sequence per user plus
//! any synthetic sequences merged in by later augmentation rounds. Users and
//! items live in dense index spaces; the original string ids are kept for
//! export. Corpus values are immutable after construction; every mutating
//! operation returns a fresh value.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// A raw (user, item, timestamp) record from an interaction log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interaction {
    pub user_id: String,
    pub item_id: String,
    /// Seconds; defaults to the input line order when the column is absent.
    pub timestamp: i64,
}

/// Provenance of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Original,
    /// Produced by the generator during the given loop iteration.
    Generated(u32),
}

/// One user's ordered item-index sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionSequence {
    pub user: u32,
    pub items: Vec<u32>,
    pub origin: Origin,
}

/// Noise injection settings: insert `ceil(eta * n)` random items per sequence.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub eta: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.8).contains(&self.eta) {
            return Err(Error::Config(format!(
                "noise.eta must be in [0, 0.8], got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// Flat corpus statistics.
///
/// Density is the raw interaction count over `users x items` (and sparsity
/// its complement), matching the usual benchmark-table arithmetic. Repeat
/// interactions count individually, so heavily augmented corpora can report
/// densities above 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub avg_length: f64,
    pub sparsity: f64,
    pub density: f64,
}

/// Item-sequence collection over dense user/item index spaces.
#[derive(Debug, Clone)]
pub struct Corpus {
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    sequences: Vec<InteractionSequence>,
    iteration_tag: u32,
}

/// Per-user leave-one-out split: last item is the test target, second-to-last
/// the validation target, the rest the train prefix. Synthetic sequences have
/// no held-out targets; they are train-only.
#[derive(Debug, Clone)]
pub struct SplitView {
    /// Sequences visible to the trainer (original prefixes + full synthetic).
    pub training_sequences: Vec<TrainSequence>,
    /// One entry per original user, carrying the held-out targets.
    pub eval_users: Vec<UserSplit>,
    pub vocab_size: usize,
}

#[derive(Debug, Clone)]
pub struct TrainSequence {
    pub user: u32,
    pub items: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct UserSplit {
    pub user: u32,
    pub train_prefix: Vec<u32>,
    /// Absent for users with fewer than three interactions.
    pub val_target: Option<u32>,
    pub test_target: u32,
}

impl UserSplit {
    /// Context used when ranking the test target: everything but the target.
    pub fn test_context(&self) -> Vec<u32> {
        let mut ctx = self.train_prefix.clone();
        if let Some(v) = self.val_target {
            ctx.push(v);
        }
        ctx
    }
}

/// Parse an interaction log: one `user<sep>item[<sep>timestamp]` record per
/// line, with the separator (tab or comma) auto-detected from the first line.
pub fn parse_interactions(text: &str) -> Result<Vec<Interaction>> {
    let mut out = Vec::new();
    let mut sep: Option<char> = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let sep = *sep.get_or_insert_with(|| if line.contains('\t') { '\t' } else { ',' });
        let fields: Vec<&str> = line.split(sep).collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 2 or 3 fields separated by {sep:?}, got {}", fields.len()),
            });
        }
        let user_id = fields[0].trim();
        let item_id = fields[1].trim();
        if user_id.is_empty() || item_id.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                msg: "empty user or item id".into(),
            });
        }
        let timestamp = match fields.get(2) {
            Some(ts) => ts.trim().parse::<i64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("malformed timestamp {:?}", ts.trim()),
            })?,
            None => 0,
        };
        out.push(Interaction {
            user_id: user_id.to_string(),
            item_id: item_id.to_string(),
            timestamp,
        });
    }
    Ok(out)
}

/// Build a corpus from raw interactions with an iterative `min_core` filter:
/// users and items with fewer than `min_core` interactions are removed until
/// a fixed point. Each user's items are sorted by (timestamp, input order).
pub fn build_corpus(interactions: &[Interaction], min_core: usize) -> Result<Corpus> {
    if min_core < 1 {
        return Err(Error::Config("min_core must be >= 1".into()));
    }
    // Keep records as (user, item, ts, input order) and filter iteratively.
    let mut records: Vec<(&str, &str, i64, usize)> = interactions
        .iter()
        .enumerate()
        .map(|(ord, it)| (it.user_id.as_str(), it.item_id.as_str(), it.timestamp, ord))
        .collect();

    loop {
        let mut user_count: HashMap<&str, usize> = HashMap::new();
        let mut item_count: HashMap<&str, usize> = HashMap::new();
        for (u, i, _, _) in &records {
            *user_count.entry(u).or_insert(0) += 1;
            *item_count.entry(i).or_insert(0) += 1;
        }
        let before = records.len();
        records.retain(|(u, i, _, _)| user_count[u] >= min_core && item_count[i] >= min_core);
        if records.len() == before {
            break;
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    // Dense ids in first-appearance order of the surviving records.
    let mut user_index: HashMap<&str, u32> = HashMap::new();
    let mut item_index: HashMap<&str, u32> = HashMap::new();
    let mut user_ids = Vec::new();
    let mut item_ids = Vec::new();
    for (u, i, _, _) in &records {
        user_index.entry(u).or_insert_with(|| {
            user_ids.push(u.to_string());
            (user_ids.len() - 1) as u32
        });
        item_index.entry(i).or_insert_with(|| {
            item_ids.push(i.to_string());
            (item_ids.len() - 1) as u32
        });
    }

    let mut per_user: Vec<Vec<(i64, usize, u32)>> = vec![Vec::new(); user_ids.len()];
    for (u, i, ts, ord) in &records {
        per_user[user_index[u] as usize].push((*ts, *ord, item_index[i]));
    }
    let sequences = per_user
        .into_iter()
        .enumerate()
        .map(|(user, mut recs)| {
            recs.sort_by_key(|&(ts, ord, _)| (ts, ord));
            InteractionSequence {
                user: user as u32,
                items: recs.into_iter().map(|(_, _, item)| item).collect(),
                origin: Origin::Original,
            }
        })
        .collect();

    Ok(Corpus {
        user_ids,
        item_ids,
        sequences,
        iteration_tag: 0,
    })
}

impl Corpus {
    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn sequences(&self) -> &[InteractionSequence] {
        &self.sequences
    }

    pub fn iteration_tag(&self) -> u32 {
        self.iteration_tag
    }

    pub fn user_id(&self, user: u32) -> &str {
        &self.user_ids[user as usize]
    }

    pub fn item_id(&self, item: u32) -> &str {
        &self.item_ids[item as usize]
    }

    /// Original (ingested) sequences only, in user order.
    pub fn original_sequences(&self) -> impl Iterator<Item = &InteractionSequence> {
        self.sequences.iter().filter(|s| s.origin == Origin::Original)
    }

    pub fn total_interactions(&self) -> usize {
        self.sequences.iter().map(|s| s.items.len()).sum()
    }

    /// Counts, average length, sparsity and density.
    pub fn stats(&self) -> CorpusStats {
        let users = self.n_users();
        let items = self.n_items();
        let interactions = self.total_interactions();
        let density = interactions as f64 / (users as f64 * items as f64);
        CorpusStats {
            users,
            items,
            interactions,
            avg_length: interactions as f64 / users as f64,
            sparsity: 1.0 - density,
            density,
        }
    }

    /// Leave-one-out split. Original sequences of length >= 3 contribute a
    /// train prefix, a validation target and a test target; length-2 users
    /// keep only a test target. Synthetic sequences train in full.
    pub fn split_leave_one_out(&self) -> SplitView {
        let mut training_sequences = Vec::with_capacity(self.sequences.len());
        let mut eval_users = Vec::new();
        for seq in &self.sequences {
            match seq.origin {
                Origin::Original => {
                    let n = seq.items.len();
                    if n < 2 {
                        // Too short to hold out anything; train-only.
                        training_sequences.push(TrainSequence {
                            user: seq.user,
                            items: seq.items.clone(),
                        });
                        continue;
                    }
                    let (prefix_len, val) = if n >= 3 {
                        (n - 2, Some(seq.items[n - 2]))
                    } else {
                        (n - 1, None)
                    };
                    eval_users.push(UserSplit {
                        user: seq.user,
                        train_prefix: seq.items[..prefix_len].to_vec(),
                        val_target: val,
                        test_target: seq.items[n - 1],
                    });
                    training_sequences.push(TrainSequence {
                        user: seq.user,
                        items: seq.items[..prefix_len].to_vec(),
                    });
                }
                Origin::Generated(_) => {
                    training_sequences.push(TrainSequence {
                        user: seq.user,
                        items: seq.items.clone(),
                    });
                }
            }
        }
        SplitView {
            training_sequences,
            eval_users,
            vocab_size: self.n_items(),
        }
    }

    /// Corrupt original sequences by inserting `ceil(eta * n)` items drawn
    /// uniformly from the vocabulary at uniformly random positions. The
    /// result is deterministic in `(cfg.seed, user index)`.
    pub fn inject_noise(&self, cfg: &NoiseConfig) -> Result<Corpus> {
        cfg.validate()?;
        let n_items = self.n_items() as u32;
        let mut out = self.clone();
        for seq in &mut out.sequences {
            if seq.origin != Origin::Original {
                continue;
            }
            let n = seq.items.len();
            let insertions = (cfg.eta * n as f64).ceil() as usize;
            if insertions == 0 {
                continue;
            }
            let mut rng = stream_rng(cfg.seed, &[u64::from(seq.user)]);
            for _ in 0..insertions {
                let item = rng.gen_range(0..n_items);
                let pos = rng.gen_range(0..=seq.items.len());
                seq.items.insert(pos, item);
            }
        }
        Ok(out)
    }

    /// Merge generated sequences into the corpus. A candidate is dropped iff
    /// its item list exactly equals an existing sequence of the same user.
    /// Returns the expanded corpus and the number of dropped duplicates.
    pub fn expand(&self, generated: Vec<InteractionSequence>) -> (Corpus, usize) {
        let mut out = self.clone();
        let mut seen: HashSet<(u32, Vec<u32>)> = out
            .sequences
            .iter()
            .map(|s| (s.user, s.items.clone()))
            .collect();
        let mut dropped = 0;
        for seq in generated {
            debug_assert!(seq.items.iter().all(|&i| (i as usize) < self.n_items()));
            let key = (seq.user, seq.items.clone());
            if seen.contains(&key) {
                dropped += 1;
            } else {
                seen.insert(key);
                out.sequences.push(seq);
            }
        }
        out.iteration_tag += 1;
        (out, dropped)
    }

    /// Render as an interaction log (`user<TAB>item<TAB>position`), original
    /// sequences only. Generated sequences are exported by the generator with
    /// their origin column.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        for seq in self.original_sequences() {
            for (pos, &item) in seq.items.iter().enumerate() {
                out.push_str(&format!(
                    "{}\t{}\t{}\n",
                    self.user_id(seq.user),
                    self.item_id(item),
                    pos
                ));
            }
        }
        out
    }
}
