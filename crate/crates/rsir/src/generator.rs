//! Fidelity-controlled synthetic sequence generation.
//!
//! Each trajectory seeds a synthetic context with a random prefix of a real
//! user sequence and extends it autoregressively. Candidates come from a
//! hybrid pool (the user's own history with probability `p`, a global sample
//! otherwise), the model top-k samples the next item, and the step is kept
//! only while some held-out true item still ranks within `tau` under the
//! extended context. The first failing step terminates the trajectory.
//!
//! Heuristic baseline augmenters (random insertion, window reordering) live
//! here too so experiments can compare against them.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backbone::{rank_from_scores, RankingModel};
use crate::corpus::{Corpus, InteractionSequence, Origin};
use crate::error::{Error, Result};
use crate::retrieval::FidelityBackend;
use crate::rng::stream_rng;

/// Generation hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// Fidelity rank threshold. `tau >= |I|` accepts everything (the
    /// uncontrolled ablation arm).
    pub tau: usize,
    /// Trajectories attempted per source sequence.
    pub trials: usize,
    /// Probability of drawing the candidate pool from the user's history.
    pub exploit_p: f64,
    /// Pool truncation before softmax sampling.
    pub top_k: usize,
    /// Hard length cap per trajectory.
    pub max_len: usize,
    /// Trajectories shorter than this are discarded.
    pub min_len: usize,
    /// Size of the global sample used for exploration pools.
    pub explore_pool_size: usize,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            tau: 10,
            trials: 5,
            exploit_p: 0.5,
            top_k: 10,
            max_len: 20,
            min_len: 2,
            explore_pool_size: 100,
            seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau < 1 {
            return Err(Error::Config("gen.tau must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.exploit_p) {
            return Err(Error::Config("gen.p must be in [0, 1]".into()));
        }
        if self.top_k < 1 {
            return Err(Error::Config("gen.top_k must be >= 1".into()));
        }
        if self.min_len < 2 || self.min_len > self.max_len {
            return Err(Error::Config("gen.min_len must be in [2, gen.max_len]".into()));
        }
        if self.explore_pool_size < 1 {
            return Err(Error::Config("gen.explore_pool_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Where a candidate pool came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolSource {
    Exploit,
    Explore,
}

/// Counters for one generation round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub trials: usize,
    pub accepted_sequences: usize,
    pub dedup_dropped: usize,
    pub short_dropped: usize,
    /// Mean number of generation steps per trajectory before termination.
    pub mean_effective_length: f64,
    /// Accepted steps over attempted steps.
    pub acceptance_rate: f64,
}

/// Hybrid candidate pool: the user's distinct history with probability `p`,
/// otherwise a uniform global sample without replacement. The pool is sorted
/// by item index.
pub fn build_candidate_pool(
    source_items: &[u32],
    vocab_size: usize,
    exploit_p: f64,
    explore_pool_size: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<u32>, PoolSource) {
    if rng.gen::<f64>() < exploit_p {
        let mut pool: Vec<u32> = source_items.to_vec();
        pool.sort_unstable();
        pool.dedup();
        (pool, PoolSource::Exploit)
    } else {
        let take = explore_pool_size.min(vocab_size);
        let sample = rand::seq::index::sample(rng, vocab_size, take);
        let mut pool: Vec<u32> = sample.into_iter().map(|i| i as u32).collect();
        pool.sort_unstable();
        (pool, PoolSource::Explore)
    }
}

/// Top-k softmax sampling restricted to the pool: keep the `top_k` best pool
/// items by score (ties to the lower index) and sample one proportionally to
/// the softmax of their scores.
pub fn sample_next(
    model: &impl RankingModel,
    context: &[u32],
    pool: &[u32],
    top_k: usize,
    rng: &mut ChaCha8Rng,
) -> u32 {
    debug_assert!(!pool.is_empty());
    let scores = model.score_all(context);
    let mut scored: Vec<(u32, f64)> = pool.iter().map(|&i| (i, scores[i as usize])).collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(top_k);

    let max = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scored.iter().map(|s| (s.1 - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        draw -= w;
        if draw <= 0.0 {
            return scored[i].0;
        }
    }
    scored.last().unwrap().0
}

/// Rank-threshold acceptance: true iff some remaining true item ranks within
/// `tau` under the extended context. An empty target set leaves no evidence
/// and rejects.
pub fn fidelity_accept(
    backend: &FidelityBackend,
    model: &impl RankingModel,
    extended_context: &[u32],
    targets: &HashSet<u32>,
    tau: usize,
) -> bool {
    if targets.is_empty() {
        return false;
    }
    match backend {
        FidelityBackend::Exact => {
            let scores = model.score_all(extended_context);
            targets.iter().any(|&t| rank_from_scores(&scores, t) <= tau)
        }
        FidelityBackend::Clustered(index) => {
            let seq_emb = model
                .as_seq_emb()
                .expect("clustered fidelity backend requires an embedding backbone");
            let h = seq_emb
                .encode_context(extended_context)
                .expect("fidelity check on empty context");
            index.accepts(seq_emb, &h, targets, tau)
        }
    }
}

/// Full record of one trajectory attempt.
#[derive(Debug, Clone)]
pub struct TrajectoryDetail {
    pub items: Vec<u32>,
    pub prefix_len: usize,
    /// Generation steps attempted, including the failing one.
    pub steps_attempted: usize,
    pub accepted_steps: usize,
}

/// Run one trajectory: seed with a uniform random prefix, then extend until
/// the fidelity check fails or `max_len` is reached.
pub fn run_trajectory(
    model: &impl RankingModel,
    backend: &FidelityBackend,
    source_items: &[u32],
    cfg: &GenerationConfig,
    rng: &mut ChaCha8Rng,
) -> TrajectoryDetail {
    debug_assert!(source_items.len() >= 2);
    let prefix_len = rng.gen_range(1..source_items.len());
    let mut context = source_items[..prefix_len].to_vec();
    let mut targets: HashSet<u32> = source_items.iter().copied().collect();
    for item in &context {
        targets.remove(item);
    }

    let mut steps_attempted = 0;
    let mut accepted_steps = 0;
    while context.len() < cfg.max_len {
        let (pool, _) = build_candidate_pool(
            source_items,
            model.vocab_size(),
            cfg.exploit_p,
            cfg.explore_pool_size,
            rng,
        );
        let next = sample_next(model, &context, &pool, cfg.top_k, rng);
        context.push(next);
        steps_attempted += 1;
        if fidelity_accept(backend, model, &context, &targets, cfg.tau) {
            accepted_steps += 1;
            targets.remove(&next);
        } else {
            context.pop();
            break;
        }
    }

    TrajectoryDetail {
        items: context,
        prefix_len,
        steps_attempted,
        accepted_steps,
    }
}

/// One trajectory as a tagged sequence, or `None` when it ends below
/// `min_len`.
pub fn generate_trajectory(
    model: &impl RankingModel,
    backend: &FidelityBackend,
    source: &InteractionSequence,
    cfg: &GenerationConfig,
    iteration: u32,
    rng: &mut ChaCha8Rng,
) -> Option<InteractionSequence> {
    let detail = run_trajectory(model, backend, &source.items, cfg, rng);
    if detail.items.len() < cfg.min_len {
        return None;
    }
    Some(InteractionSequence {
        user: source.user,
        items: detail.items,
        origin: Origin::Generated(iteration),
    })
}

/// Generate `cfg.trials` trajectories per original sequence, in parallel,
/// with per-(iteration, user, trial) RNG streams so the output is identical
/// for any worker count. Short trajectories and exact same-user duplicates
/// (against the corpus and earlier accepted output) are dropped.
pub fn generate_dataset(
    model: &impl RankingModel,
    corpus: &Corpus,
    cfg: &GenerationConfig,
    backend: &FidelityBackend,
    iteration: u32,
) -> (Vec<InteractionSequence>, GenerationStats) {
    let sources: Vec<&InteractionSequence> = corpus
        .original_sequences()
        .filter(|s| s.items.len() >= 2)
        .collect();
    let jobs: Vec<(usize, usize)> = (0..sources.len())
        .flat_map(|si| (0..cfg.trials).map(move |t| (si, t)))
        .collect();

    let details: Vec<TrajectoryDetail> = jobs
        .par_iter()
        .map(|&(si, trial)| {
            let source = sources[si];
            let mut rng = stream_rng(
                cfg.seed,
                &[u64::from(iteration), u64::from(source.user), trial as u64],
            );
            run_trajectory(model, backend, &source.items, cfg, &mut rng)
        })
        .collect();

    // Sequential collection in (user, trial) order keeps dedup deterministic.
    let mut existing: HashSet<(u32, Vec<u32>)> = corpus
        .sequences()
        .iter()
        .map(|s| (s.user, s.items.clone()))
        .collect();
    let mut out = Vec::new();
    let mut short_dropped = 0usize;
    let mut dedup_dropped = 0usize;
    let mut total_steps = 0usize;
    let mut total_accepted = 0usize;
    for (&(si, _), detail) in jobs.iter().zip(&details) {
        total_steps += detail.steps_attempted;
        total_accepted += detail.accepted_steps;
        if detail.items.len() < cfg.min_len {
            short_dropped += 1;
            continue;
        }
        let user = sources[si].user;
        let key = (user, detail.items.clone());
        if existing.contains(&key) {
            dedup_dropped += 1;
            continue;
        }
        existing.insert(key);
        out.push(InteractionSequence {
            user,
            items: detail.items.clone(),
            origin: Origin::Generated(iteration),
        });
    }

    let trials = jobs.len();
    let stats = GenerationStats {
        trials,
        accepted_sequences: out.len(),
        dedup_dropped,
        short_dropped,
        mean_effective_length: if trials == 0 {
            0.0
        } else {
            total_steps as f64 / trials as f64
        },
        acceptance_rate: if total_steps == 0 {
            0.0
        } else {
            total_accepted as f64 / total_steps as f64
        },
    };
    (out, stats)
}

/// Render generated sequences in the interaction-log format with an origin
/// column (`gen:<iteration>`).
pub fn sequences_to_log(corpus: &Corpus, sequences: &[InteractionSequence]) -> String {
    let mut out = String::new();
    for seq in sequences {
        let origin = match seq.origin {
            Origin::Original => "orig".to_string(),
            Origin::Generated(k) => format!("gen:{k}"),
        };
        for (pos, &item) in seq.items.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                corpus.user_id(seq.user),
                corpus.item_id(item),
                pos,
                origin
            ));
        }
    }
    out
}

/// Insertion baseline: one augmented copy per original sequence with
/// `ceil(ratio * n)` uniform random items spliced in at random positions.
pub fn baseline_insert(corpus: &Corpus, ratio: f64, seed: u64) -> Result<Corpus> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Config("insertion ratio must be in (0, 1]".into()));
    }
    let vocab = corpus.n_items() as u32;
    let tag = corpus.iteration_tag() + 1;
    let generated: Vec<InteractionSequence> = corpus
        .original_sequences()
        .map(|seq| {
            let mut rng = stream_rng(seed, &[0x175e_u64, u64::from(seq.user)]);
            let mut items = seq.items.clone();
            let insertions = (ratio * seq.items.len() as f64).ceil() as usize;
            for _ in 0..insertions {
                let item = rng.gen_range(0..vocab);
                let pos = rng.gen_range(0..=items.len());
                items.insert(pos, item);
            }
            InteractionSequence {
                user: seq.user,
                items,
                origin: Origin::Generated(tag),
            }
        })
        .collect();
    Ok(corpus.expand(generated).0)
}

/// Reordering baseline: one augmented copy per original sequence with one
/// random window shuffled.
pub fn baseline_reorder(corpus: &Corpus, window: usize, seed: u64) -> Result<Corpus> {
    if window < 2 {
        return Err(Error::Config("reorder window must be >= 2".into()));
    }
    let tag = corpus.iteration_tag() + 1;
    let generated: Vec<InteractionSequence> = corpus
        .original_sequences()
        .map(|seq| {
            let mut rng = stream_rng(seed, &[0x2e0d_u64, u64::from(seq.user)]);
            let mut items = seq.items.clone();
            let n = items.len();
            if n <= window {
                items.shuffle(&mut rng);
            } else {
                let start = rng.gen_range(0..=n - window);
                items[start..start + window].shuffle(&mut rng);
            }
            InteractionSequence {
                user: seq.user,
                items,
                origin: Origin::Generated(tag),
            }
        })
        .collect();
    Ok(corpus.expand(generated).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::SeqEmbModel;

    /// Stub scoring fixed per-item values regardless of context.
    struct FixedScores {
        scores: Vec<f64>,
    }

    impl RankingModel for FixedScores {
        fn vocab_size(&self) -> usize {
            self.scores.len()
        }
        fn score_all(&self, _context: &[u32]) -> Vec<f64> {
            self.scores.clone()
        }
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        stream_rng(seed, &[])
    }

    #[test]
    fn pure_exploitation_pool_is_history() {
        let mut r = rng(1);
        for _ in 0..20 {
            let (pool, src) = build_candidate_pool(&[5, 3, 5, 9], 50, 1.0, 10, &mut r);
            assert_eq!(src, PoolSource::Exploit);
            assert_eq!(pool, vec![3, 5, 9]);
        }
    }

    #[test]
    fn pure_exploration_pool_from_vocabulary() {
        let mut r = rng(2);
        let (pool, src) = build_candidate_pool(&[5, 3], 50, 0.0, 10, &mut r);
        assert_eq!(src, PoolSource::Explore);
        assert_eq!(pool.len(), 10);
        assert!(pool.iter().all(|&i| i < 50));
        // Without replacement: all distinct.
        let set: HashSet<u32> = pool.iter().copied().collect();
        assert_eq!(set.len(), 10);
    }

    #[test]
    fn exploit_fraction_matches_p() {
        let mut r = rng(3);
        let n = 10_000;
        let mut exploits = 0;
        for _ in 0..n {
            let (_, src) = build_candidate_pool(&[1, 2], 50, 0.5, 10, &mut r);
            if src == PoolSource::Exploit {
                exploits += 1;
            }
        }
        // 3 sigma of Binomial(1e4, 0.5).
        let sigma = (0.25f64 * n as f64).sqrt();
        assert!((exploits as f64 - 5000.0).abs() < 3.0 * sigma, "exploits = {exploits}");
    }

    #[test]
    fn singleton_pool_always_sampled() {
        let model = FixedScores { scores: vec![0.0; 10] };
        let mut r = rng(4);
        for _ in 0..20 {
            assert_eq!(sample_next(&model, &[0], &[7], 5, &mut r), 7);
        }
    }

    #[test]
    fn saturated_score_dominates_sampling() {
        let mut scores = vec![-100.0; 10];
        scores[4] = 100.0;
        let model = FixedScores { scores };
        let mut r = rng(5);
        for _ in 0..200 {
            assert_eq!(sample_next(&model, &[0], &[1, 2, 4, 6, 8], 5, &mut r), 4);
        }
    }

    #[test]
    fn sampling_frequencies_match_softmax() {
        let pool = vec![0u32, 1, 2, 3, 4];
        let scores = vec![0.1, 0.9, -0.4, 0.5, 0.0];
        let model = FixedScores { scores: scores.clone() };
        let mut r = rng(6);
        let n = 100_000;
        let mut counts = [0f64; 5];
        for _ in 0..n {
            counts[sample_next(&model, &[0], &pool, 5, &mut r) as usize] += 1.0;
        }
        let z: f64 = scores.iter().map(|s| s.exp()).sum();
        for i in 0..5 {
            let p = scores[i].exp() / z;
            let sigma = (p * (1.0 - p) * n as f64).sqrt();
            assert!(
                (counts[i] - p * n as f64).abs() < 3.0 * sigma,
                "item {i}: observed {} expected {}",
                counts[i],
                p * n as f64
            );
        }
    }

    #[test]
    fn small_pool_uses_whole_pool() {
        let model = FixedScores { scores: vec![1.0, 2.0, 3.0] };
        let mut r = rng(7);
        let mut seen = HashSet::new();
        for _ in 0..200 {
            seen.insert(sample_next(&model, &[0], &[0, 1], 5, &mut r));
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn fidelity_tau_vocab_always_accepts() {
        let model = FixedScores { scores: (0..50).map(|i| i as f64).collect() };
        let targets: HashSet<u32> = [3].into_iter().collect();
        assert!(fidelity_accept(&FidelityBackend::Exact, &model, &[0], &targets, 50));
    }

    #[test]
    fn fidelity_tau_one_requires_argmax() {
        let mut scores = vec![0.0; 10];
        scores[9] = 5.0;
        let model = FixedScores { scores };
        let not_top: HashSet<u32> = [3, 4].into_iter().collect();
        assert!(!fidelity_accept(&FidelityBackend::Exact, &model, &[0], &not_top, 1));
        let top: HashSet<u32> = [9].into_iter().collect();
        assert!(fidelity_accept(&FidelityBackend::Exact, &model, &[0], &top, 1));
    }

    #[test]
    fn fidelity_empty_targets_rejects() {
        let model = FixedScores { scores: vec![1.0; 5] };
        assert!(!fidelity_accept(&FidelityBackend::Exact, &model, &[0], &HashSet::new(), 5));
    }

    #[test]
    fn fidelity_matches_full_sort_oracle() {
        use rand::Rng as _;
        let mut r = rng(8);
        let model = SeqEmbModel::init(50, 8, 0.8, 999);
        for _ in 0..1000 {
            let ctx_len = r.gen_range(1..6);
            let context: Vec<u32> = (0..ctx_len).map(|_| r.gen_range(0..50)).collect();
            let n_targets = r.gen_range(0..5);
            let targets: HashSet<u32> = (0..n_targets).map(|_| r.gen_range(0..50)).collect();
            let tau = r.gen_range(1..=50);

            let decision = fidelity_accept(&FidelityBackend::Exact, &model, &context, &targets, tau);

            // Oracle: full sort of the score vector, scan the top tau slots.
            let scores = model.score_all(&context);
            let mut order: Vec<usize> = (0..50).collect();
            order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
            let oracle = order[..tau].iter().any(|&i| targets.contains(&(i as u32)));
            assert_eq!(decision, oracle);
        }
    }

    #[test]
    fn always_accept_runs_to_max_len() {
        // Source items rank right behind a dominant filler item, so every
        // step samples the filler (top_k = 1), nothing ever leaves the
        // target set, and generation runs to the length cap.
        let source = vec![0u32, 1, 2, 3];
        let mut scores = vec![0.0; 30];
        for &s in &source {
            scores[s as usize] = 10.0;
        }
        scores[29] = 20.0;
        let model = FixedScores { scores };
        let cfg = GenerationConfig {
            tau: 10,
            max_len: 12,
            top_k: 1,
            exploit_p: 0.0,
            explore_pool_size: 30,
            ..GenerationConfig::default()
        };
        let mut r = rng(9);
        let detail = run_trajectory(&model, &FidelityBackend::Exact, &source, &cfg, &mut r);
        assert_eq!(detail.items.len(), 12);
        assert_eq!(detail.accepted_steps, detail.steps_attempted);
        assert!(detail.items[detail.prefix_len..].iter().all(|&i| i == 29));
    }

    #[test]
    fn target_exhaustion_terminates_accept_all_runs() {
        // tau = |I| accepts any step while evidence remains; once every
        // source item has been generated into the context the target set is
        // empty and generation must stop.
        let source = vec![0u32, 1];
        let model = FixedScores { scores: vec![0.0; 6] };
        let cfg = GenerationConfig {
            tau: 6,
            max_len: 40,
            top_k: 6,
            exploit_p: 1.0, // pool = {0, 1}: target 1 gets sampled quickly
            ..GenerationConfig::default()
        };
        let mut r = rng(12);
        let detail = run_trajectory(&model, &FidelityBackend::Exact, &source, &cfg, &mut r);
        assert!(detail.items.len() < 40);
        assert!(detail.items[detail.prefix_len..].contains(&1));
    }

    #[test]
    fn always_reject_returns_absent() {
        // Length-2 source forces prefix length 1; the first step must fail.
        let model = FixedScores { scores: (0..20).map(f64::from).collect() };
        let source = InteractionSequence {
            user: 0,
            items: vec![0, 1],
            origin: Origin::Original,
        };
        // Targets can never rank within tau=1: item 19 always wins.
        let cfg = GenerationConfig { tau: 1, ..GenerationConfig::default() };
        let mut r = rng(10);
        let out = generate_trajectory(&model, &FidelityBackend::Exact, &source, &cfg, 1, &mut r);
        assert!(out.is_none());
    }

    /// Stub with an exactly-1/2 per-step break probability: the target
    /// (item 1) ranks first iff the last context item is even, and all other
    /// scores are flat so sampling over the full vocabulary stays uniform to
    /// within 1e-9. Half the vocabulary is even, so each generated step
    /// breaks with probability exactly 0.5, independently.
    struct ParityBreakModel {
        vocab: usize,
    }

    impl RankingModel for ParityBreakModel {
        fn vocab_size(&self) -> usize {
            self.vocab
        }
        fn score_all(&self, context: &[u32]) -> Vec<f64> {
            let accept = context.last().is_some_and(|&i| i % 2 == 0);
            let mut scores = vec![0.0; self.vocab];
            scores[1] = if accept { 1e-9 } else { -1e-9 };
            scores
        }
    }

    #[test]
    fn geometric_break_bounds_mean_effective_length() {
        // Per-step break probability 1/2: mean steps <= 2 within 3 sigma.
        let vocab = 40;
        let model = ParityBreakModel { vocab };
        let source = vec![0u32, 1];
        let cfg = GenerationConfig {
            tau: 1,
            max_len: 64,
            exploit_p: 0.0,
            top_k: vocab,
            explore_pool_size: vocab,
            ..GenerationConfig::default()
        };
        let n = 10_000;
        let mut total = 0usize;
        let mut sq_total = 0f64;
        for t in 0..n {
            let mut r = stream_rng(77, &[t as u64]);
            let detail = run_trajectory(&model, &FidelityBackend::Exact, &source, &cfg, &mut r);
            total += detail.steps_attempted;
            sq_total += (detail.steps_attempted as f64).powi(2);
        }
        let mean = total as f64 / n as f64;
        let var = sq_total / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!(mean <= 2.0 + 3.0 * se, "mean effective length {mean} (se {se})");
        assert!(mean > 1.5, "break probability should be ~0.5 (mean {mean})");
    }

    #[test]
    fn accepted_steps_replay_under_same_tau() {
        // Every accepted step must re-verify when replayed step by step.
        let model = SeqEmbModel::init(30, 6, 0.8, 4242);
        let cfg = GenerationConfig {
            tau: 8,
            max_len: 15,
            explore_pool_size: 20,
            ..GenerationConfig::default()
        };
        let backend = FidelityBackend::Exact;
        for seed in 0..30u64 {
            let source: Vec<u32> = {
                let mut r = stream_rng(seed, &[1]);
                (0..6).map(|_| r.gen_range(0..30)).collect()
            };
            let mut r = stream_rng(seed, &[2]);
            let detail = run_trajectory(&model, &backend, &source, &cfg, &mut r);
            let mut targets: HashSet<u32> = source.iter().copied().collect();
            for item in &detail.items[..detail.prefix_len] {
                targets.remove(item);
            }
            for t in detail.prefix_len..detail.items.len() {
                assert!(
                    fidelity_accept(&backend, &model, &detail.items[..t + 1], &targets, cfg.tau),
                    "replay failed at position {t}"
                );
                targets.remove(&detail.items[t]);
            }
        }
    }

    #[test]
    fn accepted_length_monotone_in_tau() {
        let model = SeqEmbModel::init(30, 6, 0.8, 31337);
        let source: Vec<u32> = vec![0, 5, 10, 15, 20, 25];
        for seed in 0..20u64 {
            let mut lengths = Vec::new();
            for tau in [1usize, 3, 5, 10, 20, 30] {
                let cfg = GenerationConfig {
                    tau,
                    max_len: 15,
                    explore_pool_size: 20,
                    ..GenerationConfig::default()
                };
                let mut r = stream_rng(seed, &[9]);
                let detail = run_trajectory(&model, &FidelityBackend::Exact, &source, &cfg, &mut r);
                lengths.push(detail.accepted_steps);
            }
            for w in lengths.windows(2) {
                assert!(w[1] >= w[0], "accepted length not monotone in tau: {lengths:?}");
            }
        }
    }

    fn toy_corpus(n_users: usize) -> Corpus {
        let mut log = String::new();
        for u in 0..n_users {
            for t in 0..4 {
                log.push_str(&format!("u{u}\ti{}\t{t}\n", (u + t) % 8));
            }
        }
        crate::corpus::build_corpus(&crate::corpus::parse_interactions(&log).unwrap(), 1).unwrap()
    }

    #[test]
    fn zero_trials_generates_nothing() {
        let corpus = toy_corpus(5);
        let model = SeqEmbModel::init(corpus.n_items(), 4, 0.8, 1);
        let cfg = GenerationConfig { trials: 0, ..GenerationConfig::default() };
        let (seqs, stats) = generate_dataset(&model, &corpus, &cfg, &FidelityBackend::Exact, 1);
        assert!(seqs.is_empty());
        assert_eq!(stats.trials, 0);
    }

    #[test]
    fn always_accept_counts_sequences() {
        // tau = |I|: every step with remaining evidence is accepted, so no
        // trajectory ends below min_len and the only possible losses are
        // duplicates. This seed produces none: 10 users x 2 trials -> 20.
        let corpus = toy_corpus(10);
        let model = FixedScores { scores: vec![0.0; corpus.n_items()] };
        let cfg = GenerationConfig {
            tau: corpus.n_items(),
            trials: 2,
            max_len: 10,
            seed: 5,
            ..GenerationConfig::default()
        };
        let (seqs, stats) = generate_dataset(&model, &corpus, &cfg, &FidelityBackend::Exact, 1);
        assert_eq!(stats.trials, 20);
        assert_eq!(stats.short_dropped, 0);
        assert_eq!(seqs.len() + stats.dedup_dropped, 20);
        assert_eq!(seqs.len(), 20, "collision-free seed expected");
        assert!(seqs.iter().all(|s| s.items.len() >= 2 && s.items.len() <= 10));
        assert!(seqs.iter().all(|s| s.origin == Origin::Generated(1)));
    }

    #[test]
    fn dataset_output_deterministic_across_thread_counts() {
        let corpus = toy_corpus(12);
        let model = SeqEmbModel::init(corpus.n_items(), 4, 0.8, 5);
        let cfg = GenerationConfig {
            tau: 4,
            trials: 3,
            max_len: 10,
            ..GenerationConfig::default()
        };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| generate_dataset(&model, &corpus, &cfg, &FidelityBackend::Exact, 2))
        };
        let (seq1, stats1) = run(1);
        let (seq4, stats4) = run(4);
        assert_eq!(seq1, seq4);
        assert_eq!(stats1, stats4);
    }

    #[test]
    fn insertion_lengths_and_reorder_multiset() {
        let corpus = toy_corpus(6);
        let inserted = baseline_insert(&corpus, 0.5, 3).unwrap();
        // Each original length-4 sequence gains a copy with 2 extra items.
        let gen: Vec<_> = inserted
            .sequences()
            .iter()
            .filter(|s| matches!(s.origin, Origin::Generated(_)))
            .collect();
        assert_eq!(gen.len(), 6);
        assert!(gen.iter().all(|s| s.items.len() == 6));

        let reordered = baseline_reorder(&corpus, 3, 3).unwrap();
        for seq in reordered.sequences().iter().filter(|s| matches!(s.origin, Origin::Generated(_))) {
            let orig = corpus
                .sequences()
                .iter()
                .find(|s| s.user == seq.user && s.origin == Origin::Original)
                .unwrap();
            let mut a = seq.items.clone();
            let mut b = orig.items.clone();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b, "reorder must preserve the item multiset");
        }
    }
}
