//! Command implementations behind the `rsir` binary.
//!
//! Every command is seed-deterministic end to end: it validates the config,
//! runs inside the configured worker pool, writes a structured JSON result
//! plus flat CSV artifacts into the output directory alongside the effective
//! config, and prints a short human summary.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backbone::{Backbone, RankingModel};
use crate::config::ExperimentConfig;
use crate::corpus::{build_corpus, parse_interactions, Corpus, CorpusStats, NoiseConfig};
use crate::dynamics::{self, ErrorDynamicsParams, Trend};
use crate::error::{Error, Result};
use crate::eval::{evaluate, MetricsReport};
use crate::generator::{generate_dataset, sequences_to_log, GenerationStats};
use crate::pipeline::{
    self, evaluate_validation, run_rsir, trajectory_csv, weak_to_strong, IterationReport,
    WeakToStrongReport,
};
use crate::report::{key_value_block, write_json, write_text};
use crate::synth::{synth_world, SynthConfig};

/// Run a closure inside a rayon pool of the requested size (0 = default).
/// Deterministic code paths make the result independent of the choice.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool")
        .install(f)
}

/// Read, parse and core-filter the configured dataset.
pub fn load_corpus(cfg: &ExperimentConfig) -> Result<Corpus> {
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("no dataset path configured".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let interactions = parse_interactions(&text)?;
    build_corpus(&interactions, cfg.min_core)
}

fn write_effective_config(cfg: &ExperimentConfig) -> Result<()> {
    write_text(&cfg.out, "effective_config.txt", &cfg.to_text())?;
    Ok(())
}

fn stats_pairs(stats: &CorpusStats) -> Vec<(&'static str, String)> {
    vec![
        ("users", stats.users.to_string()),
        ("items", stats.items.to_string()),
        ("interactions", stats.interactions.to_string()),
        ("avg_length", format!("{:.6}", stats.avg_length)),
        ("sparsity", format!("{:.6}", stats.sparsity)),
        ("density", format!("{:.6}", stats.density)),
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestOutput {
    pub stats: CorpusStats,
}

/// Ingest the dataset and report its statistics.
pub fn cmd_ingest(cfg: &ExperimentConfig) -> Result<IngestOutput> {
    let corpus = load_corpus(cfg)?;
    let stats = corpus.stats();
    let block = key_value_block(&stats_pairs(&stats));
    write_effective_config(cfg)?;
    write_text(&cfg.out, "stats.txt", &block)?;
    write_json(&cfg.out, "ingest.json", &IngestOutput { stats })?;
    print!("{block}");
    Ok(IngestOutput { stats })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutput {
    pub checkpoint: String,
    pub val_metrics: MetricsReport,
    pub test_metrics: MetricsReport,
    pub train_seconds: f64,
}

/// Train the configured backbone and save a checkpoint.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let split = corpus.split_leave_one_out();
    let started = Instant::now();
    let model = with_workers(cfg.workers, || {
        cfg.backbone
            .train(&split, &cfg.train, pipeline::train_seed(cfg.seed, 0))
    })?;
    let train_seconds = started.elapsed().as_secs_f64();
    let (val_metrics, test_metrics) = with_workers(cfg.workers, || {
        let val = evaluate_validation(&model, &split, &cfg.eval_ks);
        evaluate(&model, &split, &cfg.eval_ks).map(|test| (val, test))
    })?;

    let ckpt = cfg.out.join("model.ckpt");
    crate::report::ensure_out_dir(&cfg.out)?;
    model.save(&ckpt)?;
    let out = TrainOutput {
        checkpoint: ckpt.display().to_string(),
        val_metrics,
        test_metrics,
        train_seconds,
    };
    write_effective_config(cfg)?;
    write_json(&cfg.out, "train.json", &out)?;
    print_metrics("test", &out.test_metrics);
    println!("checkpoint = {}", out.checkpoint);
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateOutput {
    pub stats: GenerationStats,
    pub generated_file: String,
}

/// Generate fidelity-controlled sequences with a trained model (loaded from
/// `model_path`, or trained fresh when absent) and export them.
pub fn cmd_generate(cfg: &ExperimentConfig, model_path: Option<&Path>) -> Result<GenerateOutput> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let model = match model_path {
        Some(p) => Backbone::load(p)?,
        None => {
            let split = corpus.split_leave_one_out();
            with_workers(cfg.workers, || {
                cfg.backbone
                    .train(&split, &cfg.train, pipeline::train_seed(cfg.seed, 0))
            })?
        }
    };
    if model.vocab_size() != corpus.n_items() {
        return Err(Error::Contract(format!(
            "model vocabulary {} does not match corpus items {}",
            model.vocab_size(),
            corpus.n_items()
        )));
    }
    let backend = pipeline::build_backend(&cfg.retrieval, &model, cfg.seed)?;
    let (generated, stats) = with_workers(cfg.workers, || {
        generate_dataset(&model, &corpus, &cfg.gen, &backend, corpus.iteration_tag())
    });
    let log = sequences_to_log(&corpus, &generated);
    write_effective_config(cfg)?;
    let path = write_text(&cfg.out, "generated.tsv", &log)?;
    let out = GenerateOutput {
        stats,
        generated_file: path.display().to_string(),
    };
    write_json(&cfg.out, "generate.json", &out)?;
    println!(
        "generated {} sequences over {} trials (mean effective length {:.2}, acceptance {:.3})",
        stats.accepted_sequences, stats.trials, stats.mean_effective_length, stats.acceptance_rate
    );
    println!("written to {}", out.generated_file);
    Ok(out)
}

/// Evaluate a checkpoint on the dataset's held-out targets.
pub fn cmd_eval(cfg: &ExperimentConfig, model_path: &Path) -> Result<MetricsReport> {
    let corpus = load_corpus(cfg)?;
    let split = corpus.split_leave_one_out();
    let model = Backbone::load(model_path)?;
    if model.vocab_size() != corpus.n_items() {
        return Err(Error::Contract(format!(
            "model vocabulary {} does not match corpus items {}",
            model.vocab_size(),
            corpus.n_items()
        )));
    }
    let report = with_workers(cfg.workers, || evaluate(&model, &split, &cfg.eval_ks))?;
    write_effective_config(cfg)?;
    write_json(&cfg.out, "eval.json", &report)?;
    print_metrics("test", &report);
    Ok(report)
}

/// Run the full self-improvement loop and emit the trajectory.
pub fn cmd_rsir(cfg: &ExperimentConfig) -> Result<Vec<IterationReport>> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let rsir_cfg = cfg.rsir_config();
    let reports = with_workers(cfg.workers, || run_rsir(&rsir_cfg, &corpus))?;
    write_effective_config(cfg)?;
    write_json(&cfg.out, "rsir.json", &reports)?;
    write_text(&cfg.out, "trajectory.csv", &trajectory_csv(&reports))?;
    for r in &reports {
        let m10 = r.test_metrics.at_k(10);
        println!(
            "k={} sequences={} density={:.6} ndcg@10={} recall@10={} ({} generated, {:.1}s train, {:.1}s gen)",
            r.k,
            r.n_sequences,
            r.stats.density,
            m10.map_or("-".into(), |m| format!("{:.4}", m.ndcg)),
            m10.map_or("-".into(), |m| format!("{:.4}", m.recall)),
            r.gen_stats.accepted_sequences,
            r.train_seconds,
            r.gen_seconds,
        );
    }
    Ok(reports)
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseSweepRow {
    pub eta: f64,
    pub base: MetricsReport,
    pub augmented: MetricsReport,
}

/// Corrupt the corpus at each noise ratio, then compare a plain model with
/// one self-improvement round on the corrupted data.
pub fn cmd_noise_sweep(cfg: &ExperimentConfig, etas: &[f64]) -> Result<Vec<NoiseSweepRow>> {
    cfg.validate()?;
    if etas.is_empty() {
        return Err(Error::Config("noise sweep needs at least one eta".into()));
    }
    let corpus = load_corpus(cfg)?;
    let mut rows = Vec::new();
    for &eta in etas {
        let noise = NoiseConfig {
            eta,
            seed: cfg.noise.seed,
        };
        let noisy = corpus.inject_noise(&noise)?;
        let w2s = with_workers(cfg.workers, || {
            weak_to_strong(
                &cfg.backbone,
                &cfg.backbone,
                &noisy,
                &cfg.train,
                &cfg.gen,
                &cfg.eval_ks,
                cfg.seed,
            )
        })?;
        println!(
            "eta={eta:.2} base ndcg@10={:.4} augmented ndcg@10={:.4}",
            w2s.baseline.at_k(10).map_or(f64::NAN, |m| m.ndcg),
            w2s.transferred.at_k(10).map_or(f64::NAN, |m| m.ndcg),
        );
        rows.push(NoiseSweepRow {
            eta,
            base: w2s.baseline,
            augmented: w2s.transferred,
        });
    }
    let mut csv = String::from("eta,base_ndcg@10,aug_ndcg@10,base_recall@10,aug_recall@10\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            r.eta,
            r.base.at_k(10).map_or(f64::NAN, |m| m.ndcg),
            r.augmented.at_k(10).map_or(f64::NAN, |m| m.ndcg),
            r.base.at_k(10).map_or(f64::NAN, |m| m.recall),
            r.augmented.at_k(10).map_or(f64::NAN, |m| m.recall),
        ));
    }
    write_effective_config(cfg)?;
    write_text(&cfg.out, "noise_sweep.csv", &csv)?;
    write_json(&cfg.out, "noise_sweep.json", &rows)?;
    Ok(rows)
}

/// Teacher/student transfer: train the configured teacher, generate with it,
/// train the student on the augmented data.
pub fn cmd_weak_to_strong(cfg: &ExperimentConfig) -> Result<WeakToStrongReport> {
    cfg.validate()?;
    let corpus = load_corpus(cfg)?;
    let report = with_workers(cfg.workers, || {
        weak_to_strong(
            &cfg.teacher,
            &cfg.backbone,
            &corpus,
            &cfg.train,
            &cfg.gen,
            &cfg.eval_ks,
            cfg.seed,
        )
    })?;
    write_effective_config(cfg)?;
    write_json(&cfg.out, "weak_to_strong.json", &report)?;
    println!("teacher = {}, student = {}", report.teacher, report.student);
    for d in report.deltas.iter().filter(|d| d.k == 10) {
        println!(
            "{}@10: base {:.4} -> transferred {:.4} (delta {:+.4})",
            d.metric, d.baseline, d.transferred, d.delta
        );
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryOutput {
    pub params: ErrorDynamicsParams,
    pub e_start: f64,
    pub series: Vec<f64>,
    pub trend: Trend,
    pub converged: bool,
    /// Closed-form limit, zero-leakage case only.
    pub fixed_point: Option<f64>,
    /// Breakdown leakage threshold evaluated at the starting error.
    pub breakdown_at_start: Option<f64>,
}

/// Simulate the error recursion and report its landmarks.
pub fn cmd_theory(
    cfg: &ExperimentConfig,
    params: &ErrorDynamicsParams,
    e_start: f64,
    steps: usize,
) -> Result<TheoryOutput> {
    let sim = dynamics::simulate(params, e_start, steps)?;
    let fixed_point = if params.p_tilde == 0.0 {
        Some(dynamics::fixed_point(params)?)
    } else {
        None
    };
    let breakdown_at_start = dynamics::breakdown_threshold(params, e_start).ok();
    let out = TheoryOutput {
        params: *params,
        e_start,
        series: sim.series.clone(),
        trend: sim.trend,
        converged: sim.converged,
        fixed_point,
        breakdown_at_start,
    };
    let mut csv = String::from("k,error\n");
    for (k, e) in out.series.iter().enumerate() {
        csv.push_str(&format!("{k},{e:.12}\n"));
    }
    write_effective_config(cfg)?;
    write_text(&cfg.out, "error_series.csv", &csv)?;
    write_json(&cfg.out, "theory.json", &out)?;
    if let Some(fp) = out.fixed_point {
        println!("fixed point = {fp:.6}");
    }
    if let Some(b) = out.breakdown_at_start {
        println!("breakdown threshold at e_start = {b:.6}");
    }
    println!(
        "final error after {} steps = {:.9} ({:?})",
        steps,
        out.series.last().unwrap(),
        out.trend
    );
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridRow {
    pub tau: usize,
    pub p: f64,
    pub m: usize,
    pub generated: usize,
    pub ndcg10: f64,
    pub recall10: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridOutput {
    pub base_ndcg10: f64,
    pub base_recall10: f64,
    pub rows: Vec<GridRow>,
}

/// Sweep (tau, p, m): the base model is trained once, each combination
/// generates its own augmentation round and trains a successor on it.
pub fn cmd_grid(
    cfg: &ExperimentConfig,
    taus: &[usize],
    ps: &[f64],
    ms: &[usize],
) -> Result<GridOutput> {
    cfg.validate()?;
    if taus.is_empty() || ps.is_empty() || ms.is_empty() {
        return Err(Error::Config("grid lists must not be empty".into()));
    }
    let corpus = load_corpus(cfg)?;
    let split0 = corpus.split_leave_one_out();
    let out: GridOutput = with_workers(cfg.workers, || -> Result<GridOutput> {
        let base = cfg
            .backbone
            .train(&split0, &cfg.train, pipeline::train_seed(cfg.seed, 0))?;
        let base_metrics = evaluate(&base, &split0, &[10])?;
        let base_at = base_metrics.at_k(10).unwrap();
        let mut rows = Vec::new();
        for &tau in taus {
            for &p in ps {
                for &m in ms {
                    let gen = crate::generator::GenerationConfig {
                        tau,
                        exploit_p: p,
                        trials: m,
                        ..cfg.gen
                    };
                    gen.validate()?;
                    let backend = pipeline::build_backend(&cfg.retrieval, &base, cfg.seed)?;
                    let (generated, _) = generate_dataset(&base, &corpus, &gen, &backend, 0);
                    let n_generated = generated.len();
                    let (augmented, _) = corpus.expand(generated);
                    let split1 = augmented.split_leave_one_out();
                    let successor = cfg.backbone.train(
                        &split1,
                        &cfg.train,
                        pipeline::train_seed(cfg.seed, 1),
                    )?;
                    let metrics = evaluate(&successor, &split1, &[10])?;
                    let at = metrics.at_k(10).unwrap();
                    println!(
                        "tau={tau} p={p} m={m}: generated={n_generated} ndcg@10={:.4} recall@10={:.4}",
                        at.ndcg, at.recall
                    );
                    rows.push(GridRow {
                        tau,
                        p,
                        m,
                        generated: n_generated,
                        ndcg10: at.ndcg,
                        recall10: at.recall,
                    });
                }
            }
        }
        Ok(GridOutput {
            base_ndcg10: base_at.ndcg,
            base_recall10: base_at.recall,
            rows,
        })
    })?;
    let mut csv = String::from("tau,p,m,generated,ndcg@10,recall@10\n");
    for r in &out.rows {
        csv.push_str(&format!(
            "{},{},{},{},{:.6},{:.6}\n",
            r.tau, r.p, r.m, r.generated, r.ndcg10, r.recall10
        ));
    }
    write_effective_config(cfg)?;
    write_text(&cfg.out, "grid.csv", &csv)?;
    write_json(&cfg.out, "grid.json", &out)?;
    println!(
        "base ndcg@10={:.4} recall@10={:.4} over {} combinations",
        out.base_ndcg10,
        out.base_recall10,
        out.rows.len()
    );
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthWorldOutput {
    pub dataset: String,
    pub n_users: usize,
    pub n_items: usize,
    pub interactions: usize,
}

/// Write a synthetic interaction world to `<out>/synthetic_world.tsv`.
pub fn cmd_synth_world(
    cfg: &ExperimentConfig,
    n_users: usize,
    n_items: usize,
    order: usize,
) -> Result<SynthWorldOutput> {
    let world = synth_world(&SynthConfig {
        n_users,
        n_items,
        order,
        seed: cfg.seed,
    })?;
    let path = write_text(&cfg.out, "synthetic_world.tsv", &world.log)?;
    let out = SynthWorldOutput {
        dataset: path.display().to_string(),
        n_users,
        n_items,
        interactions: world.log.lines().count(),
    };
    write_effective_config(cfg)?;
    write_json(&cfg.out, "synth_world.json", &out)?;
    println!(
        "world with {} users, {} items, {} interactions -> {}",
        out.n_users, out.n_items, out.interactions, out.dataset
    );
    Ok(out)
}

fn print_metrics(label: &str, report: &MetricsReport) {
    for m in &report.at {
        println!(
            "{label} @ {}: ndcg={:.4} recall={:.4} precision={:.4} f1={:.4} mrr={:.4}",
            m.k, m.ndcg, m.recall, m.precision, m.f1, m.mrr
        );
    }
}
