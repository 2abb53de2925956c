//! Command-line front end; all logic lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rsir::cli;
use rsir::config::ExperimentConfig;
use rsir::dynamics::ErrorDynamicsParams;

#[derive(Parser)]
#[command(
    name = "rsir",
    about = "Recursive self-improving data augmentation for sequential recommenders",
    version
)]
struct Cli {
    /// Config file with dotted keys (see README for the key list).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; sub-seeds derive from it unless set explicitly.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = default). Results are worker-count independent.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory for results and artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Generic config override, repeatable: --set gen.tau=20
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest an interaction log and report corpus statistics.
    Ingest {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        min_core: Option<usize>,
    },
    /// Train a backbone and save a checkpoint.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Generate fidelity-controlled sequences.
    Generate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Checkpoint to generate with; trains fresh when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        tau: Option<usize>,
        /// Trials per sequence.
        #[arg(long)]
        m: Option<usize>,
        /// Exploitation probability.
        #[arg(long)]
        p: Option<f64>,
    },
    /// Evaluate a checkpoint with leave-one-out ranking metrics.
    Eval {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
    },
    /// Run the full train -> generate -> expand loop.
    Rsir {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        tau: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Compare plain vs augmented training under injected noise.
    NoiseSweep {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Comma-separated noise ratios in [0, 0.8].
        #[arg(long, value_delimiter = ',', default_value = "0.0,0.2,0.4")]
        etas: Vec<f64>,
    },
    /// Teacher/student transfer experiment.
    WeakToStrong {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Teacher backbone kind (seq_emb or markov).
        #[arg(long)]
        teacher: Option<String>,
    },
    /// Simulate the error-dynamics recursion.
    Theory {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 0.0)]
        p_tilde: f64,
        #[arg(long)]
        e0: f64,
        #[arg(long, default_value_t = 1.0)]
        e_max: f64,
        /// Initial error; defaults to e0.
        #[arg(long)]
        e_start: Option<f64>,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Sweep generation hyperparameters (tau, p, m).
    Grid {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        taus: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.0,0.5,1.0")]
        ps: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "5")]
        ms: Vec<usize>,
    },
    /// Emit a synthetic interaction world with known structure.
    SynthWorld {
        #[arg(long, default_value_t = 500)]
        users: usize,
        #[arg(long, default_value_t = 50)]
        items: usize,
        #[arg(long, default_value_t = 1)]
        order: usize,
    },
}

fn build_config(cli: &Cli) -> rsir::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for assignment in &cli.overrides {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(rsir::Error::Config(format!(
                "--set expects KEY=VALUE, got {assignment:?}"
            )));
        };
        cfg.set(key.trim(), value)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(workers) = cli.workers {
        cfg.set("workers", &workers.to_string())?;
    }
    if let Some(out) = &cli.out {
        cfg.set("out", &out.display().to_string())?;
    }
    Ok(cfg)
}

fn set_opt<T: ToString>(cfg: &mut ExperimentConfig, key: &str, value: &Option<T>) -> rsir::Result<()> {
    if let Some(v) = value {
        cfg.set(key, &v.to_string())?;
    }
    Ok(())
}

fn set_path(cfg: &mut ExperimentConfig, key: &str, value: &Option<PathBuf>) -> rsir::Result<()> {
    if let Some(p) = value {
        cfg.set(key, &p.display().to_string())?;
    }
    Ok(())
}

fn run(cli: Cli) -> rsir::Result<()> {
    let mut cfg = build_config(&cli)?;
    match &cli.command {
        Command::Ingest { dataset, min_core } => {
            set_path(&mut cfg, "dataset", dataset)?;
            set_opt(&mut cfg, "min_core", min_core)?;
            cfg.resolve();
            cli::cmd_ingest(&cfg)?;
        }
        Command::Train { dataset } => {
            set_path(&mut cfg, "dataset", dataset)?;
            cfg.resolve();
            cli::cmd_train(&cfg)?;
        }
        Command::Generate { dataset, model, tau, m, p } => {
            set_path(&mut cfg, "dataset", dataset)?;
            set_opt(&mut cfg, "gen.tau", tau)?;
            set_opt(&mut cfg, "gen.m", m)?;
            set_opt(&mut cfg, "gen.p", p)?;
            cfg.resolve();
            cli::cmd_generate(&cfg, model.as_deref())?;
        }
        Command::Eval { dataset, model } => {
            set_path(&mut cfg, "dataset", dataset)?;
            cfg.resolve();
            cli::cmd_eval(&cfg, model)?;
        }
        Command::Rsir { dataset, iterations, variant, tau, m, p } => {
            set_path(&mut cfg, "dataset", dataset)?;
            set_opt(&mut cfg, "rsir.iterations", iterations)?;
            set_opt(&mut cfg, "rsir.variant", variant)?;
            set_opt(&mut cfg, "gen.tau", tau)?;
            set_opt(&mut cfg, "gen.m", m)?;
            set_opt(&mut cfg, "gen.p", p)?;
            cfg.resolve();
            cli::cmd_rsir(&cfg)?;
        }
        Command::NoiseSweep { dataset, etas } => {
            set_path(&mut cfg, "dataset", dataset)?;
            cfg.resolve();
            cli::cmd_noise_sweep(&cfg, etas)?;
        }
        Command::WeakToStrong { dataset, teacher } => {
            set_path(&mut cfg, "dataset", dataset)?;
            set_opt(&mut cfg, "teacher.kind", teacher)?;
            cfg.resolve();
            cli::cmd_weak_to_strong(&cfg)?;
        }
        Command::Theory { lambda, rho, p_tilde, e0, e_max, e_start, steps } => {
            cfg.resolve();
            let params = ErrorDynamicsParams {
                lambda: *lambda,
                rho: *rho,
                p_tilde: *p_tilde,
                e0: *e0,
                e_max: *e_max,
            };
            cli::cmd_theory(&cfg, &params, e_start.unwrap_or(*e0), *steps)?;
        }
        Command::Grid { dataset, taus, ps, ms } => {
            set_path(&mut cfg, "dataset", dataset)?;
            cfg.resolve();
            cli::cmd_grid(&cfg, taus, ps, ms)?;
        }
        Command::SynthWorld { users, items, order } => {
            cfg.resolve();
            cli::cmd_synth_world(&cfg, *users, *items, *order)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
