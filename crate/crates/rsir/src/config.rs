//! Experiment configuration.
//!
//! Configs are line-oriented text with dotted keys (`gen.tau = 20`, `#`
//! comments), diff-friendly for experiment provenance. Flags override file
//! values; the effective config (after overrides) can be serialized back in
//! a fixed key order, and re-running from that file reproduces the run.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::analysis::ApEnConfig;
use crate::backbone::{BackboneKind, BackboneSpec, TrainConfig};
use crate::corpus::NoiseConfig;
use crate::error::{Error, Result};
use crate::generator::GenerationConfig;
use crate::pipeline::{RetrievalConfig, RsirConfig, RsirVariant};
use crate::retrieval::BackendChoice;

/// Everything a command needs, resolved.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    /// 0 uses the default thread count.
    pub workers: usize,
    pub min_core: usize,
    pub backbone: BackboneSpec,
    pub teacher: BackboneSpec,
    pub train: TrainConfig,
    pub gen: GenerationConfig,
    pub iterations: usize,
    pub variant: RsirVariant,
    pub retrieval: RetrievalConfig,
    pub noise: NoiseConfig,
    pub eval_ks: Vec<usize>,
    pub apen: ApEnConfig,
    /// Keys explicitly set by file or flag; unset seeds inherit the master.
    set_keys: HashSet<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: None,
            out: PathBuf::from("runs/out"),
            seed: 42,
            workers: 0,
            min_core: 5,
            backbone: BackboneSpec::default(),
            teacher: BackboneSpec {
                kind: BackboneKind::Markov,
                ..BackboneSpec::default()
            },
            train: TrainConfig::default(),
            gen: GenerationConfig::default(),
            iterations: 1,
            variant: RsirVariant::Retrain,
            retrieval: RetrievalConfig::default(),
            noise: NoiseConfig { eta: 0.0, seed: 0 },
            eval_ks: vec![10, 20],
            apen: ApEnConfig::default(),
            set_keys: HashSet::new(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("key {key}: cannot parse {value:?}")))
}

fn parse_kind(key: &str, value: &str) -> Result<BackboneKind> {
    match value.trim() {
        "seq_emb" => Ok(BackboneKind::SeqEmb),
        "markov" => Ok(BackboneKind::Markov),
        other => Err(Error::Config(format!(
            "key {key}: expected seq_emb or markov, got {other:?}"
        ))),
    }
}

impl ExperimentConfig {
    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "dataset" => self.dataset = Some(PathBuf::from(v)),
            "out" => self.out = PathBuf::from(v),
            "seed" => self.seed = parse_num(key, v)?,
            "workers" => self.workers = parse_num(key, v)?,
            "min_core" => self.min_core = parse_num(key, v)?,
            "backbone.kind" => self.backbone.kind = parse_kind(key, v)?,
            "backbone.dim" => self.backbone.dim = parse_num(key, v)?,
            "backbone.gamma" => self.backbone.gamma = parse_num(key, v)?,
            "backbone.alpha" => self.backbone.alpha = parse_num(key, v)?,
            "teacher.kind" => self.teacher.kind = parse_kind(key, v)?,
            "teacher.dim" => self.teacher.dim = parse_num(key, v)?,
            "teacher.gamma" => self.teacher.gamma = parse_num(key, v)?,
            "teacher.alpha" => self.teacher.alpha = parse_num(key, v)?,
            "train.epochs" => self.train.epochs = parse_num(key, v)?,
            "train.learning_rate" => self.train.learning_rate = parse_num(key, v)?,
            "train.negatives" => self.train.negatives = parse_num(key, v)?,
            "train.patience" => self.train.patience = parse_num(key, v)?,
            "train.batch_seed" => self.train.batch_seed = parse_num(key, v)?,
            "gen.tau" => self.gen.tau = parse_num(key, v)?,
            "gen.m" => self.gen.trials = parse_num(key, v)?,
            "gen.p" => self.gen.exploit_p = parse_num(key, v)?,
            "gen.top_k" => self.gen.top_k = parse_num(key, v)?,
            "gen.max_len" => self.gen.max_len = parse_num(key, v)?,
            "gen.min_len" => self.gen.min_len = parse_num(key, v)?,
            "gen.explore_pool_size" => self.gen.explore_pool_size = parse_num(key, v)?,
            "gen.seed" => self.gen.seed = parse_num(key, v)?,
            "rsir.iterations" => self.iterations = parse_num(key, v)?,
            "rsir.variant" => {
                self.variant = match v {
                    "retrain" => RsirVariant::Retrain,
                    "fine_tune" => RsirVariant::FineTune,
                    other => {
                        return Err(Error::Config(format!(
                            "key {key}: expected retrain or fine_tune, got {other:?}"
                        )))
                    }
                }
            }
            "retrieval.backend" => {
                self.retrieval.backend = match v {
                    "exact" => BackendChoice::Exact,
                    "clustered" => BackendChoice::Clustered,
                    other => {
                        return Err(Error::Config(format!(
                            "key {key}: expected exact or clustered, got {other:?}"
                        )))
                    }
                }
            }
            "retrieval.clusters" => self.retrieval.clusters = parse_num(key, v)?,
            "retrieval.top_c" => self.retrieval.top_c = parse_num(key, v)?,
            "retrieval.kmeans_iters" => self.retrieval.kmeans_iters = parse_num(key, v)?,
            "noise.eta" => self.noise.eta = parse_num(key, v)?,
            "noise.seed" => self.noise.seed = parse_num(key, v)?,
            "eval.ks" => {
                let ks: Result<Vec<usize>> =
                    v.split(',').map(|s| parse_num::<usize>(key, s)).collect();
                let ks = ks?;
                if ks.is_empty() {
                    return Err(Error::Config("eval.ks must not be empty".into()));
                }
                self.eval_ks = ks;
            }
            "apen.m" => self.apen.embed_m = parse_num(key, v)?,
            "apen.r" => self.apen.tolerance = parse_num(key, v)?,
            unknown => return Err(Error::Config(format!("unknown key {unknown:?}"))),
        }
        self.set_keys.insert(key.to_string());
        Ok(())
    }

    /// Parse a config file body. All unknown keys are reported together.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut offending = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value`, got {line:?}",
                    idx + 1
                )));
            };
            match self.set(key.trim(), value) {
                Ok(()) => {}
                Err(Error::Config(msg)) if msg.starts_with("unknown key") => {
                    offending.push(key.trim().to_string());
                }
                Err(e) => return Err(e),
            }
        }
        if !offending.is_empty() {
            return Err(Error::Config(format!(
                "unknown keys: {}",
                offending.join(", ")
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        let text = std::fs::read_to_string(path)?;
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Fill derived defaults: sub-seeds inherit the master seed unless they
    /// were set explicitly.
    pub fn resolve(&mut self) {
        if !self.set_keys.contains("gen.seed") {
            self.gen.seed = self.seed;
        }
        if !self.set_keys.contains("noise.seed") {
            self.noise.seed = self.seed;
        }
    }

    /// Serialize every key in canonical order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        if let Some(d) = &self.dataset {
            push("dataset", d.display().to_string());
        }
        push("out", self.out.display().to_string());
        push("seed", self.seed.to_string());
        push("workers", self.workers.to_string());
        push("min_core", self.min_core.to_string());
        push("backbone.kind", self.backbone.kind.to_string());
        push("backbone.dim", self.backbone.dim.to_string());
        push("backbone.gamma", format!("{}", self.backbone.gamma));
        push("backbone.alpha", format!("{}", self.backbone.alpha));
        push("teacher.kind", self.teacher.kind.to_string());
        push("teacher.dim", self.teacher.dim.to_string());
        push("teacher.gamma", format!("{}", self.teacher.gamma));
        push("teacher.alpha", format!("{}", self.teacher.alpha));
        push("train.epochs", self.train.epochs.to_string());
        push("train.learning_rate", format!("{}", self.train.learning_rate));
        push("train.negatives", self.train.negatives.to_string());
        push("train.patience", self.train.patience.to_string());
        push("train.batch_seed", self.train.batch_seed.to_string());
        push("gen.tau", self.gen.tau.to_string());
        push("gen.m", self.gen.trials.to_string());
        push("gen.p", format!("{}", self.gen.exploit_p));
        push("gen.top_k", self.gen.top_k.to_string());
        push("gen.max_len", self.gen.max_len.to_string());
        push("gen.min_len", self.gen.min_len.to_string());
        push("gen.explore_pool_size", self.gen.explore_pool_size.to_string());
        push("gen.seed", self.gen.seed.to_string());
        push("rsir.iterations", self.iterations.to_string());
        push("rsir.variant", self.variant.to_string());
        push("retrieval.backend", self.retrieval.backend.to_string());
        push("retrieval.clusters", self.retrieval.clusters.to_string());
        push("retrieval.top_c", self.retrieval.top_c.to_string());
        push("retrieval.kmeans_iters", self.retrieval.kmeans_iters.to_string());
        push("noise.eta", format!("{}", self.noise.eta));
        push("noise.seed", self.noise.seed.to_string());
        push(
            "eval.ks",
            self.eval_ks
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        push("apen.m", self.apen.embed_m.to_string());
        push("apen.r", format!("{}", self.apen.tolerance));
        out
    }

    /// Loop configuration view.
    pub fn rsir_config(&self) -> RsirConfig {
        RsirConfig {
            iterations: self.iterations,
            variant: self.variant,
            backbone: self.backbone,
            train: self.train,
            gen: self.gen,
            retrieval: self.retrieval,
            eval_ks: self.eval_ks.clone(),
            apen: self.apen,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rsir_config().validate()?;
        self.noise.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_every_key() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(
            "dataset = data/x.tsv\ngen.tau = 20\ngen.p = 0.4\nrsir.variant = fine_tune\nseed = 7\neval.ks = 5,10\n",
        )
        .unwrap();
        cfg.resolve();
        let text = cfg.to_text();
        let mut again = ExperimentConfig::default();
        again.apply_text(&text).unwrap();
        again.resolve();
        assert_eq!(text, again.to_text());
        assert_eq!(again.gen.tau, 20);
        assert_eq!(again.variant, RsirVariant::FineTune);
        assert_eq!(again.eval_ks, vec![5, 10]);
    }

    #[test]
    fn unknown_keys_listed_together() {
        let mut cfg = ExperimentConfig::default();
        let err = cfg.apply_text("gen.tau = 3\nbogus.key = 1\nweird = 2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus.key") && msg.contains("weird"), "{msg}");
    }

    #[test]
    fn malformed_value_is_config_error() {
        let mut cfg = ExperimentConfig::default();
        assert!(matches!(cfg.set("gen.tau", "lots"), Err(Error::Config(_))));
    }

    #[test]
    fn seeds_inherit_master_unless_set() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("seed", "99").unwrap();
        cfg.resolve();
        assert_eq!(cfg.gen.seed, 99);
        assert_eq!(cfg.noise.seed, 99);

        let mut cfg = ExperimentConfig::default();
        cfg.set("seed", "99").unwrap();
        cfg.set("gen.seed", "7").unwrap();
        cfg.resolve();
        assert_eq!(cfg.gen.seed, 7);
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("# a comment\n\n  gen.tau = 9 \n").unwrap();
        assert_eq!(cfg.gen.tau, 9);
    }
}
