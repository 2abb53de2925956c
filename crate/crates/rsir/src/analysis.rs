//! Data-quality analytics.
//!
//! Sequence complexity is measured by approximate entropy over item indices:
//! windows of length `m` are compared under the Chebyshev distance with
//! tolerance `r` (zero by default, i.e. exact component equality, since
//! nearby item ids carry no similarity), and
//!
//! ```text
//! ApEn(m, r) = Phi_m(r) - Phi_{m+1}(r)
//! Phi_m(r)   = mean_k ln( |{ j : d(w_k, w_j) <= r }| / (N - m + 1) )
//! ```
//!
//! The reciprocal `1/ApEn` serves as the per-sequence information score and
//! is averaged into a dataset-level figure; sequences with zero entropy have
//! no reciprocal and are excluded.

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::pipeline::IterationReport;

/// Approximate-entropy parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ApEnConfig {
    /// Window (embedding) length; unrelated to generation trial counts.
    pub embed_m: usize,
    /// Chebyshev match tolerance.
    pub tolerance: f64,
}

impl Default for ApEnConfig {
    fn default() -> Self {
        ApEnConfig {
            embed_m: 2,
            tolerance: 0.0,
        }
    }
}

fn phi(seq: &[u32], m: usize, r: f64) -> f64 {
    let n = seq.len();
    let windows = n - m + 1;
    let mut total = 0.0;
    for k in 0..windows {
        let mut matches = 0usize;
        'next: for j in 0..windows {
            for q in 0..m {
                if (f64::from(seq[k + q]) - f64::from(seq[j + q])).abs() > r {
                    continue 'next;
                }
            }
            matches += 1;
        }
        total += (matches as f64 / windows as f64).ln();
    }
    total / windows as f64
}

/// Approximate entropy of one sequence. Requires `len >= embed_m + 1`.
pub fn apen(sequence: &[u32], cfg: &ApEnConfig) -> Result<f64> {
    if cfg.embed_m == 0 {
        return Err(Error::Config("apen embed_m must be >= 1".into()));
    }
    if sequence.len() < cfg.embed_m + 1 {
        return Err(Error::Contract(format!(
            "apen needs length >= {}, got {}",
            cfg.embed_m + 1,
            sequence.len()
        )));
    }
    Ok(phi(sequence, cfg.embed_m, cfg.tolerance) - phi(sequence, cfg.embed_m + 1, cfg.tolerance))
}

/// Reciprocal entropy, the per-sequence information score. `None` when the
/// entropy is exactly zero (constant-like sequences).
pub fn apen_prime(sequence: &[u32], cfg: &ApEnConfig) -> Result<Option<f64>> {
    let value = apen(sequence, cfg)?;
    if value == 0.0 {
        Ok(None)
    } else {
        Ok(Some(1.0 / value))
    }
}

/// Mean reciprocal entropy over all qualifying sequences of the corpus
/// (original and generated alike). Errors when nothing qualifies.
pub fn dataset_information(corpus: &Corpus, cfg: &ApEnConfig) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for seq in corpus.sequences() {
        if seq.items.len() < cfg.embed_m + 1 {
            continue;
        }
        if let Some(v) = apen_prime(&seq.items, cfg)? {
            total += v;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Contract(
            "dataset_information: no sequence qualifies for the entropy measure".into(),
        ));
    }
    Ok(total / n as f64)
}

/// Density per iteration, plus relative change against the first report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityTrajectory {
    pub points: Vec<(u32, f64)>,
    /// `(density_k - density_0) / density_0` per iteration.
    pub relative_change: Vec<f64>,
}

/// Extract the density trajectory from a report series.
pub fn density_trajectory(reports: &[IterationReport]) -> Result<DensityTrajectory> {
    if reports.is_empty() {
        return Err(Error::Contract("density_trajectory: no reports".into()));
    }
    let points: Vec<(u32, f64)> = reports.iter().map(|r| (r.k, r.stats.density)).collect();
    let base = points[0].1;
    let relative_change = points.iter().map(|(_, d)| (d - base) / base).collect();
    Ok(DensityTrajectory {
        points,
        relative_change,
    })
}
