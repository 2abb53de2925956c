//! Error-dynamics simulator for the self-training recursion.
//!
//! The per-iteration generalization error of a model trained on a
//! `(1 - lambda) : lambda` mix of original and generated data obeys
//!
//! ```text
//! e_{k+1} = (1 - lambda) e0 + lambda [ (1 - p) rho e_k + p e_max ]
//! ```
//!
//! where `rho < 1` contracts error through valid generated data and `p` is
//! the fidelity leakage rate letting off-manifold noise through. The bound is
//! simulated as an equality (worst case), which turns its corollaries into
//! testable identities: a closed-form fixed point at `p = 0`, a breakdown
//! leakage threshold above which a step increases error, and an irreducible
//! noise floor for `p > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the recursion.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorDynamicsParams {
    /// Generated-data mixing ratio in [0, 1].
    pub lambda: f64,
    /// Contraction rate in (0, 1).
    pub rho: f64,
    /// Fidelity leakage rate in [0, 1].
    pub p_tilde: f64,
    /// Baseline error of training on original data alone.
    pub e0: f64,
    /// Maximum bounded loss.
    pub e_max: f64,
}

impl ErrorDynamicsParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Domain("lambda must be in [0, 1]".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Domain("rho must be in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.p_tilde) {
            return Err(Error::Domain("p_tilde must be in [0, 1]".into()));
        }
        if self.e0 < 0.0 || self.e_max < self.e0 {
            return Err(Error::Domain("require 0 <= e0 <= e_max".into()));
        }
        Ok(())
    }
}

/// One application of the recursion.
pub fn step(params: &ErrorDynamicsParams, e_k: f64) -> f64 {
    (1.0 - params.lambda) * params.e0
        + params.lambda
            * ((1.0 - params.p_tilde) * params.rho * e_k + params.p_tilde * params.e_max)
}

/// Qualitative shape of a simulated series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    MonotoneDecrease,
    Plateau,
    Divergence,
}

/// An iterated error series with its qualitative classification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Simulation {
    /// `steps + 1` values, starting at the initial error.
    pub series: Vec<f64>,
    pub trend: Trend,
    /// True when the last two values differ by less than 1e-12.
    pub converged: bool,
}

/// Iterate the recursion `steps` times from `e_start`.
pub fn simulate(params: &ErrorDynamicsParams, e_start: f64, steps: usize) -> Result<Simulation> {
    params.validate()?;
    if steps == 0 {
        return Err(Error::Domain("simulate needs steps >= 1".into()));
    }
    let mut series = Vec::with_capacity(steps + 1);
    series.push(e_start);
    let mut e = e_start;
    for _ in 0..steps {
        e = step(params, e);
        series.push(e);
    }
    let first = series[0];
    let last = *series.last().unwrap();
    let converged = (series[series.len() - 1] - series[series.len() - 2]).abs() < 1e-12;
    let trend = if (last - first).abs() < 1e-12 {
        Trend::Plateau
    } else if last < first {
        Trend::MonotoneDecrease
    } else {
        Trend::Divergence
    };
    Ok(Simulation {
        series,
        trend,
        converged,
    })
}

/// Closed-form limit of the zero-leakage recursion:
/// `E* = (1 - lambda) e0 / (1 - lambda rho)`. Below `e0` whenever any
/// generated data is mixed in.
pub fn fixed_point(params: &ErrorDynamicsParams) -> Result<f64> {
    params.validate()?;
    if params.p_tilde != 0.0 {
        return Err(Error::Domain("fixed_point requires p_tilde = 0".into()));
    }
    let contraction = params.lambda * params.rho;
    if contraction >= 1.0 {
        return Err(Error::Domain("fixed_point requires lambda * rho < 1".into()));
    }
    Ok((1.0 - params.lambda) * params.e0 / (1.0 - contraction))
}

/// Largest leakage rate at which a step from `e_k` does not increase error:
/// `[e_k (1 - lambda rho) - (1 - lambda) e0] / [lambda (e_max - rho e_k)]`.
/// May be negative, meaning no leakage level permits improvement there.
pub fn breakdown_threshold(params: &ErrorDynamicsParams, e_k: f64) -> Result<f64> {
    params.validate()?;
    if params.lambda <= 0.0 {
        return Err(Error::Domain("breakdown threshold needs lambda > 0".into()));
    }
    let denom = params.lambda * (params.e_max - params.rho * e_k);
    if denom <= 0.0 {
        return Err(Error::Domain("breakdown threshold needs e_max > rho * e_k".into()));
    }
    Ok((e_k * (1.0 - params.lambda * params.rho) - (1.0 - params.lambda) * params.e0) / denom)
}
