//! Steady-state and transient analysis of a [`Ctmc`], measure evaluation
//! and parameter sweeps.

mod steady;
mod transient;

pub use steady::{check_ergodic, residual, steady_state};
pub use transient::{poisson_weights, transient};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::statespace::{eval_measure_predicate, Ctmc, ResolvedMeasure};

/// Below this many states the direct method is used by default.
pub const DIRECT_THRESHOLD: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    /// Direct below [`DIRECT_THRESHOLD`] states, iterative above.
    Auto,
    /// Sparse LU factorization.
    Direct,
    /// Gauss–Seidel sweeps.
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Bound on the max-norm of πQ.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Truncation error of uniformization.
    pub epsilon: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { method: SolverMethod::Auto, tolerance: 1e-12, max_iterations: 1_000_000, epsilon: 1e-10 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParams(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParams(format!("epsilon must be in (0,1), got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParams("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!(
            "method={:?} tolerance={} max_iterations={} epsilon={}",
            self.method, self.tolerance, self.max_iterations, self.epsilon
        )
    }
}

/// Probabilities aligned with the indices of a [`Ctmc`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(pub Vec<f64>);

impl ProbabilityVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Clips to [0, 1] and rescales to sum one.
    pub(crate) fn normalized(mut v: Vec<f64>) -> Self {
        for x in &mut v {
            *x = x.clamp(0.0, 1.0);
        }
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            for x in &mut v {
                *x /= s;
            }
        }
        ProbabilityVector(v)
    }
}

/// Probability mass of the states where the predicate holds.
pub fn eval_measure(m: &ResolvedMeasure, ctmc: &Ctmc, pi: &ProbabilityVector) -> f64 {
    ctmc.states
        .iter()
        .zip(&pi.0)
        .filter(|(g, _)| eval_measure_predicate(m, g))
        .map(|(_, p)| p)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Measure value at this point, or why the point failed.
    pub result: std::result::Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub parameter: String,
    pub measure: String,
    pub solver: SolverConfig,
    pub rows: Vec<SweepRow>,
}

/// Evaluates `point` at every value in parallel. `point` rebuilds the model
/// for its value; failures are recorded per row. Rows come back sorted by
/// value.
pub fn sweep<F>(parameter: &str, measure: &str, values: &[f64], cfg: &SolverConfig, point: F) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if values.is_empty() {
        return Err(Error::InvalidParams("sweep needs at least one value".into()));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidParams(format!("sweep values must be positive, got {v}")));
    }
    let mut values = values.to_vec();
    values.sort_by(f64::total_cmp);
    let rows = values
        .par_iter()
        .map(|&value| SweepRow { value, result: point(value).map_err(|e| e.to_string()) })
        .collect();
    Ok(SweepResult { parameter: parameter.to_string(), measure: measure.to_string(), solver: *cfg, rows })
}

/// `n` log-spaced points from `from` to `to` inclusive.
pub fn log_space(from: f64, to: f64, n: usize) -> Result<Vec<f64>> {
    if !(from > 0.0 && to > 0.0 && from.is_finite() && to.is_finite()) || n == 0 {
        return Err(Error::InvalidParams(format!("invalid log grid {from}..{to} with {n} points")));
    }
    if n == 1 {
        return Ok(vec![from]);
    }
    let (a, b) = (from.log10(), to.log10());
    Ok((0..n)
        .map(|k| {
            if k == 0 {
                from
            } else if k == n - 1 {
                to
            } else {
                10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)
            }
        })
        .collect())
}
