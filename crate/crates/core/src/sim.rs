//! Discrete-event simulation of a stochastic transition system.
//!
//! Runs on the system before vanishing-state elimination: timed edges race
//! as competing exponentials and immediate branches are sampled, so the
//! simulator shares nothing with the elimination and solver code.
//!
//! Replication `r` draws from ChaCha8 seeded with the run seed, on stream
//! `r`. Replications run in parallel and are aggregated in index order, so
//! results do not depend on the number of worker threads.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::statespace::{eval_measure_predicate, ResolvedMeasure, StochasticTransitionSystem};

pub const RNG_NAME: &str = "ChaCha8 (seed_from_u64(seed), stream = replication index)";

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub horizon: f64,
    pub replications: usize,
    pub seed: u64,
    pub warmup: f64,
}

impl SimConfig {
    pub fn new(horizon: f64, replications: usize, seed: u64) -> Self {
        SimConfig { horizon, replications, seed, warmup: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParams(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParams("at least one replication is needed".into()));
        }
        if !(self.warmup >= 0.0 && self.warmup < self.horizon) {
            return Err(Error::InvalidParams(format!(
                "warmup must lie in [0, horizon), got {}",
                self.warmup
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEstimate {
    /// Mean fraction of [warmup, horizon] during which the measure holds.
    pub estimate: f64,
    /// Half-width of the 95% confidence interval.
    pub half_width: f64,
    /// Standard error of the estimate (sample deviation / √n).
    pub std_error: f64,
    pub replications: usize,
    pub rng: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub time: f64,
    /// (error instance, event) of the timed edge taken.
    pub cause: Option<(usize, usize)>,
    /// Tangible STS state reached.
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventTrace {
    pub initial: usize,
    pub events: Vec<TraceEvent>,
}

/// The RNG of replication `r`.
pub fn replication_rng(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

/// Settles through vanishing states by sampling immediate edges.
fn resolve(sts: &StochasticTransitionSystem, mut s: usize, rng: &mut ChaCha8Rng) -> usize {
    while !sts.states[s].is_tangible() {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = None;
        for e in sts.immediate_out(s) {
            next = Some(e.to);
            acc += e.probability;
            if u < acc {
                break;
            }
        }
        s = next.expect("vanishing state has immediate edges");
    }
    s
}

/// Holding time, cause of the edge taken, tangible state reached.
type Step = (f64, Option<(usize, usize)>, usize);

/// One step from tangible `s`, or `None` when no timed edge is enabled.
fn step(sts: &StochasticTransitionSystem, s: usize, rng: &mut ChaCha8Rng) -> Option<Step> {
    let total: f64 = sts.timed_out(s).map(|e| e.rate).sum();
    if total <= 0.0 {
        return None;
    }
    let x: f64 = Exp1.sample(rng);
    let dt = x / total;
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = None;
    for e in sts.timed_out(s) {
        chosen = Some(e);
        acc += e.rate;
        if u < acc {
            break;
        }
    }
    let e = chosen.expect("enabled edge");
    Some((dt, e.cause, resolve(sts, e.to, rng)))
}

/// Samples a trajectory up to `horizon`; events past it are not recorded.
pub fn sample_trajectory(sts: &StochasticTransitionSystem, horizon: f64, rng: &mut ChaCha8Rng) -> EventTrace {
    let mut s = resolve(sts, sts.initial, rng);
    let mut trace = EventTrace { initial: s, events: Vec::new() };
    let mut t = 0.0;
    while let Some((dt, cause, next)) = step(sts, s, rng) {
        t += dt;
        if t > horizon {
            break;
        }
        trace.events.push(TraceEvent { time: t, cause, state: next });
        s = next;
    }
    trace
}

fn interval_availability(sts: &StochasticTransitionSystem, up: &[bool], cfg: &SimConfig, rng: &mut ChaCha8Rng) -> f64 {
    let mut s = resolve(sts, sts.initial, rng);
    let mut t = 0.0;
    let mut up_time = 0.0;
    loop {
        let (dt, next) = match step(sts, s, rng) {
            Some((dt, _, next)) => (dt, Some(next)),
            None => (f64::INFINITY, None),
        };
        let end = (t + dt).min(cfg.horizon);
        if up[s] {
            up_time += (end - t.max(cfg.warmup)).max(0.0);
        }
        if t + dt >= cfg.horizon {
            break;
        }
        t += dt;
        s = next.expect("finite step has a successor");
    }
    up_time / (cfg.horizon - cfg.warmup)
}

/// Interval availability of `measure` over independent replications.
pub fn simulate(sts: &StochasticTransitionSystem, measure: &ResolvedMeasure, cfg: &SimConfig) -> Result<SimEstimate> {
    cfg.validate()?;
    let up: Vec<bool> = sts.states.iter().map(|s| eval_measure_predicate(measure, &s.global)).collect();
    let samples: Vec<f64> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| interval_availability(sts, &up, cfg, &mut replication_rng(cfg.seed, r as u64)))
        .collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std_error = if samples.len() > 1 {
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(SimEstimate {
        estimate: mean.clamp(0.0, 1.0),
        half_width: Z95 * std_error,
        std_error,
        replications: cfg.replications,
        rng: RNG_NAME,
    })
}
