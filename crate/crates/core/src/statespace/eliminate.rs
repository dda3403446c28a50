use std::collections::{BTreeMap, BTreeSet};

use super::{GlobalState, StochasticTransitionSystem};
use crate::error::{Error, Result};

/// A vanishing state whose self-loop probability reaches `1 - this` is
/// part of a cycle of immediate transitions with no exit.
pub const VANISHING_LOOP_TOLERANCE: f64 = 1e-12;

/// Continuous-time Markov chain over the tangible states of an STS.
#[derive(Debug, Clone)]
pub struct Ctmc {
    pub states: Vec<GlobalState>,
    /// CTMC index → STS index.
    pub sts_index: Vec<usize>,
    /// Off-diagonal rates per row, sorted by column. Self-loops are dropped.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Total outflow per row (minus the diagonal of the generator).
    pub exit_rates: Vec<f64>,
    pub initial: Vec<f64>,
}

impl Ctmc {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit_rates.iter().copied().fold(0.0, f64::max)
    }

    /// Dense generator, row-major. Meant for small chains and tests.
    pub fn dense_generator(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut q = vec![vec![0.0; n]; n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                q[i][j] += r;
            }
            q[i][i] = -self.exit_rates[i];
        }
        q
    }
}

/// Removes vanishing states, redistributing their inbound timed rate over
/// the tangible states they eventually lead to.
pub fn eliminate_vanishing(sts: &StochasticTransitionSystem) -> Result<Ctmc> {
    let n = sts.states.len();
    let mut ctmc_of = vec![usize::MAX; n];
    let mut sts_index = Vec::new();
    for (k, s) in sts.states.iter().enumerate() {
        if s.is_tangible() {
            ctmc_of[k] = sts_index.len();
            sts_index.push(k);
        }
    }

    // outgoing immediate distributions, reduced until they only name
    // tangible states
    let mut out: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
    let mut preds: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for e in &sts.immediate {
        *out.entry(e.from).or_default().entry(e.to).or_insert(0.0) += e.probability;
        if !sts.states[e.to].is_tangible() && e.to != e.from {
            preds.entry(e.to).or_default().insert(e.from);
        }
    }
    let vanishing: Vec<usize> = (0..n).filter(|&k| !sts.states[k].is_tangible()).collect();
    for &v in &vanishing {
        let mut dist = out.remove(&v).unwrap_or_default();
        let looped = dist.remove(&v).unwrap_or(0.0);
        if looped >= 1.0 - VANISHING_LOOP_TOLERANCE || dist.is_empty() {
            return Err(Error::VanishingCycle(format!("state {v} (self-loop probability {looped})")));
        }
        let scale = 1.0 / (1.0 - looped);
        for p in dist.values_mut() {
            *p *= scale;
        }
        for u in preds.remove(&v).unwrap_or_default() {
            let Some(du) = out.get_mut(&u) else { continue };
            let Some(q) = du.remove(&v) else { continue };
            for (&x, &p) in &dist {
                *du.entry(x).or_insert(0.0) += q * p;
                if !sts.states[x].is_tangible() && x != u {
                    preds.entry(x).or_default().insert(u);
                }
            }
        }
        out.insert(v, dist);
    }

    let m = sts_index.len();
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); m];
    let add = |from: usize, to: usize, rate: f64, rows: &mut Vec<BTreeMap<usize, f64>>| {
        let (i, j) = (ctmc_of[from], ctmc_of[to]);
        if i != j {
            *rows[i].entry(j).or_insert(0.0) += rate;
        }
    };
    for e in &sts.timed {
        if sts.states[e.to].is_tangible() {
            add(e.from, e.to, e.rate, &mut rows);
        } else {
            for (&x, &p) in &out[&e.to] {
                if p > 0.0 {
                    add(e.from, x, e.rate * p, &mut rows);
                }
            }
        }
    }
    let rows: Vec<Vec<(usize, f64)>> = rows.into_iter().map(|r| r.into_iter().collect()).collect();
    let exit_rates = rows.iter().map(|r| r.iter().map(|(_, x)| x).sum()).collect();

    let mut initial = vec![0.0; m];
    if sts.states[sts.initial].is_tangible() {
        initial[ctmc_of[sts.initial]] = 1.0;
    } else {
        for (&x, &p) in &out[&sts.initial] {
            initial[ctmc_of[x]] += p;
        }
    }
    let states = sts_index.iter().map(|&k| sts.states[k].global.clone()).collect();
    Ok(Ctmc { states, sts_index, rows, exit_rates, initial })
}
