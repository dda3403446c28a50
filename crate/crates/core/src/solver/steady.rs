use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::*;
use faer::Mat;

use super::{ProbabilityVector, SolverConfig, SolverMethod, DIRECT_THRESHOLD};
use crate::error::{Error, Result};
use crate::statespace::Ctmc;

/// Max-norm of πQ.
pub fn residual(ctmc: &Ctmc, pi: &[f64]) -> f64 {
    let mut r: Vec<f64> = pi.iter().zip(&ctmc.exit_rates).map(|(p, e)| -p * e).collect();
    for (i, row) in ctmc.rows.iter().enumerate() {
        for &(j, q) in row {
            r[j] += pi[i] * q;
        }
    }
    r.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn reach(n: usize, start: &[usize], succ: impl Fn(usize) -> Vec<usize>) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = start.to_vec();
    for &s in start {
        seen[s] = true;
    }
    while let Some(s) = stack.pop() {
        for t in succ(s) {
            if !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    seen
}

/// States reachable from the initial distribution, in index order, after
/// checking that they form a single closed communicating class.
pub fn check_ergodic(ctmc: &Ctmc) -> Result<Vec<usize>> {
    let n = ctmc.len();
    if n == 0 {
        return Err(Error::NonErgodic("empty chain".into()));
    }
    let start: Vec<usize> = (0..n).filter(|&i| ctmc.initial[i] > 0.0).collect();
    if start.is_empty() {
        return Err(Error::NonErgodic("no initial state".into()));
    }
    let fwd = reach(n, &start, |s| ctmc.rows[s].iter().map(|&(j, _)| j).collect());
    let reachable: Vec<usize> = (0..n).filter(|&i| fwd[i]).collect();
    if reachable.len() == 1 {
        return Ok(reachable);
    }
    if let Some(&a) = reachable.iter().find(|&&i| ctmc.exit_rates[i] == 0.0) {
        return Err(Error::NonErgodic(format!("state {a} is absorbing")));
    }
    let mut preds = vec![Vec::new(); n];
    for (i, row) in ctmc.rows.iter().enumerate() {
        for &(j, _) in row {
            preds[j].push(i);
        }
    }
    let back = reach(n, &[reachable[0]], |s| preds[s].clone());
    if let Some(&bad) = reachable.iter().find(|&&i| !back[i]) {
        return Err(Error::NonErgodic(format!(
            "state {bad} cannot return to state {}: the reachable chain has more than one closed class or transient states",
            reachable[0]
        )));
    }
    Ok(reachable)
}

/// Restriction of the chain to `keep` (which must be closed).
fn restrict(ctmc: &Ctmc, keep: &[usize]) -> (Vec<Vec<(usize, f64)>>, Vec<f64>) {
    let mut idx = vec![usize::MAX; ctmc.len()];
    for (k, &i) in keep.iter().enumerate() {
        idx[i] = k;
    }
    let rows = keep
        .iter()
        .map(|&i| ctmc.rows[i].iter().map(|&(j, q)| (idx[j], q)).collect())
        .collect();
    let exits = keep.iter().map(|&i| ctmc.exit_rates[i]).collect();
    (rows, exits)
}

/// Stationary distribution of an ergodic chain.
pub fn steady_state(ctmc: &Ctmc, cfg: &SolverConfig) -> Result<ProbabilityVector> {
    cfg.validate()?;
    let keep = check_ergodic(ctmc)?;
    let mut full = vec![0.0; ctmc.len()];
    if keep.len() == 1 {
        full[keep[0]] = 1.0;
        return Ok(ProbabilityVector(full));
    }
    let (rows, exits) = restrict(ctmc, &keep);
    let method = match cfg.method {
        SolverMethod::Auto if keep.len() < DIRECT_THRESHOLD => SolverMethod::Direct,
        SolverMethod::Auto => SolverMethod::Iterative,
        m => m,
    };
    let mut pi = match method {
        SolverMethod::Direct => direct(&rows, &exits)?,
        _ => vec![1.0 / keep.len() as f64; keep.len()],
    };
    // Gauss–Seidel does the iterative solve and polishes the direct one.
    gauss_seidel(&rows, &exits, &mut pi, cfg)?;
    for (k, &i) in keep.iter().enumerate() {
        full[i] = pi[k];
    }
    Ok(ProbabilityVector::normalized(full))
}

/// Solves πQ = 0, Σπ = 1 by LU on Qᵀ with its last equation replaced by the
/// normalization.
fn direct(rows: &[Vec<(usize, f64)>], exits: &[f64]) -> Result<Vec<f64>> {
    let n = rows.len();
    let last = n - 1;
    let mut t = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if i != last {
            t.push(Triplet::new(i, i, -exits[i]));
        }
        for &(j, q) in row {
            if j != last {
                t.push(Triplet::new(j, i, q));
            }
        }
        t.push(Triplet::new(last, i, 1.0));
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t)
        .map_err(|e| Error::NonErgodic(format!("cannot assemble generator: {e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| Error::NonErgodic(format!("singular generator: {e:?}")))?;
    let b = Mat::<f64>::from_fn(n, 1, |i, _| if i == last { 1.0 } else { 0.0 });
    let x = lu.solve(&b);
    let pi: Vec<f64> = (0..n).map(|i| x[(i, 0)].max(0.0)).collect();
    if pi.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonErgodic("singular generator".into()));
    }
    let s: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|p| p / s).collect())
}

fn residual_of(rows: &[Vec<(usize, f64)>], exits: &[f64], pi: &[f64]) -> f64 {
    let mut r: Vec<f64> = pi.iter().zip(exits).map(|(p, e)| -p * e).collect();
    for (i, row) in rows.iter().enumerate() {
        for &(j, q) in row {
            r[j] += pi[i] * q;
        }
    }
    r.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn gauss_seidel(rows: &[Vec<(usize, f64)>], exits: &[f64], pi: &mut [f64], cfg: &SolverConfig) -> Result<()> {
    let n = rows.len();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in rows.iter().enumerate() {
        for &(j, q) in row {
            cols[j].push((i, q));
        }
    }
    let mut res = residual_of(rows, exits, pi);
    let mut it = 0;
    while res > cfg.tolerance {
        if it >= cfg.max_iterations {
            return Err(Error::NotConverged { iterations: it, residual: res });
        }
        for j in 0..n {
            let inflow: f64 = cols[j].iter().map(|&(i, q)| pi[i] * q).sum();
            pi[j] = inflow / exits[j];
        }
        let s: f64 = pi.iter().sum();
        for p in pi.iter_mut() {
            *p /= s;
        }
        it += 1;
        res = residual_of(rows, exits, pi);
    }
    Ok(())
}
