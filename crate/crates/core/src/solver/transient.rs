use super::{ProbabilityVector, SolverConfig};
use crate::error::{Error, Result};
use crate::statespace::Ctmc;

/// Poisson(`qt`) probabilities from index `left` on, truncated so that the
/// mass dropped on both sides together stays below `eps`.
///
/// Weights are built outward from the mode by the recurrence between
/// neighbours, so no factorials or exponentials of large arguments appear.
pub fn poisson_weights(qt: f64, eps: f64) -> (usize, Vec<f64>) {
    if qt <= 0.0 {
        return (0, vec![1.0]);
    }
    const NEGLIGIBLE: f64 = 1e-40;
    let mode = qt.floor() as usize;
    let mut left = vec![1.0];
    let mut k = mode;
    while k > 0 {
        let w = left.last().copied().unwrap() * k as f64 / qt;
        if w < NEGLIGIBLE {
            break;
        }
        left.push(w);
        k -= 1;
    }
    let lo = k;
    left.reverse();
    let mut w = left;
    let mut k = mode;
    loop {
        let next = w.last().copied().unwrap() * qt / (k + 1) as f64;
        if next < NEGLIGIBLE {
            break;
        }
        w.push(next);
        k += 1;
    }
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    // trim tails, half the budget each
    let mut start = 0;
    let mut cut = 0.0;
    while start + 1 < w.len() && cut + w[start] <= eps / 2.0 {
        cut += w[start];
        start += 1;
    }
    let mut end = w.len();
    let mut cut = 0.0;
    while end - 1 > start && cut + w[end - 1] <= eps / 2.0 {
        cut += w[end - 1];
        end -= 1;
    }
    (lo + start, w[start..end].to_vec())
}

/// Distribution at time `t` by uniformization.
pub fn transient(ctmc: &Ctmc, t: f64, cfg: &SolverConfig) -> Result<ProbabilityVector> {
    cfg.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParams(format!("time must be finite and nonnegative, got {t}")));
    }
    let lambda = ctmc.max_exit_rate();
    if t == 0.0 || lambda == 0.0 {
        return Ok(ProbabilityVector(ctmc.initial.clone()));
    }
    let n = ctmc.len();
    let (left, weights) = poisson_weights(lambda * t, cfg.epsilon);
    let right = left + weights.len() - 1;
    let stay: Vec<f64> = ctmc.exit_rates.iter().map(|e| 1.0 - e / lambda).collect();

    let mut v = ctmc.initial.clone();
    let mut next = vec![0.0; n];
    let mut acc = vec![0.0; n];
    let mut remaining: f64 = weights.iter().sum();
    for k in 0..=right {
        if k >= left {
            let w = weights[k - left];
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += w * x;
            }
            remaining -= w;
        }
        if k == right {
            break;
        }
        for j in 0..n {
            next[j] = v[j] * stay[j];
        }
        for (i, row) in ctmc.rows.iter().enumerate() {
            let vi = v[i] / lambda;
            if vi != 0.0 {
                for &(j, q) in row {
                    next[j] += vi * q;
                }
            }
        }
        let delta = v.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        std::mem::swap(&mut v, &mut next);
        // the iterates have converged: the rest of the weight lands on v
        if delta < cfg.epsilon / 8.0 && k + 1 >= left {
            let rest = remaining.max(0.0);
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += rest * x;
            }
            break;
        }
    }
    Ok(ProbabilityVector::normalized(acc))
}
