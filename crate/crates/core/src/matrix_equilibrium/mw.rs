//! Iterative zero-sum route: optimistic Hedge self-play with support polishing.
//!
//! Averaged Hedge iterates converge slowly, so every `check_every` iterations
//! the near-best-response supports of the averages are extracted and the
//! equalizing strategies on those supports are solved exactly. A polished
//! candidate is accepted only through the same duality-gap certificate as the
//! simplex route.

use nalgebra::{DMatrix, DVector};

use crate::error::SolverError;

use super::{normalize, zero_sum_certificate, Matrix, ZeroSumSolution};

#[derive(Clone, Debug)]
pub struct MwConfig {
    pub max_iters: usize,
    /// Step size relative to the payoff range; 0.1 when unset.
    pub eta: Option<f64>,
    pub check_every: usize,
}

impl Default for MwConfig {
    fn default() -> Self {
        MwConfig { max_iters: 100_000, eta: None, check_every: 250 }
    }
}

fn softmax(log_w: &[f64]) -> Vec<f64> {
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = log_w.iter().map(|x| (x - top).exp()).collect();
    normalize(&mut p);
    p
}

/// Strategy over `support` of size `support.len()` that makes the opponent
/// indifferent across `opp_support`, by least squares on
/// `Σ_k x_k M(k, o) − v = 0 (o ∈ opp_support)`, `Σ x = 1`.
fn equalizer(payoff: impl Fn(usize, usize) -> f64, support: &[usize], opp_support: &[usize], n: usize) -> Option<Vec<f64>> {
    let rows = opp_support.len() + 1;
    let cols = support.len() + 1;
    let a = DMatrix::from_fn(rows, cols, |r, c| {
        if r == opp_support.len() {
            if c < support.len() {
                1.0
            } else {
                0.0
            }
        } else if c < support.len() {
            payoff(support[c], opp_support[r])
        } else {
            -1.0
        }
    });
    let mut rhs = DVector::zeros(rows);
    rhs[opp_support.len()] = 1.0;
    let x = a.clone().svd(true, true).solve(&rhs, 1e-13).ok()?;
    if (&a * &x - &rhs).amax() > 1e-9 {
        return None;
    }
    let mut out = vec![0.0; n];
    for (k, &idx) in support.iter().enumerate() {
        if x[k] < -1e-9 {
            return None;
        }
        out[idx] = x[k];
    }
    normalize(&mut out);
    Some(out)
}

fn near_best(values: &[f64], maximize: bool, delta: f64) -> Vec<usize> {
    let best = if maximize {
        values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    } else {
        values.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    (0..values.len())
        .filter(|&i| if maximize { values[i] >= best - delta } else { values[i] <= best + delta })
        .collect()
}

fn polish(q: &Matrix, mu: &[f64], nu: &[f64], gap: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let row_vals = q.times_col(nu);
    let col_vals = q.row_times(mu);
    let mut out = Vec::new();
    for delta in [2.0 * gap, gap, 0.5 * gap, 0.1 * gap] {
        let rows = near_best(&row_vals, true, delta);
        let cols = near_best(&col_vals, false, delta);
        let nu_eq = equalizer(|b, a| q.get(a, b), &cols, &rows, q.cols());
        let mu_eq = equalizer(|a, b| q.get(a, b), &rows, &cols, q.rows());
        if let (Some(m), Some(n)) = (mu_eq, nu_eq) {
            out.push((m, n));
        }
    }
    for cut in [1e-2, 1e-3, 1e-4] {
        let rows: Vec<usize> = (0..mu.len()).filter(|&a| mu[a] > cut).collect();
        let cols: Vec<usize> = (0..nu.len()).filter(|&b| nu[b] > cut).collect();
        let nu_eq = equalizer(|b, a| q.get(a, b), &cols, &rows, q.cols());
        let mu_eq = equalizer(|a, b| q.get(a, b), &rows, &cols, q.rows());
        if let (Some(m), Some(n)) = (mu_eq, nu_eq) {
            out.push((m, n));
        }
    }
    out
}

fn subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << items.len())
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..items.len()).filter(|i| m >> i & 1 == 1).map(|i| items[i]).collect())
        .collect()
}

/// Equal-size sub-supports of the strategies' mass, for degenerate games where
/// the averaged play spreads over redundant actions.
fn support_search(q: &Matrix, mu: &[f64], nu: &[f64], tol: f64, it: usize) -> Option<ZeroSumSolution> {
    let rows: Vec<usize> = (0..mu.len()).filter(|&a| mu[a] > 1e-4).collect();
    let cols: Vec<usize> = (0..nu.len()).filter(|&b| nu[b] > 1e-4).collect();
    if rows.len() > 8 || cols.len() > 8 {
        return None;
    }
    for k in 1..=rows.len().min(cols.len()) {
        for r in subsets(&rows, k) {
            for c in subsets(&cols, k) {
                let nu_eq = equalizer(|b, a| q.get(a, b), &c, &r, q.cols());
                let mu_eq = equalizer(|a, b| q.get(a, b), &r, &c, q.rows());
                if let (Some(m), Some(n)) = (mu_eq, nu_eq) {
                    let cand = zero_sum_certificate(q, m, n, it);
                    if cand.certificate.duality_gap.unwrap_or(f64::INFINITY) <= tol {
                        return Some(cand);
                    }
                }
            }
        }
    }
    None
}

/// Zero-sum Nash by optimistic Hedge self-play; fails with the best iterate if
/// the duality gap is still above `tol` after `cfg.max_iters` iterations.
pub fn solve_zero_sum_nash_mw(q: &Matrix, tol: f64, cfg: &MwConfig) -> Result<ZeroSumSolution, SolverError> {
    q.check_finite()?;
    let (lo, hi) = q.data().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
    if hi - lo <= 0.0 {
        let mut mu = vec![0.0; q.rows()];
        let mut nu = vec![0.0; q.cols()];
        mu[0] = 1.0;
        nu[0] = 1.0;
        return Ok(zero_sum_certificate(q, mu, nu, 0));
    }
    let eta = cfg.eta.unwrap_or(0.1) / (hi - lo);
    let mut lw_row = vec![0.0; q.rows()];
    let mut lw_col = vec![0.0; q.cols()];
    let mut last_row_u = vec![0.0; q.rows()];
    let mut last_col_u = vec![0.0; q.cols()];
    let mut avg_mu = vec![0.0; q.rows()];
    let mut avg_nu = vec![0.0; q.cols()];
    let mut best: Option<ZeroSumSolution> = None;

    for it in 1..=cfg.max_iters {
        // optimistic step: play against the prediction that the last payoff repeats
        let mu = softmax(&lw_row.iter().zip(&last_row_u).map(|(w, u)| w + eta * u).collect::<Vec<_>>());
        let nu = softmax(&lw_col.iter().zip(&last_col_u).map(|(w, u)| w + eta * u).collect::<Vec<_>>());
        let row_u = q.times_col(&nu);
        let col_u: Vec<f64> = q.row_times(&mu).into_iter().map(|x| -x).collect();
        for (w, u) in lw_row.iter_mut().zip(&row_u) {
            *w += eta * u;
        }
        for (w, u) in lw_col.iter_mut().zip(&col_u) {
            *w += eta * u;
        }
        last_row_u = row_u;
        last_col_u = col_u;
        for (a, p) in avg_mu.iter_mut().zip(&mu) {
            *a += p;
        }
        for (a, p) in avg_nu.iter_mut().zip(&nu) {
            *a += p;
        }

        if it % cfg.check_every == 0 || it == cfg.max_iters {
            let mut m = avg_mu.clone();
            let mut n = avg_nu.clone();
            normalize(&mut m);
            normalize(&mut n);
            let sol = zero_sum_certificate(q, m.clone(), n.clone(), it);
            let gap = sol.certificate.duality_gap.unwrap_or(f64::INFINITY);
            if gap <= tol {
                return Ok(sol);
            }
            for (pm, pn) in polish(q, &m, &n, gap) {
                let cand = zero_sum_certificate(q, pm, pn, it);
                if cand.certificate.duality_gap.unwrap_or(f64::INFINITY) <= tol {
                    return Ok(cand);
                }
            }
            if gap < 1e-3 {
                if let Some(sol) = support_search(q, &m, &n, tol, it) {
                    return Ok(sol);
                }
            }
            if best.as_ref().map_or(true, |b| gap < b.certificate.duality_gap.unwrap_or(f64::INFINITY)) {
                best = Some(sol);
            }
        }
    }
    let best = best.expect("at least one checkpoint");
    Err(SolverError::ToleranceNotMet {
        tol,
        residual: best.certificate.duality_gap.unwrap_or(f64::INFINITY),
        iterations: cfg.max_iters,
        best: Some(Box::new(best.certificate)),
    })
}
