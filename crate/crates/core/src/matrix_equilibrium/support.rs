//! Support enumeration for tiny one- and two-player games.
//!
//! Supports are tried by total size, then lexicographically, so among
//! degenerate ties the lexicographically smallest support wins.

use nalgebra::{DMatrix, DVector};

use crate::error::SolverError;

use super::correlated::{cce_deviation_gains, PayoffTensors};
use super::{normalize, EquilibriumCertificate};

/// Largest per-player action count accepted by [`find_nash_tiny`].
pub const TINY_MAX_ACTIONS: usize = 4;

/// Largest unilateral deviation gain of each player against a product profile.
pub fn nash_deviation_gains(t: &PayoffTensors, strategies: &[Vec<f64>]) -> Vec<f64> {
    let joint = product(t, strategies);
    cce_deviation_gains(t, &joint)
        .into_iter()
        .map(|g| g.into_iter().fold(0.0, f64::max))
        .collect()
}

fn product(t: &PayoffTensors, strategies: &[Vec<f64>]) -> Vec<f64> {
    let space = t.space();
    (0..space.size())
        .map(|j| strategies.iter().enumerate().map(|(i, s)| s[space.action_of(j, i)]).product())
        .collect()
}

fn subsets(n: usize) -> Vec<Vec<usize>> {
    let mut all: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    all
}

/// Mixed strategy on `support` making the opponent's payoff `pay(own, opp)`
/// constant over `opp_support`.
fn indifference(pay: impl Fn(usize, usize) -> f64, support: &[usize], opp_support: &[usize], n: usize) -> Option<Vec<f64>> {
    let rows = opp_support.len() + 1;
    let cols = support.len() + 1;
    let a = DMatrix::from_fn(rows, cols, |r, c| match (r == opp_support.len(), c < support.len()) {
        (true, true) => 1.0,
        (true, false) => 0.0,
        (false, true) => pay(support[c], opp_support[r]),
        (false, false) => -1.0,
    });
    let mut rhs = DVector::zeros(rows);
    rhs[opp_support.len()] = 1.0;
    let x = a.clone().svd(true, true).solve(&rhs, 1e-13).ok()?;
    if (&a * &x - &rhs).amax() > 1e-10 {
        return None;
    }
    let mut out = vec![0.0; n];
    for (k, &idx) in support.iter().enumerate() {
        if x[k] < -1e-12 {
            return None;
        }
        out[idx] = x[k];
    }
    normalize(&mut out);
    Some(out)
}

fn certificate(t: &PayoffTensors, strategies: Vec<Vec<f64>>, iterations: usize) -> EquilibriumCertificate {
    let gains = nash_deviation_gains(t, &strategies);
    EquilibriumCertificate {
        joint_dist: product(t, &strategies),
        max_constraint_residual: gains.into_iter().fold(0.0, f64::max),
        marginals: strategies,
        duality_gap: None,
        iterations_used: iterations,
    }
}

/// Nash equilibrium of a game with at most two players and at most
/// [`TINY_MAX_ACTIONS`] actions each, as a product distribution whose
/// unilateral deviation gains are all `<= tol`.
pub fn find_nash_tiny(t: &PayoffTensors, tol: f64) -> Result<EquilibriumCertificate, SolverError> {
    let space = t.space();
    if space.num_players() > 2 || space.counts().iter().any(|&c| c > TINY_MAX_ACTIONS) {
        return Err(SolverError::SizeGuard(format!(
            "{} players with actions {:?}; limit is 2 players and {TINY_MAX_ACTIONS} actions each",
            space.num_players(),
            space.counts()
        )));
    }
    if space.num_players() == 1 {
        let q = t.payoff(0);
        let best = (0..q.len()).fold(0, |b, a| if q[a] > q[b] { a } else { b });
        let mut s = vec![0.0; q.len()];
        s[best] = 1.0;
        return Ok(certificate(t, vec![s], 1));
    }
    let (na, nb) = (space.count(0), space.count(1));
    let row = |a: usize, b: usize| t.payoff(0)[space.encode(&[a, b])];
    let col = |a: usize, b: usize| t.payoff(1)[space.encode(&[a, b])];
    let row_supports = subsets(na);
    let col_supports = subsets(nb);
    let mut candidates: Vec<(&Vec<usize>, &Vec<usize>)> =
        row_supports.iter().flat_map(|i| col_supports.iter().map(move |j| (i, j))).collect();
    candidates.sort_by(|x, y| {
        (x.0.len() + x.1.len())
            .cmp(&(y.0.len() + y.1.len()))
            .then_with(|| x.0.cmp(y.0))
            .then_with(|| x.1.cmp(y.1))
    });
    for (tried, (rs, cs)) in candidates.into_iter().enumerate() {
        // ν makes the row player indifferent on rs; μ makes the column player indifferent on cs
        let Some(nu) = indifference(|b, a| row(a, b), cs, rs, nb) else { continue };
        let Some(mu) = indifference(|a, b| col(a, b), rs, cs, na) else { continue };
        let cert = certificate(t, vec![mu, nu], tried + 1);
        if cert.max_constraint_residual <= tol {
            return Ok(cert);
        }
    }
    Err(SolverError::NoSolution(tol))
}
