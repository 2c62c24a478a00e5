//! Coarse correlated and correlated equilibria of one-step games.
//!
//! Both are linear feasibility problems over distributions on joint actions.
//! Among feasible distributions the LP picks one maximizing the smallest
//! probability, so fully indifferent games get the uniform distribution.
//!
//! CE uses general (not necessarily injective) strategy modifications, i.e.
//! one constraint for every ordered pair `(a, a')` of a player's actions.

use crate::error::SolverError;
use crate::game_model::JointActionSpace;

use super::lp::{LinearProgram, Relation};
use super::{normalize, EquilibriumCertificate, Matrix, MwConfig};

/// One payoff tensor per player over a shared joint action space. Every player maximizes.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffTensors {
    space: JointActionSpace,
    payoffs: Vec<Vec<f64>>,
}

impl PayoffTensors {
    pub fn new(space: JointActionSpace, payoffs: Vec<Vec<f64>>) -> Result<Self, SolverError> {
        if payoffs.len() != space.num_players() {
            return Err(SolverError::Shape(format!(
                "{} payoff tensors for {} players",
                payoffs.len(),
                space.num_players()
            )));
        }
        for (i, p) in payoffs.iter().enumerate() {
            if p.len() != space.size() {
                return Err(SolverError::Shape(format!(
                    "tensor of player {i} has {} entries, joint space has {}",
                    p.len(),
                    space.size()
                )));
            }
            if let Some(index) = p.iter().position(|x| !x.is_finite()) {
                return Err(SolverError::NonFinite { index });
            }
        }
        Ok(PayoffTensors { space, payoffs })
    }

    /// The bimatrix game where the row player maximizes `row` and the column player maximizes `col`.
    pub fn bimatrix(row: &Matrix, col: &Matrix) -> Result<Self, SolverError> {
        if row.rows() != col.rows() || row.cols() != col.cols() {
            return Err(SolverError::Shape("bimatrix payoffs differ in shape".into()));
        }
        let space = JointActionSpace::new(vec![row.rows(), row.cols()]).map_err(|e| SolverError::Shape(e.to_string()))?;
        Self::new(space, vec![row.data().to_vec(), col.data().to_vec()])
    }

    pub fn space(&self) -> &JointActionSpace {
        &self.space
    }

    pub fn payoff(&self, player: usize) -> &[f64] {
        &self.payoffs[player]
    }

    pub fn num_players(&self) -> usize {
        self.payoffs.len()
    }

    /// Expected payoff of every player under `dist`.
    pub fn expected(&self, dist: &[f64]) -> Vec<f64> {
        self.payoffs.iter().map(|p| p.iter().zip(dist).map(|(x, q)| x * q).sum()).collect()
    }
}

/// `gains[i][a'] = E_π[Q_i(a', a_{-i})] − E_π[Q_i(a)]`.
pub fn cce_deviation_gains(t: &PayoffTensors, dist: &[f64]) -> Vec<Vec<f64>> {
    let space = &t.space;
    (0..t.num_players())
        .map(|i| {
            let q = &t.payoffs[i];
            (0..space.count(i))
                .map(|dev| (0..space.size()).map(|j| dist[j] * (q[space.with_action(j, i, dev)] - q[j])).sum())
                .collect()
        })
        .collect()
}

/// `gains[i][a][a'] = Σ_{a_i = a} π(a) [Q_i(a', a_{-i}) − Q_i(a)]`.
pub fn ce_deviation_gains(t: &PayoffTensors, dist: &[f64]) -> Vec<Vec<Vec<f64>>> {
    let space = &t.space;
    (0..t.num_players())
        .map(|i| {
            let q = &t.payoffs[i];
            let n = space.count(i);
            let mut g = vec![vec![0.0; n]; n];
            for j in 0..space.size() {
                let rec = space.action_of(j, i);
                for (dev, slot) in g[rec].iter_mut().enumerate() {
                    *slot += dist[j] * (q[space.with_action(j, i, dev)] - q[j]);
                }
            }
            g
        })
        .collect()
}

/// Largest CCE constraint violation of `dist`, clamped at zero.
pub fn cce_residual(t: &PayoffTensors, dist: &[f64]) -> f64 {
    cce_deviation_gains(t, dist).into_iter().flatten().fold(0.0, f64::max)
}

/// Largest CE constraint violation of `dist` over all pairs `(a, a')`, clamped at zero.
pub fn ce_residual(t: &PayoffTensors, dist: &[f64]) -> f64 {
    ce_deviation_gains(t, dist).into_iter().flatten().flatten().fold(0.0, f64::max)
}

fn cce_rows(t: &PayoffTensors) -> Vec<Vec<f64>> {
    let space = &t.space;
    let mut rows = Vec::new();
    for i in 0..t.num_players() {
        let q = &t.payoffs[i];
        for dev in 0..space.count(i) {
            let row: Vec<f64> = (0..space.size()).map(|j| q[space.with_action(j, i, dev)] - q[j]).collect();
            if row.iter().any(|x| *x != 0.0) {
                rows.push(row);
            }
        }
    }
    rows
}

fn ce_rows(t: &PayoffTensors) -> Vec<Vec<f64>> {
    let space = &t.space;
    let mut rows = Vec::new();
    for i in 0..t.num_players() {
        let q = &t.payoffs[i];
        for rec in 0..space.count(i) {
            for dev in 0..space.count(i) {
                if dev == rec {
                    continue;
                }
                let row: Vec<f64> = (0..space.size())
                    .map(|j| if space.action_of(j, i) == rec { q[space.with_action(j, i, dev)] - q[j] } else { 0.0 })
                    .collect();
                if row.iter().any(|x| *x != 0.0) {
                    rows.push(row);
                }
            }
        }
    }
    rows
}

fn certificate(t: &PayoffTensors, mut dist: Vec<f64>, residual_of: fn(&PayoffTensors, &[f64]) -> f64, iters: usize) -> EquilibriumCertificate {
    normalize(&mut dist);
    let marginals = (0..t.num_players())
        .map(|i| {
            let mut m = vec![0.0; t.space.count(i)];
            for (j, p) in dist.iter().enumerate() {
                m[t.space.action_of(j, i)] += p;
            }
            m
        })
        .collect();
    EquilibriumCertificate {
        max_constraint_residual: residual_of(t, &dist),
        joint_dist: dist,
        marginals,
        duality_gap: None,
        iterations_used: iters,
    }
}

/// Feasible point of `rows · π <= 0`, `π` in the simplex.
fn solve_feasibility(
    t: &PayoffTensors,
    rows: &[Vec<f64>],
    tol: f64,
    residual_of: fn(&PayoffTensors, &[f64]) -> f64,
) -> Result<EquilibriumCertificate, SolverError> {
    let n = t.space.size();
    let mut pivots = 0;
    let mut best: Option<EquilibriumCertificate> = None;

    // max-spread: max w s.t. rows·π <= 0, w <= π_j, Σπ = 1
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut spread = LinearProgram::maximize(objective);
    for r in rows {
        let mut c = r.clone();
        c.push(0.0);
        spread.constraint(c, Relation::Le, 0.0);
    }
    for j in 0..n {
        let mut c = vec![0.0; n + 1];
        c[j] = -1.0;
        c[n] = 1.0;
        spread.constraint(c, Relation::Le, 0.0);
    }
    let mut sum = vec![1.0; n + 1];
    sum[n] = 0.0;
    spread.constraint(sum, Relation::Eq, 1.0);
    if let Ok(sol) = spread.solve() {
        pivots += sol.pivots;
        let cert = certificate(t, sol.x[..n].to_vec(), residual_of, pivots);
        if cert.max_constraint_residual <= tol {
            return Ok(cert);
        }
        best = Some(cert);
    }

    // fallback: minimize the largest violation directly
    let mut objective = vec![0.0; n + 1];
    objective[n] = -1.0;
    let mut slack = LinearProgram::maximize(objective);
    for r in rows {
        let mut c = r.clone();
        c.push(-1.0);
        slack.constraint(c, Relation::Le, 0.0);
    }
    let mut sum = vec![1.0; n + 1];
    sum[n] = 0.0;
    slack.constraint(sum, Relation::Eq, 1.0);
    let sol = slack.solve()?;
    pivots += sol.pivots;
    let cert = certificate(t, sol.x[..n].to_vec(), residual_of, pivots);
    if cert.max_constraint_residual <= tol {
        return Ok(cert);
    }
    let better = match best {
        Some(b) if b.max_constraint_residual <= cert.max_constraint_residual => b,
        _ => cert,
    };
    Err(SolverError::ToleranceNotMet {
        tol,
        residual: better.max_constraint_residual,
        iterations: pivots,
        best: Some(Box::new(better)),
    })
}

/// A CCE: no player gains more than `tol` by an unconditional unilateral deviation.
///
/// Falls back to multiplicative-weights dynamics if the LP route errors.
pub fn find_cce_general(t: &PayoffTensors, tol: f64) -> Result<EquilibriumCertificate, SolverError> {
    match solve_feasibility(t, &cce_rows(t), tol, cce_residual) {
        Ok(c) => Ok(c),
        Err(e @ SolverError::ToleranceNotMet { .. }) => Err(e),
        Err(_) => find_cce_general_mw(t, tol, &MwConfig::default()),
    }
}

/// A CE: for every player and every pair `(a, a')`, switching recommendation `a`
/// to `a'` gains at most `tol`.
pub fn find_ce_general(t: &PayoffTensors, tol: f64) -> Result<EquilibriumCertificate, SolverError> {
    solve_feasibility(t, &ce_rows(t), tol, ce_residual)
}

/// The two-player CCE used by optimistic Nash value iteration: `π` such that
/// the max-player cannot raise `E_π Q_up` and the min-player cannot lower
/// `E_π Q_low` by an unconditional deviation.
pub fn find_cce_pair(q_up: &Matrix, q_low: &Matrix, tol: f64) -> Result<EquilibriumCertificate, SolverError> {
    q_up.check_finite()?;
    q_low.check_finite()?;
    let neg_low = Matrix::new(q_low.rows(), q_low.cols(), q_low.data().iter().map(|x| -x).collect())?;
    find_cce_general(&PayoffTensors::bimatrix(q_up, &neg_low)?, tol)
}

/// No-regret (Hedge) dynamics for a CCE: the running average of the players'
/// product strategies. Accuracy improves like `1/sqrt(iterations)`, so this is
/// only useful at moderate tolerances.
pub fn find_cce_general_mw(t: &PayoffTensors, tol: f64, cfg: &MwConfig) -> Result<EquilibriumCertificate, SolverError> {
    let space = &t.space;
    let m = t.num_players();
    let n = space.size();
    let range = t
        .payoffs
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
    let scale = if range.1 > range.0 { range.1 - range.0 } else { 1.0 };
    let eta = cfg.eta.unwrap_or(0.1) / scale;
    let mut log_w: Vec<Vec<f64>> = (0..m).map(|i| vec![0.0; space.count(i)]).collect();
    let mut avg = vec![0.0; n];
    let mut best: Option<EquilibriumCertificate> = None;
    for it in 1..=cfg.max_iters {
        let strategies: Vec<Vec<f64>> = log_w
            .iter()
            .map(|lw| {
                let top = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut p: Vec<f64> = lw.iter().map(|x| (x - top).exp()).collect();
                normalize(&mut p);
                p
            })
            .collect();
        let joint: Vec<f64> =
            (0..n).map(|j| (0..m).map(|i| strategies[i][space.action_of(j, i)]).product()).collect();
        for (a, p) in avg.iter_mut().zip(&joint) {
            *a += p;
        }
        for i in 0..m {
            // E_{a ~ joint} Q_i(dev, a_{-i}) depends only on the others' marginal
            let mut payoff = vec![0.0; space.count(i)];
            for (j, p) in joint.iter().enumerate() {
                for (dev, slot) in payoff.iter_mut().enumerate() {
                    *slot += p * t.payoffs[i][space.with_action(j, i, dev)];
                }
            }
            for (lw, u) in log_w[i].iter_mut().zip(&payoff) {
                *lw += eta * u;
            }
        }
        if it % cfg.check_every == 0 || it == cfg.max_iters {
            let cert = certificate(t, avg.clone(), cce_residual, it);
            if cert.max_constraint_residual <= tol {
                return Ok(cert);
            }
            if best.as_ref().map_or(true, |b| cert.max_constraint_residual < b.max_constraint_residual) {
                best = Some(cert);
            }
        }
    }
    let best = best.expect("at least one checkpoint");
    Err(SolverError::ToleranceNotMet {
        tol,
        residual: best.max_constraint_residual,
        iterations: cfg.max_iters,
        best: Some(Box::new(best)),
    })
}
