//! One-step game solvers: zero-sum Nash, CCE, CE and support-enumeration Nash
//! for tiny bimatrix games.
//!
//! Every solver returns an [`EquilibriumCertificate`] whose residual and gap
//! are recomputed from the returned distribution, never copied from solver
//! internals. The primary route is the dense simplex in [`lp`]; an iterative
//! multiplicative-weights route ([`mw`]) must pass the same certificates.

pub mod lp;
mod correlated;
mod mw;
mod support;

pub use correlated::{
    cce_deviation_gains, cce_residual, ce_deviation_gains, ce_residual, find_cce_general, find_cce_general_mw,
    find_cce_pair, find_ce_general, PayoffTensors,
};
pub use mw::{solve_zero_sum_nash_mw, MwConfig};
pub use support::{find_nash_tiny, nash_deviation_gains, TINY_MAX_ACTIONS};

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use lp::{LinearProgram, Relation};

/// Default tolerance of the matrix solvers.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Which one-step equilibrium a planner or learner computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    /// Product Nash by support enumeration; tiny games only.
    Nash,
    Ce,
    Cce,
}

impl EquilibriumKind {
    pub fn solve(self, t: &PayoffTensors, tol: f64) -> Result<EquilibriumCertificate, SolverError> {
        match self {
            EquilibriumKind::Nash => find_nash_tiny(t, tol),
            EquilibriumKind::Ce => find_ce_general(t, tol),
            EquilibriumKind::Cce => find_cce_general(t, tol),
        }
    }
}

impl std::str::FromStr for EquilibriumKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "nash" => Ok(EquilibriumKind::Nash),
            "ce" => Ok(EquilibriumKind::Ce),
            "cce" => Ok(EquilibriumKind::Cce),
            other => Err(format!("unknown equilibrium kind `{other}`")),
        }
    }
}

/// Dense row-major payoff matrix; rows are the maximizing player's actions.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, SolverError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(SolverError::Shape(format!("{rows}x{cols} matrix with {} entries", data.len())));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SolverError> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(SolverError::Shape("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn constant(rows: usize, cols: usize, c: f64) -> Self {
        Matrix { rows, cols, data: vec![c; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.cols + b]
    }

    /// The game seen from the other side: `-Q^T`.
    pub fn transpose_negated(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.data.len());
        for b in 0..self.cols {
            for a in 0..self.rows {
                data.push(-self.get(a, b));
            }
        }
        Matrix { rows: self.cols, cols: self.rows, data }
    }

    /// `Q ν`, the max-player's payoff per row.
    pub fn times_col(&self, nu: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|a| (0..self.cols).map(|b| self.get(a, b) * nu[b]).sum()).collect()
    }

    /// `μᵀ Q`, the payoff per column.
    pub fn row_times(&self, mu: &[f64]) -> Vec<f64> {
        (0..self.cols).map(|b| (0..self.rows).map(|a| mu[a] * self.get(a, b)).sum()).collect()
    }

    pub fn bilinear(&self, mu: &[f64], nu: &[f64]) -> f64 {
        self.times_col(nu).iter().zip(mu).map(|(x, p)| x * p).sum()
    }

    pub(crate) fn check_finite(&self) -> Result<(), SolverError> {
        match self.data.iter().position(|x| !x.is_finite()) {
            Some(index) => Err(SolverError::NonFinite { index }),
            None => Ok(()),
        }
    }
}

/// Machine-checkable evidence that a distribution is an (approximate) equilibrium.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumCertificate {
    pub joint_dist: Vec<f64>,
    pub marginals: Vec<Vec<f64>>,
    /// Largest equilibrium-constraint violation, clamped at zero.
    pub max_constraint_residual: f64,
    /// `max_a (Qν)_a − min_b (μᵀQ)_b`; zero-sum solvers only.
    pub duality_gap: Option<f64>,
    pub iterations_used: usize,
}

/// Solution of a zero-sum matrix game.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroSumSolution {
    pub row_strategy: Vec<f64>,
    pub col_strategy: Vec<f64>,
    /// `μᵀ Q ν`.
    pub value: f64,
    pub certificate: EquilibriumCertificate,
}

/// `max_a (Qν)_a − min_b (μᵀQ)_b`.
pub fn duality_gap(q: &Matrix, mu: &[f64], nu: &[f64]) -> f64 {
    let best_row = q.times_col(nu).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let best_col = q.row_times(mu).into_iter().fold(f64::INFINITY, f64::min);
    best_row - best_col
}

pub(crate) fn normalize(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        for x in v.iter_mut() {
            *x /= total;
        }
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

pub(crate) fn zero_sum_certificate(q: &Matrix, mu: Vec<f64>, nu: Vec<f64>, iterations: usize) -> ZeroSumSolution {
    let value = q.bilinear(&mu, &nu);
    let best_row = q.times_col(&nu).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let best_col = q.row_times(&mu).into_iter().fold(f64::INFINITY, f64::min);
    let mut joint = Vec::with_capacity(q.rows * q.cols);
    for a in 0..q.rows {
        for b in 0..q.cols {
            joint.push(mu[a] * nu[b]);
        }
    }
    let certificate = EquilibriumCertificate {
        joint_dist: joint,
        marginals: vec![mu.clone(), nu.clone()],
        max_constraint_residual: (best_row - value).max(value - best_col).max(0.0),
        duality_gap: Some((best_row - best_col).max(0.0)),
        iterations_used: iterations,
    };
    ZeroSumSolution { row_strategy: mu, col_strategy: nu, value, certificate }
}

/// Solves `max_μ min_ν μᵀQν` through two LPs (one per player) on the shifted,
/// strictly positive matrix `Q − min Q + 1`.
pub fn solve_zero_sum_nash_lp(q: &Matrix, tol: f64) -> Result<ZeroSumSolution, SolverError> {
    q.check_finite()?;
    let shift = 1.0 - q.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let shifted = |a: usize, b: usize| q.get(a, b) + shift;

    // column player: max Σy s.t. Q' y <= 1
    let mut col_lp = LinearProgram::maximize(vec![1.0; q.cols]);
    for a in 0..q.rows {
        col_lp.constraint((0..q.cols).map(|b| shifted(a, b)).collect(), Relation::Le, 1.0);
    }
    let col = col_lp.solve()?;
    // row player: min Σx s.t. Q'^T x >= 1
    let mut row_lp = LinearProgram::maximize(vec![-1.0; q.rows]);
    for b in 0..q.cols {
        row_lp.constraint((0..q.rows).map(|a| shifted(a, b)).collect(), Relation::Ge, 1.0);
    }
    let row = row_lp.solve()?;

    let mut mu = row.x;
    let mut nu = col.x;
    normalize(&mut mu);
    normalize(&mut nu);
    let sol = zero_sum_certificate(q, mu, nu, row.pivots + col.pivots);
    let gap = sol.certificate.duality_gap.unwrap_or(f64::INFINITY);
    if gap > tol {
        return Err(SolverError::ToleranceNotMet {
            tol,
            residual: gap,
            iterations: sol.certificate.iterations_used,
            best: Some(Box::new(sol.certificate)),
        });
    }
    Ok(sol)
}

/// Zero-sum Nash equilibrium with a duality-gap certificate `<= tol`.
///
/// The simplex route runs first; if it fails, the multiplicative-weights route
/// is tried with its default budget.
pub fn solve_zero_sum_nash(q: &Matrix, tol: f64) -> Result<ZeroSumSolution, SolverError> {
    match solve_zero_sum_nash_lp(q, tol) {
        Ok(sol) => Ok(sol),
        Err(SolverError::NonFinite { index }) => Err(SolverError::NonFinite { index }),
        Err(lp_err) => solve_zero_sum_nash_mw(q, tol, &MwConfig::default()).map_err(|mw_err| match mw_err {
            SolverError::ToleranceNotMet { .. } => mw_err,
            _ => lp_err,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn dominant_row() {
        let sol = solve_zero_sum_nash(&m(&[&[1.0, 1.0], &[0.0, 0.0]]), DEFAULT_TOL).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
        assert!((sol.row_strategy[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matching_pennies_style_diagonal() {
        let sol = solve_zero_sum_nash(&m(&[&[1.0, 0.0], &[0.0, 1.0]]), DEFAULT_TOL).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-12);
        for p in sol.row_strategy.iter().chain(&sol.col_strategy) {
            assert!((p - 0.5).abs() < 1e-12);
        }
        assert!(sol.certificate.duality_gap.unwrap() <= DEFAULT_TOL);
    }

    #[test]
    fn one_by_one_game() {
        let sol = solve_zero_sum_nash(&m(&[&[-3.25]]), DEFAULT_TOL).unwrap();
        assert_eq!(sol.value, -3.25);
        assert_eq!(sol.row_strategy, vec![1.0]);
        assert_eq!(sol.col_strategy, vec![1.0]);
    }

    #[test]
    fn rock_paper_scissors() {
        let q = m(&[&[0.0, -1.0, 1.0], &[1.0, 0.0, -1.0], &[-1.0, 1.0, 0.0]]);
        let sol = solve_zero_sum_nash(&q, DEFAULT_TOL).unwrap();
        assert!(sol.value.abs() < 1e-12);
        for p in &sol.row_strategy {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        let q = m(&[&[0.0, f64::NAN]]);
        assert_eq!(solve_zero_sum_nash(&q, DEFAULT_TOL), Err(SolverError::NonFinite { index: 1 }));
    }

    #[test]
    fn certificate_gap_matches_recomputation() {
        let q = m(&[&[0.3, 0.9, 0.1], &[0.7, 0.2, 0.5]]);
        let sol = solve_zero_sum_nash(&q, DEFAULT_TOL).unwrap();
        let gap = duality_gap(&q, &sol.row_strategy, &sol.col_strategy);
        assert!((gap.max(0.0) - sol.certificate.duality_gap.unwrap()).abs() < 1e-15);
    }
}
