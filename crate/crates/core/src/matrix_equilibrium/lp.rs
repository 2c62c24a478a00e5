//! Dense two-phase tableau simplex for the small LPs behind the matrix solvers.
//!
//! Problems are `maximize c·x` subject to rows `a·x {<=, >=, =} b` and `x >= 0`.
//! The entering column follows Bland's lowest-index rule. Ratio-test ties go
//! to the largest pivot element for stability; after a long run of degenerate
//! pivots (the equilibrium LPs are full of zero right-hand sides) ties switch to
//! Bland's rule as well, which cannot cycle. The tableau is rebuilt from the
//! original rows every few pivots and before optimality is accepted.

use crate::error::SolverError;

use nalgebra::{DMatrix, DVector};

// reduced costs below this are treated as zero
const COST_EPS: f64 = 1e-11;
// pivot elements below this are rounding noise
const PIVOT_EPS: f64 = 1e-9;
const FEASIBILITY_EPS: f64 = 1e-9;
// consecutive degenerate pivots before falling back to Bland's tie-break
const BLAND_AFTER: usize = 50;
// pivots between rebuilds of the tableau from the original rows
const REINVERT_EVERY: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
    max_pivots: usize,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl LinearProgram {
    /// A problem maximizing `objective · x` over `x >= 0`.
    pub fn maximize(objective: Vec<f64>) -> Self {
        LinearProgram { num_vars: objective.len(), objective, rows: Vec::new(), max_pivots: 100_000 }
    }

    pub fn constraint(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.num_vars, "constraint width must match the variable count");
        self.rows.push((coeffs, rel, rhs));
        self
    }

    pub fn max_pivots(&mut self, n: usize) -> &mut Self {
        self.max_pivots = n;
        self
    }

    pub fn solve(&self) -> Result<LpSolution, SolverError> {
        Tableau::build(self).solve(self)
    }
}

struct Tableau {
    rows: usize,
    cols: usize,
    // row-major, `cols + 1` entries per row; the last one is the right-hand side
    t: Vec<f64>,
    // the initial tableau, for recomputing the final basic solution
    original: Vec<f64>,
    basis: Vec<usize>,
    artificial_start: usize,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let n = lp.num_vars;
        let m = lp.rows.len();
        // normalize to nonnegative right-hand sides
        let rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .rows
            .iter()
            .map(|(a, rel, b)| {
                if *b < 0.0 {
                    let flipped = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (a.iter().map(|x| -x).collect(), flipped, -b)
                } else {
                    (a.clone(), *rel, *b)
                }
            })
            .collect();
        let num_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let num_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let artificial_start = n + num_slack;
        let cols = artificial_start + num_art;
        let width = cols + 1;
        let mut t = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let (mut slack, mut art) = (n, artificial_start);
        for (i, (a, rel, b)) in rows.iter().enumerate() {
            let row = &mut t[i * width..(i + 1) * width];
            row[..n].copy_from_slice(a);
            row[cols] = *b;
            match rel {
                Relation::Le => {
                    row[slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Tableau { rows: m, cols, original: t.clone(), t, basis, artificial_start, pivots: 0 }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.cols + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.t[i * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let width = self.cols + 1;
        let p = self.at(r, c);
        for j in 0..width {
            self.t[r * width + j] /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * width..(r + 1) * width].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.at(i, c);
            if f != 0.0 {
                let row = &mut self.t[i * width..(i + 1) * width];
                for (x, pr) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * pr;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Replaces the tableau by `B⁻¹ [A | b]` for the current basis. Returns false,
    /// leaving the tableau untouched, if the basis matrix is numerically singular.
    fn reinvert(&mut self) -> bool {
        let width = self.cols + 1;
        let m = self.rows;
        if m == 0 {
            return true;
        }
        let basis_matrix = DMatrix::from_fn(m, m, |i, k| self.original[i * width + self.basis[k]]);
        let full = DMatrix::from_fn(m, width, |i, j| self.original[i * width + j]);
        let Some(fresh) = basis_matrix.lu().solve(&full) else { return false };
        if fresh.iter().any(|x| !x.is_finite()) {
            return false;
        }
        for i in 0..m {
            for j in 0..width {
                self.t[i * width + j] = fresh[(i, j)];
            }
            let b = self.basis[i];
            for (k, &other) in self.basis.iter().enumerate() {
                self.t[i * width + other] = if k == i { 1.0 } else { 0.0 };
            }
            debug_assert_eq!(self.t[i * width + b], 1.0);
        }
        true
    }

    /// Maximizes `cost · x` over columns `< allowed`, starting from the current basis.
    /// Minimum-ratio row for entering column `c`. Ties go to the largest pivot
    /// element, or to the lowest basic index once `bland` is set.
    fn leaving_row(&self, c: usize, bland: bool) -> Option<(usize, f64)> {
        let candidates: Vec<(usize, f64, f64)> = (0..self.rows)
            .filter_map(|i| {
                let a = self.at(i, c);
                (a > PIVOT_EPS).then(|| (i, self.rhs(i).max(0.0) / a, a))
            })
            .collect();
        let min = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let tie = 1e-12 * (1.0 + min.abs());
        let tied = candidates.into_iter().filter(|c| c.1 <= min + tie);
        let best = if bland {
            tied.min_by_key(|c| self.basis[c.0])
        } else {
            tied.max_by(|x, y| x.2.total_cmp(&y.2))
        };
        best.map(|(i, _, _)| (i, min))
    }

    fn optimize(&mut self, cost: &[f64], allowed: usize, max_pivots: usize) -> Result<(), SolverError> {
        let mut degenerate_streak = 0usize;
        let mut since_reinvert = 0usize;
        loop {
            if since_reinvert >= REINVERT_EVERY {
                self.reinvert();
                since_reinvert = 0;
            }
            if self.pivots >= max_pivots {
                return Err(SolverError::ToleranceNotMet {
                    tol: 0.0,
                    residual: f64::INFINITY,
                    iterations: self.pivots,
                    best: None,
                });
            }
            // Bland: lowest-index column with positive reduced cost
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j];
                for i in 0..self.rows {
                    d -= cost[self.basis[i]] * self.at(i, j);
                }
                if d > COST_EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else {
                // confirm optimality on a freshly rebuilt tableau
                if since_reinvert > 0 && self.reinvert() {
                    since_reinvert = 0;
                    continue;
                }
                return Ok(());
            };
            let leave = self.leaving_row(c, degenerate_streak > BLAND_AFTER);
            let Some((r, ratio)) = leave else { return Err(SolverError::Unbounded) };
            degenerate_streak = if ratio == 0.0 { degenerate_streak + 1 } else { 0 };
            self.pivot(r, c);
            since_reinvert += 1;
        }
    }

    /// Basic variable values solved from the original rows, `B x_B = b`,
    /// which removes the rounding accumulated over pivots. Falls back to the
    /// tableau right-hand side if the basis matrix is numerically singular.
    fn refined_basic_values(&self) -> Vec<f64> {
        let width = self.cols + 1;
        let m = self.rows;
        let tableau_values: Vec<f64> = (0..m).map(|i| self.rhs(i)).collect();
        if m == 0 {
            return tableau_values;
        }
        let basis_matrix = DMatrix::from_fn(m, m, |i, k| self.original[i * width + self.basis[k]]);
        let b = DVector::from_fn(m, |i, _| self.original[i * width + self.cols]);
        match basis_matrix.lu().solve(&b) {
            Some(v) if v.iter().all(|x| x.is_finite()) => {
                let drift = v.iter().zip(&tableau_values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if drift < 1e-6 {
                    v.iter().cloned().collect()
                } else {
                    tableau_values
                }
            }
            _ => tableau_values,
        }
    }

    fn solve(mut self, lp: &LinearProgram) -> Result<LpSolution, SolverError> {
        let total = self.cols;
        if self.artificial_start < total {
            let mut phase1 = vec![0.0; total];
            for c in phase1.iter_mut().skip(self.artificial_start) {
                *c = -1.0;
            }
            self.optimize(&phase1, total, lp.max_pivots)?;
            let infeasibility: f64 = (0..self.rows)
                .filter(|&i| self.basis[i] >= self.artificial_start)
                .map(|i| self.rhs(i))
                .sum();
            let scale = 1.0 + lp.rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
            if infeasibility > FEASIBILITY_EPS * scale {
                return Err(SolverError::Infeasible(infeasibility));
            }
            // drive zero-level artificials out of the basis where possible
            for i in 0..self.rows {
                if self.basis[i] >= self.artificial_start {
                    if let Some(c) = (0..self.artificial_start)
                        .filter(|j| !self.basis.contains(j))
                        .find(|&j| self.at(i, j).abs() > 1e-9)
                    {
                        self.pivot(i, c);
                    }
                }
            }
        }
        let mut cost = vec![0.0; total];
        cost[..lp.num_vars].copy_from_slice(&lp.objective);
        self.optimize(&cost, self.artificial_start, lp.max_pivots)?;
        let values = self.refined_basic_values();
        let mut x = vec![0.0; lp.num_vars];
        for (i, v) in values.into_iter().enumerate() {
            if self.basis[i] < lp.num_vars {
                x[self.basis[i]] = v.max(0.0);
            }
        }
        let objective = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        Ok(LpSolution { x, objective, pivots: self.pivots })
    }
}
