//! Dense two-phase tableau simplex for `max cᵀy` subject to `Gy ≤ h`,
//! `Ey = f`, `y ≥ 0`.
//!
//! Pivoting uses the largest reduced cost and switches to Bland's rule
//! after a run of degenerate pivots, which rules out cycling while keeping
//! the iteration count low on nondegenerate problems.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

use super::SolveStatus;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vector,
    pub ub_matrix: Matrix,
    pub ub_rhs: Vector,
    pub eq_matrix: Matrix,
    pub eq_rhs: Vector,
}

impl LinearProgram {
    pub fn vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let nv = self.vars();
        if self.ub_matrix.ncols() != nv || self.eq_matrix.ncols() != nv {
            return Err(Error::dimension("LP constraint columns", nv, self.ub_matrix.ncols().max(self.eq_matrix.ncols())));
        }
        if self.ub_rhs.len() != self.ub_matrix.nrows() {
            return Err(Error::dimension("LP inequality rhs", self.ub_matrix.nrows(), self.ub_rhs.len()));
        }
        if self.eq_rhs.len() != self.eq_matrix.nrows() {
            return Err(Error::dimension("LP equality rhs", self.eq_matrix.nrows(), self.eq_rhs.len()));
        }
        Ok(())
    }

    /// Largest violation of the constraints at `y`.
    pub fn primal_violation(&self, y: &Vector) -> f64 {
        let ub = (&self.ub_matrix * y - &self.ub_rhs).iter().fold(0.0_f64, |m, v| m.max(*v));
        let eq = (&self.eq_matrix * y - &self.eq_rhs).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let neg = y.iter().fold(0.0_f64, |m, v| m.max(-v));
        ub.max(eq).max(neg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Smallest pivot element accepted in the ratio test.
    pub pivot_tol: f64,
    /// Reduced-cost threshold for optimality.
    pub opt_tol: f64,
    /// Phase-one objective above which the problem is declared infeasible.
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub degenerate_streak: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            pivot_tol: 1e-10,
            opt_tol: 1e-10,
            feas_tol: 1e-8,
            max_iter: 100_000,
            degenerate_streak: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub y: Vector,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Max of primal violation and positive reduced cost at termination.
    pub residual: f64,
}

struct Tableau {
    rows: usize,
    width: usize,
    /// `rows + 1` rows of `width + 1` entries; the last row holds reduced
    /// costs and `−value`, the last column holds the right-hand side.
    data: Vec<f64>,
    basis: Vec<usize>,
    allowed: Vec<bool>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.width + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width)
    }

    fn cost_row(&self) -> &[f64] {
        let s = self.rows * (self.width + 1);
        &self.data[s..s + self.width]
    }

    fn value(&self) -> f64 {
        -self.at(self.rows, self.width)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width + 1;
        let p = self.at(r, c);
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for v in prow.iter_mut() {
            *v /= p;
        }
        prow[c] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[c];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
                row[c] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        for i in 0..self.rows {
            let idx = i * w + self.width;
            if self.data[idx] < 0.0 && self.data[idx] > -1e-13 {
                self.data[idx] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Resets the cost row to `cost − c_Bᵀ B⁻¹N` for the current basis.
    fn set_costs(&mut self, cost: &[f64]) {
        let w = self.width + 1;
        let mut row = vec![0.0; w];
        row[..self.width].copy_from_slice(cost);
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    row[j] -= cb * self.data[i * w + j];
                }
            }
        }
        let s = self.rows * w;
        self.data[s..s + w].copy_from_slice(&row);
    }

    fn entering(&self, opt_tol: f64, bland: bool) -> Option<usize> {
        let costs = self.cost_row();
        let mut best: Option<(usize, f64)> = None;
        for (j, &r) in costs.iter().enumerate() {
            if !self.allowed[j] || r <= opt_tol {
                continue;
            }
            if bland {
                return Some(j);
            }
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((j, r));
            }
        }
        best.map(|(j, _)| j)
    }

    fn leaving(&self, c: usize, pivot_tol: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let a = self.at(i, c);
            if a <= pivot_tol {
                continue;
            }
            let ratio = self.rhs(i) / a;
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                    if (!tie && ratio < br) || (tie && self.basis[i] < self.basis[bi]) {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        best
    }

    /// Runs primal simplex iterations on the current cost row.
    fn optimize(&mut self, opts: &SimplexOptions, iterations: &mut usize) -> SolveStatus {
        let mut streak = 0;
        loop {
            if *iterations >= opts.max_iter {
                return SolveStatus::MaxIter;
            }
            let bland = streak >= opts.degenerate_streak;
            let Some(c) = self.entering(opts.opt_tol, bland) else {
                return SolveStatus::Optimal;
            };
            let Some((r, ratio)) = self.leaving(c, opts.pivot_tol) else {
                return SolveStatus::Unbounded;
            };
            if ratio <= 1e-12 {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(r, c);
            *iterations += 1;
        }
    }
}

/// Solves the LP. Infeasible and unbounded problems are reported through
/// the status rather than as errors.
pub fn solve_lp(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution> {
    lp.validate()?;
    let nv = lp.vars();
    let m_ub = lp.ub_matrix.nrows();
    let m_eq = lp.eq_matrix.nrows();
    let rows = m_ub + m_eq;
    let flipped_ub: Vec<bool> = lp.ub_rhs.iter().map(|h| *h < 0.0).collect();
    let n_art = flipped_ub.iter().filter(|f| **f).count() + m_eq;
    let width = nv + m_ub + n_art;
    let w = width + 1;
    let mut data = vec![0.0; (rows + 1) * w];
    let mut basis = vec![0; rows];
    let mut art = nv + m_ub;
    for i in 0..m_ub {
        let sign = if flipped_ub[i] { -1.0 } else { 1.0 };
        let row = &mut data[i * w..(i + 1) * w];
        for j in 0..nv {
            row[j] = sign * lp.ub_matrix[(i, j)];
        }
        row[nv + i] = sign;
        row[width] = sign * lp.ub_rhs[i];
        if flipped_ub[i] {
            row[art] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = nv + i;
        }
    }
    for k in 0..m_eq {
        let i = m_ub + k;
        let sign = if lp.eq_rhs[k] < 0.0 { -1.0 } else { 1.0 };
        let row = &mut data[i * w..(i + 1) * w];
        for j in 0..nv {
            row[j] = sign * lp.eq_matrix[(k, j)];
        }
        row[width] = sign * lp.eq_rhs[k];
        row[art] = 1.0;
        basis[i] = art;
        art += 1;
    }
    let mut tab = Tableau {
        rows,
        width,
        data,
        basis,
        allowed: vec![true; width],
    };
    let mut iterations = 0;

    if n_art > 0 {
        let mut phase1 = vec![0.0; width];
        phase1[nv + m_ub..].iter_mut().for_each(|c| *c = -1.0);
        tab.set_costs(&phase1);
        let status = tab.optimize(opts, &mut iterations);
        if status == SolveStatus::MaxIter {
            return Ok(finish(lp, &tab, nv, SolveStatus::MaxIter, iterations));
        }
        if -tab.value() > opts.feas_tol {
            return Ok(finish(lp, &tab, nv, SolveStatus::Infeasible, iterations));
        }
        // Drive zero-valued artificials out of the basis where possible;
        // rows where that fails are redundant and stay inert.
        for r in 0..rows {
            if tab.basis[r] < nv + m_ub {
                continue;
            }
            let col = (0..nv + m_ub)
                .filter(|&j| tab.at(r, j).abs() > 1e-9)
                .max_by(|&a, &b| tab.at(r, a).abs().total_cmp(&tab.at(r, b).abs()));
            if let Some(c) = col {
                tab.pivot(r, c);
                iterations += 1;
            }
        }
        for j in nv + m_ub..width {
            tab.allowed[j] = false;
        }
    }

    let mut cost = vec![0.0; width];
    cost[..nv].copy_from_slice(lp.objective.as_slice());
    tab.set_costs(&cost);
    let status = tab.optimize(opts, &mut iterations);
    Ok(finish(lp, &tab, nv, status, iterations))
}

fn finish(lp: &LinearProgram, tab: &Tableau, nv: usize, status: SolveStatus, iterations: usize) -> LpSolution {
    let mut y = Vector::zeros(nv);
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < nv {
            y[b] = tab.rhs(r).max(0.0);
        }
    }
    let dual = tab
        .cost_row()
        .iter()
        .zip(&tab.allowed)
        .filter(|(_, a)| **a)
        .fold(0.0_f64, |m, (r, _)| m.max(*r));
    let residual = lp.primal_violation(&y).max(dual);
    LpSolution {
        objective: lp.objective.dot(&y),
        y,
        status,
        iterations,
        residual,
    }
}
