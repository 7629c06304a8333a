//! Reference solvers for the original constrained problems, the smoothed
//! surrogate maximizer, and a brute-force grid oracle for small instances.

mod newton;
mod oracle;
mod qp;
pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{vstack, Matrix, Vector};
use crate::problem::{ObjectiveFamily, ProblemInstance};

pub use newton::{solve_surrogate, solve_surrogate_from};
pub use oracle::{brute_force_oracle, OracleMode};
pub use simplex::{solve_lp, LinearProgram, LpSolution, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x_opt: Vector,
    pub objective: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Optimality certificate: primal/dual infeasibility for the reference
    /// solvers, `‖∇‖∞` for the surrogate solver.
    pub residual: f64,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Converts a non-optimal status into an error.
    pub fn require_optimal(self) -> Result<Self> {
        match self.status {
            SolveStatus::Optimal => Ok(self),
            s => Err(Error::Solver(format!("status {s:?} (residual {:.3e})", self.residual))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Certificate tolerance for `Optimal`.
    pub tol: f64,
    pub simplex: SimplexOptions,
    /// Full Newton steps of the surrogate solver.
    pub max_newton: usize,
    /// Regularized steps taken on singular segments.
    pub max_fallback: usize,
    /// Working-set changes allowed in the quadratic active-set method.
    pub max_active_set: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            simplex: SimplexOptions::default(),
            max_newton: 1000,
            max_fallback: 10_000,
            max_active_set: 10_000,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }
}

/// Slack rewrite of a linear or asymmetric instance: variables `[x; z]`
/// (`[x; z₁; z₂]` for the asymmetric family) with `z ≥ Cx − d`, `z ≥ 0`.
pub fn slack_lp(problem: &ProblemInstance) -> Result<LinearProgram> {
    problem.validate_shapes()?;
    let n = problem.n;
    let m3 = problem.m3();
    let asym = problem.family == ObjectiveFamily::AsymmetricSoft;
    let nz = if asym { 2 * m3 } else { m3 };
    let nv = n + nz;
    let mut objective = Vector::zeros(nv);
    objective.rows_mut(0, n).copy_from(&problem.theta_or_zero());
    objective.rows_mut(n, m3).copy_from(&(-&problem.alpha));

    let mut over = Matrix::zeros(m3, nv);
    over.view_mut((0, 0), (m3, n)).copy_from(&problem.soft_matrix);
    over.view_mut((0, n), (m3, m3)).fill_with_identity();
    over.view_mut((0, n), (m3, m3)).neg_mut();
    let mut blocks = vec![over];
    let mut rhs = vec![problem.soft_rhs.clone()];
    if asym {
        let a2 = problem.alpha2.as_ref().expect("validated asymmetric instance");
        objective.rows_mut(n + m3, m3).copy_from(&(-a2));
        let mut under = Matrix::zeros(m3, nv);
        under.view_mut((0, 0), (m3, n)).copy_from(&(-&problem.soft_matrix));
        under.view_mut((0, n + m3), (m3, m3)).fill_with_identity();
        under.view_mut((0, n + m3), (m3, m3)).neg_mut();
        blocks.push(under);
        rhs.push(-&problem.soft_rhs);
    }
    let mut ineq = Matrix::zeros(problem.m1(), nv);
    ineq.view_mut((0, 0), (problem.m1(), n)).copy_from(&problem.ineq_matrix);
    blocks.push(ineq);
    rhs.push(problem.ineq_rhs.clone());
    let mut eq = Matrix::zeros(problem.m2(), nv);
    eq.view_mut((0, 0), (problem.m2(), n)).copy_from(&problem.eq_matrix);

    let refs: Vec<&Matrix> = blocks.iter().collect();
    let ub_rhs = Vector::from_iterator(rhs.iter().map(|v| v.len()).sum(), rhs.iter().flat_map(|v| v.iter().copied()));
    Ok(LinearProgram {
        objective,
        ub_matrix: vstack(&refs, nv),
        ub_rhs,
        eq_matrix: eq,
        eq_rhs: problem.eq_rhs.clone(),
    })
}

/// Exact optimum of the original (nonsmooth, hard-constrained) problem.
///
/// Linear and asymmetric instances go through the slack LP and the simplex
/// method; quadratic instances use a primal active-set method on the
/// piecewise-quadratic objective.
pub fn solve_original(problem: &ProblemInstance, opts: &SolverOptions) -> Result<SolveReport> {
    problem.validate_shapes()?;
    match problem.family {
        ObjectiveFamily::LinearSoft | ObjectiveFamily::AsymmetricSoft => {
            let lp = slack_lp(problem)?;
            let sol = solve_lp(&lp, &opts.simplex)?;
            let x = sol.y.rows(0, problem.n).into_owned();
            let mut status = sol.status;
            if status == SolveStatus::Optimal && sol.residual > opts.tol {
                status = SolveStatus::MaxIter;
            }
            Ok(SolveReport {
                objective: problem.true_objective(&x)?,
                x_opt: x,
                iterations: sol.iterations,
                status,
                residual: sol.residual,
            })
        }
        ObjectiveFamily::QuadraticSoft => qp::solve_quadratic(problem, opts),
    }
}

/// A point satisfying the hard constraints, found by a zero-objective LP.
pub(crate) fn feasible_point(problem: &ProblemInstance, opts: &SimplexOptions) -> Result<Option<Vector>> {
    let n = problem.n;
    if problem.m2() == 0 {
        // b ≥ 0 makes the origin feasible.
        return Ok(Some(Vector::zeros(n)));
    }
    let lp = LinearProgram {
        objective: Vector::zeros(n),
        ub_matrix: problem.ineq_matrix.clone(),
        ub_rhs: problem.ineq_rhs.clone(),
        eq_matrix: problem.eq_matrix.clone(),
        eq_rhs: problem.eq_rhs.clone(),
    };
    let sol = solve_lp(&lp, opts)?;
    Ok(match sol.status {
        SolveStatus::Optimal => Some(sol.y),
        _ => None,
    })
}
