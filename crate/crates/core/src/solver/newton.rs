use crate::error::{Error, Result};
use nalgebra::Cholesky;

use crate::linalg::{inf_norm, Matrix, Vector};
use crate::problem::{ProblemInstance, UnifiedForm};
use crate::surrogate::{
    check_k, segment_state, surrogate_grad_x, surrogate_objective, system_matrix, SegmentState, SegmentSystem,
};

use super::{SolveReport, SolveStatus, SolverOptions};

const ARMIJO: f64 = 1e-4;
const UNBOUNDED_NORM: f64 = 1e8;

/// Maximizes the smoothed objective starting from the origin.
pub fn solve_surrogate(uf: &UnifiedForm, problem: &ProblemInstance, k: f64, opts: &SolverOptions) -> Result<(SolveReport, SegmentState)> {
    solve_surrogate_from(uf, problem, k, &Vector::zeros(problem.n), opts)
}

/// Segment-fixing Newton method with an Armijo line search.
///
/// Each step solves the closed-form system of the segment the current point
/// lies on. When that system is singular (fewer than `n` rows on quadratic
/// pieces) the step uses the regularized system `(H + μI)d = ∇` instead, with
/// `μ` growing whenever the line search fails. Every accepted step increases
/// the objective.
pub fn solve_surrogate_from(
    uf: &UnifiedForm,
    problem: &ProblemInstance,
    k: f64,
    x0: &Vector,
    opts: &SolverOptions,
) -> Result<(SolveReport, SegmentState)> {
    check_k(k)?;
    if x0.len() != problem.n || uf.cp.ncols() != problem.n {
        return Err(Error::dimension("surrogate start point", problem.n, x0.len()));
    }
    let f = |x: &Vector| surrogate_objective(uf, problem, x, k);
    let mut x = x0.clone();
    let mut fx = f(&x);
    let mut newton_steps = 0;
    let mut damped_steps = 0;
    let base_mu = 1e-8 * curvature_bound(uf, problem, k);
    let mut mu = base_mu;

    let finish = |x: Vector, status: SolveStatus, iterations: usize| {
        let residual = inf_norm(&surrogate_grad_x(uf, problem, &x, k));
        let state = segment_state(&uf.z(&x), k);
        let report = SolveReport {
            objective: surrogate_objective(uf, problem, &x, k),
            x_opt: x,
            iterations,
            status,
            residual,
        };
        Ok((report, state))
    };

    loop {
        let grad = surrogate_grad_x(uf, problem, &x, k);
        let iterations = newton_steps + damped_steps;
        if inf_norm(&grad) <= opts.tol {
            return finish(x, SolveStatus::Optimal, iterations);
        }
        if inf_norm(&x) > UNBOUNDED_NORM {
            return finish(x, SolveStatus::Unbounded, iterations);
        }
        if newton_steps >= opts.max_newton || damped_steps >= opts.max_fallback {
            return finish(x, SolveStatus::MaxIter, iterations);
        }

        let state = segment_state(&uf.z(&x), k);
        let dir = match SegmentSystem::new(uf, problem, &state, k) {
            Ok(sys) => {
                newton_steps += 1;
                let xn = sys.x();
                if segment_state(&uf.z(&xn), k) == state && inf_norm(&surrogate_grad_x(uf, problem, &xn, k)) <= opts.tol {
                    return finish(xn, SolveStatus::Optimal, newton_steps + damped_steps);
                }
                xn - &x
            }
            Err(Error::SingularSystem { .. }) => {
                damped_steps += 1;
                let h = system_matrix(uf, problem, &state) + Matrix::identity(problem.n, problem.n) * mu;
                match Cholesky::new(h) {
                    Some(ch) => ch.solve(&grad),
                    None => grad.clone(),
                }
            }
            Err(e) => return Err(e),
        };
        let slope = dir.dot(&grad);
        let (dir, slope) = if slope > 0.0 { (dir, slope) } else { (grad.clone(), grad.norm_squared()) };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..200 {
            let xt = &x + &dir * t;
            let ft = f(&xt);
            if ft >= fx + ARMIJO * t * slope {
                x = xt;
                fx = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if accepted {
            mu = (mu * 0.1).max(base_mu);
        } else if mu < 1e12 * base_mu.max(1e-300) {
            mu *= 1e3;
        } else {
            // No ascent possible at working precision.
            let status = if inf_norm(&grad) <= opts.tol * 1e3 {
                SolveStatus::Optimal
            } else {
                SolveStatus::MaxIter
            };
            return finish(x, status, newton_steps + damped_steps);
        }
    }
}

/// Upper bound on the surrogate Hessian norm, used to seed gradient steps.
fn curvature_bound(uf: &UnifiedForm, problem: &ProblemInstance, k: f64) -> f64 {
    let quad = problem.utility_curvature().norm();
    let pen: f64 = (0..uf.rows()).map(|i| uf.gamma[i] * uf.cp.row(i).norm_squared()).sum();
    (quad + 2.0 * k * pen).max(1e-12)
}
