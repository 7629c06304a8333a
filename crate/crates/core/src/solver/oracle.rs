use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::problem::{ProblemInstance, UnifiedForm};

/// Objective scanned by [`brute_force_oracle`].
#[derive(Debug, Clone, Copy)]
pub enum OracleMode<'a> {
    /// True objective over grid points whose hard-constraint violation is at most `feas_tol`.
    Constrained { feas_tol: f64 },
    /// Nonsmooth penalized objective `g − γᵀmax(C′x − d′, 0)`, no feasibility filter.
    Penalized(&'a UnifiedForm),
}

/// Exhaustive argmax over the grid `lo + (hi − lo)·i/steps`, `i = 0..=steps`
/// per axis. Points are visited in lexicographic order and replaced only on
/// strict improvement, so ties resolve to the lexicographically smallest point.
pub fn brute_force_oracle(problem: &ProblemInstance, lo: &Vector, hi: &Vector, steps: usize, mode: OracleMode<'_>) -> Result<Vector> {
    let n = problem.n;
    if n > 3 {
        return Err(Error::Unsupported(format!("grid oracle supports n ≤ 3, got {n}")));
    }
    if steps == 0 || steps > 2000 {
        return Err(Error::validation("steps", "must be in 1..=2000"));
    }
    if lo.len() != n || hi.len() != n {
        return Err(Error::dimension("grid bounds", n, lo.len().min(hi.len())));
    }
    let axis = |d: usize, i: usize| lo[d] + (hi[d] - lo[d]) * i as f64 / steps as f64;
    let mut idx = vec![0usize; n];
    let mut x = Vector::zeros(n);
    let mut best: Option<(f64, Vector)> = None;
    loop {
        for d in 0..n {
            x[d] = axis(d, idx[d]);
        }
        let value = match mode {
            OracleMode::Constrained { feas_tol } => {
                if problem.feasibility_violation(&x) <= feas_tol {
                    Some(problem.true_objective(&x)?)
                } else {
                    None
                }
            }
            OracleMode::Penalized(uf) => Some(uf.penalized_objective(problem, &x)),
        };
        if let Some(v) = value {
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, x.clone()));
            }
        }
        // odometer increment, last axis fastest
        let mut d = n;
        loop {
            if d == 0 {
                return best
                    .map(|(_, x)| x)
                    .ok_or_else(|| Error::Solver("no feasible grid point".into()));
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] <= steps {
                break;
            }
            idx[d] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn constant_objective_picks_first_point() {
        let p = ProblemInstance::linear_soft(Vector::zeros(2));
        let x = brute_force_oracle(&p, &Vector::from_vec(vec![0.0, 0.0]), &Vector::from_vec(vec![1.0, 1.0]), 10, OracleMode::Constrained { feas_tol: 0.0 }).unwrap();
        assert_eq!(x, Vector::zeros(2));
    }

    #[test]
    fn triangle_within_resolution() {
        let p = ProblemInstance::linear_soft(Vector::from_vec(vec![1.0, 1.0]))
            .with_inequalities(Matrix::from_row_slice(1, 2, &[1.0, 1.0]), Vector::from_vec(vec![1.0]));
        let steps = 1000;
        let x = brute_force_oracle(&p, &Vector::zeros(2), &Vector::from_element(2, 1.0), steps, OracleMode::Constrained { feas_tol: 1e-12 }).unwrap();
        assert!((p.true_objective(&x).unwrap() - 1.0).abs() <= 2.0 / steps as f64);
    }
}
