//! Primal active-set method for `max θᵀx − xᵀQx − αᵀmax(Cx − d, 0)` over
//! `Ax ≤ b`, `Bx = c`, `x ≥ 0`.
//!
//! Each soft row is tracked as below its kink, on it, or above it. Inside a
//! fixed classification the objective is a smooth concave quadratic, so each
//! iteration solves one equality-constrained KKT system and walks towards
//! its solution until a bound, an inequality or a kink blocks the step.
//! Kink rows carry a multiplier in `[0, α]`, which doubles as the optimality
//! certificate for the nonsmooth term.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::problem::ProblemInstance;

use super::{feasible_point, SolveReport, SolveStatus, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Under,
    Kink,
    Over,
}

#[derive(Debug, Clone, Copy)]
enum Row {
    Eq(usize),
    Ineq(usize),
    Kink(usize),
}

struct Face {
    x: Vector,
    rows: Vec<Row>,
    omega: Vector,
    /// `θ − 2Qx − C_Oᵀα_O − Gᵀω`; zero on free coordinates at the face optimum.
    reduced: Vector,
}

struct State<'a> {
    p: &'a ProblemInstance,
    q: &'a Matrix,
    theta: Vector,
    side: Vec<Side>,
    ineq_active: Vec<bool>,
    at_bound: Vec<bool>,
}

impl State<'_> {
    fn row_of(&self, r: Row) -> (Vec<f64>, f64) {
        let (m, rhs, i) = match r {
            Row::Eq(i) => (&self.p.eq_matrix, &self.p.eq_rhs, i),
            Row::Ineq(i) => (&self.p.ineq_matrix, &self.p.ineq_rhs, i),
            Row::Kink(i) => (&self.p.soft_matrix, &self.p.soft_rhs, i),
        };
        (m.row(i).iter().copied().collect(), rhs[i])
    }

    fn linear_term(&self) -> Vector {
        let mut lin = self.theta.clone();
        for (i, s) in self.side.iter().enumerate() {
            if *s == Side::Over {
                lin -= self.p.soft_matrix.row(i).transpose() * self.p.alpha[i];
            }
        }
        lin
    }

    fn solve_face(&self) -> Result<Face> {
        let n = self.p.n;
        let free: Vec<usize> = (0..n).filter(|j| !self.at_bound[*j]).collect();
        let mut rows: Vec<Row> = (0..self.p.m2()).map(Row::Eq).collect();
        rows.extend((0..self.p.m1()).filter(|i| self.ineq_active[*i]).map(Row::Ineq));
        rows.extend((0..self.p.m3()).filter(|i| self.side[*i] == Side::Kink).map(Row::Kink));
        let nf = free.len();
        let ng = rows.len();
        let lin = self.linear_term();
        let mut kkt = Matrix::zeros(nf + ng, nf + ng);
        let mut rhs = Vector::zeros(nf + ng);
        for (a, &ja) in free.iter().enumerate() {
            for (b, &jb) in free.iter().enumerate() {
                kkt[(a, b)] = 2.0 * self.q[(ja, jb)];
            }
            rhs[a] = lin[ja];
        }
        let mut gmat = Matrix::zeros(ng, n);
        for (k, r) in rows.iter().enumerate() {
            let (g, h) = self.row_of(*r);
            for (a, &j) in free.iter().enumerate() {
                kkt[(nf + k, a)] = g[j];
                kkt[(a, nf + k)] = g[j];
            }
            gmat.row_mut(k).copy_from_slice(&g);
            rhs[nf + k] = h;
        }
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Solver("singular working-set system in the quadratic solver".into()))?;
        let mut x = Vector::zeros(n);
        for (a, &j) in free.iter().enumerate() {
            x[j] = sol[a];
        }
        let omega = sol.rows(nf, ng).into_owned();
        let reduced = lin - self.q * &x * 2.0 - gmat.tr_mul(&omega);
        Ok(Face { x, rows, omega, reduced })
    }
}

pub(crate) fn solve_quadratic(problem: &ProblemInstance, opts: &SolverOptions) -> Result<SolveReport> {
    let q = problem
        .q
        .as_ref()
        .ok_or_else(|| Error::validation("Q", "required for QuadraticSoft"))?;
    let n = problem.n;
    let Some(mut x) = feasible_point(problem, &opts.simplex)? else {
        let x = Vector::zeros(n);
        return Ok(SolveReport {
            objective: problem.true_objective(&x)?,
            residual: problem.feasibility_violation(&x),
            x_opt: x,
            iterations: 0,
            status: SolveStatus::Infeasible,
        });
    };
    let z = &problem.soft_matrix * &x - &problem.soft_rhs;
    let mut st = State {
        p: problem,
        q,
        theta: problem.theta_or_zero(),
        side: z.iter().map(|v| if *v > 0.0 { Side::Over } else { Side::Under }).collect(),
        ineq_active: vec![false; problem.m1()],
        at_bound: vec![false; n],
    };

    for iteration in 0..opts.max_active_set {
        let face = st.solve_face()?;
        let step = &face.x - &x;
        let scale = 1.0 + x.amax();
        if step.amax() <= 1e-11 * scale {
            x = face.x.clone();
            let dual_tol = 1e-10 * (1.0 + face.reduced.amax().max(st.theta.amax()));
            let mut worst: Option<(f64, Release)> = None;
            let mut consider = |viol: f64, what: Release| {
                if viol > dual_tol && worst.as_ref().is_none_or(|(w, _)| viol > *w) {
                    worst = Some((viol, what));
                }
            };
            for (k, r) in face.rows.iter().enumerate() {
                let w = face.omega[k];
                match r {
                    Row::Eq(_) => {}
                    Row::Ineq(i) => consider(-w, Release::Ineq(*i)),
                    Row::Kink(i) => {
                        consider(-w, Release::KinkUnder(*i));
                        consider(w - problem.alpha[*i], Release::KinkOver(*i));
                    }
                }
            }
            for j in (0..n).filter(|j| st.at_bound[*j]) {
                consider(face.reduced[j], Release::Bound(j));
            }
            match worst {
                None => {
                    let residual = kkt_residual(problem, &st, &face, &x);
                    let status = if residual <= opts.tol {
                        SolveStatus::Optimal
                    } else {
                        SolveStatus::MaxIter
                    };
                    return Ok(SolveReport {
                        objective: problem.true_objective(&x)?,
                        x_opt: x,
                        iterations: iteration + 1,
                        status,
                        residual,
                    });
                }
                Some((_, Release::Ineq(i))) => st.ineq_active[i] = false,
                Some((_, Release::KinkUnder(i))) => st.side[i] = Side::Under,
                Some((_, Release::KinkOver(i))) => st.side[i] = Side::Over,
                Some((_, Release::Bound(j))) => st.at_bound[j] = false,
            }
            continue;
        }

        let pmax = step.amax();
        let mut t = 1.0;
        let mut blocker: Option<Block> = None;
        let mut limit = |ratio: f64, what: Block| {
            if ratio < t {
                t = ratio.max(0.0);
                blocker = Some(what);
            }
        };
        for j in 0..n {
            if !st.at_bound[j] && step[j] < -1e-14 * pmax {
                limit(x[j].max(0.0) / -step[j], Block::Bound(j));
            }
        }
        for i in 0..problem.m1() {
            if st.ineq_active[i] {
                continue;
            }
            let row = problem.ineq_matrix.row(i);
            let ap = row.dot(&step.transpose());
            if ap > 1e-13 * pmax * row.amax() {
                let slack = (problem.ineq_rhs[i] - row.dot(&x.transpose())).max(0.0);
                limit(slack / ap, Block::Ineq(i));
            }
        }
        for i in 0..problem.m3() {
            let row = problem.soft_matrix.row(i);
            let cp = row.dot(&step.transpose());
            let zi = row.dot(&x.transpose()) - problem.soft_rhs[i];
            let tiny = 1e-13 * pmax * row.amax();
            match st.side[i] {
                Side::Under if cp > tiny => limit((-zi).max(0.0) / cp, Block::Kink(i)),
                Side::Over if cp < -tiny => limit(zi.max(0.0) / -cp, Block::Kink(i)),
                _ => {}
            }
        }
        x += &step * t;
        match blocker {
            Some(Block::Bound(j)) => {
                st.at_bound[j] = true;
                x[j] = 0.0;
            }
            Some(Block::Ineq(i)) => st.ineq_active[i] = true,
            Some(Block::Kink(i)) => st.side[i] = Side::Kink,
            None => {}
        }
    }

    let face = st.solve_face()?;
    let residual = kkt_residual(problem, &st, &face, &x);
    Ok(SolveReport {
        objective: problem.true_objective(&x)?,
        x_opt: x,
        iterations: opts.max_active_set,
        status: SolveStatus::MaxIter,
        residual,
    })
}

enum Release {
    Ineq(usize),
    KinkUnder(usize),
    KinkOver(usize),
    Bound(usize),
}

enum Block {
    Bound(usize),
    Ineq(usize),
    Kink(usize),
}

/// Largest violation among stationarity on free coordinates, multiplier
/// signs and ranges, hard constraints and the soft-row classification.
fn kkt_residual(problem: &ProblemInstance, st: &State<'_>, face: &Face, x: &Vector) -> f64 {
    let mut r = problem.feasibility_violation(x);
    for j in 0..problem.n {
        r = r.max(if st.at_bound[j] { face.reduced[j].max(0.0) } else { face.reduced[j].abs() });
    }
    for (k, row) in face.rows.iter().enumerate() {
        let w = face.omega[k];
        match row {
            Row::Eq(_) => {}
            Row::Ineq(_) => r = r.max(-w),
            Row::Kink(i) => r = r.max(-w).max(w - problem.alpha[*i]),
        }
    }
    let z = &problem.soft_matrix * x - &problem.soft_rhs;
    for (i, s) in st.side.iter().enumerate() {
        r = r.max(match s {
            Side::Under => z[i],
            Side::Kink => z[i].abs(),
            Side::Over => -z[i],
        });
    }
    r
}
