//! Randomized verification routines shared by the integration tests and the
//! acceptance target. Each routine draws its own instances from a seed and
//! returns statistics; the callers decide the thresholds.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use softpo_core::datagen::{random_asymmetric_instance, random_linear_instance, random_quadratic_instance, InstanceShape};
use softpo_core::linalg::stream_rng;
use softpo_core::penalty::{default_gradient_bound, empirical_beta, theorem_beta};
use softpo_core::problem::RowKind;
use softpo_core::solver::{brute_force_oracle, solve_original, solve_surrogate, solve_surrogate_from, OracleMode, SolverOptions};
use softpo_core::surrogate::{
    breakpoint_gap, finite_difference, jacobian_x_theta, surrogate_grad_x, surrogate_objective, LossContext,
    SegmentState, SegmentSystem,
};
use softpo_core::{unify, Matrix, ObjectiveFamily, ProblemInstance, UnifiedForm, Vector};

/// Outcome of a randomized gradient comparison.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradStats {
    pub checked: usize,
    /// Draws discarded as singular or too close to a breakpoint.
    pub discarded: usize,
    pub worst_rel: f64,
}

impl GradStats {
    fn record(&mut self, analytic: &[f64], numeric: &[f64]) {
        let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = norm(analytic).max(norm(numeric)).max(1e-8);
        self.worst_rel = self.worst_rel.max(diff / scale);
        self.checked += 1;
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimum distance from any penalty row to a surrogate breakpoint before a
/// point counts as segment-stable for finite differences.
const STABLE_GAP: f64 = 1e-4;
const FD_STEP: f64 = 1e-6;
const MAX_DRAWS: usize = 20_000;

/// A surrogate optimum on a fixed, well-conditioned segment.
pub struct StableCase {
    pub problem: ProblemInstance,
    pub uf: UnifiedForm,
    pub k: f64,
    pub x: Vector,
    pub state: SegmentState,
}

fn draw_problem(rng: &mut ChaCha8Rng, family: ObjectiveFamily, max_n: usize) -> ProblemInstance {
    let n = rng.random_range(2..=max_n);
    let shape = InstanceShape {
        n,
        m1: n,
        m3: n / 2 + 1,
    };
    match family {
        ObjectiveFamily::LinearSoft => random_linear_instance(rng, shape),
        ObjectiveFamily::QuadraticSoft => random_quadratic_instance(rng, shape),
        ObjectiveFamily::AsymmetricSoft => random_asymmetric_instance(rng, shape),
    }
}

/// Draws a problem, solves the surrogate, and keeps it only if the optimum
/// is segment-stable and its system is well conditioned.
pub fn draw_stable_case(rng: &mut ChaCha8Rng, family: ObjectiveFamily, max_n: usize) -> Option<StableCase> {
    let problem = draw_problem(rng, family, max_n);
    let k = [1.0, 5.0][rng.random_range(0..2)];
    let beta = 2.0 * default_gradient_bound(&problem).max(1.0);
    let uf = unify(&problem, beta).ok()?;
    let (report, state) = solve_surrogate(&uf, &problem, k, &SolverOptions::default()).ok()?;
    if !report.is_optimal() || breakpoint_gap(&uf.z(&report.x_opt), k) < STABLE_GAP {
        return None;
    }
    let sys = SegmentSystem::new(&uf, &problem, &state, k).ok()?;
    if sys.condition() > 1e8 {
        return None;
    }
    Some(StableCase {
        problem,
        uf,
        k,
        x: report.x_opt,
        state,
    })
}

fn stable_cases(seed: u64, count: usize, family: ObjectiveFamily, max_n: usize, stats: &mut GradStats) -> Vec<StableCase> {
    let mut rng = stream_rng(seed, 1);
    let mut out = Vec::with_capacity(count);
    for _ in 0..MAX_DRAWS {
        if out.len() == count {
            break;
        }
        match draw_stable_case(&mut rng, family, max_n) {
            Some(c) => out.push(c),
            None => stats.discarded += 1,
        }
    }
    out
}

/// Surrogate optimum of a perturbed problem warm-started at `x0`, provided
/// the segment did not change.
fn resolve_same_segment(problem: &ProblemInstance, uf: &UnifiedForm, k: f64, x0: &Vector, state: &SegmentState) -> Option<Vector> {
    let (r, s) = solve_surrogate_from(uf, problem, k, x0, &SolverOptions::with_tol(1e-12)).ok()?;
    (r.is_optimal() && &s == state).then_some(r.x_opt)
}

/// `∂f̄/∂x` against central differences of the surrogate objective at random
/// segment-stable points (not optima).
pub fn check_grad_x(seed: u64, count: usize) -> GradStats {
    let mut stats = GradStats::default();
    let mut rng = stream_rng(seed, 2);
    let families = [ObjectiveFamily::LinearSoft, ObjectiveFamily::QuadraticSoft, ObjectiveFamily::AsymmetricSoft];
    for _ in 0..MAX_DRAWS {
        if stats.checked == count {
            break;
        }
        let family = families[rng.random_range(0..3)];
        let p = draw_problem(&mut rng, family, 20);
        let k = [0.2, 1.0, 5.0, 25.0][rng.random_range(0..4)];
        let uf = unify(&p, 3.0).expect("valid instance");
        let x = Vector::from_fn(p.n, |_, _| rng.random_range(-0.5..1.5));
        if breakpoint_gap(&uf.z(&x), k) < STABLE_GAP {
            stats.discarded += 1;
            continue;
        }
        let g = surrogate_grad_x(&uf, &p, &x, k);
        let fd = finite_difference(|y| surrogate_objective(&uf, &p, y, k), &x, FD_STEP);
        stats.record(g.as_slice(), fd.as_slice());
    }
    stats
}

/// `∂x/∂θ = H⁻¹` against finite differences of re-solved surrogate optima.
pub fn check_jacobian_theta(seed: u64, count: usize) -> GradStats {
    let mut stats = GradStats::default();
    let mut rng = stream_rng(seed, 3);
    let mut remaining = count;
    for family in [ObjectiveFamily::LinearSoft, ObjectiveFamily::QuadraticSoft] {
        let want = if family == ObjectiveFamily::LinearSoft { remaining / 2 } else { remaining };
        let cases = stable_cases(rng.random(), want, family, 12, &mut stats);
        for c in &cases {
            let j = jacobian_x_theta(&c.uf, &c.problem, &c.state, c.k).expect("stable case");
            let theta = c.problem.theta_or_zero();
            let mut fd = Matrix::zeros(c.problem.n, c.problem.n);
            let mut ok = true;
            for col in 0..c.problem.n {
                let side = |sign: f64| {
                    let mut t = theta.clone();
                    t[col] += sign * FD_STEP;
                    let p = c.problem.with_target_params(&t).expect("theta target");
                    resolve_same_segment(&p, &c.uf, c.k, &c.x, &c.state)
                };
                match (side(1.0), side(-1.0)) {
                    (Some(a), Some(b)) => fd.set_column(col, &((a - b) / (2.0 * FD_STEP))),
                    _ => ok = false,
                }
            }
            if ok {
                stats.record(j.as_slice(), fd.as_slice());
            } else {
                stats.discarded += 1;
            }
        }
        remaining -= cases.len().min(remaining);
    }
    stats
}

/// `d(uᵀx)/dQ = 2pxᵀ` with `p = −H⁻¹u`, compared along symmetric directions
/// `E_ij + E_ji` (and `E_ii`), which keep `Q` symmetric.
pub fn check_grad_q(seed: u64, count: usize) -> GradStats {
    let mut stats = GradStats::default();
    let cases = stable_cases(seed, count, ObjectiveFamily::QuadraticSoft, 10, &mut stats);
    let mut rng = stream_rng(seed, 4);
    for c in &cases {
        let n = c.problem.n;
        let u = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let ctx = LossContext {
            pred: &c.problem,
            uf_pred: &c.uf,
            truth: &c.problem,
            uf_true: &c.uf,
            k: c.k,
        };
        let g = ctx.grad_q(&c.x, &c.state, &u).expect("stable case");
        let q = c.problem.q.clone().expect("quadratic instance");
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        let mut ok = true;
        for i in 0..n {
            for j in i..n {
                let side = |sign: f64| {
                    let mut qp = q.clone();
                    qp[(i, j)] += sign * FD_STEP;
                    if i != j {
                        qp[(j, i)] += sign * FD_STEP;
                    }
                    let mut p = c.problem.clone();
                    p.q = Some(qp);
                    resolve_same_segment(&p, &c.uf, c.k, &c.x, &c.state).map(|x| u.dot(&x))
                };
                match (side(1.0), side(-1.0)) {
                    (Some(a), Some(b)) => numeric.push((a - b) / (2.0 * FD_STEP)),
                    _ => ok = false,
                }
                analytic.push(if i == j { g[(i, i)] } else { g[(i, j)] + g[(j, i)] });
            }
        }
        if ok {
            stats.record(&analytic, &numeric);
        } else {
            stats.discarded += 1;
        }
    }
    stats
}

/// `d(uᵀx)/dC` (stacked-row gradient folded onto `C`) against finite
/// differences on every entry of `C`, for quadratic and asymmetric instances.
pub fn check_grad_c(seed: u64, count: usize) -> GradStats {
    let mut stats = GradStats::default();
    let mut rng = stream_rng(seed, 5);
    let mut cases = stable_cases(rng.random(), count / 2, ObjectiveFamily::QuadraticSoft, 10, &mut stats);
    let rest = count - cases.len();
    cases.extend(stable_cases(rng.random(), rest, ObjectiveFamily::AsymmetricSoft, 10, &mut stats));
    for c in &cases {
        let n = c.problem.n;
        let u = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let ctx = LossContext {
            pred: &c.problem,
            uf_pred: &c.uf,
            truth: &c.problem,
            uf_true: &c.uf,
            k: c.k,
        };
        let g = ctx.grad_c(&c.x, &c.state, &u).expect("stable case");
        let beta = c.uf.gamma[c.uf.rows_of(RowKind::NonNeg).next().expect("nonneg rows")];
        let cmat = c.problem.soft_matrix.clone();
        let mut numeric = Matrix::zeros(cmat.nrows(), n);
        let mut ok = true;
        for i in 0..cmat.nrows() {
            for j in 0..n {
                let side = |sign: f64| {
                    let mut p = c.problem.clone();
                    p.soft_matrix[(i, j)] += sign * FD_STEP;
                    let uf = unify(&p, beta).expect("valid perturbation");
                    resolve_same_segment(&p, &uf, c.k, &c.x, &c.state).map(|x| u.dot(&x))
                };
                match (side(1.0), side(-1.0)) {
                    (Some(a), Some(b)) => numeric[(i, j)] = (a - b) / (2.0 * FD_STEP),
                    _ => ok = false,
                }
            }
        }
        if ok {
            stats.record(g.as_slice(), numeric.as_slice());
        } else {
            stats.discarded += 1;
        }
    }
    stats
}

/// Outcome of grid-oracle comparisons.
#[derive(Debug, Clone, Copy, Default)]
pub struct GridStats {
    pub instances: usize,
    pub within: usize,
    /// Instances whose two grid argmaxes are within one step of each other
    /// (only filled by the exact-penalty check; `within` there uses the
    /// resolution-aware argmax set).
    pub strict_within: usize,
    /// Largest discrepancy, in grid steps (argmax distance) or in
    /// objective-resolution units (objective gap).
    pub worst: f64,
}

fn grid_box(p: &ProblemInstance, margin: f64) -> (Vector, Vector) {
    // A ≥ 0 with b ≥ 0 bounds every coordinate by min_i b_i / A_ij.
    let hi = Vector::from_fn(p.n, |j, _| {
        (0..p.m1())
            .filter(|&i| p.ineq_matrix[(i, j)] > 0.0)
            .map(|i| p.ineq_rhs[i] / p.ineq_matrix[(i, j)])
            .fold(f64::INFINITY, f64::min)
    });
    let pad = hi.max() * margin;
    (Vector::from_element(p.n, -pad), hi.add_scalar(pad))
}

/// Objective resolution of a grid: Lipschitz constant of the true objective
/// times the diagonal of one grid cell.
fn grid_resolution(p: &ProblemInstance, step: f64) -> f64 {
    let mut lipschitz = p.theta_or_zero().norm();
    for i in 0..p.m3() {
        let a2 = p.alpha2.as_ref().map_or(0.0, |a| a[i]);
        lipschitz += (p.alpha[i] + a2) * p.soft_matrix.row(i).norm();
    }
    lipschitz * step * (p.n as f64).sqrt()
}

/// Feasible grid points whose true objective is within `tol` of the best one.
fn near_optimal_grid(p: &ProblemInstance, lo: &Vector, hi: &Vector, steps: usize, tol: f64) -> Vec<Vector> {
    let axis = |d: usize, i: usize| lo[d] + (hi[d] - lo[d]) * i as f64 / steps as f64;
    let mut pts = Vec::new();
    for i in 0..=steps {
        for j in 0..=steps {
            let x = Vector::from_vec(vec![axis(0, i), axis(1, j)]);
            if p.feasibility_violation(&x) <= 1e-12 {
                let f = p.true_objective(&x).expect("objective");
                pts.push((f, x));
            }
        }
    }
    let best = pts.iter().map(|(f, _)| *f).fold(f64::NEG_INFINITY, f64::max);
    pts.into_iter().filter(|(f, _)| *f >= best - tol).map(|(_, x)| x).collect()
}

/// Penalized vs constrained grid argmax for n = 2 LinearSoft instances with
/// `β` from the theorem bounds. Distances are measured in grid steps.
///
/// `strict_within` compares the two argmax points directly. `within` accepts
/// the penalized argmax when it lies within one step of any feasible grid
/// point whose objective is within the grid's objective resolution of the
/// constrained maximum: on nearly flat edges the grid cannot order such
/// points, so its argmax among them is arbitrary.
pub fn exact_penalty_equivalence(seed: u64, count: usize, steps: usize) -> GridStats {
    let mut rng = stream_rng(seed, 6);
    let mut stats = GridStats::default();
    while stats.instances < count {
        let p = random_linear_instance(&mut rng, InstanceShape { n: 2, m1: 2, m3: 1 });
        let e = default_gradient_bound(&p);
        let beta = theorem_beta(&p, e, 1.0, seed).expect("bound");
        let uf = unify(&p, beta).expect("valid instance");
        let (lo, hi) = grid_box(&p, 0.25);
        let step = (&hi - &lo).max() / steps as f64;
        let pen = brute_force_oracle(&p, &lo, &hi, steps, OracleMode::Penalized(&uf)).expect("grid");
        let con = brute_force_oracle(&p, &lo, &hi, steps, OracleMode::Constrained { feas_tol: 1e-12 }).expect("grid");
        let strict = (&pen - &con).amax() / step;
        stats.instances += 1;
        if strict <= 1.0 + 1e-9 {
            stats.strict_within += 1;
            stats.within += 1;
            continue;
        }
        let dist = near_optimal_grid(&p, &lo, &hi, steps, grid_resolution(&p, step))
            .iter()
            .map(|x| (&pen - x).amax() / step)
            .fold(f64::INFINITY, f64::min);
        stats.worst = stats.worst.max(dist);
        if dist <= 1.0 + 1e-9 {
            stats.within += 1;
        }
    }
    stats
}

/// Simplex on the slack LP against the constrained grid oracle for n ≤ 3.
/// The simplex objective must dominate the grid optimum and exceed it by at
/// most the objective's Lipschitz constant times the grid diagonal step.
pub fn simplex_vs_grid(seed: u64, count: usize) -> GridStats {
    let mut rng = stream_rng(seed, 7);
    let mut stats = GridStats::default();
    while stats.instances < count {
        let n = rng.random_range(1..=3);
        let shape = InstanceShape { n, m1: n, m3: 2 };
        let p = if rng.random::<bool>() {
            random_linear_instance(&mut rng, shape)
        } else {
            random_asymmetric_instance(&mut rng, shape)
        };
        let steps = [0, 1000, 1000, 120][n];
        let (lo, hi) = grid_box(&p, 0.0);
        let grid = brute_force_oracle(&p, &lo, &hi, steps, OracleMode::Constrained { feas_tol: 1e-12 }).expect("grid");
        let exact = solve_original(&p, &SolverOptions::default()).expect("lp").require_optimal().expect("optimal");
        let grid_obj = p.true_objective(&grid).expect("objective");
        let resolution = grid_resolution(&p, (&hi - &lo).max() / steps as f64);
        let gap = exact.objective - grid_obj;
        let units = if resolution > 0.0 { gap / resolution } else { 0.0 };
        stats.instances += 1;
        stats.worst = stats.worst.max(units.abs());
        if gap >= -1e-9 && gap <= resolution {
            stats.within += 1;
        }
    }
    stats
}

/// Worst KKT residual of the quadratic reference solver on random instances
/// (half of them on the simplex), and how many runs ended optimal.
pub fn qp_residuals(seed: u64, count: usize) -> (f64, usize) {
    let mut rng = stream_rng(seed, 8);
    let mut worst = 0.0_f64;
    let mut optimal = 0;
    for _ in 0..count {
        let n = rng.random_range(2..=12);
        let mut p = random_quadratic_instance(&mut rng, InstanceShape { n, m1: n / 2, m3: n / 2 + 1 });
        if rng.random::<bool>() {
            p = p.with_equalities(Matrix::from_element(1, n, 1.0), Vector::from_element(1, 1.0));
            p.ineq_matrix = Matrix::zeros(0, n);
            p.ineq_rhs = Vector::zeros(0);
        }
        let r = solve_original(&p, &SolverOptions::default()).expect("qp");
        if r.is_optimal() {
            optimal += 1;
        }
        worst = worst.max(r.residual);
    }
    (worst, optimal)
}

/// Largest hard-constraint violation (unit-normalized rows) of the surrogate
/// optimum over random LinearSoft instances, with `β = empirical_beta(k = 10)`.
pub fn leakage(seed: u64, count: usize, k: f64) -> (f64, usize) {
    let mut rng = stream_rng(seed, 9);
    let mut worst = 0.0_f64;
    let mut solved = 0;
    for _ in 0..count {
        let n = rng.random_range(2..=10);
        let p = random_linear_instance(&mut rng, InstanceShape { n, m1: n, m3: n / 2 + 1 });
        let e = default_gradient_bound(&p);
        let beta = empirical_beta(&p, e, 10.0, 0).expect("beta");
        let uf = unify(&p, beta).expect("valid instance");
        let (r, _) = solve_surrogate(&uf, &p, k, &SolverOptions::default()).expect("surrogate");
        if r.is_optimal() {
            solved += 1;
        }
        let z = uf.z(&r.x_opt);
        let v = (0..uf.rows())
            .filter(|&i| uf.row_kind[i].is_hard())
            .map(|i| z[i])
            .fold(0.0_f64, f64::max);
        worst = worst.max(v);
    }
    (worst, solved)
}
