//! Penalty-multiplier bounds that make the softened hard constraints exact,
//! and the randomized eigenvalue study behind the general bound.

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{stream_rng, Matrix, Vector};
use crate::problem::ProblemInstance;

fn check_positive(field: &str, v: f64, allow_zero: bool) -> Result<()> {
    let ok = v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0));
    if !ok {
        let what = if allow_zero { "nonnegative" } else { "positive" };
        return Err(Error::validation(field, format!("must be finite and {what}, got {v}")));
    }
    Ok(())
}

/// `scale·E`: enough for unit-norm inequality rows alone.
pub fn bound_inequality_only(e: f64, scale: f64) -> Result<f64> {
    check_positive("E", e, true)?;
    check_positive("scale", scale, false)?;
    Ok(scale * e)
}

/// `scale·n^1.5·E / sin p` for inequality rows together with `x ≥ 0`.
pub fn bound_with_nonneg(e: f64, n: usize, sin_p: f64, scale: f64) -> Result<f64> {
    check_positive("E", e, true)?;
    check_positive("scale", scale, false)?;
    if n == 0 {
        return Err(Error::validation("n", "must be positive"));
    }
    if !(sin_p > 0.0 && sin_p <= 1.0) {
        return Err(Error::Degenerate(format!(
            "sin p = {sin_p} is outside (0, 1]; a constraint hyperplane is parallel to an axis"
        )));
    }
    Ok(scale * (n as f64).powf(1.5) * e / sin_p)
}

/// `scale·n^1.5·E` for 0/1 constraint matrices, where the angle term drops out.
pub fn bound_binary(e: f64, n: usize, scale: f64) -> Result<f64> {
    bound_with_nonneg(e, n, 1.0, scale)
}

/// `scale·√n·λ_max·E` for general constraint sets.
pub fn bound_general(e: f64, n: usize, lambda_max: f64, scale: f64) -> Result<f64> {
    check_positive("E", e, true)?;
    check_positive("scale", scale, false)?;
    check_positive("lambda_max", lambda_max, false)?;
    if n == 0 {
        return Err(Error::validation("n", "must be positive"));
    }
    Ok(scale * (n as f64).sqrt() * lambda_max * e)
}

/// Picks the applicable theorem-form bound for an instance: inequality-only
/// when there are no `A`/`B` rows (the nonnegativity normals are
/// orthonormal), the binary form for 0/1 matrices, the angle form when no
/// constraint normal is parallel to an axis, and the general form with a
/// sampled `λ_max` otherwise.
pub fn theorem_beta(problem: &ProblemInstance, e: f64, scale: f64, seed: u64) -> Result<f64> {
    let (a, b) = (&problem.ineq_matrix, &problem.eq_matrix);
    if a.nrows() + b.nrows() == 0 {
        return bound_inequality_only(e, scale);
    }
    let binary = |m: &Matrix| m.iter().all(|v| *v == 0.0 || *v == 1.0);
    if binary(a) && binary(b) {
        return bound_binary(e, problem.n, scale);
    }
    match min_hyperplane_angle(a, b) {
        Ok(sin_p) if sin_p > 1e-12 => bound_with_nonneg(e, problem.n, sin_p, scale),
        _ => bound_general(e, problem.n, instance_lambda_max(problem, 200, seed)?, scale),
    }
}

/// Practical multiplier ladder: `k·E·(√n)^step`. Training starts at step 0
/// and escalates only when the surrogate optimum leaks out of the feasible set.
pub fn empirical_beta(problem: &ProblemInstance, e: f64, k: f64, step: u32) -> Result<f64> {
    check_positive("E", e, true)?;
    check_positive("k", k, false)?;
    Ok(k * e * (problem.n as f64).sqrt().powi(step as i32))
}

/// Bound on the objective gradient used as `E`: `theta_cap + ‖α‖₁·max_i ‖C_i‖₂`
/// (plus the `α₂` term for the asymmetric family).
pub fn gradient_bound(problem: &ProblemInstance, theta_cap: f64) -> f64 {
    let max_row = (0..problem.m3())
        .map(|i| problem.soft_matrix.row(i).norm())
        .fold(0.0_f64, f64::max);
    let l1 = |v: &Vector| v.iter().map(|x| x.abs()).sum::<f64>();
    let alpha_l1 = l1(&problem.alpha) + problem.alpha2.as_ref().map_or(0.0, l1);
    theta_cap + alpha_l1 * max_row
}

/// Default `E` for a single instance: its own `‖θ‖₂` as the cap.
pub fn default_gradient_bound(problem: &ProblemInstance) -> f64 {
    gradient_bound(problem, problem.theta.as_ref().map_or(0.0, |t| t.norm()))
}

/// Sine of the smallest angle between any constraint normal (rows of `A`
/// and of `±B`) and any coordinate axis. Rows are normalized here, so raw
/// rows may be passed. Returns 1 when there are no rows.
pub fn min_hyperplane_angle(a: &Matrix, b: &Matrix) -> Result<f64> {
    let mut sin_p = 1.0_f64;
    for (name, m) in [("A", a), ("B", b)] {
        for (i, row) in m.row_iter().enumerate() {
            let norm = row.norm();
            if norm == 0.0 {
                return Err(Error::Degenerate(format!("row {i} of {name} is zero")));
            }
            let max_cos = row.iter().fold(0.0_f64, |acc, v| acc.max((v / norm).abs()));
            sin_p = sin_p.min((1.0 - max_cos * max_cos).max(0.0).sqrt());
        }
    }
    Ok(sin_p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowDistribution {
    Uniform01,
    AbsNormal,
    Beta22,
}

impl std::str::FromStr for RowDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "uniform01" | "uniform" => Ok(RowDistribution::Uniform01),
            "absnormal" | "halfnormal" => Ok(RowDistribution::AbsNormal),
            "beta22" | "beta" => Ok(RowDistribution::Beta22),
            _ => Err(Error::validation("distribution", format!("unknown distribution `{s}`"))),
        }
    }
}

impl std::fmt::Display for RowDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RowDistribution::Uniform01 => "Uniform01",
            RowDistribution::AbsNormal => "AbsNormal",
            RowDistribution::Beta22 => "Beta22",
        })
    }
}

/// How admissible rows are collected in one trial of the eigenvalue study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SamplingProtocol {
    /// Redraw until `n` admissible rows exist, then scale each row to unit
    /// norm. Top eigenvalues then stay within `[1, n]`.
    UnitRows,
    /// Draw exactly `n` candidates, drop inadmissible ones without redrawing
    /// and keep the raw (unnormalized) rows. Grows roughly quadratically in `n`.
    RawDiscard,
}

impl std::str::FromStr for SamplingProtocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "unitrows" | "unit" => Ok(SamplingProtocol::UnitRows),
            "rawdiscard" | "raw" => Ok(SamplingProtocol::RawDiscard),
            _ => Err(Error::validation("protocol", format!("unknown sampling protocol `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaStats {
    pub mean: f64,
    pub max: f64,
    /// Per-trial top eigenvalues in trial order.
    pub values: Vec<f64>,
}

fn draw_row(rng: &mut ChaCha8Rng, n: usize, dist: RowDistribution) -> Vector {
    let beta = Beta::new(2.0, 2.0).expect("valid beta parameters");
    Vector::from_iterator(
        n,
        (0..n).map(|_| match dist {
            RowDistribution::Uniform01 => rng.random::<f64>(),
            RowDistribution::AbsNormal => {
                let z: f64 = StandardNormal.sample(rng);
                z.abs()
            }
            RowDistribution::Beta22 => beta.sample(rng),
        }),
    )
}

/// Upper-triangular factor `R` of `A = RQ` (`Q` with orthonormal rows),
/// obtained from the QR factorization of the row-reversed transpose.
pub fn rq_factor_r(a: &Matrix) -> Matrix {
    let m = a.nrows();
    let reversed_t = Matrix::from_fn(a.ncols(), m, |i, j| a[(m - 1 - j, i)]);
    let r_tilde = reversed_t.qr().r();
    let k = r_tilde.nrows();
    // R = J R̃ᵀ J
    Matrix::from_fn(k, k, |i, j| r_tilde[(k - 1 - j, k - 1 - i)])
}

fn top_eigenvalue_rtr(a: &Matrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let r = rq_factor_r(a);
    SymmetricEigen::new(r.transpose() * r).eigenvalues.max()
}

/// Monte-Carlo estimate of the top eigenvalue of `RᵀR` for random
/// sign-coherent constraint rows lying in the half-space of a random normal.
///
/// Every trial uses its own generator stream derived from `(seed, n, trial)`,
/// so results do not depend on evaluation order.
pub fn estimate_lambda_max(
    n: usize,
    distribution: RowDistribution,
    trials: usize,
    seed: u64,
    protocol: SamplingProtocol,
) -> Result<LambdaStats> {
    if n < 2 {
        return Err(Error::validation("n", "must be at least 2"));
    }
    if trials == 0 {
        return Err(Error::validation("trials", "must be at least 1"));
    }
    let max_draws = 1000 * n;
    let mut values = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = stream_rng(seed, ((n as u64) << 32) | t as u64);
        let normal = draw_row(&mut rng, n, distribution);
        let mut rows: Vec<Vector> = Vec::with_capacity(n);
        let mut draws = 0;
        loop {
            let done = match protocol {
                SamplingProtocol::UnitRows => rows.len() == n,
                SamplingProtocol::RawDiscard => draws == n,
            };
            if done {
                break;
            }
            if draws >= max_draws {
                return Err(Error::Solver(format!(
                    "trial {t}: only {} admissible rows after {draws} draws (n = {n}, {distribution})",
                    rows.len()
                )));
            }
            draws += 1;
            let mut v = draw_row(&mut rng, n, distribution);
            if rng.random::<f64>() < 0.5 {
                v.neg_mut();
            }
            if v.dot(&normal) < 0.0 {
                continue;
            }
            if protocol == SamplingProtocol::UnitRows {
                let norm = v.norm();
                if norm == 0.0 {
                    continue;
                }
                v.unscale_mut(norm);
            }
            rows.push(v);
        }
        let a = Matrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        values.push(top_eigenvalue_rtr(&a));
    }
    let mean = values.iter().sum::<f64>() / trials as f64;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(LambdaStats { mean, max, values })
}

/// Instance-level estimate: the largest top eigenvalue of `RᵀR` over random
/// `n`-row subsets of the unit-normalized hard-constraint normals
/// (`A`, `±B` and the nonnegativity axes).
pub fn instance_lambda_max(problem: &ProblemInstance, subsets: usize, seed: u64) -> Result<f64> {
    let n = problem.n;
    let mut normals: Vec<Vector> = Vec::new();
    for m in [&problem.ineq_matrix, &problem.eq_matrix] {
        for row in m.row_iter() {
            let norm = row.norm();
            if norm == 0.0 {
                return Err(Error::Degenerate("zero hard-constraint row".into()));
            }
            normals.push(row.transpose() / norm);
        }
    }
    for row in problem.eq_matrix.row_iter() {
        normals.push(-row.transpose() / row.norm());
    }
    for k in 0..n {
        let mut e = Vector::zeros(n);
        e[k] = -1.0;
        normals.push(e);
    }
    let total = normals.len();
    let take = n.min(total);
    let mut rng = stream_rng(seed, 0x4c41_4d42);
    let mut best = 0.0_f64;
    for _ in 0..subsets.max(1) {
        let idx = rand::seq::index::sample(&mut rng, total, take);
        let a = Matrix::from_fn(take, n, |i, j| normals[idx.index(i)][j]);
        best = best.max(top_eigenvalue_rtr(&a));
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFit {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    pub r_squared: f64,
}

impl QuadraticFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.a2 * x * x + self.a1 * x + self.a0
    }
}

/// Least-squares fit `y ≈ a2·x² + a1·x + a0`.
pub fn fit_lambda_curve(samples: &[(f64, f64)]) -> Result<QuadraticFit> {
    let mut xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(Error::Degenerate(format!(
            "quadratic fit needs at least 3 distinct n values, got {}",
            xs.len()
        )));
    }
    let m = samples.len();
    let design = Matrix::from_fn(m, 3, |i, j| samples[i].0.powi(2 - j as i32));
    let y = Vector::from_iterator(m, samples.iter().map(|s| s.1));
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= smax * 1e-12 {
        return Err(Error::Degenerate("rank-deficient design matrix".into()));
    }
    let coef = svd.solve(&y, 0.0).map_err(|e| Error::Solver(e.to_string()))?;
    let resid = &design * &coef - &y;
    let mean = y.mean();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res = resid.norm_squared();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(QuadraticFit {
        a2: coef[0],
        a1: coef[1],
        a0: coef[2],
        r_squared,
    })
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 2 || samples.iter().any(|(x, y)| *x <= 0.0 || *y <= 0.0) {
        return Err(Error::Degenerate("log-log slope needs ≥ 2 strictly positive points".into()));
    }
    let lx: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ly: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all x values identical".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_formulas() {
        assert_eq!(bound_inequality_only(3.0, 1.0).unwrap(), 3.0);
        assert_eq!(bound_inequality_only(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(bound_inequality_only(2.0, 5.0).unwrap(), 10.0);
        assert!((bound_with_nonneg(2.0, 4, 0.5, 1.0).unwrap() - 32.0).abs() < 1e-12);
        assert_eq!(bound_with_nonneg(1.0, 1, 1.0, 1.0).unwrap(), 1.0);
        assert!(bound_with_nonneg(2.0, 4, 0.0, 1.0).is_err());
        assert!((bound_binary(1.0, 4, 1.0).unwrap() - 8.0).abs() < 1e-12);
        assert!((bound_binary(1.0, 9, 1.0).unwrap() - 27.0).abs() < 1e-12);
        assert!((bound_general(1.0, 4, 10.0, 1.0).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(bound_general(1.0, 1, 1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn ladder() {
        let p = ProblemInstance::linear_soft(Vector::zeros(25));
        assert!((empirical_beta(&p, 2.0, 10.0, 0).unwrap() - 20.0).abs() < 1e-12);
        assert!((empirical_beta(&p, 1.0, 5.0, 1).unwrap() - 25.0).abs() < 1e-12);
        let mut last = 0.0;
        for step in 0..5 {
            let b = empirical_beta(&p, 1.0, 10.0, step).unwrap();
            assert!(b > last);
            last = b;
        }
    }

    #[test]
    fn hyperplane_angle_cases() {
        let eye = Matrix::identity(2, 2);
        assert_eq!(min_hyperplane_angle(&eye, &Matrix::zeros(0, 2)).unwrap(), 0.0);
        let s = 1.0 / 2f64.sqrt();
        let diag = Matrix::from_row_slice(1, 2, &[s, s]);
        let got = min_hyperplane_angle(&diag, &Matrix::zeros(0, 2)).unwrap();
        assert!((got - s).abs() < 1e-15);
        let none = Matrix::zeros(0, 3);
        assert_eq!(min_hyperplane_angle(&none, &none).unwrap(), 1.0);
        assert!(min_hyperplane_angle(&Matrix::zeros(1, 2), &none).is_err());
    }

    #[test]
    fn rq_reconstructs() {
        let a = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 0.5, 0.3, -1.0, 2.0]);
        let r = rq_factor_r(&a);
        assert!(r[(1, 0)].abs() < 1e-14);
        // A Aᵀ = R Rᵀ
        assert!((&a * a.transpose() - &r * r.transpose()).amax() < 1e-12);
    }

    #[test]
    fn orthonormal_rows_have_unit_eigenvalue() {
        let q = Matrix::from_row_slice(2, 2, &[0.6, 0.8, -0.8, 0.6]);
        assert!((top_eigenvalue_rtr(&q) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_rows_eigenvalues_at_least_one() {
        let stats = estimate_lambda_max(6, RowDistribution::Beta22, 50, 3, SamplingProtocol::UnitRows).unwrap();
        assert!(stats.values.iter().all(|v| *v >= 1.0 - 1e-9 && *v <= 6.0 + 1e-9));
        let again = estimate_lambda_max(6, RowDistribution::Beta22, 50, 3, SamplingProtocol::UnitRows).unwrap();
        assert_eq!(stats, again);
    }

    #[test]
    fn quadratic_fit_exact_cases() {
        let para: Vec<_> = (1..6).map(|x| (x as f64, (x * x) as f64)).collect();
        let f = fit_lambda_curve(&para).unwrap();
        assert!((f.a2 - 1.0).abs() < 1e-9 && f.a1.abs() < 1e-9 && f.a0.abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let flat: Vec<_> = (1..6).map(|x| (x as f64, 5.0)).collect();
        let f = fit_lambda_curve(&flat).unwrap();
        assert!(f.a2.abs() < 1e-9 && f.a1.abs() < 1e-9 && (f.a0 - 5.0).abs() < 1e-9);
        assert!(fit_lambda_curve(&[(1.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<_> = (1..8).map(|x| (x as f64, 3.0 * (x as f64).powi(2))).collect();
        assert!((loglog_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
    }
}
