//! Piecewise-quadratic smoothing of `max(z, 0)` and the closed-form
//! sensitivities of the smoothed optimum.
//!
//! `S(z) = 0` left of `−1/(4K)`, `K(z + 1/(4K))²` on `[−1/(4K), 1/(4K)]` and
//! `z` to the right. Because `S′` is piecewise linear, fixing which piece
//! each penalty row sits on turns the stationarity condition into a linear
//! system `Hx = w`, and every derivative of the optimum follows from `H⁻¹`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymFactor, Vector};
use crate::problem::{ProblemInstance, RowKind, UnifiedForm};

/// Distance to a breakpoint below which a row is considered segment-unstable.
pub const SEGMENT_STABILITY_GAP: f64 = 1e-9;

pub fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::validation("K", format!("must be positive and finite, got {k}")));
    }
    Ok(())
}

pub fn s_value(z: f64, k: f64) -> f64 {
    let half = 1.0 / (4.0 * k);
    if z < -half {
        0.0
    } else if z <= half {
        k * (z + half) * (z + half)
    } else {
        z
    }
}

pub fn s_grad(z: f64, k: f64) -> f64 {
    let half = 1.0 / (4.0 * k);
    if z < -half {
        0.0
    } else if z <= half {
        2.0 * k * (z + half)
    } else {
        1.0
    }
}

/// Diagonals of the indicator pair: `m = 2K` on the quadratic piece
/// (breakpoints included), `u = 1` on the linear piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentState {
    pub m_diag: Vector,
    pub u_diag: Vector,
}

impl SegmentState {
    pub fn len(&self) -> usize {
        self.m_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m_diag.is_empty()
    }

    pub fn quadratic_rows(&self) -> usize {
        self.m_diag.iter().filter(|m| **m != 0.0).count()
    }
}

pub fn segment_state(z: &Vector, k: f64) -> SegmentState {
    let half = 1.0 / (4.0 * k);
    let m = z.map(|v| if (-half..=half).contains(&v) { 2.0 * k } else { 0.0 });
    let u = z.map(|v| if v > half { 1.0 } else { 0.0 });
    SegmentState { m_diag: m, u_diag: u }
}

/// Smallest distance from any entry of `z` to a breakpoint `±1/(4K)`.
pub fn breakpoint_gap(z: &Vector, k: f64) -> f64 {
    let half = 1.0 / (4.0 * k);
    z.iter()
        .map(|v| (v - half).abs().min((v + half).abs()))
        .fold(f64::INFINITY, f64::min)
}

pub fn surrogate_objective(uf: &UnifiedForm, problem: &ProblemInstance, x: &Vector, k: f64) -> f64 {
    let z = uf.z(x);
    let pen: f64 = z.iter().zip(uf.gamma.iter()).map(|(z, g)| g * s_value(*z, k)).sum();
    problem.utility(x) - pen
}

/// `∇g − C′ᵀ(MΓ(C′x − d′) + (M/4K + U)γ)` for a given segment assignment.
///
/// With the segment taken from `x` itself this is the exact gradient of the
/// surrogate; training passes the segment found under predicted parameters.
pub fn grad_on_segment(uf: &UnifiedForm, problem: &ProblemInstance, x: &Vector, state: &SegmentState, k: f64) -> Vector {
    let z = uf.z(x);
    let w = Vector::from_fn(z.len(), |i, _| {
        let m = state.m_diag[i];
        uf.gamma[i] * (m * z[i] + m / (4.0 * k) + state.u_diag[i])
    });
    problem.utility_grad(x) - uf.cp.tr_mul(&w)
}

pub fn surrogate_grad_x(uf: &UnifiedForm, problem: &ProblemInstance, x: &Vector, k: f64) -> Vector {
    let state = segment_state(&uf.z(x), k);
    grad_on_segment(uf, problem, x, &state, k)
}

/// `H = [2Q] + C′ᵀ diag(m ⊙ γ) C′`.
pub fn system_matrix(uf: &UnifiedForm, problem: &ProblemInstance, state: &SegmentState) -> Matrix {
    let weights = state.m_diag.component_mul(&uf.gamma);
    let mut scaled = uf.cp.clone();
    for (i, w) in weights.iter().enumerate() {
        scaled.row_mut(i).scale_mut(*w);
    }
    problem.utility_curvature() + uf.cp.tr_mul(&scaled)
}

/// `η = MΓd′ − (M/4K + U)γ`, so that the stationarity system reads `Hx = θ + C′ᵀη`.
fn eta(uf: &UnifiedForm, state: &SegmentState, k: f64) -> Vector {
    Vector::from_fn(uf.rows(), |i, _| {
        let m = state.m_diag[i];
        uf.gamma[i] * (m * uf.dp[i] - m / (4.0 * k) - state.u_diag[i])
    })
}

fn check_state(uf: &UnifiedForm, state: &SegmentState) -> Result<()> {
    if state.len() != uf.rows() || state.u_diag.len() != uf.rows() {
        return Err(Error::dimension("segment state", uf.rows(), state.len()));
    }
    Ok(())
}

/// Factorized segment system. Holds `H` and the right-hand side so that the
/// optimum and all of its sensitivities share one factorization.
#[derive(Debug, Clone)]
pub struct SegmentSystem {
    pub h: Matrix,
    factor: SymFactor,
    eta: Vector,
    rhs: Vector,
}

impl SegmentSystem {
    pub fn new(uf: &UnifiedForm, problem: &ProblemInstance, state: &SegmentState, k: f64) -> Result<Self> {
        check_k(k)?;
        check_state(uf, state)?;
        let h = system_matrix(uf, problem, state);
        let factor = SymFactor::new(&h)?;
        let eta = eta(uf, state, k);
        let rhs = problem.theta_or_zero() + uf.cp.tr_mul(&eta);
        Ok(SegmentSystem { h, factor, eta, rhs })
    }

    pub fn x(&self) -> Vector {
        self.factor.solve(&self.rhs)
    }

    pub fn solve(&self, v: &Vector) -> Vector {
        self.factor.solve(v)
    }

    pub fn inverse(&self) -> Matrix {
        self.factor.inverse()
    }

    pub fn condition(&self) -> f64 {
        self.factor.condition()
    }
}

/// Optimum of the surrogate restricted to the given segments:
/// `x = H⁻¹(θ + C′ᵀMΓd′ − C′ᵀ(M/4K + U)γ)`.
pub fn closed_form_x(uf: &UnifiedForm, problem: &ProblemInstance, state: &SegmentState, k: f64) -> Result<Vector> {
    Ok(SegmentSystem::new(uf, problem, state, k)?.x())
}

/// `∂x/∂θ = H⁻¹`.
pub fn jacobian_x_theta(uf: &UnifiedForm, problem: &ProblemInstance, state: &SegmentState, k: f64) -> Result<Matrix> {
    Ok(SegmentSystem::new(uf, problem, state, k)?.inverse())
}

/// Ingredients for differentiating the decision loss
/// `r(p̂) = f̄(x̂(p̂), true parameters)` with respect to a predicted block `p̂`.
///
/// `pred`/`uf_pred` define the segment system that produced `x̂`;
/// `truth`/`uf_true` score the decision.
#[derive(Debug, Clone, Copy)]
pub struct LossContext<'a> {
    pub pred: &'a ProblemInstance,
    pub uf_pred: &'a UnifiedForm,
    pub truth: &'a ProblemInstance,
    pub uf_true: &'a UnifiedForm,
    pub k: f64,
}

impl<'a> LossContext<'a> {
    /// Exact gradient of the true-parameter surrogate at `x_hat`.
    pub fn upstream_exact(&self, x_hat: &Vector) -> Vector {
        surrogate_grad_x(self.uf_true, self.truth, x_hat, self.k)
    }

    /// True-parameter gradient evaluated on the segment found under the
    /// predicted parameters (the training-time reading).
    pub fn upstream_on_segment(&self, x_hat: &Vector, state: &SegmentState) -> Vector {
        grad_on_segment(self.uf_true, self.truth, x_hat, state, self.k)
    }

    fn system(&self, state: &SegmentState) -> Result<SegmentSystem> {
        SegmentSystem::new(self.uf_pred, self.pred, state, self.k)
    }

    /// `dr/dθ̂ = H⁻¹ ∂r/∂x`.
    pub fn grad_theta(&self, state: &SegmentState, upstream: &Vector) -> Result<Vector> {
        Ok(self.system(state)?.solve(upstream))
    }

    /// `dr/dQ̂ = 2pxᵀ` with `p = −H⁻¹ ∂r/∂x`; rank one.
    pub fn grad_q(&self, x_hat: &Vector, state: &SegmentState, upstream: &Vector) -> Result<Matrix> {
        let p = -self.system(state)?.solve(upstream);
        Ok(p * x_hat.transpose() * 2.0)
    }

    /// `dr/dC′` for the whole stacked matrix:
    /// `(η − MΓC′x)vᵀ − (MΓC′v)xᵀ` with `v = H⁻¹ ∂r/∂x`.
    pub fn grad_cprime(&self, x_hat: &Vector, state: &SegmentState, upstream: &Vector) -> Result<Matrix> {
        let sys = self.system(state)?;
        let v = sys.solve(upstream);
        let mg = state.m_diag.component_mul(&self.uf_pred.gamma);
        let cx = &self.uf_pred.cp * x_hat;
        let cv = &self.uf_pred.cp * &v;
        let left = &sys.eta - mg.component_mul(&cx);
        let right = mg.component_mul(&cv);
        Ok(left * v.transpose() - right * x_hat.transpose())
    }

    /// `dr/dĈ`: the stacked gradient folded back onto the soft-constraint
    /// matrix (`+C` rows add, mirrored `−C` rows subtract).
    pub fn grad_c(&self, x_hat: &Vector, state: &SegmentState, upstream: &Vector) -> Result<Matrix> {
        let full = self.grad_cprime(x_hat, state, upstream)?;
        Ok(fold_soft_rows(self.uf_pred, &full, self.pred.m3()))
    }

    /// Gradient with respect to the flattened target block of `pred`.
    pub fn grad_target(&self, x_hat: &Vector, state: &SegmentState, upstream: &Vector) -> Result<Vector> {
        use crate::problem::PredictionTarget;
        let flat = |m: Matrix| Vector::from_iterator(m.len(), m.transpose().iter().copied());
        match self.pred.target {
            PredictionTarget::Theta => self.grad_theta(state, upstream),
            PredictionTarget::Q => Ok(flat(self.grad_q(x_hat, state, upstream)?)),
            PredictionTarget::C => Ok(flat(self.grad_c(x_hat, state, upstream)?)),
        }
    }
}

pub fn fold_soft_rows(uf: &UnifiedForm, full: &Matrix, m3: usize) -> Matrix {
    let mut out = Matrix::zeros(m3, full.ncols());
    for (i, kind) in uf.row_kind.iter().enumerate() {
        let sign = match kind {
            RowKind::SoftOriginal => 1.0,
            RowKind::SoftSecond => -1.0,
            _ => continue,
        };
        let mut row = out.row_mut(uf.source[i]);
        row += full.row(i) * sign;
    }
    out
}

/// Central finite-difference gradient, shared by the test suites.
pub fn finite_difference(f: impl Fn(&Vector) -> f64, x: &Vector, h: f64) -> Vector {
    let mut g = Vector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + h;
        let up = f(&xp);
        xp[i] = orig - h;
        let down = f(&xp);
        xp[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::unify;

    #[test]
    fn piece_values() {
        assert_eq!(s_value(-2.0, 0.25), 0.0);
        assert_eq!(s_value(0.0, 0.25), 0.25);
        assert_eq!(s_value(3.0, 0.25), 3.0);
        let k = 0.7;
        assert_eq!(s_grad(-1.0 / (4.0 * k), k), 0.0);
        assert!((s_grad(1.0 / (4.0 * k), k) - 1.0).abs() < 1e-15);
        assert_eq!(s_grad(0.0, 0.25), 0.5);
    }

    #[test]
    fn segments() {
        let st = segment_state(&Vector::from_vec(vec![-2.0, 0.0, 3.0]), 0.25);
        assert_eq!(st.m_diag.as_slice(), &[0.0, 0.5, 0.0]);
        assert_eq!(st.u_diag.as_slice(), &[0.0, 0.0, 1.0]);
        let k = 2.0;
        let st = segment_state(&Vector::from_vec(vec![-1.0 / (4.0 * k), 1.0 / (4.0 * k)]), k);
        assert_eq!(st.m_diag.as_slice(), &[4.0, 4.0]);
        assert_eq!(st.u_diag.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn one_dimensional_closed_form() {
        // maximize θx − γS(x − d) − γS(−x): upper row on the quadratic piece.
        let (theta, gamma, d, k) = (1.0, 2.0, 1.0, 0.5);
        let p = ProblemInstance::linear_soft(Vector::from_vec(vec![theta])).with_soft(
            Matrix::from_row_slice(1, 1, &[1.0]),
            Vector::from_vec(vec![d]),
            Vector::from_vec(vec![gamma]),
        );
        let uf = unify(&p, gamma).unwrap();
        let state = SegmentState {
            m_diag: Vector::from_vec(vec![2.0 * k, 0.0]),
            u_diag: Vector::zeros(2),
        };
        let x = closed_form_x(&uf, &p, &state, k).unwrap();
        let expected = d - 1.0 / (4.0 * k) + theta / (2.0 * k * gamma);
        assert!((x[0] - expected).abs() < 1e-12);
        assert!(surrogate_grad_x(&uf, &p, &x, k).amax() < 1e-12);
        let j = jacobian_x_theta(&uf, &p, &state, k).unwrap();
        assert!((j[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_quadratic_rows_is_singular() {
        let p = ProblemInstance::linear_soft(Vector::from_vec(vec![1.0, 1.0]));
        let uf = unify(&p, 3.0).unwrap();
        let state = SegmentState {
            m_diag: Vector::from_vec(vec![2.0, 0.0]),
            u_diag: Vector::zeros(2),
        };
        assert!(matches!(
            closed_form_x(&uf, &p, &state, 1.0),
            Err(Error::SingularSystem { rank_deficiency: 1, .. })
        ));
    }

    #[test]
    fn quadratic_gradient_without_penalty() {
        let p = ProblemInstance::quadratic_soft(Vector::zeros(3), Matrix::identity(3, 3));
        let mut uf = unify(&p, 1.0).unwrap();
        uf.gamma.fill(0.0);
        let x = Vector::from_vec(vec![0.3, -1.0, 2.0]);
        assert!((surrogate_grad_x(&uf, &p, &x, 1.0) + &x * 2.0).amax() < 1e-15);
    }
}
