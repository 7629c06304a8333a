//! Optimization problem families with soft constraints, the stacked
//! penalty form used by the surrogate, and decision-quality metrics.

use std::fmt;
use std::str::FromStr;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows, vstack, Matrix, Vector};

/// Hard-constraint violation accepted as "feasible" when checking reference points.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Slack allowed before a negative regret is treated as a non-optimal reference.
pub const REGRET_TOL: f64 = 1e-8;

const PSD_TOL: f64 = 1e-10;
const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectiveFamily {
    /// `max θᵀx − αᵀmax(Cx−d, 0)`
    LinearSoft,
    /// `max θᵀx − xᵀQx − αᵀmax(Cx−d, 0)`
    QuadraticSoft,
    /// `max −α₁ᵀmax(Cx−d, 0) − α₂ᵀmax(d−Cx, 0)`
    AsymmetricSoft,
}

impl FromStr for ObjectiveFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "linearsoft" | "linear" | "lp" => Ok(ObjectiveFamily::LinearSoft),
            "quadraticsoft" | "quadratic" | "portfolio" => Ok(ObjectiveFamily::QuadraticSoft),
            "asymmetricsoft" | "asymmetric" | "provisioning" => Ok(ObjectiveFamily::AsymmetricSoft),
            _ => Err(Error::validation(
                "family",
                format!("unknown objective family `{s}` (expected LinearSoft, QuadraticSoft or AsymmetricSoft)"),
            )),
        }
    }
}

impl fmt::Display for ObjectiveFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ObjectiveFamily::LinearSoft => "LinearSoft",
            ObjectiveFamily::QuadraticSoft => "QuadraticSoft",
            ObjectiveFamily::AsymmetricSoft => "AsymmetricSoft",
        };
        f.write_str(s)
    }
}

/// Which parameter block a prediction model outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PredictionTarget {
    Theta,
    Q,
    C,
}

impl FromStr for PredictionTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "theta" => Ok(PredictionTarget::Theta),
            "q" => Ok(PredictionTarget::Q),
            "c" => Ok(PredictionTarget::C),
            _ => Err(Error::validation(
                "prediction_target",
                format!("unknown prediction target `{s}` (expected Theta, Q or C)"),
            )),
        }
    }
}

/// One optimization task: `max g(x) − soft penalties` subject to
/// `Ax ≤ b`, `Bx = c`, `x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemFile", into = "ProblemFile")]
pub struct ProblemInstance {
    pub family: ObjectiveFamily,
    pub n: usize,
    pub theta: Option<Vector>,
    pub q: Option<Matrix>,
    pub ineq_matrix: Matrix,
    pub ineq_rhs: Vector,
    pub eq_matrix: Matrix,
    pub eq_rhs: Vector,
    pub soft_matrix: Matrix,
    pub soft_rhs: Vector,
    pub alpha: Vector,
    pub alpha2: Option<Vector>,
    pub target: PredictionTarget,
}

impl ProblemInstance {
    fn empty(family: ObjectiveFamily, n: usize, target: PredictionTarget) -> Self {
        ProblemInstance {
            family,
            n,
            theta: None,
            q: None,
            ineq_matrix: Matrix::zeros(0, n),
            ineq_rhs: Vector::zeros(0),
            eq_matrix: Matrix::zeros(0, n),
            eq_rhs: Vector::zeros(0),
            soft_matrix: Matrix::zeros(0, n),
            soft_rhs: Vector::zeros(0),
            alpha: Vector::zeros(0),
            alpha2: None,
            target,
        }
    }

    /// Linear objective `θᵀx` with no constraints other than `x ≥ 0`.
    pub fn linear_soft(theta: Vector) -> Self {
        let mut p = Self::empty(ObjectiveFamily::LinearSoft, theta.len(), PredictionTarget::Theta);
        p.theta = Some(theta);
        p
    }

    pub fn quadratic_soft(theta: Vector, q: Matrix) -> Self {
        let mut p = Self::empty(ObjectiveFamily::QuadraticSoft, theta.len(), PredictionTarget::Theta);
        p.theta = Some(theta);
        p.q = Some(q);
        p
    }

    /// Two-sided soft matching of `Cx` against `d`; the model predicts `C`.
    pub fn asymmetric_soft(c: Matrix, d: Vector, alpha1: Vector, alpha2: Vector) -> Self {
        let mut p = Self::empty(ObjectiveFamily::AsymmetricSoft, c.ncols(), PredictionTarget::C);
        p.soft_matrix = c;
        p.soft_rhs = d;
        p.alpha = alpha1;
        p.alpha2 = Some(alpha2);
        p
    }

    pub fn with_inequalities(mut self, a: Matrix, b: Vector) -> Self {
        self.ineq_matrix = a;
        self.ineq_rhs = b;
        self
    }

    pub fn with_equalities(mut self, b: Matrix, c: Vector) -> Self {
        self.eq_matrix = b;
        self.eq_rhs = c;
        self
    }

    pub fn with_soft(mut self, c: Matrix, d: Vector, alpha: Vector) -> Self {
        self.soft_matrix = c;
        self.soft_rhs = d;
        self.alpha = alpha;
        self
    }

    pub fn with_target(mut self, target: PredictionTarget) -> Self {
        self.target = target;
        self
    }

    pub fn m1(&self) -> usize {
        self.ineq_matrix.nrows()
    }

    pub fn m2(&self) -> usize {
        self.eq_matrix.nrows()
    }

    pub fn m3(&self) -> usize {
        self.soft_matrix.nrows()
    }

    /// Objective coefficients, zero for the asymmetric family.
    pub fn theta_or_zero(&self) -> Vector {
        self.theta.clone().unwrap_or_else(|| Vector::zeros(self.n))
    }

    /// Checks dimensions only; predicted parameters may violate the sign
    /// assumptions placed on ground-truth instances.
    pub fn validate_shapes(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(Error::validation("n", "decision dimension must be positive"));
        }
        let check_cols = |m: &Matrix, name: &str| -> Result<()> {
            if m.ncols() != n {
                return Err(Error::dimension(format!("{name} columns"), n, m.ncols()));
            }
            Ok(())
        };
        check_cols(&self.ineq_matrix, "A")?;
        check_cols(&self.eq_matrix, "B")?;
        check_cols(&self.soft_matrix, "C")?;
        if self.ineq_rhs.len() != self.m1() {
            return Err(Error::dimension("b", self.m1(), self.ineq_rhs.len()));
        }
        if self.eq_rhs.len() != self.m2() {
            return Err(Error::dimension("c", self.m2(), self.eq_rhs.len()));
        }
        if self.soft_rhs.len() != self.m3() {
            return Err(Error::dimension("d", self.m3(), self.soft_rhs.len()));
        }
        if self.alpha.len() != self.m3() {
            return Err(Error::dimension("alpha", self.m3(), self.alpha.len()));
        }
        match self.family {
            ObjectiveFamily::LinearSoft | ObjectiveFamily::QuadraticSoft => {
                let theta = self
                    .theta
                    .as_ref()
                    .ok_or_else(|| Error::validation("theta", "required for this family"))?;
                if theta.len() != n {
                    return Err(Error::dimension("theta", n, theta.len()));
                }
            }
            ObjectiveFamily::AsymmetricSoft => {
                if self.theta.is_some() {
                    return Err(Error::validation("theta", "must be absent for AsymmetricSoft"));
                }
                let a2 = self
                    .alpha2
                    .as_ref()
                    .ok_or_else(|| Error::validation("alpha2", "required for AsymmetricSoft"))?;
                if a2.len() != self.m3() {
                    return Err(Error::dimension("alpha2", self.m3(), a2.len()));
                }
            }
        }
        if self.family == ObjectiveFamily::QuadraticSoft {
            let q = self
                .q
                .as_ref()
                .ok_or_else(|| Error::validation("Q", "required for QuadraticSoft"))?;
            if q.nrows() != n || q.ncols() != n {
                return Err(Error::dimension("Q", n, q.nrows().max(q.ncols())));
            }
        } else if self.q.is_some() {
            return Err(Error::validation("Q", "only allowed for QuadraticSoft"));
        }
        if self.family != ObjectiveFamily::AsymmetricSoft && self.alpha2.is_some() {
            return Err(Error::validation("alpha2", "only allowed for AsymmetricSoft"));
        }
        let all_finite = [
            &self.ineq_matrix,
            &self.eq_matrix,
            &self.soft_matrix,
        ]
        .iter()
        .all(|m| m.iter().all(|v| v.is_finite()))
            && self.theta.iter().chain(self.alpha2.iter()).all(|v| v.iter().all(|x| x.is_finite()))
            && [&self.ineq_rhs, &self.eq_rhs, &self.soft_rhs, &self.alpha]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()))
            && self.q.iter().all(|m| m.iter().all(|x| x.is_finite()));
        if !all_finite {
            return Err(Error::NonFinite("problem parameters".into()));
        }
        Ok(())
    }

    /// Full validation of a ground-truth instance: shapes plus the sign and
    /// curvature assumptions (`A, b, B, c ≥ 0`, `α ≥ 0`, `Q` symmetric PSD).
    pub fn validate(&self) -> Result<()> {
        self.validate_shapes()?;
        fn nonneg<'a>(mut it: impl Iterator<Item = &'a f64>, field: &str) -> Result<()> {
            if it.any(|v| *v < 0.0) {
                return Err(Error::validation(field, "entries must be nonnegative"));
            }
            Ok(())
        }
        nonneg(self.ineq_matrix.iter(), "A")?;
        nonneg(self.ineq_rhs.iter(), "b")?;
        nonneg(self.eq_matrix.iter(), "B")?;
        nonneg(self.eq_rhs.iter(), "c")?;
        nonneg(self.alpha.iter(), "alpha")?;
        if let Some(a2) = &self.alpha2 {
            nonneg(a2.iter(), "alpha2")?;
        }
        if let Some(q) = &self.q {
            let asym = (q - q.transpose()).amax();
            if asym > 1e-9 * (1.0 + q.amax()) {
                return Err(Error::validation("Q", "must be symmetric"));
            }
            let min_eig = SymmetricEigen::new(q.clone()).eigenvalues.min();
            if min_eig < -PSD_TOL {
                return Err(Error::validation(
                    "Q",
                    format!("must be positive semi-definite (smallest eigenvalue {min_eig:.3e})"),
                ));
            }
        }
        Ok(())
    }

    fn check_x(&self, x: &Vector) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::dimension("decision vector", self.n, x.len()));
        }
        Ok(())
    }

    /// Smooth utility `g(x)` without any soft-constraint term.
    pub fn utility(&self, x: &Vector) -> f64 {
        match self.family {
            ObjectiveFamily::LinearSoft => self.theta.as_ref().map_or(0.0, |t| t.dot(x)),
            ObjectiveFamily::QuadraticSoft => {
                let lin = self.theta.as_ref().map_or(0.0, |t| t.dot(x));
                let q = self.q.as_ref().expect("validated QuadraticSoft carries Q");
                lin - x.dot(&(q * x))
            }
            ObjectiveFamily::AsymmetricSoft => 0.0,
        }
    }

    /// Gradient of [`Self::utility`], assuming symmetric `Q`.
    pub fn utility_grad(&self, x: &Vector) -> Vector {
        match self.family {
            ObjectiveFamily::LinearSoft => self.theta_or_zero(),
            ObjectiveFamily::QuadraticSoft => {
                let q = self.q.as_ref().expect("validated QuadraticSoft carries Q");
                self.theta_or_zero() - q * x * 2.0
            }
            ObjectiveFamily::AsymmetricSoft => Vector::zeros(self.n),
        }
    }

    /// Negated Hessian of the utility (`2Q` or zero).
    pub fn utility_curvature(&self) -> Matrix {
        match (&self.family, &self.q) {
            (ObjectiveFamily::QuadraticSoft, Some(q)) => q * 2.0,
            _ => Matrix::zeros(self.n, self.n),
        }
    }

    /// Soft-constraint penalty of the true (nonsmooth) objective.
    pub fn soft_penalty(&self, x: &Vector) -> f64 {
        let z = &self.soft_matrix * x - &self.soft_rhs;
        let over: f64 = z.iter().zip(self.alpha.iter()).map(|(z, a)| a * z.max(0.0)).sum();
        let under: f64 = match &self.alpha2 {
            Some(a2) => z.iter().zip(a2.iter()).map(|(z, a)| a * (-z).max(0.0)).sum(),
            None => 0.0,
        };
        over + under
    }

    /// True objective value of the decision `x`.
    pub fn true_objective(&self, x: &Vector) -> Result<f64> {
        self.check_x(x)?;
        Ok(self.utility(x) - self.soft_penalty(x))
    }

    /// Largest violation among `Ax ≤ b`, `|Bx − c|` and `x ≥ 0`; zero when feasible.
    ///
    /// Panics if `x` does not have length `n`.
    pub fn feasibility_violation(&self, x: &Vector) -> f64 {
        assert_eq!(x.len(), self.n, "decision vector dimension");
        let ineq = (&self.ineq_matrix * x - &self.ineq_rhs).iter().fold(0.0_f64, |m, v| m.max(*v));
        let eq = (&self.eq_matrix * x - &self.eq_rhs).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let neg = x.iter().fold(0.0_f64, |m, v| m.max(-v));
        ineq.max(eq).max(neg)
    }

    /// Regret of `x_hat` against the reference optimum `x_star`, both scored
    /// under this (true) instance.
    ///
    /// An infeasible `x_hat` is scored as-is and its violation is reported.
    /// A feasible `x_hat` that beats `x_star` means the reference is not an
    /// optimum, which is an error.
    pub fn regret(&self, x_hat: &Vector, x_star: &Vector) -> Result<Regret> {
        self.check_x(x_hat)?;
        self.check_x(x_star)?;
        let star_violation = self.feasibility_violation(x_star);
        if star_violation > FEASIBILITY_TOL {
            return Err(Error::ReferenceInfeasible {
                violation: star_violation,
            });
        }
        let f_star = self.true_objective(x_star)?;
        let f_hat = self.true_objective(x_hat)?;
        let value = f_star - f_hat;
        let violation = self.feasibility_violation(x_hat);
        if violation <= FEASIBILITY_TOL && value < -REGRET_TOL * (1.0 + f_star.abs()) {
            return Err(Error::ReferenceNotOptimal { improvement: -value });
        }
        Ok(Regret { value, violation })
    }

    /// Flattened copy of the parameter block named by `target` (row-major for matrices).
    pub fn target_params(&self) -> Vector {
        match self.target {
            PredictionTarget::Theta => self.theta_or_zero(),
            PredictionTarget::Q => {
                let q = self.q.clone().unwrap_or_else(|| Matrix::zeros(self.n, self.n));
                row_major(&q)
            }
            PredictionTarget::C => row_major(&self.soft_matrix),
        }
    }

    pub fn target_len(&self) -> usize {
        match self.target {
            PredictionTarget::Theta => self.n,
            PredictionTarget::Q => self.n * self.n,
            PredictionTarget::C => self.m3() * self.n,
        }
    }

    /// Copy of this instance with the target block replaced by `params`.
    pub fn with_target_params(&self, params: &Vector) -> Result<Self> {
        if params.len() != self.target_len() {
            return Err(Error::dimension("prediction vector", self.target_len(), params.len()));
        }
        let mut out = self.clone();
        match self.target {
            PredictionTarget::Theta => {
                if self.family == ObjectiveFamily::AsymmetricSoft {
                    return Err(Error::Unsupported("AsymmetricSoft has no theta block".into()));
                }
                out.theta = Some(params.clone());
            }
            PredictionTarget::Q => {
                if self.family != ObjectiveFamily::QuadraticSoft {
                    return Err(Error::Unsupported("only QuadraticSoft has a Q block".into()));
                }
                out.q = Some(from_row_major(params, self.n, self.n));
            }
            PredictionTarget::C => {
                out.soft_matrix = from_row_major(params, self.m3(), self.n);
            }
        }
        Ok(out)
    }
}

fn row_major(m: &Matrix) -> Vector {
    Vector::from_iterator(m.len(), m.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()))
}

fn from_row_major(v: &Vector, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |i, j| v[i * cols + j])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regret {
    pub value: f64,
    /// Hard-constraint violation of the evaluated decision.
    pub violation: f64,
}

/// Origin of a row in the stacked penalty form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowKind {
    /// `Cx − d`, weighted by `α` (or `α₁`).
    SoftOriginal,
    /// `d − Cx`, weighted by `α₂` (asymmetric family only).
    SoftSecond,
    /// `Ax − b`
    Ineq,
    /// `−x`
    NonNeg,
    /// `Bx − c`
    EqPlus,
    /// `c − Bx`
    EqMinus,
}

impl RowKind {
    pub fn is_hard(self) -> bool {
        !matches!(self, RowKind::SoftOriginal | RowKind::SoftSecond)
    }
}

/// All constraints as penalty rows: the objective becomes
/// `g(x) − γᵀ max(C′x − d′, 0)`.
///
/// Rows are stacked as `[C; −C; A; −I; B; −B]` (absent blocks skipped). Hard
/// rows are scaled to unit norm; soft rows are kept verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedForm {
    pub cp: Matrix,
    pub dp: Vector,
    pub gamma: Vector,
    pub row_kind: Vec<RowKind>,
    /// Index of each row inside its originating block.
    pub source: Vec<usize>,
}

impl UnifiedForm {
    pub fn rows(&self) -> usize {
        self.cp.nrows()
    }

    pub fn z(&self, x: &Vector) -> Vector {
        &self.cp * x - &self.dp
    }

    pub fn rows_of(&self, kind: RowKind) -> impl Iterator<Item = usize> + '_ {
        self.row_kind.iter().enumerate().filter(move |(_, k)| **k == kind).map(|(i, _)| i)
    }

    /// Nonsmooth penalized objective `g(x) − γᵀmax(C′x − d′, 0)`.
    pub fn penalized_objective(&self, problem: &ProblemInstance, x: &Vector) -> f64 {
        let z = self.z(x);
        let pen: f64 = z.iter().zip(self.gamma.iter()).map(|(z, g)| g * z.max(0.0)).sum();
        problem.utility(x) - pen
    }
}

/// Stacks soft and hard constraints into a single penalty form with every
/// hard-constraint multiplier equal to `beta`.
pub fn unify(problem: &ProblemInstance, beta: f64) -> Result<UnifiedForm> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::validation("beta", "must be positive and finite"));
    }
    problem.validate_shapes()?;
    let n = problem.n;
    let unit_rows = |m: &Matrix, rhs: &Vector| -> (Matrix, Vector) {
        let mut m = m.clone();
        let mut rhs = rhs.clone();
        for i in 0..m.nrows() {
            let norm = m.row(i).norm();
            if norm > 0.0 {
                m.row_mut(i).unscale_mut(norm);
                rhs[i] /= norm;
            }
        }
        (m, rhs)
    };
    let (a, b) = unit_rows(&problem.ineq_matrix, &problem.ineq_rhs);
    let (beq, ceq) = unit_rows(&problem.eq_matrix, &problem.eq_rhs);
    let neg_c = -&problem.soft_matrix;
    let neg_i = -Matrix::identity(n, n);
    let neg_beq = -&beq;

    let mut blocks: Vec<&Matrix> = Vec::new();
    let mut dp: Vec<f64> = Vec::new();
    let mut gamma: Vec<f64> = Vec::new();
    let mut kinds = Vec::new();
    let mut source = Vec::new();
    let mut push = |block_rows: usize, kind: RowKind, d: &mut dyn Iterator<Item = f64>, g: &mut dyn Iterator<Item = f64>| {
        for i in 0..block_rows {
            dp.push(d.next().expect("rhs length"));
            gamma.push(g.next().expect("multiplier length"));
            kinds.push(kind);
            source.push(i);
        }
    };

    let m3 = problem.m3();
    blocks.push(&problem.soft_matrix);
    push(m3, RowKind::SoftOriginal, &mut problem.soft_rhs.iter().copied(), &mut problem.alpha.iter().copied());
    if let Some(a2) = &problem.alpha2 {
        blocks.push(&neg_c);
        push(m3, RowKind::SoftSecond, &mut problem.soft_rhs.iter().map(|v| -v), &mut a2.iter().copied());
    }
    blocks.push(&a);
    push(a.nrows(), RowKind::Ineq, &mut b.iter().copied(), &mut std::iter::repeat(beta));
    blocks.push(&neg_i);
    push(n, RowKind::NonNeg, &mut std::iter::repeat(0.0), &mut std::iter::repeat(beta));
    blocks.push(&beq);
    push(beq.nrows(), RowKind::EqPlus, &mut ceq.iter().copied(), &mut std::iter::repeat(beta));
    blocks.push(&neg_beq);
    push(beq.nrows(), RowKind::EqMinus, &mut ceq.iter().map(|v| -v), &mut std::iter::repeat(beta));

    Ok(UnifiedForm {
        cp: vstack(&blocks, n),
        dp: Vector::from_vec(dp),
        gamma: Vector::from_vec(gamma),
        row_kind: kinds,
        source,
    })
}

/// On-disk JSON layout of a [`ProblemInstance`]: field names follow the
/// mathematical notation and matrices are nested row arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ProblemFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub objective_family: ObjectiveFamily,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub Q: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub A: Vec<Vec<f64>>,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default)]
    pub B: Vec<Vec<f64>>,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub C: Vec<Vec<f64>>,
    #[serde(default)]
    pub d: Vec<f64>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<Vec<f64>>,
    pub prediction_target: PredictionTarget,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl From<ProblemInstance> for ProblemFile {
    fn from(p: ProblemInstance) -> Self {
        ProblemFile {
            schema_version: SCHEMA_VERSION,
            objective_family: p.family,
            n: p.n,
            theta: p.theta.map(|t| t.iter().copied().collect()),
            Q: p.q.as_ref().map(matrix_to_rows),
            A: matrix_to_rows(&p.ineq_matrix),
            b: p.ineq_rhs.iter().copied().collect(),
            B: matrix_to_rows(&p.eq_matrix),
            c: p.eq_rhs.iter().copied().collect(),
            C: matrix_to_rows(&p.soft_matrix),
            d: p.soft_rhs.iter().copied().collect(),
            alpha: p.alpha.iter().copied().collect(),
            alpha2: p.alpha2.map(|a| a.iter().copied().collect()),
            prediction_target: p.target,
        }
    }
}

impl TryFrom<ProblemFile> for ProblemInstance {
    type Error = Error;

    fn try_from(f: ProblemFile) -> Result<Self> {
        if f.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!("unsupported version {}", f.schema_version),
            ));
        }
        let n = f.n;
        let p = ProblemInstance {
            family: f.objective_family,
            n,
            theta: f.theta.map(Vector::from_vec),
            q: f.Q.map(|q| matrix_from_rows(&q, n, "Q")).transpose()?,
            ineq_matrix: matrix_from_rows(&f.A, n, "A")?,
            ineq_rhs: Vector::from_vec(f.b),
            eq_matrix: matrix_from_rows(&f.B, n, "B")?,
            eq_rhs: Vector::from_vec(f.c),
            soft_matrix: matrix_from_rows(&f.C, n, "C")?,
            soft_rhs: Vector::from_vec(f.d),
            alpha: Vector::from_vec(f.alpha),
            alpha2: f.alpha2.map(Vector::from_vec),
            target: f.prediction_target,
        };
        p.validate_shapes()?;
        Ok(p)
    }
}
