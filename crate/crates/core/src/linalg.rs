//! Dense linear-algebra helpers shared by the solver and surrogate modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Largest condition number accepted by [`SymFactor`].
pub const CONDITION_LIMIT: f64 = 1e12;

/// Eigen-factorization of a symmetric positive definite matrix with a
/// condition-number guard.
#[derive(Debug, Clone)]
pub struct SymFactor {
    vectors: Matrix,
    values: Vector,
}

impl SymFactor {
    pub fn new(h: &Matrix) -> Result<Self> {
        let n = h.nrows();
        if n != h.ncols() {
            return Err(Error::dimension("symmetric factorization", n, h.ncols()));
        }
        if n == 0 {
            return Ok(SymFactor {
                vectors: Matrix::zeros(0, 0),
                values: Vector::zeros(0),
            });
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("system matrix".into()));
        }
        let sym = (h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let top = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let floor = top / CONDITION_LIMIT;
        let deficient = eig.eigenvalues.iter().filter(|&&v| v <= floor).count();
        if top == 0.0 || deficient > 0 {
            let smallest = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            let condition = if smallest > 0.0 { top / smallest } else { f64::INFINITY };
            return Err(Error::SingularSystem {
                rank_deficiency: if top == 0.0 { n } else { deficient },
                condition,
            });
        }
        Ok(SymFactor {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
        })
    }

    pub fn condition(&self) -> f64 {
        let max = self.values.max();
        let min = self.values.min();
        max / min
    }

    pub fn solve(&self, rhs: &Vector) -> Vector {
        let mut proj = self.vectors.tr_mul(rhs);
        for (p, l) in proj.iter_mut().zip(self.values.iter()) {
            *p /= l;
        }
        &self.vectors * proj
    }

    pub fn inverse(&self) -> Matrix {
        let mut scaled = self.vectors.clone();
        for (j, l) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(1.0 / l);
        }
        let inv = &scaled * self.vectors.transpose();
        (&inv + inv.transpose()) * 0.5
    }
}

/// Seeded generator on an independent ChaCha stream, so that each consumer of
/// randomness draws from its own sequence for a given seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>], ncols: usize, field: &str) -> Result<Matrix> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(Error::dimension(format!("{field} row {i}"), ncols, r.len()));
        }
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Stacks matrices with a common column count on top of each other.
pub fn vstack(blocks: &[&Matrix], ncols: usize) -> Matrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(rows, ncols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, 0), (b.nrows(), ncols)).copy_from(*b);
        at += b.nrows();
    }
    out
}
