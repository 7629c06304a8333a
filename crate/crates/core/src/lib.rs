//! Decision-focused learning for linear and quadratic programs with soft
//! constraints, trained through a smoothed exact-penalty surrogate.

pub mod datagen;
pub mod error;
pub mod linalg;
pub mod penalty;
pub mod predictor;
pub mod problem;
pub mod solver;
pub mod surrogate;
pub mod training;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use problem::{unify, ObjectiveFamily, PredictionTarget, ProblemInstance, Regret, RowKind, UnifiedForm};
