//! Logistic regression of binary scores on factor levels.
//!
//! [`build_design_matrix`] expands plan rows into treatment-coded indicators,
//! [`fit_logistic`] finds the maximum-likelihood coefficients by IRLS, and
//! [`coefficient_table`] / [`wald_table`] summarize per-level and per-attribute
//! significance.

mod design;
mod fit;
pub mod linalg;
mod tables;

pub use design::{
    build_design_matrix, main_name, Column, ColumnKind, DesignMatrix, DroppedColumn, Group,
    INTERCEPT,
};
pub use fit::{
    fit_logistic, gradient, log_likelihood, RegressionFit, MAX_ITERATIONS, SEPARATION_THRESHOLD,
};
pub use tables::{
    coefficient_table, significance_symbol, wald_table, CoefficientRow, CoefficientTable, WaldRow,
    WaldTable, CI_QUANTILE,
};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RegressionError {
    #[error("interaction order must be 1 or 2, got {0}")]
    InteractionOrder(usize),
    #[error("bad design: {0}")]
    Shape(String),
    #[error("rank-deficient design ({detail}): {}", columns.join(", "))]
    RankDeficient {
        columns: Vec<String>,
        detail: String,
    },
    #[error("separation detected: coefficient of {column} diverges")]
    Separation { column: String },
    #[error("IRLS did not converge in {iterations} iterations (max |score| = {gradient})")]
    NotConverged { iterations: usize, gradient: String },
    #[error("covariance submatrix for group {0} is singular")]
    SingularGroup(String),
}
