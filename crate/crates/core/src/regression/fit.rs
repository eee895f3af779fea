//! Maximum-likelihood logistic fit by iteratively reweighted least squares.

use std::collections::BTreeMap;

use super::design::{DesignMatrix, Group};
use super::linalg::{dependent_columns, Cholesky, Matrix};
use super::RegressionError;
use crate::scalar::Scalar;

pub const MAX_ITERATIONS: usize = 25;
/// Coefficients beyond this magnitude indicate (quasi-)separation.
pub const SEPARATION_THRESHOLD: f64 = 15.0;
const GRADIENT_TOL: f64 = 1e-8;
const STEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit<F> {
    pub columns: Vec<String>,
    pub groups: Vec<Group>,
    pub coefficients: Vec<F>,
    /// Inverse observed information at the estimate.
    pub covariance: Matrix<F>,
    pub log_likelihood: F,
    /// Newton steps taken.
    pub iterations: usize,
    /// max |X'(y - p)| at the returned coefficients
    pub gradient_norm: F,
    pub n_obs: usize,
    pub notes: Vec<String>,
}

impl<F: Scalar> RegressionFit<F> {
    pub fn std_errors(&self) -> Vec<F> {
        (0..self.coefficients.len())
            .map(|i| self.covariance.get(i, i).max(F::zero()).sqrt())
            .collect()
    }

    pub fn index_of(&self, column: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == column)
    }

    pub fn coefficient(&self, column: &str) -> Option<F> {
        self.index_of(column).map(|i| self.coefficients[i])
    }
}

/// Identical design rows pooled into (count, successes) cells. Cells are kept
/// in a canonical order so the fit does not depend on observation order.
struct Cells<F> {
    rows: Vec<Vec<F>>,
    count: Vec<F>,
    successes: Vec<F>,
}

impl<F: Scalar> Cells<F> {
    fn new(dm: &DesignMatrix<F>) -> Self {
        let mut cells: BTreeMap<Vec<u64>, (usize, usize, usize)> = BTreeMap::new();
        for i in 0..dm.n_rows() {
            let key: Vec<u64> = dm.row(i).iter().map(|v| v.as_f64().to_bits()).collect();
            let cell = cells.entry(key).or_insert((i, 0, 0));
            cell.1 += 1;
            cell.2 += (dm.target()[i] == F::one()) as usize;
        }
        let mut out = Cells {
            rows: Vec::new(),
            count: Vec::new(),
            successes: Vec::new(),
        };
        for (first, n, s) in cells.into_values() {
            out.rows.push(dm.row(first).to_vec());
            out.count.push(F::of_usize(n));
            out.successes.push(F::of_usize(s));
        }
        out
    }

    fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    fn eta(&self, beta: &[F]) -> impl Iterator<Item = F> + '_ {
        let beta = beta.to_vec();
        self.rows.iter().map(move |x| {
            x.iter()
                .zip(&beta)
                .fold(F::zero(), |acc, (&a, &b)| acc + a * b)
        })
    }

    fn gram(&self) -> Matrix<F> {
        let w: Vec<F> = self.count.clone();
        self.weighted_gram(&w)
    }

    fn weighted_gram(&self, w: &[F]) -> Matrix<F> {
        let p = self.dim();
        let mut m = Matrix::zeros(p);
        for (x, &wi) in self.rows.iter().zip(w) {
            for a in 0..p {
                if x[a] == F::zero() {
                    continue;
                }
                let wa = wi * x[a];
                for (b, &xb) in x.iter().enumerate().skip(a) {
                    m.add_to(a, b, wa * xb);
                }
            }
        }
        m.symmetrize_from_upper();
        m
    }

    /// Score vector and observed information at `beta`.
    fn score_and_information(&self, beta: &[F]) -> (Vec<F>, Matrix<F>) {
        let p = self.dim();
        let mut score = vec![F::zero(); p];
        let mut weights = Vec::with_capacity(self.rows.len());
        for (((x, eta), &n), &s) in self
            .rows
            .iter()
            .zip(self.eta(beta))
            .zip(&self.count)
            .zip(&self.successes)
        {
            let prob = sigmoid(eta);
            let resid = s - n * prob;
            for (g, &xa) in score.iter_mut().zip(x) {
                *g = *g + xa * resid;
            }
            weights.push(n * prob * (F::one() - prob));
        }
        (score, self.weighted_gram(&weights))
    }

    fn log_likelihood(&self, beta: &[F]) -> F {
        self.eta(beta)
            .zip(&self.count)
            .zip(&self.successes)
            .fold(F::zero(), |acc, ((eta, &n), &s)| {
                acc + s * eta - n * softplus(eta)
            })
    }
}

fn sigmoid<F: Scalar>(eta: F) -> F {
    F::one() / (F::one() + (-eta).exp())
}

/// `ln(1 + e^x)` without overflow.
fn softplus<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn max_abs<F: Scalar>(v: &[F]) -> F {
    v.iter().fold(F::zero(), |m, x| m.max(x.abs()))
}

/// Bernoulli log-likelihood of `beta` on the design.
pub fn log_likelihood<F: Scalar>(dm: &DesignMatrix<F>, beta: &[F]) -> F {
    Cells::new(dm).log_likelihood(beta)
}

/// Analytic gradient of [`log_likelihood`]: `X'(y - p)`.
pub fn gradient<F: Scalar>(dm: &DesignMatrix<F>, beta: &[F]) -> Vec<F> {
    Cells::new(dm).score_and_information(beta).0
}

pub fn fit_logistic<F: Scalar>(dm: &DesignMatrix<F>) -> Result<RegressionFit<F>, RegressionError> {
    let cells = Cells::new(dm);
    let names = dm.column_names();
    let dependent = dependent_columns(&cells.gram());
    if !dependent.is_empty() {
        return Err(RegressionError::RankDeficient {
            columns: dependent.iter().map(|&j| names[j].to_string()).collect(),
            detail: "column(s) are linear combinations of earlier columns".into(),
        });
    }

    let p = dm.n_cols();
    let eps = F::epsilon().as_f64();
    let gradient_tol = F::of(GRADIENT_TOL.max(eps * 100.0 * dm.n_rows() as f64));
    let step_tol = F::of(STEP_TOL.max(eps * 10.0));
    let separation = F::of(SEPARATION_THRESHOLD);
    let separated = |beta: &[F]| {
        let (j, b) = beta
            .iter()
            .enumerate()
            .fold((0, F::zero()), |(jm, bm), (j, b)| {
                if b.abs() > bm {
                    (j, b.abs())
                } else {
                    (jm, bm)
                }
            });
        (b > separation).then(|| RegressionError::Separation {
            column: names[j].to_string(),
        })
    };

    let mut beta = vec![F::zero(); p];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        let (score, info) = cells.score_and_information(&beta);
        if max_abs(&score) < gradient_tol {
            converged = true;
            break;
        }
        let chol = match Cholesky::new(&info) {
            Ok(c) => c,
            Err(_) => {
                return Err(
                    separated(&beta).unwrap_or_else(|| RegressionError::RankDeficient {
                        columns: names.iter().map(|s| s.to_string()).collect(),
                        detail: "information matrix lost definiteness".into(),
                    }),
                )
            }
        };
        let step = chol.solve(&score);
        for (b, d) in beta.iter_mut().zip(&step) {
            *b = *b + *d;
        }
        iterations += 1;
        if max_abs(&step) < step_tol {
            converged = true;
            break;
        }
    }
    if let Some(err) = separated(&beta) {
        return Err(err);
    }
    let (score, info) = cells.score_and_information(&beta);
    let gradient_norm = max_abs(&score);
    if !converged {
        return Err(RegressionError::NotConverged {
            iterations,
            gradient: format!("{}", gradient_norm),
        });
    }
    let covariance = Cholesky::new(&info)
        .map_err(|j| RegressionError::RankDeficient {
            columns: vec![names[j].to_string()],
            detail: "information matrix is singular at the estimate".into(),
        })?
        .inverse();

    Ok(RegressionFit {
        columns: names.iter().map(|s| s.to_string()).collect(),
        groups: dm.groups().to_vec(),
        log_likelihood: cells.log_likelihood(&beta),
        coefficients: beta,
        covariance,
        iterations,
        gradient_norm,
        n_obs: dm.n_rows(),
        notes: dm.notes().to_vec(),
    })
}
