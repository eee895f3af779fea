//! Small dense symmetric linear algebra for the IRLS normal equations.

use crate::scalar::Scalar;

/// Square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    n: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![F::zero(); n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self {
            n,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.n + j] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.n + j] = self.data[i * self.n + j] + v;
    }

    /// Copies the upper triangle into the lower one.
    pub fn symmetrize_from_upper(&mut self) {
        for i in 0..self.n {
            for j in 0..i {
                let v = self.get(j, i);
                self.set(i, j, v);
            }
        }
    }

    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out.set(a, b, self.get(i, j));
            }
        }
        out
    }

    pub fn rows(&self) -> Vec<Vec<F>> {
        self.data.chunks(self.n.max(1)).map(<[F]>::to_vec).collect()
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<F> {
    l: Matrix<F>,
}

impl<F: Scalar> Cholesky<F> {
    /// Fails with the index of the first non-positive pivot.
    pub fn new(a: &Matrix<F>) -> Result<Self, usize> {
        let n = a.dim();
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d = d - l.get(j, k) * l.get(j, k);
            }
            // written negated so that NaN is rejected too
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(d > F::zero()) || !d.is_finite() {
                return Err(j);
            }
            let djj = d.sqrt();
            l.set(j, j, djj);
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s = s - l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / djj);
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &[F]) -> Vec<F> {
        let n = self.l.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] = y[i] - self.l.get(i, k) * y[k];
            }
            y[i] = y[i] / self.l.get(i, i);
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] = y[i] - self.l.get(k, i) * y[k];
            }
            y[i] = y[i] / self.l.get(i, i);
        }
        y
    }

    pub fn inverse(&self) -> Matrix<F> {
        let n = self.l.dim();
        let mut inv = Matrix::zeros(n);
        let mut e = vec![F::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = F::zero());
            e[j] = F::one();
            for (i, v) in self.solve(&e).into_iter().enumerate() {
                inv.set(i, j, v);
            }
        }
        // remove round-off asymmetry
        for i in 0..n {
            for j in 0..i {
                let avg = (inv.get(i, j) + inv.get(j, i)) / F::of(2.0);
                inv.set(i, j, avg);
                inv.set(j, i, avg);
            }
        }
        inv
    }
}

/// Columns of a Gram matrix that are (numerically) linear combinations of
/// earlier columns, found by Cholesky that skips dependent pivots.
pub fn dependent_columns<F: Scalar>(gram: &Matrix<F>) -> Vec<usize> {
    let n = gram.dim();
    let tol = F::epsilon() * F::of(1e4);
    let mut l = Matrix::zeros(n);
    let mut independent = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..n {
        let mut d = gram.get(j, j);
        for &k in &independent {
            d = d - l.get(j, k) * l.get(j, k);
        }
        let scale = gram.get(j, j).abs().max(F::min_positive_value());
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(d > tol * scale) {
            dependent.push(j);
            continue;
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in j + 1..n {
            let mut s = gram.get(i, j);
            for &k in &independent {
                s = s - l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
        independent.push(j);
    }
    dependent
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_invert() {
        let a = Matrix::from_rows(vec![
            vec![4.0, 2.0, 0.6],
            vec![2.0, 5.0, 1.0],
            vec![0.6, 1.0, 3.0],
        ]);
        let c = Cholesky::new(&a).unwrap();
        let x = c.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a.get(i, j) * x[j]).sum();
            assert!((ax - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
        let inv = c.inverse();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a.get(i, k) * inv.get(k, j)).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn detects_dependence() {
        // columns: 1, x, 1-x  => third is dependent
        let x = [0.0, 1.0, 1.0, 0.0, 1.0];
        let cols: Vec<Vec<f64>> = vec![
            vec![1.0; 5],
            x.to_vec(),
            x.iter().map(|v| 1.0 - v).collect(),
        ];
        let mut g = Matrix::<f64>::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                g.set(i, j, cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum());
            }
        }
        assert_eq!(dependent_columns(&g), vec![2]);
        assert!(Cholesky::new(&g).is_err());
    }
}
