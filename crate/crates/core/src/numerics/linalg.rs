use super::matrix::{dot, DenseMatrix};
use super::NumericsError;

/// LU factorization with partial pivoting, kept around so repeated solves
/// against the same matrix (M_R in the physics layer) reuse the factor.
#[derive(Clone, Debug)]
pub struct LuFactor {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl LuFactor {
    /// Factor a square matrix. A pivot below `1e-14 * norm_inf(A)` is
    /// treated as singular.
    pub fn new(a: &DenseMatrix) -> Result<Self, NumericsError> {
        assert!(a.is_square(), "LU requires a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let pivot_floor = 1e-14 * a.norm_inf();

        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in (k + 1)..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= pivot_floor {
                return Err(NumericsError::SingularMatrix { pivot: k });
            }
            if p != k {
                perm.swap(k, p);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let piv = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / piv;
                lu[(i, k)] = factor;
                for j in (k + 1)..n {
                    let upper = lu[(k, j)];
                    lu[(i, j)] -= factor * upper;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    /// Solve A x = b for a single right-hand side.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "rhs length mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // Forward: L y = P b (unit lower triangle).
        for i in 1..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        // Backward: U x = y.
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solve A X = B column by column.
    pub fn solve_mat(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(b.rows(), self.dim(), "rhs row count mismatch");
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = self.solve_vec(&b.column(j));
            for (i, v) in col.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Solve A X = B with partial pivoting.
pub fn solve_linear(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, NumericsError> {
    Ok(LuFactor::new(a)?.solve_mat(b))
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    l: DenseMatrix,
}

impl CholeskyFactor {
    /// Fails on the first non-positive leading minor, reporting its index.
    pub fn new(a: &DenseMatrix) -> Result<Self, NumericsError> {
        assert!(a.is_square(), "Cholesky requires a square matrix");
        let n = a.rows();
        let mut l = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(NumericsError::NotPositiveDefinite { minor: i });
                    }
                    l[(i, j)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn lower(&self) -> &DenseMatrix {
        &self.l
    }

    /// Solve L y = b.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.l[(i, j)] * y[j];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solve L^T x = b.
    pub fn solve_lower_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.l[(j, i)] * x[j];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solve A x = b via the two triangular sweeps.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        self.solve_lower_transpose(&self.solve_lower(b))
    }
}

/// Least squares min ||A x - b||_2 by Householder QR, for tall systems.
///
/// Returns the solution together with the indices of columns found linearly
/// dependent (their coefficients are forced to zero). `rank_tol` is relative
/// to the largest diagonal of R.
pub fn lstsq_qr(
    a: &DenseMatrix,
    b: &[f64],
    rank_tol: f64,
) -> Result<(Vec<f64>, Vec<usize>), NumericsError> {
    let m = a.rows();
    let n = a.cols();
    assert!(m >= n, "lstsq requires rows >= cols");
    assert_eq!(b.len(), m, "rhs length mismatch");

    let mut r = a.clone();
    let mut qtb = b.to_vec();

    // Householder sweep, reflecting b along the way.
    for k in 0..n {
        let mut norm = 0.0;
        for i in k..m {
            norm = f64::hypot(norm, r[(i, k)]);
        }
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[(k, k)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let mut s = 0.0;
            for (off, &vi) in v.iter().enumerate() {
                s += vi * r[(k + off, j)];
            }
            let scale = 2.0 * s / vnorm2;
            for (off, &vi) in v.iter().enumerate() {
                r[(k + off, j)] -= scale * vi;
            }
        }
        let mut s = 0.0;
        for (off, &vi) in v.iter().enumerate() {
            s += vi * qtb[k + off];
        }
        let scale = 2.0 * s / vnorm2;
        for (off, &vi) in v.iter().enumerate() {
            qtb[k + off] -= scale * vi;
        }
    }

    let max_diag = (0..n).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 {
        return Err(NumericsError::SingularMatrix { pivot: 0 });
    }
    let floor = rank_tol * max_diag;
    let dropped: Vec<usize> = (0..n).filter(|&k| r[(k, k)].abs() <= floor).collect();

    // Back substitution, zeroing dependent columns.
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        if r[(i, i)].abs() <= floor {
            x[i] = 0.0;
            continue;
        }
        let mut s = qtb[i];
        for j in (i + 1)..n {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    Ok((x, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_identity_returns_rhs() {
        let a = DenseMatrix::identity(3);
        let b = DenseMatrix::from_rows(&[vec![1.0, 4.0], vec![2.0, 5.0], vec![3.0, 6.0]]);
        let x = solve_linear(&a, &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn lu_diagonal_solve() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let b = DenseMatrix::from_rows(&[vec![2.0], vec![8.0]]);
        let x = solve_linear(&a, &b).unwrap();
        assert_eq!(x[(0, 0)], 1.0);
        assert_eq!(x[(1, 0)], 2.0);
    }

    #[test]
    fn lu_flags_singular_with_pivot_index() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        let b = DenseMatrix::zeros(2, 1);
        match solve_linear(&a, &b) {
            Err(NumericsError::SingularMatrix { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_reports_offending_minor() {
        let a = DenseMatrix::from_rows(&[
            vec![4.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 9.0],
        ]);
        match CholeskyFactor::new(&a) {
            Err(NumericsError::NotPositiveDefinite { minor }) => assert_eq!(minor, 1),
            other => panic!("expected not-positive-definite, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_solve_matches_lu() {
        let a = DenseMatrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.2],
            vec![0.5, 0.2, 5.0],
        ]);
        let b = vec![1.0, -2.0, 0.25];
        let chol = CholeskyFactor::new(&a).unwrap();
        let lu = LuFactor::new(&a).unwrap();
        let xc = chol.solve_vec(&b);
        let xl = lu.solve_vec(&b);
        for (c, l) in xc.iter().zip(&xl) {
            assert!((c - l).abs() < 1e-12);
        }
    }

    #[test]
    fn lstsq_exact_on_square_system() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let x_true = [0.5, -2.0];
        let b = a.matvec(&x_true);
        let (x, dropped) = lstsq_qr(&a, &b, 1e-12).unwrap();
        assert!(dropped.is_empty());
        assert!((x[0] - x_true[0]).abs() < 1e-12);
        assert!((x[1] - x_true[1]).abs() < 1e-12);
    }

    #[test]
    fn lstsq_drops_dependent_column() {
        // Third column duplicates the first.
        let a = DenseMatrix::from_rows(&[
            vec![1.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 1.0, 1.0],
            vec![2.0, -1.0, 2.0],
        ]);
        let b = vec![1.0, 2.0, 3.0, 0.0];
        let (x, dropped) = lstsq_qr(&a, &b, 1e-10).unwrap();
        assert_eq!(dropped, vec![2]);
        assert_eq!(x[2], 0.0);
    }
}
