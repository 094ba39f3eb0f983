use super::linalg::CholeskyFactor;
use super::matrix::DenseMatrix;
use super::NumericsError;

/// Eigenpairs of K phi = lambda M phi for symmetric K and SPD M.
#[derive(Clone, Debug)]
pub struct GeneralizedEig {
    /// Eigenvalues sorted ascending.
    pub values: Vec<f64>,
    /// Mass-normalized eigenvectors, column j pairs with values[j].
    pub vectors: DenseMatrix,
}

/// Solve the generalized symmetric eigenproblem by reducing to standard form
/// with the Cholesky factor of M: A = L^{-1} K L^{-T}, then tridiagonalizing
/// (Householder) and running implicit-shift QL. Back-transformed vectors
/// phi = L^{-T} y come out M-orthonormal.
pub fn eig_sym_generalized(
    k: &DenseMatrix,
    m: &DenseMatrix,
) -> Result<GeneralizedEig, NumericsError> {
    assert!(k.is_square() && m.is_square(), "matrices must be square");
    assert_eq!(k.rows(), m.rows(), "dimension mismatch");
    if !k.is_symmetric() || !m.is_symmetric() {
        return Err(NumericsError::NotSymmetric);
    }
    let n = k.rows();
    let chol = CholeskyFactor::new(m)?;

    // A = L^{-1} K L^{-T}: column solves then row solves.
    let mut a = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let col = chol.solve_lower(&k.column(j));
        for i in 0..n {
            a[(i, j)] = col[i];
        }
    }
    let mut b = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|j| a[(i, j)]).collect();
        let solved = chol.solve_lower(&row);
        for j in 0..n {
            b[(i, j)] = solved[j];
        }
    }
    // Round-off can leave a tiny skew part; the QL stage assumes symmetry.
    b.symmetrize();
    let a = b;

    let (mut values, z) = eig_sym_standard(&a)?;

    // Back-transform and sort ascending.
    let mut vectors = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let phi = chol.solve_lower_transpose(&z.column(j));
        for i in 0..n {
            vectors[(i, j)] = phi[i];
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let sorted_values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut sorted_vectors = DenseMatrix::zeros(n, n);
    for (jj, &j) in order.iter().enumerate() {
        for i in 0..n {
            sorted_vectors[(i, jj)] = vectors[(i, j)];
        }
    }
    values = sorted_values;

    // Polish mass normalization: phi^T M phi = 1 exactly up to round-off.
    for j in 0..n {
        let phi = sorted_vectors.column(j);
        let mphi = m.matvec(&phi);
        let norm = phi
            .iter()
            .zip(&mphi)
            .map(|(p, q)| p * q)
            .sum::<f64>()
            .sqrt();
        for i in 0..n {
            sorted_vectors[(i, j)] /= norm;
        }
    }

    Ok(GeneralizedEig {
        values,
        vectors: sorted_vectors,
    })
}

/// Standard symmetric eigenproblem: Householder tridiagonalization followed
/// by implicit-shift QL with eigenvector accumulation.
fn eig_sym_standard(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix), NumericsError> {
    let n = a.rows();
    let mut z = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut z, &mut d, &mut e);
    tql2(&mut d, &mut e, &mut z)?;
    Ok((d, z))
}

/// Householder reduction to tridiagonal form, accumulating transforms in z.
fn tred2(z: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = z.rows();
    if n == 1 {
        d[0] = z[(0, 0)];
        e[0] = 0.0;
        z[(0, 0)] = 1.0;
        return;
    }
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        let mut scale = 0.0;
        if l > 0 {
            for k in 0..=l {
                scale += z[(i, k)].abs();
            }
            if scale == 0.0 {
                e[i] = z[(i, l)];
            } else {
                for k in 0..=l {
                    let v = z[(i, k)] / scale;
                    z[(i, k)] = v;
                    h += v * v;
                }
                let mut f = z[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[(i, l)] = f - g;
                f = 0.0;
                for j in 0..=l {
                    z[(j, i)] = z[(i, j)] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += z[(j, k)] * z[(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g += z[(k, j)] * z[(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * z[(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = z[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let delta = f * e[k] + g * z[(i, k)];
                        z[(j, k)] -= delta;
                    }
                }
            }
        } else {
            e[i] = z[(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += z[(i, k)] * z[(k, j)];
                }
                for k in 0..i {
                    let delta = g * z[(k, i)];
                    z[(k, j)] -= delta;
                }
            }
        }
        d[i] = z[(i, i)];
        z[(i, i)] = 1.0;
        for j in 0..i {
            z[(j, i)] = 0.0;
            z[(i, j)] = 0.0;
        }
    }
}

/// Implicit-shift QL on a symmetric tridiagonal matrix, updating z columns.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut DenseMatrix) -> Result<(), NumericsError> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            // Find a small subdiagonal split point.
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(NumericsError::EigenNoConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = f64::hypot(g, 1.0);
            let sign_r = if g >= 0.0 { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f64::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[(k, i + 1)];
                    z[(k, i + 1)] = s * z[(k, i)] + c * f;
                    z[(k, i)] = c * z[(k, i)] - s * f;
                }
            }
            if r == 0.0 && m > l {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_problem_is_exact() {
        let k = DenseMatrix::from_rows(&[
            vec![4.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 9.0],
        ]);
        let m = DenseMatrix::identity(3);
        let eig = eig_sym_generalized(&k, &m).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-12);
        assert!((eig.values[1] - 4.0).abs() < 1e-12);
        assert!((eig.values[2] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn two_mass_chain_matches_hand_solution() {
        // K = [[2,-1],[-1,1]], M = I: eigenvalues (3 +- sqrt(5)) / 2.
        let k = DenseMatrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 1.0]]);
        let m = DenseMatrix::identity(2);
        let eig = eig_sym_generalized(&k, &m).unwrap();
        let lo = (3.0 - 5.0_f64.sqrt()) / 2.0;
        let hi = (3.0 + 5.0_f64.sqrt()) / 2.0;
        assert!((eig.values[0] - lo).abs() < 1e-12);
        assert!((eig.values[1] - hi).abs() < 1e-12);
    }

    #[test]
    fn vectors_are_mass_orthonormal() {
        let k = DenseMatrix::from_rows(&[
            vec![5.0, -2.0, 0.0],
            vec![-2.0, 4.0, -1.0],
            vec![0.0, -1.0, 3.0],
        ]);
        let m = DenseMatrix::from_rows(&[
            vec![2.0, 0.2, 0.0],
            vec![0.2, 1.5, 0.1],
            vec![0.0, 0.1, 1.0],
        ]);
        let eig = eig_sym_generalized(&k, &m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let phi_i = eig.vectors.column(i);
                let phi_j = eig.vectors.column(j);
                let m_phi_j = m.matvec(&phi_j);
                let prod: f64 = phi_i.iter().zip(&m_phi_j).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (prod - expect).abs() < 1e-10,
                    "phi_{i}^T M phi_{j} = {prod}"
                );
            }
        }
    }

    #[test]
    fn residual_is_small() {
        let k = DenseMatrix::from_rows(&[
            vec![10.0, -4.0, 1.0, 0.0],
            vec![-4.0, 8.0, -3.0, 0.5],
            vec![1.0, -3.0, 6.0, -2.0],
            vec![0.0, 0.5, -2.0, 4.0],
        ]);
        let m = DenseMatrix::from_rows(&[
            vec![3.0, 0.1, 0.0, 0.0],
            vec![0.1, 2.0, 0.1, 0.0],
            vec![0.0, 0.1, 2.5, 0.1],
            vec![0.0, 0.0, 0.1, 1.5],
        ]);
        let eig = eig_sym_generalized(&k, &m).unwrap();
        for j in 0..4 {
            let phi = eig.vectors.column(j);
            let k_phi = k.matvec(&phi);
            let m_phi = m.matvec(&phi);
            for i in 0..4 {
                let res = k_phi[i] - eig.values[j] * m_phi[i];
                assert!(res.abs() < 1e-9, "residual {res} at ({i},{j})");
            }
        }
    }
}
