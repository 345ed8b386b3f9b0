//! Small dense routines for symmetric positive-definite matrices.

use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Lower-triangular `L` with `a = L Lᵀ`, or `None` if `a` is not
/// numerically positive definite.
pub fn cholesky<T: Scalar>(a: &Matrix<T>) -> Option<Matrix<T>> {
    let n = a.rows();
    debug_assert_eq!(n, a.cols());
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Inverse of a lower-triangular matrix (also lower triangular).
pub fn invert_lower<T: Scalar>(l: &Matrix<T>) -> Matrix<T> {
    let n = l.rows();
    let mut inv = Matrix::zeros(n, n);
    for col in 0..n {
        // forward substitution for L x = e_col
        for i in col..n {
            let mut s = if i == col { T::one() } else { T::zero() };
            for k in col..i {
                s -= l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = s / l[(i, i)];
        }
    }
    inv
}

/// `(L Lᵀ)⁻¹ = L⁻ᵀ L⁻¹` given `L⁻¹`, symmetrized exactly.
pub fn spd_inverse_from_inverse_factor<T: Scalar>(l_inv: &Matrix<T>) -> Matrix<T> {
    let n = l_inv.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = T::zero();
            // (L⁻ᵀ L⁻¹)_{ij} = sum_k L⁻¹_{ki} L⁻¹_{kj}; L⁻¹ lower so k >= max(i, j)
            for k in i.max(j)..n {
                s += l_inv[(k, i)] * l_inv[(k, j)];
            }
            out[(i, j)] = s;
            out[(j, i)] = s;
        }
    }
    out
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues in descending order with the matching
/// eigenvectors as columns.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let tiny = T::epsilon() * T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off <= tiny {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(j, j)]
            .partial_cmp(&m[(i, i)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vecs = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vecs[(k, dst)] = v[(k, src)];
        }
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_roundtrip() {
        let a: Matrix<f64> =
            Matrix::from_rows(&[[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        let back = l.matmul(&l.transpose()).unwrap();
        for (x, y) in back.as_slice().iter().zip(a.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        let inv = spd_inverse_from_inverse_factor(&invert_lower(&l));
        let eye = inv.matmul(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((eye[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_rejected() {
        let a = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(cholesky(&a).is_none());
    }
    #[test]
    fn jacobi_matches_known_spectrum() {
        // eigenvalues of [[2,1],[1,2]] are 3 and 1
        let a: Matrix<f64> = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let (vals, vecs) = symmetric_eigen(&a);
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs[(0, 0)].abs() - h).abs() < 1e-12);
        assert!((vecs[(0, 0)] - vecs[(1, 0)]).abs() < 1e-12);

        let b: Matrix<f64> =
            Matrix::from_rows(&[[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 1.0]]).unwrap();
        let (vals, vecs) = symmetric_eigen(&b);
        for c in 0..3 {
            for r in 0..3 {
                let av: f64 = (0..3).map(|k| b[(r, k)] * vecs[(k, c)]).sum();
                assert!((av - vals[c] * vecs[(r, c)]).abs() < 1e-10);
            }
        }
        let trace: f64 = vals.iter().sum();
        assert!((trace - 8.0).abs() < 1e-12);
    }
}
