use serde::Serialize;

use super::linalg;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Ridge applied to the covariance diagonal before inversion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Ridge<T> {
    /// `1e-6 * trace(sigma) / dim`.
    Auto,
    Fixed(T),
}

/// Sample covariance of a data matrix with its regularized inverse.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovarianceModel<T> {
    pub dim: usize,
    pub mean: Vec<T>,
    pub sigma: Matrix<T>,
    pub sigma_inv: Matrix<T>,
    pub ridge: T,
    /// `C⁻¹` for the Cholesky factor `C` of `sigma + ridge I`; multiplying a
    /// difference vector by it turns Mahalanobis distance into Euclidean.
    whitener: Matrix<T>,
}

impl<T: Scalar> CovarianceModel<T> {
    /// Fits on the rows of `data` (divisor `n - 1`).
    pub fn fit(data: &Matrix<T>, ridge: Ridge<T>) -> Result<Self> {
        let n = data.rows();
        let d = data.cols();
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "covariance needs at least 2 rows, got {n}"
            )));
        }
        let nf = T::from_count(n);
        let mut mean = vec![T::zero(); d];
        for row in data.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= nf;
        }
        let mut sigma = Matrix::zeros(d, d);
        let mut centered = vec![T::zero(); d];
        for row in data.iter_rows() {
            for ((c, &v), &m) in centered.iter_mut().zip(row).zip(&mean) {
                *c = v - m;
            }
            for i in 0..d {
                let ci = centered[i];
                for j in 0..=i {
                    sigma[(i, j)] += ci * centered[j];
                }
            }
        }
        let denom = T::from_count(n - 1);
        for i in 0..d {
            for j in 0..=i {
                let v = sigma[(i, j)] / denom;
                sigma[(i, j)] = v;
                sigma[(j, i)] = v;
            }
        }
        Self::from_sigma(mean, sigma, ridge)
    }

    /// Builds a model around a known covariance matrix.
    pub fn from_sigma(mean: Vec<T>, sigma: Matrix<T>, ridge: Ridge<T>) -> Result<Self> {
        let d = sigma.rows();
        if sigma.cols() != d || mean.len() != d {
            return Err(Error::Shape(
                "covariance must be square and match the mean".into(),
            ));
        }
        let ridge = match ridge {
            Ridge::Auto => {
                let trace = (0..d).fold(T::zero(), |acc, i| acc + sigma[(i, i)]);
                T::lit(1e-6) * trace / T::from_count(d.max(1))
            }
            Ridge::Fixed(r) => {
                if !(r >= T::zero()) {
                    return Err(Error::InvalidParameter(format!(
                        "ridge must be >= 0, got {r}"
                    )));
                }
                r
            }
        };
        let mut reg = sigma.clone();
        for i in 0..d {
            reg[(i, i)] += ridge;
        }
        let chol = linalg::cholesky(&reg).ok_or(Error::NotPositiveDefinite {
            ridge: ridge.as_f64(),
        })?;
        let whitener = linalg::invert_lower(&chol);
        let sigma_inv = linalg::spd_inverse_from_inverse_factor(&whitener);
        if !sigma_inv.is_finite() {
            return Err(Error::NotPositiveDefinite {
                ridge: ridge.as_f64(),
            });
        }
        Ok(Self {
            dim: d,
            mean,
            sigma,
            sigma_inv,
            ridge,
            whitener,
        })
    }

    /// Largest entry-wise deviation of `sigma_inv (sigma + ridge I)` from the identity.
    pub fn inverse_residual(&self) -> T {
        let d = self.dim;
        let mut worst = T::zero();
        for i in 0..d {
            for j in 0..d {
                let mut s = T::zero();
                for k in 0..d {
                    let r = if k == j { self.ridge } else { T::zero() };
                    s += self.sigma_inv[(i, k)] * (self.sigma[(k, j)] + r);
                }
                let want = if i == j { T::one() } else { T::zero() };
                worst = worst.max((s - want).abs());
            }
        }
        worst
    }

    /// Maps a vector into the whitened space.
    pub fn whiten(&self, x: &[T]) -> Vec<T> {
        let d = self.dim;
        let mut out = vec![T::zero(); d];
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.whitener.row(i);
            let mut s = T::zero();
            for k in 0..=i {
                s += row[k] * x[k];
            }
            *o = s;
        }
        out
    }

    pub fn whiten_rows(&self, data: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(data.rows(), self.dim);
        for i in 0..data.rows() {
            let w = self.whiten(data.row(i));
            out.row_mut(i).copy_from_slice(&w);
        }
        out
    }
}

/// `sqrt((x - y)ᵀ sigma⁻¹ (x - y))` with the model's regularized inverse.
pub fn mahalanobis<T: Scalar>(x: &[T], y: &[T], model: &CovarianceModel<T>) -> Result<T> {
    if x.len() != model.dim || y.len() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            actual: if x.len() != model.dim {
                x.len()
            } else {
                y.len()
            },
        });
    }
    let diff: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
    let mut q = T::zero();
    for (i, &di) in diff.iter().enumerate() {
        let row = model.sigma_inv.row(i);
        let mut s = T::zero();
        for (&r, &dj) in row.iter().zip(&diff) {
            s += r * dj;
        }
        q += di * s;
    }
    Ok(q.max(T::zero()).sqrt())
}
