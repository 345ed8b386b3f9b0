//! Distance metrics and exact nearest-neighbor graphs.

mod covariance;
mod knn;
pub mod linalg;

pub use covariance::{mahalanobis, CovarianceModel, Ridge};
pub use knn::{knn_graph, NeighborGraph};

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Straight-line distance. Panics in debug builds on length mismatch; use
/// [`euclidean`] for a checked version.
#[inline]
pub fn euclidean_unchecked<T: Scalar>(x: &[T], y: &[T]) -> T {
    squared_euclidean(x, y).sqrt()
}

#[inline]
pub fn squared_euclidean<T: Scalar>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    let mut s = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        let d = a - b;
        s += d * d;
    }
    s
}

pub fn euclidean<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(euclidean_unchecked(x, y))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Euclidean,
    Mahalanobis,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Euclidean => "euclidean",
            MetricKind::Mahalanobis => "mahalanobis",
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(Self::Euclidean),
            "mahalanobis" => Ok(Self::Mahalanobis),
            other => Err(Error::InvalidParameter(format!(
                "unknown metric {other:?} (expected euclidean or mahalanobis)"
            ))),
        }
    }
}

/// A metric ready to evaluate; Mahalanobis carries its fitted covariance.
#[derive(Clone, Debug, PartialEq)]
pub enum Metric<T> {
    Euclidean,
    Mahalanobis(CovarianceModel<T>),
}

impl<T: Scalar> Metric<T> {
    /// Resolves a metric kind against the data it will measure; Mahalanobis
    /// fits the covariance of `data` with the default ridge.
    pub fn fit(kind: MetricKind, data: &Matrix<T>) -> Result<Self> {
        match kind {
            MetricKind::Euclidean => Ok(Metric::Euclidean),
            MetricKind::Mahalanobis => Ok(Metric::Mahalanobis(CovarianceModel::fit(
                data,
                Ridge::Auto,
            )?)),
        }
    }

    pub fn kind(&self) -> MetricKind {
        match self {
            Metric::Euclidean => MetricKind::Euclidean,
            Metric::Mahalanobis(_) => MetricKind::Mahalanobis,
        }
    }

    pub fn distance(&self, x: &[T], y: &[T]) -> Result<T> {
        match self {
            Metric::Euclidean => euclidean(x, y),
            Metric::Mahalanobis(m) => mahalanobis(x, y, m),
        }
    }

    /// Rows transformed so that Euclidean distance between them equals this
    /// metric between the originals.
    pub fn embed_rows<'a>(&self, data: &'a Matrix<T>) -> Result<Cow<'a, Matrix<T>>> {
        match self {
            Metric::Euclidean => Ok(Cow::Borrowed(data)),
            Metric::Mahalanobis(m) => {
                if data.cols() != m.dim {
                    return Err(Error::DimensionMismatch {
                        expected: m.dim,
                        actual: data.cols(),
                    });
                }
                Ok(Cow::Owned(m.whiten_rows(data)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert!(euclidean(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn metric_parse_and_identity_reduction() {
        assert_eq!(
            "Mahalanobis".parse::<MetricKind>().unwrap(),
            MetricKind::Mahalanobis
        );
        let sigma: Matrix<f64> = Matrix::identity(3);
        let m = Metric::Mahalanobis(
            CovarianceModel::from_sigma(vec![0.0; 3], sigma, Ridge::Fixed(0.0)).unwrap(),
        );
        let (x, y) = ([1.0, 2.0, 3.0], [-1.0, 0.5, 2.0]);
        let a = m.distance(&x, &y).unwrap();
        let b = Metric::Euclidean.distance(&x, &y).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
