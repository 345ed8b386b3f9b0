use rayon::prelude::*;

use super::Embedding2D;
use crate::error::{Error, Result};
use crate::geometry::{squared_euclidean, Metric};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Rank-based neighborhood preservation of a 2D layout relative to the
/// original space, in [0, 1]. Distances in the original space follow
/// `metric`; the layout uses Euclidean distance.
pub fn trustworthiness<T: Scalar>(
    original: &Matrix<T>,
    layout: &Embedding2D<T>,
    k: usize,
    metric: &Metric<T>,
) -> Result<f64> {
    let n = original.rows();
    if layout.coords.rows() != n {
        return Err(Error::Shape(format!(
            "{} layout rows for {n} original rows",
            layout.coords.rows()
        )));
    }
    if k == 0 || 2 * k >= n {
        return Err(Error::InvalidParameter(format!(
            "trustworthiness needs 1 <= k < n/2 (k = {k}, n = {n})"
        )));
    }
    let high = metric.embed_rows(original)?;
    let low = &layout.coords;
    let penalties: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ranks = rank_row(&high, i);
            let nn_low = ordered_neighbors(low, i);
            nn_low[..k]
                .iter()
                .map(|&j| ranks[j])
                .filter(|&r| r > k)
                .map(|r| (r - k) as f64)
                .sum()
        })
        .collect();
    let total: f64 = penalties.iter().sum();
    let (nf, kf) = (n as f64, k as f64);
    Ok(1.0 - 2.0 / (nf * kf * (2.0 * nf - 3.0 * kf - 1.0)) * total)
}

/// Other points ordered by (distance, index) from row `i`.
fn ordered_neighbors<T: Scalar>(data: &Matrix<T>, i: usize) -> Vec<usize> {
    let xi = data.row(i);
    let mut d: Vec<(T, usize)> = (0..data.rows())
        .filter(|&j| j != i)
        .map(|j| (squared_euclidean(xi, data.row(j)), j))
        .collect();
    d.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    d.into_iter().map(|p| p.1).collect()
}

/// rank[j] = position of j among i's neighbors, starting at 1; rank[i] = 0.
fn rank_row<T: Scalar>(data: &Matrix<T>, i: usize) -> Vec<usize> {
    let mut ranks = vec![0usize; data.rows()];
    for (r, j) in ordered_neighbors(data, i).into_iter().enumerate() {
        ranks[j] = r + 1;
    }
    ranks
}
