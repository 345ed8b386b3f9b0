use std::cmp::Ordering;

use rayon::prelude::*;

use super::{squared_euclidean, Metric};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Exact k-nearest-neighbor lists, one row per point, nearest first.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborGraph<T> {
    pub k: usize,
    pub n: usize,
    indices: Vec<usize>,
    distances: Vec<T>,
}

impl<T: Scalar> NeighborGraph<T> {
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn distances(&self, i: usize) -> &[T] {
        &self.distances[i * self.k..(i + 1) * self.k]
    }
}

#[inline]
fn by_distance_then_index<T: Scalar>(a: &(T, usize), b: &(T, usize)) -> Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

/// Exhaustive kNN under `metric`; ties go to the lower row index.
pub fn knn_graph<T: Scalar>(
    data: &Matrix<T>,
    k: usize,
    metric: &Metric<T>,
) -> Result<NeighborGraph<T>> {
    let n = data.rows();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k must satisfy 1 <= k < n (k = {k}, n = {n})"
        )));
    }
    if let Some(row) = data.first_non_finite_row() {
        return Err(Error::NonFinite(row.to_string()));
    }
    let space = metric.embed_rows(data)?;
    let space = space.as_ref();
    let rows: Vec<Vec<(T, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = space.row(i);
            let mut cand: Vec<(T, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (squared_euclidean(xi, space.row(j)).sqrt(), j))
                .collect();
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, by_distance_then_index);
                cand.truncate(k);
            }
            cand.sort_unstable_by(by_distance_then_index);
            cand
        })
        .collect();
    let mut indices = Vec::with_capacity(n * k);
    let mut distances = Vec::with_capacity(n * k);
    for row in rows {
        for (d, j) in row {
            indices.push(j);
            distances.push(d);
        }
    }
    Ok(NeighborGraph {
        k,
        n,
        indices,
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_pairs() {
        let data = Matrix::from_rows(&[[0.0], [1.0], [10.0], [11.0]]).unwrap();
        let g = knn_graph(&data, 1, &Metric::Euclidean).unwrap();
        let nn: Vec<usize> = (0..4).map(|i| g.neighbors(i)[0]).collect();
        assert_eq!(nn, vec![1, 0, 3, 2]);
        assert_eq!(g.distances(2), &[1.0]);
    }

    #[test]
    fn complete_graph() {
        let data = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [5.0, 5.0]]).unwrap();
        let g = knn_graph(&data, 3, &Metric::Euclidean).unwrap();
        for i in 0..4 {
            let mut ns = g.neighbors(i).to_vec();
            ns.sort();
            let want: Vec<usize> = (0..4).filter(|&j| j != i).collect();
            assert_eq!(ns, want);
            assert!(g.distances(i).windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn ties_prefer_lower_index() {
        let data = Matrix::from_rows(&[[0.0], [-1.0], [1.0], [5.0]]).unwrap();
        let g = knn_graph(&data, 1, &Metric::Euclidean).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
    }

    #[test]
    fn rejects_k_too_large() {
        let data = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(knn_graph(&data, 2, &Metric::Euclidean).is_err());
        assert!(knn_graph(&data, 0, &Metric::Euclidean).is_err());
    }
}
