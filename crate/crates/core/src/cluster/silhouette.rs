use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{euclidean_unchecked, Metric};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SilhouetteReport {
    #[serde(skip)]
    pub per_point: Vec<f64>,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bootstrap_samples: usize,
}

pub(crate) fn cluster_count(assignments: &[usize]) -> usize {
    assignments.iter().copied().max().map_or(0, |m| m + 1)
}

pub(crate) fn check_labels(n: usize, assignments: &[usize]) -> Result<usize> {
    if assignments.len() != n {
        return Err(Error::Shape(format!(
            "{} assignments for {n} points",
            assignments.len()
        )));
    }
    let k = cluster_count(assignments);
    let mut present = vec![false; k];
    assignments.iter().for_each(|&a| present[a] = true);
    let distinct = present.iter().filter(|&&p| p).count();
    if distinct < 2 {
        return Err(Error::TooFewClusters {
            required: 2,
            found: distinct,
        });
    }
    Ok(k)
}

/// Silhouette of one point from its per-cluster weighted distance sums and
/// the weighted cluster sizes. `own_weight` counts the point itself.
#[inline]
pub(crate) fn point_score(sums: &[f64], sizes: &[f64], own: usize) -> f64 {
    if sizes[own] <= 1.0 {
        return 0.0;
    }
    let a = sums[own] / (sizes[own] - 1.0);
    let mut b = f64::INFINITY;
    for (c, (&s, &w)) in sums.iter().zip(sizes).enumerate() {
        if c != own && w > 0.0 {
            b = b.min(s / w);
        }
    }
    let m = a.max(b);
    if m > 0.0 {
        (b - a) / m
    } else {
        0.0
    }
}

/// Per-point and mean silhouette. Points alone in their cluster score 0.
pub fn silhouette<T: Scalar>(
    points: &Matrix<T>,
    assignments: &[usize],
    metric: &Metric<T>,
) -> Result<SilhouetteReport> {
    let k = check_labels(points.rows(), assignments)?;
    let work = metric.embed_rows(points)?;
    let n = work.rows();
    let mut sizes = vec![0.0; k];
    assignments.iter().for_each(|&a| sizes[a] += 1.0);
    let per_point: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut sums = vec![0.0; k];
            let xi = work.row(i);
            for (j, &c) in assignments.iter().enumerate() {
                if j != i {
                    sums[c] += euclidean_unchecked(xi, work.row(j)).as_f64();
                }
            }
            point_score(&sums, &sizes, assignments[i])
        })
        .collect();
    let mean = per_point.iter().sum::<f64>() / n as f64;
    Ok(SilhouetteReport {
        per_point,
        mean,
        ci_low: mean,
        ci_high: mean,
        bootstrap_samples: 0,
    })
}
