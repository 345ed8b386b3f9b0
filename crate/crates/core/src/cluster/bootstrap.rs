use rand::Rng;
use rayon::prelude::*;

use super::silhouette::{check_labels, point_score};
use crate::error::{Error, Result};
use crate::geometry::{euclidean_unchecked, Metric};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::seed::{derive_indexed, rng};

pub const MIN_RESAMPLES: usize = 100;
pub const MAX_REDRAWS: usize = 100;
/// Above this many points the pairwise distance table is not cached.
const DENSE_LIMIT: usize = 4096;

/// Percentile bootstrap interval (2.5%, 97.5%) for the mean silhouette.
///
/// Each resample is a with-replacement draw of `n` row indices, represented
/// as per-row multiplicities. Duplicated rows behave as distinct
/// observations at distance zero, exactly as if the resampled rows were
/// materialized. Draws in which a cluster vanishes are redrawn.
pub fn bootstrap_silhouette<T: Scalar>(
    points: &Matrix<T>,
    assignments: &[usize],
    metric: &Metric<T>,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < MIN_RESAMPLES {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs at least {MIN_RESAMPLES} resamples, got {samples}"
        )));
    }
    let k = check_labels(points.rows(), assignments)?;
    let work = metric.embed_rows(points)?;
    let n = work.rows();
    let dense: Option<Vec<f64>> = (n <= DENSE_LIMIT).then(|| {
        (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let xi = work.row(i);
                let w = &work;
                (0..n).map(move |j| euclidean_unchecked(xi, w.row(j)).as_f64())
            })
            .collect()
    });
    let mut present = vec![false; k];
    assignments.iter().for_each(|&a| present[a] = true);
    let stats: Vec<Result<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut r = rng(derive_indexed(seed, s as u64));
            for _ in 0..MAX_REDRAWS {
                let mut weights = vec![0u32; n];
                for _ in 0..n {
                    weights[r.random_range(0..n)] += 1;
                }
                let mut sizes = vec![0.0; k];
                for (&w, &a) in weights.iter().zip(assignments) {
                    sizes[a] += f64::from(w);
                }
                if (0..k).any(|c| present[c] && sizes[c] == 0.0) {
                    continue;
                }
                let mut total = 0.0;
                let mut sums = vec![0.0; k];
                for i in (0..n).filter(|&i| weights[i] > 0) {
                    sums.iter_mut().for_each(|v| *v = 0.0);
                    match &dense {
                        Some(d) => {
                            let row = &d[i * n..(i + 1) * n];
                            for j in 0..n {
                                sums[assignments[j]] += f64::from(weights[j]) * row[j];
                            }
                        }
                        None => {
                            let xi = work.row(i);
                            for j in (0..n).filter(|&j| weights[j] > 0) {
                                sums[assignments[j]] += f64::from(weights[j])
                                    * euclidean_unchecked(xi, work.row(j)).as_f64();
                            }
                        }
                    }
                    total += f64::from(weights[i]) * point_score(&sums, &sizes, assignments[i]);
                }
                return Ok(total / n as f64);
            }
            Err(Error::ResampleExhausted {
                retries: MAX_REDRAWS,
            })
        })
        .collect();
    let mut values = stats.into_iter().collect::<Result<Vec<f64>>>()?;
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite silhouettes"));
    let lo = crate::corpus::quantile_sorted(&values, 0.025);
    let hi = crate::corpus::quantile_sorted(&values, 0.975);
    Ok((lo, hi))
}
