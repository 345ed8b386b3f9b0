use std::ops::RangeInclusive;

use serde::Serialize;

use super::bootstrap::bootstrap_silhouette;
use super::elbow::{elbow_select, ElbowCurve};
use super::kmeans::{best_run, into_model, validate_points, KMeansModel, LloydRun};
use super::silhouette::silhouette;
use crate::error::{Error, Result};
use crate::geometry::{squared_euclidean, Metric};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::seed::{derive_indexed, derive_seed};

/// One row of the per-k diagnostic table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KDiagnostics {
    pub k: usize,
    pub inertia: f64,
    pub silhouette: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct KSelection<T> {
    pub per_k: Vec<KDiagnostics>,
    pub k_silhouette: usize,
    pub k_elbow: usize,
    /// The two criteria differ by at most one.
    pub agree: bool,
    pub elbow: ElbowCurve,
    pub models: Vec<KMeansModel<T>>,
}

impl<T: Scalar> KSelection<T> {
    pub fn model(&self, k: usize) -> Option<&KMeansModel<T>> {
        self.models.iter().find(|m| m.k == k)
    }
}

#[derive(Clone, Debug)]
pub struct KSelectOptions {
    pub restarts: usize,
    /// Resamples for per-k bootstrap intervals; `None` skips them.
    pub bootstrap_samples: Option<usize>,
}

impl Default for KSelectOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            bootstrap_samples: None,
        }
    }
}

/// The previous solution plus the point farthest from it, as starting
/// centroids for k + 1.
fn grow<T: Scalar>(work: &Matrix<T>, prev: &LloydRun<T>) -> Matrix<T> {
    let mut far = (0, T::neg_infinity());
    for (i, x) in work.iter_rows().enumerate() {
        let d = squared_euclidean(x, prev.centroids.row(prev.assignments[i]));
        if d > far.1 {
            far = (i, d);
        }
    }
    let mut rows: Vec<Vec<T>> = prev.centroids.iter_rows().map(<[T]>::to_vec).collect();
    rows.push(work.row(far.0).to_vec());
    Matrix::from_rows(&rows).expect("consistent widths")
}

/// Fits k-means for every k in the range (ascending) and scores each by mean
/// silhouette and inertia. Each fit also competes against a warm start from
/// the previous k's solution, so inertia never increases with k.
pub fn select_k<T: Scalar>(
    points: &Matrix<T>,
    metric: &Metric<T>,
    k_range: RangeInclusive<usize>,
    seed: u64,
    opts: &KSelectOptions,
) -> Result<KSelection<T>> {
    let n = points.rows();
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo < 2 || hi > n || lo > hi {
        return Err(Error::InvalidParameter(format!(
            "k range {lo}..={hi} must lie within [2, {n}]"
        )));
    }
    validate_points(points, hi)?;
    let work = metric.embed_rows(points)?;
    let fit_seed = derive_seed(seed, "kmeans");
    let boot_seed = derive_seed(seed, "bootstrap");
    let mut prev: Option<LloydRun<T>> = None;
    let mut models = Vec::new();
    let mut per_k = Vec::new();
    for k in k_range {
        let warm = prev.as_ref().map(|p| grow(&work, p));
        let run = best_run(
            &work,
            k,
            derive_indexed(fit_seed, k as u64),
            opts.restarts,
            warm,
        );
        let model = into_model(points, run.clone(), fit_seed);
        let sil = silhouette(points, &model.assignments, metric)?;
        let (ci_low, ci_high) = match opts.bootstrap_samples {
            Some(s) => {
                let (l, h) = bootstrap_silhouette(
                    points,
                    &model.assignments,
                    metric,
                    s,
                    derive_indexed(boot_seed, k as u64),
                )?;
                (Some(l), Some(h))
            }
            None => (None, None),
        };
        per_k.push(KDiagnostics {
            k,
            inertia: model.inertia.as_f64(),
            silhouette: sil.mean,
            ci_low,
            ci_high,
        });
        models.push(model);
        prev = Some(run);
    }
    let mut k_silhouette = per_k[0].k;
    let mut best = f64::NEG_INFINITY;
    for d in &per_k {
        if d.silhouette > best {
            best = d.silhouette;
            k_silhouette = d.k;
        }
    }
    let ks: Vec<usize> = per_k.iter().map(|d| d.k).collect();
    let inertias: Vec<f64> = per_k.iter().map(|d| d.inertia).collect();
    let elbow = elbow_select(&ks, &inertias)?;
    Ok(KSelection {
        k_silhouette,
        k_elbow: elbow.k_opt,
        agree: k_silhouette.abs_diff(elbow.k_opt) <= 1,
        per_k,
        elbow,
        models,
    })
}
