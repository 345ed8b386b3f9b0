use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{squared_euclidean, Metric};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::seed::{derive_indexed, rng};

pub const MAX_ITERATIONS: usize = 300;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KMeansModel<T> {
    pub k: usize,
    /// Cluster means in the input coordinates.
    pub centroids: Matrix<T>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squared distances under the fitting metric.
    pub inertia: T,
    pub iterations_run: usize,
    pub seed: u64,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_trace: Vec<T>,
}

impl<T: Scalar> KMeansModel<T> {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// One Lloyd run in (possibly whitened) working coordinates.
#[derive(Clone, Debug)]
pub(crate) struct LloydRun<T> {
    pub centroids: Matrix<T>,
    pub assignments: Vec<usize>,
    pub inertia: T,
    pub iterations: usize,
    pub trace: Vec<T>,
}

fn nearest<T: Scalar>(x: &[T], centroids: &Matrix<T>) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, row) in centroids.iter_rows().enumerate() {
        let d = squared_euclidean(x, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign<T: Scalar>(points: &Matrix<T>, centroids: &Matrix<T>) -> (Vec<usize>, Vec<T>) {
    let pairs: Vec<(usize, T)> = (0..points.rows())
        .into_par_iter()
        .map(|i| nearest(points.row(i), centroids))
        .collect();
    pairs.into_iter().unzip()
}

fn means<T: Scalar>(
    points: &Matrix<T>,
    assignments: &[usize],
    k: usize,
) -> (Matrix<T>, Vec<usize>) {
    let d = points.cols();
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (row, &a) in points.iter_rows().zip(assignments) {
        counts[a] += 1;
        for (s, &v) in sums.row_mut(a).iter_mut().zip(row) {
            *s += v;
        }
    }
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt > 0 {
            let inv = T::one() / T::from_count(cnt);
            sums.row_mut(c).iter_mut().for_each(|v| *v *= inv);
        }
    }
    (sums, counts)
}

fn total<T: Scalar>(d2: &[T]) -> T {
    d2.iter().fold(T::zero(), |a, &b| a + b)
}

/// Lloyd iterations from the given centroids. Empty clusters take the point
/// farthest from its own centroid (ties to the lower row index).
pub(crate) fn lloyd<T: Scalar>(points: &Matrix<T>, init: Matrix<T>) -> LloydRun<T> {
    let k = init.rows();
    let mut centroids = init;
    let mut prev: Option<Vec<usize>> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let (mut a, d2) = assign(points, &centroids);
        iterations += 1;
        trace.push(total(&d2));
        if prev.as_ref() == Some(&a) {
            break;
        }
        let (mut c, mut counts) = means(points, &a, k);
        for e in 0..k {
            if counts[e] > 0 {
                continue;
            }
            let mut far = None::<(usize, T)>;
            for (i, x) in points.iter_rows().enumerate() {
                if counts[a[i]] < 2 {
                    continue;
                }
                let d = squared_euclidean(x, c.row(a[i]));
                if far.is_none_or(|(_, best)| d > best) {
                    far = Some((i, d));
                }
            }
            let Some((i, _)) = far else { break };
            counts[a[i]] -= 1;
            a[i] = e;
            counts[e] = 1;
            c.row_mut(e).copy_from_slice(points.row(i));
        }
        centroids = c;
        prev = Some(a);
    }
    let assignments = prev.unwrap_or_else(|| assign(points, &centroids).0);
    let (centroids, _) = means(points, &assignments, k);
    let inertia = points
        .iter_rows()
        .zip(&assignments)
        .fold(T::zero(), |acc, (x, &a)| {
            acc + squared_euclidean(x, centroids.row(a))
        });
    LloydRun {
        centroids,
        assignments,
        inertia,
        iterations,
        trace,
    }
}

/// Greedy k-means++ seeding: each new center is the best of
/// `2 + floor(ln k)` candidates drawn proportionally to squared distance.
pub(crate) fn seed_centroids<T: Scalar>(points: &Matrix<T>, k: usize, seed: u64) -> Matrix<T> {
    let n = points.rows();
    let mut r = rng(seed);
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut chosen = vec![r.random_range(0..n)];
    let mut closest: Vec<f64> = points
        .iter_rows()
        .map(|x| squared_euclidean(x, points.row(chosen[0])).as_f64())
        .collect();
    while chosen.len() < k {
        let pot: f64 = closest.iter().sum();
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let cand = if pot > 0.0 {
                let target = r.random::<f64>() * pot;
                let mut acc = 0.0;
                let mut pick = n - 1;
                for (i, &d) in closest.iter().enumerate() {
                    acc += d;
                    if acc > target {
                        pick = i;
                        break;
                    }
                }
                pick
            } else {
                r.random_range(0..n)
            };
            let c = points.row(cand);
            let next: Vec<f64> = points
                .iter_rows()
                .zip(&closest)
                .map(|(x, &old)| old.min(squared_euclidean(x, c).as_f64()))
                .collect();
            let p: f64 = next.iter().sum();
            if best.as_ref().is_none_or(|b| p < b.0) {
                best = Some((p, cand, next));
            }
        }
        let (_, cand, next) = best.expect("at least one trial");
        chosen.push(cand);
        closest = next;
    }
    points.select_rows(&chosen)
}

/// Renumbers clusters in order of first appearance.
pub(crate) fn canonical<T: Scalar>(mut run: LloydRun<T>) -> LloydRun<T> {
    let k = run.centroids.rows();
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &a in &run.assignments {
        if map[a] == usize::MAX {
            map[a] = next;
            next += 1;
        }
    }
    for m in map.iter_mut().filter(|m| **m == usize::MAX) {
        *m = next;
        next += 1;
    }
    let mut order = vec![0; k];
    for (old, &new) in map.iter().enumerate() {
        order[new] = old;
    }
    run.centroids = run.centroids.select_rows(&order);
    run.assignments.iter_mut().for_each(|a| *a = map[*a]);
    run
}

pub(crate) fn validate_points<T: Scalar>(points: &Matrix<T>, k: usize) -> Result<()> {
    if k == 0 || k > points.rows() {
        return Err(Error::InvalidParameter(format!(
            "k must satisfy 1 <= k <= n (k = {k}, n = {})",
            points.rows()
        )));
    }
    if let Some(r) = points.first_non_finite_row() {
        return Err(Error::NonFinite(format!("point {r}")));
    }
    Ok(())
}

/// Best of `restarts` runs in working coordinates, plus optional extra
/// starting centroids that compete with the seeded restarts.
pub(crate) fn best_run<T: Scalar>(
    work: &Matrix<T>,
    k: usize,
    seed: u64,
    restarts: usize,
    extra: Option<Matrix<T>>,
) -> LloydRun<T> {
    let mut runs: Vec<LloydRun<T>> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            lloyd(
                work,
                seed_centroids(work, k, derive_indexed(seed, r as u64)),
            )
        })
        .collect();
    if let Some(init) = extra {
        runs.push(lloyd(work, init));
    }
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.inertia < runs[best].inertia {
            best = i;
        }
    }
    canonical(runs.swap_remove(best))
}

pub(crate) fn into_model<T: Scalar>(
    points: &Matrix<T>,
    run: LloydRun<T>,
    seed: u64,
) -> KMeansModel<T> {
    let k = run.centroids.rows();
    let (centroids, _) = means(points, &run.assignments, k);
    KMeansModel {
        k,
        centroids,
        assignments: run.assignments,
        inertia: run.inertia,
        iterations_run: run.iterations,
        seed,
        inertia_trace: run.trace,
    }
}

pub fn kmeans_fit<T: Scalar>(
    points: &Matrix<T>,
    k: usize,
    metric: &Metric<T>,
    seed: u64,
    restarts: usize,
) -> Result<KMeansModel<T>> {
    validate_points(points, k)?;
    let work = metric.embed_rows(points)?;
    let run = best_run(&work, k, seed, restarts, None);
    Ok(into_model(points, run, seed))
}

/// Per-restart models, for checking best-of-restarts behavior.
pub fn kmeans_restarts<T: Scalar>(
    points: &Matrix<T>,
    k: usize,
    metric: &Metric<T>,
    seed: u64,
    restarts: usize,
) -> Result<Vec<KMeansModel<T>>> {
    validate_points(points, k)?;
    let work = metric.embed_rows(points)?;
    Ok((0..restarts.max(1))
        .map(|r| {
            let run = lloyd(
                &work,
                seed_centroids(&work, k, derive_indexed(seed, r as u64)),
            );
            into_model(points, canonical(run), seed)
        })
        .collect())
}
