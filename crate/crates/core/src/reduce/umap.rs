use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_input, Embedding2D, ReducerParams};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::geometry::{knn_graph, linalg::symmetric_eigen, Metric};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::seed::{counter_u64, derive_seed, rng};

const DIMS: usize = 2;
const SMOOTH_TOLERANCE: f64 = 1e-5;
const MIN_SIGMA_SCALE: f64 = 1e-3;
const SPREAD: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UmapParams {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub epochs: usize,
    pub negative_sample_rate: usize,
    pub seed: u64,
}

impl Default for UmapParams {
    fn default() -> Self {
        Self {
            n_neighbors: 15,
            min_dist: 0.1,
            epochs: 200,
            negative_sample_rate: 5,
            seed: 0,
        }
    }
}

impl UmapParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.n_neighbors < 2 || self.n_neighbors >= n {
            return Err(Error::InvalidParameter(format!(
                "n_neighbors must satisfy 2 <= n_neighbors < n (got {} with n = {n})",
                self.n_neighbors
            )));
        }
        if !(0.0..1.0).contains(&self.min_dist) {
            return Err(Error::InvalidParameter(format!(
                "min_dist must lie in [0, 1), got {}",
                self.min_dist
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Symmetric fuzzy neighbor graph in compressed-row form.
#[derive(Clone, Debug)]
pub struct FuzzyGraph<T> {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub weights: Vec<T>,
    /// Distance to the nearest distinct neighbor of each point.
    pub rhos: Vec<T>,
    /// Calibrated bandwidth of each point.
    pub sigmas: Vec<T>,
}

impl<T: Scalar> FuzzyGraph<T> {
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.weights[r])
    }

    pub fn weight(&self, i: usize, j: usize) -> T {
        let (cols, w) = self.row(i);
        cols.binary_search(&j).map_or(T::zero(), |p| w[p])
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (cols, w) = self.row(i);
            cols.iter().zip(w).all(|(&j, &v)| self.weight(j, i) == v)
        })
    }
}

/// Builds the symmetrized fuzzy simplicial set over `n_neighbors - 1`
/// nearest neighbors of each point (the point itself counts as the first).
pub fn fuzzy_graph<T: Scalar>(
    data: &Matrix<T>,
    n_neighbors: usize,
    metric: &Metric<T>,
) -> Result<FuzzyGraph<T>> {
    let n = data.rows();
    let knn = knn_graph(data, n_neighbors - 1, metric)?;
    let target = T::lit((n_neighbors as f64).log2());
    let all_mean = {
        let total = (0..n).fold(T::zero(), |acc, i| {
            acc + knn.distances(i).iter().fold(T::zero(), |a, &d| a + d)
        });
        total / T::from_count(n * n_neighbors)
    };

    let calib: Vec<(T, T)> = (0..n)
        .into_par_iter()
        .map(|i| smooth_knn(knn.distances(i), target, n_neighbors, all_mean))
        .collect();

    let mut directed: Vec<(usize, usize, bool, T)> = Vec::with_capacity(n * (n_neighbors - 1));
    for (i, &(rho, sigma)) in calib.iter().enumerate() {
        for (&j, &d) in knn.neighbors(i).iter().zip(knn.distances(i)) {
            let excess = d - rho;
            let w = if excess <= T::zero() || sigma == T::zero() {
                T::one()
            } else {
                (-(excess / sigma)).exp()
            };
            let (lo, hi, forward) = if i < j { (i, j, true) } else { (j, i, false) };
            directed.push((lo, hi, forward, w));
        }
    }
    directed.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));

    let mut entries: Vec<(usize, usize, T)> = Vec::with_capacity(directed.len() * 2);
    let mut k = 0;
    while k < directed.len() {
        let (lo, hi, _, w0) = directed[k];
        let (mut a, mut b) = (T::zero(), T::zero());
        let mut take = |fwd: bool, w: T| if fwd { a = w } else { b = w };
        take(directed[k].2, w0);
        if k + 1 < directed.len() && directed[k + 1].0 == lo && directed[k + 1].1 == hi {
            take(directed[k + 1].2, directed[k + 1].3);
            k += 1;
        }
        k += 1;
        let w = a + b - a * b;
        if w > T::zero() {
            entries.push((lo, hi, w));
            entries.push((hi, lo, w));
        }
    }
    entries.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));

    let mut indptr = vec![0usize; n + 1];
    for &(r, _, _) in &entries {
        indptr[r + 1] += 1;
    }
    for i in 0..n {
        indptr[i + 1] += indptr[i];
    }
    Ok(FuzzyGraph {
        n,
        indptr,
        indices: entries.iter().map(|e| e.1).collect(),
        weights: entries.iter().map(|e| e.2).collect(),
        rhos: calib.iter().map(|c| c.0).collect(),
        sigmas: calib.iter().map(|c| c.1).collect(),
    })
}

/// Returns (rho, sigma) such that `sum_j exp(-max(0, d_j - rho) / sigma)`
/// matches `target` over the non-self neighbor distances.
fn smooth_knn<T: Scalar>(dists: &[T], target: T, n_neighbors: usize, all_mean: T) -> (T, T) {
    let rho = dists
        .iter()
        .copied()
        .find(|&d| d > T::zero())
        .unwrap_or(T::zero());
    let tol = T::lit(SMOOTH_TOLERANCE);
    let (mut lo, mut hi, mut mid) = (T::zero(), T::infinity(), T::one());
    for _ in 0..64 {
        let psum = dists.iter().fold(T::zero(), |acc, &d| {
            let e = d - rho;
            acc + if e > T::zero() {
                (-(e / mid)).exp()
            } else {
                T::one()
            }
        });
        if (psum - target).abs() < tol {
            break;
        }
        if psum > target {
            hi = mid;
            mid = (lo + hi) / T::lit(2.0);
        } else {
            lo = mid;
            mid = if hi.is_infinite() {
                mid * T::lit(2.0)
            } else {
                (lo + hi) / T::lit(2.0)
            };
        }
    }
    let floor = if rho > T::zero() {
        // mean over the neighborhood including the zero self-distance
        let s = dists.iter().fold(T::zero(), |a, &d| a + d);
        T::lit(MIN_SIGMA_SCALE) * s / T::from_count(n_neighbors)
    } else {
        T::lit(MIN_SIGMA_SCALE) * all_mean
    };
    (rho, if mid < floor { floor } else { mid })
}

/// Least-squares fit of `1 / (1 + a x^(2b))` to the target membership curve
/// (1 below `min_dist`, exponential decay beyond) on 300 points of [0, 3·spread].
pub fn fit_curve_ab(min_dist: f64, spread: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x < min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let r = 1.0 / (1.0 + a * x.powf(2.0 * b)) - y;
                r * r
            })
            .sum()
    };
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut cur = sse(a, b);
    for _ in 0..500 {
        // normal equations of the Gauss-Newton step
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            let u = if x > 0.0 { x.powf(2.0 * b) } else { 0.0 };
            let den = 1.0 + a * u;
            let r = 1.0 / den - y;
            let da = -u / (den * den);
            let db = if x > 0.0 {
                -a * u * 2.0 * x.ln() / (den * den)
            } else {
                0.0
            };
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let mut improved = false;
        for _ in 0..30 {
            let (m11, m22) = (jaa * (1.0 + lambda), jbb * (1.0 + lambda));
            let det = m11 * m22 - jab * jab;
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let step_a = -(m22 * ga - jab * gb) / det;
            let step_b = -(m11 * gb - jab * ga) / det;
            let (na, nb) = (a + step_a, b + step_b);
            let next = if na > 0.0 && nb > 0.0 {
                sse(na, nb)
            } else {
                f64::INFINITY
            };
            if next < cur {
                let rel = (cur - next) / cur.max(1e-300);
                a = na;
                b = nb;
                cur = next;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-15;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

pub fn umap_fit<T: Scalar>(
    m: &EmbeddingMatrix<T>,
    params: &UmapParams,
    metric: &Metric<T>,
) -> Result<Embedding2D<T>> {
    let start = Instant::now();
    let n = m.len();
    params.validate(n)?;
    check_input(m)?;
    let graph = fuzzy_graph(&m.vectors, params.n_neighbors, metric)?;
    let (a, b) = fit_curve_ab(params.min_dist, SPREAD);

    let init =
        spectral_init(&graph, derive_seed(params.seed, "umap-spectral")).unwrap_or_else(|e| {
            log::warn!("spectral initialization failed ({e}); using random initialization");
            random_init(n, derive_seed(params.seed, "umap-random-init"))
        });
    let mut coords = rescale_init(init, derive_seed(params.seed, "umap-jitter"));
    optimize_layout(&graph, &mut coords, a, b, params);

    let coords = Matrix::from_vec(n, DIMS, coords.into_iter().map(T::lit).collect())?;
    if let Some(r) = coords.first_non_finite_row() {
        return Err(Error::NonFinite(m.row_ids[r].clone()));
    }
    Ok(Embedding2D {
        coords,
        row_ids: m.row_ids.clone(),
        params: ReducerParams::Umap(params.clone()),
        wall_time: start.elapsed(),
        objective: Vec::new(),
    })
}

/// Leading non-trivial eigenvectors of the normalized adjacency by block
/// subspace iteration. Returns an n×2 row-major buffer.
fn spectral_init<T: Scalar>(g: &FuzzyGraph<T>, seed: u64) -> std::result::Result<Vec<f64>, String> {
    let n = g.n;
    let block = (DIMS + 6).min(n.saturating_sub(1));
    if block < DIMS {
        return Err(format!("too few points ({n})"));
    }
    let deg: Vec<f64> = (0..n)
        .map(|i| g.row(i).1.iter().map(|w| w.as_f64()).sum::<f64>())
        .collect();
    if deg.iter().any(|&d| !(d > 0.0)) {
        return Err("graph has an isolated vertex".into());
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let norm0 = deg.iter().sum::<f64>().sqrt();
    let trivial: Vec<f64> = deg.iter().map(|d| d.sqrt() / norm0).collect();

    // column-major block: q[c * n + i]
    let mut r = rng(seed);
    let mut q: Vec<f64> = (0..block * n)
        .map(|_| StandardNormal.sample(&mut r))
        .collect();
    orthonormalize(&mut q, n, block, &trivial)?;
    let apply = |q: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; q.len()];
        for c in 0..block {
            let col = &q[c * n..(c + 1) * n];
            let res: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let (cols, w) = g.row(i);
                    let s: f64 = cols
                        .iter()
                        .zip(w)
                        .map(|(&j, &wij)| wij.as_f64() * inv_sqrt[j] * col[j])
                        .sum();
                    0.5 * (col[i] + inv_sqrt[i] * s)
                })
                .collect();
            out[c * n..(c + 1) * n].copy_from_slice(&res);
        }
        out
    };
    let mut prev = vec![0.0; block];
    for it in 0..1000 {
        q = apply(&q);
        orthonormalize(&mut q, n, block, &trivial)?;
        if it % 10 == 9 {
            let (vals, _) = ritz(&q, &apply(&q), n, block);
            let delta = vals
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            prev = vals;
            if delta < 1e-10 {
                break;
            }
        }
    }
    let aq = apply(&q);
    let (_, vecs) = ritz(&q, &aq, n, block);
    let mut out = vec![0.0; n * DIMS];
    for d in 0..DIMS {
        for c in 0..block {
            let coef = vecs[(c, d)];
            for i in 0..n {
                out[i * DIMS + d] += coef * q[c * n + i];
            }
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err("non-finite eigenvector".into());
    }
    Ok(out)
}

fn ritz(q: &[f64], aq: &[f64], n: usize, block: usize) -> (Vec<f64>, Matrix<f64>) {
    let mut small = Matrix::zeros(block, block);
    for i in 0..block {
        for j in 0..=i {
            let v: f64 = (0..n).map(|k| q[i * n + k] * aq[j * n + k]).sum();
            let u: f64 = (0..n).map(|k| q[j * n + k] * aq[i * n + k]).sum();
            small[(i, j)] = 0.5 * (u + v);
            small[(j, i)] = small[(i, j)];
        }
    }
    symmetric_eigen(&small)
}

/// Modified Gram-Schmidt on the columns, after projecting out `trivial`.
fn orthonormalize(
    q: &mut [f64],
    n: usize,
    block: usize,
    trivial: &[f64],
) -> std::result::Result<(), String> {
    for c in 0..block {
        let (done, rest) = q.split_at_mut(c * n);
        let col = &mut rest[..n];
        for _ in 0..2 {
            let p: f64 = col.iter().zip(trivial).map(|(a, b)| a * b).sum();
            col.iter_mut().zip(trivial).for_each(|(a, b)| *a -= p * b);
            for prev in done.chunks(n) {
                let p: f64 = col.iter().zip(prev).map(|(a, b)| a * b).sum();
                col.iter_mut().zip(prev).for_each(|(a, b)| *a -= p * b);
            }
        }
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 1e-12) {
            return Err("subspace collapsed".into());
        }
        col.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(())
}

fn random_init(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n * DIMS).map(|_| r.random_range(-10.0..10.0)).collect()
}

/// Scales to max |x| = 10, adds N(0, 1e-4) jitter, then maps each axis onto [0, 10].
fn rescale_init(mut x: Vec<f64>, seed: u64) -> Vec<f64> {
    let max_abs = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let expansion = if max_abs > 0.0 { 10.0 / max_abs } else { 1.0 };
    let noise = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut r = rng(seed);
    for v in x.iter_mut() {
        *v = *v * expansion + noise.sample(&mut r);
    }
    for d in 0..DIMS {
        let (lo, hi) = x
            .iter()
            .skip(d)
            .step_by(DIMS)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let span = hi - lo;
        for v in x.iter_mut().skip(d).step_by(DIMS) {
            *v = if span > 0.0 {
                10.0 * (*v - lo) / span
            } else {
                5.0
            };
        }
    }
    x
}

#[inline]
fn clip(v: f64) -> f64 {
    v.clamp(-4.0, 4.0)
}

/// Per-edge stochastic optimization with negative sampling. Runs on a
/// single thread so the result is independent of the worker count.
fn optimize_layout<T: Scalar>(g: &FuzzyGraph<T>, y: &mut [f64], a: f64, b: f64, p: &UmapParams) {
    let n = g.n;
    let epochs = p.epochs;
    let max_w = g.weights.iter().fold(0.0f64, |m, w| m.max(w.as_f64()));
    let cutoff = max_w / epochs as f64;
    let mut heads = Vec::new();
    let mut tails = Vec::new();
    let mut eps = Vec::new();
    for i in 0..n {
        let (cols, w) = g.row(i);
        for (&j, &wij) in cols.iter().zip(w) {
            let wij = wij.as_f64();
            if wij >= cutoff && wij > 0.0 {
                heads.push(i);
                tails.push(j);
                eps.push(max_w / wij);
            }
        }
    }
    let nsr = p.negative_sample_rate as f64;
    let eps_neg: Vec<f64> = eps.iter().map(|e| e / nsr).collect();
    let mut next_sample = eps.clone();
    let mut next_neg = eps_neg.clone();

    for epoch in 0..epochs {
        let ep = epoch as f64;
        let alpha = 1.0 - ep / epochs as f64;
        for e in 0..heads.len() {
            if next_sample[e] > ep {
                continue;
            }
            let (j, k) = (heads[e], tails[e]);
            let (dx, dy) = (y[j * 2] - y[k * 2], y[j * 2 + 1] - y[k * 2 + 1]);
            let d2 = dx * dx + dy * dy;
            let coeff = if d2 > 0.0 {
                -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0)
            } else {
                0.0
            };
            let gx = clip(coeff * dx) * alpha;
            let gy = clip(coeff * dy) * alpha;
            y[j * 2] += gx;
            y[j * 2 + 1] += gy;
            y[k * 2] -= gx;
            y[k * 2 + 1] -= gy;
            next_sample[e] += eps[e];

            let n_neg = ((ep - next_neg[e]) / eps_neg[e]).max(0.0) as usize;
            for draw in 0..n_neg {
                let k =
                    (counter_u64(p.seed, epoch as u64, e as u64, draw as u64) % n as u64) as usize;
                if k == j {
                    continue;
                }
                let (dx, dy) = (y[j * 2] - y[k * 2], y[j * 2 + 1] - y[k * 2 + 1]);
                let d2 = dx * dx + dy * dy;
                if d2 > 0.0 {
                    let coeff = 2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0));
                    y[j * 2] += clip(coeff * dx) * alpha;
                    y[j * 2 + 1] += clip(coeff * dy) * alpha;
                }
            }
            next_neg[e] += n_neg as f64 * eps_neg[e];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_constants_for_default_min_dist() {
        // reference least-squares solution for min_dist 0.1, spread 1
        let (a, b) = fit_curve_ab(0.1, 1.0);
        assert!((a - 1.576_943_46).abs() < 1e-4, "a = {a}");
        assert!((b - 0.895_060_88).abs() < 1e-4, "b = {b}");
    }

    #[test]
    fn params_validate() {
        let p = UmapParams::default();
        assert!(p.validate(16).is_ok());
        assert!(p.validate(15).is_err());
        assert!(UmapParams {
            min_dist: 1.0,
            ..p.clone()
        }
        .validate(100)
        .is_err());
        assert!(UmapParams { epochs: 0, ..p }.validate(100).is_err());
    }

    #[test]
    fn smooth_knn_hits_target() {
        let d = [0.5f64, 0.7, 0.9, 1.4];
        let target = (5f64).log2();
        let (rho, sigma) = smooth_knn(&d, target, 5, 1.0);
        assert_eq!(rho, 0.5);
        let s: f64 = d
            .iter()
            .map(|x| (-((x - rho).max(0.0)) / sigma).exp())
            .sum();
        assert!((s - target).abs() < 1e-5);
    }

    #[test]
    fn rescaled_init_spans_box() {
        let x = rescale_init(vec![-1.0, 3.0, 0.5, -2.0, 2.0, 1.0], 1);
        for d in 0..2 {
            let v: Vec<f64> = x.iter().skip(d).step_by(2).copied().collect();
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(lo.abs() < 1e-12 && (hi - 10.0).abs() < 1e-12);
        }
    }
}
