use std::time::Instant;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_input, Embedding2D, ReducerParams};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::geometry::{knn_graph, Metric};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::seed::{derive_seed, rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneParams {
    pub perplexity: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub early_exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            learning_rate: 100.0,
            iterations: 1000,
            early_exaggeration: 12.0,
            early_exaggeration_iters: 250,
            seed: 0,
        }
    }
}

impl TsneParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.perplexity > 0.0) || 3.0 * self.perplexity >= n as f64 {
            return Err(Error::InfeasiblePerplexity {
                perplexity: self.perplexity,
                n,
            });
        }
        if !(self.learning_rate > 0.0) || !(self.early_exaggeration >= 1.0) {
            return Err(Error::InvalidParameter(
                "learning_rate must be positive and early_exaggeration at least 1".into(),
            ));
        }
        if self.iterations == 0 || self.early_exaggeration_iters > self.iterations {
            return Err(Error::InvalidParameter(
                "iterations must be positive and cover the exaggeration phase".into(),
            ));
        }
        if !(5.0..=50.0).contains(&self.perplexity) {
            log::warn!(
                "perplexity {} lies outside the usual 5-50 range",
                self.perplexity
            );
        }
        Ok(())
    }
}

/// Per-row conditional affinities over each point's nearest neighbors.
#[derive(Clone, Debug)]
pub struct CalibratedAffinities<T> {
    pub neighbors: Vec<Vec<usize>>,
    /// Squared distances to `neighbors`, same order.
    pub sq_distances: Vec<Vec<T>>,
    /// Precision (1 / 2σ²) of each row's Gaussian kernel.
    pub betas: Vec<T>,
    /// Conditional probabilities p(j | i), each row summing to one.
    pub conditional: Vec<Vec<T>>,
}

/// Finds per-row kernel precisions so that each conditional distribution
/// has the requested perplexity (2 to the power of its entropy in bits).
pub fn calibrate_affinities<T: Scalar>(
    data: &Matrix<T>,
    perplexity: f64,
    metric: &Metric<T>,
) -> Result<CalibratedAffinities<T>> {
    let n = data.rows();
    if !(perplexity > 0.0) || 3.0 * perplexity >= n as f64 {
        return Err(Error::InfeasiblePerplexity { perplexity, n });
    }
    let k = ((3.0 * perplexity).floor() as usize + 1).min(n - 1);
    let knn = knn_graph(data, k, metric)?;
    let target = perplexity.ln();
    let rows: Vec<(Vec<T>, T, Vec<T>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let sq: Vec<T> = knn.distances(i).iter().map(|&d| d * d).collect();
            let (beta, p) = binary_search_beta(&sq, target);
            (sq, beta, p)
        })
        .collect();
    let mut out = CalibratedAffinities {
        neighbors: (0..n).map(|i| knn.neighbors(i).to_vec()).collect(),
        sq_distances: Vec::with_capacity(n),
        betas: Vec::with_capacity(n),
        conditional: Vec::with_capacity(n),
    };
    for (sq, beta, p) in rows {
        out.sq_distances.push(sq);
        out.betas.push(beta);
        out.conditional.push(p);
    }
    Ok(out)
}

/// Bisection on beta for entropy (in nats) equal to `target`. Distances are
/// shifted by their minimum, which leaves the normalized kernel unchanged.
fn binary_search_beta<T: Scalar>(sq: &[T], target: f64) -> (T, Vec<T>) {
    let sq: Vec<f64> = sq.iter().map(|v| v.as_f64()).collect();
    let dmin = sq.iter().cloned().fold(f64::INFINITY, f64::min);
    let eval = |beta: f64| -> (f64, Vec<f64>) {
        let w: Vec<f64> = sq.iter().map(|&d| (-(d - dmin) * beta).exp()).collect();
        let sum: f64 = w.iter().sum();
        let mean_d: f64 = w.iter().zip(&sq).map(|(p, d)| p * (d - dmin)).sum::<f64>() / sum;
        (
            sum.ln() + beta * mean_d,
            w.into_iter().map(|p| p / sum).collect(),
        )
    };
    let (mut lo, mut hi, mut beta) = (0.0f64, f64::INFINITY, 1.0f64);
    let mut best = eval(beta);
    for _ in 0..200 {
        let h = best.0;
        if (h - target).abs() < 1e-10 {
            break;
        }
        if h > target {
            lo = beta;
            beta = if hi.is_infinite() {
                beta * 2.0
            } else {
                0.5 * (lo + hi)
            };
        } else {
            hi = beta;
            beta = 0.5 * (lo + hi);
        }
        best = eval(beta);
    }
    (T::lit(beta), best.1.into_iter().map(T::lit).collect())
}

/// Sparse symmetric joint distribution P.
struct Joint {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

fn symmetrize<T: Scalar>(c: &CalibratedAffinities<T>) -> Joint {
    let n = c.neighbors.len();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..n {
        for (&j, p) in c.neighbors[i].iter().zip(&c.conditional[i]) {
            let p = p.as_f64();
            entries.push((i, j, p));
            entries.push((j, i, p));
        }
    }
    entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let scale = 1.0 / (2.0 * n as f64);
    let mut indptr = vec![0usize; n + 1];
    let mut indices = Vec::new();
    let mut values = Vec::new();
    let mut k = 0;
    while k < entries.len() {
        let (i, j, mut v) = entries[k];
        k += 1;
        while k < entries.len() && entries[k].0 == i && entries[k].1 == j {
            v += entries[k].2;
            k += 1;
        }
        indptr[i + 1] += 1;
        indices.push(j);
        values.push(v * scale);
    }
    for i in 0..n {
        indptr[i + 1] += indptr[i];
    }
    Joint {
        indptr,
        indices,
        values,
    }
}

/// Sum of the Student-t kernel over ordered pairs, and per-row repulsive
/// terms. Row work runs in parallel; the total is accumulated in row order.
fn repulsion(y: &[f64], n: usize) -> (f64, Vec<[f64; 2]>) {
    let rows: Vec<(f64, [f64; 2])> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (xi, yi) = (y[2 * i], y[2 * i + 1]);
            let mut z = 0.0;
            let mut f = [0.0, 0.0];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let (dx, dy) = (xi - y[2 * j], yi - y[2 * j + 1]);
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                z += q;
                f[0] += q * q * dx;
                f[1] += q * q * dy;
            }
            (z, f)
        })
        .collect();
    let z = rows.iter().map(|r| r.0).sum();
    (z, rows.into_iter().map(|r| r.1).collect())
}

fn kl_of(p: &Joint, y: &[f64], z: f64) -> f64 {
    let n = p.indptr.len() - 1;
    let mut kl = 0.0;
    for i in 0..n {
        for e in p.indptr[i]..p.indptr[i + 1] {
            let j = p.indices[e];
            let pij = p.values[e];
            if pij > 0.0 {
                let (dx, dy) = (y[2 * i] - y[2 * j], y[2 * i + 1] - y[2 * j + 1]);
                let q = (1.0 / (1.0 + dx * dx + dy * dy)) / z;
                kl += pij * (pij / q.max(f64::MIN_POSITIVE)).ln();
            }
        }
    }
    kl
}

/// KL(P‖Q) for the calibrated affinities and a 2D layout.
pub fn kl_divergence<T: Scalar>(c: &CalibratedAffinities<T>, coords: &Matrix<T>) -> f64 {
    let p = symmetrize(c);
    let y: Vec<f64> = coords.as_slice().iter().map(|v| v.as_f64()).collect();
    let (z, _) = repulsion(&y, coords.rows());
    kl_of(&p, &y, z)
}

pub fn tsne_fit<T: Scalar>(
    m: &EmbeddingMatrix<T>,
    params: &TsneParams,
    metric: &Metric<T>,
) -> Result<Embedding2D<T>> {
    let start = Instant::now();
    let n = m.len();
    params.validate(n)?;
    check_input(m)?;
    let calib = calibrate_affinities(&m.vectors, params.perplexity, metric)?;
    let p = symmetrize(&calib);

    let mut r = rng(derive_seed(params.seed, "tsne-init"));
    let init = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<f64> = (0..2 * n).map(|_| init.sample(&mut r)).collect();
    let mut update = vec![0.0; 2 * n];
    let mut gains = vec![1.0; 2 * n];
    let mut objective = Vec::new();

    for it in 0..params.iterations {
        let exaggerating = it < params.early_exaggeration_iters;
        let exag = if exaggerating {
            params.early_exaggeration
        } else {
            1.0
        };
        let momentum = if exaggerating { 0.5 } else { 0.8 };
        let (z, rep) = repulsion(&y, n);
        if it == 0 || it == params.early_exaggeration_iters {
            objective.push((it, kl_of(&p, &y, z)));
        }
        let mut grad = vec![0.0; 2 * n];
        for i in 0..n {
            let mut att = [0.0, 0.0];
            for e in p.indptr[i]..p.indptr[i + 1] {
                let j = p.indices[e];
                let (dx, dy) = (y[2 * i] - y[2 * j], y[2 * i + 1] - y[2 * j + 1]);
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                att[0] += p.values[e] * q * dx;
                att[1] += p.values[e] * q * dy;
            }
            grad[2 * i] = 4.0 * (exag * att[0] - rep[i][0] / z);
            grad[2 * i + 1] = 4.0 * (exag * att[1] - rep[i][1] / z);
        }
        for d in 0..2 * n {
            gains[d] = if update[d] * grad[d] < 0.0 {
                gains[d] + 0.2
            } else {
                (gains[d] * 0.8f64).max(0.01)
            };
            update[d] = momentum * update[d] - params.learning_rate * gains[d] * grad[d];
            y[d] += update[d];
        }
        for d in 0..2 {
            let mean = y.iter().skip(d).step_by(2).sum::<f64>() / n as f64;
            y.iter_mut().skip(d).step_by(2).for_each(|v| *v -= mean);
        }
    }
    let (z, _) = repulsion(&y, n);
    objective.push((params.iterations, kl_of(&p, &y, z)));

    let coords = Matrix::from_vec(n, 2, y.into_iter().map(T::lit).collect())?;
    if let Some(r) = coords.first_non_finite_row() {
        return Err(Error::NonFinite(m.row_ids[r].clone()));
    }
    Ok(Embedding2D {
        coords,
        row_ids: m.row_ids.clone(),
        params: ReducerParams::Tsne(params.clone()),
        wall_time: start.elapsed(),
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_search_hits_entropy() {
        let sq = [0.1f64, 0.4, 0.5, 0.9, 1.3, 2.0, 2.2, 3.1, 4.0, 5.5];
        let (beta, p) = binary_search_beta(&sq, 4f64.ln());
        let h: f64 = -p.iter().map(|q| q * q.ln()).sum::<f64>();
        assert!((h.exp() - 4.0).abs() < 1e-6);
        assert!(beta > 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_perplexity() {
        let p = TsneParams::default();
        assert!(matches!(
            p.validate(10),
            Err(Error::InfeasiblePerplexity { n: 10, .. })
        ));
        assert!(p.validate(91).is_ok());
        assert!(p.validate(90).is_err());
    }
}
