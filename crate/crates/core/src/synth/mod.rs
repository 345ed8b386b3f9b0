//! Synthetic data with known structure, used by tests and the bundled
//! mini-corpus.

mod mini;

pub use mini::{
    mini_corpus, write_mini_corpus, MiniCorpus, MINI_CORPORA, MINI_DIM, MINI_MODELS,
    MINI_PER_CORPUS, MINI_SEED, MINI_TOPICS,
};

use rand_distr::{Distribution, StandardNormal};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::seed::rng;

/// Isotropic Gaussian blobs with unit standard deviation.
#[derive(Clone, Debug)]
pub struct Blobs<T> {
    pub embedding: EmbeddingMatrix<T>,
    pub labels: Vec<usize>,
}

/// `k` blobs of `per_blob` points in `dim` dimensions. Centers sit on
/// orthogonal axes so every pair of centers is exactly `separation` apart
/// (in units of the per-coordinate standard deviation). Points are emitted
/// blob by blob.
pub fn gaussian_blobs<T: Scalar>(
    k: usize,
    per_blob: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Blobs<T>> {
    if k > dim {
        return Err(Error::InvalidParameter(format!(
            "{k} orthogonal blob centers need dim >= {k}, got {dim}"
        )));
    }
    let offset = separation / std::f64::consts::SQRT_2;
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(k * per_blob * dim);
    let mut labels = Vec::with_capacity(k * per_blob);
    let mut ids = Vec::with_capacity(k * per_blob);
    for c in 0..k {
        for p in 0..per_blob {
            for d in 0..dim {
                let z: f64 = StandardNormal.sample(&mut r);
                data.push(T::lit(z + if d == c { offset } else { 0.0 }));
            }
            labels.push(c);
            ids.push(format!("b{c}-{p}"));
        }
    }
    let vectors = Matrix::from_vec(k * per_blob, dim, data)?;
    Ok(Blobs {
        embedding: EmbeddingMatrix::new("synthetic-blobs", ids, vectors)?,
        labels,
    })
}
