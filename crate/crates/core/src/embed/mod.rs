//! Embedding matrices aligned row-for-row with a prompt list.

mod client;
mod vecfile;

pub use client::{fetch_embeddings, EmbedRequest, EmbedResponse, EmbeddingClientConfig};
pub use vecfile::{read_vector_file, write_vector_file, VectorEncoding, VECTOR_FILE_MAGIC};

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix<T> {
    pub model_id: String,
    pub vectors: Matrix<T>,
    pub row_ids: Vec<String>,
    pub normalized: bool,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn new(
        model_id: impl Into<String>,
        row_ids: Vec<String>,
        vectors: Matrix<T>,
    ) -> Result<Self> {
        if row_ids.len() != vectors.rows() {
            return Err(Error::Shape(format!(
                "{} row ids for {} vectors",
                row_ids.len(),
                vectors.rows()
            )));
        }
        if let Some(r) = vectors.first_non_finite_row() {
            return Err(Error::NonFinite(row_ids[r].clone()));
        }
        Ok(Self {
            model_id: model_id.into(),
            vectors,
            row_ids,
            normalized: false,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    /// Reorders rows to follow `ids`. Ids absent from the matrix are always
    /// rejected; surplus rows are dropped only when `allow_extra` is set.
    pub fn align_to(&self, ids: &[String], allow_extra: bool) -> Result<Self> {
        let mut pos: HashMap<&str, usize> = HashMap::with_capacity(self.row_ids.len());
        for (i, id) in self.row_ids.iter().enumerate() {
            if pos.insert(id.as_str(), i).is_some() {
                return Err(Error::IdMismatch(format!("duplicate vector id {id:?}")));
            }
        }
        let missing: Vec<&str> = ids
            .iter()
            .filter(|id| !pos.contains_key(id.as_str()))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            return Err(Error::IdMismatch(format!(
                "{} id(s) without a vector, first: {}",
                missing.len(),
                first_ten(&missing)
            )));
        }
        if !allow_extra {
            let wanted: std::collections::HashSet<&str> = ids.iter().map(String::as_str).collect();
            let extra: Vec<&str> = self
                .row_ids
                .iter()
                .filter(|id| !wanted.contains(id.as_str()))
                .map(String::as_str)
                .collect();
            if !extra.is_empty() {
                return Err(Error::IdMismatch(format!(
                    "{} vector(s) for unknown ids, first: {}",
                    extra.len(),
                    first_ten(&extra)
                )));
            }
        }
        let order: Vec<usize> = ids.iter().map(|id| pos[id.as_str()]).collect();
        Ok(Self {
            model_id: self.model_id.clone(),
            vectors: self.vectors.select_rows(&order),
            row_ids: ids.to_vec(),
            normalized: self.normalized,
        })
    }
}

fn first_ten(ids: &[&str]) -> String {
    ids.iter()
        .take(10)
        .map(|s| format!("{s:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Loads a vector file and orders its rows to match `expected_ids` exactly.
pub fn import_embeddings<T: Scalar>(
    path: &Path,
    expected_ids: &[String],
) -> Result<EmbeddingMatrix<T>> {
    read_vector_file(path)?.align_to(expected_ids, false)
}

/// Scales every row to unit L2 norm.
pub fn l2_normalize<T: Scalar>(mut m: EmbeddingMatrix<T>) -> Result<EmbeddingMatrix<T>> {
    for i in 0..m.len() {
        let row = m.vectors.row_mut(i);
        let norm = row.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt();
        if !(norm > T::zero()) {
            return Err(Error::ZeroNorm(m.row_ids[i].clone()));
        }
        for v in row.iter_mut() {
            *v /= norm;
        }
    }
    m.normalized = true;
    Ok(m)
}
