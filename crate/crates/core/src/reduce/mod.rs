//! Two-dimensional projections of embedding matrices.

mod trust;
mod tsne;
mod umap;

pub use trust::trustworthiness;
pub use tsne::{calibrate_affinities, kl_divergence, tsne_fit, CalibratedAffinities, TsneParams};
pub use umap::{fit_curve_ab, fuzzy_graph, umap_fit, FuzzyGraph, UmapParams};

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::geometry::Metric;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReducerParams {
    Umap(UmapParams),
    Tsne(TsneParams),
}

impl ReducerParams {
    pub fn seed(&self) -> u64 {
        match self {
            ReducerParams::Umap(p) => p.seed,
            ReducerParams::Tsne(p) => p.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ReducerParams::Umap(p) => p.seed = seed,
            ReducerParams::Tsne(p) => p.seed = seed,
        }
        out
    }

    /// Short identifier such as `umap-nn15` or `tsne-p30`.
    pub fn tag(&self) -> String {
        match self {
            ReducerParams::Umap(p) => format!("umap-nn{}", p.n_neighbors),
            ReducerParams::Tsne(p) => format!("tsne-p{}", p.perplexity),
        }
    }

    pub fn fit<T: Scalar>(
        &self,
        m: &EmbeddingMatrix<T>,
        metric: &Metric<T>,
    ) -> Result<Embedding2D<T>> {
        match self {
            ReducerParams::Umap(p) => umap_fit(m, p, metric),
            ReducerParams::Tsne(p) => tsne_fit(m, p, metric),
        }
    }
}

impl fmt::Display for ReducerParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// Output of a reducer. `objective` holds (iteration, value) checkpoints for
/// reducers that track one (t-SNE records KL divergence).
#[derive(Clone, Debug)]
pub struct Embedding2D<T> {
    pub coords: Matrix<T>,
    pub row_ids: Vec<String>,
    pub params: ReducerParams,
    pub wall_time: Duration,
    pub objective: Vec<(usize, f64)>,
}

impl<T: Scalar> Embedding2D<T> {
    pub fn len(&self) -> usize {
        self.coords.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::InvalidParameter(e.to_string());
        out.write_record(["id", "x", "y"]).map_err(csv_err)?;
        for (id, row) in self.row_ids.iter().zip(self.coords.iter_rows()) {
            out.write_record([id.as_str(), &row[0].to_string(), &row[1].to_string()])
                .map_err(csv_err)?;
        }
        out.flush()
            .map_err(|e| Error::InvalidParameter(e.to_string()))
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

pub(crate) fn check_input<T: Scalar>(m: &EmbeddingMatrix<T>) -> Result<()> {
    if let Some(r) = m.vectors.first_non_finite_row() {
        return Err(Error::NonFinite(m.row_ids[r].clone()));
    }
    Ok(())
}
