//! Compares how prompt corpora cover semantic space: power-based sampling,
//! embedding import, dimensionality reduction, clustering with bootstrap
//! confidence, configuration search, cluster labeling and reporting.

pub mod cluster;
pub mod corpus;
pub mod embed;
mod error;
pub mod geometry;
pub mod label;
mod matrix;
pub mod optimize;
pub mod reduce;
pub mod report;
mod scalar;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type EmbeddingMatrix64 = embed::EmbeddingMatrix<f64>;
pub type EmbeddingMatrix32 = embed::EmbeddingMatrix<f32>;
pub type Embedding2D64 = reduce::Embedding2D<f64>;
pub type Embedding2D32 = reduce::Embedding2D<f32>;
pub type KMeansModel64 = cluster::KMeansModel<f64>;
pub type KMeansModel32 = cluster::KMeansModel<f32>;
pub type TrialResult64 = optimize::TrialResult<f64>;
pub type GridReport64 = optimize::GridReport<f64>;
pub type RunReport64 = report::RunReport<f64>;
pub type RunReport32 = report::RunReport<f32>;
