//! k-means on reduced coordinates, silhouette scoring with bootstrap
//! intervals, and choice of k.

mod bootstrap;
mod elbow;
mod kmeans;
mod select;
mod silhouette;

pub use bootstrap::{bootstrap_silhouette, MAX_REDRAWS, MIN_RESAMPLES};
pub use elbow::{elbow_select, ElbowCurve};
pub use kmeans::{kmeans_fit, kmeans_restarts, KMeansModel, MAX_ITERATIONS};
pub use select::{select_k, KDiagnostics, KSelectOptions, KSelection};
pub use silhouette::{silhouette, SilhouetteReport};
