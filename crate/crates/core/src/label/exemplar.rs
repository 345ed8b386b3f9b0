use serde::{Deserialize, Serialize};

use crate::cluster::KMeansModel;
use crate::error::{Error, Result};
use crate::geometry::Metric;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExemplarRule {
    /// Points closest to their centroid.
    #[default]
    NearestCentroid,
    /// Points farthest from their centroid.
    Boundary,
}

impl ExemplarRule {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NearestCentroid => "nearest_centroid",
            Self::Boundary => "boundary",
        }
    }
}

impl std::str::FromStr for ExemplarRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "nearest_centroid" | "nearest" => Ok(Self::NearestCentroid),
            "boundary" => Ok(Self::Boundary),
            other => Err(Error::InvalidParameter(format!(
                "unknown exemplar rule {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExemplarSet {
    pub cluster_id: usize,
    pub exemplar_ids: Vec<String>,
    pub rows: Vec<usize>,
    pub rule: ExemplarRule,
    pub distances: Vec<f64>,
}

/// Picks `per_cluster` representative rows from each cluster by distance to
/// the cluster centroid under `metric`. Ties go to the lower row index.
pub fn extract_exemplars<T: Scalar>(
    model: &KMeansModel<T>,
    coords: &Matrix<T>,
    row_ids: &[String],
    per_cluster: usize,
    rule: ExemplarRule,
    metric: &Metric<T>,
) -> Result<Vec<ExemplarSet>> {
    if coords.rows() != model.assignments.len() || row_ids.len() != coords.rows() {
        return Err(Error::Shape(format!(
            "{} coordinates, {} assignments, {} ids",
            coords.rows(),
            model.assignments.len(),
            row_ids.len()
        )));
    }
    let mut members: Vec<Vec<(f64, usize)>> = vec![Vec::new(); model.k];
    for (i, &c) in model.assignments.iter().enumerate() {
        let d = metric
            .distance(coords.row(i), model.centroids.row(c))?
            .as_f64();
        members[c].push((d, i));
    }
    Ok(members
        .into_iter()
        .enumerate()
        .map(|(cluster_id, mut m)| {
            m.sort_by(|a, b| {
                let by_dist = a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal);
                match rule {
                    ExemplarRule::NearestCentroid => by_dist,
                    ExemplarRule::Boundary => by_dist.reverse(),
                }
                .then(a.1.cmp(&b.1))
            });
            m.truncate(per_cluster);
            ExemplarSet {
                cluster_id,
                exemplar_ids: m.iter().map(|p| row_ids[p.1].clone()).collect(),
                rows: m.iter().map(|p| p.1).collect(),
                rule,
                distances: m.iter().map(|p| p.0).collect(),
            }
        })
        .collect())
}
