use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ElbowCurve {
    pub ks: Vec<usize>,
    pub inertias: Vec<f64>,
    /// Slope of the inertia curve between each k and its predecessor,
    /// aligned with `ks[1..]`.
    pub deltas: Vec<f64>,
    pub mean_delta: f64,
    pub k_opt: usize,
}

/// Picks the k whose inertia slope is closest to the mean slope. Exact ties
/// (within a relative 1e-12 of the largest slope) go to the smaller k.
pub fn elbow_select(ks: &[usize], inertias: &[f64]) -> Result<ElbowCurve> {
    if ks.len() != inertias.len() {
        return Err(Error::Shape(format!(
            "{} ks for {} inertias",
            ks.len(),
            inertias.len()
        )));
    }
    if ks.len() < 3 {
        return Err(Error::InvalidParameter(
            "elbow selection needs at least 3 k values".into(),
        ));
    }
    if ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "k values must be strictly ascending".into(),
        ));
    }
    let deltas: Vec<f64> = ks
        .windows(2)
        .zip(inertias.windows(2))
        .map(|(k, w)| (w[1] - w[0]) / (k[1] - k[0]) as f64)
        .collect();
    let mean_delta = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let scale = deltas.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let tol = 1e-12 * scale;
    let mut best = 0;
    for (i, d) in deltas.iter().enumerate() {
        if (d - mean_delta).abs() < (deltas[best] - mean_delta).abs() - tol {
            best = i;
        }
    }
    Ok(ElbowCurve {
        ks: ks.to_vec(),
        inertias: inertias.to_vec(),
        deltas,
        mean_delta,
        k_opt: ks[best + 1],
    })
}
