use serde::{Deserialize, Serialize};

use crate::corpus::quantile_sorted;
use crate::error::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 512;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// Silverman's rule of thumb.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KdeCurve {
    /// Corpus id, or `pooled`.
    pub name: String,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub bandwidth_rule: String,
}

impl KdeCurve {
    /// Trapezoidal integral of the density over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
            .sum()
    }
}

/// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, using `sd` alone when the IQR is 0.
pub fn silverman_bandwidth(data: &[f64]) -> Result<f64> {
    if data.len() < 2 {
        return Err(Error::Degenerate(
            "automatic bandwidth needs at least 2 points; set a bandwidth explicitly".into(),
        ));
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let sd = (data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::Degenerate(
            "all values are equal; set a bandwidth explicitly".into(),
        ));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * n.powf(-0.2))
}

/// Gaussian kernel density of `data` with bandwidth `h` at `x`.
pub fn kde_at(data: &[f64], h: f64, x: f64) -> f64 {
    let norm = 1.0 / (data.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    norm * data
        .iter()
        .map(|&d| {
            let u = (x - d) / h;
            (-0.5 * u * u).exp()
        })
        .sum::<f64>()
}

/// Density of prompt lengths on an even grid spanning the data range
/// extended by 3 bandwidths, clipped at 0.
///
/// When the grid is clipped, kernel mass falling below 0 is reflected back
/// onto the positive axis, so the curve still integrates to 1.
pub fn kde(
    name: &str,
    lengths: &[f64],
    bandwidth: Bandwidth,
    grid_size: usize,
) -> Result<KdeCurve> {
    if lengths.is_empty() {
        return Err(Error::InvalidParameter(
            "no lengths to estimate a density from".into(),
        ));
    }
    if grid_size < 2 {
        return Err(Error::InvalidParameter(
            "grid needs at least 2 points".into(),
        ));
    }
    if let Some(bad) = lengths.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("length {bad}")));
    }
    let (h, rule) = match bandwidth {
        Bandwidth::Auto => (silverman_bandwidth(lengths)?, "silverman"),
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => (h, "fixed"),
        Bandwidth::Fixed(h) => {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {h}"
            )))
        }
    };
    let lo = lengths.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lengths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = (lo - 3.0 * h).max(0.0);
    let end = hi + 3.0 * h;
    let step = (end - start) / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| start + step * i as f64).collect();
    let reflect = lo >= 0.0 && lo - 3.0 * h < 0.0;
    let density = grid
        .iter()
        .map(|&x| {
            let d = kde_at(lengths, h, x);
            if reflect {
                d + kde_at(lengths, h, -x)
            } else {
                d
            }
        })
        .collect();
    Ok(KdeCurve {
        name: name.to_string(),
        grid,
        density,
        bandwidth: h,
        bandwidth_rule: rule.to_string(),
    })
}
