use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Tails {
    One,
    #[default]
    Two,
}

/// Inputs to Cohen's per-group sample size formula.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerParams {
    /// Standardized effect size `d`.
    pub effect_size: f64,
    /// Significance level.
    pub alpha: f64,
    /// Statistical power, `1 - beta`.
    pub power: f64,
    pub tails: Tails,
}

impl PowerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.effect_size.is_finite() && self.effect_size > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "effect size must be positive, got {}",
                self.effect_size
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.power > 0.0 && self.power < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "power must lie in (0, 1), got {}",
                self.power
            )));
        }
        if self.alpha + (1.0 - self.power) >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha + (1 - power) must be < 1, got {}",
                self.alpha + 1.0 - self.power
            )));
        }
        Ok(())
    }

    /// Upper-tail standard normal quantile for the significance level.
    pub fn z_alpha(&self) -> f64 {
        let tail = match self.tails {
            Tails::One => self.alpha,
            Tails::Two => self.alpha / 2.0,
        };
        upper_quantile(tail)
    }

    /// Upper-tail standard normal quantile at `1 - power`.
    pub fn z_beta(&self) -> f64 {
        upper_quantile(1.0 - self.power)
    }

    /// `2 (z_alpha + z_beta)^2 / d^2` before rounding up.
    pub fn raw_sample_size(&self) -> f64 {
        let z = self.z_alpha() + self.z_beta();
        2.0 * z * z / (self.effect_size * self.effect_size)
    }
}

fn upper_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - p)
}

/// Rounds up, treating values within 1e-9 (relative) of an integer as that
/// integer so products like `1635 * 1.2` do not spill over.
pub(crate) fn ceil_tolerant(x: f64) -> usize {
    let r = x.round();
    let v = if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    };
    v.max(0.0) as usize
}

/// Minimum observations per cluster: `ceil(2 (z_alpha + z_beta)^2 / d^2)`.
pub fn required_sample_size(params: &PowerParams) -> Result<usize> {
    params.validate()?;
    Ok(ceil_tolerant(params.raw_sample_size()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub n_per_cluster: usize,
    pub k_max: usize,
    pub coverage_multiplier: f64,
    pub benchmark_count: usize,
    pub n_per_benchmark: usize,
    pub n_total: usize,
}

/// Per-benchmark quota `ceil(n_per_cluster * k_max * multiplier)` and the
/// total across all benchmarks.
pub fn plan_total_sample(
    n_per_cluster: usize,
    k_max: usize,
    coverage_multiplier: f64,
    benchmark_count: usize,
) -> Result<SamplePlan> {
    if n_per_cluster == 0 || k_max == 0 || benchmark_count == 0 {
        return Err(Error::InvalidParameter(
            "sample plan counts must be at least 1".into(),
        ));
    }
    if !(coverage_multiplier.is_finite() && coverage_multiplier >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "coverage multiplier must be >= 1, got {coverage_multiplier}"
        )));
    }
    let n_per_benchmark = ceil_tolerant(n_per_cluster as f64 * k_max as f64 * coverage_multiplier);
    Ok(SamplePlan {
        n_per_cluster,
        k_max,
        coverage_multiplier,
        benchmark_count,
        n_per_benchmark,
        n_total: n_per_benchmark * benchmark_count,
    })
}
