use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::quantile_sorted;
use super::PromptRecord;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierMethod {
    Iqr,
    Zscore,
}

impl std::str::FromStr for OutlierMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iqr" => Ok(Self::Iqr),
            "zscore" | "z-score" | "z" => Ok(Self::Zscore),
            other => Err(Error::InvalidParameter(format!(
                "unknown outlier method {other:?} (expected iqr or zscore)"
            ))),
        }
    }
}

/// Retention interval on prompt length, in characters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OutlierBounds {
    pub method: OutlierMethod,
    pub lower: f64,
    pub upper: f64,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub iqr: Option<f64>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
}

impl OutlierBounds {
    #[inline]
    pub fn retains(&self, length: usize) -> bool {
        let x = length as f64;
        self.lower <= x && x <= self.upper
    }
}

/// `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]` or `mu +/- 3 sigma` (population sigma).
pub fn outlier_bounds(lengths: &[usize], method: OutlierMethod) -> Result<OutlierBounds> {
    if lengths.is_empty() {
        return Err(Error::InvalidParameter(
            "outlier bounds need at least one length".into(),
        ));
    }
    let bounds = match method {
        OutlierMethod::Iqr => {
            let mut sorted: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
            sorted.sort_by(f64::total_cmp);
            let q1 = quantile_sorted(&sorted, 0.25);
            let q3 = quantile_sorted(&sorted, 0.75);
            let iqr = q3 - q1;
            OutlierBounds {
                method,
                lower: q1 - 1.5 * iqr,
                upper: q3 + 1.5 * iqr,
                q1: Some(q1),
                q3: Some(q3),
                iqr: Some(iqr),
                mu: None,
                sigma: None,
            }
        }
        OutlierMethod::Zscore => {
            let n = lengths.len() as f64;
            let mu = lengths.iter().map(|&l| l as f64).sum::<f64>() / n;
            let var = lengths
                .iter()
                .map(|&l| {
                    let d = l as f64 - mu;
                    d * d
                })
                .sum::<f64>()
                / n;
            let sigma = var.sqrt();
            OutlierBounds {
                method,
                lower: mu - 3.0 * sigma,
                upper: mu + 3.0 * sigma,
                q1: None,
                q3: None,
                iqr: None,
                mu: Some(mu),
                sigma: Some(sigma),
            }
        }
    };
    Ok(bounds)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutlierSplit {
    pub retained: Vec<PromptRecord>,
    pub removed: Vec<PromptRecord>,
}

/// Splits records into those inside and outside `bounds`, preserving order.
pub fn filter_outliers(records: Vec<PromptRecord>, bounds: &OutlierBounds) -> OutlierSplit {
    let (retained, removed) = records
        .into_iter()
        .partition(|r| bounds.retains(r.char_length));
    OutlierSplit { retained, removed }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FilterScope {
    #[default]
    Pooled,
    PerCorpus,
}

/// Bounds used for one filtering scope; `scope` is `"pooled"` or a corpus id.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScopedBounds {
    pub scope: String,
    pub bounds: OutlierBounds,
}

/// Filters either against one pooled distribution or per corpus.
pub fn filter_by_scope(
    records: Vec<PromptRecord>,
    method: OutlierMethod,
    scope: FilterScope,
) -> Result<(OutlierSplit, Vec<ScopedBounds>)> {
    match scope {
        FilterScope::Pooled => {
            let lengths: Vec<usize> = records.iter().map(|r| r.char_length).collect();
            let bounds = outlier_bounds(&lengths, method)?;
            let split = filter_outliers(records, &bounds);
            Ok((
                split,
                vec![ScopedBounds {
                    scope: "pooled".into(),
                    bounds,
                }],
            ))
        }
        FilterScope::PerCorpus => {
            let mut lengths: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for r in &records {
                lengths.entry(&r.corpus_id).or_default().push(r.char_length);
            }
            let mut per = BTreeMap::new();
            for (corpus, ls) in &lengths {
                per.insert(corpus.to_string(), outlier_bounds(ls, method)?);
            }
            let mut split = OutlierSplit::default();
            for r in records {
                if per[&r.corpus_id].retains(r.char_length) {
                    split.retained.push(r);
                } else {
                    split.removed.push(r);
                }
            }
            let bounds = per
                .into_iter()
                .map(|(scope, bounds)| ScopedBounds { scope, bounds })
                .collect();
            Ok((split, bounds))
        }
    }
}
