use std::collections::BTreeMap;

use serde::Serialize;

use super::PromptRecord;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Quantile of ascending-sorted data by linear interpolation at position
/// `(n - 1) * p`.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LengthSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Population standard deviation.
    pub sigma: f64,
}

impl LengthSummary {
    pub fn from_lengths(lengths: &[usize]) -> Option<Self> {
        if lengths.is_empty() {
            return None;
        }
        let mut sorted: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let var = sorted.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Some(Self {
            count: sorted.len(),
            mean,
            median: quantile_sorted(&sorted, 0.5),
            q1: quantile_sorted(&sorted, 0.25),
            q3: quantile_sorted(&sorted, 0.75),
            sigma: var.sqrt(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusStats {
    pub per_corpus: BTreeMap<String, LengthSummary>,
    pub pooled: LengthSummary,
}

pub fn compute_length_stats(records: &[PromptRecord]) -> Result<CorpusStats> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for r in records {
        groups
            .entry(r.corpus_id.clone())
            .or_default()
            .push(r.char_length);
    }
    let all: Vec<usize> = records.iter().map(|r| r.char_length).collect();
    let pooled = LengthSummary::from_lengths(&all)
        .ok_or_else(|| Error::InvalidParameter("no records to summarize".into()))?;
    let per_corpus = groups
        .into_iter()
        .map(|(k, v)| {
            let s = LengthSummary::from_lengths(&v).expect("group is non-empty");
            (k, s)
        })
        .collect();
    Ok(CorpusStats { per_corpus, pooled })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(lengths: &[usize], corpus: &str) -> Vec<PromptRecord> {
        lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| PromptRecord::new(format!("{corpus}-{i}"), corpus, "x".repeat(l)))
            .collect()
    }

    #[test]
    fn single_record() {
        let s = compute_length_stats(&recs(&[157], "a")).unwrap();
        assert_eq!(s.pooled.median, 157.0);
        assert_eq!(s.pooled.mean, 157.0);
        assert_eq!(s.pooled.sigma, 0.0);
    }

    #[test]
    fn interpolated_quartiles() {
        let s = compute_length_stats(&recs(&[5, 3, 1, 4, 2], "a")).unwrap();
        assert_eq!((s.pooled.q1, s.pooled.median, s.pooled.q3), (2.0, 3.0, 4.0));
    }

    #[test]
    fn per_corpus_groups() {
        let mut rs = recs(&[1, 2, 3], "a");
        rs.extend(recs(&[10, 20], "b"));
        let s = compute_length_stats(&rs).unwrap();
        assert_eq!(s.per_corpus["a"].count, 3);
        assert_eq!(s.per_corpus["b"].mean, 15.0);
        assert_eq!(s.pooled.count, 5);
        assert!(compute_length_stats(&[]).is_err());
    }

    #[test]
    fn quantile_between_points() {
        let v = [0.0, 10.0];
        assert_eq!(quantile_sorted(&v, 0.25), 2.5);
    }
}
