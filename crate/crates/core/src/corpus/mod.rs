//! Prompt corpora: loading, length statistics, power-based sample sizing,
//! outlier filtering and stratified sampling.

mod load;
mod outlier;
mod power;
mod sample;
mod stats;

pub use load::{load_corpus, CorpusFormat, CorpusSchema, CorpusSource};
pub use outlier::{
    filter_by_scope, filter_outliers, outlier_bounds, FilterScope, OutlierBounds, OutlierMethod,
    OutlierSplit, ScopedBounds,
};
pub use power::{plan_total_sample, required_sample_size, PowerParams, SamplePlan, Tails};
pub use sample::{stratified_sample, Shortfall, StratifiedSample};
pub use stats::{compute_length_stats, quantile_sorted, CorpusStats, LengthSummary};

use serde::{Deserialize, Serialize};

/// One prompt with its source-corpus tag.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub corpus_id: String,
    pub text: String,
    /// Number of unicode scalar values in `text`.
    pub char_length: usize,
}

impl PromptRecord {
    pub fn new(
        id: impl Into<String>,
        corpus_id: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        let text = text.into();
        let char_length = text.chars().count();
        Self {
            id: id.into(),
            corpus_id: corpus_id.into(),
            text,
            char_length,
        }
    }
}

/// Distinct corpus ids in order of first appearance.
pub fn corpus_ids(records: &[PromptRecord]) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.corpus_id.as_str()))
        .map(|r| r.corpus_id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn char_length_counts_scalar_values() {
        let r = PromptRecord::new("a", "c", "naïve 🙂");
        assert_eq!(r.char_length, 7);
        assert_eq!(r.text.len(), 11);
    }

    #[test]
    fn corpus_ids_first_appearance() {
        let rs = vec![
            PromptRecord::new("1", "b", "x"),
            PromptRecord::new("2", "a", "x"),
            PromptRecord::new("3", "b", "x"),
        ];
        assert_eq!(corpus_ids(&rs), vec!["b", "a"]);
    }
}
