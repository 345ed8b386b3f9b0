use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

use super::table::Table;
use crate::corpus::PromptRecord;
use crate::error::{Error, Result};

/// Cluster-by-corpus counts. Rows are corpus ids in sorted order, columns
/// are cluster ids `0..k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyTable {
    pub corpus_ids: Vec<String>,
    pub cluster_ids: Vec<usize>,
    pub cluster_labels: Vec<Option<String>>,
    pub counts: Vec<Vec<usize>>,
    pub row_proportions: Vec<Vec<f64>>,
}

impl FrequencyTable {
    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        (0..self.cluster_ids.len())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    pub fn total(&self) -> usize {
        self.row_sums().iter().sum()
    }

    /// Long format: `corpus_id,cluster_id,label,count,proportion`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["corpus_id", "cluster_id", "label", "count", "proportion"]);
        for (r, corpus) in self.corpus_ids.iter().enumerate() {
            for (j, &c) in self.cluster_ids.iter().enumerate() {
                t.push(vec![
                    corpus.clone(),
                    c.to_string(),
                    self.cluster_labels[j].clone().unwrap_or_default(),
                    self.counts[r][j].to_string(),
                    self.row_proportions[r][j].to_string(),
                ]);
            }
        }
        t
    }
}

pub fn frequency_table(
    assignments: &[usize],
    labels: &BTreeMap<usize, String>,
    records: &[PromptRecord],
) -> Result<FrequencyTable> {
    if assignments.len() != records.len() {
        return Err(Error::Shape(format!(
            "{} assignments for {} records",
            assignments.len(),
            records.len()
        )));
    }
    let k = assignments.iter().map(|&c| c + 1).max().unwrap_or(0);
    let corpus_ids: Vec<String> = records
        .iter()
        .map(|r| r.corpus_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let row_of: BTreeMap<&str, usize> = corpus_ids
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut counts = vec![vec![0usize; k]; corpus_ids.len()];
    for (r, &c) in records.iter().zip(assignments) {
        counts[row_of[r.corpus_id.as_str()]][c] += 1;
    }
    let row_proportions = counts
        .iter()
        .map(|row| {
            let n = row.iter().sum::<usize>() as f64;
            row.iter().map(|&c| c as f64 / n).collect()
        })
        .collect();
    Ok(FrequencyTable {
        cluster_ids: (0..k).collect(),
        cluster_labels: (0..k).map(|c| labels.get(&c).cloned()).collect(),
        corpus_ids,
        counts,
        row_proportions,
    })
}
