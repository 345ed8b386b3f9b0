use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exemplar::ExemplarSet;
use super::oracle::LabelOracle;
use super::prompt::render_prompt;
use super::taxonomy::{Taxonomy, OTHER};
use crate::corpus::PromptRecord;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelOptions {
    pub runs: usize,
    /// Extra calls allowed to break a tie for the most frequent label.
    pub max_tiebreak_calls: usize,
}

impl Default for LabelOptions {
    fn default() -> Self {
        Self {
            runs: 5,
            max_tiebreak_calls: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelVote {
    pub cluster_id: usize,
    /// Parsed label per call, including tie-break calls.
    pub runs: Vec<String>,
    pub final_label: String,
    pub agreement: f64,
    /// Calls whose response did not name a taxonomy label.
    pub unparseable: usize,
}

/// Majority vote over `runs`. Ties resolve to the lexicographically smallest
/// label. Returns `None` for an empty slice.
pub fn majority(runs: &[String]) -> Option<(String, usize)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in runs {
        *counts.entry(r.as_str()).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    counts
        .into_iter()
        .find(|&(_, c)| c == best)
        .map(|(l, c)| (l.to_string(), c))
}

fn is_tied(runs: &[String]) -> bool {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in runs {
        *counts.entry(r.as_str()).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap_or(0);
    counts.values().filter(|&&c| c == best).count() > 1
}

/// Queries the oracle `opts.runs` times with one fixed prompt and aggregates.
pub fn vote_cluster(
    oracle: &dyn LabelOracle,
    cluster_id: usize,
    prompt: &str,
    taxonomy: &Taxonomy,
    opts: &LabelOptions,
) -> Result<LabelVote> {
    if opts.runs == 0 {
        return Err(Error::InvalidParameter(
            "label runs must be at least 1".into(),
        ));
    }
    let mut runs = Vec::with_capacity(opts.runs);
    let mut unparseable = 0;
    let mut call = |runs: &mut Vec<String>| -> Result<()> {
        let text = oracle.complete(prompt)?;
        match taxonomy.parse_response(&text) {
            Some(l) => runs.push(l.to_string()),
            None => {
                log::debug!("cluster {cluster_id}: unparseable label response {text:?}");
                unparseable += 1;
                runs.push(OTHER.to_string());
            }
        }
        Ok(())
    };
    for _ in 0..opts.runs {
        call(&mut runs)?;
    }
    let mut extra = 0;
    while extra < opts.max_tiebreak_calls && is_tied(&runs) {
        call(&mut runs)?;
        extra += 1;
    }
    if unparseable == runs.len() {
        log::warn!("cluster {cluster_id}: no label response was parseable; labeling it {OTHER}");
        return Ok(LabelVote {
            cluster_id,
            runs,
            final_label: OTHER.to_string(),
            agreement: 0.0,
            unparseable,
        });
    }
    let (final_label, count) = majority(&runs).expect("at least one run");
    Ok(LabelVote {
        cluster_id,
        agreement: count as f64 / runs.len() as f64,
        runs,
        final_label,
        unparseable,
    })
}

/// Labels every exemplar set. Clusters are queried concurrently; the calls
/// for one cluster run in sequence.
pub fn request_labels(
    oracle: &dyn LabelOracle,
    exemplars: &[ExemplarSet],
    records: &[PromptRecord],
    taxonomy: &Taxonomy,
    opts: &LabelOptions,
) -> Result<Vec<LabelVote>> {
    let by_id: HashMap<&str, &str> = records
        .iter()
        .map(|r| (r.id.as_str(), r.text.as_str()))
        .collect();
    let prompts = exemplars
        .iter()
        .map(|set| {
            let texts = set
                .exemplar_ids
                .iter()
                .map(|id| {
                    by_id.get(id.as_str()).copied().ok_or_else(|| {
                        Error::IdMismatch(format!("exemplar {id} has no prompt record"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((set.cluster_id, render_prompt(&texts, taxonomy)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut votes = prompts
        .par_iter()
        .map(|(c, p)| vote_cluster(oracle, *c, p, taxonomy, opts))
        .collect::<Result<Vec<_>>>()?;
    votes.sort_by_key(|v| v.cluster_id);
    Ok(votes)
}
