use std::collections::{BTreeMap, HashSet};

use rand::seq::index;
use serde::Serialize;

use super::{corpus_ids, PromptRecord, SamplePlan};
use crate::seed;

/// A corpus that held fewer records than the per-benchmark quota.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Shortfall {
    pub corpus_id: String,
    pub requested: usize,
    pub available: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StratifiedSample {
    pub records: Vec<PromptRecord>,
    pub shortfalls: Vec<Shortfall>,
}

/// Draws `min(n_per_benchmark, available)` records from every corpus,
/// uniformly without replacement. Each corpus draws from its own stream
/// (`seed` mixed with the corpus id), and the output keeps input order.
pub fn stratified_sample(
    records: &[PromptRecord],
    plan: &SamplePlan,
    seed: u64,
) -> StratifiedSample {
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        members.entry(&r.corpus_id).or_default().push(i);
    }
    let quota = plan.n_per_benchmark;
    let mut chosen = HashSet::new();
    let mut shortfalls = Vec::new();
    for corpus in corpus_ids(records) {
        let rows = &members[corpus.as_str()];
        if rows.len() <= quota {
            if rows.len() < quota {
                shortfalls.push(Shortfall {
                    corpus_id: corpus.clone(),
                    requested: quota,
                    available: rows.len(),
                });
            }
            chosen.extend(rows.iter().copied());
            continue;
        }
        let mut rng = seed::rng(seed::derive_seed(seed, &corpus));
        for pick in index::sample(&mut rng, rows.len(), quota) {
            chosen.insert(rows[pick]);
        }
    }
    let records = records
        .iter()
        .enumerate()
        .filter(|(i, _)| chosen.contains(i))
        .map(|(_, r)| r.clone())
        .collect();
    StratifiedSample {
        records,
        shortfalls,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::plan_total_sample;

    fn corpus(name: &str, n: usize) -> Vec<PromptRecord> {
        (0..n)
            .map(|i| PromptRecord::new(format!("{name}-{i}"), name, format!("prompt {i}")))
            .collect()
    }

    #[test]
    fn paper_scale_quota() {
        let mut rs = Vec::new();
        for c in ["a", "b", "c", "d", "e"] {
            rs.extend(corpus(c, 2000));
        }
        let plan = plan_total_sample(109, 15, 1.0, 5).unwrap();
        let s = stratified_sample(&rs, &plan, 11);
        assert_eq!(s.records.len(), 8175);
        assert!(s.shortfalls.is_empty());
        for c in ["a", "b", "c", "d", "e"] {
            assert_eq!(s.records.iter().filter(|r| r.corpus_id == c).count(), 1635);
        }
    }

    #[test]
    fn shortfall_takes_whole_corpus() {
        let mut rs = corpus("big", 50);
        rs.extend(corpus("small", 3));
        let plan = plan_total_sample(2, 5, 1.0, 2).unwrap();
        let s = stratified_sample(&rs, &plan, 1);
        assert_eq!(s.records.len(), 13);
        assert_eq!(
            s.shortfalls,
            vec![Shortfall {
                corpus_id: "small".into(),
                requested: 10,
                available: 3
            }]
        );
    }

    #[test]
    fn deterministic_and_ordered() {
        let rs = corpus("a", 100);
        let plan = plan_total_sample(1, 10, 1.0, 1).unwrap();
        let x = stratified_sample(&rs, &plan, 5);
        let y = stratified_sample(&rs, &plan, 5);
        assert_eq!(x, y);
        let z = stratified_sample(&rs, &plan, 6);
        assert_ne!(x.records, z.records);
        let pos: Vec<usize> = x
            .records
            .iter()
            .map(|r| rs.iter().position(|o| o.id == r.id).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }
}
