use std::cmp::Ordering;
use std::fmt::Write;

use super::TrialResult;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub winner: usize,
    /// Trials whose interval overlaps the best trial's interval.
    pub candidates: Vec<usize>,
    pub trace: String,
}

fn overlaps(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

/// Among successful trials, take the highest mean silhouette, collect every
/// trial whose bootstrap interval overlaps it, and return the fastest of
/// those (ties: higher silhouette, then earlier trial).
pub fn select_best<T: Scalar>(trials: &[TrialResult<T>]) -> Result<Selection> {
    let ok: Vec<usize> = (0..trials.len())
        .filter(|&i| trials[i].succeeded())
        .collect();
    let Some(&first) = ok.first() else {
        let reason = trials
            .iter()
            .find_map(|t| {
                t.error
                    .as_ref()
                    .map(|e| format!(" (first failure, {}: {e})", t.config_id))
            })
            .unwrap_or_default();
        return Err(Error::NoSuccessfulTrials(reason));
    };
    let best = ok.iter().copied().fold(first, |b, i| {
        if trials[i].silhouette_mean > trials[b].silhouette_mean {
            i
        } else {
            b
        }
    });
    let bi = (trials[best].ci_low, trials[best].ci_high);
    let candidates: Vec<usize> = ok
        .iter()
        .copied()
        .filter(|&i| overlaps((trials[i].ci_low, trials[i].ci_high), bi))
        .collect();
    let winner = candidates
        .iter()
        .copied()
        .min_by(|&a, &b| {
            let (ta, tb) = (&trials[a], &trials[b]);
            ta.wall_time
                .cmp(&tb.wall_time)
                .then(
                    tb.silhouette_mean
                        .partial_cmp(&ta.silhouette_mean)
                        .unwrap_or(Ordering::Equal),
                )
                .then(a.cmp(&b))
        })
        .expect("best trial is its own candidate");

    let mut trace = String::new();
    let t = &trials[best];
    let _ = writeln!(
        trace,
        "{} of {} trials succeeded; highest mean silhouette: {} at {:.4} [{:.4}, {:.4}]",
        ok.len(),
        trials.len(),
        t.config_id,
        t.silhouette_mean,
        t.ci_low,
        t.ci_high
    );
    let _ = writeln!(trace, "statistically similar (interval overlaps the best):");
    for &i in &candidates {
        let c = &trials[i];
        let _ = writeln!(
            trace,
            "  {} silhouette {:.4} [{:.4}, {:.4}] wall {:.3}s",
            c.config_id,
            c.silhouette_mean,
            c.ci_low,
            c.ci_high,
            c.wall_time.as_secs_f64()
        );
    }
    let _ = write!(
        trace,
        "selected {} as the fastest of {} similar trial(s)",
        trials[winner].config_id,
        candidates.len()
    );
    Ok(Selection {
        winner,
        candidates,
        trace,
    })
}
