//! Configuration grid over embedding model, metric and reducer settings,
//! with timed trials and CI-aware selection of the winner.

mod select;

pub use select::{select_best, Selection};

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{
    bootstrap_silhouette, kmeans_fit, select_k, silhouette, KDiagnostics, KMeansModel,
    KSelectOptions,
};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::geometry::{Metric, MetricKind};
use crate::reduce::{Embedding2D, ReducerParams};
use crate::scalar::Scalar;
use crate::seed::derive_seed;

/// How a trial chooses k.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KMode {
    /// Best mean silhouette over the inclusive range.
    Auto {
        min: usize,
        max: usize,
    },
    Fixed(usize),
}

impl Default for KMode {
    fn default() -> Self {
        KMode::Auto { min: 2, max: 15 }
    }
}

/// One grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub embedding_model_id: String,
    pub metric: MetricKind,
    pub reducer: ReducerParams,
    pub k_mode: KMode,
    pub seed: u64,
}

impl PipelineConfig {
    /// `<model>/<metric>/<reducer tag>`, unique within a grid.
    pub fn id(&self) -> String {
        format!(
            "{}/{}/{}",
            self.embedding_model_id,
            self.metric,
            self.reducer.tag()
        )
    }
}

/// Cartesian product ordered model, then metric, then reducer setting.
pub fn build_grid(
    models: &[String],
    metrics: &[MetricKind],
    reducers: &[ReducerParams],
    k_mode: KMode,
    seed: u64,
) -> Result<Vec<PipelineConfig>> {
    if models.is_empty() || metrics.is_empty() || reducers.is_empty() {
        return Err(Error::InvalidParameter(
            "grid axes (models, metrics, reducers) must all be non-empty".into(),
        ));
    }
    if let KMode::Auto { min, max } = k_mode {
        if min < 2 || max < min + 2 {
            return Err(Error::InvalidParameter(format!(
                "automatic k needs min >= 2 and at least three candidates (got {min}..={max})"
            )));
        }
    }
    let mut out = Vec::with_capacity(models.len() * metrics.len() * reducers.len());
    for model in models {
        for &metric in metrics {
            for reducer in reducers {
                out.push(PipelineConfig {
                    embedding_model_id: model.clone(),
                    metric,
                    reducer: reducer.clone(),
                    k_mode: k_mode.clone(),
                    seed,
                });
            }
        }
    }
    let mut ids: Vec<String> = out.iter().map(PipelineConfig::id).collect();
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter(format!(
            "duplicate grid cell {}",
            w[0]
        )));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct TrialSettings {
    pub restarts: usize,
    pub bootstrap_samples: usize,
    /// Run trials one after another so timings do not contend.
    pub serial: bool,
}

impl Default for TrialSettings {
    fn default() -> Self {
        Self {
            restarts: 10,
            bootstrap_samples: 1000,
            serial: false,
        }
    }
}

/// In-memory outputs of a successful trial, kept for labeling and plots.
#[derive(Clone, Debug)]
pub struct TrialArtifacts<T> {
    pub layout: Embedding2D<T>,
    pub model: KMeansModel<T>,
    pub per_point_silhouette: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialResult<T: Scalar> {
    pub config_id: String,
    pub config: PipelineConfig,
    /// `None` on success, otherwise the failure reason.
    pub error: Option<String>,
    pub k_used: usize,
    pub k_silhouette: Option<usize>,
    pub k_elbow: Option<usize>,
    pub silhouette_mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    #[serde(with = "secs")]
    pub wall_time: Duration,
    #[serde(with = "secs")]
    pub reducer_time: Duration,
    #[serde(with = "secs")]
    pub cluster_time: Duration,
    pub diagnostics: Vec<KDiagnostics>,
    #[serde(skip)]
    pub artifacts: Option<TrialArtifacts<T>>,
}

impl<T: Scalar> TrialResult<T> {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }

    fn failed(config: &PipelineConfig, e: &Error, wall_time: Duration) -> Self {
        Self {
            config_id: config.id(),
            config: config.clone(),
            error: Some(e.to_string()),
            k_used: 0,
            k_silhouette: None,
            k_elbow: None,
            silhouette_mean: f64::NAN,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
            wall_time,
            reducer_time: Duration::ZERO,
            cluster_time: Duration::ZERO,
            diagnostics: Vec::new(),
            artifacts: None,
        }
    }
}

mod secs {
    use std::time::Duration;

    pub fn serialize<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GridReport<T: Scalar> {
    pub trials: Vec<TrialResult<T>>,
    pub winner: usize,
    pub candidates: Vec<usize>,
    pub selection_trace: String,
}

impl<T: Scalar> GridReport<T> {
    pub fn winning_trial(&self) -> &TrialResult<T> {
        &self.trials[self.winner]
    }
}

/// Runs one grid cell: reduce, cluster, score. Timing covers exactly those
/// three stages.
pub fn run_trial<T: Scalar>(
    config: &PipelineConfig,
    embedding: &EmbeddingMatrix<T>,
    settings: &TrialSettings,
) -> TrialResult<T> {
    let start = Instant::now();
    match trial_inner(config, embedding, settings, start) {
        Ok(t) => t,
        Err(e) => {
            log::warn!("trial {} failed: {e}", config.id());
            TrialResult::failed(config, &e, start.elapsed())
        }
    }
}

fn trial_inner<T: Scalar>(
    config: &PipelineConfig,
    embedding: &EmbeddingMatrix<T>,
    settings: &TrialSettings,
    start: Instant,
) -> Result<TrialResult<T>> {
    let high = Metric::fit(config.metric, &embedding.vectors)?;
    let reducer = config.reducer.with_seed(derive_seed(config.seed, "reduce"));
    let layout = reducer.fit(embedding, &high)?;
    let reduced_at = Instant::now();

    let coords = &layout.coords;
    let low = Metric::fit(config.metric, coords)?;
    let cluster_seed = derive_seed(config.seed, "cluster");
    let (model, diagnostics, k_sil, k_elbow) = match config.k_mode {
        KMode::Fixed(k) => (
            kmeans_fit(coords, k, &low, cluster_seed, settings.restarts)?,
            Vec::new(),
            None,
            None,
        ),
        KMode::Auto { min, max } => {
            let opts = KSelectOptions {
                restarts: settings.restarts,
                bootstrap_samples: None,
            };
            let sel = select_k(
                coords,
                &low,
                min..=max.min(coords.rows()),
                cluster_seed,
                &opts,
            )?;
            let model = sel
                .model(sel.k_silhouette)
                .expect("selected k was fitted")
                .clone();
            (model, sel.per_k, Some(sel.k_silhouette), Some(sel.k_elbow))
        }
    };
    let sil = silhouette(coords, &model.assignments, &low)?;
    let (ci_low, ci_high) = bootstrap_silhouette(
        coords,
        &model.assignments,
        &low,
        settings.bootstrap_samples,
        derive_seed(config.seed, "bootstrap"),
    )?;
    let done = Instant::now();
    Ok(TrialResult {
        config_id: config.id(),
        config: config.clone(),
        error: None,
        k_used: model.k,
        k_silhouette: k_sil,
        k_elbow,
        silhouette_mean: sil.mean,
        ci_low,
        ci_high,
        wall_time: done - start,
        reducer_time: reduced_at - start,
        cluster_time: done - reduced_at,
        diagnostics,
        artifacts: Some(TrialArtifacts {
            layout,
            model,
            per_point_silhouette: sil.per_point,
        }),
    })
}

/// Runs every grid cell on its model's embedding matrix. A failing cell is
/// recorded and the rest continue; the call fails only when inputs are
/// missing or no cell succeeds.
pub fn run_grid<T: Scalar>(
    embeddings: &BTreeMap<String, EmbeddingMatrix<T>>,
    grid: &[PipelineConfig],
    settings: &TrialSettings,
) -> Result<GridReport<T>> {
    for c in grid {
        if !embeddings.contains_key(&c.embedding_model_id) {
            return Err(Error::MissingEmbedding(c.embedding_model_id.clone()));
        }
    }
    let mut used = grid.iter().map(|c| &embeddings[&c.embedding_model_id]);
    if let Some(first) = used.next() {
        if used.any(|m| m.row_ids != first.row_ids) {
            return Err(Error::IdMismatch(
                "embedding matrices in one grid must share the same rows in the same order".into(),
            ));
        }
    }
    let run = |c: &PipelineConfig| {
        log::info!("running trial {}", c.id());
        run_trial(c, &embeddings[&c.embedding_model_id], settings)
    };
    let trials: Vec<TrialResult<T>> = if settings.serial {
        grid.iter().map(run).collect()
    } else {
        grid.par_iter().map(run).collect()
    };
    let sel = select_best(&trials)?;
    Ok(GridReport {
        trials,
        winner: sel.winner,
        candidates: sel.candidates,
        selection_trace: sel.trace,
    })
}

/// Replaces the timing-based winner with `config_id`, which must be one of
/// the statistically similar candidates.
pub fn pin_winner<T: Scalar>(report: &mut GridReport<T>, config_id: &str) -> Result<()> {
    let Some(i) = report.trials.iter().position(|t| t.config_id == config_id) else {
        return Err(Error::InvalidParameter(format!(
            "pinned winner {config_id} is not a grid cell"
        )));
    };
    if !report.candidates.contains(&i) {
        let reason = match &report.trials[i].error {
            Some(e) => format!("it failed: {e}"),
            None => "its interval does not overlap the best trial's".to_string(),
        };
        return Err(Error::InvalidParameter(format!(
            "pinned winner {config_id} is not a candidate: {reason}"
        )));
    }
    if report.winner != i {
        report.selection_trace.push_str(&format!(
            "\nwinner pinned to {config_id} (timing rule chose {})",
            report.trials[report.winner].config_id
        ));
        report.winner = i;
    }
    Ok(())
}
