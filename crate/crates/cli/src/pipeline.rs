//! End-to-end run: corpus, embeddings, grid search, labels, report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use orthobench::corpus::{
    compute_length_stats, filter_by_scope, load_corpus, plan_total_sample, required_sample_size,
    stratified_sample, CorpusStats, PromptRecord, SamplePlan, ScopedBounds, StratifiedSample,
};
use orthobench::embed::{fetch_embeddings, l2_normalize, read_vector_file, EmbeddingMatrix};
use orthobench::geometry::Metric;
use orthobench::label::{
    extract_exemplars, read_label_file, request_labels, ClusterLabel, HttpLabelOracle,
};
use orthobench::optimize::{build_grid, pin_winner, run_grid, GridReport};
use orthobench::report::{
    frequency_table, kde, write_report, KdeCurve, OutlierSummary, ReportFiles, RunReport,
};
use orthobench::seed::derive_seed;
use orthobench::Error;

use crate::config::RunConfig;
use crate::error::{CliError, Stage, StageExt};

/// Named stages that draw randomness from the master seed.
pub const STAGES: [&str; 2] = ["sample", "optimize"];

pub struct PipelineOutcome {
    pub report: RunReport<f64>,
    pub files: ReportFiles,
    pub output_dir: PathBuf,
    /// Set when labeling failed and the report was written with unlabeled clusters.
    pub label_failure: Option<CliError>,
}

impl PipelineOutcome {
    pub fn exit_code(&self) -> u8 {
        self.label_failure.as_ref().map_or(0, CliError::code)
    }
}

pub fn load_embeddings(
    cfg: &RunConfig,
    records: &[PromptRecord],
) -> Result<BTreeMap<String, EmbeddingMatrix<f64>>, CliError> {
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let mut out = BTreeMap::new();
    for model in cfg
        .embeddings
        .models
        .iter()
        .filter(|m| cfg.grid_models().contains(&m.id))
    {
        let m = match (&model.path, model.client_config()) {
            (Some(path), _) => {
                let mut m = read_vector_file::<f64>(&cfg.resolve(path)).stage(Stage::Embed)?;
                if m.model_id != model.id {
                    log::warn!("vector file for {} declares model {}", model.id, m.model_id);
                    m.model_id = model.id.clone();
                }
                m.align_to(&ids, true).stage(Stage::Embed)?
            }
            (None, Some(client)) => fetch_embeddings(&client, records).stage(Stage::Embed)?,
            (None, None) => unreachable!("validated: path or endpoint"),
        };
        let m = if cfg.embeddings.normalize {
            l2_normalize(m).stage(Stage::Embed)?
        } else {
            m
        };
        log::info!(
            "model {}: {} vectors of dimension {}",
            model.id,
            m.len(),
            m.dim()
        );
        out.insert(model.id.clone(), m);
    }
    Ok(out)
}

fn length_curves(cfg: &RunConfig, records: &[PromptRecord]) -> Result<Vec<KdeCurve>, CliError> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        groups
            .entry(&r.corpus_id)
            .or_default()
            .push(r.char_length as f64);
    }
    let pooled: Vec<f64> = records.iter().map(|r| r.char_length as f64).collect();
    let mut curves = Vec::new();
    for (name, lengths) in groups
        .iter()
        .map(|(k, v)| (*k, v))
        .chain(std::iter::once(("pooled", &pooled)))
    {
        match kde(
            name,
            lengths,
            cfg.report.bandwidth(),
            cfg.report.kde_grid_size,
        ) {
            Ok(c) => curves.push(c),
            Err(Error::Degenerate(msg)) => log::warn!("no length density for {name}: {msg}"),
            Err(e) => return Err(CliError::from_core(Stage::Report, e)),
        }
    }
    Ok(curves)
}

/// Corpus statistics, filtering and the stratified sample.
pub struct Prepared {
    pub all_records: Vec<PromptRecord>,
    pub retained: Vec<PromptRecord>,
    pub corpus_stats: CorpusStats,
    pub retained_stats: CorpusStats,
    pub outliers: OutlierSummary,
    pub plan: SamplePlan,
    pub sample: StratifiedSample,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let seeds = cfg.stage_seeds();
    let records = load_corpus(&cfg.corpus_sources(), &cfg.corpus.schema()).stage(Stage::Corpus)?;
    let corpus_stats = compute_length_stats(&records).stage(Stage::Corpus)?;
    log::info!(
        "loaded {} prompts from {} corpora",
        records.len(),
        corpus_stats.per_corpus.len()
    );

    let all_records = records.clone();
    let (retained, removed, bounds): (Vec<PromptRecord>, Vec<PromptRecord>, Vec<ScopedBounds>) =
        if cfg.outliers.enabled {
            let (split, bounds) = filter_by_scope(records, cfg.outliers.method, cfg.outliers.scope)
                .stage(Stage::Corpus)?;
            (split.retained, split.removed, bounds)
        } else {
            (records, Vec::new(), Vec::new())
        };
    let retained_stats = compute_length_stats(&retained).stage(Stage::Corpus)?;
    let mut removed_by_corpus = BTreeMap::new();
    for r in &removed {
        *removed_by_corpus.entry(r.corpus_id.clone()).or_insert(0) += 1;
    }
    let outliers = OutlierSummary {
        method: cfg.outliers.method,
        scope: cfg.outliers.scope,
        bounds,
        retained: retained.len(),
        removed: removed.len(),
        removed_by_corpus,
    };

    let n_per_cluster = match cfg.sampling.n_per_cluster {
        Some(n) => n,
        None => required_sample_size(&cfg.sampling.power_params()).stage(Stage::Sample)?,
    };
    let plan = plan_total_sample(
        n_per_cluster,
        cfg.sampling.k_max,
        cfg.sampling.coverage_multiplier,
        retained_stats.per_corpus.len(),
    )
    .stage(Stage::Sample)?;
    let sample = stratified_sample(&retained, &plan, seeds["sample"]);
    for s in &sample.shortfalls {
        log::warn!(
            "corpus {} has {} prompts, fewer than the quota of {}",
            s.corpus_id,
            s.available,
            s.requested
        );
    }
    log::info!(
        "sampled {} prompts ({} per corpus requested)",
        sample.records.len(),
        plan.n_per_benchmark
    );
    Ok(Prepared {
        all_records,
        retained,
        corpus_stats,
        retained_stats,
        outliers,
        plan,
        sample,
    })
}

/// Embeds the sample and runs every grid cell, applying a pinned winner.
pub fn search(cfg: &RunConfig, sample: &[PromptRecord]) -> Result<GridReport<f64>, CliError> {
    let embeddings = load_embeddings(cfg, sample)?;
    let k_mode = cfg
        .cluster
        .k_mode()
        .map_err(|m| CliError::validation(Stage::Config, m))?;
    let seed = derive_seed(cfg.seed, "optimize");
    let grid = build_grid(
        &cfg.grid_models(),
        &cfg.grid.metrics,
        &cfg.grid.reducers(),
        k_mode,
        seed,
    )
    .stage(Stage::Grid)?;
    let mut report = run_grid(&embeddings, &grid, &cfg.grid.settings()).stage(Stage::Grid)?;
    if cfg.grid.winner != "auto" {
        pin_winner(&mut report, &cfg.grid.winner).stage(Stage::Grid)?;
    }
    Ok(report)
}

/// Runs the whole pipeline and writes the report. Configuration problems are
/// reported before any output directory is created.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutcome, CliError> {
    cfg.validate()?;
    let taxonomy = cfg.taxonomy()?;
    let Prepared {
        all_records,
        retained,
        corpus_stats,
        retained_stats,
        outliers,
        plan,
        sample,
    } = prepare(cfg)?;
    let grid_report = search(cfg, &sample.records)?;

    let win = grid_report.winning_trial();
    let art = win
        .artifacts
        .as_ref()
        .expect("winning trial keeps artifacts");
    let coord_metric = Metric::fit(win.config.metric, &art.layout.coords).stage(Stage::Label)?;
    let exemplars = extract_exemplars(
        &art.model,
        &art.layout.coords,
        &art.layout.row_ids,
        cfg.labels.exemplars,
        cfg.labels.rule,
        &coord_metric,
    )
    .stage(Stage::Label)?;
    let k = art.model.k;

    let mut label_failure = None;
    let labels: Vec<ClusterLabel> = if let Some(file) = &cfg.labels.file {
        let map = read_label_file(&cfg.resolve(file), &taxonomy).stage(Stage::Label)?;
        (0..k)
            .map(|c| match map.get(&c) {
                Some(l) => ClusterLabel::from_file(c, l.clone()),
                None => {
                    log::warn!("label file has no entry for cluster {c}");
                    ClusterLabel::unavailable(c)
                }
            })
            .collect()
    } else {
        let client = cfg.labels.client_config().expect("validated: endpoint set");
        let result = HttpLabelOracle::new(client).and_then(|o| {
            request_labels(
                &o,
                &exemplars,
                &sample.records,
                &taxonomy,
                &cfg.labels.options(),
            )
        });
        match result {
            Ok(votes) => votes.into_iter().map(ClusterLabel::from_vote).collect(),
            Err(e) => {
                let err = CliError::from_core(Stage::Label, e);
                log::error!("{err}");
                label_failure = Some(err);
                (0..k).map(ClusterLabel::unavailable).collect()
            }
        }
    };
    let label_map: BTreeMap<usize, String> = labels
        .iter()
        .filter_map(|l| l.label.clone().map(|s| (l.cluster_id, s)))
        .collect();
    let frequency = frequency_table(&art.model.assignments, &label_map, &sample.records)
        .stage(Stage::Report)?;
    let kde_source = if cfg.report.kde_prefilter {
        &all_records
    } else {
        &retained
    };
    let kde_curves = length_curves(cfg, kde_source)?;

    let report = RunReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: cfg.seed,
        stage_seeds: cfg.stage_seeds(),
        corpus_stats,
        retained_stats,
        sample_plan: plan,
        shortfalls: sample.shortfalls,
        outliers,
        grid: grid_report,
        exemplars,
        labels,
        label_error: label_failure.as_ref().map(|e| e.message.clone()),
        frequency,
        kde: kde_curves,
        records: sample.records,
    };
    let output_dir = cfg.output_dir.clone();
    let output_dir = if output_dir.is_absolute() {
        output_dir
    } else {
        cfg.resolve(&output_dir)
    };
    let files = write_report(&report, &output_dir).stage(Stage::Report)?;
    Ok(PipelineOutcome {
        report,
        files,
        output_dir,
        label_failure,
    })
}

/// One line per grid cell: silhouette with interval, k, and wall time.
pub fn headline(grid: &GridReport<f64>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<44} {:>3} {:>24} {:>9}",
        "config", "k", "silhouette [95% CI]", "wall (s)"
    );
    for (i, t) in grid.trials.iter().enumerate() {
        let mark = if i == grid.winner {
            "*"
        } else if grid.candidates.contains(&i) {
            "~"
        } else {
            " "
        };
        if t.succeeded() {
            let _ = writeln!(
                s,
                "{mark}{:<43} {:>3} {:>8.4} [{:.4}, {:.4}] {:>9.2}",
                t.config_id,
                t.k_used,
                t.silhouette_mean,
                t.ci_low,
                t.ci_high,
                t.wall_time.as_secs_f64()
            );
        } else {
            let _ = writeln!(
                s,
                "{mark}{:<43} failed: {}",
                t.config_id,
                t.error.as_deref().unwrap_or("")
            );
        }
    }
    s
}
