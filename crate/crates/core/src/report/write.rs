use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::frequency::FrequencyTable;
use super::kde::KdeCurve;
use super::svg::{emit_kde_plot, emit_scatter};
use super::table::Table;
use crate::corpus::{
    CorpusStats, FilterScope, OutlierMethod, PromptRecord, SamplePlan, ScopedBounds, Shortfall,
};
use crate::error::{Error, Result};
use crate::label::{ClusterLabel, ExemplarSet};
use crate::optimize::GridReport;
use crate::scalar::Scalar;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const MASTER_REPORT: &str = "report.json";

/// Top-level keys every master report carries.
pub const REQUIRED_KEYS: [&str; 17] = [
    "schema_version",
    "tool_version",
    "master_seed",
    "stage_seeds",
    "corpus_stats",
    "retained_stats",
    "sample_plan",
    "shortfalls",
    "outliers",
    "grid",
    "chosen_config",
    "k_diagnostics",
    "labels",
    "unlabeled_clusters",
    "frequency_table",
    "failures",
    "artifacts",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutlierSummary {
    pub method: OutlierMethod,
    pub scope: FilterScope,
    pub bounds: Vec<ScopedBounds>,
    pub retained: usize,
    pub removed: usize,
    pub removed_by_corpus: BTreeMap<String, usize>,
}

/// Everything a finished pipeline run reports. `records` are the clustered
/// prompts, aligned with the winning layout.
#[derive(Clone, Debug)]
pub struct RunReport<T: Scalar> {
    pub tool_version: String,
    pub master_seed: u64,
    pub stage_seeds: BTreeMap<String, u64>,
    pub corpus_stats: CorpusStats,
    pub retained_stats: CorpusStats,
    pub sample_plan: SamplePlan,
    pub shortfalls: Vec<Shortfall>,
    pub outliers: OutlierSummary,
    pub grid: GridReport<T>,
    pub exemplars: Vec<ExemplarSet>,
    pub labels: Vec<ClusterLabel>,
    /// Why labels are missing, when the label stage failed.
    pub label_error: Option<String>,
    pub frequency: FrequencyTable,
    pub kde: Vec<KdeCurve>,
    pub records: Vec<PromptRecord>,
}

impl<T: Scalar> RunReport<T> {
    pub fn label_map(&self) -> BTreeMap<usize, String> {
        self.labels
            .iter()
            .filter_map(|l| l.label.clone().map(|s| (l.cluster_id, s)))
            .collect()
    }

    pub fn unlabeled_clusters(&self) -> Vec<usize> {
        let k = self.frequency.cluster_ids.len();
        let labeled = self.label_map();
        (0..k).filter(|c| !labeled.contains_key(c)).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ReportFiles {
    pub master: PathBuf,
    /// Seed-reproducible tables, relative to the report directory.
    pub tables: Vec<PathBuf>,
    pub timing: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
}

fn opt<X: ToString>(x: Option<X>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn grid_table<T: Scalar>(grid: &GridReport<T>) -> Table {
    let mut t = Table::new(&[
        "config_id",
        "model",
        "metric",
        "reducer",
        "status",
        "error",
        "k_used",
        "k_silhouette",
        "k_elbow",
        "silhouette_mean",
        "ci_low",
        "ci_high",
        "candidate",
        "winner",
    ]);
    for (i, tr) in grid.trials.iter().enumerate() {
        let ok = tr.succeeded();
        let num = |v: f64| if ok { v.to_string() } else { String::new() };
        t.push(vec![
            tr.config_id.clone(),
            tr.config.embedding_model_id.clone(),
            tr.config.metric.name().to_string(),
            tr.config.reducer.tag(),
            if ok { "ok" } else { "failed" }.to_string(),
            tr.error.clone().unwrap_or_default(),
            if ok {
                tr.k_used.to_string()
            } else {
                String::new()
            },
            opt(tr.k_silhouette),
            opt(tr.k_elbow),
            num(tr.silhouette_mean),
            num(tr.ci_low),
            num(tr.ci_high),
            grid.candidates.contains(&i).to_string(),
            (grid.winner == i).to_string(),
        ]);
    }
    t
}

fn stats_table(pre: &CorpusStats, post: &CorpusStats) -> Table {
    let mut t = Table::new(&[
        "stage",
        "corpus_id",
        "count",
        "mean",
        "median",
        "q1",
        "q3",
        "sigma",
    ]);
    for (stage, s) in [("loaded", pre), ("retained", post)] {
        let rows = s
            .per_corpus
            .iter()
            .map(|(k, v)| (k.as_str(), v))
            .chain(std::iter::once(("pooled", &s.pooled)));
        for (name, v) in rows {
            t.push(vec![
                stage.into(),
                name.into(),
                v.count.to_string(),
                v.mean.to_string(),
                v.median.to_string(),
                v.q1.to_string(),
                v.q3.to_string(),
                v.sigma.to_string(),
            ]);
        }
    }
    t
}

/// Writes the master report, tables and plots under `dir`:
///
/// ```text
/// report.json                 master report (schema_version 1)
/// tables/*.csv                byte-identical across runs with one seed
/// timing/grid_timing.csv      wall-clock measurements
/// plots/scatter.svg (+ .csv)  winning layout, coloured by corpus
/// plots/kde_lengths.svg       prompt-length densities
/// ```
pub fn write_report<T: Scalar>(report: &RunReport<T>, dir: &Path) -> Result<ReportFiles> {
    let win = report.grid.winning_trial();
    let art = win.artifacts.as_ref().ok_or_else(|| {
        Error::InvalidParameter(format!("winning trial {} has no artifacts", win.config_id))
    })?;
    for sub in ["tables", "timing", "plots"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let labels = report.label_map();
    let mut files = ReportFiles {
        master: PathBuf::from(MASTER_REPORT),
        ..Default::default()
    };
    let put = |rel: &str, t: Table, bucket: &mut Vec<PathBuf>| -> Result<()> {
        t.write(&dir.join(rel))?;
        bucket.push(PathBuf::from(rel));
        Ok(())
    };
    let mut tables = Vec::new();
    put(
        "tables/frequency.csv",
        report.frequency.to_table(),
        &mut tables,
    )?;
    put("tables/grid.csv", grid_table(&report.grid), &mut tables)?;

    let mut kd = Table::new(&["k", "inertia", "silhouette", "ci_low", "ci_high", "chosen"]);
    for d in &win.diagnostics {
        kd.push(vec![
            d.k.to_string(),
            d.inertia.to_string(),
            d.silhouette.to_string(),
            opt(d.ci_low),
            opt(d.ci_high),
            (d.k == win.k_used).to_string(),
        ]);
    }
    put("tables/k_diagnostics.csv", kd, &mut tables)?;

    let mut lt = Table::new(&[
        "cluster_id",
        "label",
        "source",
        "agreement",
        "runs",
        "unparseable",
    ]);
    for c in &report.frequency.cluster_ids {
        let l = report.labels.iter().find(|l| l.cluster_id == *c);
        let (label, source) = match l {
            Some(l) => (
                l.label.clone().unwrap_or_default(),
                l.source.as_str().to_string(),
            ),
            None => (String::new(), "unavailable".to_string()),
        };
        let vote = l.and_then(|l| l.vote.as_ref());
        lt.push(vec![
            c.to_string(),
            label,
            source,
            opt(vote.map(|v| v.agreement)),
            vote.map(|v| v.runs.join(";")).unwrap_or_default(),
            opt(vote.map(|v| v.unparseable)),
        ]);
    }
    put("tables/labels.csv", lt, &mut tables)?;

    let corpus_of: BTreeMap<&str, &str> = report
        .records
        .iter()
        .map(|r| (r.id.as_str(), r.corpus_id.as_str()))
        .collect();
    let mut et = Table::new(&["cluster_id", "rank", "id", "corpus_id", "distance", "rule"]);
    for set in &report.exemplars {
        for (rank, (id, d)) in set.exemplar_ids.iter().zip(&set.distances).enumerate() {
            et.push(vec![
                set.cluster_id.to_string(),
                rank.to_string(),
                id.clone(),
                corpus_of
                    .get(id.as_str())
                    .copied()
                    .unwrap_or_default()
                    .to_string(),
                d.to_string(),
                set.rule.as_str().to_string(),
            ]);
        }
    }
    put("tables/exemplars.csv", et, &mut tables)?;
    put(
        "tables/corpus_stats.csv",
        stats_table(&report.corpus_stats, &report.retained_stats),
        &mut tables,
    )?;

    let mut kt = Table::new(&["name", "bandwidth", "x", "density"]);
    for c in &report.kde {
        for (x, y) in c.grid.iter().zip(&c.density) {
            kt.push(vec![
                c.name.clone(),
                c.bandwidth.to_string(),
                x.to_string(),
                y.to_string(),
            ]);
        }
    }
    put("tables/kde.csv", kt, &mut tables)?;

    let mut tt = Table::new(&[
        "config_id",
        "status",
        "wall_time_s",
        "reducer_time_s",
        "cluster_time_s",
    ]);
    for tr in &report.grid.trials {
        tt.push(vec![
            tr.config_id.clone(),
            if tr.succeeded() { "ok" } else { "failed" }.into(),
            tr.wall_time.as_secs_f64().to_string(),
            tr.reducer_time.as_secs_f64().to_string(),
            tr.cluster_time.as_secs_f64().to_string(),
        ]);
    }
    let mut timing = Vec::new();
    put("timing/grid_timing.csv", tt, &mut timing)?;

    emit_scatter(
        &art.layout,
        &art.model.assignments,
        &labels,
        &report.records,
        &dir.join("plots/scatter.svg"),
    )?;
    emit_kde_plot(&report.kde, &dir.join("plots/kde_lengths.svg"))?;
    files.plots = vec![
        "plots/scatter.svg".into(),
        "plots/scatter.csv".into(),
        "plots/kde_lengths.svg".into(),
    ];
    files.tables = tables;
    files.timing = timing;

    let failures: Vec<Value> = report
        .grid
        .trials
        .iter()
        .filter(|t| !t.succeeded())
        .map(|t| json!({ "config_id": t.config_id, "reason": t.error }))
        .collect();
    let master = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "tool_version": report.tool_version,
        "master_seed": report.master_seed,
        "stage_seeds": report.stage_seeds,
        "corpus_stats": report.corpus_stats,
        "retained_stats": report.retained_stats,
        "sample_plan": report.sample_plan,
        "shortfalls": report.shortfalls,
        "outliers": report.outliers,
        "grid": report.grid,
        "chosen_config": {
            "config_id": win.config_id,
            "config": win.config,
            "k": win.k_used,
            "k_silhouette": win.k_silhouette,
            "k_elbow": win.k_elbow,
            "silhouette_mean": win.silhouette_mean,
            "ci_low": win.ci_low,
            "ci_high": win.ci_high,
        },
        "k_diagnostics": win.diagnostics,
        "exemplars": report.exemplars,
        "labels": report.labels,
        "label_error": report.label_error,
        "unlabeled_clusters": report.unlabeled_clusters(),
        "frequency_table": report.frequency,
        "kde": report.kde.iter().map(|c| json!({
            "name": c.name,
            "bandwidth": c.bandwidth,
            "bandwidth_rule": c.bandwidth_rule,
            "grid_points": c.grid.len(),
        })).collect::<Vec<_>>(),
        "failures": failures,
        "artifacts": {
            "tables": files.tables,
            "timing": files.timing,
            "plots": files.plots,
        },
    });
    let path = dir.join(MASTER_REPORT);
    let text = serde_json::to_string_pretty(&master)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(files)
}

/// Checks a master report against schema version 1: required keys, their
/// JSON types, and that every listed artifact exists under `dir`.
pub fn validate_master_report(value: &Value, dir: &Path) -> Result<()> {
    let bad = |m: String| Error::Parse {
        path: dir.join(MASTER_REPORT),
        message: m,
    };
    let obj = value
        .as_object()
        .ok_or_else(|| bad("report is not an object".into()))?;
    for key in REQUIRED_KEYS {
        if !obj.contains_key(key) {
            return Err(bad(format!("missing key {key:?}")));
        }
    }
    if obj["schema_version"].as_u64() != Some(REPORT_SCHEMA_VERSION as u64) {
        return Err(bad("unsupported schema_version".into()));
    }
    for key in [
        "shortfalls",
        "labels",
        "unlabeled_clusters",
        "failures",
        "k_diagnostics",
    ] {
        if !obj[key].is_array() {
            return Err(bad(format!("{key:?} is not an array")));
        }
    }
    for key in [
        "stage_seeds",
        "grid",
        "chosen_config",
        "frequency_table",
        "artifacts",
        "outliers",
    ] {
        if !obj[key].is_object() {
            return Err(bad(format!("{key:?} is not an object")));
        }
    }
    let ft = &obj["frequency_table"];
    let k = ft["cluster_ids"].as_array().map_or(0, Vec::len);
    let counts = ft["counts"]
        .as_array()
        .ok_or_else(|| bad("frequency_table.counts missing".into()))?;
    if counts
        .iter()
        .any(|r| r.as_array().map_or(true, |r| r.len() != k))
    {
        return Err(bad("frequency_table.counts has ragged rows".into()));
    }
    for group in ["tables", "timing", "plots"] {
        let list = obj["artifacts"][group]
            .as_array()
            .ok_or_else(|| bad(format!("artifacts.{group} missing")))?;
        for p in list {
            let rel = p
                .as_str()
                .ok_or_else(|| bad("artifact path is not a string".into()))?;
            if !dir.join(rel).is_file() {
                return Err(bad(format!("artifact {rel} does not exist")));
            }
        }
    }
    Ok(())
}
