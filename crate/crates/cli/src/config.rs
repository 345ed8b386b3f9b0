//! Declarative run configuration (TOML).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use orthobench::corpus::{
    CorpusFormat, CorpusSchema, CorpusSource, FilterScope, OutlierMethod, PowerParams, Tails,
};
use orthobench::embed::EmbeddingClientConfig;
use orthobench::geometry::MetricKind;
use orthobench::label::{ExemplarRule, LabelClientConfig, LabelOptions, Taxonomy};
use orthobench::optimize::{KMode, TrialSettings};
use orthobench::reduce::{ReducerParams, TsneParams, UmapParams};
use orthobench::report::{Bandwidth, DEFAULT_GRID_SIZE};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Stage};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub outliers: OutlierSection,
    pub embeddings: EmbeddingSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub cluster: ClusterSection,
    #[serde(default)]
    pub labels: LabelSection,
    #[serde(default)]
    pub report: ReportSection,
    /// Directory relative paths resolve against; the config file's folder.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("orthobench-out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    #[serde(default)]
    pub format: CorpusFormat,
    #[serde(default = "id_field")]
    pub id_field: String,
    #[serde(default = "corpus_field")]
    pub corpus_field: String,
    #[serde(default = "text_field")]
    pub text_field: String,
    pub sources: Vec<CorpusSource>,
}

fn id_field() -> String {
    "id".into()
}
fn corpus_field() -> String {
    "corpus_id".into()
}
fn text_field() -> String {
    "text".into()
}

impl CorpusSection {
    pub fn schema(&self) -> CorpusSchema {
        CorpusSchema {
            format: self.format,
            id_field: self.id_field.clone(),
            corpus_field: self.corpus_field.clone(),
            text_field: self.text_field.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub effect_size: f64,
    pub alpha: f64,
    pub power: f64,
    pub tails: Tails,
    /// Overrides the power calculation when set.
    pub n_per_cluster: Option<usize>,
    pub k_max: usize,
    pub coverage_multiplier: f64,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self {
            effect_size: 0.5,
            alpha: 0.05,
            power: 0.8,
            tails: Tails::Two,
            n_per_cluster: None,
            k_max: 15,
            coverage_multiplier: 1.0,
        }
    }
}

impl SamplingSection {
    pub fn power_params(&self) -> PowerParams {
        PowerParams {
            effect_size: self.effect_size,
            alpha: self.alpha,
            power: self.power,
            tails: self.tails,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutlierSection {
    pub enabled: bool,
    pub method: OutlierMethod,
    pub scope: FilterScope,
}

impl Default for OutlierSection {
    fn default() -> Self {
        Self {
            enabled: true,
            method: OutlierMethod::Zscore,
            scope: FilterScope::Pooled,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSection {
    #[serde(default = "yes")]
    pub normalize: bool,
    pub models: Vec<EmbeddingModel>,
}

fn yes() -> bool {
    true
}

/// One embedding model: a precomputed vector file, or a service to call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingModel {
    pub id: String,
    pub path: Option<PathBuf>,
    pub endpoint: Option<String>,
    /// Model name sent to the service; defaults to `id`.
    pub service_model: Option<String>,
    #[serde(default = "batch_size")]
    pub batch_size: usize,
    #[serde(default = "one")]
    pub parallelism: usize,
    pub token_env: Option<String>,
    #[serde(default = "timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "retries")]
    pub retries: usize,
}

fn batch_size() -> usize {
    64
}
fn one() -> usize {
    1
}
fn timeout_secs() -> u64 {
    60
}
fn retries() -> usize {
    3
}

impl EmbeddingModel {
    pub fn client_config(&self) -> Option<EmbeddingClientConfig> {
        let endpoint = self.endpoint.clone()?;
        let mut c = EmbeddingClientConfig::new(
            endpoint,
            self.service_model
                .clone()
                .unwrap_or_else(|| self.id.clone()),
        );
        c.batch_size = self.batch_size;
        c.parallelism = self.parallelism;
        c.token_env = self.token_env.clone();
        c.timeout = Duration::from_secs(self.timeout_secs);
        c.retries = self.retries;
        Some(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Embedding model ids to include; empty means all configured models.
    pub models: Vec<String>,
    pub metrics: Vec<MetricKind>,
    pub umap_neighbors: Vec<usize>,
    pub umap_min_dist: f64,
    pub umap_epochs: usize,
    pub tsne_perplexities: Vec<f64>,
    pub tsne_learning_rate: f64,
    pub tsne_iterations: usize,
    pub restarts: usize,
    pub bootstrap_samples: usize,
    /// Run cells one at a time so wall-clock timings do not contend.
    pub serial: bool,
    /// `auto` applies the timing rule; a config id pins the winner.
    pub winner: String,
}

impl Default for GridSection {
    fn default() -> Self {
        let t = TsneParams::default();
        Self {
            models: Vec::new(),
            metrics: vec![MetricKind::Euclidean, MetricKind::Mahalanobis],
            umap_neighbors: vec![15, 30],
            umap_min_dist: 0.1,
            umap_epochs: UmapParams::default().epochs,
            tsne_perplexities: vec![30.0, 50.0],
            tsne_learning_rate: t.learning_rate,
            tsne_iterations: t.iterations,
            restarts: TrialSettings::default().restarts,
            bootstrap_samples: TrialSettings::default().bootstrap_samples,
            serial: false,
            winner: "auto".into(),
        }
    }
}

impl GridSection {
    pub fn reducers(&self) -> Vec<ReducerParams> {
        let umap = self.umap_neighbors.iter().map(|&n| {
            ReducerParams::Umap(UmapParams {
                n_neighbors: n,
                min_dist: self.umap_min_dist,
                epochs: self.umap_epochs,
                ..UmapParams::default()
            })
        });
        let tsne = self.tsne_perplexities.iter().map(|&p| {
            ReducerParams::Tsne(TsneParams {
                perplexity: p,
                learning_rate: self.tsne_learning_rate,
                iterations: self.tsne_iterations,
                ..TsneParams::default()
            })
        });
        umap.chain(tsne).collect()
    }

    pub fn settings(&self) -> TrialSettings {
        TrialSettings {
            restarts: self.restarts,
            bootstrap_samples: self.bootstrap_samples,
            serial: self.serial,
        }
    }
}

/// `k = "auto"` searches `k_min..=k_max`; an integer fixes k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub k: KSetting,
    pub k_min: usize,
    pub k_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSetting {
    Fixed(usize),
    Mode(String),
}

impl Default for ClusterSection {
    fn default() -> Self {
        Self {
            k: KSetting::Mode("auto".into()),
            k_min: 2,
            k_max: 15,
        }
    }
}

impl ClusterSection {
    pub fn k_mode(&self) -> Result<KMode, String> {
        match &self.k {
            KSetting::Fixed(k) => Ok(KMode::Fixed(*k)),
            KSetting::Mode(s) if s.eq_ignore_ascii_case("auto") => Ok(KMode::Auto {
                min: self.k_min,
                max: self.k_max,
            }),
            KSetting::Mode(s) => s
                .parse()
                .map(KMode::Fixed)
                .map_err(|_| format!("cluster.k must be \"auto\" or an integer, got {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelSection {
    /// `cluster_id,label` table; bypasses the service when set.
    pub file: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub token_env: Option<String>,
    pub timeout_secs: u64,
    pub retries: usize,
    pub runs: usize,
    pub max_tiebreak_calls: usize,
    pub exemplars: usize,
    pub rule: ExemplarRule,
    /// Taxonomy file; the bundled twelve-category taxonomy when unset.
    pub taxonomy: Option<PathBuf>,
}

impl Default for LabelSection {
    fn default() -> Self {
        let o = LabelOptions::default();
        Self {
            file: None,
            endpoint: None,
            model: None,
            token_env: None,
            timeout_secs: 60,
            retries: 3,
            runs: o.runs,
            max_tiebreak_calls: o.max_tiebreak_calls,
            exemplars: 4,
            rule: ExemplarRule::NearestCentroid,
            taxonomy: None,
        }
    }
}

impl LabelSection {
    pub fn options(&self) -> LabelOptions {
        LabelOptions {
            runs: self.runs,
            max_tiebreak_calls: self.max_tiebreak_calls,
        }
    }

    pub fn client_config(&self) -> Option<LabelClientConfig> {
        let mut c = LabelClientConfig::new(
            self.endpoint.clone()?,
            self.model.clone().unwrap_or_default(),
        );
        c.token_env = self.token_env.clone();
        c.timeout = Duration::from_secs(self.timeout_secs);
        c.retries = self.retries;
        Some(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub kde_grid_size: usize,
    /// Fixed KDE bandwidth in characters; Silverman's rule when unset.
    pub kde_bandwidth: Option<f64>,
    /// Estimate length densities before outlier filtering instead of after.
    pub kde_prefilter: bool,
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            kde_grid_size: DEFAULT_GRID_SIZE,
            kde_bandwidth: None,
            kde_prefilter: false,
        }
    }
}

impl ReportSection {
    pub fn bandwidth(&self) -> Bandwidth {
        self.kde_bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub labels_from_file: Option<PathBuf>,
    pub winner: Option<String>,
    pub bench_serial: bool,
    pub bootstrap_samples: Option<usize>,
    pub restarts: Option<usize>,
    pub k: Option<String>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::validation(Stage::Config, msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    /// Command-line paths are taken relative to the working directory.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.output_dir {
            self.output_dir = absolute(p);
        }
        if let Some(p) = &o.labels_from_file {
            self.labels.file = Some(absolute(p));
        }
        if let Some(w) = &o.winner {
            self.grid.winner = w.clone();
        }
        if o.bench_serial {
            self.grid.serial = true;
        }
        if let Some(b) = o.bootstrap_samples {
            self.grid.bootstrap_samples = b;
        }
        if let Some(r) = o.restarts {
            self.grid.restarts = r;
        }
        if let Some(k) = &o.k {
            self.cluster.k = KSetting::Mode(k.clone());
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn corpus_sources(&self) -> Vec<CorpusSource> {
        self.corpus
            .sources
            .iter()
            .map(|s| CorpusSource {
                corpus_id: s.corpus_id.clone(),
                path: self.resolve(&s.path),
            })
            .collect()
    }

    pub fn grid_models(&self) -> Vec<String> {
        if self.grid.models.is_empty() {
            self.embeddings
                .models
                .iter()
                .map(|m| m.id.clone())
                .collect()
        } else {
            self.grid.models.clone()
        }
    }

    pub fn taxonomy(&self) -> Result<Taxonomy, CliError> {
        match &self.labels.taxonomy {
            Some(p) => Taxonomy::load(&self.resolve(p)).map_err(|e| invalid(e.to_string())),
            None => Ok(Taxonomy::bundled()),
        }
    }

    /// Checks everything that can be checked without doing work.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(invalid(format!(
                "schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.corpus.sources.is_empty() {
            return Err(invalid("corpus.sources is empty"));
        }
        for s in self.corpus_sources() {
            if !s.path.is_file() {
                return Err(invalid(format!(
                    "corpus file {} does not exist",
                    s.path.display()
                )));
            }
        }
        let s = &self.sampling;
        if s.n_per_cluster.is_none() {
            s.power_params()
                .validate()
                .map_err(|e| invalid(e.to_string()))?;
        }
        if s.n_per_cluster == Some(0) || s.k_max == 0 || !(s.coverage_multiplier >= 1.0) {
            return Err(invalid(
                "sampling needs n_per_cluster >= 1, k_max >= 1, coverage_multiplier >= 1",
            ));
        }
        if self.embeddings.models.is_empty() {
            return Err(invalid("embeddings.models is empty"));
        }
        let mut ids = std::collections::HashSet::new();
        for m in &self.embeddings.models {
            if !ids.insert(m.id.as_str()) {
                return Err(invalid(format!("embedding model {} is listed twice", m.id)));
            }
            match (&m.path, &m.endpoint) {
                (Some(p), None) => {
                    let p = self.resolve(p);
                    if !p.is_file() {
                        return Err(invalid(format!(
                            "vector file {} does not exist",
                            p.display()
                        )));
                    }
                }
                (None, Some(_)) => {
                    if m.batch_size == 0 {
                        return Err(invalid(format!("model {}: batch_size must be >= 1", m.id)));
                    }
                }
                _ => {
                    return Err(invalid(format!(
                        "model {}: set exactly one of path or endpoint",
                        m.id
                    )))
                }
            }
        }
        for m in &self.grid.models {
            if !ids.contains(m.as_str()) {
                return Err(invalid(format!(
                    "grid model {m} is not configured under embeddings.models"
                )));
            }
        }
        let g = &self.grid;
        if g.metrics.is_empty() || (g.umap_neighbors.is_empty() && g.tsne_perplexities.is_empty()) {
            return Err(invalid(
                "grid needs at least one metric and one reducer setting",
            ));
        }
        if g.restarts == 0 {
            return Err(invalid("grid.restarts must be >= 1"));
        }
        if g.bootstrap_samples < orthobench::cluster::MIN_RESAMPLES {
            return Err(invalid(format!(
                "grid.bootstrap_samples must be >= {}",
                orthobench::cluster::MIN_RESAMPLES
            )));
        }
        let k_mode = self.cluster.k_mode().map_err(invalid)?;
        let cells = orthobench::optimize::build_grid(
            &self.grid_models(),
            &g.metrics,
            &g.reducers(),
            k_mode,
            0,
        )
        .map_err(|e| invalid(e.to_string()))?;
        if g.winner != "auto" && !cells.iter().any(|c| c.id() == g.winner) {
            return Err(invalid(format!(
                "grid.winner {:?} is not a grid cell",
                g.winner
            )));
        }
        let taxonomy = self.taxonomy()?;
        let l = &self.labels;
        match (&l.file, &l.endpoint) {
            (Some(f), _) => {
                orthobench::label::read_label_file(&self.resolve(f), &taxonomy)
                    .map_err(|e| invalid(e.to_string()))?;
            }
            (None, Some(_)) => {
                if l.model.as_deref().unwrap_or("").is_empty() {
                    return Err(invalid("labels.model is required with labels.endpoint"));
                }
                if l.runs == 0 {
                    return Err(invalid("labels.runs must be >= 1"));
                }
            }
            (None, None) => {
                return Err(invalid(
                    "set labels.file or labels.endpoint (or pass --labels-from-file)",
                ));
            }
        }
        if l.exemplars == 0 {
            return Err(invalid("labels.exemplars must be >= 1"));
        }
        if self.report.kde_grid_size < 2 {
            return Err(invalid("report.kde_grid_size must be >= 2"));
        }
        if let Some(h) = self.report.kde_bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid("report.kde_bandwidth must be positive"));
            }
        }
        Ok(())
    }

    pub fn stage_seeds(&self) -> BTreeMap<String, u64> {
        crate::pipeline::STAGES
            .iter()
            .map(|s| (s.to_string(), orthobench::seed::derive_seed(self.seed, s)))
            .collect()
    }
}

fn absolute(p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir()
            .map(|d| d.join(p))
            .unwrap_or_else(|_| p.to_path_buf())
    }
}
