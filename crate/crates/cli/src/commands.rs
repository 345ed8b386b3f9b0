//! Stage subcommands.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use orthobench::cluster::{
    bootstrap_silhouette, kmeans_fit, select_k, KMeansModel, KSelectOptions,
};
use orthobench::corpus::{
    filter_by_scope, load_corpus, plan_total_sample, required_sample_size, CorpusFormat,
    CorpusSchema, CorpusSource, PowerParams, PromptRecord, Tails,
};
use orthobench::embed::{l2_normalize, read_vector_file};
use orthobench::geometry::{Metric, MetricKind};
use orthobench::label::{
    extract_exemplars, read_label_file, request_labels, ClusterLabel, ExemplarRule,
    HttpLabelOracle, LabelClientConfig, LabelOptions, Taxonomy,
};
use orthobench::reduce::{Embedding2D, ReducerParams, TsneParams, UmapParams};
use orthobench::report::{emit_kde_plot, emit_scatter, frequency_table, kde, Bandwidth, Table};
use orthobench::Matrix;
use serde_json::json;

use crate::cli::*;
use crate::config::{Overrides, RunConfig};
use crate::error::{CliError, Stage, StageExt};
use crate::pipeline::{headline, prepare, run_pipeline, search};

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::validation(Stage::Config, msg.into())
}

fn parse<T: std::str::FromStr<Err = orthobench::Error>>(s: &str) -> Result<T, CliError> {
    s.parse()
        .map_err(|e: orthobench::Error| invalid(e.to_string()))
}

fn overrides(o: &ConfigOverrides) -> Overrides {
    Overrides {
        seed: o.seed,
        output_dir: o.out.clone(),
        labels_from_file: o.labels_from_file.clone(),
        winner: o.winner.clone(),
        bench_serial: o.bench_serial,
        bootstrap_samples: o.bootstrap_samples,
        restarts: o.restarts,
        k: o.k.clone(),
    }
}

fn load_config(path: &Path, o: &ConfigOverrides) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&overrides(o));
    Ok(cfg)
}

pub fn pipeline(args: &PipelineArgs) -> Result<u8, CliError> {
    let cfg = load_config(&args.config, &args.overrides)?;
    let outcome = run_pipeline(&cfg)?;
    let grid = &outcome.report.grid;
    if args.json {
        let summary = json!({
            "output_dir": outcome.output_dir,
            "winner": grid.winning_trial().config_id,
            "k": grid.winning_trial().k_used,
            "selection_trace": grid.selection_trace,
            "unlabeled_clusters": outcome.report.unlabeled_clusters(),
            "label_error": outcome.report.label_error,
            "exit_code": outcome.exit_code(),
        });
        println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
    } else {
        println!("{}\n", grid.selection_trace);
        print!("{}", headline(grid));
        println!("\nreport written to {}", outcome.output_dir.display());
        let unlabeled = outcome.report.unlabeled_clusters();
        if !unlabeled.is_empty() {
            println!("unlabeled clusters: {unlabeled:?}");
        }
    }
    if let Some(e) = &outcome.label_failure {
        eprintln!("error: {e}");
    }
    Ok(outcome.exit_code())
}

pub fn grid(args: &GridArgs) -> Result<u8, CliError> {
    let cfg = load_config(&args.config, &args.overrides)?;
    cfg.validate()?;
    let prepared = prepare(&cfg)?;
    let report = search(&cfg, &prepared.sample.records)?;
    if let Some(path) = &args.table {
        let mut t = Table::new(&[
            "config_id",
            "status",
            "k",
            "silhouette_mean",
            "ci_low",
            "ci_high",
            "wall_time_s",
        ]);
        for tr in &report.trials {
            t.push(vec![
                tr.config_id.clone(),
                if tr.succeeded() { "ok" } else { "failed" }.into(),
                tr.k_used.to_string(),
                tr.silhouette_mean.to_string(),
                tr.ci_low.to_string(),
                tr.ci_high.to_string(),
                tr.wall_time.as_secs_f64().to_string(),
            ]);
        }
        t.write(path).stage(Stage::Report)?;
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    } else {
        println!("{}\n", report.selection_trace);
        print!("{}", headline(&report));
    }
    Ok(0)
}

pub fn sample_size(args: &SampleSizeArgs) -> Result<u8, CliError> {
    let tails = match args.tails.to_ascii_lowercase().as_str() {
        "one" | "1" => Tails::One,
        "two" | "2" => Tails::Two,
        t => return Err(invalid(format!("--tails must be one or two, got {t:?}"))),
    };
    let n = match args.n_per_cluster {
        Some(n) => n,
        None => required_sample_size(&PowerParams {
            effect_size: args.d,
            alpha: args.alpha,
            power: args.power,
            tails,
        })
        .map_err(|e| invalid(e.to_string()))?,
    };
    let plan = plan_total_sample(n, args.k_max, args.multiplier, args.benchmarks)
        .map_err(|e| invalid(e.to_string()))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&plan).expect("json"));
    } else {
        println!("per-cluster n:   {}", plan.n_per_cluster);
        println!("per-benchmark n: {}", plan.n_per_benchmark);
        println!("total:           {}", plan.n_total);
    }
    Ok(0)
}

fn load_records(c: &CorpusArgs) -> Result<Vec<PromptRecord>, CliError> {
    let format = match c.format.to_ascii_lowercase().as_str() {
        "jsonl" => CorpusFormat::Jsonl,
        "csv" => CorpusFormat::Csv,
        "tsv" => CorpusFormat::Tsv,
        f => return Err(invalid(format!("unknown corpus format {f:?}"))),
    };
    let sources: Vec<CorpusSource> = c
        .corpus
        .iter()
        .map(|s| match s.split_once('=') {
            Some((id, path)) => CorpusSource {
                corpus_id: Some(id.to_string()),
                path: PathBuf::from(path),
            },
            None => CorpusSource {
                corpus_id: None,
                path: PathBuf::from(s),
            },
        })
        .collect();
    for s in &sources {
        if !s.path.is_file() {
            return Err(CliError::validation(
                Stage::Corpus,
                format!("corpus file {} does not exist", s.path.display()),
            ));
        }
    }
    let schema = CorpusSchema {
        format,
        ..CorpusSchema::default()
    };
    load_corpus(&sources, &schema).stage(Stage::Corpus)
}

pub fn filter(args: &FilterArgs) -> Result<u8, CliError> {
    let method = parse(&args.method)?;
    let scope = match args.scope.as_str() {
        "pooled" => orthobench::corpus::FilterScope::Pooled,
        "per-corpus" => orthobench::corpus::FilterScope::PerCorpus,
        s => {
            return Err(invalid(format!(
                "--scope must be pooled or per-corpus, got {s:?}"
            )))
        }
    };
    let records = load_records(&args.corpus)?;
    let total = records.len();
    let (split, bounds) = filter_by_scope(records, method, scope).stage(Stage::Corpus)?;
    if let Some(out) = &args.out {
        let mut text = String::new();
        for r in &split.retained {
            text.push_str(
                &json!({"id": r.id, "corpus_id": r.corpus_id, "text": r.text}).to_string(),
            );
            text.push('\n');
        }
        std::fs::write(out, text).map_err(|source| {
            CliError::from_core(
                Stage::Report,
                orthobench::Error::Io {
                    path: out.clone(),
                    source,
                },
            )
        })?;
    }
    if args.json {
        let v = json!({"total": total, "retained": split.retained.len(), "removed": split.removed.len(), "bounds": bounds});
        println!("{}", serde_json::to_string_pretty(&v).expect("json"));
    } else {
        for b in &bounds {
            println!(
                "{}: keep lengths in [{:.2}, {:.2}]",
                b.scope, b.bounds.lower, b.bounds.upper
            );
        }
        println!(
            "retained {} of {} prompts ({} removed)",
            split.retained.len(),
            total,
            split.removed.len()
        );
    }
    Ok(0)
}

pub fn reduce(args: &ReduceArgs) -> Result<u8, CliError> {
    let metric_kind: MetricKind = parse(&args.metric)?;
    let params = match args.method.to_ascii_lowercase().as_str() {
        "umap" => ReducerParams::Umap(UmapParams {
            n_neighbors: args.n_neighbors,
            min_dist: args.min_dist,
            epochs: args.epochs,
            seed: args.seed,
            ..UmapParams::default()
        }),
        "tsne" | "t-sne" => ReducerParams::Tsne(TsneParams {
            perplexity: args.perplexity,
            learning_rate: args.learning_rate,
            iterations: args.iterations,
            seed: args.seed,
            ..TsneParams::default()
        }),
        m => return Err(invalid(format!("--method must be umap or tsne, got {m:?}"))),
    };
    if !args.vectors.is_file() {
        return Err(invalid(format!(
            "vector file {} does not exist",
            args.vectors.display()
        )));
    }
    let mut m = read_vector_file::<f64>(&args.vectors).stage(Stage::Embed)?;
    if !args.no_normalize {
        m = l2_normalize(m).stage(Stage::Embed)?;
    }
    let metric = Metric::fit(metric_kind, &m.vectors).stage(Stage::Grid)?;
    let layout = params.fit(&m, &metric).stage(Stage::Grid)?;
    layout.write_csv_file(&args.out).stage(Stage::Report)?;
    println!(
        "{} points reduced with {} in {:.2}s; coordinates in {}",
        layout.len(),
        params,
        layout.wall_time.as_secs_f64(),
        args.out.display()
    );
    Ok(0)
}

fn read_table(path: &Path, columns: &[&str]) -> Result<Vec<Vec<String>>, CliError> {
    let bad = |m: String| CliError::validation(Stage::Config, format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let idx = columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| bad(format!("missing column {c}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| bad(e.to_string()))?;
            Ok(idx
                .iter()
                .map(|&i| r.get(i).unwrap_or_default().to_string())
                .collect())
        })
        .collect()
}

fn read_coords(path: &Path) -> Result<(Vec<String>, Matrix<f64>), CliError> {
    let rows = read_table(path, &["id", "x", "y"])?;
    let mut ids = Vec::with_capacity(rows.len());
    let mut data = Vec::with_capacity(rows.len() * 2);
    for r in rows {
        for v in &r[1..] {
            data.push(
                v.parse::<f64>()
                    .map_err(|_| invalid(format!("{}: bad coordinate {v:?}", path.display())))?,
            );
        }
        ids.push(r[0].clone());
    }
    let n = ids.len();
    Ok((ids, Matrix::from_vec(n, 2, data).stage(Stage::Config)?))
}

fn read_assignments(path: &Path, ids: &[String]) -> Result<Vec<usize>, CliError> {
    let rows = read_table(path, &["id", "cluster"])?;
    let map: HashMap<String, usize> = rows
        .into_iter()
        .map(|r| {
            r[1].parse()
                .map(|c| (r[0].clone(), c))
                .map_err(|_| invalid(format!("{}: bad cluster id {:?}", path.display(), r[1])))
        })
        .collect::<Result<_, _>>()?;
    ids.iter()
        .map(|id| {
            map.get(id)
                .copied()
                .ok_or_else(|| invalid(format!("{id} has no cluster assignment")))
        })
        .collect()
}

fn align_records(
    records: Vec<PromptRecord>,
    ids: &[String],
) -> Result<Vec<PromptRecord>, CliError> {
    let mut by_id: HashMap<String, PromptRecord> =
        records.into_iter().map(|r| (r.id.clone(), r)).collect();
    ids.iter()
        .map(|id| {
            by_id
                .remove(id)
                .ok_or_else(|| invalid(format!("coordinate row {id} has no prompt record")))
        })
        .collect()
}

/// Centroids as per-cluster means of the coordinates.
fn model_from_assignments(coords: &Matrix<f64>, assignments: &[usize]) -> KMeansModel<f64> {
    let k = assignments.iter().map(|&c| c + 1).max().unwrap_or(0);
    let mut sums = vec![[0.0f64; 2]; k];
    let mut counts = vec![0usize; k];
    for (row, &c) in coords.iter_rows().zip(assignments) {
        sums[c][0] += row[0];
        sums[c][1] += row[1];
        counts[c] += 1;
    }
    let data = sums
        .iter()
        .zip(&counts)
        .flat_map(|(s, &n)| {
            let n = n.max(1) as f64;
            [s[0] / n, s[1] / n]
        })
        .collect();
    KMeansModel {
        k,
        centroids: Matrix::from_vec(k, 2, data).expect("k rows of 2"),
        assignments: assignments.to_vec(),
        inertia: 0.0,
        iterations_run: 0,
        seed: 0,
        inertia_trace: Vec::new(),
    }
}

pub fn cluster(args: &ClusterArgs) -> Result<u8, CliError> {
    let metric_kind: MetricKind = parse(&args.metric)?;
    let (ids, coords) = read_coords(&args.coords)?;
    let metric = Metric::fit(metric_kind, &coords).stage(Stage::Grid)?;
    let (model, per_k, k_sil, k_elbow) = if args.k.eq_ignore_ascii_case("auto") {
        let opts = KSelectOptions {
            restarts: args.restarts,
            bootstrap_samples: None,
        };
        let sel = select_k(&coords, &metric, args.k_min..=args.k_max, args.seed, &opts)
            .stage(Stage::Grid)?;
        let model = sel
            .model(sel.k_silhouette)
            .expect("selected k was fitted")
            .clone();
        (model, sel.per_k, Some(sel.k_silhouette), Some(sel.k_elbow))
    } else {
        let k: usize = args
            .k
            .parse()
            .map_err(|_| invalid(format!("--k must be auto or an integer, got {:?}", args.k)))?;
        let model = kmeans_fit(&coords, k, &metric, args.seed, args.restarts).stage(Stage::Grid)?;
        (model, Vec::new(), None, None)
    };
    let sil =
        orthobench::cluster::silhouette(&coords, &model.assignments, &metric).stage(Stage::Grid)?;
    let ci = if args.bootstrap_samples > 0 {
        Some(
            bootstrap_silhouette(
                &coords,
                &model.assignments,
                &metric,
                args.bootstrap_samples,
                args.seed,
            )
            .stage(Stage::Grid)?,
        )
    } else {
        None
    };
    let mut t = Table::new(&["id", "cluster"]);
    for (id, c) in ids.iter().zip(&model.assignments) {
        t.push(vec![id.clone(), c.to_string()]);
    }
    t.write(&args.out).stage(Stage::Report)?;
    if args.json {
        let v = json!({
            "k": model.k,
            "k_silhouette": k_sil,
            "k_elbow": k_elbow,
            "silhouette_mean": sil.mean,
            "ci": ci,
            "inertia": model.inertia,
            "per_k": per_k,
        });
        println!("{}", serde_json::to_string_pretty(&v).expect("json"));
    } else {
        for d in &per_k {
            println!(
                "k={:<3} inertia {:>14.4} silhouette {:.4}",
                d.k, d.inertia, d.silhouette
            );
        }
        if let (Some(s), Some(e)) = (k_sil, k_elbow) {
            println!("k by silhouette: {s}; k by elbow: {e}");
        }
        match ci {
            Some((lo, hi)) => println!(
                "k={} silhouette {:.4} [{lo:.4}, {hi:.4}]",
                model.k, sil.mean
            ),
            None => println!("k={} silhouette {:.4}", model.k, sil.mean),
        }
    }
    Ok(0)
}

fn load_taxonomy(path: &Option<PathBuf>) -> Result<Taxonomy, CliError> {
    match path {
        Some(p) => Taxonomy::load(p).map_err(|e| invalid(e.to_string())),
        None => Ok(Taxonomy::bundled()),
    }
}

pub fn label(args: &LabelArgs) -> Result<u8, CliError> {
    let metric_kind: MetricKind = parse(&args.metric)?;
    let rule: ExemplarRule = parse(&args.rule)?;
    let taxonomy = load_taxonomy(&args.taxonomy)?;
    let (ids, coords) = read_coords(&args.coords)?;
    let assignments = read_assignments(&args.assignments, &ids)?;
    let records = align_records(load_records(&args.corpus)?, &ids)?;
    let model = model_from_assignments(&coords, &assignments);
    let metric = Metric::fit(metric_kind, &coords).stage(Stage::Label)?;
    let exemplars = extract_exemplars(&model, &coords, &ids, args.exemplars, rule, &metric)
        .stage(Stage::Label)?;
    let labels: Vec<ClusterLabel> = if let Some(file) = &args.labels_from_file {
        let map = read_label_file(file, &taxonomy).map_err(|e| invalid(e.to_string()))?;
        (0..model.k)
            .map(|c| {
                map.get(&c).map_or_else(
                    || ClusterLabel::unavailable(c),
                    |l| ClusterLabel::from_file(c, l.clone()),
                )
            })
            .collect()
    } else {
        let endpoint = args
            .endpoint
            .clone()
            .ok_or_else(|| invalid("--endpoint or --labels-from-file is required"))?;
        let model_name = args
            .model
            .clone()
            .ok_or_else(|| invalid("--model is required with --endpoint"))?;
        let mut cfg = LabelClientConfig::new(endpoint, model_name);
        cfg.token_env = args.token_env.clone();
        cfg.retries = args.retries;
        cfg.timeout = std::time::Duration::from_secs(args.timeout_secs);
        let oracle = HttpLabelOracle::new(cfg).stage(Stage::Label)?;
        let opts = LabelOptions {
            runs: args.runs,
            ..LabelOptions::default()
        };
        request_labels(&oracle, &exemplars, &records, &taxonomy, &opts)
            .stage(Stage::Label)?
            .into_iter()
            .map(ClusterLabel::from_vote)
            .collect()
    };
    let mut t = Table::new(&["cluster_id", "label", "source", "agreement", "exemplars"]);
    for (l, e) in labels.iter().zip(&exemplars) {
        t.push(vec![
            l.cluster_id.to_string(),
            l.label.clone().unwrap_or_default(),
            l.source.as_str().into(),
            l.vote
                .as_ref()
                .map(|v| v.agreement.to_string())
                .unwrap_or_default(),
            e.exemplar_ids.join(";"),
        ]);
    }
    t.write(&args.out).stage(Stage::Report)?;
    for l in &labels {
        println!(
            "cluster {:>2}: {}",
            l.cluster_id,
            l.label.as_deref().unwrap_or("(unlabeled)")
        );
    }
    Ok(0)
}

pub fn report(args: &ReportArgs) -> Result<u8, CliError> {
    let taxonomy = load_taxonomy(&args.taxonomy)?;
    let (ids, coords) = read_coords(&args.coords)?;
    let assignments = read_assignments(&args.assignments, &ids)?;
    let records = align_records(load_records(&args.corpus)?, &ids)?;
    let labels: BTreeMap<usize, String> = match &args.labels {
        Some(p) => read_label_file(p, &taxonomy).map_err(|e| invalid(e.to_string()))?,
        None => BTreeMap::new(),
    };
    let bandwidth = args.kde_bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed);
    let table = frequency_table(&assignments, &labels, &records).stage(Stage::Report)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| invalid(format!("{}: {e}", args.out.display())))?;
    table
        .to_table()
        .write(&args.out.join("frequency.csv"))
        .stage(Stage::Report)?;
    let layout = Embedding2D {
        coords,
        row_ids: ids,
        params: ReducerParams::Umap(UmapParams::default()),
        wall_time: std::time::Duration::ZERO,
        objective: Vec::new(),
    };
    emit_scatter(
        &layout,
        &assignments,
        &labels,
        &records,
        &args.out.join("scatter.svg"),
    )
    .stage(Stage::Report)?;
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in &records {
        groups
            .entry(&r.corpus_id)
            .or_default()
            .push(r.char_length as f64);
    }
    let curves = groups
        .iter()
        .map(|(name, l)| kde(name, l, bandwidth, args.kde_grid_size))
        .collect::<orthobench::Result<Vec<_>>>()
        .stage(Stage::Report)?;
    emit_kde_plot(&curves, &args.out.join("kde_lengths.svg")).stage(Stage::Report)?;
    for (c, row) in table.corpus_ids.iter().zip(&table.counts) {
        println!("{c}: {row:?}");
    }
    println!("report written to {}", args.out.display());
    Ok(0)
}
