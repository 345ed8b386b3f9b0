use std::path::{Path, PathBuf};

use orthobench::corpus::{
    compute_length_stats, filter_by_scope, filter_outliers, load_corpus, outlier_bounds,
    plan_total_sample, required_sample_size, stratified_sample, CorpusFormat, CorpusSchema,
    CorpusSource, FilterScope, OutlierMethod, PowerParams, PromptRecord, Tails,
};
use orthobench::synth::{write_mini_corpus, MINI_CORPORA, MINI_MODELS, MINI_SEED};
use orthobench::Error;
use proptest::prelude::*;

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn source(id: Option<&str>, path: PathBuf) -> CorpusSource {
    CorpusSource {
        corpus_id: id.map(str::to_string),
        path,
    }
}

#[test]
fn jsonl_rows_may_carry_their_own_corpus_tag() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "mixed.jsonl",
        "{\"id\":1,\"corpus_id\":\"a\",\"text\":\"héllo\"}\n{\"id\":2,\"corpus_id\":\"b\",\"text\":\"bye\"}\n",
    );
    let recs = load_corpus(&[source(None, p)], &CorpusSchema::default()).unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0].id, "1");
    assert_eq!(recs[0].corpus_id, "a");
    assert_eq!(recs[0].char_length, 5);
    assert_eq!(recs[1].corpus_id, "b");
}

#[test]
fn custom_field_names() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "c.jsonl",
        "{\"uid\":\"x\",\"prompt\":\"abc\"}\n",
    );
    let schema = CorpusSchema {
        id_field: "uid".into(),
        text_field: "prompt".into(),
        ..CorpusSchema::default()
    };
    let recs = load_corpus(&[source(Some("c"), p)], &schema).unwrap();
    assert_eq!(recs[0], PromptRecord::new("x", "c", "abc"));
}

#[test]
fn csv_and_tsv_synthesize_ids() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(
        dir.path(),
        "a.csv",
        "corpus_id,text\nq,\"one, two\"\nq,three\n",
    );
    let tsv = write(dir.path(), "b.tsv", "corpus_id\ttext\nr\tfour\n");
    let mut schema = CorpusSchema {
        format: CorpusFormat::Csv,
        ..CorpusSchema::default()
    };
    let a = load_corpus(&[source(None, csv)], &schema).unwrap();
    assert_eq!(a[0].id, "q-0");
    assert_eq!(a[0].text, "one, two");
    assert_eq!(a[1].id, "q-1");
    schema.format = CorpusFormat::Tsv;
    let b = load_corpus(&[source(None, tsv)], &schema).unwrap();
    assert_eq!(b[0].id, "r-0");
}

#[test]
fn bad_rows_name_file_and_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "bad.jsonl",
        "{\"id\":\"a\",\"text\":\"fine\"}\n{\"id\":\"b\",\"text\":\"  \"}\n",
    );
    match load_corpus(&[source(Some("c"), p)], &CorpusSchema::default()) {
        Err(Error::InvalidRow { row, path, .. }) => {
            assert_eq!(row, 1);
            assert!(path.ends_with("bad.jsonl"));
        }
        other => panic!("unexpected {other:?}"),
    }
    let p = write(dir.path(), "nojson.jsonl", "not json\n");
    assert!(matches!(
        load_corpus(&[source(Some("c"), p)], &CorpusSchema::default()),
        Err(Error::InvalidRow { row: 0, .. })
    ));
    let missing = dir.path().join("absent.jsonl");
    assert!(matches!(
        load_corpus(&[source(Some("c"), missing)], &CorpusSchema::default()),
        Err(Error::Io { .. })
    ));
}

#[test]
fn duplicate_ids_across_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.jsonl", "{\"id\":\"x\",\"text\":\"one\"}\n");
    let b = write(dir.path(), "b.jsonl", "{\"id\":\"x\",\"text\":\"two\"}\n");
    match load_corpus(
        &[source(Some("a"), a), source(Some("b"), b)],
        &CorpusSchema::default(),
    ) {
        Err(Error::DuplicateId { id, path }) => {
            assert_eq!(id, "x");
            assert!(path.ends_with("b.jsonl"));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn sample_size_reference_values() {
    let p = |d, alpha, power, tails| PowerParams {
        effect_size: d,
        alpha,
        power,
        tails,
    };
    assert_eq!(
        required_sample_size(&p(0.5, 0.05, 0.8, Tails::Two)).unwrap(),
        63
    );
    assert_eq!(
        required_sample_size(&p(0.5, 0.05, 0.8, Tails::One)).unwrap(),
        50
    );
    assert_eq!(
        required_sample_size(&p(0.8, 0.05, 0.8, Tails::Two)).unwrap(),
        25
    );
    assert_eq!(
        required_sample_size(&p(0.2, 0.05, 0.9, Tails::Two)).unwrap(),
        526
    );
    assert!(required_sample_size(&p(0.0, 0.05, 0.8, Tails::Two)).is_err());
    assert!(required_sample_size(&p(0.5, 1.0, 0.8, Tails::Two)).is_err());
    assert!(required_sample_size(&p(0.5, 0.5, 0.4, Tails::Two)).is_err());
}

#[test]
fn sample_plan_totals() {
    let plan = plan_total_sample(109, 15, 1.0, 5).unwrap();
    assert_eq!((plan.n_per_benchmark, plan.n_total), (1635, 8175));
    assert_eq!(plan_total_sample(109, 15, 1.2, 5).unwrap().n_total, 9810);
    assert!(plan_total_sample(109, 15, 0.9, 5).is_err());
    assert!(plan_total_sample(0, 15, 1.0, 5).is_err());
}

fn records_with_lengths(groups: &[(&str, &[usize])]) -> Vec<PromptRecord> {
    let mut out = Vec::new();
    for (c, lengths) in groups {
        for (i, &l) in lengths.iter().enumerate() {
            out.push(PromptRecord::new(format!("{c}{i}"), *c, "x".repeat(l)));
        }
    }
    out
}

#[test]
fn per_corpus_scope_uses_each_corpus_distribution() {
    let recs = records_with_lengths(&[
        ("a", &[10, 11, 12, 13, 14, 200]),
        ("b", &[190, 195, 200, 205, 210, 10]),
    ]);
    let (pooled, bounds) =
        filter_by_scope(recs.clone(), OutlierMethod::Iqr, FilterScope::Pooled).unwrap();
    assert_eq!(bounds.len(), 1);
    assert!(pooled.removed.is_empty());
    let (per, bounds) = filter_by_scope(recs, OutlierMethod::Iqr, FilterScope::PerCorpus).unwrap();
    assert_eq!(bounds.len(), 2);
    let removed: Vec<&str> = per.removed.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(removed, vec!["a5", "b5"]);
}

#[test]
fn length_stats_per_corpus_and_pooled() {
    let recs = records_with_lengths(&[("a", &[1, 2, 3]), ("b", &[10])]);
    let s = compute_length_stats(&recs).unwrap();
    assert_eq!(s.per_corpus["a"].median, 2.0);
    assert_eq!(s.per_corpus["b"].count, 1);
    assert_eq!(s.pooled.count, 4);
    assert_eq!(s.pooled.mean, 4.0);
    assert!(compute_length_stats(&[]).is_err());
}

#[test]
fn stratified_sample_is_seeded_and_respects_quota() {
    let lens: Vec<usize> = (1..=50).collect();
    let short: Vec<usize> = (1..=5).collect();
    let recs = records_with_lengths(&[("a", &lens), ("b", &lens), ("c", &short)]);
    let plan = plan_total_sample(2, 5, 1.0, 3).unwrap();
    let s1 = stratified_sample(&recs, &plan, 7);
    let s2 = stratified_sample(&recs, &plan, 7);
    let s3 = stratified_sample(&recs, &plan, 8);
    assert_eq!(s1, s2);
    assert_ne!(s1.records, s3.records);
    for c in ["a", "b"] {
        assert_eq!(s1.records.iter().filter(|r| r.corpus_id == c).count(), 10);
    }
    assert_eq!(s1.records.iter().filter(|r| r.corpus_id == "c").count(), 5);
    assert_eq!(s1.shortfalls.len(), 1);
    assert_eq!(s1.shortfalls[0].corpus_id, "c");
    assert_eq!(
        (s1.shortfalls[0].requested, s1.shortfalls[0].available),
        (10, 5)
    );
}

#[test]
fn bundled_mini_corpus_regenerates_byte_for_byte() {
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mini");
    let dir = tempfile::tempdir().unwrap();
    write_mini_corpus(dir.path(), MINI_SEED).unwrap();
    let mut files: Vec<String> = MINI_CORPORA
        .iter()
        .map(|c| format!("corpora/{c}.jsonl"))
        .collect();
    files.extend(MINI_MODELS.iter().map(|m| format!("vectors/{m}.vec")));
    for f in files {
        let fresh = std::fs::read(dir.path().join(&f)).unwrap();
        let shipped = std::fs::read(bundled.join(&f)).unwrap();
        assert!(fresh == shipped, "{f} differs from the generator output");
    }
}

fn brute_quartiles(sorted: &[f64]) -> (f64, f64) {
    let q = |p: f64| {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    (q(0.25), q(0.75))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn filters_partition_and_match_brute_force(lengths in prop::collection::vec(1usize..2000, 5..200)) {
        let recs: Vec<PromptRecord> = lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| PromptRecord::new(i.to_string(), "c", "y".repeat(l)))
            .collect();
        let mut sorted: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
        sorted.sort_by(f64::total_cmp);
        let (q1, q3) = brute_quartiles(&sorted);
        let n = sorted.len() as f64;
        let mu = sorted.iter().sum::<f64>() / n;
        let sigma = (sorted.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n).sqrt();
        for (method, lo, hi) in [
            (OutlierMethod::Iqr, q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1)),
            (OutlierMethod::Zscore, mu - 3.0 * sigma, mu + 3.0 * sigma),
        ] {
            let b = outlier_bounds(&lengths, method).unwrap();
            let split = filter_outliers(recs.clone(), &b);
            prop_assert_eq!(split.retained.len() + split.removed.len(), recs.len());
            for r in &split.retained {
                let x = r.char_length as f64;
                prop_assert!(x >= lo - 1e-9 && x <= hi + 1e-9);
            }
            for r in &split.removed {
                let x = r.char_length as f64;
                prop_assert!(x < lo + 1e-9 || x > hi - 1e-9);
            }
        }
    }
}
