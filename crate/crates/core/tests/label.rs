mod common;

use std::sync::atomic::Ordering;
use std::time::Duration;

use common::{dead_endpoint, serve, Reply};
use orthobench::cluster::kmeans_fit;
use orthobench::corpus::PromptRecord;
use orthobench::geometry::Metric;
use orthobench::label::{
    extract_exemplars, read_label_file, render_prompt, request_labels, ExemplarRule,
    HttpLabelOracle, LabelClientConfig, LabelOptions, LabelOracle, Taxonomy, OTHER,
};
use orthobench::synth::gaussian_blobs;
use orthobench::Error;

fn chat(content: &str) -> Reply {
    Reply::ok(
        serde_json::json!({
            "choices": [{ "message": { "role": "assistant", "content": content } }]
        })
        .to_string(),
    )
}

fn client(url: &str) -> HttpLabelOracle {
    let mut cfg = LabelClientConfig::new(url, "mock-labeler");
    cfg.backoff_base = Duration::from_millis(1);
    cfg.timeout = Duration::from_secs(5);
    cfg.retries = 2;
    HttpLabelOracle::new(cfg).unwrap()
}

fn setup() -> (Vec<PromptRecord>, Vec<orthobench::label::ExemplarSet>) {
    let blobs = gaussian_blobs::<f64>(3, 20, 3, 30.0, 5).unwrap();
    let coords = blobs.embedding.vectors.clone();
    let model = kmeans_fit(&coords, 3, &Metric::Euclidean, 7, 5).unwrap();
    let records: Vec<PromptRecord> = blobs
        .embedding
        .row_ids
        .iter()
        .zip(&blobs.labels)
        .map(|(id, l)| PromptRecord::new(id.clone(), "c", format!("topic {l} prompt {id}")))
        .collect();
    let ex = extract_exemplars(
        &model,
        &coords,
        &blobs.embedding.row_ids,
        4,
        ExemplarRule::NearestCentroid,
        &Metric::Euclidean,
    )
    .unwrap();
    (records, ex)
}

#[test]
fn exemplars_come_from_their_own_cluster() {
    let (records, ex) = setup();
    assert_eq!(ex.len(), 3);
    for set in &ex {
        assert_eq!(set.exemplar_ids.len(), 4);
        assert!(set.distances.windows(2).all(|w| w[0] <= w[1]));
        let topics: std::collections::HashSet<&str> = set
            .exemplar_ids
            .iter()
            .map(|id| {
                let r = records.iter().find(|r| &r.id == id).unwrap();
                &r.text[..7]
            })
            .collect();
        assert_eq!(topics.len(), 1);
    }
}

#[test]
fn majority_over_http() {
    let server = serve(|n, _| {
        chat(match n % 5 {
            0 | 1 | 2 => "Violence",
            3 => "Label: \"Threat\".",
            _ => "violence",
        })
    });
    let (records, mut ex) = setup();
    ex.truncate(1);
    let votes = request_labels(
        &client(&server.url),
        &ex,
        &records,
        &Taxonomy::bundled(),
        &LabelOptions::default(),
    )
    .unwrap();
    assert_eq!(votes.len(), 1);
    assert_eq!(votes[0].final_label, "Violence");
    assert_eq!(votes[0].runs.len(), 5);
    assert!((votes[0].agreement - 0.8).abs() < 1e-12);
    assert_eq!(server.hits.load(Ordering::SeqCst), 5);

    let body = &server.bodies.lock().unwrap()[0];
    assert_eq!(body["model"], "mock-labeler");
    let prompt = body["messages"][0]["content"].as_str().unwrap();
    for id in &ex[0].exemplar_ids {
        assert!(
            prompt.contains(id.as_str()),
            "prompt is missing exemplar {id}"
        );
    }
}

#[test]
fn off_taxonomy_answers_become_other() {
    let server = serve(|_, _| chat("Cooking Tips"));
    let (records, ex) = setup();
    let votes = request_labels(
        &client(&server.url),
        &ex,
        &records,
        &Taxonomy::bundled(),
        &LabelOptions {
            runs: 3,
            max_tiebreak_calls: 0,
        },
    )
    .unwrap();
    let ids: Vec<usize> = votes.iter().map(|v| v.cluster_id).collect();
    assert_eq!(ids, vec![0, 1, 2]);
    for v in votes {
        assert_eq!(v.final_label, OTHER);
        assert_eq!(v.unparseable, 3);
        assert_eq!(v.agreement, 0.0);
    }
}

#[test]
fn server_errors_are_retried() {
    let server = serve(|n, _| {
        if n < 2 {
            Reply::status(429)
        } else {
            chat("Profanity")
        }
    });
    let o = client(&server.url);
    assert_eq!(o.complete("x").unwrap(), "Profanity");
    assert_eq!(server.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn unreachable_label_service_is_a_service_error() {
    let (records, ex) = setup();
    let err = request_labels(
        &client(&dead_endpoint()),
        &ex,
        &records,
        &Taxonomy::bundled(),
        &LabelOptions::default(),
    )
    .unwrap_err();
    assert!(err.is_service(), "{err}");
    assert!(err.to_string().contains("3 attempt(s)"), "{err}");
}

#[test]
fn missing_token_variable_fails_before_any_request() {
    let mut cfg = LabelClientConfig::new(dead_endpoint(), "m");
    cfg.token_env = Some("ORTHOBENCH_TEST_LABEL_TOKEN_UNSET".into());
    assert!(matches!(HttpLabelOracle::new(cfg), Err(Error::Service(_))));
}

#[test]
fn prompt_is_deterministic_and_lists_every_label() {
    let t = Taxonomy::bundled();
    let a = render_prompt(&["first\nline", "second"], &t);
    let b = render_prompt(&["first\nline", "second"], &t);
    assert_eq!(a, b);
    for l in t.labels() {
        assert!(a.contains(&format!("- {l}")), "missing {l}");
    }
    assert!(a.contains("1. first line"));
}

#[test]
fn label_file_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let t = Taxonomy::bundled();
    let p = dir.path().join("labels.csv");
    std::fs::write(
        &p,
        "# comment\nCluster_ID,Label\n0, PII/Privacy\n2,criminal planning\n",
    )
    .unwrap();
    let m = read_label_file(&p, &t).unwrap();
    assert_eq!(m.len(), 2);
    assert_eq!(m[&0], "PII/Privacy");
    assert_eq!(m[&2], "Criminal Planning/Confessions");

    std::fs::write(&p, "cluster_id,label\n0,Gardening\n").unwrap();
    assert!(matches!(read_label_file(&p, &t), Err(Error::Parse { .. })));
    std::fs::write(&p, "cluster_id,label\n0,Other\n0,Threat\n").unwrap();
    assert!(matches!(read_label_file(&p, &t), Err(Error::Parse { .. })));
}

#[test]
fn bundled_mini_labels_parse() {
    let p = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mini/labels.csv");
    let m = read_label_file(&p, &Taxonomy::bundled()).unwrap();
    assert_eq!(
        m.keys().copied().collect::<Vec<_>>(),
        (0..6).collect::<Vec<_>>()
    );
}
