#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_orthobench"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn mini_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/mini")
        .canonicalize()
        .expect("bundled mini-corpus")
}

pub fn mini_config() -> PathBuf {
    mini_dir().join("mini.toml")
}

/// A fast config over the bundled corpora: 60 prompts per corpus, one
/// model, one UMAP cell and a fixed k.
pub fn quick_config(dir: &Path, labels: &str) -> PathBuf {
    let mini = mini_dir();
    let sources: Vec<String> = ["alpha", "bravo", "charlie", "delta", "echo"]
        .iter()
        .map(|c| {
            format!(
                "{{ corpus_id = \"{c}\", path = \"{}\" }}",
                mini.join(format!("corpora/{c}.jsonl")).display()
            )
        })
        .collect();
    let text = format!(
        r#"schema_version = 1
seed = 7
output_dir = "out"

[corpus]
sources = [{sources}]

[sampling]
n_per_cluster = 4
k_max = 15

[embeddings]
models = [{{ id = "pseudo-mpnet-64", path = "{vec}" }}]

[grid]
metrics = ["euclidean"]
umap_neighbors = [15]
umap_epochs = 100
tsne_perplexities = []
restarts = 2
bootstrap_samples = 100

[cluster]
k = 6

[labels]
{labels}
"#,
        sources = sources.join(", "),
        vec = mini.join("vectors/pseudo-mpnet-64.vec").display(),
    );
    let path = dir.join("quick.toml");
    std::fs::write(&path, text).unwrap();
    path
}

/// Chat-completions stand-in that always answers `answer`.
pub fn chat_server(answer: &'static str) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!(
        "http://{}/v1/chat/completions",
        listener.local_addr().unwrap()
    );
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                let mut line = String::new();
                loop {
                    line.clear();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        return;
                    }
                    let l = line.trim_end();
                    if l.is_empty() {
                        break;
                    }
                    if let Some(v) = l.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                }
                let mut body = vec![0u8; len];
                let _ = reader.read_exact(&mut body);
                let reply = serde_json::json!({
                    "choices": [{ "message": { "role": "assistant", "content": answer } }]
                })
                .to_string();
                let _ = write!(
                    stream,
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
            });
        }
    });
    url
}

pub fn dead_endpoint() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    format!("http://{addr}/v1/chat/completions")
}
