//! Batched client for a remote embedding service.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::EmbeddingMatrix;
use crate::corpus::PromptRecord;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct EmbeddingClientConfig {
    pub endpoint: String,
    pub model_id: String,
    pub batch_size: usize,
    pub timeout: Duration,
    pub retries: usize,
    /// Environment variable holding the bearer token; no auth header when unset.
    pub token_env: Option<String>,
    pub parallelism: usize,
    pub backoff_base: Duration,
}

impl EmbeddingClientConfig {
    pub fn new(endpoint: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model_id: model_id.into(),
            batch_size: 64,
            timeout: Duration::from_secs(60),
            retries: 3,
            token_env: None,
            parallelism: 1,
            backoff_base: Duration::from_millis(250),
        }
    }
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct EmbedRequest {
    pub model: String,
    pub inputs: Vec<String>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct EmbedResponse {
    pub model: String,
    pub embeddings: Vec<Vec<f32>>,
}

struct Batch {
    index: usize,
    vectors: Vec<Vec<f32>>,
}

pub fn fetch_embeddings<T: Scalar>(
    cfg: &EmbeddingClientConfig,
    records: &[PromptRecord],
) -> Result<EmbeddingMatrix<T>> {
    if cfg.batch_size == 0 {
        return Err(Error::InvalidParameter(
            "batch_size must be at least 1".into(),
        ));
    }
    let token = match &cfg.token_env {
        Some(var) => Some(
            std::env::var(var)
                .map_err(|_| Error::Service(format!("auth token variable {var} is not set")))?,
        ),
        None => None,
    };
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(cfg.timeout))
        .http_status_as_error(false)
        .build()
        .into();

    let chunks: Vec<&[PromptRecord]> = records.chunks(cfg.batch_size).collect();
    let mut done: Vec<Batch> = Vec::with_capacity(chunks.len());
    let wave = cfg.parallelism.max(1);
    for (w, group) in chunks.chunks(wave).enumerate() {
        let results: Vec<Result<Batch>> = std::thread::scope(|s| {
            let handles: Vec<_> = group
                .iter()
                .enumerate()
                .map(|(j, chunk)| {
                    let index = w * wave + j;
                    let agent = &agent;
                    let token = token.as_deref();
                    s.spawn(move || {
                        send_with_retry(agent, cfg, token, chunk, index)
                            .map(|vectors| Batch { index, vectors })
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("embedding worker panicked"))
                .collect()
        });
        for r in results {
            done.push(r?);
        }
    }
    done.sort_by_key(|b| b.index);

    let dim = done
        .first()
        .and_then(|b| b.vectors.first())
        .map_or(0, Vec::len);
    let mut data = Vec::with_capacity(records.len() * dim);
    for b in &done {
        for v in &b.vectors {
            if v.len() != dim {
                return Err(Error::DimDrift {
                    first: dim,
                    later: v.len(),
                    batch: b.index,
                });
            }
            data.extend(v.iter().map(|&x| T::from_f32(x).expect("f32 converts")));
        }
    }
    let ids = records.iter().map(|r| r.id.clone()).collect();
    EmbeddingMatrix::new(
        cfg.model_id.clone(),
        ids,
        Matrix::from_vec(records.len(), dim, data)?,
    )
}

fn send_with_retry(
    agent: &ureq::Agent,
    cfg: &EmbeddingClientConfig,
    token: Option<&str>,
    chunk: &[PromptRecord],
    index: usize,
) -> Result<Vec<Vec<f32>>> {
    let body = EmbedRequest {
        model: cfg.model_id.clone(),
        inputs: chunk.iter().map(|r| r.text.clone()).collect(),
    };
    let mut last = String::new();
    for attempt in 0..=cfg.retries {
        if attempt > 0 {
            std::thread::sleep(cfg.backoff_base * 2u32.saturating_pow(attempt as u32 - 1));
        }
        match send_once(agent, cfg, token, &body) {
            Ok(resp) if resp.embeddings.len() == chunk.len() => return Ok(resp.embeddings),
            Ok(resp) => {
                last = format!(
                    "service returned {} vectors for {} inputs",
                    resp.embeddings.len(),
                    chunk.len()
                )
            }
            Err(e) => last = e,
        }
        log::warn!(
            "embedding batch {index} attempt {} failed: {last}",
            attempt + 1
        );
    }
    Err(Error::Service(format!(
        "embedding batch {index} failed after {} attempt(s): {last}",
        cfg.retries + 1
    )))
}

fn send_once(
    agent: &ureq::Agent,
    cfg: &EmbeddingClientConfig,
    token: Option<&str>,
    body: &EmbedRequest,
) -> std::result::Result<EmbedResponse, String> {
    let mut req = agent.post(&cfg.endpoint);
    if let Some(t) = token {
        req = req.header("Authorization", &format!("Bearer {t}"));
    }
    let mut resp = req.send_json(body).map_err(|e| e.to_string())?;
    let status = resp.status();
    if !status.is_success() {
        return Err(format!("HTTP {}", status.as_u16()));
    }
    resp.body_mut()
        .read_json::<EmbedResponse>()
        .map_err(|e| format!("malformed response: {e}"))
}
