use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PromptRecord;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSource {
    /// Corpus tag applied to every row; when absent each row must carry one.
    #[serde(default)]
    pub corpus_id: Option<String>,
    pub path: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// One JSON object per line.
    #[default]
    Jsonl,
    /// Two columns `(corpus_id, text)` with a header row; ids are
    /// synthesized as `<corpus_id>-<row>`.
    Csv,
    Tsv,
}

/// Field mapping for line-delimited JSON corpora.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSchema {
    pub format: CorpusFormat,
    pub id_field: String,
    pub corpus_field: String,
    pub text_field: String,
}

impl Default for CorpusSchema {
    fn default() -> Self {
        Self {
            format: CorpusFormat::Jsonl,
            id_field: "id".into(),
            corpus_field: "corpus_id".into(),
            text_field: "text".into(),
        }
    }
}

/// Reads and concatenates every source into one record list.
pub fn load_corpus(sources: &[CorpusSource], schema: &CorpusSchema) -> Result<Vec<PromptRecord>> {
    let mut out = Vec::new();
    let mut seen: HashMap<String, PathBuf> = HashMap::new();
    for src in sources {
        let rows = match schema.format {
            CorpusFormat::Jsonl => read_jsonl(src, schema)?,
            CorpusFormat::Csv => read_delimited(src, b',')?,
            CorpusFormat::Tsv => read_delimited(src, b'\t')?,
        };
        for r in rows {
            if seen.insert(r.id.clone(), src.path.clone()).is_some() {
                return Err(Error::DuplicateId {
                    id: r.id,
                    path: src.path.clone(),
                });
            }
            out.push(r);
        }
    }
    Ok(out)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn row_error(path: &Path, row: usize, message: impl Into<String>) -> Error {
    Error::InvalidRow {
        path: path.to_path_buf(),
        row,
        message: message.into(),
    }
}

fn string_field(obj: &serde_json::Map<String, serde_json::Value>, field: &str) -> Option<String> {
    match obj.get(field)? {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn read_jsonl(src: &CorpusSource, schema: &CorpusSchema) -> Result<Vec<PromptRecord>> {
    let path = &src.path;
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    let mut row = 0usize;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| row_error(path, row, format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| row_error(path, row, "expected a JSON object"))?;
        let id = string_field(obj, &schema.id_field)
            .ok_or_else(|| row_error(path, row, format!("missing field {:?}", schema.id_field)))?;
        let text = string_field(obj, &schema.text_field).ok_or_else(|| {
            row_error(path, row, format!("missing field {:?}", schema.text_field))
        })?;
        let corpus_id = match &src.corpus_id {
            Some(c) => c.clone(),
            None => string_field(obj, &schema.corpus_field).ok_or_else(|| {
                row_error(
                    path,
                    row,
                    format!("missing field {:?}", schema.corpus_field),
                )
            })?,
        };
        out.push(validated(path, row, id, corpus_id, text)?);
        row += 1;
    }
    Ok(out)
}

fn read_delimited(src: &CorpusSource, delimiter: u8) -> Result<Vec<PromptRecord>> {
    let path = &src.path;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(open(path)?);
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| row_error(path, row, e.to_string()))?;
        if rec.len() != 2 {
            return Err(row_error(
                path,
                row,
                format!("expected 2 columns (corpus_id, text), found {}", rec.len()),
            ));
        }
        let corpus_id = src.corpus_id.clone().unwrap_or_else(|| rec[0].to_string());
        let id = format!("{corpus_id}-{row}");
        out.push(validated(path, row, id, corpus_id, rec[1].to_string())?);
    }
    Ok(out)
}

fn validated(
    path: &Path,
    row: usize,
    id: String,
    corpus_id: String,
    text: String,
) -> Result<PromptRecord> {
    if text.trim().is_empty() {
        return Err(row_error(path, row, "empty text"));
    }
    if corpus_id.trim().is_empty() {
        return Err(row_error(path, row, "empty corpus id"));
    }
    Ok(PromptRecord::new(id, corpus_id, text))
}
