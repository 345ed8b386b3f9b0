use std::collections::BTreeMap;
use std::path::Path;

use super::taxonomy::Taxonomy;
use crate::error::{Error, Result};

/// Reads a `cluster_id,label` table into canonical taxonomy labels.
pub fn read_label_file(path: &Path, taxonomy: &Taxonomy) -> Result<BTreeMap<usize, String>> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| parse_err(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| parse_err(format!("missing column {name:?}")))
    };
    let (ci, li) = (col("cluster_id")?, col("label")?);
    let mut out = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let row = line + 2;
        let cluster: usize = rec
            .get(ci)
            .unwrap_or_default()
            .parse()
            .map_err(|_| parse_err(format!("row {row}: bad cluster id")))?;
        let raw = rec.get(li).unwrap_or_default();
        let label = taxonomy
            .canonical(raw)
            .ok_or_else(|| parse_err(format!("row {row}: {raw:?} is not a taxonomy label")))?;
        if out.insert(cluster, label.to_string()).is_some() {
            return Err(parse_err(format!(
                "row {row}: cluster {cluster} listed twice"
            )));
        }
    }
    Ok(out)
}
