//! On-disk vector file.
//!
//! Layout: one ASCII header line
//!
//! ```text
//! ORTHOVEC 1 <encoding> <count> <dim> <model_id>\n
//! ```
//!
//! where `<encoding>` is `text` or `f32le` and `<model_id>` runs to the end
//! of the line. The body holds `count` rows in order:
//!
//! * `text`: `<id>\t<v_1> <v_2> ... <v_dim>\n`
//! * `f32le`: `u32` little-endian id byte length, the UTF-8 id bytes, then
//!   `dim` little-endian IEEE-754 `f32` values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub const VECTOR_FILE_MAGIC: &str = "ORTHOVEC";
const VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorEncoding {
    Text,
    F32Le,
}

impl VectorEncoding {
    fn tag(self) -> &'static str {
        match self {
            VectorEncoding::Text => "text",
            VectorEncoding::F32Le => "f32le",
        }
    }
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn write_vector_file<T: Scalar>(
    path: &Path,
    m: &EmbeddingMatrix<T>,
    encoding: VectorEncoding,
) -> Result<()> {
    if m.model_id.contains('\n') || m.model_id.trim().is_empty() {
        return Err(Error::InvalidParameter(
            "model id must be a non-empty single line".into(),
        ));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(
        w,
        "{VECTOR_FILE_MAGIC} {VERSION} {} {} {} {}",
        encoding.tag(),
        m.len(),
        m.dim(),
        m.model_id
    )
    .map_err(io)?;
    for (id, row) in m.row_ids.iter().zip(m.vectors.iter_rows()) {
        match encoding {
            VectorEncoding::Text => {
                if id.contains(['\t', '\n', '\r']) {
                    return Err(Error::InvalidParameter(format!(
                        "id {id:?} cannot be stored in a text vector file"
                    )));
                }
                let vals: Vec<String> = row.iter().map(|v| format!("{}", v.as_f64())).collect();
                writeln!(w, "{id}\t{}", vals.join(" ")).map_err(io)?;
            }
            VectorEncoding::F32Le => {
                let bytes = id.as_bytes();
                let len = u32::try_from(bytes.len())
                    .map_err(|_| Error::InvalidParameter("id too long".into()))?;
                w.write_all(&len.to_le_bytes()).map_err(io)?;
                w.write_all(bytes).map_err(io)?;
                for v in row {
                    let f = v.to_f32().unwrap_or(f32::NAN);
                    w.write_all(&f.to_le_bytes()).map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(io)
}

pub fn read_vector_file<T: Scalar>(path: &Path) -> Result<EmbeddingMatrix<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = String::new();
    r.read_line(&mut header).map_err(|e| Error::io(path, e))?;
    let header = header.trim_end_matches(['\n', '\r']);
    let mut parts = header.splitn(6, ' ');
    let mut next = |what: &str| {
        parts
            .next()
            .ok_or_else(|| parse_err(path, format!("header missing {what}")))
    };
    if next("magic")? != VECTOR_FILE_MAGIC {
        return Err(parse_err(path, "not a vector file (bad magic)"));
    }
    let version = next("version")?;
    if version != VERSION {
        return Err(parse_err(path, format!("unsupported version {version}")));
    }
    let encoding = match next("encoding")? {
        "text" => VectorEncoding::Text,
        "f32le" => VectorEncoding::F32Le,
        other => return Err(parse_err(path, format!("unknown encoding {other:?}"))),
    };
    let count: usize = next("count")?
        .parse()
        .map_err(|_| parse_err(path, "count is not an integer"))?;
    let dim: usize = next("dim")?
        .parse()
        .map_err(|_| parse_err(path, "dim is not an integer"))?;
    let model_id = next("model id")?.to_string();

    let mut ids = Vec::with_capacity(count);
    let mut data: Vec<T> = Vec::with_capacity(count * dim);
    match encoding {
        VectorEncoding::Text => {
            let mut line = String::new();
            for row in 0..count {
                line.clear();
                let got = r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
                if got == 0 {
                    return Err(parse_err(
                        path,
                        format!("expected {count} rows, found {row}"),
                    ));
                }
                let line = line.trim_end_matches(['\n', '\r']);
                let (id, rest) = line
                    .split_once('\t')
                    .ok_or_else(|| parse_err(path, format!("row {row}: missing tab after id")))?;
                let before = data.len();
                for tok in rest.split_ascii_whitespace() {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| parse_err(path, format!("row {row}: bad value {tok:?}")))?;
                    if !v.is_finite() {
                        return Err(Error::NonFinite(id.to_string()));
                    }
                    data.push(T::lit(v));
                }
                let width = data.len() - before;
                if width != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: width,
                    });
                }
                ids.push(id.to_string());
            }
        }
        VectorEncoding::F32Le => {
            let mut len_buf = [0u8; 4];
            let mut val = [0u8; 4];
            for row in 0..count {
                r.read_exact(&mut len_buf)
                    .map_err(|_| parse_err(path, format!("truncated at row {row}")))?;
                let len = u32::from_le_bytes(len_buf) as usize;
                let mut id = vec![0u8; len];
                r.read_exact(&mut id)
                    .map_err(|_| parse_err(path, format!("truncated id at row {row}")))?;
                let id = String::from_utf8(id)
                    .map_err(|_| parse_err(path, format!("row {row}: id is not UTF-8")))?;
                for _ in 0..dim {
                    r.read_exact(&mut val)
                        .map_err(|_| parse_err(path, format!("truncated vector at row {row}")))?;
                    let v = f32::from_le_bytes(val);
                    if !v.is_finite() {
                        return Err(Error::NonFinite(id));
                    }
                    data.push(T::from_f32(v).expect("f32 converts"));
                }
                ids.push(id);
            }
        }
    }
    let vectors = Matrix::from_vec(count, dim, data)?;
    EmbeddingMatrix::new(model_id, ids, vectors)
}
