//! Dense matrix files and moment tables.
//!
//! JSON matrices: `{"dim": D, "entries": [...]}` with `D*D` entries in
//! row-major order, each either a real number or a `[re, im]` pair.
//!
//! Binary matrices: little-endian `u64` dimension followed by `D*D` row-major
//! entries, each as two `f64` values (re, im).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::moments::{Letter, MomentTable};
use crate::C64;

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Debug, Deserialize, Serialize)]
struct MatrixDoc {
    dim: usize,
    entries: Vec<Entry>,
}

pub fn matrix_from_json(text: &str) -> Result<CMat> {
    let doc: MatrixDoc = serde_json::from_str(text)?;
    if doc.entries.len() != doc.dim * doc.dim {
        return Err(Error::Parse(format!("expected {} entries, found {}", doc.dim * doc.dim, doc.entries.len())));
    }
    let v: Vec<C64> = doc
        .entries
        .iter()
        .map(|e| match *e {
            Entry::Real(x) => C64::new(x, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        })
        .collect();
    Array2::from_shape_vec((doc.dim, doc.dim), v).map_err(|e| Error::Parse(e.to_string()))
}

pub fn matrix_to_json(m: &CMat) -> Result<String> {
    square(m)?;
    let doc = MatrixDoc { dim: m.nrows(), entries: m.iter().map(|x| Entry::Complex([x.re, x.im])).collect() };
    Ok(serde_json::to_string(&doc)?)
}

pub fn matrix_from_bytes(bytes: &[u8]) -> Result<CMat> {
    if bytes.len() < 8 {
        return Err(Error::Parse("binary matrix shorter than its header".into()));
    }
    let dim = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
    let dim = usize::try_from(dim).map_err(|_| Error::Parse("dimension overflows".into()))?;
    let need = dim
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(16))
        .and_then(|n| n.checked_add(8))
        .ok_or_else(|| Error::Parse("dimension overflows".into()))?;
    if bytes.len() != need {
        return Err(Error::Parse(format!("binary matrix of dimension {dim} needs {need} bytes, found {}", bytes.len())));
    }
    let f = |i: usize| f64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().expect("8 bytes"));
    let v: Vec<C64> = (0..dim * dim).map(|i| C64::new(f(2 * i), f(2 * i + 1))).collect();
    Array2::from_shape_vec((dim, dim), v).map_err(|e| Error::Parse(e.to_string()))
}

pub fn matrix_to_bytes(m: &CMat) -> Result<Vec<u8>> {
    square(m)?;
    let mut out = Vec::with_capacity(8 + 16 * m.len());
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    for x in m.iter() {
        out.extend_from_slice(&x.re.to_le_bytes());
        out.extend_from_slice(&x.im.to_le_bytes());
    }
    Ok(out)
}

fn square(m: &CMat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::domain("only square matrices are stored"));
    }
    Ok(())
}

/// Reads either format; files whose first non-blank byte is `{` are JSON.
pub fn read_matrix(path: &Path) -> Result<CMat> {
    let bytes = fs::read(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
        Some(b'{') => {
            let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse(e.to_string()))?;
            matrix_from_json(text)
        }
        _ => matrix_from_bytes(&bytes),
    }
}

/// Writes JSON for `.json` paths and binary otherwise.
pub fn write_matrix(path: &Path, m: &CMat) -> Result<()> {
    let data = if path.extension().is_some_and(|e| e == "json") {
        matrix_to_json(m)?.into_bytes()
    } else {
        matrix_to_bytes(m)?
    };
    fs::write(path, data).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    Ok(())
}

/// `{"cyclic": bool, "moments": [{"word": [0, 1, 0], "value": x}, ..]}` where
/// words list operator ids and values are numbers or `[re, im]`.
#[derive(Debug, Deserialize, Serialize)]
pub struct MomentTableDoc {
    #[serde(default)]
    pub cyclic: bool,
    pub moments: Vec<MomentEntry>,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct MomentEntry {
    pub word: Vec<usize>,
    value: Entry,
}

pub fn moment_table_from_json(text: &str) -> Result<MomentTable> {
    let doc: MomentTableDoc = serde_json::from_str(text)?;
    let mut t = MomentTable::new(doc.cyclic);
    let mut seen = BTreeMap::new();
    for e in doc.moments {
        let v = match e.value {
            Entry::Real(x) => C64::new(x, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        };
        if seen.insert(e.word.clone(), v).is_some() {
            return Err(Error::Parse(format!("word {:?} listed twice", e.word)));
        }
        t.insert(e.word.iter().map(|&op| Letter::new(op)).collect(), v);
    }
    Ok(t)
}
