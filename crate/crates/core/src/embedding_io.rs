//! Embedding sets, label tables and the class divisions derived from them.
//!
//! Embeddings and labels usually come from different tools, so they are
//! always aligned by point id and never by row position.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Magic bytes of the raw-binary embedding format.
pub const EMB_MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("duplicate id {id:?} at row {row}")]
    DuplicateId { id: String, row: usize },
    #[error("malformed raw-binary file: {0}")]
    Binary(String),
    #[error("invalid embedding set: {0}")]
    Invalid(String),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("id {0:?} present in the embedding set but absent from the label table")]
    MissingLabel(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// `n` points in `d`-dimensional space, row `i` belonging to `ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    data: Vec<f64>,
    dim: usize,
}

impl EmbeddingSet {
    /// Builds a set from row-major data, checking every invariant.
    pub fn new(ids: Vec<String>, data: Vec<f64>, dim: usize) -> Result<Self, IoError> {
        if ids.is_empty() {
            return Err(IoError::Invalid("at least one point is required".into()));
        }
        if dim == 0 {
            return Err(IoError::Invalid("dimension must be at least 1".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(IoError::Invalid(format!(
                "expected {} coordinates for {} points of dimension {dim}, got {}",
                ids.len() * dim,
                ids.len(),
                data.len()
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for (row, id) in ids.iter().enumerate() {
            if id.is_empty() {
                return Err(IoError::Row {
                    row,
                    msg: "empty id".into(),
                });
            }
            if !seen.insert(id.as_str()) {
                return Err(IoError::DuplicateId {
                    id: id.clone(),
                    row,
                });
            }
            if let Some(v) = data[row * dim..(row + 1) * dim].iter().find(|v| !v.is_finite()) {
                return Err(IoError::Row {
                    row,
                    msg: format!("non-finite coordinate {v}"),
                });
            }
        }
        Ok(Self { ids, data, dim })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Returns a copy with every coordinate multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            ids: self.ids.clone(),
            data: self.data.iter().map(|v| v * s).collect(),
            dim: self.dim,
        }
    }
}

/// Loads an embeddings CSV with header `id,dim0,...,dim{d-1}`.
pub fn load_embeddings_csv(path: &Path) -> Result<EmbeddingSet, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_embeddings_csv(file)
}

pub fn read_embeddings_csv<R: Read>(reader: R) -> Result<EmbeddingSet, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || header.get(0).map(str::trim) != Some("id") {
        return Err(IoError::Header(
            "expected `id,dim0,dim1,...` as the first line".into(),
        ));
    }
    for (j, name) in header.iter().skip(1).enumerate() {
        if name.trim() != format!("dim{j}") {
            return Err(IoError::Header(format!(
                "column {} is {name:?}, expected \"dim{j}\"",
                j + 1
            )));
        }
    }
    let dim = header.len() - 1;
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut seen = HashSet::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != dim + 1 {
            return Err(IoError::Row {
                row,
                msg: format!("expected {} values, found {}", dim, record.len().saturating_sub(1)),
            });
        }
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(IoError::Row {
                row,
                msg: "empty id".into(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(IoError::DuplicateId { id, row });
        }
        for field in record.iter().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| IoError::Row {
                row,
                msg: format!("cannot parse {field:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(IoError::Row {
                    row,
                    msg: format!("non-finite coordinate {field:?}"),
                });
            }
            data.push(v);
        }
        ids.push(id);
    }
    EmbeddingSet::new(ids, data, dim)
}

pub fn write_embeddings_csv(set: &EmbeddingSet, path: &Path) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["id".to_string()];
    header.extend((0..set.dim()).map(|j| format!("dim{j}")));
    w.write_record(&header)?;
    for (i, id) in set.ids().iter().enumerate() {
        let mut rec = Vec::with_capacity(set.dim() + 1);
        rec.push(id.clone());
        rec.extend(set.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Loads a raw-binary embedding file plus its sidecar id list.
pub fn load_embeddings_raw(path: &Path, ids_path: &Path) -> Result<EmbeddingSet, IoError> {
    let mut bytes = Vec::new();
    File::open(path)
        .map_err(io_err(path))?
        .read_to_end(&mut bytes)
        .map_err(io_err(path))?;
    let ids_file = File::open(ids_path).map_err(io_err(ids_path))?;
    let ids = BufReader::new(ids_file)
        .lines()
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err(ids_path))?
        .into_iter()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect();
    decode_raw(&bytes, ids)
}

pub fn decode_raw(bytes: &[u8], ids: Vec<String>) -> Result<EmbeddingSet, IoError> {
    if bytes.len() < 12 || &bytes[..4] != EMB_MAGIC {
        return Err(IoError::Binary("missing EMB1 magic".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != n * dim * 4 {
        return Err(IoError::Binary(format!(
            "header declares {n}x{dim} floats but body holds {} bytes",
            body.len()
        )));
    }
    if ids.len() != n {
        return Err(IoError::Binary(format!(
            "sidecar lists {} ids for {n} rows",
            ids.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    EmbeddingSet::new(ids, data, dim)
}

/// Encodes coordinates as 32-bit floats; values not representable in f32 are rounded.
pub fn encode_raw(set: &EmbeddingSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + set.data().len() * 4);
    out.extend_from_slice(EMB_MAGIC);
    out.extend_from_slice(&(set.len() as u32).to_le_bytes());
    out.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    for v in set.data() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn write_embeddings_raw(set: &EmbeddingSet, path: &Path, ids_path: &Path) -> Result<(), IoError> {
    std::fs::write(path, encode_raw(set)).map_err(io_err(path))?;
    let mut ids = BufWriter::new(File::create(ids_path).map_err(io_err(ids_path))?);
    for id in set.ids() {
        writeln!(ids, "{id}").map_err(io_err(ids_path))?;
    }
    ids.flush().map_err(io_err(ids_path))
}

/// Per-point categorical labels keyed by point id.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTable {
    categories: Vec<String>,
    ids: Vec<String>,
    /// `rows[r][c]` is the class of `ids[r]` in `categories[c]`.
    rows: Vec<Vec<String>>,
    index: HashMap<String, usize>,
}

impl LabelTable {
    pub fn new(categories: Vec<String>, entries: Vec<(String, Vec<String>)>) -> Result<Self, IoError> {
        let mut seen = HashSet::new();
        for c in &categories {
            if c.trim().is_empty() {
                return Err(IoError::Header("empty category name".into()));
            }
            if !seen.insert(c.as_str()) {
                return Err(IoError::Header(format!("duplicate category {c:?}")));
            }
        }
        let mut ids = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (row, (id, labels)) in entries.into_iter().enumerate() {
            let id = id.trim().to_string();
            if id.is_empty() {
                return Err(IoError::Row {
                    row,
                    msg: "missing id".into(),
                });
            }
            if labels.len() != categories.len() {
                return Err(IoError::Row {
                    row,
                    msg: format!("expected {} labels, found {}", categories.len(), labels.len()),
                });
            }
            let labels: Vec<String> = labels.into_iter().map(|l| l.trim().to_string()).collect();
            if let Some(c) = labels.iter().position(String::is_empty) {
                return Err(IoError::Row {
                    row,
                    msg: format!("empty cell for category {:?} (id {id:?})", categories[c]),
                });
            }
            if index.insert(id.clone(), row).is_some() {
                return Err(IoError::DuplicateId { id, row });
            }
            ids.push(id);
            rows.push(labels);
        }
        Ok(Self {
            categories,
            ids,
            rows,
            index,
        })
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Class of point `id` in `category`, if both are known.
    pub fn label(&self, id: &str, category: &str) -> Option<&str> {
        let c = self.categories.iter().position(|x| x == category)?;
        let r = *self.index.get(id)?;
        Some(&self.rows[r][c])
    }
}

pub fn load_labels(path: &Path) -> Result<LabelTable, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_labels(file)
}

pub fn read_labels<R: Read>(reader: R) -> Result<LabelTable, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || header.get(0).map(str::trim) != Some("id") {
        return Err(IoError::Header(
            "expected `id,<category1>,...` as the first line".into(),
        ));
    }
    let categories: Vec<String> = header.iter().skip(1).map(|c| c.trim().to_string()).collect();
    let mut entries = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let mut fields = record.iter();
        let id = fields.next().unwrap_or("").to_string();
        entries.push((id, fields.map(str::to_string).collect()));
    }
    LabelTable::new(categories, entries)
}

pub fn write_labels(table: &LabelTable, path: &Path) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["id".to_string()];
    header.extend(table.categories.iter().cloned());
    w.write_record(&header)?;
    for (id, row) in table.ids.iter().zip(&table.rows) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().cloned());
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DivisionKind {
    Individual,
    Conjunctive,
}

/// The index set of all points carrying one semantic class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDivision {
    pub name: String,
    /// Category the class belongs to; `a&b` for conjunctive classes.
    pub category: String,
    pub kind: DivisionKind,
    /// Sorted, non-empty point indices.
    pub members: Vec<usize>,
}

impl ClassDivision {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Partitions the points of `set` by their class in `category`.
///
/// Divisions are ordered by class name and each member list is sorted.
pub fn divisions_from_labels(
    table: &LabelTable,
    set: &EmbeddingSet,
    category: &str,
) -> Result<Vec<ClassDivision>, IoError> {
    let c = table
        .categories
        .iter()
        .position(|x| x == category)
        .ok_or_else(|| IoError::UnknownCategory(category.to_string()))?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, id) in set.ids().iter().enumerate() {
        let r = *table
            .index
            .get(id)
            .ok_or_else(|| IoError::MissingLabel(id.clone()))?;
        groups.entry(table.rows[r][c].as_str()).or_default().push(i);
    }
    Ok(groups
        .into_iter()
        .map(|(name, members)| ClassDivision {
            name: name.to_string(),
            category: category.to_string(),
            kind: DivisionKind::Individual,
            members,
        })
        .collect())
}
