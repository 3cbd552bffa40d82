//! Precomputed sentence-embedding table and cosine similarity.
//!
//! File format: a `#dim <d>` header, then `key<TAB>v1,v2,...,vd` rows. Keys
//! are matched exactly (type labels, property labels, question texts).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// Builds a table from in-memory rows; all rows must share one dimension.
    pub fn from_rows(rows: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut table = Self::default();
        for (key, vector) in rows {
            if table.vectors.is_empty() {
                table.dimension = vector.len();
            } else if vector.len() != table.dimension {
                return Err(Error::DimensionMismatch {
                    expected: table.dimension,
                    found: vector.len(),
                });
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("non-finite value in embedding {key:?}")));
            }
            if table.vectors.insert(key.clone(), vector).is_some() {
                return Err(Error::Config(format!("duplicate embedding key {key:?}")));
            }
        }
        Ok(table)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    /// Cosine of the two stored vectors, or `None` when a key is missing or
    /// either vector is zero.
    pub fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        cosine(self.get(a)?, self.get(b)?).ok()
    }

    /// Total variant of [`similarity`](Self::similarity): misses score 0.
    pub fn similarity_or_zero(&self, a: &str, b: &str) -> f64 {
        self.similarity(a, b).unwrap_or(0.0)
    }
}

/// dot(a, b) / (|a| |b|), clamped to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm_a = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(Error::UndefinedCosine);
    }
    Ok((dot / (norm_a * norm_b)).clamp(-1.0, 1.0))
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(BufReader::new(file), path)
}

pub fn parse_embeddings(reader: impl BufRead, path: &Path) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::default();
    let mut declared: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#dim") {
            if declared.is_some() {
                return Err(Error::malformed(path, line_no, "repeated #dim header"));
            }
            let dim = rest
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::malformed(path, line_no, format!("bad #dim header: {e}")))?;
            declared = Some(dim);
            table.dimension = dim;
            continue;
        }
        let Some(dim) = declared else {
            return Err(Error::malformed(path, line_no, "missing #dim header"));
        };
        let Some((key, values)) = line.rsplit_once('\t') else {
            return Err(Error::malformed(path, line_no, "expected key<TAB>values"));
        };
        let vector = values
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(|v| {
                let x: f64 = v
                    .trim()
                    .parse()
                    .map_err(|e| Error::malformed(path, line_no, format!("bad number {v:?}: {e}")))?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(Error::malformed(path, line_no, format!("non-finite value {v:?}")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if vector.len() != dim {
            return Err(Error::malformed(
                path,
                line_no,
                format!("dimension mismatch: expected {dim}, found {}", vector.len()),
            ));
        }
        if table.vectors.insert(key.to_owned(), vector).is_some() {
            return Err(Error::malformed(path, line_no, format!("duplicate key {key:?}")));
        }
    }
    Ok(table)
}
