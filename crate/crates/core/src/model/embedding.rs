//! Token vocabulary and embedding tables.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stancemt_tensor::Array;

pub const UNK: &str = "<unk>";

/// Token ↔ row index. Row 0 is the shared unknown-token vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Sorted distinct tokens after [`UNK`].
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let distinct: BTreeSet<&str> = tokens.into_iter().filter(|t| *t != UNK).collect();
        let mut all = vec![UNK.to_string()];
        all.extend(distinct.into_iter().map(str::to_string));
        Self::from(all)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    /// Row indices for a sequence; an empty sequence becomes `[UNK]`.
    pub fn encode(&self, tokens: &[impl AsRef<str>]) -> Vec<usize> {
        if tokens.is_empty() {
            return vec![0];
        }
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMode {
    /// Learned table, initialized at random.
    Trainable,
    /// Pre-computed vectors loaded from a file and kept frozen.
    File,
}

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("embedding file is empty")]
    Empty,
}

/// Token vectors read from a whitespace-separated `token v1 … vd` file.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingFile {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingFile {
    pub fn parse(reader: impl BufRead) -> Result<Self, EmbeddingError> {
        let mut dim = None;
        let mut vectors = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| EmbeddingError::Io { path: "<reader>".into(), source })?;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let err = |msg: String| EmbeddingError::Parse { line: i + 1, msg };
            let values: Vec<f64> = parts
                .map(|p| p.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(|| err("non-numeric or non-finite component".into()))?;
            match dim {
                None if values.is_empty() => return Err(err(format!("token {token:?} has no vector"))),
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(err(format!("token {token:?} has {} components, expected {d}", values.len())))
                }
                _ => {}
            }
            vectors.insert(token.to_string(), values);
        }
        Ok(Self { dim: dim.ok_or(EmbeddingError::Empty)?, vectors })
    }

    pub fn read(path: &Path) -> Result<Self, EmbeddingError> {
        let file = std::fs::File::open(path).map_err(|source| EmbeddingError::Io { path: path.display().to_string(), source })?;
        Self::parse(std::io::BufReader::new(file))
    }

    /// Frozen table aligned with `vocab`; tokens without a vector use the
    /// file's `<unk>` row if present, otherwise zeros.
    pub fn table(&self, vocab: &Vocabulary) -> Array {
        let unk = self.vectors.get(UNK).cloned().unwrap_or_else(|| vec![0.0; self.dim]);
        let mut data = Vec::with_capacity(vocab.len() * self.dim);
        for tok in vocab.tokens() {
            data.extend_from_slice(self.vectors.get(tok).unwrap_or(&unk));
        }
        Array::new(vocab.len(), self.dim, data).expect("finite values checked on parse")
    }
}
