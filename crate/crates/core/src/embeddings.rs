//! Monolingual embedding spaces: `.vec` text loading, cosine similarity and
//! exhaustive top-k retrieval.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on unit norm for rows of a normalized space.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Vocabulary plus a dense row-major matrix of word vectors.
///
/// Immutable once built. Rows are stored contiguously so a space can be
/// shared across threads for read-only queries.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    language: String,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    norms: Vec<f64>,
    dim: usize,
    normalized: bool,
}

/// Counters reported by the loader.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub header_count: usize,
    pub lines_read: usize,
    pub kept: usize,
    pub duplicates: usize,
    pub malformed: usize,
    pub zero_vectors: usize,
}

/// A retrieved word with its cosine score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredWord {
    pub index: usize,
    pub word: String,
    pub score: f64,
}

/// Incrementally assembles a space, applying the dedup / zero-vector rules
/// shared by the loader and the synthetic generators.
#[derive(Debug)]
pub struct SpaceBuilder {
    language: String,
    dim: usize,
    normalize: bool,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    pub duplicates: usize,
    pub zero_vectors: usize,
}

impl SpaceBuilder {
    pub fn new(language: impl Into<String>, dim: usize, normalize: bool) -> Self {
        SpaceBuilder {
            language: language.into(),
            dim,
            normalize,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            duplicates: 0,
            zero_vectors: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Appends a word. Returns `Ok(false)` when the word was dropped as a
    /// duplicate or (under normalization) as a zero vector.
    pub fn push(&mut self, word: &str, vector: &[f64]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!("non-finite entry in {word:?}")));
        }
        if self.index.contains_key(word) {
            self.duplicates += 1;
            return Ok(false);
        }
        if self.normalize {
            let n = norm(vector);
            if n == 0.0 {
                self.zero_vectors += 1;
                return Ok(false);
            }
            self.data.extend(vector.iter().map(|v| v / n));
        } else {
            self.data.extend_from_slice(vector);
        }
        self.index.insert(word.to_owned(), self.words.len());
        self.words.push(word.to_owned());
        Ok(true)
    }

    pub fn finish(self) -> EmbeddingSpace {
        let norms = self.data.chunks_exact(self.dim.max(1)).map(norm).collect();
        EmbeddingSpace {
            language: self.language,
            words: self.words,
            index: self.index,
            data: self.data,
            norms,
            dim: self.dim,
            normalized: self.normalize,
        }
    }
}

impl EmbeddingSpace {
    /// Builds a space from parallel word and vector lists. Duplicates keep
    /// the first occurrence; zero vectors are dropped when normalizing.
    pub fn from_rows<S: AsRef<str>>(
        language: &str,
        words: &[S],
        vectors: &[Vec<f64>],
        normalize: bool,
    ) -> Result<Self> {
        if words.len() != vectors.len() {
            return Err(Error::InvalidArgument(format!(
                "{} words but {} vectors",
                words.len(),
                vectors.len()
            )));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "empty or zero-dimensional space".into(),
            ));
        }
        let mut builder = SpaceBuilder::new(language, dim, normalize);
        for (w, v) in words.iter().zip(vectors) {
            builder.push(w.as_ref(), v)?;
        }
        Ok(builder.finish())
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn with_language(mut self, language: impl Into<String>) -> Self {
        self.language = language.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, index: usize) -> &str {
        &self.words[index]
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn row_norm(&self, index: usize) -> f64 {
        self.norms[index]
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.row(i))
    }

    pub fn require(&self, word: &str) -> Result<usize> {
        self.index_of(word)
            .ok_or_else(|| Error::UnknownWord(word.to_owned()))
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Four independent accumulators so the loop vectorizes.
pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len().min(v.len());
    let (u, v) = (&u[..n], &v[..n]);
    let mut acc = [0.0f64; 4];
    let (uc, vc) = (u.chunks_exact(4), v.chunks_exact(4));
    let tail: f64 = uc
        .remainder()
        .iter()
        .zip(vc.remainder())
        .map(|(a, b)| a * b)
        .sum();
    for (a, b) in uc.zip(vc) {
        for i in 0..4 {
            acc[i] += a[i] * b[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// `u·v / (‖u‖‖v‖)`, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate("cosine of a zero-norm vector".into()));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Descending score, then ascending vocabulary index.
pub(crate) fn rank_order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Cosine of `query` against every row of `space`, in vocabulary order.
/// Zero rows score 0.
pub fn cosine_scores(space: &EmbeddingSpace, query: &[f64]) -> Result<Vec<f64>> {
    if query.len() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            actual: query.len(),
        });
    }
    let qn = norm(query);
    if qn == 0.0 {
        return Err(Error::Degenerate("zero query vector".into()));
    }
    Ok(space
        .rows()
        .zip(&space.norms)
        .map(|(row, &rn)| {
            if rn == 0.0 {
                0.0
            } else {
                (dot(row, query) / (qn * rn)).clamp(-1.0, 1.0)
            }
        })
        .collect())
}

/// The `k` highest-cosine words not in `exclude`, best first. Ties go to the
/// smaller vocabulary index. Returns fewer than `k` if the vocabulary runs out.
pub fn top_k_by_cosine(
    space: &EmbeddingSpace,
    query: &[f64],
    k: usize,
    exclude: Option<&HashSet<String>>,
) -> Result<Vec<ScoredWord>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let scores = cosine_scores(space, query)?;
    let mut ranked: Vec<(f64, usize)> = scores
        .into_iter()
        .enumerate()
        .filter(|(i, _)| exclude.is_none_or(|ex| !ex.contains(space.word(*i))))
        .map(|(i, s)| (s, i))
        .collect();
    if k < ranked.len() {
        ranked.select_nth_unstable_by(k - 1, rank_order);
        ranked.truncate(k);
    }
    ranked.sort_unstable_by(rank_order);
    Ok(ranked
        .into_iter()
        .map(|(score, index)| ScoredWord {
            index,
            word: space.word(index).to_owned(),
            score,
        })
        .collect())
}

/// Loads a `.vec` text file: a `<count> <dim>` header, then one
/// `<token> <floats...>` line per word.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    limit: Option<usize>,
    normalize: bool,
) -> Result<(EmbeddingSpace, LoadStats)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let language = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_embeddings(BufReader::new(file), limit, normalize, path)
        .map(|(space, stats)| (space.with_language(language), stats))
}

pub fn read_embeddings<R: BufRead>(
    mut reader: R,
    limit: Option<usize>,
    normalize: bool,
    origin: &Path,
) -> Result<(EmbeddingSpace, LoadStats)> {
    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|e| Error::io(origin, e))?;
    let bad_header = || Error::BadHeader {
        path: origin.to_owned(),
        line: header.trim_end().to_owned(),
    };
    let mut fields = header.split_whitespace();
    let count: usize = fields
        .next()
        .and_then(|f| f.parse().ok())
        .ok_or_else(bad_header)?;
    let dim: usize = fields
        .next()
        .and_then(|f| f.parse().ok())
        .filter(|&d| d > 0)
        .ok_or_else(bad_header)?;
    if fields.next().is_some() {
        return Err(bad_header());
    }

    let wanted = limit.map_or(count, |l| l.min(count));
    let mut stats = LoadStats {
        header_count: count,
        ..LoadStats::default()
    };
    let mut builder = SpaceBuilder::new("", dim, normalize);
    let mut vector = Vec::with_capacity(dim);
    let mut line = String::new();
    while builder.len() < wanted {
        line.clear();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| Error::io(origin, e))?;
        if n == 0 {
            break;
        }
        stats.lines_read += 1;
        let trimmed = line.trim_end_matches(['\n', '\r', ' ']);
        let mut parts = trimmed.split(' ');
        let token = parts.next().unwrap_or("");
        vector.clear();
        let mut ok = !token.is_empty();
        for p in parts {
            match p.parse::<f64>() {
                Ok(v) if v.is_finite() => vector.push(v),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok || vector.len() != dim {
            stats.malformed += 1;
            continue;
        }
        builder.push(token, &vector)?;
    }
    stats.duplicates = builder.duplicates;
    stats.zero_vectors = builder.zero_vectors;
    stats.kept = builder.len();
    Ok((builder.finish(), stats))
}

/// Writes a space in the `.vec` text format.
pub fn write_embeddings(space: &EmbeddingSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {}", space.len(), space.dim()).map_err(io)?;
    for (i, row) in space.rows().enumerate() {
        write!(w, "{}", space.word(i)).map_err(io)?;
        for v in row {
            write!(w, " {v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}
