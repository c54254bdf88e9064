//! Cosine-thresholded neighborhoods around anchor words.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::embeddings::{cosine_scores, rank_order, EmbeddingSpace};
use crate::error::{Error, Result};

/// Default minimum number of paired training instances for a neighborhood
/// to be used in an experiment.
pub const DEFAULT_MIN_TRAIN: usize = 50;

/// All words whose cosine to the anchor is at least `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub anchor: String,
    pub anchor_vector: Vec<f64>,
    pub threshold: f64,
    /// `(word, cosine to anchor)`, best first, ties by vocabulary index.
    pub members: Vec<(String, f64)>,
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.members.iter().any(|(w, _)| w == word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(|(w, _)| w.as_str())
    }
}

fn check_threshold(s: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "threshold {s} outside [-1, 1]"
        )))
    }
}

fn anchor_scores(space: &EmbeddingSpace, anchor: &str) -> Result<(usize, Vec<f64>)> {
    let idx = space.require(anchor)?;
    let mut scores = cosine_scores(space, space.row(idx))?;
    // self-similarity is 1 by definition; avoid rounding pushing it below s = 1
    scores[idx] = 1.0;
    Ok((idx, scores))
}

/// Builds `N(anchor, s)` by an exhaustive scan of the vocabulary.
pub fn build_neighborhood(space: &EmbeddingSpace, anchor: &str, s: f64) -> Result<Neighborhood> {
    check_threshold(s)?;
    let (idx, scores) = anchor_scores(space, anchor)?;
    let mut hits: Vec<(f64, usize)> = scores
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c >= s)
        .map(|(i, c)| (c, i))
        .collect();
    hits.sort_unstable_by(rank_order);
    Ok(Neighborhood {
        anchor: anchor.to_owned(),
        anchor_vector: space.row(idx).to_vec(),
        threshold: s,
        members: hits
            .into_iter()
            .map(|(c, i)| (space.word(i).to_owned(), c))
            .collect(),
    })
}

/// Member counts of `N(anchor, s)` for each threshold, which must be
/// strictly descending.
pub fn growth_profile(
    space: &EmbeddingSpace,
    anchor: &str,
    thresholds: &[f64],
) -> Result<Vec<(f64, usize)>> {
    for &s in thresholds {
        check_threshold(s)?;
    }
    if thresholds.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidArgument(
            "thresholds must be strictly descending".into(),
        ));
    }
    let (_, mut scores) = anchor_scores(space, anchor)?;
    if thresholds.is_empty() {
        return Ok(Vec::new());
    }
    scores.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(thresholds
        .iter()
        .map(|&s| (s, scores.partition_point(|&c| c >= s)))
        .collect())
}

/// Two-column `s\tcount` TSV.
pub fn write_growth_tsv<W: Write>(mut w: W, profile: &[(f64, usize)]) -> std::io::Result<()> {
    writeln!(w, "s\tcount")?;
    for (s, n) in profile {
        writeln!(w, "{s}\t{n}")?;
    }
    Ok(())
}
