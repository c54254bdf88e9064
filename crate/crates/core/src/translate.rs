//! Translation by nearest-cosine retrieval, through one map or through an
//! atlas of anchored local maps.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::embeddings::{cosine_similarity, top_k_by_cosine, EmbeddingSpace, ScoredWord};
use crate::error::{Error, Result};
use crate::lexicon::TranslationDataset;
use crate::mapper::{load_map, save_map, LinearMap};

const MANIFEST: &str = "manifest.tsv";

/// The `k` target words closest in cosine to `M · src_vector`.
pub fn translate_topk(
    map: &LinearMap,
    src_vector: &[f64],
    tgt_space: &EmbeddingSpace,
    k: usize,
) -> Result<Vec<ScoredWord>> {
    if map.d_tgt() != tgt_space.dim() {
        return Err(Error::DimensionMismatch {
            expected: tgt_space.dim(),
            actual: map.d_tgt(),
        });
    }
    let projected = map.apply(src_vector)?;
    top_k_by_cosine(tgt_space, &projected, k, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtlasEntry {
    pub anchor: String,
    pub anchor_vector: Vec<f64>,
    pub map: LinearMap,
}

/// Local maps keyed by anchor vectors, dispatched by nearest anchor cosine.
#[derive(Debug, Clone, PartialEq)]
pub struct MapAtlas {
    entries: Vec<AtlasEntry>,
    fallback: Option<LinearMap>,
    /// Below this best-anchor cosine the fallback map is used, if present.
    pub min_anchor_cosine: f64,
}

/// Which map served a query.
#[derive(Debug, Clone, PartialEq)]
pub enum MapChoice {
    Anchor { anchor: String, cosine: f64 },
    Fallback,
}

impl MapChoice {
    pub fn label(&self) -> &str {
        match self {
            MapChoice::Anchor { anchor, .. } => anchor,
            MapChoice::Fallback => "global",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseTranslation {
    pub hits: Vec<ScoredWord>,
    pub choice: MapChoice,
}

impl MapAtlas {
    pub fn new(entries: Vec<AtlasEntry>, fallback: Option<LinearMap>) -> Result<Self> {
        if entries.is_empty() && fallback.is_none() {
            return Err(Error::InvalidArgument(
                "atlas needs an entry or a fallback".into(),
            ));
        }
        let mut seen = HashSet::new();
        let shape = entries
            .first()
            .map(|e| e.map.matrix.shape())
            .or_else(|| fallback.as_ref().map(|m| m.matrix.shape()));
        for e in &entries {
            if !seen.insert(e.anchor.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate anchor {:?}",
                    e.anchor
                )));
            }
            if e.anchor_vector.len() != e.map.d_src() {
                return Err(Error::DimensionMismatch {
                    expected: e.map.d_src(),
                    actual: e.anchor_vector.len(),
                });
            }
        }
        let shapes = entries
            .iter()
            .map(|e| e.map.matrix.shape())
            .chain(fallback.iter().map(|m| m.matrix.shape()));
        for s in shapes {
            if Some(s) != shape {
                return Err(Error::InvalidArgument("atlas maps differ in shape".into()));
            }
        }
        Ok(MapAtlas {
            entries,
            fallback,
            min_anchor_cosine: 0.0,
        })
    }

    pub fn entries(&self) -> &[AtlasEntry] {
        &self.entries
    }

    pub fn fallback(&self) -> Option<&LinearMap> {
        self.fallback.as_ref()
    }

    /// Index of the entry whose anchor is most cosine-similar to `vector`,
    /// first entry on ties.
    pub fn nearest(&self, vector: &[f64]) -> Result<Option<(usize, f64)>> {
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in self.entries.iter().enumerate() {
            let c = cosine_similarity(&e.anchor_vector, vector)?;
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((i, c));
            }
        }
        Ok(best)
    }

    pub fn select(&self, vector: &[f64]) -> Result<(&LinearMap, MapChoice)> {
        match (self.nearest(vector)?, &self.fallback) {
            (Some((_, c)), Some(fb)) if c < self.min_anchor_cosine => Ok((fb, MapChoice::Fallback)),
            (Some((i, c)), _) => {
                let e = &self.entries[i];
                Ok((
                    &e.map,
                    MapChoice::Anchor {
                        anchor: e.anchor.clone(),
                        cosine: c,
                    },
                ))
            }
            (None, Some(fb)) => Ok((fb, MapChoice::Fallback)),
            (None, None) => Err(Error::InvalidArgument("empty atlas".into())),
        }
    }

    /// Writes one map file per entry plus `manifest.tsv`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = String::from("anchor\tfile\n");
        for (i, e) in self.entries.iter().enumerate() {
            let file = format!("map_{i:03}.txt");
            save_map(&e.map, dir.join(&file))?;
            manifest.push_str(&format!("{}\t{file}\n", e.anchor));
        }
        if let Some(fb) = &self.fallback {
            save_map(fb, dir.join("global.txt"))?;
            manifest.push_str("#fallback\tglobal.txt\n");
        }
        manifest.push_str(&format!("#min_anchor_cosine\t{}\n", self.min_anchor_cosine));
        let path = dir.join(MANIFEST);
        fs::File::create(&path)
            .and_then(|mut f| f.write_all(manifest.as_bytes()))
            .map_err(|e| Error::io(&path, e))
    }

    /// Reads an atlas directory; anchor vectors come from `src_space`.
    pub fn load(dir: impl AsRef<Path>, src_space: &EmbeddingSpace) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut entries = Vec::new();
        let mut fallback = None;
        let mut min_cos = 0.0;
        for line in text.lines().skip(1) {
            let Some((key, value)) = line.split_once('\t') else {
                continue;
            };
            match key {
                "#fallback" => fallback = Some(load_map(dir.join(value))?),
                "#min_anchor_cosine" => {
                    min_cos = value
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad min_anchor_cosine {value:?}")))?
                }
                anchor => {
                    let idx = src_space.require(anchor)?;
                    entries.push(AtlasEntry {
                        anchor: anchor.to_owned(),
                        anchor_vector: src_space.row(idx).to_vec(),
                        map: load_map(dir.join(value))?,
                    });
                }
            }
        }
        let mut atlas = MapAtlas::new(entries, fallback)?;
        atlas.min_anchor_cosine = min_cos;
        Ok(atlas)
    }
}

/// Translates `src_word` with the map of its nearest anchor.
pub fn piecewise_translate(
    atlas: &MapAtlas,
    src_word: &str,
    src_space: &EmbeddingSpace,
    tgt_space: &EmbeddingSpace,
    k: usize,
) -> Result<PiecewiseTranslation> {
    let idx = src_space.require(src_word)?;
    let vector = src_space.row(idx);
    let (map, choice) = atlas.select(vector)?;
    Ok(PiecewiseTranslation {
        hits: translate_topk(map, vector, tgt_space, k)?,
        choice,
    })
}

/// Percentage of test instances with a gold target in the top `k` when
/// each instance goes through the map its nearest anchor selects.
pub fn atlas_precision_at_k(
    atlas: &MapAtlas,
    test: &TranslationDataset,
    tgt_space: &EmbeddingSpace,
    k: usize,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no test instances for {}",
            test.provenance
        )));
    }
    let hits = test
        .instances
        .par_iter()
        .map(|inst| -> Result<bool> {
            let (map, _) = atlas.select(&inst.vector)?;
            let top = translate_topk(map, &inst.vector, tgt_space, k)?;
            Ok(top.iter().any(|h| inst.gold.contains(&h.word)))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(100.0 * hits.iter().filter(|&&h| h).count() as f64 / test.len() as f64)
}
