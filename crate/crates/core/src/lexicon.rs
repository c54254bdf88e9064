//! Bilingual dictionaries and the paired datasets built from neighborhoods.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::neighborhoods::Neighborhood;
use crate::seed;

/// Source word to an ordered, non-empty, duplicate-free list of gold targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BilingualLexicon {
    pub source_language: String,
    pub target_language: String,
    entries: Vec<(String, Vec<String>)>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconStats {
    pub lines: usize,
    pub pairs: usize,
    pub duplicates: usize,
    pub malformed: usize,
}

impl BilingualLexicon {
    pub fn new(source_language: &str, target_language: &str) -> Self {
        BilingualLexicon {
            source_language: source_language.to_owned(),
            target_language: target_language.to_owned(),
            ..Default::default()
        }
    }

    /// Adds a pair. Returns `false` if it was already present.
    pub fn insert(&mut self, source: &str, target: &str) -> bool {
        match self.index.get(source) {
            Some(&i) => {
                let targets = &mut self.entries[i].1;
                if targets.iter().any(|t| t == target) {
                    return false;
                }
                targets.push(target.to_owned());
            }
            None => {
                self.index.insert(source.to_owned(), self.entries.len());
                self.entries
                    .push((source.to_owned(), vec![target.to_owned()]));
            }
        }
        true
    }

    pub fn targets(&self, source: &str) -> Option<&[String]> {
        self.index
            .get(source)
            .map(|&i| self.entries[i].1.as_slice())
    }

    /// Number of distinct source words.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pair_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(s, t)| (s.as_str(), t.as_slice()))
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (s, ts) in self.iter() {
            for t in ts {
                writeln!(w, "{s}\t{t}")?;
            }
        }
        Ok(())
    }
}

/// Reads a whitespace-separated `source target` dictionary, one pair per line.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<(BilingualLexicon, LexiconStats)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (mut lex, stats) = read_lexicon(BufReader::new(file), path)?;
    // MUSE names dictionaries `en-de.txt` and friends
    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
        if let Some((src, tgt)) = stem.split_once('-') {
            lex.source_language = src.to_owned();
            lex.target_language = tgt.split('.').next().unwrap_or(tgt).to_owned();
        }
    }
    Ok((lex, stats))
}

pub fn read_lexicon<R: BufRead>(
    reader: R,
    origin: &Path,
) -> Result<(BilingualLexicon, LexiconStats)> {
    let mut lex = BilingualLexicon::new("src", "tgt");
    let mut stats = LexiconStats::default();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        stats.lines += 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[..] {
            [] => {}
            [s, t] => {
                if lex.insert(s, t) {
                    stats.pairs += 1;
                } else {
                    stats.duplicates += 1;
                }
            }
            _ => stats.malformed += 1,
        }
    }
    Ok((lex, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Full,
    Train,
    Test,
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Neighborhood { anchor: String, threshold: f64 },
    Global,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Neighborhood { anchor, threshold } => write!(f, "N({anchor}, {threshold})"),
            Provenance::Global => f.write_str("global"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub source: String,
    /// Row of the source word in its embedding space; doubles as a frequency
    /// rank for frequency-sorted `.vec` files.
    pub source_index: usize,
    pub vector: Vec<f64>,
    /// In-vocabulary gold targets, in lexicon order.
    pub gold: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationDataset {
    pub instances: Vec<Instance>,
    pub role: Role,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub candidates: usize,
    pub not_in_source_vocab: usize,
    pub not_in_lexicon: usize,
    pub no_target_in_vocab: usize,
    pub kept: usize,
}

impl TranslationDataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.instances.first().map(|i| i.vector.len())
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.instances.iter().map(|i| i.source.as_str())
    }

    /// Keeps only the first gold target of every instance.
    pub fn single_reference(mut self) -> Self {
        for inst in &mut self.instances {
            inst.gold.truncate(1);
        }
        self
    }

    /// `source\ttarget1|target2...` per line.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "source\ttargets")?;
        for inst in &self.instances {
            writeln!(w, "{}\t{}", inst.source, inst.gold.join("|"))?;
        }
        Ok(())
    }
}

/// Pairs `words` with their in-vocabulary translations. Words may repeat;
/// only the first occurrence is kept.
pub fn dataset_from_words<'a>(
    words: impl IntoIterator<Item = &'a str>,
    lexicon: &BilingualLexicon,
    src_space: &EmbeddingSpace,
    tgt_space: &EmbeddingSpace,
    provenance: Provenance,
) -> (TranslationDataset, BuildStats) {
    let mut stats = BuildStats::default();
    let mut seen = HashSet::new();
    let mut instances = Vec::new();
    for word in words {
        if !seen.insert(word) {
            continue;
        }
        stats.candidates += 1;
        let Some(src_idx) = src_space.index_of(word) else {
            stats.not_in_source_vocab += 1;
            continue;
        };
        let Some(targets) = lexicon.targets(word) else {
            stats.not_in_lexicon += 1;
            continue;
        };
        let gold: Vec<String> = targets
            .iter()
            .filter(|t| tgt_space.contains(t))
            .cloned()
            .collect();
        if gold.is_empty() {
            stats.no_target_in_vocab += 1;
            continue;
        }
        instances.push(Instance {
            source: word.to_owned(),
            source_index: src_idx,
            vector: src_space.row(src_idx).to_vec(),
            gold,
        });
    }
    stats.kept = instances.len();
    (
        TranslationDataset {
            instances,
            role: Role::Full,
            provenance,
        },
        stats,
    )
}

/// Members of `neighborhood` that have at least one in-vocabulary translation.
pub fn build_dataset(
    neighborhood: &Neighborhood,
    lexicon: &BilingualLexicon,
    src_space: &EmbeddingSpace,
    tgt_space: &EmbeddingSpace,
) -> Result<(TranslationDataset, BuildStats)> {
    let provenance = Provenance::Neighborhood {
        anchor: neighborhood.anchor.clone(),
        threshold: neighborhood.threshold,
    };
    let (ds, stats) = dataset_from_words(
        neighborhood.words(),
        lexicon,
        src_space,
        tgt_space,
        provenance,
    );
    if ds.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{}: {} members, {} not in lexicon, {} without in-vocabulary target",
            ds.provenance, stats.candidates, stats.not_in_lexicon, stats.no_target_in_vocab
        )));
    }
    Ok((ds, stats))
}

/// How test instances are chosen by [`split_dataset_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Uniform sample without replacement.
    #[default]
    Random,
    /// The `test_count` most frequent words (lowest vocabulary rows).
    Frequency,
}

pub fn split_dataset(
    ds: &TranslationDataset,
    test_count: usize,
    seed: u64,
) -> Result<(TranslationDataset, TranslationDataset)> {
    split_dataset_with(ds, test_count, seed, SplitMode::Random)
}

/// Partitions `ds` into train and test. Both halves keep the original order.
pub fn split_dataset_with(
    ds: &TranslationDataset,
    test_count: usize,
    seed: u64,
    mode: SplitMode,
) -> Result<(TranslationDataset, TranslationDataset)> {
    if test_count == 0 || test_count >= ds.len() {
        return Err(Error::InvalidArgument(format!(
            "test size {test_count} must be in 1..{} for {}",
            ds.len(),
            ds.provenance
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    match mode {
        SplitMode::Random => order.shuffle(&mut seed::rng(seed, 0x5b11)),
        SplitMode::Frequency => order.sort_by_key(|&i| ds.instances[i].source_index),
    }
    let mut is_test = vec![false; ds.len()];
    for &i in &order[..test_count] {
        is_test[i] = true;
    }
    let (test, train): (Vec<_>, Vec<_>) = ds
        .instances
        .iter()
        .cloned()
        .zip(is_test)
        .partition(|(_, t)| *t);
    let make = |v: Vec<(Instance, bool)>, role| TranslationDataset {
        instances: v.into_iter().map(|(i, _)| i).collect(),
        role,
        provenance: ds.provenance.clone(),
    };
    Ok((make(train, Role::Train), make(test, Role::Test)))
}

/// Deduplicated union of several training sets, dropping excluded sources.
pub fn union_excluding(
    sets: &[&TranslationDataset],
    exclude: &HashSet<&str>,
) -> TranslationDataset {
    let mut seen = HashSet::new();
    let instances = sets
        .iter()
        .flat_map(|ds| ds.instances.iter())
        .filter(|i| !exclude.contains(i.source.as_str()) && seen.insert(i.source.clone()))
        .cloned()
        .collect();
    TranslationDataset {
        instances,
        role: Role::Train,
        provenance: Provenance::Global,
    }
}
