//! Map diagnostics and the neighborhood experiment.
//!
//! The experiment trains one local map per anchor neighborhood plus a global
//! map on the union of the local training sets, then cross-evaluates them on
//! each neighborhood's held-out words. Each report row carries:
//!
//! | column | meaning |
//! |--------|---------|
//! | Train / Test | paired instances in the neighborhood split |
//! | `cos(x0,xi)` | cosine between the reference anchor and this anchor |
//! | `M` | precision@k of the global map |
//! | `M^x0` | precision@k of the reference anchor's map |
//! | `M^xi` | precision@k of this anchor's own map |
//! | `Delta` | `M^xi − M^x0` |
//! | `cos(M^x0,M^xi)` | Frobenius cosine between the two local maps |
//! | `‖M‖` | Frobenius norm of this anchor's map |

use std::collections::HashSet;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::{cosine_similarity, top_k_by_cosine, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::lexicon::{
    build_dataset, split_dataset_with, union_excluding, BilingualLexicon, SplitMode,
    TranslationDataset,
};
use crate::mapper::{train, LinearMap, TrainConfig, Trainer};
use crate::neighborhoods::{build_neighborhood, DEFAULT_MIN_TRAIN};
use crate::seed::derive_seed;
use crate::translate::AtlasEntry;

/// Exact column headers of the emitted table.
pub const TABLE_HEADERS: [&str; 10] = [
    "Anchor Word",
    "Train",
    "Test",
    "cos(x0,xi)",
    "M",
    "M^x0",
    "M^xi",
    "Delta",
    "cos(M^x0,M^xi)",
    "||M||",
];

fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `tr(AᵀB) / √(tr(AᵀA) tr(BᵀB))`: the cosine of the vectorized matrices.
pub fn matrix_cosine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::InvalidArgument(format!(
            "shape mismatch {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (aa, bb) = (frobenius_inner(a, a), frobenius_inner(b, b));
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::Degenerate("matrix cosine with a zero matrix".into()));
    }
    Ok((frobenius_inner(a, b) / (aa * bb).sqrt()).clamp(-1.0, 1.0))
}

pub fn frobenius_norm(m: &DMatrix<f64>) -> f64 {
    frobenius_inner(m, m).sqrt()
}

/// Percentage of test instances with any gold target among the top `k`
/// retrieved over the full target vocabulary.
pub fn precision_at_k(
    map: &LinearMap,
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
    if map.d_tgt() != tgt_space.dim() {
        return Err(Error::DimensionMismatch {
            expected: tgt_space.dim(),
            actual: map.d_tgt(),
        });
    }
    let hits = test
        .instances
        .par_iter()
        .map(|inst| -> Result<bool> {
            let projected = map.apply(&inst.vector)?;
            let top = top_k_by_cosine(tgt_space, &projected, k, None)?;
            Ok(top.iter().any(|h| inst.gold.contains(&h.word)))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(100.0 * hits.iter().filter(|&&h| h).count() as f64 / test.len() as f64)
}

/// Sample Pearson correlation.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need two equal-length series of at least 2 points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson over average ranks).
pub fn spearman_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument("series differ in length".into()));
    }
    pearson_correlation(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub anchor: String,
    pub neighborhood_size: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub anchor_cos_to_x0: f64,
    pub acc_global: f64,
    pub acc_m_x0: f64,
    pub acc_m_xi: f64,
    pub delta: f64,
    pub map_cosine: f64,
    pub map_norm: f64,
}

impl ExperimentRow {
    pub fn is_consistent(&self) -> bool {
        let acc = |a: f64| (0.0..=100.0).contains(&a);
        (self.delta - (self.acc_m_xi - self.acc_m_x0)).abs() <= 1e-9
            && (-1.0..=1.0).contains(&self.map_cosine)
            && acc(self.acc_global)
            && acc(self.acc_m_x0)
            && acc(self.acc_m_xi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedAnchor {
    pub anchor: String,
    pub reason: String,
}

/// Settings for [`run_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// The first anchor is the reference `x0`.
    pub anchors: Vec<String>,
    pub threshold: f64,
    pub trainer: Trainer,
    pub train: TrainConfig,
    pub test_size: usize,
    pub seed: u64,
    /// Retrieval depth for precision@k.
    pub k: usize,
    pub min_train: usize,
    pub split_mode: SplitMode,
    pub single_reference: bool,
    /// Upper bound on concurrent training jobs; 0 means rayon's default.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            anchors: Vec::new(),
            threshold: 0.5,
            trainer: Trainer::MaxMargin,
            train: TrainConfig::default(),
            test_size: 500,
            seed: 0,
            k: 10,
            min_train: DEFAULT_MIN_TRAIN,
            split_mode: SplitMode::Random,
            single_reference: false,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub skipped: Vec<SkippedAnchor>,
    pub global_train_size: usize,
    /// Pearson between map cosine and `M^x0` accuracy across rows.
    pub pearson_simvacc: Option<f64>,
    pub spearman_simvacc: Option<f64>,
    /// Spearman between anchor cosine and map cosine across rows.
    pub spearman_anchor_map: Option<f64>,
    pub warnings: Vec<String>,
    pub config: ExperimentConfig,
}

/// A finished experiment: the report plus the trained maps.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    /// Local maps of the rows that were kept, in row order.
    pub local: Vec<AtlasEntry>,
    /// Train and test sets of the kept rows, in row order.
    pub splits: Vec<(TranslationDataset, TranslationDataset)>,
    pub global: LinearMap,
    pub global_train: TranslationDataset,
}

struct AnchorJob {
    entry: AtlasEntry,
    neighborhood_size: usize,
    train: TranslationDataset,
    test: TranslationDataset,
}

fn prepare_anchor(
    i: usize,
    anchor: &str,
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    lexicon: &BilingualLexicon,
    cfg: &ExperimentConfig,
) -> Result<std::result::Result<AnchorJob, String>> {
    let hood = build_neighborhood(src, anchor, cfg.threshold)?;
    let (mut ds, _) = match build_dataset(&hood, lexicon, src, tgt) {
        Ok(v) => v,
        Err(e) => return Ok(Err(e.to_string())),
    };
    if cfg.single_reference {
        ds = ds.single_reference();
    }
    let (train_set, test_set) = match split_dataset_with(
        &ds,
        cfg.test_size,
        derive_seed(cfg.seed, i as u64),
        cfg.split_mode,
    ) {
        Ok(v) => v,
        Err(e) => return Ok(Err(e.to_string())),
    };
    if train_set.len() < cfg.min_train {
        return Ok(Err(format!(
            "{} training pairs, below the floor of {}",
            train_set.len(),
            cfg.min_train
        )));
    }
    let tc = TrainConfig {
        seed: derive_seed(cfg.seed, 0x10_000 + i as u64),
        ..cfg.train.clone()
    };
    let map = train(cfg.trainer, &train_set, tgt, &tc)?.with_anchor(anchor);
    Ok(Ok(AnchorJob {
        entry: AtlasEntry {
            anchor: anchor.to_owned(),
            anchor_vector: hood.anchor_vector.clone(),
            map,
        },
        neighborhood_size: hood.len(),
        train: train_set,
        test: test_set,
    }))
}

/// Trains local maps for every anchor neighborhood and a global map, and
/// evaluates them against each other.
pub fn run_experiment(
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    lexicon: &BilingualLexicon,
    cfg: &ExperimentConfig,
) -> Result<ExperimentRun> {
    if cfg.anchors.is_empty() {
        return Err(Error::InvalidArgument("no anchors given".into()));
    }
    if cfg.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    for a in &cfg.anchors {
        src.require(a)?;
    }
    cfg.train.validate()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let jobs: Vec<_> = pool.install(|| {
        cfg.anchors
            .par_iter()
            .enumerate()
            .map(|(i, a)| prepare_anchor(i, a, src, tgt, lexicon, cfg))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for (anchor, job) in cfg.anchors.iter().zip(jobs) {
        match job {
            Ok(j) => kept.push(j),
            Err(reason) => skipped.push(SkippedAnchor {
                anchor: anchor.clone(),
                reason,
            }),
        }
    }
    if let Some(s) = skipped.iter().find(|s| s.anchor == cfg.anchors[0]) {
        return Err(Error::EmptyDataset(format!(
            "reference anchor {:?} unusable: {}",
            s.anchor, s.reason
        )));
    }

    let test_words: HashSet<&str> = kept.iter().flat_map(|j| j.test.sources()).collect();
    let train_sets: Vec<&TranslationDataset> = kept.iter().map(|j| &j.train).collect();
    let global_train = union_excluding(&train_sets, &test_words);
    if global_train.is_empty() {
        return Err(Error::EmptyDataset("global training union is empty".into()));
    }
    let gc = TrainConfig {
        seed: derive_seed(cfg.seed, 0xFFFF_FFFF),
        ..cfg.train.clone()
    };
    let global = pool.install(|| train(cfg.trainer, &global_train, tgt, &gc))?;

    let x0 = &kept[0].entry;
    let rows = pool.install(|| {
        kept.par_iter()
            .enumerate()
            .map(|(i, job)| -> Result<ExperimentRow> {
                let own = &job.entry.map;
                let acc_global = precision_at_k(&global, &job.test, tgt, cfg.k)?;
                let acc_m_xi = precision_at_k(own, &job.test, tgt, cfg.k)?;
                let (acc_m_x0, map_cosine, anchor_cos) = if i == 0 {
                    (acc_m_xi, 1.0, 1.0)
                } else {
                    (
                        precision_at_k(&x0.map, &job.test, tgt, cfg.k)?,
                        matrix_cosine(&x0.map.matrix, &own.matrix)?,
                        cosine_similarity(&x0.anchor_vector, &job.entry.anchor_vector)?,
                    )
                };
                Ok(ExperimentRow {
                    anchor: job.entry.anchor.clone(),
                    neighborhood_size: job.neighborhood_size,
                    train_size: job.train.len(),
                    test_size: job.test.len(),
                    anchor_cos_to_x0: anchor_cos,
                    acc_global,
                    acc_m_x0,
                    acc_m_xi,
                    delta: acc_m_xi - acc_m_x0,
                    map_cosine,
                    map_norm: frobenius_norm(&own.matrix),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut warnings = Vec::new();
    for s in &skipped {
        warnings.push(format!("skipped anchor {:?}: {}", s.anchor, s.reason));
    }
    let mut corr =
        |name: &str, f: fn(&[f64], &[f64]) -> Result<f64>, xs: Vec<f64>, ys: Vec<f64>| {
            if rows.len() < 2 {
                warnings.push(format!("{name}: fewer than 2 usable rows"));
                return None;
            }
            match f(&xs, &ys) {
                Ok(v) => Some(v),
                Err(e) => {
                    warnings.push(format!("{name}: {e}"));
                    None
                }
            }
        };
    let sims: Vec<f64> = rows.iter().map(|r| r.map_cosine).collect();
    let accs: Vec<f64> = rows.iter().map(|r| r.acc_m_x0).collect();
    let anchor_cos: Vec<f64> = rows.iter().map(|r| r.anchor_cos_to_x0).collect();
    let pearson_simvacc = corr(
        "pearson(map cosine, M^x0)",
        pearson_correlation,
        sims.clone(),
        accs.clone(),
    );
    let spearman_simvacc = corr(
        "spearman(map cosine, M^x0)",
        spearman_correlation,
        sims.clone(),
        accs,
    );
    let spearman_anchor_map = corr(
        "spearman(anchor cosine, map cosine)",
        spearman_correlation,
        anchor_cos,
        sims,
    );

    let (local, splits) = kept
        .into_iter()
        .map(|j| (j.entry, (j.train, j.test)))
        .unzip();
    Ok(ExperimentRun {
        report: ExperimentReport {
            rows,
            skipped,
            global_train_size: global_train.len(),
            pearson_simvacc,
            spearman_simvacc,
            spearman_anchor_map,
            warnings,
            config: cfg.clone(),
        },
        local,
        splits,
        global,
        global_train,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |v| format!("{v:.4}"))
}

impl ExperimentReport {
    /// Table with the ten fixed headers; accuracies to one decimal, matrix
    /// properties to two. Correlations follow as `#`-prefixed lines.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", TABLE_HEADERS.join("\t"))?;
        for r in &self.rows {
            writeln!(
                w,
                "{}\t{}\t{}\t{:.2}\t{:.1}\t{:.1}\t{:.1}\t{:.1}\t{:.2}\t{:.2}",
                r.anchor,
                r.train_size,
                r.test_size,
                r.anchor_cos_to_x0,
                r.acc_global,
                r.acc_m_x0,
                r.acc_m_xi,
                r.delta,
                r.map_cosine,
                r.map_norm
            )?;
        }
        writeln!(
            w,
            "# pearson(cos(M^x0,M^xi), M^x0)\t{}\tspearman\t{}",
            fmt_opt(self.pearson_simvacc),
            fmt_opt(self.spearman_simvacc)
        )
    }

    /// One JSON object per row.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.rows {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        Ok(())
    }

    /// Scatter data: `map_cosine\tacc_M_x0` per row.
    pub fn write_scatter<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "map_cosine\tacc_M_x0")?;
        for r in &self.rows {
            writeln!(w, "{}\t{}", r.map_cosine, r.acc_m_x0)?;
        }
        Ok(())
    }
}
