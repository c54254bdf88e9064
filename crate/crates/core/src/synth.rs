//! Synthetic bilingual worlds with a known generating map.
//!
//! Source vectors are unit-normalized draws from Gaussian clusters whose
//! centers lie on an arc `cos φ · p + sin φ · u`. Targets are
//! `G · R(θ(x)) · x + noise`, where `G` is a random matrix with singular
//! values in `[1, max_singular]` and `R(θ)` rotates by `θ` in a set of fixed
//! orthogonal 2-planes. The angle varies smoothly with position,
//! `θ(x) = strength · (u·x)`, so a zero strength gives a globally linear
//! world and a positive one a world that is only locally linear.
//!
//! Target vectors are kept unnormalized so that a linear world is exactly
//! linear.

use std::collections::HashSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    matrix_cosine, run_experiment, spearman_correlation, ExperimentConfig, ExperimentReport,
};
use crate::embeddings::{cosine_similarity, EmbeddingSpace, SpaceBuilder};
use crate::error::{Error, Result};
use crate::lexicon::BilingualLexicon;
use crate::mapper::{LinearMap, Trainer};
use crate::seed;

/// Variation strength at which the default world's local maps separate:
/// far anchors reach map cosines near 0.8 while near ones stay above 0.95.
pub const CALIBRATED_STRENGTH: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub n: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Radians of rotation per unit of `u·x`; zero means a linear world.
    pub variation_strength: f64,
    pub clusters: usize,
    /// Per-coordinate standard deviation of points around their center.
    pub cluster_spread: f64,
    /// Angular extent of the arc of cluster centers, in degrees.
    pub arc_degrees: f64,
    pub max_singular: f64,
    /// Number of 2-planes the rotation acts on; `None` for all `dim / 2`.
    pub rotation_planes: Option<usize>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            n: 2000,
            dim: 50,
            noise_sigma: 0.0,
            seed: 0,
            variation_strength: 0.0,
            clusters: 8,
            cluster_spread: 0.1,
            arc_degrees: 90.0,
            max_singular: 3.0,
            rotation_planes: None,
        }
    }
}

impl WorldConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_owned()));
        if self.dim < 2 {
            return bad("dimension must be at least 2");
        }
        if self.n == 0 || self.clusters == 0 {
            return bad("need at least one word and one cluster");
        }
        if !(self.noise_sigma >= 0.0) || !(self.cluster_spread >= 0.0) {
            return bad("noise and spread must be non-negative");
        }
        if !(self.variation_strength >= 0.0) {
            return bad("variation strength must be non-negative");
        }
        if !(self.max_singular >= 1.0) {
            return bad("max singular value must be at least 1");
        }
        if self
            .rotation_planes
            .is_some_and(|p| p == 0 || p > self.dim / 2)
        {
            return bad("rotation planes must lie in 1..=dim/2");
        }
        Ok(())
    }
}

/// The generating map of a world.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub g: DMatrix<f64>,
    /// Columns `2k, 2k+1` span the k-th rotation plane.
    pub plane_basis: DMatrix<f64>,
    pub planes: usize,
    pub direction: DVector<f64>,
    pub strength: f64,
}

impl GroundTruth {
    pub fn is_linear(&self) -> bool {
        self.strength == 0.0
    }

    pub fn angle(&self, x: &[f64]) -> f64 {
        self.strength
            * self
                .direction
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    /// `R(θ)`: rotation by `θ` in each plane.
    pub fn rotation(&self, theta: f64) -> DMatrix<f64> {
        let d = self.g.ncols();
        let mut r = DMatrix::identity(d, d);
        if theta == 0.0 {
            return r;
        }
        let (s, c) = theta.sin_cos();
        for k in 0..self.planes {
            let a = self.plane_basis.column(2 * k);
            let b = self.plane_basis.column(2 * k + 1);
            // (c-1)(aaᵀ + bbᵀ) + s(baᵀ - abᵀ)
            r += (a * a.transpose() + b * b.transpose()) * (c - 1.0)
                + (b * a.transpose() - a * b.transpose()) * s;
        }
        r
    }

    /// The linear map in force at `x`: `G · R(θ(x))`.
    pub fn map_at(&self, x: &[f64]) -> DMatrix<f64> {
        &self.g * self.rotation(self.angle(x))
    }

    pub fn apply(&self, x: &[f64]) -> DVector<f64> {
        self.map_at(x) * DVector::from_column_slice(x)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub src: EmbeddingSpace,
    pub tgt: EmbeddingSpace,
    pub lexicon: BilingualLexicon,
    pub ground_truth: GroundTruth,
    /// Cluster of every source word, in vocabulary order.
    pub region_labels: Vec<usize>,
    /// Unit cluster centers.
    pub centers: Vec<Vec<f64>>,
    pub config: WorldConfig,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, d, d).qr().q()
}

/// A world with a single global linear map.
pub fn generate_linear_world(
    n: usize,
    dim: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<SyntheticWorld> {
    generate_world(&WorldConfig {
        n,
        dim,
        noise_sigma,
        seed,
        ..WorldConfig::default()
    })
}

/// A world whose map rotates smoothly with position.
pub fn generate_nonlinear_world(
    n: usize,
    dim: usize,
    noise_sigma: f64,
    seed: u64,
    variation_strength: f64,
) -> Result<SyntheticWorld> {
    generate_world(&WorldConfig {
        n,
        dim,
        noise_sigma,
        seed,
        variation_strength,
        ..WorldConfig::default()
    })
}

/// Draw order is fixed and independent of `variation_strength`, so a linear
/// and a nonlinear world from the same seed share every random draw.
pub fn generate_world(cfg: &WorldConfig) -> Result<SyntheticWorld> {
    cfg.validate()?;
    let d = cfg.dim;
    let mut rng = seed::rng(cfg.seed, 0x5EED);

    let frame = random_orthogonal(&mut rng, d);
    let p = frame.column(0).into_owned();
    let u = frame.column(1).into_owned();

    let left = random_orthogonal(&mut rng, d);
    let right = random_orthogonal(&mut rng, d);
    let singular = DVector::from_fn(d, |_, _| rng.random_range(1.0..=cfg.max_singular));
    let g = &left * DMatrix::from_diagonal(&singular) * right.transpose();
    let plane_basis = random_orthogonal(&mut rng, d);

    let arc = cfg.arc_degrees * PI / 180.0;
    let centers: Vec<DVector<f64>> = (0..cfg.clusters)
        .map(|k| {
            let phi = if cfg.clusters == 1 {
                0.0
            } else {
                -arc / 2.0 + arc * k as f64 / (cfg.clusters - 1) as f64
            };
            &p * phi.cos() + &u * phi.sin()
        })
        .collect();

    let truth = GroundTruth {
        g,
        plane_basis,
        planes: cfg.rotation_planes.unwrap_or(d / 2),
        direction: u,
        strength: cfg.variation_strength,
    };

    let mut src_builder = SpaceBuilder::new("src", d, true);
    let mut labels = Vec::with_capacity(cfg.n);
    let mut raw = DVector::zeros(d);
    for i in 0..cfg.n {
        let k = i % cfg.clusters;
        for (j, v) in raw.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *v = centers[k][j] + cfg.cluster_spread * z;
        }
        if !src_builder.push(&format!("s{i:05}"), raw.as_slice())? {
            return Err(Error::Degenerate("zero source vector drawn".into()));
        }
        labels.push(k);
    }
    let src = src_builder.finish();

    let mut tgt_builder = SpaceBuilder::new("tgt", d, false);
    let mut lexicon = BilingualLexicon::new("src", "tgt");
    for i in 0..cfg.n {
        let mut y = truth.apply(src.row(i));
        for v in y.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += cfg.noise_sigma * z;
        }
        let word = format!("t{i:05}");
        tgt_builder.push(&word, y.as_slice())?;
        lexicon.insert(src.word(i), &word);
    }

    Ok(SyntheticWorld {
        src,
        tgt: tgt_builder.finish(),
        lexicon,
        ground_truth: truth,
        region_labels: labels,
        centers: centers.into_iter().map(|c| c.as_slice().to_vec()).collect(),
        config: cfg.clone(),
    })
}

impl SyntheticWorld {
    /// For every cluster, the source word closest in cosine to its center.
    pub fn cluster_anchors(&self) -> Vec<String> {
        self.centers
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let best = (0..self.src.len())
                    .filter(|&i| self.region_labels[i] == k)
                    .map(|i| (i, crate::embeddings::dot(self.src.row(i), c)))
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                self.src.word(best).to_owned()
            })
            .collect()
    }

    /// The generating map as a `LinearMap` (exact for linear worlds).
    pub fn global_map(&self) -> LinearMap {
        let mut map = LinearMap::new(self.ground_truth.g.clone());
        map.provenance.trainer = "ground-truth".into();
        map.provenance.anchor = "global".into();
        map
    }

    pub fn words_in_region(&self, region: usize) -> impl Iterator<Item = &str> {
        self.region_labels
            .iter()
            .enumerate()
            .filter(move |(_, &r)| r == region)
            .map(|(i, _)| self.src.word(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorPair {
    pub a: String,
    pub b: String,
    pub anchor_cosine: f64,
    pub map_cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityReport {
    pub experiment: ExperimentReport,
    pub pairs: Vec<AnchorPair>,
    pub min_map_cosine: Option<f64>,
    /// Spearman between anchor cosine and map cosine over all pairs.
    pub spearman_pairs: Option<f64>,
}

impl LocalityReport {
    pub fn write_pairs_tsv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "anchor_a\tanchor_b\tanchor_cosine\tmap_cosine")?;
        for p in &self.pairs {
            writeln!(w, "{}\t{}\t{}\t{}", p.a, p.b, p.anchor_cosine, p.map_cosine)?;
        }
        Ok(())
    }
}

/// Runs the neighborhood experiment on a synthetic world and relates every
/// pair of local maps to the distance between their anchors.
pub fn locality_diagnostic(
    world: &SyntheticWorld,
    anchors: &[String],
    s: f64,
    trainer: Trainer,
    config: &ExperimentConfig,
) -> Result<LocalityReport> {
    let unique: HashSet<&String> = anchors.iter().collect();
    if unique.len() != anchors.len() {
        return Err(Error::InvalidArgument("anchors must be distinct".into()));
    }
    let cfg = ExperimentConfig {
        anchors: anchors.to_vec(),
        threshold: s,
        trainer,
        ..config.clone()
    };
    let run = run_experiment(&world.src, &world.tgt, &world.lexicon, &cfg)?;
    let mut pairs = Vec::new();
    for (i, a) in run.local.iter().enumerate() {
        for b in &run.local[i + 1..] {
            pairs.push(AnchorPair {
                a: a.anchor.clone(),
                b: b.anchor.clone(),
                anchor_cosine: cosine_similarity(&a.anchor_vector, &b.anchor_vector)?,
                map_cosine: matrix_cosine(&a.map.matrix, &b.map.matrix)?,
            });
        }
    }
    let min_map_cosine = pairs.iter().map(|p| p.map_cosine).reduce(f64::min);
    let spearman_pairs = if pairs.len() >= 2 {
        let xs: Vec<f64> = pairs.iter().map(|p| p.anchor_cosine).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.map_cosine).collect();
        spearman_correlation(&xs, &ys).ok()
    } else {
        None
    };
    Ok(LocalityReport {
        experiment: run.report,
        pairs,
        min_map_cosine,
        spearman_pairs,
    })
}
