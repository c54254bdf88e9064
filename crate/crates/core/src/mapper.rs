//! Linear translation maps and their trainers.
//!
//! Two trainers are provided:
//!
//! * [`train_max_margin`]: per-instance SGD on the ranking hinge
//!   `max(0, γ + ‖Wx − y⁺‖² − ‖Wx − y⁻‖²)` with randomly drawn negatives,
//!   optionally plus a soft orthogonality penalty `‖WWᵀ − I‖²_F`.
//! * [`train_least_squares`]: closed-form ridge regression
//!   `M = Y Xᵀ (X Xᵀ + λI)⁻¹`.
//!
//! Maps are stored as `d_tgt × d_src` matrices and serialize to a plain text
//! format (see [`write_map`]).

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::lexicon::TranslationDataset;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trainer {
    MaxMargin,
    Lsq,
}

impl fmt::Display for Trainer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trainer::MaxMargin => "maxmargin",
            Trainer::Lsq => "lsq",
        })
    }
}

impl FromStr for Trainer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maxmargin" => Ok(Trainer::MaxMargin),
            "lsq" => Ok(Trainer::Lsq),
            other => Err(Error::InvalidArgument(format!("unknown trainer {other:?}"))),
        }
    }
}

/// Starting point for SGD.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Identity for square maps, scaled-random otherwise.
    #[default]
    Identity,
    Zeros,
    /// Entries uniform in `±1/√d_src`.
    ScaledRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    /// Negatives drawn per instance per epoch.
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub seed: u64,
    pub init: Init,
    pub ortho_weight: f64,
    /// Ridge strength used by the least-squares trainer.
    pub lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.4,
            negatives: 1,
            epochs: 50,
            learning_rate: 0.1,
            lr_decay: 0.99,
            seed: 0,
            init: Init::Identity,
            ortho_weight: 0.0,
            lambda: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_owned()));
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if self.negatives == 0 {
            return bad("at least one negative per instance is required");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr decay must lie in (0, 1]");
        }
        if !(self.ortho_weight >= 0.0) {
            return bad("orthogonality weight must be non-negative");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MapProvenance {
    pub trainer: String,
    /// Anchor word, or `global`.
    pub anchor: String,
    pub hyperparameters: BTreeMap<String, String>,
    pub train_size: usize,
    pub final_loss: f64,
    /// Mean training loss per epoch (SGD trainers only; not serialized).
    pub epoch_losses: Vec<f64>,
}

/// A `d_tgt × d_src` matrix plus where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub matrix: DMatrix<f64>,
    pub provenance: MapProvenance,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        LinearMap {
            matrix,
            provenance: MapProvenance::default(),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self::new(DMatrix::identity(d, d))
    }

    pub fn d_src(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn d_tgt(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn with_anchor(mut self, anchor: &str) -> Self {
        self.provenance.anchor = anchor.to_owned();
        self
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_src() {
            return Err(Error::DimensionMismatch {
                expected: self.d_src(),
                actual: x.len(),
            });
        }
        let m = &self.matrix;
        Ok((0..m.nrows())
            .map(|r| x.iter().enumerate().map(|(c, v)| m[(r, c)] * v).sum())
            .collect())
    }
}

/// `‖u − v‖²`.
pub fn squared_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok(u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// `max(0, γ + d(y⁺, Wx) − d(y⁻, Wx))`.
pub fn hinge_loss(
    map: &LinearMap,
    x: &[f64],
    y_pos: &[f64],
    y_neg: &[f64],
    gamma: f64,
) -> Result<f64> {
    let pred = map.apply(x)?;
    let dp = squared_distance(y_pos, &pred)?;
    let dn = squared_distance(y_neg, &pred)?;
    Ok((gamma + dp - dn).max(0.0))
}

/// Gradient of [`hinge_loss`] with respect to `W`: `2(y⁻ − y⁺)xᵀ` where the
/// hinge is active, zero otherwise.
pub fn hinge_gradient(
    map: &LinearMap,
    x: &[f64],
    y_pos: &[f64],
    y_neg: &[f64],
    gamma: f64,
) -> Result<DMatrix<f64>> {
    let (r, c) = map.matrix.shape();
    if hinge_loss(map, x, y_pos, y_neg, gamma)? <= 0.0 {
        return Ok(DMatrix::zeros(r, c));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| {
        2.0 * (y_neg[i] - y_pos[i]) * x[j]
    }))
}

fn require_square(map: &LinearMap) -> Result<()> {
    if map.d_src() != map.d_tgt() {
        return Err(Error::InvalidArgument(format!(
            "orthogonality penalty needs a square map, got {}x{}",
            map.d_tgt(),
            map.d_src()
        )));
    }
    Ok(())
}

/// `‖MMᵀ − I‖_F`.
pub fn orthogonality_penalty(map: &LinearMap) -> Result<f64> {
    require_square(map)?;
    let m = &map.matrix;
    let gram = m * m.transpose() - DMatrix::<f64>::identity(m.nrows(), m.nrows());
    Ok(gram.norm())
}

/// Gradient of the squared penalty `‖MMᵀ − I‖²_F`, namely `4(MMᵀ − I)M`.
pub fn orthogonality_gradient(map: &LinearMap) -> Result<DMatrix<f64>> {
    require_square(map)?;
    let m = &map.matrix;
    let gram = m * m.transpose() - DMatrix::<f64>::identity(m.nrows(), m.nrows());
    Ok(gram * m * 4.0)
}

fn gold_vectors<'a>(
    train: &TranslationDataset,
    tgt_space: &'a EmbeddingSpace,
) -> Result<Vec<&'a [f64]>> {
    train
        .instances
        .iter()
        .map(|inst| {
            let first = inst.gold.first().ok_or_else(|| {
                Error::EmptyDataset(format!("{:?} has no gold target", inst.source))
            })?;
            tgt_space
                .vector(first)
                .ok_or_else(|| Error::UnknownWord(first.clone()))
        })
        .collect()
}

fn check_dims(train: &TranslationDataset, tgt_space: &EmbeddingSpace) -> Result<usize> {
    let d_src = train.dim().ok_or_else(|| {
        Error::EmptyDataset(format!("no training instances for {}", train.provenance))
    })?;
    if let Some(bad) = train.instances.iter().find(|i| i.vector.len() != d_src) {
        return Err(Error::DimensionMismatch {
            expected: d_src,
            actual: bad.vector.len(),
        });
    }
    if tgt_space.is_empty() {
        return Err(Error::EmptyDataset("empty target space".into()));
    }
    Ok(d_src)
}

fn anchor_label(train: &TranslationDataset) -> String {
    match &train.provenance {
        crate::lexicon::Provenance::Neighborhood { anchor, .. } => anchor.clone(),
        crate::lexicon::Provenance::Global => "global".into(),
    }
}

/// Trains `W` by SGD on the max-margin ranking objective.
///
/// Each epoch shuffles the instances and, for every instance, draws
/// `config.negatives` targets uniformly from the gold targets of the other
/// instances. A single-instance set draws its negatives from the target
/// vocabulary instead. All randomness comes from `(config.seed, epoch)`.
pub fn train_max_margin(
    train: &TranslationDataset,
    tgt_space: &EmbeddingSpace,
    config: &TrainConfig,
) -> Result<LinearMap> {
    config.validate()?;
    let d_src = check_dims(train, tgt_space)?;
    let d_tgt = tgt_space.dim();
    let m = train.len();
    let ortho = config.ortho_weight > 0.0;
    if ortho && d_src != d_tgt {
        return Err(Error::InvalidArgument(
            "orthogonality penalty needs equal source and target dimensions".into(),
        ));
    }
    let targets = gold_vectors(train, tgt_space)?;
    let gold_rows: Vec<Vec<usize>> = train
        .instances
        .iter()
        .map(|i| {
            i.gold
                .iter()
                .filter_map(|g| tgt_space.index_of(g))
                .collect()
        })
        .collect();

    // row-major working copy of W
    let mut w = vec![0.0; d_tgt * d_src];
    match config.init {
        Init::Identity if d_src == d_tgt => {
            for i in 0..d_src {
                w[i * d_src + i] = 1.0;
            }
        }
        Init::Zeros => {}
        _ => {
            let bound = 1.0 / (d_src as f64).sqrt();
            let mut rng = seed::rng(config.seed, u64::MAX);
            w.iter_mut()
                .for_each(|v| *v = rng.random_range(-bound..bound));
        }
    }

    let mut order: Vec<usize> = (0..m).collect();
    let mut pred = vec![0.0; d_tgt];
    let mut lr = config.learning_rate;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng = seed::rng(config.seed, epoch as u64);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let x = &train.instances[i].vector;
            let y_pos = targets[i];
            for _ in 0..config.negatives {
                let y_neg = if m > 1 {
                    let r = rng.random_range(0..m - 1);
                    targets[if r < i { r } else { r + 1 }]
                } else {
                    loop {
                        let r = rng.random_range(0..tgt_space.len());
                        if !gold_rows[i].contains(&r) || tgt_space.len() <= gold_rows[i].len() {
                            break tgt_space.row(r);
                        }
                    }
                };
                for (r, p) in pred.iter_mut().enumerate() {
                    let row = &w[r * d_src..(r + 1) * d_src];
                    *p = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
                let mut loss = config.gamma;
                for r in 0..d_tgt {
                    let dp = pred[r] - y_pos[r];
                    let dn = pred[r] - y_neg[r];
                    loss += dp * dp - dn * dn;
                }
                if loss > 0.0 {
                    total += loss;
                    // W -= lr * 2 (y⁻ − y⁺) xᵀ
                    for r in 0..d_tgt {
                        let c = 2.0 * lr * (y_pos[r] - y_neg[r]);
                        if c != 0.0 {
                            let row = &mut w[r * d_src..(r + 1) * d_src];
                            row.iter_mut().zip(x).for_each(|(a, b)| *a += c * b);
                        }
                    }
                }
            }
        }
        let mut epoch_loss = total / (m * config.negatives) as f64;
        if ortho {
            let map = LinearMap::new(DMatrix::from_row_slice(d_tgt, d_src, &w));
            let pen = orthogonality_penalty(&map)?;
            epoch_loss += config.ortho_weight * pen * pen;
            let grad = orthogonality_gradient(&map)?;
            for r in 0..d_tgt {
                for c in 0..d_src {
                    w[r * d_src + c] -= lr * config.ortho_weight * grad[(r, c)];
                }
            }
        }
        if !epoch_loss.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "epoch {epoch}: loss {epoch_loss}; lower the learning rate"
            )));
        }
        epoch_losses.push(epoch_loss);
        lr *= config.lr_decay;
    }

    let mut hyper = BTreeMap::new();
    hyper.insert("gamma".into(), config.gamma.to_string());
    hyper.insert("negatives".into(), config.negatives.to_string());
    hyper.insert("epochs".into(), config.epochs.to_string());
    hyper.insert("learning_rate".into(), config.learning_rate.to_string());
    hyper.insert("lr_decay".into(), config.lr_decay.to_string());
    hyper.insert("seed".into(), config.seed.to_string());
    hyper.insert("ortho_weight".into(), config.ortho_weight.to_string());
    Ok(LinearMap {
        matrix: DMatrix::from_row_slice(d_tgt, d_src, &w),
        provenance: MapProvenance {
            trainer: Trainer::MaxMargin.to_string(),
            anchor: anchor_label(train),
            hyperparameters: hyper,
            train_size: m,
            final_loss: epoch_losses.last().copied().unwrap_or(0.0),
            epoch_losses,
        },
    })
}

fn design_matrices(
    train: &TranslationDataset,
    tgt_space: &EmbeddingSpace,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d_src = check_dims(train, tgt_space)?;
    let targets = gold_vectors(train, tgt_space)?;
    let m = train.len();
    let x = DMatrix::from_fn(d_src, m, |r, c| train.instances[c].vector[r]);
    let y = DMatrix::from_fn(tgt_space.dim(), m, |r, c| targets[c][r]);
    Ok((x, y))
}

/// Closed-form ridge solution `M = Y Xᵀ (X Xᵀ + λI)⁻¹`, where the columns
/// of `X` and `Y` are paired source and first-gold target vectors.
pub fn train_least_squares(
    train: &TranslationDataset,
    tgt_space: &EmbeddingSpace,
    lambda: f64,
) -> Result<LinearMap> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument("lambda must be non-negative".into()));
    }
    let (x, y) = design_matrices(train, tgt_space)?;
    let d_src = x.nrows();
    let mut normal = &x * x.transpose();
    for i in 0..d_src {
        normal[(i, i)] += lambda;
    }
    if lambda == 0.0 {
        let eig = normal.clone().symmetric_eigenvalues();
        let max = eig.max();
        if !(eig.min() > max * 1e-12) {
            return Err(Error::Singular);
        }
    }
    let chol = normal.cholesky().ok_or(Error::Singular)?;
    // M A = B  <=>  A Mᵀ = Bᵀ with A symmetric
    let rhs = &x * y.transpose();
    let matrix = chol.solve(&rhs).transpose();
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares solution".into()));
    }
    let residual = &matrix * &x - &y;
    let loss = residual.norm_squared() + lambda * matrix.norm_squared();

    let mut hyper = BTreeMap::new();
    hyper.insert("lambda".into(), lambda.to_string());
    Ok(LinearMap {
        matrix,
        provenance: MapProvenance {
            trainer: Trainer::Lsq.to_string(),
            anchor: anchor_label(train),
            hyperparameters: hyper,
            train_size: train.len(),
            final_loss: loss,
            epoch_losses: Vec::new(),
        },
    })
}

/// Gradient of `‖MX − Y‖²_F + λ‖M‖²_F` at `map`.
pub fn ridge_gradient(
    map: &LinearMap,
    train: &TranslationDataset,
    tgt_space: &EmbeddingSpace,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    let (x, y) = design_matrices(train, tgt_space)?;
    Ok((&map.matrix * &x - y) * x.transpose() * 2.0 + &map.matrix * (2.0 * lambda))
}

/// Trains with the trainer selected by `trainer`.
pub fn train(
    trainer: Trainer,
    train: &TranslationDataset,
    tgt_space: &EmbeddingSpace,
    config: &TrainConfig,
) -> Result<LinearMap> {
    match trainer {
        Trainer::MaxMargin => train_max_margin(train, tgt_space, config),
        Trainer::Lsq => train_least_squares(train, tgt_space, config.lambda),
    }
}

/// Writes `d_tgt d_src`, then `# key: value` provenance lines, then one
/// row of `d_src` floats per line. Floats use the shortest representation
/// that round-trips exactly.
pub fn write_map<W: Write>(map: &LinearMap, mut w: W) -> std::io::Result<()> {
    let p = &map.provenance;
    writeln!(w, "{} {}", map.d_tgt(), map.d_src())?;
    writeln!(w, "# trainer: {}", p.trainer)?;
    writeln!(w, "# anchor: {}", p.anchor)?;
    writeln!(w, "# train_size: {}", p.train_size)?;
    writeln!(w, "# final_loss: {}", p.final_loss)?;
    for (k, v) in &p.hyperparameters {
        writeln!(w, "# {k}: {v}")?;
    }
    for r in 0..map.d_tgt() {
        let row: Vec<String> = (0..map.d_src())
            .map(|c| map.matrix[(r, c)].to_string())
            .collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_map<R: BufRead>(reader: R) -> Result<LinearMap> {
    let mut lines = reader.lines();
    let bad = |m: String| Error::Parse(format!("map file: {m}"));
    let header = lines
        .next()
        .ok_or_else(|| bad("empty".into()))?
        .map_err(|e| bad(e.to_string()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|f| f.parse().map_err(|_| bad(format!("bad header {header:?}"))))
        .collect::<Result<_>>()?;
    let [d_tgt, d_src] = dims[..] else {
        return Err(bad(format!("bad header {header:?}")));
    };
    let mut prov = MapProvenance::default();
    let mut data = Vec::with_capacity(d_tgt * d_src);
    for line in lines {
        let line = line.map_err(|e| bad(e.to_string()))?;
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.trim().split_once(':') {
                let v = v.trim();
                match k.trim() {
                    "trainer" => prov.trainer = v.to_owned(),
                    "anchor" => prov.anchor = v.to_owned(),
                    "train_size" => prov.train_size = v.parse().unwrap_or(0),
                    "final_loss" => prov.final_loss = v.parse().unwrap_or(f64::NAN),
                    key => {
                        prov.hyperparameters.insert(key.to_owned(), v.to_owned());
                    }
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse().map_err(|_| bad(format!("bad value {f:?}"))))
            .collect::<Result<_>>()?;
        if row.len() != d_src {
            return Err(Error::DimensionMismatch {
                expected: d_src,
                actual: row.len(),
            });
        }
        data.extend(row);
    }
    if data.len() != d_tgt * d_src {
        return Err(bad(format!(
            "expected {d_tgt} rows, got {}",
            data.len() / d_src.max(1)
        )));
    }
    Ok(LinearMap {
        matrix: DMatrix::from_row_slice(d_tgt, d_src, &data),
        provenance: prov,
    })
}

pub fn save_map(map: &LinearMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_map(map, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_map(path: impl AsRef<Path>) -> Result<LinearMap> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_map(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{Instance, Provenance, Role};
    use proptest::prelude::*;

    fn dm(rows: usize, cols: usize, v: &[f64]) -> LinearMap {
        LinearMap::new(DMatrix::from_row_slice(rows, cols, v))
    }

    #[test]
    fn squared_distance_examples() {
        assert_eq!(squared_distance(&[0.3, 2.0], &[0.3, 2.0]).unwrap(), 0.0);
        assert_eq!(squared_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
        assert!(squared_distance(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn hinge_examples() {
        let id = LinearMap::identity(2);
        assert_eq!(
            hinge_loss(&id, &[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], 0.4).unwrap(),
            0.0
        );
        let l = hinge_loss(&id, &[0.2, 0.7], &[0.5, 0.5], &[0.5, 0.5], 0.4).unwrap();
        assert!((l - 0.4).abs() < 1e-15);
        let zero = dm(2, 2, &[0.0; 4]);
        let l = hinge_loss(&zero, &[3.0, -1.0], &[1.0, 0.0], &[0.0, 1.0], 0.4).unwrap();
        assert!((l - 0.4).abs() < 1e-15);
        assert!(hinge_loss(&id, &[1.0], &[1.0, 0.0], &[0.0, 1.0], 0.4).is_err());
    }

    #[test]
    fn orthogonality_examples() {
        assert_eq!(orthogonality_penalty(&LinearMap::identity(5)).unwrap(), 0.0);
        let (s, c) = 0.7f64.sin_cos();
        let rot = dm(2, 2, &[c, -s, s, c]);
        assert!(orthogonality_penalty(&rot).unwrap() < 1e-9);
        let d = dm(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!((orthogonality_penalty(&d).unwrap() - 3.0).abs() < 1e-12);
        assert!(orthogonality_penalty(&dm(2, 3, &[0.0; 6])).is_err());
    }

    #[test]
    fn orthogonality_gradient_matches_finite_differences() {
        let map = dm(3, 3, &[1.2, 0.1, -0.3, 0.4, 0.9, 0.2, -0.5, 0.3, 1.1]);
        let g = orthogonality_gradient(&map).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            for j in 0..3 {
                let mut p = map.clone();
                p.matrix[(i, j)] += h;
                let mut q = map.clone();
                q.matrix[(i, j)] -= h;
                let fp = orthogonality_penalty(&p).unwrap().powi(2);
                let fq = orthogonality_penalty(&q).unwrap().powi(2);
                let num = (fp - fq) / (2.0 * h);
                assert!(
                    (num - g[(i, j)]).abs() <= 1e-6 * (1.0 + num.abs()),
                    "{num} {}",
                    g[(i, j)]
                );
            }
        }
    }

    fn dataset(xs: &[Vec<f64>], gold: &[&str]) -> TranslationDataset {
        TranslationDataset {
            instances: xs
                .iter()
                .zip(gold)
                .enumerate()
                .map(|(i, (x, g))| Instance {
                    source: format!("s{i}"),
                    source_index: i,
                    vector: x.clone(),
                    gold: vec![g.to_string()],
                })
                .collect(),
            role: Role::Train,
            provenance: Provenance::Global,
        }
    }

    #[test]
    fn single_pair_converges() {
        let tgt = EmbeddingSpace::from_rows(
            "t",
            &["p", "q", "r"],
            &[vec![0.0, 1.0], vec![1.0, 0.0], vec![-0.6, 0.8]],
            true,
        )
        .unwrap();
        let ds = dataset(&[vec![1.0, 0.0]], &["p"]);
        let cfg = TrainConfig {
            epochs: 60,
            ..TrainConfig::default()
        };
        let map = train_max_margin(&ds, &tgt, &cfg).unwrap();
        let x = [1.0, 0.0];
        let y = tgt.vector("p").unwrap();
        for neg in ["q", "r"] {
            let l = hinge_loss(&map, &x, y, tgt.vector(neg).unwrap(), cfg.gamma).unwrap();
            assert!(l < cfg.gamma / 100.0, "loss {l} against {neg}");
        }
        assert_eq!(map.provenance.epoch_losses.len(), 60);
    }

    #[test]
    fn max_margin_is_deterministic() {
        let tgt = EmbeddingSpace::from_rows(
            "t",
            &["a", "b", "c"],
            &[vec![1.0, 0.2], vec![0.1, 1.0], vec![-1.0, 0.3]],
            true,
        )
        .unwrap();
        let ds = dataset(
            &[vec![0.9, 0.1], vec![0.2, 0.8], vec![-0.7, 0.5]],
            &["a", "b", "c"],
        );
        let cfg = TrainConfig {
            seed: 9,
            epochs: 20,
            ortho_weight: 0.01,
            ..TrainConfig::default()
        };
        let a = train_max_margin(&ds, &tgt, &cfg).unwrap();
        let b = train_max_margin(&ds, &tgt, &cfg).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.provenance.epoch_losses, b.provenance.epoch_losses);
    }

    #[test]
    fn trainer_errors() {
        let tgt = EmbeddingSpace::from_rows("t", &["a"], &[vec![1.0, 0.0]], true).unwrap();
        let empty = dataset(&[], &[]);
        assert!(matches!(
            train_max_margin(&empty, &tgt, &TrainConfig::default()),
            Err(Error::EmptyDataset(_))
        ));
        assert!(matches!(
            train_least_squares(&empty, &tgt, 1.0),
            Err(Error::EmptyDataset(_))
        ));
        let ds = dataset(&[vec![1.0, 0.0]], &["a"]);
        // rank-1 normal matrix
        assert!(matches!(
            train_least_squares(&ds, &tgt, 0.0),
            Err(Error::Singular)
        ));
        let bad = TrainConfig {
            gamma: 0.0,
            ..TrainConfig::default()
        };
        assert!(train_max_margin(&ds, &tgt, &bad).is_err());
        let tgt =
            EmbeddingSpace::from_rows("t", &["a", "b"], &[vec![1.0, 0.0], vec![0.0, 1.0]], true)
                .unwrap();
        let explode = TrainConfig {
            learning_rate: 1e300,
            ortho_weight: 1.0,
            epochs: 5,
            ..TrainConfig::default()
        };
        let wrong_side = dataset(&[vec![0.0, 1.0]], &["a"]);
        let r = train_max_margin(&wrong_side, &tgt, &explode);
        assert!(matches!(r, Err(Error::NonFinite(_))), "{r:?}");
    }

    #[test]
    fn ridge_limit_shrinks() {
        let tgt = EmbeddingSpace::from_rows(
            "t",
            &["a", "b", "c"],
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]],
            true,
        )
        .unwrap();
        let ds = dataset(
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.8, 0.6]],
            &["b", "c", "a"],
        );
        let map = train_least_squares(&ds, &tgt, 1e9).unwrap();
        assert!(map.matrix.amax() < 1e-3);
    }

    #[test]
    fn map_file_round_trip() {
        let mut map = dm(2, 3, &[0.1, -2.5e-17, 3.0, 1.0 / 3.0, 7e10, -0.0]);
        map.provenance.trainer = "lsq".into();
        map.provenance.anchor = "dog".into();
        map.provenance.train_size = 12;
        map.provenance.final_loss = 0.25;
        map.provenance
            .hyperparameters
            .insert("lambda".into(), "0.001".into());
        let mut buf = Vec::new();
        write_map(&map, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("2 3\n# trainer: lsq\n"));
        let back = read_map(&buf[..]).unwrap();
        assert_eq!(back, map);
        assert!(read_map("2 2\n1 2\n".as_bytes()).is_err());
        assert!(read_map("2 2\n1 2\n3\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn hinge_nonnegative_and_zero_when_separated(
            w in prop::collection::vec(-2.0f64..2.0, 9),
            x in prop::collection::vec(-1.0f64..1.0, 3),
            yp in prop::collection::vec(-1.0f64..1.0, 3),
            yn in prop::collection::vec(-1.0f64..1.0, 3),
            gamma in 0.01f64..2.0,
        ) {
            let map = dm(3, 3, &w);
            let l = hinge_loss(&map, &x, &yp, &yn, gamma).unwrap();
            prop_assert!(l >= 0.0);
            let p = map.apply(&x).unwrap();
            let (dp, dn) = (squared_distance(&yp, &p).unwrap(), squared_distance(&yn, &p).unwrap());
            if dn >= dp + gamma {
                prop_assert_eq!(l, 0.0);
            }
        }

        #[test]
        fn map_text_round_trip(v in prop::collection::vec(-1e6f64..1e6, 12)) {
            let map = dm(3, 4, &v);
            let mut buf = Vec::new();
            write_map(&map, &mut buf).unwrap();
            let back = read_map(&buf[..]).unwrap();
            prop_assert!((back.matrix - map.matrix).amax() <= 1e-12);
        }
    }
}
