//! Locally linear probes of cross-lingual word translation maps.
//!
//! Train linear maps on cosine-thresholded neighborhoods of a source
//! embedding space, compare them by Frobenius cosine, and check whether the
//! maps drift as the neighborhoods move apart. Synthetic worlds with known
//! generating maps provide an oracle for the whole pipeline.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod embeddings;
pub mod error;
pub mod lexicon;
pub mod mapper;
pub mod neighborhoods;
pub mod seed;
pub mod synth;
pub mod translate;

pub use analysis::{
    frobenius_norm, matrix_cosine, pearson_correlation, precision_at_k, run_experiment,
    spearman_correlation, ExperimentConfig, ExperimentReport, ExperimentRow, ExperimentRun,
};
pub use embeddings::{
    cosine_similarity, load_embeddings, top_k_by_cosine, EmbeddingSpace, LoadStats, ScoredWord,
};
pub use error::{Error, Result};
pub use lexicon::{
    build_dataset, load_lexicon, split_dataset, split_dataset_with, BilingualLexicon, SplitMode,
    TranslationDataset,
};
pub use mapper::{
    hinge_loss, orthogonality_penalty, squared_distance, train_least_squares, train_max_margin,
    Init, LinearMap, TrainConfig, Trainer,
};
pub use neighborhoods::{build_neighborhood, growth_profile, Neighborhood};
pub use synth::{
    generate_linear_world, generate_nonlinear_world, generate_world, locality_diagnostic,
    LocalityReport, SyntheticWorld, WorldConfig, CALIBRATED_STRENGTH,
};
pub use translate::{
    atlas_precision_at_k, piecewise_translate, translate_topk, AtlasEntry, MapAtlas, MapChoice,
};

pub use nalgebra::DMatrix;
