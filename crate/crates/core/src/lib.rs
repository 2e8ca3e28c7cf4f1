//! ROC analysis of similarity scoring functions.
//!
//! False rejection and false acceptance rates of a similarity score are
//! U-statistics over image pairs: a per-identity average over genuine pairs
//! and a per-identity-pair average over impostor pairs. This crate estimates
//! them, builds ROC curves and fairness metrics from them, and quantifies
//! their uncertainty with a bootstrap that recenters replicates on the
//! V-statistic they are actually centred on.

pub mod bootstrap;
pub mod data;
pub mod error;
pub mod estimators;
pub mod export;
pub mod fairness;
pub mod synthetic;

pub use bootstrap::{
    resample_multiplicities, roc_confidence_band, std_curve, BandMode, CurveBand,
    MultiplicityVector, RocReplicates,
};
pub use data::{
    build_score_cache, cosine_similarity, load_embeddings, EmbeddingDataset, EmbeddingFormat,
    ImpostorPolicy, ScoreCache,
};
pub use error::{Error, Result};
pub use estimators::{roc_curve, AlphaGrid, RocCurve, Scope, ScopeIndex, StepCdf};
pub use fairness::{fairness_band, FairnessReport, Metric, Side};
pub use synthetic::{generate_dataset, SynthConfig};
