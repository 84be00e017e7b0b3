//! Curation toolkit for multi-source gastrointestinal endoscopy image collections.
//!
//! The crate covers the full path from heterogeneous per-dataset metadata to
//! leakage-free evaluation:
//!
//! - [`manifest`]: the unified record model, merging, validation and class
//!   distribution tables.
//! - [`taxonomy`]: canonical class trees, per-dataset label mapping profiles
//!   and nearest-ancestor projection.
//! - [`adapters`]: ingestion of CSV, directory-per-class and filename-pattern
//!   layouts, filename match keys and group keys.
//! - [`splitter`]: patient-grouped stratified shuffle splits, k-fold splits,
//!   ratio rebalancing and enforcement of external splits.
//! - [`audit`]: group-integrity checks and cross-dataset filename overlap.
//! - [`weights`]: class-balanced sampling weights.
//! - [`metrics`]: confusion matrix, balanced accuracy, F1, ROC-AUC, AP and the
//!   combined challenge score.
//! - [`fixtures`]: deterministic synthetic collections for desk-scale checks.

pub mod adapters;
pub mod audit;
pub mod error;
pub mod fixtures;
pub mod manifest;
pub mod metrics;
pub mod rng;
pub mod splitter;
pub mod taxonomy;
pub mod weights;

mod numfmt;

pub use adapters::{
    extract_group_key, ingest, normalize_filename, AdapterConfig, GroupKey, GroupPolicy, GroupSource, Layout, MatchKey,
};
pub use audit::{audit_group_integrity, detect_overlap, AuditReport, OverlapReport};
pub use error::{Error, Result};
pub use manifest::{
    merge_manifests, summarize, validate_manifest, DatasetDescriptor, DistributionTable, ImageRecord, Modality,
    SplitHint, SplitType, UnifiedManifest, ValidationReport,
};
pub use metrics::{evaluate, MetricsReport, PredictionSet};
pub use rng::SplitMix64;
pub use splitter::{
    enforce_external_split, rebalance, split_cost, stratified_group_kfold, stratified_group_shuffle_split,
    FoldAssignment, SplitAssignment, SplitSpec,
};
pub use taxonomy::{class_counts, project, LabelTarget, MappingProfile, Taxonomy};
pub use weights::{compute_weights, WeightTable};

/// Version string stamped into manifest provenance.
pub const TOOL_VERSION: &str = concat!("gicurate ", env!("CARGO_PKG_VERSION"));
