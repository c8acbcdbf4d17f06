//! Shapley-additive attribution engine for binary classifiers.
//!
//! `shapkit` explains trained tree ensembles and generalized linear models
//! on the log-odds (margin) scale. It computes exact per-feature Shapley
//! attributions, variance-based feature importance, grouped ("packed")
//! features driven by the covariance of attribution columns, and renders
//! deterministic SVG plots with machine-readable CSV twins.
//!
//! The crate never trains models: it ingests a model document plus a
//! tabular dataset and produces explanations.

pub mod attribution;
pub mod dataset;
pub mod demo;
pub mod importance;
pub mod math;
pub mod model;
pub mod packing;
pub mod plots;

pub use attribution::{
    conditional_expectation, explain, glm_shap, shapley_bruteforce, shapley_bruteforce_glm,
    tree_shap, AttributionError, RawPhiVector, ShapMatrix, ShapSidecar,
};
pub use dataset::{
    load_csv, one_hot_encode, standardize, Column, ColumnData, Dataset, DatasetError, Schema,
    StandardizationStats,
};
pub use importance::{
    beta_importance, gain_importance, l1_importance, variance_importance, ImportanceError,
    ImportanceMethod, ImportanceReport,
};
pub use model::{
    parse_model, serialize_model, GlmModel, Margin, Model, ModelError, NodeKind, Tree,
    TreeEnsemble, TreeNode,
};
pub use packing::{
    grouped_importance, pack, shap_covariance, suggest_groups, FeatureGroup, PackingError,
    ShapCovariance, SuggestMode,
};
pub use plots::{
    dependence_plot, importance_plot, odds_from_logodds, partial_dependence, pdp_plot,
    summary_plot, PdpCurve, PlotError, PlotOutput, PlotSpec, Rgb,
};

/// Returns true when a cell carries the missing-value marker.
///
/// Missing values are represented as NaN throughout the crate; they are
/// first-class citizens (trees route them along their default direction)
/// and are never imputed.
pub fn is_missing(value: f64) -> bool {
    value.is_nan()
}

/// The missing-value marker used by datasets and feature rows.
pub const MISSING: f64 = f64::NAN;
