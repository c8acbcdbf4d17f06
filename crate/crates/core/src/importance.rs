//! Feature importance scores and rankings.
//!
//! The primary metric is the variance of a feature's attribution column;
//! the absolute-sum (L1) form, split gain read from the model file, and
//! squared beta coefficients for GLMs are provided for comparison.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attribution::ShapMatrix;
use crate::dataset::StandardizationStats;
use crate::math::{self, KahanSum};
use crate::model::{GlmModel, NodeKind, TreeEnsemble};

#[derive(Debug, Error)]
pub enum ImportanceError {
    #[error("tree {tree}, node {node}: split has no gain field")]
    MissingGain { tree: usize, node: usize },
    #[error("standardization stats cover features [{stats}] but the model has [{model}]")]
    StatsMismatch { stats: String, model: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceMethod {
    Variance,
    L1,
    Gain,
    Beta,
}

impl std::fmt::Display for ImportanceMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ImportanceMethod::Variance => "variance",
            ImportanceMethod::L1 => "l1",
            ImportanceMethod::Gain => "gain",
            ImportanceMethod::Beta => "beta",
        };
        f.write_str(s)
    }
}

/// Nonnegative per-feature scores with a deterministic ranking:
/// descending score, ties broken by feature name ascending.
#[derive(Debug, Clone)]
pub struct ImportanceReport {
    pub method: ImportanceMethod,
    pub feature_names: Vec<String>,
    pub scores: Vec<f64>,
    /// Feature indices from most to least important.
    pub ranking: Vec<usize>,
}

impl ImportanceReport {
    pub fn new(method: ImportanceMethod, feature_names: Vec<String>, scores: Vec<f64>) -> Self {
        assert_eq!(feature_names.len(), scores.len());
        let mut ranking: Vec<usize> = (0..scores.len()).collect();
        ranking.sort_by(|&a, &b| {
            scores[b]
                .total_cmp(&scores[a])
                .then_with(|| feature_names[a].cmp(&feature_names[b]))
        });
        ImportanceReport {
            method,
            feature_names,
            scores,
            ranking,
        }
    }

    /// Feature names from most to least important.
    pub fn ranked_names(&self) -> Vec<&str> {
        self.ranking
            .iter()
            .map(|&i| self.feature_names[i].as_str())
            .collect()
    }

    /// 1-based rank of a feature, if present.
    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.ranking
            .iter()
            .position(|&i| self.feature_names[i] == name)
            .map(|p| p + 1)
    }

    pub fn score_of(&self, name: &str) -> Option<f64> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.scores[i])
    }

    /// Export document: method, scores keyed by feature name, ranking array.
    pub fn to_document(&self) -> serde_json::Value {
        let mut scores = serde_json::Map::new();
        for (name, &score) in self.feature_names.iter().zip(&self.scores) {
            scores.insert(name.clone(), serde_json::json!(score));
        }
        serde_json::json!({
            "method": self.method.to_string(),
            "scores": scores,
            "ranking": self.ranked_names(),
        })
    }
}

/// Mean squared attribution per feature. Columns of a `ShapMatrix` are
/// mean-zero, so this is exactly the population variance of the column.
pub fn variance_importance(shap: &ShapMatrix) -> ImportanceReport {
    let scores = (0..shap.n_features())
        .map(|i| column_mean_product(shap, i, i))
        .collect();
    ImportanceReport::new(
        ImportanceMethod::Variance,
        shap.feature_names.clone(),
        scores,
    )
}

/// Mean of products of two attribution columns; shared by the variance
/// and covariance computations so their diagonals agree exactly.
pub(crate) fn column_mean_product(shap: &ShapMatrix, i: usize, k: usize) -> f64 {
    let n = shap.n_rows();
    if n == 0 {
        return 0.0;
    }
    let mut acc = KahanSum::new();
    for row in &shap.phi {
        acc.add(row[i] * row[k]);
    }
    acc.value() / n as f64
}

/// Sum of absolute attributions per feature.
pub fn l1_importance(shap: &ShapMatrix) -> ImportanceReport {
    let scores = (0..shap.n_features())
        .map(|i| math::sum(shap.column(i).map(f64::abs)))
        .collect();
    ImportanceReport::new(ImportanceMethod::L1, shap.feature_names.clone(), scores)
}

/// Per-feature sum of split gains across all trees. Gains are read from
/// the model file, never recomputed; a split without one is an error.
pub fn gain_importance(ensemble: &TreeEnsemble) -> Result<ImportanceReport, ImportanceError> {
    let mut scores = vec![0.0; ensemble.n_features()];
    for (t, tree) in ensemble.trees().iter().enumerate() {
        for node in tree.nodes() {
            if let NodeKind::Split { feature, gain, .. } = node.kind {
                let gain = gain.ok_or(ImportanceError::MissingGain {
                    tree: t,
                    node: node.id,
                })?;
                scores[feature] += gain;
            }
        }
    }
    Ok(ImportanceReport::new(
        ImportanceMethod::Gain,
        ensemble.feature_names().to_vec(),
        scores,
    ))
}

/// Squared beta coefficients: (a_i * std(X_i))^2, computed against the
/// same dataset the GLM explains. Ranks identically to the variance
/// importance of the GLM's attributions.
pub fn beta_importance(
    glm: &GlmModel,
    stats: &StandardizationStats,
) -> Result<ImportanceReport, ImportanceError> {
    if stats.feature_names != glm.feature_names() {
        return Err(ImportanceError::StatsMismatch {
            stats: stats.feature_names.join(", "),
            model: glm.feature_names().join(", "),
        });
    }
    let scores = glm
        .coefficients()
        .iter()
        .zip(&stats.std)
        .map(|(a, s)| {
            let beta = a * s;
            beta * beta
        })
        .collect();
    Ok(ImportanceReport::new(
        ImportanceMethod::Beta,
        glm.feature_names().to_vec(),
        scores,
    ))
}
