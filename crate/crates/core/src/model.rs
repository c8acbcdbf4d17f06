//! Predictive models: tree ensembles and generalized linear models.
//!
//! Models are parsed from a single JSON document, validated eagerly, and
//! immutable afterwards. All predictions are binary-classification margins
//! on the log-odds scale.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::is_missing;

/// Relative tolerance for the parent-cover == sum-of-child-covers check.
pub const COVER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed model document: {0}")]
    Malformed(String),
    #[error("tree {tree}: cover mismatch at node {node}: parent cover {parent} but children sum to {children_sum}")]
    CoverMismatch {
        tree: usize,
        node: usize,
        parent: f64,
        children_sum: f64,
    },
    #[error(
        "tree {tree}, node {node}: feature index {feature} out of range for {n_features} features"
    )]
    FeatureOutOfRange {
        tree: usize,
        node: usize,
        feature: usize,
        n_features: usize,
    },
    #[error("tree {tree}: {detail}")]
    BadTreeStructure { tree: usize, detail: String },
    #[error("tree {tree}, node {node}: {field} must be finite")]
    NonFinite {
        tree: usize,
        node: usize,
        field: &'static str,
    },
    #[error("glm: {0}")]
    BadGlm(String),
    #[error("duplicate feature name '{0}'")]
    DuplicateFeatureName(String),
    #[error("row has {got} values but the model expects {expected}")]
    RowLength { expected: usize, got: usize },
    #[error("GLM requires complete rows: feature '{feature}' is missing")]
    GlmMissingValue { feature: String },
}

/// A model output on the log-odds scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin(pub f64);

impl From<Margin> for f64 {
    fn from(m: Margin) -> f64 {
        m.0
    }
}

/// Split vs. leaf payload of a tree node. Serialized with a `kind` tag so
/// node records stay flat in the model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeKind {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Branch taken when the split feature is missing.
        default_left: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        gain: Option<f64>,
    },
    Leaf {
        /// Log-odds contribution of this leaf.
        value: f64,
    },
}

/// One node of a decision tree, identified by `id` within its tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    #[serde(flatten)]
    pub kind: NodeKind,
    /// Training-sample weight that reached this node.
    pub cover: f64,
}

impl TreeNode {
    pub fn split(
        id: usize,
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        default_left: bool,
        cover: f64,
    ) -> Self {
        TreeNode {
            id,
            kind: NodeKind::Split {
                feature,
                threshold,
                left,
                right,
                default_left,
                gain: None,
            },
            cover,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn split_with_gain(
        id: usize,
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        default_left: bool,
        cover: f64,
        gain: f64,
    ) -> Self {
        TreeNode {
            id,
            kind: NodeKind::Split {
                feature,
                threshold,
                left,
                right,
                default_left,
                gain: Some(gain),
            },
            cover,
        }
    }

    pub fn leaf(id: usize, value: f64, cover: f64) -> Self {
        TreeNode {
            id,
            kind: NodeKind::Leaf { value },
            cover,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

/// A validated decision tree: single root, acyclic, fully reachable,
/// covers consistent between parents and children.
#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<TreeNode>,
    root_pos: usize,
    // (id, position) pairs sorted by id for binary-search lookup.
    positions: Vec<(usize, usize)>,
}

impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl Tree {
    /// Validates a flat node list and indexes it. `tree_index` only labels
    /// error messages; `n_features` bounds split feature indices.
    pub fn from_nodes(
        nodes: Vec<TreeNode>,
        tree_index: usize,
        n_features: usize,
    ) -> Result<Self, ModelError> {
        let bad = |detail: String| ModelError::BadTreeStructure {
            tree: tree_index,
            detail,
        };
        if nodes.is_empty() {
            return Err(bad("tree has no nodes".into()));
        }

        let mut positions: Vec<(usize, usize)> =
            nodes.iter().enumerate().map(|(p, n)| (n.id, p)).collect();
        positions.sort_unstable();
        for w in positions.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(bad(format!("duplicate node id {}", w[0].0)));
            }
        }
        let pos_of = |id: usize| -> Option<usize> {
            positions
                .binary_search_by_key(&id, |&(id, _)| id)
                .ok()
                .map(|i| positions[i].1)
        };

        // Per-node field checks.
        for node in &nodes {
            if !node.cover.is_finite() || node.cover < 0.0 {
                return Err(ModelError::NonFinite {
                    tree: tree_index,
                    node: node.id,
                    field: "cover",
                });
            }
            match node.kind {
                NodeKind::Split {
                    feature,
                    threshold,
                    gain,
                    ..
                } => {
                    // Splits weight their children by cover; a weightless
                    // split would make those fractions undefined.
                    if node.cover <= 0.0 {
                        return Err(bad(format!("split node {} has zero cover", node.id)));
                    }
                    if !threshold.is_finite() {
                        return Err(ModelError::NonFinite {
                            tree: tree_index,
                            node: node.id,
                            field: "threshold",
                        });
                    }
                    if let Some(g) = gain {
                        if !g.is_finite() {
                            return Err(ModelError::NonFinite {
                                tree: tree_index,
                                node: node.id,
                                field: "gain",
                            });
                        }
                    }
                    if feature >= n_features {
                        return Err(ModelError::FeatureOutOfRange {
                            tree: tree_index,
                            node: node.id,
                            feature,
                            n_features,
                        });
                    }
                }
                NodeKind::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(ModelError::NonFinite {
                            tree: tree_index,
                            node: node.id,
                            field: "value",
                        });
                    }
                }
            }
        }

        // The root is the unique node never referenced as a child.
        let mut referenced = vec![false; nodes.len()];
        for node in &nodes {
            if let NodeKind::Split { left, right, .. } = node.kind {
                for child in [left, right] {
                    let pos = pos_of(child).ok_or_else(|| {
                        bad(format!(
                            "node {} references unknown child {}",
                            node.id, child
                        ))
                    })?;
                    referenced[pos] = true;
                }
            }
        }
        let mut roots = (0..nodes.len()).filter(|&p| !referenced[p]);
        let root_pos = roots
            .next()
            .ok_or_else(|| bad("no root node (reference cycle)".into()))?;
        if let Some(extra) = roots.next() {
            return Err(bad(format!(
                "multiple roots: nodes {} and {}",
                nodes[root_pos].id, nodes[extra].id
            )));
        }

        // Walk from the root: every node exactly once.
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![root_pos];
        let mut visited = 0usize;
        while let Some(pos) = stack.pop() {
            if seen[pos] {
                return Err(bad(format!(
                    "node {} is reachable along two paths (not a tree)",
                    nodes[pos].id
                )));
            }
            seen[pos] = true;
            visited += 1;
            if let NodeKind::Split { left, right, .. } = nodes[pos].kind {
                stack.push(pos_of(left).expect("validated above"));
                stack.push(pos_of(right).expect("validated above"));
            }
        }
        if visited != nodes.len() {
            let orphan = seen.iter().position(|&s| !s).expect("some node unseen");
            return Err(bad(format!(
                "node {} is unreachable from the root",
                nodes[orphan].id
            )));
        }

        // Covers must be conserved down every split.
        for node in &nodes {
            if let NodeKind::Split { left, right, .. } = node.kind {
                let sum = nodes[pos_of(left).unwrap()].cover + nodes[pos_of(right).unwrap()].cover;
                let tol = COVER_TOLERANCE * node.cover.abs().max(1.0);
                if (node.cover - sum).abs() > tol {
                    return Err(ModelError::CoverMismatch {
                        tree: tree_index,
                        node: node.id,
                        parent: node.cover,
                        children_sum: sum,
                    });
                }
            }
        }

        Ok(Tree {
            nodes,
            root_pos,
            positions,
        })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[self.root_pos]
    }

    /// Node lookup by id. Panics on unknown ids, which validation rules out.
    pub fn node(&self, id: usize) -> &TreeNode {
        let i = self
            .positions
            .binary_search_by_key(&id, |&(id, _)| id)
            .expect("node id validated at construction");
        &self.nodes[self.positions[i].1]
    }

    /// The child a row takes at a split node; `None` at a leaf.
    /// Values strictly below the threshold go left, ties go right,
    /// missing values follow the default direction.
    pub fn child_for_row(&self, node: &TreeNode, row: &[f64]) -> Option<usize> {
        match node.kind {
            NodeKind::Leaf { .. } => None,
            NodeKind::Split {
                feature,
                threshold,
                left,
                right,
                default_left,
                ..
            } => {
                let value = row[feature];
                let next = if is_missing(value) {
                    if default_left {
                        left
                    } else {
                        right
                    }
                } else if value < threshold {
                    left
                } else {
                    right
                };
                Some(next)
            }
        }
    }

    /// Routes a row to its unique leaf and returns the leaf's node id.
    /// Total on validated trees: every path terminates, including rows
    /// that are missing everywhere.
    pub fn route(&self, row: &[f64]) -> usize {
        let mut node = self.root();
        while let Some(next) = self.child_for_row(node, row) {
            node = self.node(next);
        }
        node.id
    }

    /// Margin contribution of a row: the value of the leaf it routes to.
    pub fn leaf_value(&self, row: &[f64]) -> f64 {
        match self.node(self.route(row)).kind {
            NodeKind::Leaf { value } => value,
            NodeKind::Split { .. } => unreachable!("route returns a leaf"),
        }
    }
}

/// An additive ensemble of decision trees over a shared feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    trees: Vec<Tree>,
    base_score: f64,
    feature_names: Vec<String>,
}

impl TreeEnsemble {
    pub fn new(
        trees: Vec<Vec<TreeNode>>,
        base_score: f64,
        feature_names: Vec<String>,
    ) -> Result<Self, ModelError> {
        check_unique_names(&feature_names)?;
        if !base_score.is_finite() {
            return Err(ModelError::Malformed("base_score must be finite".into()));
        }
        let n_features = feature_names.len();
        let trees = trees
            .into_iter()
            .enumerate()
            .map(|(i, nodes)| Tree::from_nodes(nodes, i, n_features))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TreeEnsemble {
            trees,
            base_score,
            feature_names,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// base_score plus the sum of per-tree leaf values along the row's routes.
    pub fn margin(&self, row: &[f64]) -> Result<Margin, ModelError> {
        if row.len() != self.n_features() {
            return Err(ModelError::RowLength {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        let mut total = self.base_score;
        for tree in &self.trees {
            total += tree.leaf_value(row);
        }
        Ok(Margin(total))
    }
}

/// A logistic-regression style linear model on the log-odds scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmModel {
    coefficients: Vec<f64>,
    intercept: f64,
    feature_names: Vec<String>,
}

impl GlmModel {
    pub fn new(
        coefficients: Vec<f64>,
        intercept: f64,
        feature_names: Vec<String>,
    ) -> Result<Self, ModelError> {
        check_unique_names(&feature_names)?;
        if coefficients.len() != feature_names.len() {
            return Err(ModelError::BadGlm(format!(
                "{} coefficients for {} features",
                coefficients.len(),
                feature_names.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) || !intercept.is_finite() {
            return Err(ModelError::BadGlm(
                "coefficients and intercept must be finite".into(),
            ));
        }
        Ok(GlmModel {
            coefficients,
            intercept,
            feature_names,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// intercept + sum of coefficient * value. Missing values are an error:
    /// a linear model has no default direction to absorb them.
    pub fn margin(&self, row: &[f64]) -> Result<Margin, ModelError> {
        if row.len() != self.n_features() {
            return Err(ModelError::RowLength {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        let mut total = self.intercept;
        for (i, (&a, &x)) in self.coefficients.iter().zip(row).enumerate() {
            if is_missing(x) {
                return Err(ModelError::GlmMissingValue {
                    feature: self.feature_names[i].clone(),
                });
            }
            total += a * x;
        }
        Ok(Margin(total))
    }
}

/// Either supported model family.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Ensemble(TreeEnsemble),
    Glm(GlmModel),
}

impl Model {
    pub fn feature_names(&self) -> &[String] {
        match self {
            Model::Ensemble(m) => m.feature_names(),
            Model::Glm(m) => m.feature_names(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names().len()
    }

    pub fn predict_margin(&self, row: &[f64]) -> Result<Margin, ModelError> {
        match self {
            Model::Ensemble(m) => m.margin(row),
            Model::Glm(m) => m.margin(row),
        }
    }

    /// Probability of the positive class: the logistic of the margin.
    pub fn predict_proba(&self, row: &[f64]) -> Result<f64, ModelError> {
        let Margin(m) = self.predict_margin(row)?;
        Ok(1.0 / (1.0 + (-m).exp()))
    }
}

fn check_unique_names(names: &[String]) -> Result<(), ModelError> {
    let mut sorted: Vec<&String> = names.iter().collect();
    sorted.sort();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(ModelError::DuplicateFeatureName(w[0].clone()));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Document schema
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ModelDoc {
    Ensemble {
        base_score: f64,
        feature_names: Vec<String>,
        trees: Vec<Vec<TreeNode>>,
    },
    Glm {
        coefficients: Vec<f64>,
        intercept: f64,
        feature_names: Vec<String>,
    },
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<Model, ModelError> {
    let doc: ModelDoc =
        serde_json::from_str(text).map_err(|e| ModelError::Malformed(e.to_string()))?;
    match doc {
        ModelDoc::Ensemble {
            base_score,
            feature_names,
            trees,
        } => Ok(Model::Ensemble(TreeEnsemble::new(
            trees,
            base_score,
            feature_names,
        )?)),
        ModelDoc::Glm {
            coefficients,
            intercept,
            feature_names,
        } => Ok(Model::Glm(GlmModel::new(
            coefficients,
            intercept,
            feature_names,
        )?)),
    }
}

/// Serializes a model to the same document format `parse_model` accepts.
pub fn serialize_model(model: &Model) -> String {
    let doc = match model {
        Model::Ensemble(m) => ModelDoc::Ensemble {
            base_score: m.base_score(),
            feature_names: m.feature_names().to_vec(),
            trees: m.trees().iter().map(|t| t.nodes().to_vec()).collect(),
        },
        Model::Glm(m) => ModelDoc::Glm {
            coefficients: m.coefficients().to_vec(),
            intercept: m.intercept(),
            feature_names: m.feature_names().to_vec(),
        },
    };
    serde_json::to_string_pretty(&doc).expect("model serialization cannot fail")
}
