//! Exact Shapley attributions for tree ensembles and GLMs.
//!
//! Two independent routes compute the same quantity: a brute-force
//! enumeration over feature subsets (exponential, capped, used as the
//! oracle in tests) and a polynomial-time path-tracking walk over each
//! tree. Both condition on a subset by routing observed features and
//! cover-weighting the unobserved branches, so their outputs agree to
//! floating-point precision.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::math::{self, KahanSum};
use crate::model::{GlmModel, Model, ModelError, NodeKind, Tree, TreeEnsemble, TreeNode};

/// Cap on brute-force enumeration: 2^20 subsets is the most the oracle
/// will evaluate. It is a test instrument, not a production path.
pub const BRUTE_FORCE_MAX_FEATURES: usize = 20;

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error("brute-force Shapley supports at most {max} features, model has {actual}")]
    TooManyFeatures { actual: usize, max: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("shap matrix: {0}")]
    BadMatrix(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Uncentered per-feature Shapley values for one row, plus the model
/// output expected when no feature is observed. Their sum reproduces the
/// row's margin.
#[derive(Debug, Clone)]
pub struct RawPhiVector {
    pub phi: Vec<f64>,
    pub expected_value: f64,
}

impl RawPhiVector {
    pub fn total(&self) -> f64 {
        self.expected_value + math::sum(self.phi.iter().copied())
    }
}

// ---------------------------------------------------------------------------
// Subset-conditional expectation
// ---------------------------------------------------------------------------

/// Model output for a row when only the features in `subset` are observed:
/// observed splits route normally (missing values take the default
/// direction), unobserved splits average both children weighted by cover.
pub fn conditional_expectation(tree: &Tree, row: &[f64], subset: &[usize]) -> f64 {
    let mut observed = vec![false; row.len()];
    for &i in subset {
        observed[i] = true;
    }
    cond_exp_rec(tree, tree.root(), row, &|f| observed[f])
}

fn cond_exp_rec(
    tree: &Tree,
    node: &TreeNode,
    row: &[f64],
    observed: &impl Fn(usize) -> bool,
) -> f64 {
    match node.kind {
        NodeKind::Leaf { value } => value,
        NodeKind::Split {
            feature,
            left,
            right,
            ..
        } => {
            if observed(feature) {
                let next = tree.child_for_row(node, row).expect("split has children");
                cond_exp_rec(tree, tree.node(next), row, observed)
            } else {
                let l = tree.node(left);
                let r = tree.node(right);
                (l.cover / node.cover) * cond_exp_rec(tree, l, row, observed)
                    + (r.cover / node.cover) * cond_exp_rec(tree, r, row, observed)
            }
        }
    }
}

/// Cover-weighted mean leaf value: the output expected of a tree when
/// nothing is observed.
pub fn tree_expected_value(tree: &Tree) -> f64 {
    expected_rec(tree, tree.root())
}

fn expected_rec(tree: &Tree, node: &TreeNode) -> f64 {
    match node.kind {
        NodeKind::Leaf { value } => value,
        NodeKind::Split { left, right, .. } => {
            let l = tree.node(left);
            let r = tree.node(right);
            (l.cover / node.cover) * expected_rec(tree, l)
                + (r.cover / node.cover) * expected_rec(tree, r)
        }
    }
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

fn binomial(n: usize, r: usize) -> f64 {
    let r = r.min(n - r);
    let mut num = 1.0;
    let mut den = 1.0;
    for i in 0..r {
        num *= (n - i) as f64;
        den *= (i + 1) as f64;
    }
    num / den
}

/// Weight of a subset of size `s` when attributing among `k` players:
/// s!(k-s-1)!/k! expressed as 1/(k * C(k-1, s)).
fn shapley_weight(k: usize, s: usize) -> f64 {
    1.0 / (k as f64 * binomial(k - 1, s))
}

fn brute_force_from_values(values: &[f64], k: usize) -> Vec<f64> {
    let mut phi = vec![0.0; k];
    for (i, phi_i) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        let mut acc = KahanSum::new();
        for mask in 0..values.len() {
            if mask & bit != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            acc.add(shapley_weight(k, s) * (values[mask | bit] - values[mask]));
        }
        *phi_i = acc.value();
    }
    phi
}

/// Exact Shapley values by enumerating every feature subset. The subset
/// value is the cover-weighted conditional expectation summed over trees
/// plus the base score.
pub fn shapley_bruteforce(
    ensemble: &TreeEnsemble,
    row: &[f64],
) -> Result<RawPhiVector, AttributionError> {
    let k = ensemble.n_features();
    if k > BRUTE_FORCE_MAX_FEATURES {
        return Err(AttributionError::TooManyFeatures {
            actual: k,
            max: BRUTE_FORCE_MAX_FEATURES,
        });
    }
    if row.len() != k {
        return Err(ModelError::RowLength {
            expected: k,
            got: row.len(),
        }
        .into());
    }
    let mut values = vec![0.0; 1usize << k];
    for (mask, value) in values.iter_mut().enumerate() {
        let mut total = ensemble.base_score();
        for tree in ensemble.trees() {
            total += cond_exp_rec(tree, tree.root(), row, &|f| mask & (1usize << f) != 0);
        }
        *value = total;
    }
    let phi = brute_force_from_values(&values, k);
    Ok(RawPhiVector {
        phi,
        expected_value: values[0],
    })
}

/// Brute-force Shapley values for a GLM. Unobserved features contribute
/// their background mean, so the subset value is
/// intercept + sum(observed a_i x_i) + sum(unobserved a_i mean_i).
pub fn shapley_bruteforce_glm(
    glm: &GlmModel,
    row: &[f64],
    feature_means: &[f64],
) -> Result<RawPhiVector, AttributionError> {
    let k = glm.n_features();
    if k > BRUTE_FORCE_MAX_FEATURES {
        return Err(AttributionError::TooManyFeatures {
            actual: k,
            max: BRUTE_FORCE_MAX_FEATURES,
        });
    }
    if row.len() != k || feature_means.len() != k {
        return Err(ModelError::RowLength {
            expected: k,
            got: row.len().min(feature_means.len()),
        }
        .into());
    }
    for (i, &x) in row.iter().enumerate() {
        if x.is_nan() {
            return Err(ModelError::GlmMissingValue {
                feature: glm.feature_names()[i].clone(),
            }
            .into());
        }
    }
    let coef = glm.coefficients();
    let mut values = vec![0.0; 1usize << k];
    for (mask, value) in values.iter_mut().enumerate() {
        let mut total = glm.intercept();
        for i in 0..k {
            total += if mask & (1usize << i) != 0 {
                coef[i] * row[i]
            } else {
                coef[i] * feature_means[i]
            };
        }
        *value = total;
    }
    let phi = brute_force_from_values(&values, k);
    Ok(RawPhiVector {
        phi,
        expected_value: values[0],
    })
}

// ---------------------------------------------------------------------------
// Polynomial-time tree path algorithm
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

const EMPTY_ELEMENT: PathElement = PathElement {
    feature: None,
    zero_fraction: 0.0,
    one_fraction: 0.0,
    pweight: 0.0,
};

fn extend_path(
    path: &mut Vec<PathElement>,
    depth: usize,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) {
    if path.len() <= depth {
        path.resize(depth + 1, EMPTY_ELEMENT);
    }
    path[depth] = PathElement {
        feature,
        zero_fraction,
        one_fraction,
        pweight: if depth == 0 { 1.0 } else { 0.0 },
    };
    for i in (0..depth).rev() {
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) as f64 / (depth + 1) as f64;
        path[i].pweight = zero_fraction * path[i].pweight * (depth - i) as f64 / (depth + 1) as f64;
    }
}

fn unwind_path(path: &mut [PathElement], depth: usize, index: usize) {
    let one_fraction = path[index].one_fraction;
    let zero_fraction = path[index].zero_fraction;
    let mut next_one_portion = path[depth].pweight;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight =
                next_one_portion * (depth + 1) as f64 / ((i + 1) as f64 * one_fraction);
            next_one_portion =
                tmp - path[i].pweight * zero_fraction * (depth - i) as f64 / (depth + 1) as f64;
        } else {
            path[i].pweight =
                path[i].pweight * (depth + 1) as f64 / (zero_fraction * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

fn unwound_path_sum(path: &[PathElement], depth: usize, index: usize) -> f64 {
    let one_fraction = path[index].one_fraction;
    let zero_fraction = path[index].zero_fraction;
    let mut next_one_portion = path[depth].pweight;
    let mut total = 0.0;
    if one_fraction != 0.0 {
        for i in (0..depth).rev() {
            let tmp = next_one_portion / ((i + 1) as f64 * one_fraction);
            total += tmp;
            next_one_portion = path[i].pweight - tmp * zero_fraction * (depth - i) as f64;
        }
    } else {
        for i in (0..depth).rev() {
            total += path[i].pweight / (zero_fraction * (depth - i) as f64);
        }
    }
    total * (depth + 1) as f64
}

#[allow(clippy::too_many_arguments)]
fn tree_shap_recurse(
    tree: &Tree,
    row: &[f64],
    phi: &mut [f64],
    node: &TreeNode,
    mut depth: usize,
    mut path: Vec<PathElement>,
    parent_zero_fraction: f64,
    parent_one_fraction: f64,
    parent_feature: Option<usize>,
) {
    extend_path(
        &mut path,
        depth,
        parent_zero_fraction,
        parent_one_fraction,
        parent_feature,
    );
    match node.kind {
        NodeKind::Leaf { value } => {
            for i in 1..=depth {
                let w = unwound_path_sum(&path, depth, i);
                let el = &path[i];
                let feature = el.feature.expect("interior path elements carry a feature");
                phi[feature] += w * (el.one_fraction - el.zero_fraction) * value;
            }
        }
        NodeKind::Split {
            feature,
            left,
            right,
            ..
        } => {
            let hot_id = tree.child_for_row(node, row).expect("split has children");
            let cold_id = if hot_id == left { right } else { left };
            let hot = tree.node(hot_id);
            let cold = tree.node(cold_id);
            let hot_zero_fraction = hot.cover / node.cover;
            let cold_zero_fraction = cold.cover / node.cover;

            // A feature revisited along the path first has its earlier
            // contribution unwound, then re-enters with merged fractions.
            let mut incoming_zero_fraction = 1.0;
            let mut incoming_one_fraction = 1.0;
            if let Some(index) = (1..=depth).find(|&i| path[i].feature == Some(feature)) {
                incoming_zero_fraction = path[index].zero_fraction;
                incoming_one_fraction = path[index].one_fraction;
                unwind_path(&mut path, depth, index);
                depth -= 1;
            }

            tree_shap_recurse(
                tree,
                row,
                phi,
                hot,
                depth + 1,
                path.clone(),
                hot_zero_fraction * incoming_zero_fraction,
                incoming_one_fraction,
                Some(feature),
            );
            tree_shap_recurse(
                tree,
                row,
                phi,
                cold,
                depth + 1,
                path,
                cold_zero_fraction * incoming_zero_fraction,
                0.0,
                Some(feature),
            );
        }
    }
}

/// Exact Shapley values in time polynomial in tree size and depth.
/// Matches `shapley_bruteforce` to floating-point precision.
///
/// Panics if the row length differs from the model's feature count.
pub fn tree_shap(ensemble: &TreeEnsemble, row: &[f64]) -> RawPhiVector {
    assert_eq!(
        row.len(),
        ensemble.n_features(),
        "row length must match the model's feature count"
    );
    let mut phi = vec![0.0; ensemble.n_features()];
    let mut expected_value = ensemble.base_score();
    for tree in ensemble.trees() {
        tree_shap_recurse(
            tree,
            row,
            &mut phi,
            tree.root(),
            0,
            Vec::new(),
            1.0,
            1.0,
            None,
        );
        expected_value += tree_expected_value(tree);
    }
    RawPhiVector {
        phi,
        expected_value,
    }
}

// ---------------------------------------------------------------------------
// Centered attribution matrices
// ---------------------------------------------------------------------------

/// Centered Shapley attributions for a whole dataset: a base value plus
/// one mean-zero column per feature, satisfying local accuracy row-wise
/// (base + row sum = margin).
#[derive(Debug, Clone)]
pub struct ShapMatrix {
    pub phi0: f64,
    /// n_rows x n_features, row major.
    pub phi: Vec<Vec<f64>>,
    pub feature_names: Vec<String>,
    pub row_ids: Vec<usize>,
}

/// Companion document carrying what the matrix CSV cannot: the base value
/// and the authoritative feature order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapSidecar {
    pub phi0: f64,
    pub feature_names: Vec<String>,
}

impl ShapMatrix {
    pub fn new(
        phi0: f64,
        phi: Vec<Vec<f64>>,
        feature_names: Vec<String>,
        row_ids: Vec<usize>,
    ) -> Result<Self, AttributionError> {
        if phi.len() != row_ids.len() {
            return Err(AttributionError::BadMatrix(format!(
                "{} rows but {} row ids",
                phi.len(),
                row_ids.len()
            )));
        }
        for row in &phi {
            if row.len() != feature_names.len() {
                return Err(AttributionError::BadMatrix(format!(
                    "row width {} but {} feature names",
                    row.len(),
                    feature_names.len()
                )));
            }
        }
        Ok(ShapMatrix {
            phi0,
            phi,
            feature_names,
            row_ids,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.phi.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.phi.iter().map(move |row| row[i])
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Left-to-right sum of a row's attributions.
    pub fn row_total(&self, j: usize) -> f64 {
        self.phi[j].iter().sum()
    }

    pub fn sidecar(&self) -> ShapSidecar {
        ShapSidecar {
            phi0: self.phi0,
            feature_names: self.feature_names.clone(),
        }
    }

    /// CSV export: a row_id column then one column per feature. Values are
    /// printed shortest-round-trip, so a reload reproduces them exactly.
    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["row_id".to_string()];
        header.extend(self.feature_names.iter().cloned());
        wtr.write_record(&header).expect("csv write");
        for (j, row) in self.phi.iter().enumerate() {
            let mut rec = vec![self.row_ids[j].to_string()];
            rec.extend(row.iter().map(|v| format!("{v}")));
            wtr.write_record(&rec).expect("csv write");
        }
        String::from_utf8(wtr.into_inner().expect("csv flush")).expect("csv utf8")
    }

    pub fn from_csv(text: &str, sidecar: &ShapSidecar) -> Result<Self, AttributionError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| AttributionError::BadMatrix(e.to_string()))?
            .clone();
        let mut it = headers.iter();
        if it.next() != Some("row_id") {
            return Err(AttributionError::BadMatrix(
                "first column must be row_id".into(),
            ));
        }
        let names: Vec<String> = it.map(|s| s.to_string()).collect();
        if names != sidecar.feature_names {
            return Err(AttributionError::BadMatrix(
                "csv columns do not match the sidecar feature order".into(),
            ));
        }
        let mut phi = Vec::new();
        let mut row_ids = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| AttributionError::BadMatrix(e.to_string()))?;
            if record.len() != names.len() + 1 {
                return Err(AttributionError::BadMatrix(format!(
                    "row {} has {} cells, expected {}",
                    row_ids.len(),
                    record.len(),
                    names.len() + 1
                )));
            }
            let mut cells = record.iter();
            let id: usize = cells
                .next()
                .unwrap()
                .parse()
                .map_err(|_| AttributionError::BadMatrix("row_id must be an integer".into()))?;
            let values = cells
                .map(|c| c.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|_| AttributionError::BadMatrix(format!("bad phi value in row {id}")))?;
            row_ids.push(id);
            phi.push(values);
        }
        ShapMatrix::new(sidecar.phi0, phi, sidecar.feature_names.clone(), row_ids)
    }
}

/// Explains every dataset row against the model. Raw Shapley values come
/// from the tree path algorithm (or the GLM closed form); the base value
/// is the mean margin over the dataset and each column is centered to
/// mean zero, which leaves local accuracy intact.
pub fn explain(model: &Model, dataset: &Dataset) -> Result<ShapMatrix, AttributionError> {
    if dataset.n_rows() == 0 {
        return Err(AttributionError::EmptyDataset);
    }
    match model {
        Model::Glm(glm) => glm_shap(glm, dataset),
        Model::Ensemble(ensemble) => {
            let aligned = dataset.aligned_to(model.feature_names())?;
            let rows = aligned.numeric_rows()?;
            let n = rows.len();
            let k = ensemble.n_features();

            let mut raw: Vec<Vec<f64>> = Vec::with_capacity(n);
            let mut margin_sum = KahanSum::new();
            for row in &rows {
                raw.push(tree_shap(ensemble, row).phi);
                margin_sum.add(ensemble.margin(row)?.0);
            }
            let phi0 = margin_sum.value() / n as f64;

            for i in 0..k {
                let mean = math::mean(raw.iter().map(|r| r[i]));
                for row in &mut raw {
                    row[i] -= mean;
                }
            }
            ShapMatrix::new(
                phi0,
                raw,
                ensemble.feature_names().to_vec(),
                (0..n).collect(),
            )
        }
    }
}

/// Closed-form GLM attributions: phi[j][i] = a_i * (x - mean_i), with the
/// base value intercept + sum(a_i * mean_i). Requires complete rows.
pub fn glm_shap(glm: &GlmModel, dataset: &Dataset) -> Result<ShapMatrix, AttributionError> {
    if dataset.n_rows() == 0 {
        return Err(AttributionError::EmptyDataset);
    }
    let aligned = dataset.aligned_to(glm.feature_names())?;
    let k = glm.n_features();
    let n = aligned.n_rows();
    let coef = glm.coefficients();

    let mut means = Vec::with_capacity(k);
    for i in 0..k {
        let col = aligned.numeric_column(i)?;
        if col.iter().any(|v| v.is_nan()) {
            return Err(ModelError::GlmMissingValue {
                feature: glm.feature_names()[i].clone(),
            }
            .into());
        }
        means.push(math::mean(col.iter().copied()));
    }

    let mut phi = vec![vec![0.0; k]; n];
    for i in 0..k {
        let col = aligned.numeric_column(i)?;
        for (j, row) in phi.iter_mut().enumerate() {
            row[i] = coef[i] * (col[j] - means[i]);
        }
    }
    let phi0 = glm.intercept() + math::sum((0..k).map(|i| coef[i] * means[i]));
    ShapMatrix::new(phi0, phi, glm.feature_names().to_vec(), (0..n).collect())
}
