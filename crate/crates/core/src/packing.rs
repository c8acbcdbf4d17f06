//! Feature packing: merging related attribution columns into one grouped
//! feature without touching the model.
//!
//! A packed column is the row-wise sum of its members, so local accuracy
//! survives packing and the grouped importance decomposes into member
//! variances plus twice their pairwise covariances.

use thiserror::Error;

use crate::attribution::ShapMatrix;
use crate::importance::column_mean_product;
use crate::math::KahanSum;

#[derive(Debug, Error)]
pub enum PackingError {
    #[error("group '{name}' needs at least two distinct members")]
    GroupTooSmall { name: String },
    #[error(
        "group '{name}' references feature index {index}, but the matrix has {n_features} features"
    )]
    UnknownIndex {
        name: String,
        index: usize,
        n_features: usize,
    },
    #[error("groups overlap on feature '{feature}'")]
    OverlappingGroups { feature: String },
    #[error("group name '{0}' collides with another column")]
    DuplicateName(String),
    #[error("covariance suggestion threshold must be > 0, got {0}")]
    BadThreshold(f64),
    #[error("group '{name}' references unknown feature '{feature}'")]
    UnknownFeature { name: String, feature: String },
}

/// A named set of at least two feature indices to pack together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureGroup {
    name: String,
    members: Vec<usize>,
}

impl FeatureGroup {
    pub fn new(name: impl Into<String>, members: Vec<usize>) -> Result<Self, PackingError> {
        let name = name.into();
        let mut members = members;
        members.sort_unstable();
        members.dedup();
        if members.len() < 2 {
            return Err(PackingError::GroupTooSmall { name });
        }
        Ok(FeatureGroup { name, members })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Member indices, ascending and unique.
    pub fn members(&self) -> &[usize] {
        &self.members
    }
}

/// Symmetric matrix of population covariances between attribution columns.
/// Its diagonal equals the variance importance scores exactly.
#[derive(Debug, Clone)]
pub struct ShapCovariance {
    pub feature_names: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

impl ShapCovariance {
    pub fn cov(&self, i: usize, k: usize) -> f64 {
        self.matrix[i][k]
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }
}

/// Covariance of attribution columns: mean of element-wise products
/// (columns are already mean-zero).
#[allow(clippy::needless_range_loop)]
pub fn shap_covariance(shap: &ShapMatrix) -> ShapCovariance {
    let k = shap.n_features();
    let mut matrix = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let c = column_mean_product(shap, i, j);
            matrix[i][j] = c;
            matrix[j][i] = c;
        }
    }
    ShapCovariance {
        feature_names: shap.feature_names.clone(),
        matrix,
    }
}

fn validate_groups(shap: &ShapMatrix, groups: &[FeatureGroup]) -> Result<(), PackingError> {
    let k = shap.n_features();
    let mut owner = vec![false; k];
    for group in groups {
        for &m in group.members() {
            if m >= k {
                return Err(PackingError::UnknownIndex {
                    name: group.name().to_string(),
                    index: m,
                    n_features: k,
                });
            }
            if owner[m] {
                return Err(PackingError::OverlappingGroups {
                    feature: shap.feature_names[m].clone(),
                });
            }
            owner[m] = true;
        }
    }
    Ok(())
}

/// Replaces each group's member columns with their row-wise sum, placed at
/// the position of the group's first member and named after the group.
/// Ungrouped columns, the base value, and row ids are untouched, so every
/// row keeps its total and local accuracy still holds.
pub fn pack(shap: &ShapMatrix, groups: &[FeatureGroup]) -> Result<ShapMatrix, PackingError> {
    validate_groups(shap, groups)?;
    let k = shap.n_features();

    // column position -> group owning it (if any)
    let mut group_of = vec![None; k];
    for (g, group) in groups.iter().enumerate() {
        for &m in group.members() {
            group_of[m] = Some(g);
        }
    }

    let mut names = Vec::new();
    let mut emitted = vec![false; groups.len()];
    // (output column) -> source indices summed into it
    let mut sources: Vec<Vec<usize>> = Vec::new();
    for (i, owner) in group_of.iter().enumerate() {
        match *owner {
            None => {
                names.push(shap.feature_names[i].clone());
                sources.push(vec![i]);
            }
            Some(g) if !emitted[g] => {
                emitted[g] = true;
                names.push(groups[g].name().to_string());
                sources.push(groups[g].members().to_vec());
            }
            Some(_) => {} // later member of an already emitted group
        }
    }

    let mut sorted_names: Vec<&String> = names.iter().collect();
    sorted_names.sort();
    for w in sorted_names.windows(2) {
        if w[0] == w[1] {
            return Err(PackingError::DuplicateName(w[0].to_string()));
        }
    }

    let phi = shap
        .phi
        .iter()
        .map(|row| {
            sources
                .iter()
                .map(|src| src.iter().map(|&i| row[i]).sum())
                .collect()
        })
        .collect();
    Ok(ShapMatrix::new(shap.phi0, phi, names, shap.row_ids.clone())
        .expect("packed matrix shape is consistent by construction"))
}

/// Importance of a group packed into one feature: the sum of member
/// variances plus twice every pairwise covariance. Equals the variance
/// importance of the packed column.
pub fn grouped_importance(shap: &ShapMatrix, group: &FeatureGroup) -> f64 {
    let members = group.members();
    for &m in members {
        assert!(m < shap.n_features(), "group member index out of range");
    }
    let mut acc = KahanSum::new();
    for (a, &i) in members.iter().enumerate() {
        acc.add(column_mean_product(shap, i, i));
        for &k in &members[a + 1..] {
            acc.add(2.0 * column_mean_product(shap, i, k));
        }
    }
    acc.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuggestMode {
    /// Group features sharing the name prefix before the last '.' or '='.
    Prefix,
    /// Greedily union features whose attribution columns are strongly
    /// correlated (normalized |covariance| at or above the threshold).
    Covariance,
}

/// Proposes feature groups. Groups of a single feature are dropped.
pub fn suggest_groups(
    shap: &ShapMatrix,
    mode: SuggestMode,
    threshold: f64,
) -> Result<Vec<FeatureGroup>, PackingError> {
    match mode {
        SuggestMode::Prefix => {
            let mut by_prefix: std::collections::BTreeMap<String, Vec<usize>> = Default::default();
            for (i, name) in shap.feature_names.iter().enumerate() {
                let prefix = match name.rfind(['.', '=']) {
                    Some(pos) => &name[..pos],
                    None => name.as_str(),
                };
                by_prefix.entry(prefix.to_string()).or_default().push(i);
            }
            Ok(by_prefix
                .into_iter()
                .filter(|(_, members)| members.len() >= 2)
                .map(|(prefix, members)| {
                    FeatureGroup::new(prefix, members).expect("two or more members")
                })
                .collect())
        }
        SuggestMode::Covariance => {
            if threshold <= 0.0 {
                return Err(PackingError::BadThreshold(threshold));
            }
            let k = shap.n_features();
            let cov = shap_covariance(shap);
            let mut parent: Vec<usize> = (0..k).collect();
            fn find(parent: &mut [usize], mut x: usize) -> usize {
                while parent[x] != x {
                    parent[x] = parent[parent[x]];
                    x = parent[x];
                }
                x
            }
            for i in 0..k {
                for j in i + 1..k {
                    let denom = (cov.cov(i, i) * cov.cov(j, j)).sqrt();
                    let normalized = if denom == 0.0 {
                        0.0
                    } else {
                        cov.cov(i, j).abs() / denom
                    };
                    if normalized >= threshold {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
            let mut components: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
            for i in 0..k {
                let root = find(&mut parent, i);
                components.entry(root).or_default().push(i);
            }
            Ok(components
                .into_values()
                .filter(|members| members.len() >= 2)
                .map(|members| {
                    let name = members
                        .iter()
                        .map(|&i| shap.feature_names[i].as_str())
                        .collect::<Vec<_>>()
                        .join("+");
                    FeatureGroup::new(name, members).expect("two or more members")
                })
                .collect())
        }
    }
}

/// Resolves a name -> member-feature-names mapping (the groups file
/// format) against a matrix's feature order.
pub fn resolve_groups(
    shap: &ShapMatrix,
    named: &[(String, Vec<String>)],
) -> Result<Vec<FeatureGroup>, PackingError> {
    named
        .iter()
        .map(|(name, features)| {
            let members = features
                .iter()
                .map(|f| {
                    shap.feature_index(f)
                        .ok_or_else(|| PackingError::UnknownFeature {
                            name: name.clone(),
                            feature: f.clone(),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            FeatureGroup::new(name.clone(), members)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::importance::variance_importance;

    fn matrix(names: &[&str], rows: &[&[f64]]) -> ShapMatrix {
        ShapMatrix::new(
            0.25,
            rows.iter().map(|r| r.to_vec()).collect(),
            names.iter().map(|s| s.to_string()).collect(),
            (0..rows.len()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn covariance_of_twin_and_opposed_columns() {
        let twins = matrix(&["a", "b"], &[&[-1.0, -1.0], &[1.0, 1.0]]);
        assert_eq!(shap_covariance(&twins).cov(0, 1), 1.0);

        let opposed = matrix(&["a", "b"], &[&[-1.0, 1.0], &[1.0, -1.0]]);
        assert_eq!(shap_covariance(&opposed).cov(0, 1), -1.0);

        let with_zero = matrix(&["a", "b"], &[&[-1.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(shap_covariance(&with_zero).cov(0, 1), 0.0);
    }

    #[test]
    fn covariance_diagonal_equals_variance_scores() {
        let shap = matrix(&["a", "b"], &[&[0.3, -0.7], &[-0.2, 0.5], &[-0.1, 0.2]]);
        let cov = shap_covariance(&shap);
        let imp = variance_importance(&shap);
        for i in 0..2 {
            assert_eq!(cov.cov(i, i), imp.scores[i]);
            for k in 0..2 {
                assert_eq!(cov.cov(i, k), cov.cov(k, i));
            }
        }
    }

    #[test]
    fn pack_sums_member_columns() {
        let shap = matrix(&["a", "b"], &[&[1.0, 1.0], &[-1.0, -1.0]]);
        let group = FeatureGroup::new("ab", vec![0, 1]).unwrap();
        let packed = pack(&shap, &[group]).unwrap();
        assert_eq!(packed.feature_names, vec!["ab"]);
        assert_eq!(packed.phi, vec![vec![2.0], vec![-2.0]]);
        assert_eq!(packed.phi0, shap.phi0);
    }

    #[test]
    fn pack_with_zero_addend_keeps_the_column() {
        let shap = matrix(&["a", "z"], &[&[1.0, 0.0], &[-1.0, 0.0]]);
        let group = FeatureGroup::new("g", vec![0, 1]).unwrap();
        let packed = pack(&shap, &[group]).unwrap();
        assert_eq!(packed.phi, vec![vec![1.0], vec![-1.0]]);
    }

    #[test]
    fn pack_preserves_row_totals() {
        let shap = matrix(
            &["a", "b", "c"],
            &[&[0.5, -0.25, 0.125], &[-0.5, 0.25, -0.125]],
        );
        let group = FeatureGroup::new("bc", vec![1, 2]).unwrap();
        let packed = pack(&shap, &[group]).unwrap();
        for j in 0..2 {
            assert_eq!(packed.row_total(j), shap.row_total(j));
        }
    }

    #[test]
    fn pack_rejects_overlap_and_unknown_indices() {
        let shap = matrix(&["a", "b", "c"], &[&[0.0, 0.0, 0.0]]);
        let g1 = FeatureGroup::new("g1", vec![0, 1]).unwrap();
        let g2 = FeatureGroup::new("g2", vec![1, 2]).unwrap();
        assert!(matches!(
            pack(&shap, &[g1.clone(), g2]).unwrap_err(),
            PackingError::OverlappingGroups { .. }
        ));

        let wild = FeatureGroup::new("wild", vec![0, 9]).unwrap();
        assert!(matches!(
            pack(&shap, &[wild]).unwrap_err(),
            PackingError::UnknownIndex { .. }
        ));

        assert!(matches!(
            FeatureGroup::new("small", vec![1, 1]).unwrap_err(),
            PackingError::GroupTooSmall { .. }
        ));
    }

    #[test]
    fn grouped_importance_matches_hand_values() {
        let twins = matrix(&["a", "b"], &[&[1.0, 1.0], &[-1.0, -1.0]]);
        let group = FeatureGroup::new("g", vec![0, 1]).unwrap();
        // 1 + 1 + 2*1
        assert_eq!(grouped_importance(&twins, &group), 4.0);

        let opposed = matrix(&["a", "b"], &[&[1.0, -1.0], &[-1.0, 1.0]]);
        // 1 + 1 + 2*(-1)
        assert_eq!(grouped_importance(&opposed, &group), 0.0);

        let independent = matrix(
            &["a", "b"],
            &[&[1.0, 1.0], &[1.0, -1.0], &[-1.0, 1.0], &[-1.0, -1.0]],
        );
        assert_eq!(grouped_importance(&independent, &group), 2.0);
    }

    #[test]
    fn grouped_importance_equals_packed_column_variance() {
        let shap = matrix(
            &["a", "b", "c"],
            &[
                &[0.5, 0.375, -0.125],
                &[-0.25, -0.5, 0.75],
                &[-0.25, 0.125, -0.625],
            ],
        );
        let group = FeatureGroup::new("g", vec![0, 2]).unwrap();
        let direct = grouped_importance(&shap, &group);
        let packed = pack(&shap, std::slice::from_ref(&group)).unwrap();
        let idx = packed.feature_index("g").unwrap();
        let via_pack = variance_importance(&packed).scores[idx];
        assert!((direct - via_pack).abs() <= 1e-12, "{direct} vs {via_pack}");

        // Difference from the member sum is exactly twice the covariance.
        let parts: f64 = group
            .members()
            .iter()
            .map(|&i| variance_importance(&shap).scores[i])
            .sum();
        let cov = shap_covariance(&shap).cov(0, 2);
        assert!((direct - parts - 2.0 * cov).abs() <= 1e-12);
    }

    #[test]
    fn prefix_suggestion_groups_shared_stems() {
        let shap = matrix(&["adl.walk", "adl.eat", "nihss"], &[&[0.0, 0.0, 0.0]]);
        let groups = suggest_groups(&shap, SuggestMode::Prefix, 1.0).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].name(), "adl");
        assert_eq!(groups[0].members(), &[0, 1]);
    }

    #[test]
    fn covariance_suggestion_unions_correlated_columns() {
        let shap = matrix(
            &["a", "b", "c"],
            &[&[1.0, 1.0, 0.5], &[-1.0, -1.0, -0.25], &[0.0, 0.0, -0.25]],
        );
        let groups = suggest_groups(&shap, SuggestMode::Covariance, 0.9).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].members(), &[0, 1]);
    }

    #[test]
    fn covariance_suggestion_guards_zero_variance() {
        let shap = matrix(&["a", "b"], &[&[0.0, 0.0], &[0.0, 0.0]]);
        let groups = suggest_groups(&shap, SuggestMode::Covariance, 0.9).unwrap();
        assert!(groups.is_empty());

        assert!(matches!(
            suggest_groups(&shap, SuggestMode::Covariance, 0.0).unwrap_err(),
            PackingError::BadThreshold(_)
        ));
    }

    #[test]
    fn resolve_groups_maps_names_to_indices() {
        let shap = matrix(&["a", "b", "c"], &[&[0.0, 0.0, 0.0]]);
        let groups = resolve_groups(&shap, &[("g".into(), vec!["c".into(), "a".into()])]).unwrap();
        assert_eq!(groups[0].members(), &[0, 2]);

        let err =
            resolve_groups(&shap, &[("g".into(), vec!["a".into(), "zz".into()])]).unwrap_err();
        assert!(matches!(err, PackingError::UnknownFeature { .. }), "{err}");
    }
}
