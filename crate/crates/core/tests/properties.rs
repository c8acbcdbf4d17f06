//! Property tests: oracle equivalence, local accuracy, Shapley axioms,
//! packing identities, and encoding invariants on randomized inputs.

mod common;

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use shapkit::dataset::{one_hot_encode, standardize, Column, Dataset};
use shapkit::importance::{l1_importance, variance_importance};
use shapkit::model::{GlmModel, Model, TreeEnsemble, TreeNode};
use shapkit::packing::{grouped_importance, pack, shap_covariance, FeatureGroup};
use shapkit::{explain, glm_shap, shapley_bruteforce, tree_shap, ShapMatrix};

fn random_rows(rng: &mut ChaCha8Rng, n: usize, k: usize, missing_rate: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..k)
                .map(|_| {
                    if rng.random::<f64>() < missing_rate {
                        f64::NAN
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect()
        })
        .collect()
}

fn dataset_from_rows(rows: &[Vec<f64>], k: usize) -> Dataset {
    let columns = (0..k)
        .map(|i| Column::numeric(format!("f{i}"), rows.iter().map(|r| r[i]).collect()))
        .collect();
    Dataset::from_columns(columns, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_shap_equals_bruteforce(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ensemble = common::random_ensemble(&mut rng, 4, 3);
        let mut rows = common::exhaustive_binary_rows(4);
        rows.extend(random_rows(&mut rng, 6, 4, 0.3));
        for row in &rows {
            let fast = tree_shap(&ensemble, row);
            let brute = shapley_bruteforce(&ensemble, row).unwrap();
            for (a, b) in fast.phi.iter().zip(&brute.phi) {
                prop_assert!((a - b).abs() <= 1e-9, "phi {a} vs {b}");
            }
            prop_assert!((fast.expected_value - brute.expected_value).abs() <= 1e-9);
        }
    }

    #[test]
    fn raw_phi_plus_expectation_reproduces_margin(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ensemble = common::random_ensemble(&mut rng, 4, 3);
        for row in random_rows(&mut rng, 10, 4, 0.2) {
            let raw = tree_shap(&ensemble, &row);
            let margin = ensemble.margin(&row).unwrap().0;
            prop_assert!((raw.total() - margin).abs() <= 1e-9);
        }
    }

    #[test]
    fn explain_satisfies_local_accuracy_and_centering(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ensemble = common::random_ensemble(&mut rng, 4, 3);
        let rows = random_rows(&mut rng, 40, 4, 0.15);
        let dataset = dataset_from_rows(&rows, 4);
        let model = Model::Ensemble(ensemble);
        let shap = explain(&model, &dataset).unwrap();

        for (j, row) in rows.iter().enumerate() {
            let margin = model.predict_margin(row).unwrap().0;
            let recon = shap.phi0 + shap.phi[j].iter().sum::<f64>();
            prop_assert!((recon - margin).abs() <= 1e-9, "row {j}: {recon} vs {margin}");
        }
        for i in 0..shap.n_features() {
            let mean = shapkit::math::mean(shap.column(i));
            prop_assert!(mean.abs() <= 1e-12, "column {i} mean {mean}");
        }
    }

    #[test]
    fn unused_features_get_zero_attribution(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Ensemble over 3 features, but an extra never-used fourth.
        let inner = common::random_ensemble(&mut rng, 3, 3);
        let trees = inner.trees().iter().map(|t| t.nodes().to_vec()).collect();
        let names = (0..4).map(|i| format!("f{i}")).collect();
        let ensemble = TreeEnsemble::new(trees, inner.base_score(), names).unwrap();
        for row in random_rows(&mut rng, 6, 4, 0.2) {
            let raw = tree_shap(&ensemble, &row);
            prop_assert_eq!(raw.phi[3], 0.0);
            let brute = shapley_bruteforce(&ensemble, &row).unwrap();
            prop_assert!(brute.phi[3].abs() <= 1e-12);
        }
    }

    #[test]
    fn twin_features_share_attribution(
        seed in any::<u64>(),
        threshold in 0.1f64..0.9,
        low in -2.0f64..2.0,
        high in -2.0f64..2.0,
        cover_left in 1.0f64..9.0,
    ) {
        // Two stumps identical except for the feature they split on,
        // explained over identical data columns.
        let stump = |feature: usize| {
            vec![
                TreeNode::split(0, feature, threshold, 1, 2, true, 10.0),
                TreeNode::leaf(1, low, cover_left),
                TreeNode::leaf(2, high, 10.0 - cover_left),
            ]
        };
        let ensemble = TreeEnsemble::new(
            vec![stump(0), stump(1)],
            0.0,
            vec!["a".into(), "b".into()],
        ).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..20).map(|_| rng.random()).collect();
        let dataset = Dataset::from_columns(
            vec![
                Column::numeric("a", values.clone()),
                Column::numeric("b", values),
            ],
            None,
        ).unwrap();
        let shap = explain(&Model::Ensemble(ensemble), &dataset).unwrap();
        for j in 0..shap.n_rows() {
            prop_assert!((shap.phi[j][0] - shap.phi[j][1]).abs() <= 1e-12);
        }
    }

    #[test]
    fn glm_attribution_is_affine_with_slope_a(
        seed in any::<u64>(),
        a in -3.0f64..3.0,
        b in -1.0f64..1.0,
    ) {
        let glm = GlmModel::new(vec![a], b, vec!["x".into()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..30).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let dataset = Dataset::from_columns(vec![Column::numeric("x", values.clone())], None).unwrap();
        let shap = glm_shap(&glm, &dataset).unwrap();
        let mean = shapkit::math::mean(values.iter().copied());
        for (j, &x) in values.iter().enumerate() {
            let expected = a * (x - mean);
            prop_assert!((shap.phi[j][0] - expected).abs() <= 1e-9);
        }
        // Local accuracy for the GLM form.
        for (j, &x) in values.iter().enumerate() {
            let margin = glm.margin(&[x]).unwrap().0;
            prop_assert!((shap.phi0 + shap.phi[j][0] - margin).abs() <= 1e-9);
        }
    }

    #[test]
    fn variance_is_bounded_by_l1_times_max(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ensemble = common::random_ensemble(&mut rng, 4, 3);
        let rows = random_rows(&mut rng, 25, 4, 0.1);
        let dataset = dataset_from_rows(&rows, 4);
        let shap = explain(&Model::Ensemble(ensemble), &dataset).unwrap();
        let variance = variance_importance(&shap);
        let l1 = l1_importance(&shap);
        let n = shap.n_rows() as f64;
        for i in 0..shap.n_features() {
            let max_abs = shap.column(i).map(f64::abs).fold(0.0, f64::max);
            prop_assert!(variance.scores[i] <= l1.scores[i] / n * max_abs + 1e-12);
        }
    }
}

// Dyadic values (multiples of 1/1024 within [-2, 2]) make every sum exact
// in f64, so packing identities can be asserted bit-for-bit.
fn dyadic_matrix(rng: &mut ChaCha8Rng, n: usize, k: usize) -> ShapMatrix {
    let phi: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..k)
                .map(|_| (rng.random_range(-2048i32..=2048) as f64) / 1024.0)
                .collect()
        })
        .collect();
    let names = (0..k).map(|i| format!("f{i}")).collect();
    ShapMatrix::new(0.5, phi, names, (0..n).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn packing_identity_and_superadditivity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(3..7);
        let n = rng.random_range(2..40);
        let shap = dyadic_matrix(&mut rng, n, k);

        // A random group of 2..=k features.
        let size = rng.random_range(2..=k);
        let mut members: Vec<usize> = (0..k).collect();
        for i in (1..members.len()).rev() {
            let j = rng.random_range(0..=i);
            members.swap(i, j);
        }
        members.truncate(size);
        let group = FeatureGroup::new("g", members.clone()).unwrap();

        let direct = grouped_importance(&shap, &group);
        let packed = pack(&shap, std::slice::from_ref(&group)).unwrap();
        let packed_idx = packed.feature_index("g").unwrap();
        let via_pack = variance_importance(&packed).scores[packed_idx];
        prop_assert!((direct - via_pack).abs() <= 1e-12, "{direct} vs {via_pack}");

        // Grouped score minus member scores is twice the pairwise covariance.
        let variance = variance_importance(&shap);
        let cov = shap_covariance(&shap);
        let member_sum: f64 = group.members().iter().map(|&i| variance.scores[i]).sum();
        let mut cov_sum = 0.0;
        for (a, &i) in group.members().iter().enumerate() {
            for &j in &group.members()[a + 1..] {
                cov_sum += cov.cov(i, j);
            }
        }
        prop_assert!((direct - member_sum - 2.0 * cov_sum).abs() <= 1e-12);

        // Row totals and the base value survive packing exactly.
        for j in 0..shap.n_rows() {
            prop_assert_eq!(packed.row_total(j), shap.row_total(j));
        }
        prop_assert_eq!(packed.phi0, shap.phi0);
    }

    #[test]
    fn shap_csv_round_trip_is_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..30);
        let k = rng.random_range(1..6);
        let phi: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| (rng.random::<f64>() - 0.5) * 1e3).collect())
            .collect();
        let names = (0..k).map(|i| format!("f{i}")).collect();
        let shap = ShapMatrix::new(rng.random::<f64>(), phi, names, (0..n).collect()).unwrap();
        let back = ShapMatrix::from_csv(&shap.to_csv(), &shap.sidecar()).unwrap();
        prop_assert_eq!(back.phi, shap.phi);
        prop_assert_eq!(back.phi0, shap.phi0);
    }

    #[test]
    fn one_hot_keeps_rows_and_indicator_sums(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..50);
        let categories = ["a", "b", "c", "d"];
        let values: Vec<Option<String>> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < 0.2 {
                    None
                } else {
                    Some(categories[rng.random_range(0..categories.len())].to_string())
                }
            })
            .collect();
        prop_assume!(values.iter().any(|v| v.is_some()));
        let labels: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let ds = Dataset::from_columns(
            vec![Column::nominal("cat", values.clone())],
            Some(labels.clone()),
        ).unwrap();
        let enc = one_hot_encode(&ds, 64).unwrap();
        prop_assert_eq!(enc.n_rows(), n);
        prop_assert_eq!(enc.labels(), Some(&labels[..]));
        for (j, v) in values.iter().enumerate() {
            let total: f64 = (0..enc.n_features()).map(|i| enc.numeric_column(i).unwrap()[j]).sum();
            if v.is_some() {
                prop_assert_eq!(total, 1.0);
            } else {
                prop_assert!(total.is_nan());
            }
        }
    }

    #[test]
    fn standardize_idempotent_on_random_columns(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..60);
        let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 20.0 - 10.0).collect();
        let ds = Dataset::from_columns(vec![Column::numeric("x", values)], None).unwrap();
        let (once, _) = standardize(&ds).unwrap();
        let (twice, _) = standardize(&once).unwrap();
        for (a, b) in once.numeric_column(0).unwrap().iter().zip(twice.numeric_column(0).unwrap()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
