//! Acceptance suite: one test per contract criterion, each printing a
//! PASS line (visible with --nocapture). Criterion 8, the end-to-end CLI
//! workflow, lives in the CLI crate's acceptance suite.

mod common;

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use shapkit::dataset::{one_hot_encode, Column, Dataset, StandardizationStats};
use shapkit::demo;
use shapkit::importance::{beta_importance, variance_importance};
use shapkit::model::{GlmModel, Model, TreeEnsemble, TreeNode};
use shapkit::packing::{grouped_importance, pack, shap_covariance, FeatureGroup};
use shapkit::plots::{
    dependence_plot, importance_plot, odds_from_logodds, partial_dependence, pdp_plot,
    summary_plot, PlotSpec,
};
use shapkit::{explain, glm_shap, shapley_bruteforce, tree_shap, ShapMatrix};

/// Criterion 1: the fast path algorithm agrees with the subset-enumeration
/// oracle on 200 random ensembles over every exhaustive complete row and
/// every single-missing row, within 1e-9, in under 30 seconds.
#[test]
fn criterion_1_oracle_equivalence() {
    let start = Instant::now();
    let k = 4;
    let mut rows = common::exhaustive_binary_rows(k);
    rows.extend(common::single_missing_rows(k));
    assert_eq!(rows.len(), 16 + 32);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut max_diff = 0.0f64;
    for _ in 0..200 {
        let ensemble = common::random_ensemble(&mut rng, k, 3);
        for row in &rows {
            let fast = tree_shap(&ensemble, row);
            let brute = shapley_bruteforce(&ensemble, row).unwrap();
            for (a, b) in fast.phi.iter().zip(&brute.phi) {
                max_diff = max_diff.max((a - b).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(max_diff <= 1e-9, "max |fast - brute| = {max_diff}");
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    println!("ACCEPTANCE 1 oracle equivalence: PASS (max diff {max_diff:.3e}, {elapsed:?})");
}

fn check_local_accuracy(model: &Model, dataset: &Dataset, shap: &ShapMatrix) {
    let rows = dataset.numeric_rows().unwrap();
    for (j, row) in rows.iter().enumerate() {
        let margin = model.predict_margin(row).unwrap().0;
        let recon = shap.phi0 + shap.phi[j].iter().sum::<f64>();
        assert!(
            (recon - margin).abs() <= 1e-9,
            "row {j}: base + phi sum {recon} vs margin {margin}"
        );
    }
    for i in 0..shap.n_features() {
        let mean = shapkit::math::mean(shap.column(i));
        assert!(mean.abs() <= 1e-12, "column {i} mean {mean}");
    }
}

/// Criterion 2: base value plus attribution sums reproduce the margin on
/// every model/dataset pair (1e-9 per row); columns center to 1e-12.
#[test]
fn criterion_2_local_accuracy() {
    // Fixture models over their fixture table.
    let fixture_data = demo::consistency_dataset();
    for ensemble in [demo::consistency_model_a(), demo::consistency_model_b()] {
        let model = Model::Ensemble(ensemble);
        let shap = explain(&model, &fixture_data).unwrap();
        check_local_accuracy(&model, &fixture_data, &shap);
    }

    // The synthetic cohort with its planted model.
    let synth = demo::synthetic_demo(11, 300);
    let encoded = one_hot_encode(&synth.dataset, 64).unwrap();
    let shap = explain(&synth.model, &encoded).unwrap();
    check_local_accuracy(&synth.model, &encoded, &shap);

    // Random ensembles over random tables with missing cells.
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc2);
    for _ in 0..20 {
        let ensemble = common::random_ensemble(&mut rng, 4, 3);
        let columns = (0..4)
            .map(|i| {
                Column::numeric(
                    format!("f{i}"),
                    (0..50)
                        .map(|_| {
                            if rng.random::<f64>() < 0.15 {
                                f64::NAN
                            } else {
                                rng.random()
                            }
                        })
                        .collect(),
                )
            })
            .collect();
        let dataset = Dataset::from_columns(columns, None).unwrap();
        let model = Model::Ensemble(ensemble);
        let shap = explain(&model, &dataset).unwrap();
        check_local_accuracy(&model, &dataset, &shap);
    }

    // A GLM over complete data.
    let glm = GlmModel::new(vec![0.8, -1.3], 0.4, vec!["a".into(), "b".into()]).unwrap();
    let dataset = Dataset::from_columns(
        vec![
            Column::numeric("a", (0..40).map(|i| (i as f64) * 0.3 - 5.0).collect()),
            Column::numeric("b", (0..40).map(|i| ((i * 7) % 13) as f64).collect()),
        ],
        None,
    )
    .unwrap();
    let model = Model::Glm(glm);
    let shap = explain(&model, &dataset).unwrap();
    check_local_accuracy(&model, &dataset, &shap);

    println!("ACCEPTANCE 2 local accuracy: PASS");
}

/// Criterion 3: for a random GLM over a seeded synthetic table (N=1000,
/// K=5), variance importance of the GLM attributions equals the squared
/// beta coefficients within 1e-9, with identical rankings.
#[test]
fn criterion_3_glm_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x91e3);
    let n = 1000;
    let k = 5;
    let names: Vec<String> = (0..k).map(|i| format!("x{i}")).collect();
    let columns = (0..k)
        .map(|i| {
            let scale = 0.5 + 3.0 * rng.random::<f64>();
            let shift = rng.random::<f64>() * 10.0 - 5.0;
            Column::numeric(
                names[i].clone(),
                (0..n)
                    .map(|_| shift + scale * rng.random::<f64>())
                    .collect(),
            )
        })
        .collect();
    let dataset = Dataset::from_columns(columns, None).unwrap();
    let coefficients: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    let glm = GlmModel::new(coefficients, 0.3, names).unwrap();

    let shap = glm_shap(&glm, &dataset).unwrap();
    let via_shap = variance_importance(&shap);
    let stats = StandardizationStats::compute(&dataset).unwrap();
    let via_beta = beta_importance(&glm, &stats).unwrap();

    for i in 0..k {
        let d = (via_shap.scores[i] - via_beta.scores[i]).abs();
        assert!(
            d <= 1e-9,
            "feature {i}: {} vs {} (diff {d})",
            via_shap.scores[i],
            via_beta.scores[i]
        );
    }
    assert_eq!(via_shap.ranking, via_beta.ranking);
    println!("ACCEPTANCE 3 glm equivalence: PASS");
}

/// Criterion 4: grouped importance equals both the pairwise covariance
/// form and the packed-column variance within 1e-12; packing changes
/// neither row totals nor model predictions.
#[test]
fn criterion_4_packing_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9ac4);
    for _ in 0..50 {
        let n = rng.random_range(2..120);
        let k = rng.random_range(2..8);
        // Dyadic values keep every sum exact.
        let phi: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..k)
                    .map(|_| (rng.random_range(-1024i32..=1024) as f64) / 1024.0)
                    .collect()
            })
            .collect();
        let names: Vec<String> = (0..k).map(|i| format!("f{i}")).collect();
        let shap = ShapMatrix::new(0.25, phi, names, (0..n).collect()).unwrap();

        // Pair group: the exact two-feature form.
        let i = rng.random_range(0..k);
        let mut j = rng.random_range(0..k);
        if i == j {
            j = (j + 1) % k;
        }
        let pair = FeatureGroup::new("pair", vec![i, j]).unwrap();
        let variance = variance_importance(&shap);
        let cov = shap_covariance(&shap);
        let grouped = grouped_importance(&shap, &pair);
        let pairwise = variance.scores[i] + variance.scores[j] + 2.0 * cov.cov(i, j);
        assert!((grouped - pairwise).abs() <= 1e-12);

        let packed = pack(&shap, &[pair]).unwrap();
        let idx = packed.feature_index("pair").unwrap();
        let via_pack = variance_importance(&packed).scores[idx];
        assert!((grouped - via_pack).abs() <= 1e-12);

        for r in 0..n {
            assert_eq!(
                packed.row_total(r),
                shap.row_total(r),
                "row totals must be preserved"
            );
        }
        assert_eq!(packed.phi0.to_bits(), shap.phi0.to_bits());
    }

    // Predictions are untouched by packing: the model never participates.
    let synth = demo::synthetic_demo(3, 150);
    let encoded = one_hot_encode(&synth.dataset, 64).unwrap();
    let shap = explain(&synth.model, &encoded).unwrap();
    let before: Vec<u64> = encoded
        .numeric_rows()
        .unwrap()
        .iter()
        .map(|row| synth.model.predict_margin(row).unwrap().0.to_bits())
        .collect();
    let walk = shap.feature_index("adl.walk").unwrap();
    let eat = shap.feature_index("adl.eat").unwrap();
    let bath = shap.feature_index("adl.bath").unwrap();
    let group = FeatureGroup::new("adl.all", vec![walk, eat, bath]).unwrap();
    let packed = pack(&shap, std::slice::from_ref(&group)).unwrap();
    let after: Vec<u64> = encoded
        .numeric_rows()
        .unwrap()
        .iter()
        .map(|row| synth.model.predict_margin(row).unwrap().0.to_bits())
        .collect();
    assert_eq!(before, after, "packing must not change predictions");
    // Local accuracy still holds on the packed matrix (1e-9).
    for (j, row) in encoded.numeric_rows().unwrap().iter().enumerate() {
        let margin = synth.model.predict_margin(row).unwrap().0;
        let recon = packed.phi0 + packed.phi[j].iter().sum::<f64>();
        assert!((recon - margin).abs() <= 1e-9);
    }
    let direct = grouped_importance(&shap, &group);
    let idx = packed.feature_index("adl.all").unwrap();
    assert!((direct - variance_importance(&packed).scores[idx]).abs() <= 1e-12);

    println!("ACCEPTANCE 4 packing identity: PASS");
}

/// Criterion 5: odds conversions reproduce the reference readings.
#[test]
fn criterion_5_odds_reference_values() {
    let high = odds_from_logodds(0.8);
    assert!((high - 2.2255).abs() <= 5e-5, "exp(0.8) = {high}");
    assert!((high - 2.2).abs() <= 0.05);
    let low = odds_from_logodds(-0.3);
    assert!((low - 0.7408).abs() <= 5e-5, "exp(-0.3) = {low}");
    assert!((low - 0.74).abs() <= 0.005);
    println!("ACCEPTANCE 5 odds reference values: PASS");
}

/// Criterion 6: on a single stump, the dependence plot's per-value mean
/// attributions equal the partial dependence curve up to one additive
/// constant, within 1e-6.
#[test]
fn criterion_6_pdp_agreement() {
    let stump = TreeEnsemble::new(
        vec![vec![
            TreeNode::split(0, 0, 0.5, 1, 2, true, 120.0),
            TreeNode::leaf(1, -0.7, 80.0),
            TreeNode::leaf(2, 1.1, 40.0),
        ]],
        0.2,
        vec!["x".into()],
    )
    .unwrap();
    let model = Model::Ensemble(stump);
    // Binary feature: the quantile grid of size 2 lands exactly on {0, 1}.
    let values: Vec<f64> = (0..40)
        .map(|i| if i % 3 == 0 { 1.0 } else { 0.0 })
        .collect();
    let dataset = Dataset::from_columns(vec![Column::numeric("x", values)], None).unwrap();

    let shap = explain(&model, &dataset).unwrap();
    let out = dependence_plot(&shap, &dataset, "x", None, &PlotSpec::default()).unwrap();
    let mut mean_series: Vec<(f64, f64)> = Vec::new();
    for record in csv::Reader::from_reader(out.csv.as_bytes()).records() {
        let record = record.unwrap();
        if &record[0] == "mean" {
            mean_series.push((record[2].parse().unwrap(), record[3].parse().unwrap()));
        }
    }
    assert_eq!(mean_series.len(), 2);

    let curve = partial_dependence(&model, &dataset, "x", 2).unwrap();
    assert_eq!(curve.grid, vec![0.0, 1.0]);

    let offsets: Vec<f64> = curve
        .grid
        .iter()
        .zip(&curve.mean_margin)
        .zip(&mean_series)
        .map(|((&g, &pdp), &(x, mean_phi))| {
            assert_eq!(g, x);
            pdp - mean_phi
        })
        .collect();
    for offset in &offsets {
        assert!(
            (offset - offsets[0]).abs() <= 1e-6,
            "offsets not constant: {offsets:?}"
        );
    }
    println!(
        "ACCEPTANCE 6 dependence/pdp agreement: PASS (offset {:.6})",
        offsets[0]
    );
}

/// Criterion 7: the built-in fixture shows gain demoting the strengthened
/// feature while variance importance promotes it, deterministically.
#[test]
fn criterion_7_consistency_demo() {
    let first = demo::consistency_demo().report;
    let second = demo::consistency_demo().report;
    assert_eq!(first, second, "demo must be deterministic");

    assert!(
        first.gain_rank_dropped,
        "gain rank: {} -> {}",
        first.gain_rank_a, first.gain_rank_b
    );
    assert!(
        first.variance_rank_rose,
        "variance rank: {} -> {}",
        first.variance_rank_a, first.variance_rank_b
    );
    assert!(first.variance_score_increased);
    println!(
        "ACCEPTANCE 7 consistency demo: PASS (gain rank {}->{}, variance rank {}->{})",
        first.gain_rank_a, first.gain_rank_b, first.variance_rank_a, first.variance_rank_b
    );
}

/// Criterion 9: plots are byte-identical across runs with a fixed seed,
/// summary rows follow the variance-importance order, and missing dots
/// are exactly #000000.
#[test]
fn criterion_9_plot_determinism() {
    let synth = demo::synthetic_demo(21, 120);
    let encoded = one_hot_encode(&synth.dataset, 64).unwrap();
    let shap = explain(&synth.model, &encoded).unwrap();
    let spec = PlotSpec {
        top_k: 6,
        jitter_seed: 99,
        ..PlotSpec::default()
    };

    let s1 = summary_plot(&shap, &encoded, &spec).unwrap();
    let s2 = summary_plot(&shap, &encoded, &spec).unwrap();
    assert_eq!(s1.svg, s2.svg);
    assert_eq!(s1.csv, s2.csv);

    let d1 = dependence_plot(&shap, &encoded, "nihss", Some("ddimer"), &spec).unwrap();
    let d2 = dependence_plot(&shap, &encoded, "nihss", Some("ddimer"), &spec).unwrap();
    assert_eq!(d1.svg, d2.svg);
    assert_eq!(d1.csv, d2.csv);

    let (_, p1) = pdp_plot(&synth.model, &encoded, "nihss", 20, &spec).unwrap();
    let (_, p2) = pdp_plot(&synth.model, &encoded, "nihss", 20, &spec).unwrap();
    assert_eq!(p1.svg, p2.svg);
    assert_eq!(p1.csv, p2.csv);

    let report = variance_importance(&shap);
    let b1 = importance_plot(&report, 6, &spec);
    let b2 = importance_plot(&report, 6, &spec);
    assert_eq!(b1.svg, b2.svg);
    assert_eq!(b1.csv, b2.csv);

    // Summary CSV feature order must match the importance ranking.
    let expected: Vec<String> = report.ranked_names()[..6]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut seen: Vec<String> = Vec::new();
    for record in csv::Reader::from_reader(s1.csv.as_bytes()).records() {
        let feature = record.unwrap()[0].to_string();
        if seen.last() != Some(&feature) {
            seen.push(feature);
        }
    }
    assert_eq!(seen, expected);

    // Missing ddimer cells must appear as pure black dots in the summary.
    let missing_count = encoded
        .numeric_column(encoded.column_index("ddimer").unwrap())
        .unwrap()
        .iter()
        .filter(|v| v.is_nan())
        .count();
    assert!(
        missing_count > 0,
        "fixture should contain missing ddimer cells"
    );
    let black_dots = s1.svg.matches("fill=\"#000000\"").count();
    assert_eq!(black_dots, missing_count);

    println!("ACCEPTANCE 9 plot determinism: PASS");
}
