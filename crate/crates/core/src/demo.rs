//! Built-in demonstration fixtures: a hand-constructed pair of models
//! showing gain's ranking instability, and a seeded synthetic dataset +
//! model for exercising the full pipeline without real data.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attribution::explain;
use crate::dataset::{Column, Dataset, Schema};
use crate::importance::{gain_importance, variance_importance, ImportanceReport};
use crate::model::{Model, TreeEnsemble, TreeNode};

// ---------------------------------------------------------------------------
// Gain-inconsistency fixture
// ---------------------------------------------------------------------------

/// Two ensembles over (anchor, cough, fever) plus the 8-row dataset of all
/// binary combinations. Model B adds a flat +10 whenever cough is set, so
/// it relies strictly more on cough than model A, yet cough's gain rank
/// drops from 1st to 2nd while its variance-importance rank rises.
pub struct ConsistencyDemo {
    pub model_a: TreeEnsemble,
    pub model_b: TreeEnsemble,
    pub dataset: Dataset,
    pub report: ConsistencyReport,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConsistencyReport {
    pub strengthened_feature: String,
    pub gain_scores_a: BTreeMap<String, f64>,
    pub gain_scores_b: BTreeMap<String, f64>,
    pub variance_scores_a: BTreeMap<String, f64>,
    pub variance_scores_b: BTreeMap<String, f64>,
    pub gain_ranking_a: Vec<String>,
    pub gain_ranking_b: Vec<String>,
    pub variance_ranking_a: Vec<String>,
    pub variance_ranking_b: Vec<String>,
    /// 1-based ranks of the strengthened feature.
    pub gain_rank_a: usize,
    pub gain_rank_b: usize,
    pub variance_rank_a: usize,
    pub variance_rank_b: usize,
    pub gain_rank_dropped: bool,
    pub variance_rank_rose: bool,
    pub variance_score_increased: bool,
}

const ANCHOR: usize = 0;
const COUGH: usize = 1;
const FEVER: usize = 2;

fn consistency_feature_names() -> Vec<String> {
    vec!["anchor".into(), "cough".into(), "fever".into()]
}

// A steady stump on an unrelated feature. Its importance sits between
// cough's scores in models A and B, so the rank movement is visible
// under both metrics.
fn anchor_tree() -> Vec<TreeNode> {
    vec![
        TreeNode::split_with_gain(0, ANCHOR, 0.5, 1, 2, true, 100.0, 57600.0),
        TreeNode::leaf(1, -24.0, 50.0),
        TreeNode::leaf(2, 24.0, 50.0),
    ]
}

/// Model A: +80 when fever and cough are both set (fever split first).
pub fn consistency_model_a() -> TreeEnsemble {
    let and_tree = vec![
        TreeNode::split_with_gain(0, FEVER, 0.5, 1, 2, true, 100.0, 40000.0),
        TreeNode::leaf(1, 0.0, 50.0),
        TreeNode::split_with_gain(2, COUGH, 0.5, 3, 4, true, 50.0, 80000.0),
        TreeNode::leaf(3, 0.0, 25.0),
        TreeNode::leaf(4, 80.0, 25.0),
    ];
    TreeEnsemble::new(
        vec![and_tree, anchor_tree()],
        0.0,
        consistency_feature_names(),
    )
    .expect("fixture is valid")
}

/// Model B: model A plus +10 whenever cough is set (cough split first).
pub fn consistency_model_b() -> TreeEnsemble {
    let and_plus_tree = vec![
        TreeNode::split_with_gain(0, COUGH, 0.5, 1, 2, true, 100.0, 62500.0),
        TreeNode::leaf(1, 0.0, 50.0),
        TreeNode::split_with_gain(2, FEVER, 0.5, 3, 4, true, 50.0, 80000.0),
        TreeNode::leaf(3, 10.0, 25.0),
        TreeNode::leaf(4, 90.0, 25.0),
    ];
    TreeEnsemble::new(
        vec![and_plus_tree, anchor_tree()],
        0.0,
        consistency_feature_names(),
    )
    .expect("fixture is valid")
}

/// Every (anchor, cough, fever) combination once.
pub fn consistency_dataset() -> Dataset {
    let mut anchor = Vec::new();
    let mut cough = Vec::new();
    let mut fever = Vec::new();
    for a in [0.0, 1.0] {
        for c in [0.0, 1.0] {
            for f in [0.0, 1.0] {
                anchor.push(a);
                cough.push(c);
                fever.push(f);
            }
        }
    }
    Dataset::from_columns(
        vec![
            Column::numeric("anchor", anchor),
            Column::numeric("cough", cough),
            Column::numeric("fever", fever),
        ],
        None,
    )
    .expect("fixture is valid")
}

fn scores_by_name(report: &ImportanceReport) -> BTreeMap<String, f64> {
    report
        .feature_names
        .iter()
        .cloned()
        .zip(report.scores.iter().copied())
        .collect()
}

/// Builds the fixture, evaluates both metrics on both models, and reports
/// the rank movement of the strengthened feature.
pub fn consistency_demo() -> ConsistencyDemo {
    let model_a = consistency_model_a();
    let model_b = consistency_model_b();
    let dataset = consistency_dataset();
    let feature = "cough";

    let gain_a = gain_importance(&model_a).expect("fixture has gains");
    let gain_b = gain_importance(&model_b).expect("fixture has gains");
    let var_a = variance_importance(
        &explain(&Model::Ensemble(model_a.clone()), &dataset).expect("fixture aligns"),
    );
    let var_b = variance_importance(
        &explain(&Model::Ensemble(model_b.clone()), &dataset).expect("fixture aligns"),
    );

    let gain_rank_a = gain_a.rank_of(feature).expect("feature present");
    let gain_rank_b = gain_b.rank_of(feature).expect("feature present");
    let variance_rank_a = var_a.rank_of(feature).expect("feature present");
    let variance_rank_b = var_b.rank_of(feature).expect("feature present");
    let variance_score_a = var_a.score_of(feature).expect("feature present");
    let variance_score_b = var_b.score_of(feature).expect("feature present");

    let report = ConsistencyReport {
        strengthened_feature: feature.to_string(),
        gain_scores_a: scores_by_name(&gain_a),
        gain_scores_b: scores_by_name(&gain_b),
        variance_scores_a: scores_by_name(&var_a),
        variance_scores_b: scores_by_name(&var_b),
        gain_ranking_a: gain_a
            .ranked_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        gain_ranking_b: gain_b
            .ranked_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        variance_ranking_a: var_a.ranked_names().iter().map(|s| s.to_string()).collect(),
        variance_ranking_b: var_b.ranked_names().iter().map(|s| s.to_string()).collect(),
        gain_rank_a,
        gain_rank_b,
        variance_rank_a,
        variance_rank_b,
        gain_rank_dropped: gain_rank_b > gain_rank_a,
        variance_rank_rose: variance_rank_b < variance_rank_a,
        variance_score_increased: variance_score_b > variance_score_a,
    };
    ConsistencyDemo {
        model_a,
        model_b,
        dataset,
        report,
    }
}

// ---------------------------------------------------------------------------
// Synthetic admission-style dataset + hand-built model
// ---------------------------------------------------------------------------

/// A seeded synthetic cohort with mixed numeric/nominal/missing columns,
/// labels planted by a known rule, and a hand-built ensemble whose trees
/// split only on the planted features.
pub struct SyntheticDemo {
    /// Raw table: numeric columns plus the nominal `chief_complaint`,
    /// labels attached.
    pub dataset: Dataset,
    pub schema: Schema,
    /// Ensemble over the one-hot encoded feature space.
    pub model: Model,
}

pub const DEMO_LABEL_COLUMN: &str = "worsened";

/// Names of the features the label rule actually uses, most influential
/// first. The generated model splits only on these.
pub fn planted_features() -> Vec<&'static str> {
    vec!["nihss", "ddimer", "adl.walk", "adl.eat", "albumin"]
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Generates the cohort. Row counts below 50 are raised to 50 so every
/// planted split keeps both branches populated.
pub fn synthetic_demo(seed: u64, n_rows: usize) -> SyntheticDemo {
    let n = n_rows.max(50);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut nihss = Vec::with_capacity(n);
    let mut age = Vec::with_capacity(n);
    let mut ddimer = Vec::with_capacity(n);
    let mut albumin = Vec::with_capacity(n);
    let mut adl_walk = Vec::with_capacity(n);
    let mut adl_eat = Vec::with_capacity(n);
    let mut adl_bath = Vec::with_capacity(n);
    let mut complaint: Vec<Option<String>> = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);

    for _ in 0..n {
        let u: f64 = rng.random();
        let v_nihss = (20.0 * u * u).floor();
        nihss.push(v_nihss);

        age.push((45.0 + 45.0 * rng.random::<f64>()).round());

        let u: f64 = rng.random();
        let v_ddimer = round2(0.2 + 4.0 * u * u);
        let ddimer_missing = rng.random::<f64>() < 0.12;
        ddimer.push(if ddimer_missing { f64::NAN } else { v_ddimer });

        let v_albumin = round2(2.6 + 2.2 * rng.random::<f64>());
        albumin.push(v_albumin);

        // Ten-point ADL endpoints driven by one latent mobility score.
        let latent: f64 = rng.random();
        let endpoint = |rng: &mut ChaCha8Rng| {
            let wobble = 0.3 * (rng.random::<f64>() - 0.5);
            ((latent + wobble).clamp(0.0, 1.0) * 10.0).round()
        };
        let v_walk = endpoint(&mut rng);
        adl_walk.push(v_walk);
        adl_eat.push(endpoint(&mut rng));
        adl_bath.push(endpoint(&mut rng));

        let w: f64 = rng.random();
        complaint.push(Some(
            if w < 0.4 {
                "weakness"
            } else if w < 0.6 {
                "dizziness"
            } else if w < 0.8 {
                "headache"
            } else {
                "speech"
            }
            .to_string(),
        ));

        // Planted outcome rule on the log-odds scale.
        let mut score = -1.2;
        if v_nihss >= 4.0 {
            score += 1.6;
        }
        if ddimer_missing {
            score += 0.2;
        } else if v_ddimer >= 1.5 {
            score += 1.0;
        }
        if v_walk <= 4.0 {
            score += 0.5;
        }
        if v_albumin < 3.5 {
            score += 0.24;
        }
        labels.push(rng.random::<f64>() < sigmoid(score));
    }

    let dataset = Dataset::from_columns(
        vec![
            Column::numeric("nihss", nihss),
            Column::numeric("age", age),
            Column::numeric("ddimer", ddimer),
            Column::numeric("albumin", albumin),
            Column::numeric("adl.walk", adl_walk),
            Column::numeric("adl.eat", adl_eat),
            Column::numeric("adl.bath", adl_bath),
            Column::nominal("chief_complaint", complaint),
        ],
        Some(labels.clone()),
    )
    .expect("generated table is rectangular");

    let schema = Schema {
        label_column: Some(DEMO_LABEL_COLUMN.to_string()),
        nominal_columns: vec!["chief_complaint".to_string()],
        max_cardinality: 64,
    };

    let encoded = crate::dataset::one_hot_encode(&dataset, schema.max_cardinality)
        .expect("generated nominal column encodes");
    let model = build_planted_model(&encoded, &labels);

    SyntheticDemo {
        dataset,
        schema,
        model: Model::Ensemble(model),
    }
}

// Tree skeletons mirror the label rule; covers come from routing the
// generated rows (plus one per leaf so no branch is weightless) and gains
// from the squared-error reduction on the labels.
enum NodeDef {
    Split {
        feature: usize,
        threshold: f64,
        default_left: bool,
        left: Box<NodeDef>,
        right: Box<NodeDef>,
    },
    Leaf(f64),
}

fn split(
    feature: usize,
    threshold: f64,
    default_left: bool,
    left: NodeDef,
    right: NodeDef,
) -> NodeDef {
    NodeDef::Split {
        feature,
        threshold,
        default_left,
        left: Box::new(left),
        right: Box::new(right),
    }
}

fn build_planted_model(encoded: &Dataset, labels: &[bool]) -> TreeEnsemble {
    let idx = |name: &str| encoded.column_index(name).expect("planted feature exists");
    let nihss = idx("nihss");
    let ddimer = idx("ddimer");
    let walk = idx("adl.walk");
    let eat = idx("adl.eat");
    let albumin = idx("albumin");

    let skeletons = vec![
        split(nihss, 3.5, true, NodeDef::Leaf(-0.8), NodeDef::Leaf(0.8)),
        split(ddimer, 1.5, false, NodeDef::Leaf(-0.5), NodeDef::Leaf(0.5)),
        split(
            walk,
            4.5,
            true,
            NodeDef::Leaf(0.25),
            split(eat, 4.5, true, NodeDef::Leaf(0.1), NodeDef::Leaf(-0.25)),
        ),
        split(
            albumin,
            3.5,
            true,
            NodeDef::Leaf(0.12),
            NodeDef::Leaf(-0.12),
        ),
    ];

    let rows = encoded.numeric_rows().expect("encoded table is numeric");
    let y: Vec<f64> = labels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();

    let trees = skeletons
        .into_iter()
        .map(|def| {
            let mut nodes = Vec::new();
            realize_tree(&def, &rows, &y, (0..rows.len()).collect(), &mut nodes);
            nodes
        })
        .collect();

    let positives = labels.iter().filter(|&&b| b).count() as f64;
    let rate = (positives + 0.5) / (labels.len() as f64 + 1.0);
    let base_score = (rate / (1.0 - rate)).ln();

    TreeEnsemble::new(trees, base_score, encoded.feature_names()).expect("planted model is valid")
}

fn sse(y: &[f64], rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let mean = rows.iter().map(|&j| y[j]).sum::<f64>() / rows.len() as f64;
    rows.iter().map(|&j| (y[j] - mean) * (y[j] - mean)).sum()
}

/// Converts a skeleton into flat nodes (preorder ids), returning the
/// node's id and cover.
fn realize_tree(
    def: &NodeDef,
    rows: &[Vec<f64>],
    y: &[f64],
    reaching: Vec<usize>,
    nodes: &mut Vec<TreeNode>,
) -> (usize, f64) {
    let id = nodes.len();
    match def {
        NodeDef::Leaf(value) => {
            let cover = reaching.len() as f64 + 1.0;
            nodes.push(TreeNode::leaf(id, *value, cover));
            (id, cover)
        }
        NodeDef::Split {
            feature,
            threshold,
            default_left,
            left,
            right,
        } => {
            nodes.push(TreeNode::leaf(id, 0.0, 0.0)); // placeholder, patched below
            let (mut to_left, mut to_right) = (Vec::new(), Vec::new());
            for &j in &reaching {
                let v = rows[j][*feature];
                let goes_left = if v.is_nan() {
                    *default_left
                } else {
                    v < *threshold
                };
                if goes_left {
                    to_left.push(j);
                } else {
                    to_right.push(j);
                }
            }
            let gain = (sse(y, &reaching) - sse(y, &to_left) - sse(y, &to_right)).max(0.0);
            let (left_id, left_cover) = realize_tree(left, rows, y, to_left, nodes);
            let (right_id, right_cover) = realize_tree(right, rows, y, to_right, nodes);
            let cover = left_cover + right_cover;
            nodes[id] = TreeNode::split_with_gain(
                id,
                *feature,
                *threshold,
                left_id,
                right_id,
                *default_left,
                cover,
                gain,
            );
            (id, cover)
        }
    }
}
