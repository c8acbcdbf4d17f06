//! Shared test helpers: random model/dataset generation.
#![allow(dead_code)] // each test target uses a different subset

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use shapkit::model::{TreeEnsemble, TreeNode};

/// Builds one random tree of at most `max_depth` splits over `k` features.
/// Covers are built bottom-up so parents equal their children exactly.
fn random_tree(rng: &mut ChaCha8Rng, k: usize, max_depth: usize) -> Vec<TreeNode> {
    let mut nodes = Vec::new();
    random_node(rng, k, max_depth, &mut nodes);
    nodes
}

fn random_node(
    rng: &mut ChaCha8Rng,
    k: usize,
    depth_left: usize,
    nodes: &mut Vec<TreeNode>,
) -> (usize, f64) {
    let id = nodes.len();
    let make_leaf = depth_left == 0 || rng.random::<f64>() < 0.25;
    if make_leaf {
        let value = rng.random::<f64>() * 6.0 - 3.0;
        let cover = 0.5 + rng.random::<f64>() * 9.5;
        nodes.push(TreeNode::leaf(id, value, cover));
        (id, cover)
    } else {
        nodes.push(TreeNode::leaf(id, 0.0, 0.0)); // placeholder
        let feature = rng.random_range(0..k);
        let threshold = 0.1 + rng.random::<f64>() * 0.8;
        let default_left = rng.random::<bool>();
        let (left, left_cover) = random_node(rng, k, depth_left - 1, nodes);
        let (right, right_cover) = random_node(rng, k, depth_left - 1, nodes);
        let cover = left_cover + right_cover;
        nodes[id] = TreeNode::split(id, feature, threshold, left, right, default_left, cover);
        (id, cover)
    }
}

/// A random ensemble of 1..=3 trees over `k` features, depth at most
/// `max_depth`, random covers and leaf values, random base score.
pub fn random_ensemble(rng: &mut ChaCha8Rng, k: usize, max_depth: usize) -> TreeEnsemble {
    let n_trees = rng.random_range(1..=3);
    let trees = (0..n_trees)
        .map(|_| random_tree(rng, k, max_depth))
        .collect();
    let base_score = rng.random::<f64>() - 0.5;
    let names = (0..k).map(|i| format!("f{i}")).collect();
    TreeEnsemble::new(trees, base_score, names).expect("random tree construction is valid")
}

/// All 2^k complete binary rows.
pub fn exhaustive_binary_rows(k: usize) -> Vec<Vec<f64>> {
    (0..1usize << k)
        .map(|mask| {
            (0..k)
                .map(|i| if mask & (1 << i) != 0 { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Every complete binary row with exactly one feature replaced by missing.
pub fn single_missing_rows(k: usize) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    for hole in 0..k {
        for mask in 0..1usize << (k - 1) {
            let mut row = Vec::with_capacity(k);
            let mut bit = 0;
            for i in 0..k {
                if i == hole {
                    row.push(f64::NAN);
                } else {
                    row.push(if mask & (1 << bit) != 0 { 1.0 } else { 0.0 });
                    bit += 1;
                }
            }
            rows.push(row);
        }
    }
    rows
}
