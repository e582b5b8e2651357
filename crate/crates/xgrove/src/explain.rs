//! Post-hoc explainers over fitted ensembles: implicit (Gini) importance,
//! per-instance decision-path contributions, permutation importance, 1D/2D
//! partial dependence and exact interventional Shapley values.
//!
//! All explainers are pure functions of an immutable model plus data; the
//! randomized one (permutation importance) derives its shuffles from an
//! explicit seed.

use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleKind, FittedEnsemble};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{classification_metrics, ConfusionMatrix, MetricName};
use crate::rng::stream_rng;
use crate::tree::Tree;
use rand::seq::SliceRandom;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub weight: f64,
    pub std: f64,
}

/// Feature importances, best first (ties by feature name).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceRanking {
    fn from_stats(features: &[String], weights: Vec<f64>, stds: Vec<f64>) -> ImportanceRanking {
        let mut entries: Vec<ImportanceEntry> = features
            .iter()
            .zip(weights)
            .zip(stds)
            .map(|((feature, weight), std)| ImportanceEntry {
                feature: feature.clone(),
                weight,
                std,
            })
            .collect();
        entries.sort_by(|a, b| {
            b.weight
                .partial_cmp(&a.weight)
                .unwrap()
                .then_with(|| a.feature.cmp(&b.feature))
        });
        ImportanceRanking { entries }
    }

    /// 1-based rank of a feature, if present.
    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.feature == feature)
            .map(|p| p + 1)
    }

    pub fn weight_of(&self, feature: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.feature == feature)
            .map(|e| e.weight)
    }
}

/// Per-instance decision-path attribution. `bias` is the ensemble's root
/// expectation (the class prior for frequency trees); contributions are on
/// the probability scale of the predicted class and sum, together with the
/// bias, to the predicted probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathContribution {
    pub bias: f64,
    pub contributions: Vec<(String, f64)>,
    pub predicted_class: usize,
    pub probability: f64,
}

/// Partial-dependence curve (one feature) or surface (two features,
/// row-major over the grid lattice). `band` is the per-point standard
/// deviation of the individual (ICE) predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdpCurve {
    pub features: Vec<String>,
    pub grids: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub band: Vec<f64>,
}

/// Exact Shapley attribution of one prediction: `base_value` is the mean
/// model output over the background, and efficiency guarantees
/// `base_value + sum(values) = output`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapValues {
    pub base_value: f64,
    pub values: Vec<(String, f64)>,
    pub output: f64,
}

/// Mean |phi| per feature for each class direction (binary probability
/// output makes the two magnitudes identical).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapSummary {
    pub features: Vec<String>,
    pub mean_abs: [Vec<f64>; 2],
}

fn population_std(values: &[f64], mean: f64) -> f64 {
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Per-tree mean-decrease-impurity vector, normalized to sum 1 (all zeros
/// when the tree has no internal node).
fn tree_importances(tree: &Tree, m: usize) -> Vec<f64> {
    let mut acc = vec![0.0f64; m];
    for node in &tree.nodes {
        if let Some(f) = node.feature {
            acc[f] += node.decrease;
        }
    }
    let total: f64 = acc.iter().sum();
    if total > 0.0 {
        acc.iter_mut().for_each(|v| *v /= total);
    }
    acc
}

/// Implicit (mean decrease impurity) importance: per tree the normalized
/// split-gain totals, averaged across trees with their across-tree std.
/// Voting models average their members' rankings.
pub fn gini_importance(model: &FittedEnsemble) -> Result<ImportanceRanking> {
    let m = model.n_features();
    if model.kind == EnsembleKind::MaxVoting {
        let member_rankings = model
            .members
            .iter()
            .map(gini_importance)
            .collect::<Result<Vec<_>>>()?;
        let k = member_rankings.len() as f64;
        let mut weights = vec![0.0; m];
        let mut stds = vec![0.0; m];
        for ranking in &member_rankings {
            for entry in &ranking.entries {
                let idx = model
                    .feature_names
                    .iter()
                    .position(|n| n == &entry.feature)
                    .expect("member features match");
                weights[idx] += entry.weight / k;
                stds[idx] += entry.std / k;
            }
        }
        return Ok(ImportanceRanking::from_stats(
            &model.feature_names,
            weights,
            stds,
        ));
    }

    if model.trees.iter().all(|t| t.n_internal_nodes() == 0) {
        log::warn!("model has no internal nodes; importances are all zero");
        return Ok(ImportanceRanking::from_stats(
            &model.feature_names,
            vec![0.0; m],
            vec![0.0; m],
        ));
    }
    let per_tree: Vec<Vec<f64>> = model
        .trees
        .iter()
        .map(|t| tree_importances(t, m))
        .collect();
    let k = per_tree.len() as f64;
    let weights: Vec<f64> = (0..m)
        .map(|f| per_tree.iter().map(|t| t[f]).sum::<f64>() / k)
        .collect();
    let stds: Vec<f64> = (0..m)
        .map(|f| {
            let col: Vec<f64> = per_tree.iter().map(|t| t[f]).collect();
            population_std(&col, weights[f])
        })
        .collect();
    Ok(ImportanceRanking::from_stats(
        &model.feature_names,
        weights,
        stds,
    ))
}

/// Walk one tree's decision path accumulating `value(child) - value(parent)`
/// onto the parent's split feature.
fn tree_path_deltas(tree: &Tree, x: &[f64], deltas: &mut [f64]) -> Result<(f64, f64)> {
    let path = tree.decision_path(x)?;
    let root_value = tree.nodes[path[0]].value;
    for pair in path.windows(2) {
        let parent = &tree.nodes[pair[0]];
        let child = &tree.nodes[pair[1]];
        let f = parent.feature.expect("internal node on path");
        deltas[f] += child.value - parent.value;
    }
    let leaf_value = tree.nodes[*path.last().unwrap()].value;
    Ok((root_value, leaf_value))
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Decision-path contributions for one row.
pub fn path_contributions(model: &FittedEnsemble, x: &[f64]) -> Result<PathContribution> {
    if !model.is_tree_based() {
        return Err(Error::UnsupportedModel(
            "path contributions need a tree-based model (not max_voting)".into(),
        ));
    }
    let m = model.n_features();
    if x.len() != m {
        return Err(Error::Argument(format!(
            "expected {m} features, got {}",
            x.len()
        )));
    }
    let proba = model.predict_proba_row(x)?;
    let predicted_class = usize::from(proba[1] > proba[0]);

    let mut deltas = vec![0.0f64; m];
    let (bias_p1, contributions_p1) = match model.kind {
        EnsembleKind::DecisionTree | EnsembleKind::RandomForest | EnsembleKind::ExtraTrees => {
            let k = model.trees.len() as f64;
            let mut bias = 0.0;
            for tree in &model.trees {
                let (root, _) = tree_path_deltas(tree, x, &mut deltas)?;
                bias += root / k;
            }
            deltas.iter_mut().for_each(|d| *d /= k);
            (bias, deltas)
        }
        EnsembleKind::AdaBoost => {
            // Smooth vote margin: expected vote 2p-1 per node, alpha-weighted.
            let total_alpha: f64 = model.tree_weights.iter().sum();
            let mut bias_margin = 0.0;
            if total_alpha > 0.0 {
                let mut margin_deltas = vec![0.0f64; m];
                for (tree, &alpha) in model.trees.iter().zip(&model.tree_weights) {
                    let mut tree_deltas = vec![0.0f64; m];
                    let (root, _) = tree_path_deltas(tree, x, &mut tree_deltas)?;
                    bias_margin += alpha * (2.0 * root - 1.0) / total_alpha;
                    for (acc, d) in margin_deltas.iter_mut().zip(&tree_deltas) {
                        // node values are P(class 1); vote scale doubles them
                        *acc += alpha * 2.0 * d / total_alpha;
                    }
                }
                deltas = margin_deltas;
            }
            distribute_probability(proba[1], bias_margin, deltas)
        }
        EnsembleKind::GradientBoosting | EnsembleKind::XgbStyle => {
            let lr = model.config.learning_rate;
            let mut bias_margin = model.base_score;
            for tree in &model.trees {
                let mut tree_deltas = vec![0.0f64; m];
                let (root, _) = tree_path_deltas(tree, x, &mut tree_deltas)?;
                bias_margin += lr * root;
                for (acc, d) in deltas.iter_mut().zip(&tree_deltas) {
                    *acc += lr * d;
                }
            }
            distribute_probability(proba[1], bias_margin, deltas)
        }
        EnsembleKind::MaxVoting => unreachable!("rejected above"),
    };

    // Flip to the predicted class's scale so the displayed attribution
    // explains the decision actually made.
    let (bias, contributions): (f64, Vec<f64>) = if predicted_class == 1 {
        (bias_p1, contributions_p1)
    } else {
        (1.0 - bias_p1, contributions_p1.iter().map(|c| -c).collect())
    };
    Ok(PathContribution {
        bias,
        contributions: model
            .feature_names
            .iter()
            .cloned()
            .zip(contributions)
            .collect(),
        predicted_class,
        probability: proba[predicted_class],
    })
}

/// Map margin-space deltas onto the probability scale: the total
/// probability shift away from the sigmoid of the bias margin is split
/// proportionally to the margin contributions.
fn distribute_probability(p1: f64, bias_margin: f64, deltas: Vec<f64>) -> (f64, Vec<f64>) {
    let bias_p = sigmoid(bias_margin);
    let total: f64 = deltas.iter().sum();
    let shift = p1 - bias_p;
    if total.abs() < 1e-12 {
        // Degenerate path (no splits contributed): absorb into the bias.
        return (p1, vec![0.0; deltas.len()]);
    }
    let scale = shift / total;
    (bias_p, deltas.into_iter().map(|d| d * scale).collect())
}

fn score_predictions(
    model: &FittedEnsemble,
    x: &Matrix,
    y: &[u8],
    metric: MetricName,
) -> Result<f64> {
    let predicted: Vec<usize> = (0..x.n_rows())
        .map(|r| model.predict_class(x.row(r)))
        .collect::<Result<Vec<_>>>()?;
    let cm = ConfusionMatrix::from_predictions(&predicted, y)?;
    Ok(classification_metrics(&cm)?.get(metric))
}

/// Permutation importance: the drop in the evaluation score after
/// shuffling one column, averaged over `repeats` seed-derived shuffles.
pub fn permutation_importance(
    model: &FittedEnsemble,
    x: &Matrix,
    y: &[u8],
    metric: MetricName,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceRanking> {
    if repeats == 0 {
        return Err(Error::Argument("repeats must be >= 1".into()));
    }
    let baseline = score_predictions(model, x, y, metric)?;
    let mut working = x.clone();
    let m = model.n_features();
    let mut weights = Vec::with_capacity(m);
    let mut stds = Vec::with_capacity(m);
    for f in 0..m {
        let original = x.column(f);
        let mut drops = Vec::with_capacity(repeats);
        for rep in 0..repeats {
            let mut shuffled = original.clone();
            shuffled.shuffle(&mut stream_rng(seed, (f as u64) << 16 | rep as u64));
            working.set_column(f, &shuffled);
            let score = score_predictions(model, &working, y, metric)?;
            drops.push(baseline - score);
        }
        working.set_column(f, &original);
        let mean = drops.iter().sum::<f64>() / repeats as f64;
        weights.push(mean);
        stds.push(population_std(&drops, mean));
    }
    Ok(ImportanceRanking::from_stats(
        &model.feature_names,
        weights,
        stds,
    ))
}

/// Unique quantile grid of one column (nearest-rank, up to `points`).
fn quantile_grid(column: &[f64], points: usize) -> Vec<f64> {
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut grid: Vec<f64> = (0..points)
        .map(|j| {
            let q = j as f64 / (points - 1) as f64;
            sorted[((n - 1) as f64 * q).round() as usize]
        })
        .collect();
    grid.dedup();
    grid
}

fn feature_index(model: &FittedEnsemble, feature: &str) -> Result<usize> {
    model
        .feature_names
        .iter()
        .position(|n| n == feature)
        .ok_or_else(|| Error::Argument(format!("feature '{feature}' not in the model's inputs")))
}

/// One-dimensional partial dependence of P(class 1) with an ICE band.
pub fn pdp(
    model: &FittedEnsemble,
    x: &Matrix,
    feature: &str,
    grid_points: usize,
) -> Result<PdpCurve> {
    if grid_points < 2 {
        return Err(Error::Argument("grid_points must be >= 2".into()));
    }
    let col = feature_index(model, feature)?;
    let grid = quantile_grid(&x.column(col), grid_points);
    let mut working = x.clone();
    let mut mean = Vec::with_capacity(grid.len());
    let mut band = Vec::with_capacity(grid.len());
    for &v in &grid {
        working.set_column(col, &vec![v; x.n_rows()]);
        let ice: Vec<f64> = (0..working.n_rows())
            .map(|r| model.predict_proba_row(working.row(r)).map(|p| p[1]))
            .collect::<Result<Vec<_>>>()?;
        let mu = ice.iter().sum::<f64>() / ice.len() as f64;
        mean.push(mu);
        band.push(population_std(&ice, mu));
    }
    Ok(PdpCurve {
        features: vec![feature.to_string()],
        grids: vec![grid],
        mean,
        band,
    })
}

/// Two-dimensional partial dependence over the quantile lattice of two
/// features (`mean` is row-major: index = i * len(grid_b) + j).
pub fn pdp2d(
    model: &FittedEnsemble,
    x: &Matrix,
    feature_a: &str,
    feature_b: &str,
    grid_points: usize,
) -> Result<PdpCurve> {
    if feature_a == feature_b {
        return Err(Error::Argument("2D PDP needs two distinct features".into()));
    }
    if grid_points < 2 {
        return Err(Error::Argument("grid_points must be >= 2".into()));
    }
    let col_a = feature_index(model, feature_a)?;
    let col_b = feature_index(model, feature_b)?;
    let grid_a = quantile_grid(&x.column(col_a), grid_points);
    let grid_b = quantile_grid(&x.column(col_b), grid_points);
    let mut working = x.clone();
    let mut mean = Vec::with_capacity(grid_a.len() * grid_b.len());
    let mut band = Vec::with_capacity(grid_a.len() * grid_b.len());
    for &va in &grid_a {
        working.set_column(col_a, &vec![va; x.n_rows()]);
        for &vb in &grid_b {
            working.set_column(col_b, &vec![vb; x.n_rows()]);
            let ice: Vec<f64> = (0..working.n_rows())
                .map(|r| model.predict_proba_row(working.row(r)).map(|p| p[1]))
                .collect::<Result<Vec<_>>>()?;
            let mu = ice.iter().sum::<f64>() / ice.len() as f64;
            mean.push(mu);
            band.push(population_std(&ice, mu));
        }
    }
    Ok(PdpCurve {
        features: vec![feature_a.to_string(), feature_b.to_string()],
        grids: vec![grid_a, grid_b],
        mean,
        band,
    })
}

/// Enumeration bound: beyond this many features the exact coalition sweep
/// is refused.
pub const SHAPLEY_MAX_FEATURES: usize = 20;

/// Interventional coalition values `v[mask]` for one row: the mean model
/// output over background rows with the masked features taken from `x`.
/// Masks are independent, so the sweep runs in parallel (order-stable).
fn coalition_values(
    model: &FittedEnsemble,
    background: &Matrix,
    x: &[f64],
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let m = model.n_features();
    let n_masks = 1usize << m;
    let inv_b = 1.0 / background.n_rows() as f64;
    (0..n_masks)
        .into_par_iter()
        .map(|mask| {
            let mut hybrid = vec![0.0f64; m];
            let mut acc = 0.0;
            for b in 0..background.n_rows() {
                let brow = background.row(b);
                for i in 0..m {
                    hybrid[i] = if mask & (1 << i) != 0 { x[i] } else { brow[i] };
                }
                acc += model.predict_proba_row(&hybrid)?[1];
            }
            Ok(acc * inv_b)
        })
        .collect()
}

/// Exact interventional Shapley values of P(class 1) for one row.
pub fn shapley_exact(
    model: &FittedEnsemble,
    background: &Matrix,
    x: &[f64],
) -> Result<ShapValues> {
    let m = model.n_features();
    if m > SHAPLEY_MAX_FEATURES {
        return Err(Error::Argument(format!(
            "exact Shapley enumeration is limited to {SHAPLEY_MAX_FEATURES} features (model has \
             {m}); subsample the background rows or reduce the feature set"
        )));
    }
    if x.len() != m {
        return Err(Error::Argument(format!(
            "expected {m} features, got {}",
            x.len()
        )));
    }
    if background.n_cols() != m || background.n_rows() == 0 {
        return Err(Error::Argument(
            "background must be non-empty with the model's arity".into(),
        ));
    }
    let v = coalition_values(model, background, x)?;
    let mut factorial = vec![1.0f64; m + 1];
    for i in 1..=m {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let mut values = Vec::with_capacity(m);
    for i in 0..m {
        let bit = 1usize << i;
        let mut phi = 0.0;
        for mask in 0..v.len() {
            if mask & bit != 0 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = factorial[s] * factorial[m - s - 1] / factorial[m];
            phi += w * (v[mask | bit] - v[mask]);
        }
        values.push(phi);
    }
    Ok(ShapValues {
        base_value: v[0],
        values: model.feature_names.iter().cloned().zip(values).collect(),
        output: v[v.len() - 1],
    })
}

/// Mean |phi| per feature over a set of rows.
pub fn shap_summary(
    model: &FittedEnsemble,
    rows: &Matrix,
    background: &Matrix,
) -> Result<ShapSummary> {
    let m = model.n_features();
    let mut acc = vec![0.0f64; m];
    for r in 0..rows.n_rows() {
        let shap = shapley_exact(model, background, rows.row(r))?;
        for (i, (_, phi)) in shap.values.iter().enumerate() {
            acc[i] += phi.abs() / rows.n_rows() as f64;
        }
    }
    // For a binary probability output the class-0 attribution is the
    // negation of the class-1 one, so the magnitudes coincide.
    Ok(ShapSummary {
        features: model.feature_names.clone(),
        mean_abs: [acc.clone(), acc],
    })
}
