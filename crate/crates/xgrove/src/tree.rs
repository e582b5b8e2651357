//! CART-style binary decision tree.
//!
//! One recursive partitioner serves three roles:
//!
//! * weighted Gini classification (the base learner of the forests, of
//!   AdaBoost and the fully interpretable baseline),
//! * squared-error regression on residuals with Newton leaf values
//!   (gradient boosting),
//! * second-order gain with L2 leaf regularization (the XGBoost-style
//!   booster).
//!
//! Split thresholds sit at midpoints of consecutive distinct sorted values;
//! `x[feature] <= threshold` routes left. Ties in gain are broken by the
//! lower feature index, then the lower threshold. In `random_threshold`
//! mode (extra trees) each candidate feature gets a single uniform cut
//! between its node-local min and max instead of the exhaustive scan.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<u32>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    /// Candidate features per node; `None` means all.
    pub feature_subsample: Option<usize>,
    /// Extra-trees mode: one uniform random cut per candidate feature.
    pub random_threshold: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
            feature_subsample: None,
            random_threshold: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeKind {
    /// Leaves carry class frequencies; `value` is P(class 1).
    Classification,
    /// Leaves carry an additive margin value (boosting).
    Margin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Node {
    /// Split feature; `None` marks a leaf.
    pub feature: Option<usize>,
    pub threshold: f64,
    /// Children as indices into the node array (0 when leaf).
    pub left: usize,
    pub right: usize,
    /// Total weighted impurity decrease of this split (0 for leaves);
    /// the raw material of mean-decrease-impurity importances.
    pub decrease: f64,
    pub weighted_count: f64,
    /// Weighted class counts (classification trees only).
    pub class_counts: [f64; 2],
    /// P(class 1) at this node for classification trees, the node's margin
    /// value for boosting trees.
    pub value: f64,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    pub kind: TreeKind,
    pub n_features: usize,
    pub params: TreeParams,
    /// Preorder node array; the root is node 0.
    pub nodes: Vec<Node>,
}

/// What the partitioner optimizes.
pub enum FitTarget<'a> {
    /// Binary labels with per-row weights (aligned to the matrix rows).
    Class { y: &'a [u8], weights: &'a [f64] },
    /// Squared-error splits on residuals, Newton leaf values
    /// `sum(residual) / sum(hessian)`.
    Residual {
        residuals: &'a [f64],
        hessians: &'a [f64],
    },
    /// Second-order gain with L2 regularization; leaf values
    /// `-G / (H + lambda)`.
    GradHess {
        gradients: &'a [f64],
        hessians: &'a [f64],
        lambda: f64,
        gamma: f64,
    },
}

/// Gini impurity `1 - sum(p_c^2)` of a per-class count vector.
pub fn gini(counts: &[f64]) -> Result<f64> {
    if counts.iter().any(|&c| c < 0.0) {
        return Err(Error::Argument("class counts must be nonnegative".into()));
    }
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::Argument("class counts must not all be zero".into()));
    }
    Ok(1.0 - counts.iter().map(|&c| (c / total) * (c / total)).sum::<f64>())
}

/// `total_weight * gini(counts)`; the form the split scan accumulates.
#[inline]
fn weighted_gini_term(w0: f64, w1: f64) -> f64 {
    let w = w0 + w1;
    if w <= 0.0 {
        0.0
    } else {
        w - (w0 * w0 + w1 * w1) / w
    }
}

/// Node-level aggregate of the fit target over a row set.
#[derive(Clone, Copy)]
struct NodeStats {
    weighted_count: f64,
    class_counts: [f64; 2],
    value: f64,
    /// Total weighted impurity of the node (criterion-specific scale).
    impurity_term: f64,
    pure: bool,
}

fn node_stats(target: &FitTarget, rows: &[usize]) -> NodeStats {
    match target {
        FitTarget::Class { y, weights } => {
            let mut counts = [0.0f64; 2];
            for &r in rows {
                counts[y[r] as usize] += weights[r];
            }
            let w = counts[0] + counts[1];
            NodeStats {
                weighted_count: w,
                class_counts: counts,
                value: if w > 0.0 { counts[1] / w } else { 0.0 },
                impurity_term: weighted_gini_term(counts[0], counts[1]),
                pure: counts[0] == 0.0 || counts[1] == 0.0,
            }
        }
        FitTarget::Residual {
            residuals,
            hessians,
        } => {
            let n = rows.len() as f64;
            let sum: f64 = rows.iter().map(|&r| residuals[r]).sum();
            let sum_sq: f64 = rows.iter().map(|&r| residuals[r] * residuals[r]).sum();
            let hess: f64 = rows.iter().map(|&r| hessians[r]).sum();
            let sse = (sum_sq - sum * sum / n).max(0.0);
            NodeStats {
                weighted_count: n,
                class_counts: [0.0, 0.0],
                value: sum / (hess + 1e-16),
                impurity_term: sse,
                pure: sse == 0.0,
            }
        }
        FitTarget::GradHess {
            gradients,
            hessians,
            lambda,
            ..
        } => {
            let g: f64 = rows.iter().map(|&r| gradients[r]).sum();
            let h: f64 = rows.iter().map(|&r| hessians[r]).sum();
            NodeStats {
                weighted_count: rows.len() as f64,
                class_counts: [0.0, 0.0],
                value: -g / (h + lambda),
                impurity_term: 0.0,
                pure: false,
            }
        }
    }
}

/// Best split of one feature under the exhaustive midpoint scan.
/// Returns `(gain, threshold)`; `gain` is the total weighted decrease.
fn scan_feature(
    target: &FitTarget,
    stats: &NodeStats,
    sorted: &[(f64, usize)],
    min_leaf: usize,
) -> Option<(f64, f64)> {
    let n = sorted.len();
    let mut best: Option<(f64, f64)> = None;
    // Zero-gain splits are admitted so that impure nodes with separable
    // rows keep splitting (XOR-style patterns have a zero-gain first cut);
    // strictly-greater replacement keeps the earliest candidate on ties.
    let mut consider = |gain: f64, threshold: f64| {
        if gain >= 0.0 && best.is_none_or(|(g, _)| gain > g) {
            best = Some((gain, threshold));
        }
    };
    match target {
        FitTarget::Class { y, weights } => {
            let mut left = [0.0f64; 2];
            for i in 0..n - 1 {
                let (v, r) = sorted[i];
                left[y[r] as usize] += weights[r];
                let next = sorted[i + 1].0;
                if v == next || i + 1 < min_leaf || n - i - 1 < min_leaf {
                    continue;
                }
                let right = [
                    stats.class_counts[0] - left[0],
                    stats.class_counts[1] - left[1],
                ];
                let gain = stats.impurity_term
                    - weighted_gini_term(left[0], left[1])
                    - weighted_gini_term(right[0], right[1]);
                consider(gain, midpoint(v, next));
            }
        }
        FitTarget::Residual { residuals, .. } => {
            let total: f64 = sorted.iter().map(|&(_, r)| residuals[r]).sum();
            let mut left_sum = 0.0;
            for i in 0..n - 1 {
                let (v, r) = sorted[i];
                left_sum += residuals[r];
                let next = sorted[i + 1].0;
                if v == next || i + 1 < min_leaf || n - i - 1 < min_leaf {
                    continue;
                }
                let nl = (i + 1) as f64;
                let nr = (n - i - 1) as f64;
                let right_sum = total - left_sum;
                // SSE decrease in its shift-invariant form.
                let gain = left_sum * left_sum / nl + right_sum * right_sum / nr
                    - total * total / (nl + nr);
                consider(gain, midpoint(v, next));
            }
        }
        FitTarget::GradHess {
            gradients,
            hessians,
            lambda,
            gamma,
        } => {
            let g_total: f64 = sorted.iter().map(|&(_, r)| gradients[r]).sum();
            let h_total: f64 = sorted.iter().map(|&(_, r)| hessians[r]).sum();
            let parent = g_total * g_total / (h_total + lambda);
            let mut gl = 0.0;
            let mut hl = 0.0;
            for i in 0..n - 1 {
                let (v, r) = sorted[i];
                gl += gradients[r];
                hl += hessians[r];
                let next = sorted[i + 1].0;
                if v == next || i + 1 < min_leaf || n - i - 1 < min_leaf {
                    continue;
                }
                let gr = g_total - gl;
                let hr = h_total - hl;
                let gain =
                    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent) - gamma;
                consider(gain, midpoint(v, next));
            }
        }
    }
    best
}

/// Gain of a fixed threshold (extra-trees random cuts).
fn gain_at_threshold(
    target: &FitTarget,
    stats: &NodeStats,
    column: &[(f64, usize)],
    threshold: f64,
    min_leaf: usize,
) -> Option<f64> {
    let mut n_left = 0usize;
    match target {
        FitTarget::Class { y, weights } => {
            let mut left = [0.0f64; 2];
            for &(v, r) in column {
                if v <= threshold {
                    left[y[r] as usize] += weights[r];
                    n_left += 1;
                }
            }
            if n_left < min_leaf || column.len() - n_left < min_leaf {
                return None;
            }
            let right = [
                stats.class_counts[0] - left[0],
                stats.class_counts[1] - left[1],
            ];
            Some(
                stats.impurity_term
                    - weighted_gini_term(left[0], left[1])
                    - weighted_gini_term(right[0], right[1]),
            )
        }
        FitTarget::Residual { residuals, .. } => {
            let mut left_sum = 0.0;
            let mut total = 0.0;
            for &(v, r) in column {
                total += residuals[r];
                if v <= threshold {
                    left_sum += residuals[r];
                    n_left += 1;
                }
            }
            if n_left < min_leaf || column.len() - n_left < min_leaf {
                return None;
            }
            let nl = n_left as f64;
            let nr = (column.len() - n_left) as f64;
            let right_sum = total - left_sum;
            Some(left_sum * left_sum / nl + right_sum * right_sum / nr - total * total / (nl + nr))
        }
        FitTarget::GradHess {
            gradients,
            hessians,
            lambda,
            gamma,
        } => {
            let mut gl = 0.0;
            let mut hl = 0.0;
            let mut g_total = 0.0;
            let mut h_total = 0.0;
            for &(v, r) in column {
                g_total += gradients[r];
                h_total += hessians[r];
                if v <= threshold {
                    gl += gradients[r];
                    hl += hessians[r];
                    n_left += 1;
                }
            }
            if n_left < min_leaf || column.len() - n_left < min_leaf {
                return None;
            }
            let gr = g_total - gl;
            let hr = h_total - hl;
            Some(
                0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda)
                    - g_total * g_total / (h_total + lambda))
                    - gamma,
            )
        }
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    a + (b - a) / 2.0
}

struct Builder<'a> {
    x: &'a Matrix,
    target: FitTarget<'a>,
    params: &'a TreeParams,
    rng: &'a mut ChaCha8Rng,
    nodes: Vec<Node>,
}

impl<'a> Builder<'a> {
    /// Candidate features for one node, ascending so tie-breaking is by
    /// feature index.
    fn candidate_features(&mut self) -> Vec<usize> {
        let m = self.x.n_cols();
        match self.params.feature_subsample {
            Some(k) if k < m => {
                let mut all: Vec<usize> = (0..m).collect();
                for i in 0..k {
                    let j = self.rng.random_range(i..m);
                    all.swap(i, j);
                }
                let mut chosen = all[..k].to_vec();
                chosen.sort_unstable();
                chosen
            }
            _ => (0..m).collect(),
        }
    }

    fn build(&mut self, rows: Vec<usize>, depth: u32) -> usize {
        let stats = node_stats(&self.target, &rows);
        let make_leaf = |stats: &NodeStats| Node {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            decrease: 0.0,
            weighted_count: stats.weighted_count,
            class_counts: stats.class_counts,
            value: stats.value,
        };

        let depth_done = self.params.max_depth.is_some_and(|d| depth >= d);
        if stats.pure || depth_done || rows.len() < self.params.min_samples_split {
            self.nodes.push(make_leaf(&stats));
            return self.nodes.len() - 1;
        }

        // Best split over the candidate features.
        let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
        let mut column: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for feature in self.candidate_features() {
            column.clear();
            column.extend(rows.iter().map(|&r| (self.x.get(r, feature), r)));
            let found = if self.params.random_threshold {
                let lo = column.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
                let hi = column.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max);
                if lo >= hi {
                    None
                } else {
                    let t = self.rng.random_range(lo..hi);
                    gain_at_threshold(
                        &self.target,
                        &stats,
                        &column,
                        t,
                        self.params.min_samples_leaf,
                    )
                    .map(|g| (g, t))
                }
            } else {
                column.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                scan_feature(&self.target, &stats, &column, self.params.min_samples_leaf)
            };
            if let Some((gain, threshold)) = found {
                // Strictly-greater keeps the (lower feature, lower
                // threshold) winner on exact ties.
                if gain >= 0.0 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, feature, threshold));
                }
            }
        }

        let Some((gain, feature, threshold)) = best else {
            self.nodes.push(make_leaf(&stats));
            return self.nodes.len() - 1;
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.x.get(r, feature) <= threshold);

        let index = self.nodes.len();
        self.nodes.push(Node {
            feature: Some(feature),
            threshold,
            left: 0,
            right: 0,
            decrease: gain,
            weighted_count: stats.weighted_count,
            class_counts: stats.class_counts,
            value: stats.value,
        });
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[index].left = left;
        self.nodes[index].right = right;
        index
    }
}

/// Fit a tree over `rows` of `x`.
pub fn fit(
    x: &Matrix,
    target: FitTarget,
    rows: &[usize],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Result<Tree> {
    if rows.is_empty() {
        return Err(Error::Argument("cannot fit a tree on zero rows".into()));
    }
    let kind = match &target {
        FitTarget::Class { y, weights } => {
            if weights.iter().any(|&w| w < 0.0) {
                return Err(Error::Argument("row weights must be nonnegative".into()));
            }
            if rows.iter().map(|&r| weights[r]).sum::<f64>() <= 0.0 {
                return Err(Error::Argument("total row weight must be positive".into()));
            }
            if y.iter().any(|&c| c > 1) {
                return Err(Error::Argument("labels must be binary 0/1".into()));
            }
            TreeKind::Classification
        }
        _ => TreeKind::Margin,
    };
    let mut builder = Builder {
        x,
        target,
        params,
        rng,
        nodes: Vec::new(),
    };
    builder.build(rows.to_vec(), 0);
    Ok(Tree {
        kind,
        n_features: x.n_cols(),
        params: params.clone(),
        nodes: builder.nodes,
    })
}

impl Tree {
    fn check_arity(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::Argument(format!(
                "expected {} features, got {}",
                self.n_features,
                x.len()
            )));
        }
        Ok(())
    }

    /// Index of the leaf reached by `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            match node.feature {
                None => return i,
                Some(f) => {
                    i = if x[f] <= node.threshold {
                        node.left
                    } else {
                        node.right
                    };
                }
            }
        }
    }

    /// Class-probability vector at the leaf reached by `x`
    /// (classification trees).
    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; 2]> {
        self.check_arity(x)?;
        let leaf = &self.nodes[self.leaf_index(x)];
        Ok([1.0 - leaf.value, leaf.value])
    }

    /// Additive margin value at the leaf reached by `x` (margin trees).
    pub fn predict_margin(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf_index(x)].value
    }

    /// Root-to-leaf node indices visited by `x`.
    pub fn decision_path(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.check_arity(x)?;
        let mut path = vec![0usize];
        loop {
            let node = &self.nodes[*path.last().unwrap()];
            match node.feature {
                None => return Ok(path),
                Some(f) => {
                    path.push(if x[f] <= node.threshold {
                        node.left
                    } else {
                        node.right
                    });
                }
            }
        }
    }

    pub fn depth(&self) -> u32 {
        fn walk(nodes: &[Node], i: usize) -> u32 {
            match nodes[i].feature {
                None => 0,
                Some(_) => 1 + walk(nodes, nodes[i].left).max(walk(nodes, nodes[i].right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_internal_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_leaf()).count()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_rng;

    fn unit_weights(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    fn fit_class(x: &Matrix, y: &[u8], params: &TreeParams, seed: u64) -> Tree {
        let w = unit_weights(x.n_rows());
        let rows: Vec<usize> = (0..x.n_rows()).collect();
        fit(
            x,
            FitTarget::Class { y, weights: &w },
            &rows,
            params,
            &mut seed_rng(seed),
        )
        .unwrap()
    }

    #[test]
    fn gini_hand_values() {
        assert!((gini(&[203.0, 96.0]).unwrap() - 0.4360).abs() < 1e-4);
        assert_eq!(gini(&[10.0, 0.0]).unwrap(), 0.0);
        assert_eq!(gini(&[5.0, 5.0]).unwrap(), 0.5);
        assert!(gini(&[0.0, 0.0]).is_err());
        assert!(gini(&[-1.0, 2.0]).is_err());
    }

    #[test]
    fn xor_is_shattered() {
        let x = Matrix::from_rows(4, 2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        let y = vec![0u8, 1, 1, 0];
        let tree = fit_class(&x, &y, &TreeParams::default(), 0);
        for r in 0..4 {
            let p = tree.predict_proba(x.row(r)).unwrap();
            assert_eq!(p[y[r] as usize], 1.0);
        }
    }

    #[test]
    fn pure_input_is_a_single_leaf() {
        let x = Matrix::from_rows(3, 1, vec![1.0, 2.0, 3.0]);
        let y = vec![1u8, 1, 1];
        let tree = fit_class(&x, &y, &TreeParams::default(), 0);
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict_proba(&[9.0]).unwrap(), [0.0, 1.0]);
    }

    #[test]
    fn single_leaf_frequencies() {
        let x = Matrix::from_rows(4, 1, vec![1.0, 1.0, 1.0, 1.0]);
        let y = vec![0u8, 0, 0, 1];
        let tree = fit_class(&x, &y, &TreeParams::default(), 0);
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict_proba(&[1.0]).unwrap(), [0.75, 0.25]);
    }

    #[test]
    fn equality_routes_left() {
        let x = Matrix::from_rows(4, 1, vec![1.0, 2.0, 3.0, 4.0]);
        let y = vec![0u8, 0, 1, 1];
        let tree = fit_class(&x, &y, &TreeParams::default(), 0);
        let root = &tree.nodes[0];
        assert_eq!(root.feature, Some(0));
        let t = root.threshold;
        let path = tree.decision_path(&[t]).unwrap();
        assert_eq!(path[1], root.left);
    }

    #[test]
    fn decision_path_shapes() {
        let x = Matrix::from_rows(4, 1, vec![1.0, 2.0, 3.0, 4.0]);
        let pure = vec![0u8, 0, 0, 0];
        let tree = fit_class(&x, &pure, &TreeParams::default(), 0);
        assert_eq!(tree.decision_path(&[1.0]).unwrap().len(), 1);

        let y = vec![0u8, 0, 1, 1];
        let tree = fit_class(&x, &y, &TreeParams::default(), 0);
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.decision_path(&[0.0]).unwrap().len(), 2);
        let path = tree.decision_path(&[3.7]).unwrap();
        assert!(tree.nodes[*path.last().unwrap()].is_leaf());
    }

    #[test]
    fn wrong_arity_is_an_error() {
        let x = Matrix::from_rows(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let y = vec![0u8, 1];
        let tree = fit_class(&x, &y, &TreeParams::default(), 0);
        assert!(tree.predict_proba(&[1.0]).is_err());
        assert!(tree.decision_path(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn zero_total_weight_is_an_error() {
        let x = Matrix::from_rows(2, 1, vec![0.0, 1.0]);
        let y = vec![0u8, 1];
        let w = vec![0.0, 0.0];
        let rows = vec![0usize, 1];
        assert!(fit(
            &x,
            FitTarget::Class { y: &y, weights: &w },
            &rows,
            &TreeParams::default(),
            &mut seed_rng(0),
        )
        .is_err());
    }

    #[test]
    fn leaf_counts_sum_to_training_totals() {
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..30 {
            data.push((i % 7) as f64);
            data.push(((i * 13) % 5) as f64);
            y.push(u8::from(i % 3 == 0));
        }
        let x = Matrix::from_rows(30, 2, data);
        let tree = fit_class(&x, &y, &TreeParams::default(), 1);
        let mut totals = [0.0f64; 2];
        for leaf in tree.leaves() {
            totals[0] += leaf.class_counts[0];
            totals[1] += leaf.class_counts[1];
        }
        let expected = [
            y.iter().filter(|&&c| c == 0).count() as f64,
            y.iter().filter(|&&c| c == 1).count() as f64,
        ];
        assert!((totals[0] - expected[0]).abs() < 1e-9);
        assert!((totals[1] - expected[1]).abs() < 1e-9);
    }

    #[test]
    fn executed_splits_never_lose_impurity() {
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            data.push(((i * 29) % 11) as f64);
            data.push(((i * 17) % 13) as f64);
            y.push(u8::from((i * 7) % 3 == 1));
        }
        let x = Matrix::from_rows(40, 2, data);
        let tree = fit_class(&x, &y, &TreeParams::default(), 2);
        assert!(tree.n_internal_nodes() > 0);
        for node in &tree.nodes {
            if !node.is_leaf() {
                assert!(node.decrease >= 0.0);
            }
        }
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let x = Matrix::from_rows(10, 1, (0..10).map(|i| i as f64).collect());
        let y: Vec<u8> = (0..10).map(|i| u8::from(i >= 5)).collect();
        let params = TreeParams {
            min_samples_leaf: 3,
            ..TreeParams::default()
        };
        let tree = fit_class(&x, &y, &params, 0);
        for leaf in tree.leaves() {
            assert!(leaf.weighted_count >= 3.0);
        }
    }

    #[test]
    fn max_depth_limits_the_tree() {
        let x = Matrix::from_rows(8, 1, (0..8).map(|i| i as f64).collect());
        let y = vec![0u8, 1, 0, 1, 0, 1, 0, 1];
        let params = TreeParams {
            max_depth: Some(2),
            ..TreeParams::default()
        };
        let tree = fit_class(&x, &y, &params, 0);
        assert!(tree.depth() <= 2);
    }

    #[test]
    fn random_threshold_mode_is_seed_deterministic() {
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..25 {
            data.push(((i * 3) % 10) as f64);
            data.push(((i * 5) % 7) as f64);
            y.push(u8::from(i % 2 == 0));
        }
        let x = Matrix::from_rows(25, 2, data);
        let params = TreeParams {
            random_threshold: true,
            ..TreeParams::default()
        };
        let a = fit_class(&x, &y, &params, 9);
        let b = fit_class(&x, &y, &params, 9);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    /// Independent brute-force best split: enumerate every (feature,
    /// midpoint) pair and recompute the split gain from scratch.
    fn brute_force_best(x: &Matrix, y: &[u8]) -> Option<(f64, usize, f64)> {
        let n = x.n_rows();
        let mut best: Option<(f64, usize, f64)> = None;
        let total = [
            y.iter().filter(|&&c| c == 0).count() as f64,
            y.iter().filter(|&&c| c == 1).count() as f64,
        ];
        let parent = weighted_gini_term(total[0], total[1]);
        for f in 0..x.n_cols() {
            let mut values: Vec<f64> = (0..n).map(|r| x.get(r, f)).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            values.dedup();
            for pair in values.windows(2) {
                let t = midpoint(pair[0], pair[1]);
                let mut left = [0.0f64; 2];
                for r in 0..n {
                    if x.get(r, f) <= t {
                        left[y[r] as usize] += 1.0;
                    }
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let gain = parent
                    - weighted_gini_term(left[0], left[1])
                    - weighted_gini_term(right[0], right[1]);
                let better = match best {
                    None => gain >= 0.0,
                    Some((g, bf, bt)) => {
                        gain > g + 1e-12
                            || ((gain - g).abs() <= 1e-12 && (f, t) < (bf, bt))
                    }
                };
                if better {
                    best = Some((gain, f, t));
                }
            }
        }
        best
    }

    #[test]
    fn root_split_matches_brute_force_oracle() {
        let mut rng = seed_rng(77);
        for case in 0..20 {
            let n = 10 + (case * 2) % 40;
            let m = 1 + case % 4;
            let mut data = Vec::with_capacity(n * m);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                for _ in 0..m {
                    data.push(rng.random_range(0..12) as f64);
                }
                y.push(u8::from(rng.random_range(0..10) < 4));
            }
            if y.iter().all(|&c| c == y[0]) {
                y[0] ^= 1;
            }
            let x = Matrix::from_rows(n, m, data);
            let params = TreeParams {
                max_depth: Some(1),
                ..TreeParams::default()
            };
            let tree = fit_class(&x, &y, &params, case as u64);
            let oracle = brute_force_best(&x, &y);
            match (tree.nodes[0].feature, oracle) {
                (Some(f), Some((gain, of, ot))) => {
                    let t = tree.nodes[0].threshold;
                    // The chosen split must be gain-optimal per the oracle's
                    // own arithmetic; on exact ties it must be the
                    // lexicographically first (feature, threshold).
                    let mut left = [0.0f64; 2];
                    let total = [
                        y.iter().filter(|&&c| c == 0).count() as f64,
                        y.iter().filter(|&&c| c == 1).count() as f64,
                    ];
                    for r in 0..n {
                        if x.get(r, f) <= t {
                            left[y[r] as usize] += 1.0;
                        }
                    }
                    let right = [total[0] - left[0], total[1] - left[1]];
                    let chosen_gain = weighted_gini_term(total[0], total[1])
                        - weighted_gini_term(left[0], left[1])
                        - weighted_gini_term(right[0], right[1]);
                    assert!(
                        chosen_gain >= gain - 1e-9,
                        "case {case}: chosen gain {chosen_gain} < oracle {gain}"
                    );
                    if (chosen_gain - gain).abs() <= 1e-12 {
                        assert_eq!((f, t), (of, ot), "case {case}: tie-break mismatch");
                    }
                }
                (None, None) => {}
                (a, b) => panic!("case {case}: impl {a:?} vs oracle {b:?}"),
            }
        }
    }

    #[test]
    fn overfit_tree_reaches_perfect_training_accuracy() {
        let mut rng = seed_rng(40);
        for case in 0..5 {
            let n = 30;
            // Distinct first column guarantees duplicate-free rows.
            let mut data = Vec::new();
            let mut y = Vec::new();
            for i in 0..n {
                data.push(i as f64);
                data.push(rng.random_range(0..5) as f64);
                y.push(u8::from(rng.random_range(0..2) == 1));
            }
            if y.iter().all(|&c| c == y[0]) {
                y[0] ^= 1;
            }
            let x = Matrix::from_rows(n, 2, data);
            let tree = fit_class(&x, &y, &TreeParams::default(), case);
            for r in 0..n {
                let p = tree.predict_proba(x.row(r)).unwrap();
                assert_eq!(p[y[r] as usize], 1.0, "case {case}, row {r}");
            }
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let x = Matrix::from_rows(6, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = vec![0u8, 0, 1, 0, 1, 1];
        let tree = fit_class(&x, &y, &TreeParams::default(), 0);
        for r in 0..6 {
            let p = tree.predict_proba(x.row(r)).unwrap();
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }
}
