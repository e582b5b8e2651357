//! Univariate feature scoring and recursive feature elimination.
//!
//! Filter scores (ANOVA-F, chi-squared, mutual information) are pure
//! functions of the provided rows; the wrapper method (RFE) repeatedly fits
//! an L2-regularized logistic regression by batch gradient descent and
//! drops the weakest coefficient until `k` features remain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    Anova,
    Chi2,
    MutualInfo,
    Rfe,
}

impl std::fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SelectionMethod::Anova => "anova",
            SelectionMethod::Chi2 => "chi2",
            SelectionMethod::MutualInfo => "mutual_info",
            SelectionMethod::Rfe => "rfe",
        };
        f.write_str(s)
    }
}

/// Relevance score of one feature under one method; rank 1 is best.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: String,
    pub method: SelectionMethod,
    pub score: f64,
    pub rank: usize,
}

/// Outcome of picking the top-k features of a scored (or RFE-ordered) set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: SelectionMethod,
    pub k: usize,
    pub selected: Vec<String>,
    pub masked: Vec<String>,
}

/// Number of equal-frequency bins used to discretize continuous columns
/// for the mutual-information estimator.
const MI_BINS: usize = 10;

fn anova_f(column: &[f64], y: &[u8]) -> f64 {
    let n = column.len() as f64;
    let grand = column.iter().sum::<f64>() / n;
    let mut per_class: [(f64, f64); 2] = [(0.0, 0.0); 2]; // (count, sum)
    for (&x, &c) in column.iter().zip(y) {
        per_class[c as usize].0 += 1.0;
        per_class[c as usize].1 += x;
    }
    let classes = per_class.iter().filter(|(c, _)| *c > 0.0).count();
    if classes < 2 {
        return 0.0;
    }
    let mut ssb = 0.0;
    for (count, sum) in per_class.iter().filter(|(c, _)| *c > 0.0) {
        let m = sum / count;
        ssb += count * (m - grand) * (m - grand);
    }
    let mut ssw = 0.0;
    for (&x, &c) in column.iter().zip(y) {
        let m = per_class[c as usize].1 / per_class[c as usize].0;
        ssw += (x - m) * (x - m);
    }
    let df_b = (classes - 1) as f64;
    let df_w = n - classes as f64;
    if df_w <= 0.0 {
        return 0.0;
    }
    let msb = ssb / df_b;
    let msw = ssw / df_w;
    if msw == 0.0 {
        if msb == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        msb / msw
    }
}

fn chi2_stat(column: &[f64], y: &[u8]) -> Result<f64> {
    if column.iter().any(|&x| x < 0.0) {
        return Err(Error::Argument(
            "chi2 requires nonnegative feature values".into(),
        ));
    }
    let n = column.len() as f64;
    let total: f64 = column.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut observed = [0.0f64; 2];
    let mut class_n = [0.0f64; 2];
    for (&x, &c) in column.iter().zip(y) {
        observed[c as usize] += x;
        class_n[c as usize] += 1.0;
    }
    let mut stat = 0.0;
    for c in 0..2 {
        if class_n[c] == 0.0 {
            continue;
        }
        let expected = class_n[c] / n * total;
        stat += (observed[c] - expected) * (observed[c] - expected) / expected;
    }
    Ok(stat)
}

/// Bin assignment for the plug-in MI estimator: values with at most
/// `MI_BINS` distinct levels are used as-is, anything else goes through
/// equal-frequency binning fitted on the provided rows.
fn discretize(column: &[f64]) -> Vec<usize> {
    let mut distinct: Vec<f64> = column.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() <= MI_BINS {
        return column
            .iter()
            .map(|x| distinct.binary_search_by(|d| d.partial_cmp(x).unwrap()).unwrap())
            .collect();
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..MI_BINS)
        .map(|b| sorted[(n * b).div_ceil(MI_BINS) - 1])
        .collect();
    edges.dedup();
    column
        .iter()
        .map(|&x| edges.iter().filter(|&&e| x > e).count())
        .collect()
}

/// Plug-in mutual information in nats between the discretized feature and
/// the binary label.
fn mutual_info(column: &[f64], y: &[u8]) -> f64 {
    let bins = discretize(column);
    let n_bins = bins.iter().max().map_or(0, |&b| b + 1);
    let n = column.len() as f64;
    let mut joint = vec![[0.0f64; 2]; n_bins];
    let mut p_bin = vec![0.0f64; n_bins];
    let mut p_class = [0.0f64; 2];
    for (&b, &c) in bins.iter().zip(y) {
        joint[b][c as usize] += 1.0;
        p_bin[b] += 1.0;
        p_class[c as usize] += 1.0;
    }
    let mut mi = 0.0;
    for (b, cells) in joint.iter().enumerate() {
        for (c, &count) in cells.iter().enumerate() {
            if count == 0.0 {
                continue;
            }
            let p_xy = count / n;
            mi += p_xy * (p_xy * n * n / (p_bin[b] * p_class[c])).ln();
        }
    }
    mi.max(0.0)
}

fn is_constant(column: &[f64]) -> bool {
    column.windows(2).all(|w| w[0] == w[1])
}

/// Score every column of `x` under a filter method.
///
/// Ranks are 1-based, descending score, ties broken by ascending feature
/// name. Zero-variance columns score 0 and rank last.
pub fn score_features(
    x: &Matrix,
    names: &[String],
    y: &[u8],
    method: SelectionMethod,
) -> Result<Vec<FeatureScore>> {
    if names.len() != x.n_cols() {
        return Err(Error::Argument("one name per column required".into()));
    }
    if y.len() != x.n_rows() {
        return Err(Error::Argument("labels/row count mismatch".into()));
    }
    if method == SelectionMethod::Rfe {
        return Err(Error::Argument(
            "rfe is a wrapper method; use rfe_select".into(),
        ));
    }
    let mut scores = Vec::with_capacity(names.len());
    for (c, name) in names.iter().enumerate() {
        let column = x.column(c);
        let score = if is_constant(&column) {
            log::warn!("column '{name}' has zero variance; score set to 0");
            0.0
        } else {
            match method {
                SelectionMethod::Anova => anova_f(&column, y),
                SelectionMethod::Chi2 => chi2_stat(&column, y)?,
                SelectionMethod::MutualInfo => mutual_info(&column, y),
                SelectionMethod::Rfe => unreachable!(),
            }
        };
        scores.push(FeatureScore {
            feature: name.clone(),
            method,
            score,
            rank: 0,
        });
    }
    assign_ranks(&mut scores);
    Ok(scores)
}

fn assign_ranks(scores: &mut [FeatureScore]) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .score
            .partial_cmp(&scores[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| scores[a].feature.cmp(&scores[b].feature))
    });
    for (rank0, &i) in order.iter().enumerate() {
        scores[i].rank = rank0 + 1;
    }
}

/// Keep the `k` best-ranked features; everything else is masked.
pub fn select_top_k(scores: &[FeatureScore], k: usize) -> Result<SelectionResult> {
    let m = scores.len();
    if k == 0 || k > m {
        return Err(Error::Argument(format!(
            "k must be in 1..={m}, got {k}"
        )));
    }
    let mut ordered: Vec<&FeatureScore> = scores.iter().collect();
    ordered.sort_by_key(|s| s.rank);
    let selected: Vec<String> = ordered[..k].iter().map(|s| s.feature.clone()).collect();
    let masked: Vec<String> = ordered[k..].iter().map(|s| s.feature.clone()).collect();
    Ok(SelectionResult {
        method: scores.first().map_or(SelectionMethod::Anova, |s| s.method),
        k,
        selected,
        masked,
    })
}

/// Fixed estimator settings for RFE's logistic regression.
const RFE_LEARNING_RATE: f64 = 0.1;
const RFE_ITERATIONS: usize = 500;
const RFE_L2: f64 = 1.0;

/// Logistic-regression coefficients (no intercept in the returned slice)
/// after a fixed budget of batch gradient-descent steps on standardized
/// columns. Deterministic: weights start at zero.
fn logistic_coefficients(x: &Matrix, y: &[u8]) -> Vec<f64> {
    let n = x.n_rows();
    let m = x.n_cols();
    // Standardize internally so coefficient magnitudes are comparable.
    let mut cols: Vec<Vec<f64>> = (0..m).map(|c| x.column(c)).collect();
    for col in cols.iter_mut() {
        let mean = col.iter().sum::<f64>() / n as f64;
        let std = (col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        let scale = if std > 0.0 { std } else { 1.0 };
        for v in col.iter_mut() {
            *v = (*v - mean) / scale;
        }
    }
    let mut w = vec![0.0f64; m];
    let mut b = 0.0f64;
    let mut grad = vec![0.0f64; m];
    for _ in 0..RFE_ITERATIONS {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for r in 0..n {
            let mut z = b;
            for (c, col) in cols.iter().enumerate() {
                z += w[c] * col[r];
            }
            let p = 1.0 / (1.0 + (-z).exp());
            let d = p - y[r] as f64;
            for (c, col) in cols.iter().enumerate() {
                grad[c] += d * col[r];
            }
            grad_b += d;
        }
        let inv_n = 1.0 / n as f64;
        for c in 0..m {
            // L2 penalty on the weights only, not the intercept.
            grad[c] = grad[c] * inv_n + RFE_L2 * inv_n * w[c];
            w[c] -= RFE_LEARNING_RATE * grad[c];
        }
        b -= RFE_LEARNING_RATE * grad_b * inv_n;
    }
    let gnorm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if gnorm > 1e-3 {
        log::warn!("RFE estimator not fully converged (|grad| = {gnorm:.2e}); using last iterate");
    }
    w
}

/// Elimination order of all features: index 0 is dropped first, the last
/// entry survives longest. The top-k survivors for any `k` are a suffix,
/// so one call serves every `k`.
pub fn rfe_elimination_order(x: &Matrix, names: &[String], y: &[u8]) -> Vec<String> {
    let mut remaining: Vec<usize> = (0..names.len()).collect();
    let mut eliminated = Vec::new();
    let all_rows: Vec<usize> = (0..x.n_rows()).collect();
    while remaining.len() > 1 {
        let sub = x.select(&all_rows, &remaining);
        let coefs = logistic_coefficients(&sub, y);
        let weakest = (0..remaining.len())
            .min_by(|&a, &b| {
                coefs[a]
                    .abs()
                    .partial_cmp(&coefs[b].abs())
                    .unwrap()
                    .then_with(|| names[remaining[a]].cmp(&names[remaining[b]]))
            })
            .expect("non-empty");
        eliminated.push(names[remaining[weakest]].clone());
        remaining.remove(weakest);
    }
    eliminated.push(names[remaining[0]].clone());
    eliminated
}

/// Recursive feature elimination down to `k` features.
pub fn rfe_select(x: &Matrix, names: &[String], y: &[u8], k: usize) -> Result<SelectionResult> {
    let m = names.len();
    if k == 0 || k > m {
        return Err(Error::Argument(format!("k must be in 1..={m}, got {k}")));
    }
    let order = rfe_elimination_order(x, names, y);
    let mut selected: Vec<String> = order[m - k..].to_vec();
    let mut masked: Vec<String> = order[..m - k].to_vec();
    // Report sets in the original column order for stable output.
    selected.sort_by_key(|n| names.iter().position(|p| p == n).unwrap());
    masked.sort_by_key(|n| names.iter().position(|p| p == n).unwrap());
    Ok(SelectionResult {
        method: SelectionMethod::Rfe,
        k,
        selected,
        masked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn matrix_from_cols(cols: &[Vec<f64>]) -> Matrix {
        let n = cols[0].len();
        let mut m = Matrix::zeros(n, cols.len());
        for (c, col) in cols.iter().enumerate() {
            m.set_column(c, col);
        }
        m
    }

    #[test]
    fn anova_separated_beats_noise() {
        let sep = vec![1.0, 1.1, 0.9, 5.0, 5.2, 4.8];
        let noise = vec![2.0, 4.0, 3.0, 2.5, 3.5, 3.1];
        let x = matrix_from_cols(&[sep, noise]);
        let y = vec![0, 0, 0, 1, 1, 1];
        let scores = score_features(&x, &names(&["a", "b"]), &y, SelectionMethod::Anova).unwrap();
        assert_eq!(scores[0].rank, 1);
        assert!(scores[0].score > scores[1].score);
    }

    #[test]
    fn anova_is_affine_invariant() {
        let col = vec![1.0, 2.0, 3.0, 7.0, 8.0, 9.5];
        let y = vec![0, 0, 0, 1, 1, 1];
        let f1 = anova_f(&col, &y);
        let scaled: Vec<f64> = col.iter().map(|v| -3.5 * v + 11.0).collect();
        let f2 = anova_f(&scaled, &y);
        assert!((f1 - f2).abs() < 1e-9 * f1.abs());
    }

    #[test]
    fn constant_column_scores_zero_and_ranks_last() {
        let x = matrix_from_cols(&[vec![1.0; 4], vec![0.0, 1.0, 0.0, 1.0]]);
        let y = vec![0, 1, 0, 1];
        for method in [
            SelectionMethod::Anova,
            SelectionMethod::Chi2,
            SelectionMethod::MutualInfo,
        ] {
            let scores = score_features(&x, &names(&["const", "good"]), &y, method).unwrap();
            assert_eq!(scores[0].score, 0.0);
            assert_eq!(scores[0].rank, 2, "{method}");
        }
    }

    #[test]
    fn chi2_rejects_negative_values() {
        let x = matrix_from_cols(&[vec![-1.0, 2.0]]);
        let y = vec![0, 1];
        assert!(score_features(&x, &names(&["a"]), &y, SelectionMethod::Chi2).is_err());
    }

    #[test]
    fn chi2_hand_computed_example() {
        // feature sums: class0 -> 1, class1 -> 5; priors 1/2 each; total 6.
        let x = matrix_from_cols(&[vec![1.0, 0.0, 2.0, 3.0]]);
        let y = vec![0, 0, 1, 1];
        let scores = score_features(&x, &names(&["a"]), &y, SelectionMethod::Chi2).unwrap();
        // expected = 3 per class; chi2 = (1-3)^2/3 + (5-3)^2/3 = 8/3
        assert!((scores[0].score - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn mutual_info_of_label_copy_is_label_entropy() {
        // 203 zeros and 96 ones, feature identical to label.
        let mut col = vec![0.0; 203];
        col.extend(vec![1.0; 96]);
        let y: Vec<u8> = col.iter().map(|&v| v as u8).collect();
        let mi = mutual_info(&col, &y);
        let p: f64 = 203.0 / 299.0;
        let entropy = -p * p.ln() - (1.0 - p) * (1.0 - p).ln();
        assert!((mi - entropy).abs() < 1e-9);
        assert!((entropy - 0.6277).abs() < 1e-4);
    }

    #[test]
    fn mutual_info_nonnegative_on_noise() {
        let col: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin() * 10.0).collect();
        let y: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        assert!(mutual_info(&col, &y) >= 0.0);
    }

    #[test]
    fn scores_invariant_to_row_order() {
        let x = matrix_from_cols(&[
            vec![1.0, 4.0, 2.0, 8.0, 3.0, 9.0],
            vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0],
        ]);
        let y = vec![0, 1, 0, 1, 0, 1];
        let perm = [5usize, 2, 0, 4, 1, 3];
        let xp = x.select(&perm, &[0, 1]);
        let yp: Vec<u8> = perm.iter().map(|&i| y[i]).collect();
        for method in [
            SelectionMethod::Anova,
            SelectionMethod::Chi2,
            SelectionMethod::MutualInfo,
        ] {
            let a = score_features(&x, &names(&["a", "b"]), &y, method).unwrap();
            let b = score_features(&xp, &names(&["a", "b"]), &yp, method).unwrap();
            for (sa, sb) in a.iter().zip(&b) {
                assert!((sa.score - sb.score).abs() < 1e-12, "{method}");
            }
        }
    }

    #[test]
    fn top_k_selection_is_monotone_in_k() {
        let x = matrix_from_cols(&[
            vec![1.0, 2.0, 6.0, 7.0],
            vec![3.0, 1.0, 4.0, 9.0],
            vec![0.0, 1.0, 1.0, 0.0],
        ]);
        let y = vec![0, 0, 1, 1];
        let scores =
            score_features(&x, &names(&["a", "b", "c"]), &y, SelectionMethod::Anova).unwrap();
        let mut previous: Vec<String> = Vec::new();
        for k in 1..=3 {
            let sel = select_top_k(&scores, k).unwrap();
            assert_eq!(sel.selected.len(), k);
            assert!(previous.iter().all(|f| sel.selected.contains(f)));
            previous = sel.selected;
        }
        assert!(select_top_k(&scores, 0).is_err());
        assert!(select_top_k(&scores, 4).is_err());
    }

    #[test]
    fn rfe_keeps_everything_when_k_equals_m() {
        let x = matrix_from_cols(&[vec![1.0, 2.0, 3.0, 4.0], vec![0.0, 1.0, 0.0, 1.0]]);
        let y = vec![0, 0, 1, 1];
        let sel = rfe_select(&x, &names(&["a", "b"]), &y, 2).unwrap();
        assert_eq!(sel.selected, names(&["a", "b"]));
        assert!(sel.masked.is_empty());
    }

    #[test]
    fn rfe_breaks_duplicate_column_tie_by_name() {
        let col = vec![1.0, 2.0, 5.0, 6.0, 1.5, 5.5];
        let x = matrix_from_cols(&[col.clone(), col]);
        let y = vec![0, 0, 1, 1, 0, 1];
        let order = rfe_elimination_order(&x, &names(&["dup_a", "dup_b"]), &y);
        assert_eq!(order[0], "dup_a");
    }

    #[test]
    fn rfe_drops_noise_before_signal() {
        let signal = vec![0.2, 0.1, 0.3, 0.9, 1.0, 0.8, 0.15, 0.95];
        let noise = vec![0.5, 0.4, 0.6, 0.5, 0.45, 0.55, 0.52, 0.48];
        let x = matrix_from_cols(&[noise, signal]);
        let y = vec![0, 0, 0, 1, 1, 1, 0, 1];
        let sel = rfe_select(&x, &names(&["noise", "signal"]), &y, 1).unwrap();
        assert_eq!(sel.selected, names(&["signal"]));
    }
}
