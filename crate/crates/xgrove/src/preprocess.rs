//! Fit-on-train / apply-everywhere column transformations.
//!
//! Statistics are learned exclusively from the training rows handed to
//! [`fit_plan`]; applying the plan never looks at the data again, which
//! keeps held-out rows from leaking into imputation or scaling.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericImpute {
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalize {
    Zscore,
    Minmax,
    None,
}

/// Preprocessing choices, part of a grid candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub impute_numerical: NumericImpute,
    pub normalize: Normalize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            impute_numerical: NumericImpute::Mean,
            normalize: Normalize::Zscore,
        }
    }
}

/// Per-column statistics fitted on training rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ColumnStats {
    /// fill = mean or median; center/scale per the normalize choice.
    Numerical { fill: f64, center: f64, scale: f64 },
    /// Mode for imputation plus the category codes seen in training.
    Nominal { mode: f64, seen: Vec<f64> },
    /// Target column: passed through untouched.
    Target,
}

/// A fitted preprocessing plan. Immutable once fitted; applying it is a
/// pure function of the inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessPlan {
    pub config: PreprocessConfig,
    pub stats: Vec<ColumnStats>,
}

fn observed(ds: &Dataset, rows: &[usize], col: usize) -> Vec<f64> {
    rows.iter()
        .filter(|&&r| !ds.is_missing(r, col))
        .map(|&r| ds.values.get(r, col))
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population (1/n) standard deviation.
fn pop_std(xs: &[f64], m: f64) -> f64 {
    (xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Most frequent value; ties go to the smallest value.
fn mode(xs: &[f64]) -> f64 {
    let mut counts: Vec<(f64, usize)> = Vec::new();
    for &x in xs {
        match counts.iter_mut().find(|(v, _)| *v == x) {
            Some((_, c)) => *c += 1,
            None => counts.push((x, 1)),
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.partial_cmp(&a.0).unwrap()))
        .map(|(v, _)| v)
        .expect("non-empty column")
}

/// Learn per-column imputation and scaling statistics from `train` rows.
pub fn fit_plan(ds: &Dataset, train: &[usize], config: PreprocessConfig) -> Result<PreprocessPlan> {
    if train.is_empty() {
        return Err(Error::Argument("training rows must be non-empty".into()));
    }
    let mut stats = Vec::with_capacity(ds.n_cols());
    for (col, spec) in ds.specs.iter().enumerate() {
        if col == ds.target_col {
            stats.push(ColumnStats::Target);
            continue;
        }
        let mut obs = observed(ds, train, col);
        if obs.is_empty() {
            return Err(Error::Argument(format!(
                "column '{}' is entirely missing in the training rows",
                spec.name
            )));
        }
        match spec.kind {
            FeatureKind::Numerical => {
                let m = mean(&obs);
                let fill = match config.impute_numerical {
                    NumericImpute::Mean => m,
                    NumericImpute::Median => median(&mut obs),
                };
                let (center, scale) = match config.normalize {
                    Normalize::Zscore => {
                        let s = pop_std(&obs, m);
                        // A constant column gets unit scale so it maps to 0.
                        (m, if s > 0.0 { s } else { 1.0 })
                    }
                    Normalize::Minmax => {
                        let lo = obs.iter().cloned().fold(f64::INFINITY, f64::min);
                        let hi = obs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        (lo, if hi > lo { hi - lo } else { 1.0 })
                    }
                    Normalize::None => (0.0, 1.0),
                };
                stats.push(ColumnStats::Numerical {
                    fill,
                    center,
                    scale,
                });
            }
            // Nominal and ordinal columns keep their integer codes.
            FeatureKind::Nominal | FeatureKind::Ordinal => {
                let mut seen = obs.clone();
                seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
                seen.dedup();
                stats.push(ColumnStats::Nominal {
                    mode: mode(&obs),
                    seen,
                });
            }
        }
    }
    Ok(PreprocessPlan {
        config,
        stats,
    })
}

/// Apply a fitted plan to the given rows. Imputation happens first, then
/// normalization; nominal codes pass through unchanged except that
/// categories never seen in training are mapped to the training mode.
pub fn apply_plan(plan: &PreprocessPlan, ds: &Dataset, rows: &[usize]) -> Result<Matrix> {
    if plan.stats.len() != ds.n_cols() {
        return Err(Error::Argument(format!(
            "plan was fitted on {} columns, dataset has {}",
            plan.stats.len(),
            ds.n_cols()
        )));
    }
    let mut out = Matrix::zeros(rows.len(), ds.n_cols());
    for (ri, &r) in rows.iter().enumerate() {
        for (col, stat) in plan.stats.iter().enumerate() {
            let raw = ds.values.get(r, col);
            let miss = ds.is_missing(r, col);
            let v = match stat {
                ColumnStats::Target => raw,
                ColumnStats::Numerical {
                    fill,
                    center,
                    scale,
                } => {
                    let x = if miss { *fill } else { raw };
                    (x - center) / scale
                }
                ColumnStats::Nominal { mode, seen } => {
                    if miss {
                        *mode
                    } else if seen.binary_search_by(|s| s.partial_cmp(&raw).unwrap()).is_ok() {
                        raw
                    } else {
                        log::warn!(
                            "unseen category {raw} in column '{}'; using training mode",
                            ds.specs[col].name
                        );
                        *mode
                    }
                }
            };
            out.set(ri, col, v);
        }
    }
    Ok(out)
}

/// Invert the numerical transform for display purposes (grid values of
/// partial-dependence exports are written in raw units).
pub fn inverse_numeric(plan: &PreprocessPlan, col: usize, transformed: f64) -> f64 {
    match &plan.stats[col] {
        ColumnStats::Numerical { center, scale, .. } => transformed * scale + center,
        _ => transformed,
    }
}
