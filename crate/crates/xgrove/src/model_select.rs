//! Exhaustive grid search over (classifier × feature-selection) candidates
//! scored by stratified k-fold cross-validation.
//!
//! Every candidate is evaluated independently: per fold, preprocessing and
//! feature selection are fitted on the in-fold rows only, the classifier
//! is trained on the selected columns and scored on the held-out fold, and
//! the per-fold metrics are averaged unweighted. Candidate RNG streams are
//! derived from `(master_seed, grid_index)`, so evaluation order (or
//! parallelism) cannot change any result.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind, FeatureSpec, FoldPlan, SplitIndices};
use crate::ensemble::{self, EnsembleConfig, EnsembleKind, FittedEnsemble};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{
    classification_metrics, ConfusionMatrix, MetricName, MetricsReport,
};
use crate::preprocess::{apply_plan, fit_plan, ColumnStats, PreprocessConfig, PreprocessPlan};
use crate::rng::derive_seed;
use crate::select::{
    rfe_elimination_order, score_features, select_top_k, FeatureScore, SelectionMethod,
};

/// Feature-selection settings of one grid candidate: one method and count
/// per feature-type branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionSpec {
    pub num_method: SelectionMethod,
    pub num_k: usize,
    pub nom_method: SelectionMethod,
    pub nom_k: usize,
}

/// One grid-search point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateConfig {
    pub classifier: EnsembleConfig,
    /// `None` runs the pipeline without the selection stage.
    pub selection: Option<SelectionSpec>,
    pub preprocess: PreprocessConfig,
}

/// Per-fold evaluation record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldRecord {
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

/// A candidate plus its cross-validated metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateResult {
    pub grid_index: usize,
    pub config: CandidateConfig,
    /// Unweighted mean of the per-fold metrics.
    pub cv: MetricsReport,
    pub folds: Vec<FoldRecord>,
    /// Selection refitted on the full training partition (what the final
    /// model would use).
    pub selected_features: Vec<String>,
    pub test: Option<MetricsReport>,
    /// Set when the candidate could not be evaluated (e.g. a fold lost a
    /// class); invalid candidates rank last.
    pub invalid: Option<String>,
}

/// Grid definition expanded into candidates in deterministic nested order
/// (classifier, numerical method, numerical k, nominal method, nominal k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub classifiers: Vec<EnsembleKind>,
    pub num_methods: Vec<SelectionMethod>,
    pub num_ks: Vec<usize>,
    pub nom_methods: Vec<SelectionMethod>,
    pub nom_ks: Vec<usize>,
    pub preprocess: Vec<PreprocessConfig>,
    /// When false the selection stage is skipped entirely (one candidate
    /// per classifier, all features).
    pub feature_selection: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            classifiers: vec![
                EnsembleKind::RandomForest,
                EnsembleKind::ExtraTrees,
                EnsembleKind::AdaBoost,
                EnsembleKind::GradientBoosting,
                EnsembleKind::XgbStyle,
                EnsembleKind::MaxVoting,
            ],
            num_methods: vec![SelectionMethod::Anova, SelectionMethod::MutualInfo],
            num_ks: (1..=7).collect(),
            nom_methods: vec![
                SelectionMethod::Chi2,
                SelectionMethod::MutualInfo,
                SelectionMethod::Rfe,
            ],
            nom_ks: (1..=5).collect(),
            preprocess: vec![PreprocessConfig::default()],
            feature_selection: true,
        }
    }
}

impl GridSpec {
    /// Candidates in grid order, with per-branch k values clamped to the
    /// dataset's actual feature counts.
    pub fn enumerate(&self, ds: &Dataset) -> Vec<CandidateConfig> {
        let branches = TypeBranches::of(ds);
        let mut out = Vec::new();
        for &kind in &self.classifiers {
            let classifier = EnsembleConfig::default_for(kind);
            for &preprocess in &self.preprocess {
                if !self.feature_selection {
                    out.push(CandidateConfig {
                        classifier: classifier.clone(),
                        selection: None,
                        preprocess,
                    });
                    continue;
                }
                for &num_method in &self.num_methods {
                    for &num_k in &self.num_ks {
                        if num_k > branches.numerical.len() {
                            continue;
                        }
                        for &nom_method in &self.nom_methods {
                            for &nom_k in &self.nom_ks {
                                if nom_k > branches.nominal.len() {
                                    continue;
                                }
                                out.push(CandidateConfig {
                                    classifier: classifier.clone(),
                                    selection: Some(SelectionSpec {
                                        num_method,
                                        num_k,
                                        nom_method,
                                        nom_k,
                                    }),
                                    preprocess,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Input columns split by feature type (the pipeline's type branches).
struct TypeBranches {
    numerical: Vec<usize>,
    nominal: Vec<usize>,
}

impl TypeBranches {
    fn of(ds: &Dataset) -> TypeBranches {
        let mut numerical = Vec::new();
        let mut nominal = Vec::new();
        for c in ds.input_cols() {
            match ds.specs[c].kind {
                FeatureKind::Numerical => numerical.push(c),
                FeatureKind::Nominal | FeatureKind::Ordinal => nominal.push(c),
            }
        }
        TypeBranches { numerical, nominal }
    }
}

/// Everything selection needs about one train/eval split: transformed
/// matrices plus per-method feature rankings on the fit rows.
struct FoldData {
    fit_rows_local: Vec<usize>,
    eval_rows_local: Vec<usize>,
    transformed: Matrix,
    y_fit: Vec<u8>,
    y_eval: Vec<u8>,
    num_scores: HashMap<SelectionMethod, Vec<FeatureScore>>,
    nom_scores: HashMap<SelectionMethod, Vec<FeatureScore>>,
    nom_rfe_order: Option<Vec<String>>,
    single_class: bool,
    plan: PreprocessPlan,
}

impl FoldData {
    /// `fit_rows`/`eval_rows` are dataset row indices; the returned data
    /// holds one transformed matrix over both with local row indices.
    fn build(
        ds: &Dataset,
        branches: &TypeBranches,
        fit_rows: &[usize],
        eval_rows: &[usize],
        preprocess: PreprocessConfig,
        num_methods: &[SelectionMethod],
        nom_methods: &[SelectionMethod],
    ) -> Result<FoldData> {
        let labels = ds.labels();
        let plan = fit_plan(ds, fit_rows, preprocess)?;
        let mut all_rows = fit_rows.to_vec();
        all_rows.extend_from_slice(eval_rows);
        let transformed = apply_plan(&plan, ds, &all_rows)?;
        let fit_rows_local: Vec<usize> = (0..fit_rows.len()).collect();
        let eval_rows_local: Vec<usize> =
            (fit_rows.len()..fit_rows.len() + eval_rows.len()).collect();
        let y_fit: Vec<u8> = fit_rows.iter().map(|&r| labels[r]).collect();
        let y_eval: Vec<u8> = eval_rows.iter().map(|&r| labels[r]).collect();
        let single_class = y_fit.iter().all(|&c| c == 0) || y_fit.iter().all(|&c| c == 1);

        let names_of = |cols: &[usize]| -> Vec<String> {
            cols.iter().map(|&c| ds.specs[c].name.clone()).collect()
        };
        let num_names = names_of(&branches.numerical);
        let nom_names = names_of(&branches.nominal);
        let fit_matrix =
            |cols: &[usize]| -> Matrix { transformed.select(&fit_rows_local, cols) };

        let mut num_scores = HashMap::new();
        let mut nom_scores = HashMap::new();
        let mut nom_rfe_order = None;
        if !single_class {
            let num_fit = fit_matrix(&branches.numerical);
            for &m in num_methods {
                if m != SelectionMethod::Rfe {
                    num_scores.insert(m, score_features(&num_fit, &num_names, &y_fit, m)?);
                }
            }
            let nom_fit = fit_matrix(&branches.nominal);
            for &m in nom_methods {
                if m == SelectionMethod::Rfe {
                    if !branches.nominal.is_empty() {
                        nom_rfe_order =
                            Some(rfe_elimination_order(&nom_fit, &nom_names, &y_fit));
                    }
                } else {
                    nom_scores.insert(m, score_features(&nom_fit, &nom_names, &y_fit, m)?);
                }
            }
        }
        Ok(FoldData {
            fit_rows_local,
            eval_rows_local,
            transformed,
            y_fit,
            y_eval,
            num_scores,
            nom_scores,
            nom_rfe_order,
            single_class,
            plan,
        })
    }

    /// Selected feature names of one branch under (method, k).
    fn branch_selection(
        &self,
        method: SelectionMethod,
        k: usize,
        branch_size: usize,
        scores: &HashMap<SelectionMethod, Vec<FeatureScore>>,
        rfe_order: Option<&Vec<String>>,
    ) -> Result<Vec<String>> {
        if branch_size == 0 || k == 0 {
            return Ok(Vec::new());
        }
        if method == SelectionMethod::Rfe {
            let order = rfe_order
                .ok_or_else(|| Error::Argument("rfe order missing for branch".into()))?;
            return Ok(order[order.len() - k.min(order.len())..].to_vec());
        }
        let scored = scores
            .get(&method)
            .ok_or_else(|| Error::Argument(format!("method {method} not in grid cache")))?;
        Ok(select_top_k(scored, k.min(branch_size))?.selected)
    }
}

/// Shared evaluation state for one (dataset, split, folds, preprocess).
struct EvalCache {
    branches: TypeBranches,
    folds: Vec<FoldData>,
    /// Full training partition against the test partition.
    full: FoldData,
}

impl EvalCache {
    fn build(
        ds: &Dataset,
        split: &SplitIndices,
        folds: &FoldPlan,
        preprocess: PreprocessConfig,
        num_methods: &[SelectionMethod],
        nom_methods: &[SelectionMethod],
    ) -> Result<EvalCache> {
        let branches = TypeBranches::of(ds);
        let fold_data = (0..folds.k)
            .map(|f| {
                let (fit_rows, held) = folds.fold_rows(&split.train, f);
                FoldData::build(
                    ds,
                    &branches,
                    &fit_rows,
                    &held,
                    preprocess,
                    num_methods,
                    nom_methods,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let full = FoldData::build(
            ds,
            &branches,
            &split.train,
            &split.test,
            preprocess,
            num_methods,
            nom_methods,
        )?;
        Ok(EvalCache {
            branches,
            folds: fold_data,
            full,
        })
    }

    fn selected_columns(
        &self,
        ds: &Dataset,
        data: &FoldData,
        selection: Option<&SelectionSpec>,
    ) -> Result<Vec<usize>> {
        selected_columns(ds, &self.branches, data, selection)
    }
}

/// Selected dataset columns for a candidate on one fold's fit rows;
/// `None` selection keeps every input column.
fn selected_columns(
    ds: &Dataset,
    branches: &TypeBranches,
    data: &FoldData,
    selection: Option<&SelectionSpec>,
) -> Result<Vec<usize>> {
    let Some(spec) = selection else {
        return Ok(ds.input_cols());
    };
    let nums = data.branch_selection(
        spec.num_method,
        spec.num_k,
        branches.numerical.len(),
        &data.num_scores,
        None,
    )?;
    let noms = data.branch_selection(
        spec.nom_method,
        spec.nom_k,
        branches.nominal.len(),
        &data.nom_scores,
        data.nom_rfe_order.as_ref(),
    )?;
    let mut cols: Vec<usize> = nums
        .iter()
        .chain(noms.iter())
        .map(|n| ds.column_index(n).expect("selected name exists"))
        .collect();
    cols.sort_unstable();
    Ok(cols)
}

fn names_for(ds: &Dataset, cols: &[usize]) -> Vec<String> {
    cols.iter().map(|&c| ds.specs[c].name.clone()).collect()
}

/// Evaluate one candidate against the cache. `candidate_seed` feeds the
/// per-fold classifier streams.
fn evaluate_with_cache(
    ds: &Dataset,
    cache: &EvalCache,
    cand: &CandidateConfig,
    grid_index: usize,
    candidate_seed: u64,
) -> Result<CandidateResult> {
    let mut fold_records = Vec::with_capacity(cache.folds.len());
    let mut invalid = None;
    for (f, fold) in cache.folds.iter().enumerate() {
        if fold.single_class {
            invalid = Some(format!("fold {f} has single-class training rows"));
            break;
        }
        let cols = cache.selected_columns(ds, fold, cand.selection.as_ref())?;
        let x_fit = fold.transformed.select(&fold.fit_rows_local, &cols);
        let x_eval = fold.transformed.select(&fold.eval_rows_local, &cols);
        let names = names_for(ds, &cols);
        let cfg = cand
            .classifier
            .clone()
            .with_seed(derive_seed(candidate_seed, 0xcf01d + f as u64));
        let model = ensemble::fit(&cfg, &x_fit, &fold.y_fit, &names)?;
        let predicted: Vec<usize> = (0..x_eval.n_rows())
            .map(|r| model.predict_class(x_eval.row(r)))
            .collect::<Result<Vec<_>>>()?;
        let confusion = ConfusionMatrix::from_predictions(&predicted, &fold.y_eval)?;
        let metrics = classification_metrics(&confusion)?;
        fold_records.push(FoldRecord { confusion, metrics });
    }

    let (cv, selected_features) = if invalid.is_none() {
        let cv = MetricsReport::mean_of(
            &fold_records.iter().map(|f| f.metrics).collect::<Vec<_>>(),
        );
        let cols = cache.selected_columns(ds, &cache.full, cand.selection.as_ref())?;
        (cv, names_for(ds, &cols))
    } else {
        (MetricsReport::default(), Vec::new())
    };

    Ok(CandidateResult {
        grid_index,
        config: cand.clone(),
        cv,
        folds: fold_records,
        selected_features,
        test: None,
        invalid,
    })
}

fn methods_in(grid: &[CandidateConfig]) -> (Vec<SelectionMethod>, Vec<SelectionMethod>) {
    let mut num = Vec::new();
    let mut nom = Vec::new();
    for cand in grid {
        if let Some(s) = &cand.selection {
            if !num.contains(&s.num_method) {
                num.push(s.num_method);
            }
            if !nom.contains(&s.nom_method) {
                nom.push(s.nom_method);
            }
        }
    }
    (num, nom)
}

/// Evaluate a single candidate by stratified CV. `seed` plays the role of
/// the candidate stream (grid search derives it from the master seed and
/// the grid position).
pub fn evaluate_candidate(
    ds: &Dataset,
    split: &SplitIndices,
    folds: &FoldPlan,
    cand: &CandidateConfig,
    seed: u64,
) -> Result<CandidateResult> {
    let grid = std::slice::from_ref(cand);
    let (num_methods, nom_methods) = methods_in(grid);
    let cache = EvalCache::build(ds, split, folds, cand.preprocess, &num_methods, &nom_methods)?;
    evaluate_with_cache(ds, &cache, cand, 0, seed)
}

/// Ranked outcome of a grid search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchResult {
    /// All candidates, best first (scoring descending, ties by earlier
    /// grid position, invalid candidates last).
    pub ranked: Vec<CandidateResult>,
    /// Best candidate per classifier kind, in the grid's classifier order.
    pub per_classifier_best: Vec<CandidateResult>,
    pub scoring: MetricName,
}

/// Evaluate every candidate and rank by the scoring metric.
pub fn grid_search(
    ds: &Dataset,
    split: &SplitIndices,
    folds: &FoldPlan,
    grid: &[CandidateConfig],
    scoring: MetricName,
    seed: u64,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::Argument("grid must be non-empty".into()));
    }
    let (num_methods, nom_methods) = methods_in(grid);
    let mut preprocess_set: Vec<PreprocessConfig> = Vec::new();
    for cand in grid {
        if !preprocess_set.contains(&cand.preprocess) {
            preprocess_set.push(cand.preprocess);
        }
    }
    let caches: HashMap<PreprocessConfig, EvalCache> = preprocess_set
        .into_iter()
        .map(|p| {
            EvalCache::build(ds, split, folds, p, &num_methods, &nom_methods).map(|c| (p, c))
        })
        .collect::<Result<_>>()?;

    let mut results: Vec<CandidateResult> = grid
        .par_iter()
        .enumerate()
        .map(|(i, cand)| {
            let cache = &caches[&cand.preprocess];
            evaluate_with_cache(ds, cache, cand, i, derive_seed(seed, i as u64))
        })
        .collect::<Result<Vec<_>>>()?;

    results.sort_by(|a, b| {
        let sa = if a.invalid.is_some() {
            f64::NEG_INFINITY
        } else {
            a.cv.get(scoring)
        };
        let sb = if b.invalid.is_some() {
            f64::NEG_INFINITY
        } else {
            b.cv.get(scoring)
        };
        sb.partial_cmp(&sa)
            .unwrap()
            .then(a.grid_index.cmp(&b.grid_index))
    });

    let mut per_classifier_best: Vec<CandidateResult> = Vec::new();
    let mut seen: Vec<EnsembleKind> = Vec::new();
    for r in &results {
        if r.invalid.is_none() && !seen.contains(&r.config.classifier.kind) {
            seen.push(r.config.classifier.kind);
            per_classifier_best.push(r.clone());
        }
    }
    // Keep the classifier order of the grid, not the ranking order.
    let mut order: Vec<EnsembleKind> = Vec::new();
    for cand in grid {
        if !order.contains(&cand.classifier.kind) {
            order.push(cand.classifier.kind);
        }
    }
    per_classifier_best.sort_by_key(|r| {
        order
            .iter()
            .position(|&k| k == r.config.classifier.kind)
            .unwrap_or(usize::MAX)
    });

    Ok(GridSearchResult {
        ranked: results,
        per_classifier_best,
        scoring,
    })
}

/// Cross-validated balanced accuracy of the candidate with its classifier
/// swapped for a single decision tree (same preprocessing, same selection,
/// same folds): the numerator of the fidelity ratio.
pub fn fidelity_baseline(
    ds: &Dataset,
    split: &SplitIndices,
    folds: &FoldPlan,
    cand: &CandidateConfig,
    seed: u64,
) -> Result<f64> {
    let mut baseline = cand.clone();
    baseline.classifier = EnsembleConfig::default_for(EnsembleKind::DecisionTree);
    let result = evaluate_candidate(ds, split, folds, &baseline, seed)?;
    if let Some(reason) = result.invalid {
        return Err(Error::Argument(format!("baseline invalid: {reason}")));
    }
    Ok(result.cv.balanced_accuracy)
}

/// A full inference pipeline: fitted preprocessing, the selected columns
/// and the trained classifier. This is what gets serialized for the
/// `explain` subcommand and downstream bindings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineModel {
    pub schema: Vec<FeatureSpec>,
    pub target_col: usize,
    pub plan: PreprocessPlan,
    pub selected_cols: Vec<usize>,
    pub selected_names: Vec<String>,
    pub model: FittedEnsemble,
}

impl PipelineModel {
    /// Transform dataset rows into the model's input matrix.
    pub fn transform(&self, ds: &Dataset, rows: &[usize]) -> Result<Matrix> {
        let full = apply_plan(&self.plan, ds, rows)?;
        let local: Vec<usize> = (0..rows.len()).collect();
        Ok(full.select(&local, &self.selected_cols))
    }

    /// Transform one raw input row (dataset column order, target omitted;
    /// NaN marks a missing value).
    pub fn transform_raw_inputs(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let expected = self.schema.len() - 1;
        if inputs.len() != expected {
            return Err(Error::Argument(format!(
                "expected {expected} raw inputs, got {}",
                inputs.len()
            )));
        }
        // Rebuild the full-width row with a placeholder target.
        let mut full = Vec::with_capacity(self.schema.len());
        let mut it = inputs.iter();
        for c in 0..self.schema.len() {
            if c == self.target_col {
                full.push(0.0);
            } else {
                full.push(*it.next().expect("length checked"));
            }
        }
        let mut out = Vec::with_capacity(self.selected_cols.len());
        for &c in &self.selected_cols {
            let raw = full[c];
            let v = match &self.plan.stats[c] {
                ColumnStats::Target => raw,
                ColumnStats::Numerical {
                    fill,
                    center,
                    scale,
                } => {
                    let x = if raw.is_nan() { *fill } else { raw };
                    (x - center) / scale
                }
                ColumnStats::Nominal { mode, seen } => {
                    if raw.is_nan() {
                        *mode
                    } else if seen
                        .binary_search_by(|s| s.partial_cmp(&raw).unwrap())
                        .is_ok()
                    {
                        raw
                    } else {
                        *mode
                    }
                }
            };
            out.push(v);
        }
        Ok(out)
    }

    /// `[P(class 0), P(class 1)]` for one raw input row.
    pub fn predict_raw(&self, inputs: &[f64]) -> Result<[f64; 2]> {
        let x = self.transform_raw_inputs(inputs)?;
        self.model.predict_proba_row(&x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<PipelineModel> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Refit the candidate on the whole training partition and score it on the
/// held-out test partition.
pub fn final_test_eval(
    ds: &Dataset,
    split: &SplitIndices,
    cand: &CandidateConfig,
    seed: u64,
) -> Result<(MetricsReport, PipelineModel)> {
    if split.test.is_empty() {
        return Err(Error::Argument("no test rows".into()));
    }
    let (num_methods, nom_methods) = methods_in(std::slice::from_ref(cand));
    let branches = TypeBranches::of(ds);
    let full = FoldData::build(
        ds,
        &branches,
        &split.train,
        &split.test,
        cand.preprocess,
        &num_methods,
        &nom_methods,
    )?;
    let cols = selected_columns(ds, &branches, &full, cand.selection.as_ref())?;
    let names = names_for(ds, &cols);
    let x_train = full.transformed.select(&full.fit_rows_local, &cols);
    let x_test = full.transformed.select(&full.eval_rows_local, &cols);
    let cfg = cand
        .classifier
        .clone()
        .with_seed(derive_seed(seed, 0xf17));
    let model = ensemble::fit(&cfg, &x_train, &full.y_fit, &names)?;
    let predicted: Vec<usize> = (0..x_test.n_rows())
        .map(|r| model.predict_class(x_test.row(r)))
        .collect::<Result<Vec<_>>>()?;
    let confusion = ConfusionMatrix::from_predictions(&predicted, &full.y_eval)?;
    let metrics = classification_metrics(&confusion)?;
    let pipeline = PipelineModel {
        schema: ds.specs.clone(),
        target_col: ds.target_col,
        plan: full.plan,
        selected_cols: cols,
        selected_names: names,
        model,
    };
    Ok((metrics, pipeline))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_folds, stratified_split};
    use crate::synth::heart_failure_demo;

    fn small_candidate(kind: EnsembleKind, n_estimators: usize) -> CandidateConfig {
        let mut classifier = EnsembleConfig::default_for(kind);
        classifier.n_estimators = n_estimators;
        for m in classifier.members.iter_mut() {
            m.n_estimators = n_estimators;
        }
        CandidateConfig {
            classifier,
            selection: Some(SelectionSpec {
                num_method: SelectionMethod::Anova,
                num_k: 4,
                nom_method: SelectionMethod::MutualInfo,
                nom_k: 1,
            }),
            preprocess: PreprocessConfig::default(),
        }
    }

    fn setup() -> (Dataset, SplitIndices, FoldPlan) {
        let ds = heart_failure_demo(1);
        let split = stratified_split(&ds, 0.3, 1).unwrap();
        let folds = make_folds(&split.train, &ds.labels(), 5, 1).unwrap();
        (ds, split, folds)
    }

    #[test]
    fn evaluate_candidate_is_deterministic() {
        let (ds, split, folds) = setup();
        let cand = small_candidate(EnsembleKind::RandomForest, 10);
        let a = evaluate_candidate(&ds, &split, &folds, &cand, 7).unwrap();
        let b = evaluate_candidate(&ds, &split, &folds, &cand, 7).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.folds.len(), 5);
        assert!(a.cv.balanced_accuracy > 0.5);
        assert_eq!(a.selected_features.len(), 5);
    }

    #[test]
    fn leaked_label_reaches_perfect_cv_accuracy() {
        // One feature equals the label; a plain tree must score 1.0.
        let ds = heart_failure_demo(2);
        let mut ds = ds;
        let target = ds.target_col;
        let column: Vec<f64> = (0..ds.n_rows()).map(|r| ds.values.get(r, target)).collect();
        let leak = ds.column_index("smoking").unwrap();
        ds.values.set_column(leak, &column);
        let split = stratified_split(&ds, 0.3, 0).unwrap();
        let folds = make_folds(&split.train, &ds.labels(), 5, 0).unwrap();
        let cand = CandidateConfig {
            classifier: EnsembleConfig::default_for(EnsembleKind::DecisionTree),
            selection: None,
            preprocess: PreprocessConfig::default(),
        };
        let result = evaluate_candidate(&ds, &split, &folds, &cand, 0).unwrap();
        assert!((result.cv.accuracy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_search_ranks_and_reports_per_classifier_best() {
        let (ds, split, folds) = setup();
        let grid = vec![
            small_candidate(EnsembleKind::DecisionTree, 1),
            small_candidate(EnsembleKind::RandomForest, 10),
            small_candidate(EnsembleKind::ExtraTrees, 10),
        ];
        let result =
            grid_search(&ds, &split, &folds, &grid, MetricName::BalancedAccuracy, 3).unwrap();
        assert_eq!(result.ranked.len(), 3);
        for pair in result.ranked.windows(2) {
            assert!(
                pair[0].cv.balanced_accuracy >= pair[1].cv.balanced_accuracy
                    || pair[1].invalid.is_some()
            );
        }
        assert_eq!(result.per_classifier_best.len(), 3);
        assert_eq!(
            result.per_classifier_best[0].config.classifier.kind,
            EnsembleKind::DecisionTree
        );
    }

    #[test]
    fn grid_search_matches_standalone_evaluation() {
        let (ds, split, folds) = setup();
        let grid = vec![
            small_candidate(EnsembleKind::RandomForest, 8),
            small_candidate(EnsembleKind::GradientBoosting, 8),
        ];
        let result =
            grid_search(&ds, &split, &folds, &grid, MetricName::BalancedAccuracy, 11).unwrap();
        for r in &result.ranked {
            let standalone = evaluate_candidate(
                &ds,
                &split,
                &folds,
                &grid[r.grid_index],
                derive_seed(11, r.grid_index as u64),
            )
            .unwrap();
            assert_eq!(standalone.cv, r.cv, "grid index {}", r.grid_index);
        }
    }

    #[test]
    fn equal_scores_keep_grid_order() {
        let (ds, split, folds) = setup();
        let cand = small_candidate(EnsembleKind::DecisionTree, 1);
        // Decision trees ignore the candidate seed (exhaustive splits), so
        // identical candidates tie exactly.
        let grid = vec![cand.clone(), cand];
        let result =
            grid_search(&ds, &split, &folds, &grid, MetricName::BalancedAccuracy, 5).unwrap();
        assert_eq!(result.ranked[0].grid_index, 0);
        assert_eq!(result.ranked[1].grid_index, 1);
    }

    #[test]
    fn unknown_scoring_is_rejected_upstream() {
        assert!("mcc".parse::<MetricName>().is_err());
    }

    #[test]
    fn fold_without_a_class_marks_the_candidate_invalid() {
        // A single positive row: the fold holding it out trains on one
        // class only.
        let mut data = Vec::new();
        for i in 0..20 {
            data.push(i as f64);
            data.push(f64::from(i == 0));
        }
        let ds = Dataset {
            specs: vec![FeatureSpec::numerical("x"), FeatureSpec::nominal("y")],
            values: Matrix::from_rows(20, 2, data),
            missing: vec![false; 40],
            target_col: 1,
        };
        let split = SplitIndices {
            train: (0..20).collect(),
            test: Vec::new(),
        };
        let folds = make_folds(&split.train, &ds.labels(), 4, 0).unwrap();
        let cand = CandidateConfig {
            classifier: EnsembleConfig::default_for(EnsembleKind::DecisionTree),
            selection: None,
            preprocess: PreprocessConfig::default(),
        };
        let result = evaluate_candidate(&ds, &split, &folds, &cand, 0).unwrap();
        assert!(result.invalid.is_some());
        assert_eq!(result.cv.balanced_accuracy, 0.0);
    }

    #[test]
    fn fidelity_of_decision_tree_candidate_is_one() {
        let (ds, split, folds) = setup();
        let cand = CandidateConfig {
            classifier: EnsembleConfig::default_for(EnsembleKind::DecisionTree),
            selection: None,
            preprocess: PreprocessConfig::default(),
        };
        let own = evaluate_candidate(&ds, &split, &folds, &cand, 2).unwrap();
        let baseline = fidelity_baseline(&ds, &split, &folds, &cand, 2).unwrap();
        let score = crate::metrics::explainability_score(
            12,
            12,
            baseline,
            own.cv.balanced_accuracy,
        )
        .unwrap();
        assert!((score.fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_near_one_on_pure_noise() {
        // Labels independent of features: baseline and model both hover
        // near chance, so their ratio is near 1.
        use rand::Rng;
        let mut rng = crate::rng::seed_rng(99);
        let mut data = Vec::new();
        for _ in 0..200 {
            data.push(rng.random_range(0.0..1.0));
            data.push(rng.random_range(0.0..1.0));
            data.push(f64::from(rng.random_bool(0.5)));
        }
        let ds = Dataset {
            specs: vec![
                FeatureSpec::numerical("a"),
                FeatureSpec::numerical("b"),
                FeatureSpec::nominal("y"),
            ],
            values: Matrix::from_rows(200, 3, data),
            missing: vec![false; 600],
            target_col: 2,
        };
        let split = stratified_split(&ds, 0.3, 4).unwrap();
        let folds = make_folds(&split.train, &ds.labels(), 5, 4).unwrap();
        let mut classifier = EnsembleConfig::default_for(EnsembleKind::RandomForest);
        classifier.n_estimators = 20;
        let cand = CandidateConfig {
            classifier,
            selection: None,
            preprocess: PreprocessConfig::default(),
        };
        let own = evaluate_candidate(&ds, &split, &folds, &cand, 4).unwrap();
        let baseline = fidelity_baseline(&ds, &split, &folds, &cand, 4).unwrap();
        let fidelity = baseline / own.cv.balanced_accuracy;
        assert!((own.cv.balanced_accuracy - 0.5).abs() < 0.15);
        assert!((fidelity - 1.0).abs() < 0.3);
    }

    #[test]
    fn final_test_eval_scores_the_held_out_partition() {
        let (ds, split, folds) = setup();
        let cand = small_candidate(EnsembleKind::ExtraTrees, 20);
        let cv = evaluate_candidate(&ds, &split, &folds, &cand, 9).unwrap();
        let (test, pipeline) = final_test_eval(&ds, &split, &cand, 9).unwrap();
        assert!(test.balanced_accuracy > 0.5);
        assert!(cv.cv.balanced_accuracy > 0.5);
        assert_eq!(pipeline.selected_names.len(), 5);

        // Raw-row prediction agrees with the transformed path.
        let x_test = pipeline.transform(&ds, &split.test).unwrap();
        let row = split.test[0];
        let raw: Vec<f64> = ds
            .input_cols()
            .iter()
            .map(|&c| ds.values.get(row, c))
            .collect();
        let from_raw = pipeline.predict_raw(&raw).unwrap();
        let from_matrix = pipeline.model.predict_proba_row(x_test.row(0)).unwrap();
        assert!((from_raw[1] - from_matrix[1]).abs() < 1e-12);
    }

    #[test]
    fn final_test_eval_requires_test_rows() {
        let ds = heart_failure_demo(3);
        let split = stratified_split(&ds, 0.0, 0).unwrap();
        let cand = small_candidate(EnsembleKind::DecisionTree, 1);
        assert!(final_test_eval(&ds, &split, &cand, 0).is_err());
    }

    #[test]
    fn default_grid_has_the_documented_shape() {
        let ds = heart_failure_demo(0);
        let grid = GridSpec::default().enumerate(&ds);
        // 6 classifiers x 2 numerical methods x 7 ks x 3 nominal methods x 5 ks
        assert_eq!(grid.len(), 6 * 2 * 7 * 3 * 5);
        let no_fs = GridSpec {
            feature_selection: false,
            ..GridSpec::default()
        }
        .enumerate(&ds);
        assert_eq!(no_fs.len(), 6);
        assert!(no_fs.iter().all(|c| c.selection.is_none()));
    }
}
