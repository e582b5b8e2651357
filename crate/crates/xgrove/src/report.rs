//! Run orchestration and report emission: split, grid search,
//! per-classifier bests, explainability scoring, the FIR-balanced pick,
//! held-out evaluation and the explainer suite, all folded into a
//! deterministic set of artifacts (canonical JSON report, CSV ledgers and
//! plot-ready explanation exports).
//!
//! Everything emitted is a pure function of `(data, config, seed)`: two
//! runs with the same inputs produce byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{make_folds, stratified_split, Dataset, FeatureKind, SplitIndices};
use crate::error::{Error, Result};
use crate::explain::{
    gini_importance, path_contributions, pdp, pdp2d, permutation_importance, shap_summary,
    shapley_exact, ImportanceRanking, PathContribution, PdpCurve, ShapSummary, ShapValues,
};
use crate::metrics::{explainability_score, ExplainabilityScore, MetricName, MetricsReport};
use crate::model_select::{
    fidelity_baseline, final_test_eval, grid_search, CandidateResult, GridSpec, PipelineModel,
};
use crate::preprocess::{inverse_numeric, NumericImpute, Normalize};
use crate::rng::{derive_seed, stream_rng};
use crate::select::SelectionMethod;
use rand::seq::SliceRandom;

pub const ALL_EXPLAINERS: [&str; 6] = ["gini", "permutation", "pdp", "pdp2d", "shap", "paths"];

/// Validated run configuration; persisted verbatim into the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub data_path: PathBuf,
    pub seed: u64,
    pub test_ratio: f64,
    pub folds: usize,
    pub scoring: MetricName,
    pub grid: GridSpec,
    pub drop_features: Vec<String>,
    /// Explainers to run on the picked model; empty list skips the suite.
    pub explainers: Vec<String>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_path: PathBuf::from("data/heart_failure_synthetic.csv"),
            seed: 0,
            test_ratio: 0.3,
            folds: 5,
            scoring: MetricName::BalancedAccuracy,
            grid: GridSpec::default(),
            drop_features: Vec::new(),
            explainers: ALL_EXPLAINERS.iter().map(|s| s.to_string()).collect(),
            out_dir: PathBuf::from("xgrove-run"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.test_ratio) {
            return Err(Error::Argument(format!(
                "test_ratio must be in [0, 1), got {}",
                self.test_ratio
            )));
        }
        if self.folds < 2 {
            return Err(Error::Argument("folds must be >= 2".into()));
        }
        for e in &self.explainers {
            if !ALL_EXPLAINERS.contains(&e.as_str()) {
                return Err(Error::Argument(format!(
                    "unknown explainer '{e}' (available: {})",
                    ALL_EXPLAINERS.join(", ")
                )));
            }
        }
        Ok(())
    }
}

/// Per-feature descriptive statistics of the loaded dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub name: String,
    pub kind: String,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    /// value -> count for nominal columns.
    pub value_counts: Vec<(String, usize)>,
    pub missing: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub rows: usize,
    pub inputs: usize,
    pub positives: usize,
    pub negatives: usize,
    pub features: Vec<FeatureSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSummary {
    pub requested_test_ratio: f64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_positives: usize,
    pub test_positives: usize,
}

/// One classifier's best candidate with its scores (rows of the result
/// tables).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierRow {
    pub classifier: String,
    pub grid_index: usize,
    pub cv: MetricsReport,
    pub test: MetricsReport,
    pub num_method: Option<String>,
    pub num_selected: Vec<String>,
    pub nom_method: Option<String>,
    pub nom_selected: Vec<String>,
    pub selected_count: usize,
    pub explainability: ExplainabilityScore,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirPick {
    pub classifier: String,
    pub grid_index: usize,
    pub fir: f64,
    pub selected_features: Vec<String>,
}

/// Partial-dependence export with grids mapped back to raw feature units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdpExport {
    pub features: Vec<String>,
    pub grids_raw: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub band: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExemplarExplanation {
    /// "true_negative" or "true_positive".
    pub case: String,
    /// Dataset row index of the exemplar (from the evaluation partition).
    pub row: usize,
    pub path: PathContribution,
    pub shap: ShapValues,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplanationBundle {
    pub model_features: Vec<String>,
    pub gini: Option<ImportanceRanking>,
    pub permutation: Option<ImportanceRanking>,
    pub pdp: Vec<PdpExport>,
    pub pdp2d: Vec<PdpExport>,
    pub shap: Option<ShapSummary>,
    pub exemplars: Vec<ExemplarExplanation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub dataset: DatasetSummary,
    pub split: SplitSummary,
    pub n_candidates: usize,
    pub classifier_rows: Vec<ClassifierRow>,
    pub fir_balanced: FirPick,
    pub explanations: Option<ExplanationBundle>,
}

/// Full in-memory outcome of a run; `emit_report` lays it down on disk.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub candidates: Vec<CandidateResult>,
    pub pipeline: PipelineModel,
}

fn summarize_dataset(ds: &Dataset) -> DatasetSummary {
    let labels = ds.labels();
    let positives = labels.iter().filter(|&&c| c == 1).count();
    let mut features = Vec::new();
    for (c, spec) in ds.specs.iter().enumerate() {
        let observed: Vec<f64> = (0..ds.n_rows())
            .filter(|&r| !ds.is_missing(r, c))
            .map(|r| ds.values.get(r, c))
            .collect();
        let missing = ds.n_rows() - observed.len();
        let mean = observed.iter().sum::<f64>() / observed.len().max(1) as f64;
        let std = (observed.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / observed.len().max(1) as f64)
            .sqrt();
        let mut value_counts: Vec<(String, usize)> = Vec::new();
        if spec.kind != FeatureKind::Numerical {
            let mut values: Vec<f64> = observed.clone();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            values.dedup();
            for v in values {
                let count = observed.iter().filter(|&&x| x == v).count();
                let label = match &spec.categories {
                    Some(cats) if (v as usize) < cats.len() && v.fract() == 0.0 => {
                        cats[v as usize].clone()
                    }
                    _ => format!("{v}"),
                };
                value_counts.push((label, count));
            }
        }
        features.push(FeatureSummary {
            name: spec.name.clone(),
            kind: format!("{:?}", spec.kind).to_lowercase(),
            min: observed.iter().cloned().fold(f64::INFINITY, f64::min),
            max: observed.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std,
            value_counts,
            missing,
        });
    }
    DatasetSummary {
        rows: ds.n_rows(),
        inputs: ds.input_cols().len(),
        positives,
        negatives: ds.n_rows() - positives,
        features,
    }
}

fn split_selected(ds: &Dataset, selected: &[String]) -> (Vec<String>, Vec<String>) {
    let mut nums = Vec::new();
    let mut noms = Vec::new();
    for name in selected {
        match ds.column_index(name).map(|c| ds.specs[c].kind) {
            Some(FeatureKind::Numerical) => nums.push(name.clone()),
            Some(_) => noms.push(name.clone()),
            None => {}
        }
    }
    (nums, noms)
}

/// Execute the full pipeline from a CSV path.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let mut ds = crate::data::load_csv_flexible(&config.data_path)?;
    if !config.drop_features.is_empty() {
        ds = ds.drop_columns(&config.drop_features)?;
    }
    run_on_dataset(config, &ds)
}

/// Pipeline over an already-loaded dataset.
pub fn run_on_dataset(config: &RunConfig, ds: &Dataset) -> Result<RunOutcome> {
    config.validate()?;
    let labels = ds.labels();
    let split = stratified_split(ds, config.test_ratio, config.seed)?;
    let folds = make_folds(&split.train, &labels, config.folds, config.seed)?;
    let grid = config.grid.enumerate(ds);
    let search = grid_search(ds, &split, &folds, &grid, config.scoring, config.seed)?;

    // Per-classifier rows: test metrics, fidelity baseline, explainability.
    let total_inputs = ds.input_cols().len();
    let mut rows: Vec<ClassifierRow> = Vec::new();
    for best in &search.per_classifier_best {
        let cand_seed = derive_seed(config.seed, best.grid_index as u64);
        let (test, _) = final_test_eval(ds, &split, &best.config, cand_seed)?;
        let baseline = fidelity_baseline(ds, &split, &folds, &best.config, cand_seed)?;
        let explainability = explainability_score(
            best.selected_features.len(),
            total_inputs,
            baseline,
            best.cv.balanced_accuracy,
        )?;
        let (num_selected, nom_selected) = split_selected(ds, &best.selected_features);
        rows.push(ClassifierRow {
            classifier: best.config.classifier.kind.to_string(),
            grid_index: best.grid_index,
            cv: best.cv,
            test,
            num_method: best.config.selection.map(|s| s.num_method.to_string()),
            num_selected,
            nom_method: best.config.selection.map(|s| s.nom_method.to_string()),
            nom_selected,
            selected_count: best.selected_features.len(),
            explainability,
        });
    }

    // The balanced pick: closest FIR to 0.5, ties by higher CV score.
    let pick_idx = (0..rows.len())
        .min_by(|&a, &b| {
            let da = (rows[a].explainability.fir - 0.5).abs();
            let db = (rows[b].explainability.fir - 0.5).abs();
            da.partial_cmp(&db)
                .unwrap()
                .then(
                    rows[b]
                        .cv
                        .balanced_accuracy
                        .partial_cmp(&rows[a].cv.balanced_accuracy)
                        .unwrap(),
                )
        })
        .ok_or_else(|| Error::Argument("no valid candidate survived the grid".into()))?;
    let picked = &search.per_classifier_best[pick_idx];
    let picked_seed = derive_seed(config.seed, picked.grid_index as u64);
    let (_, pipeline) = final_test_eval(ds, &split, &picked.config, picked_seed)?;

    let fir_balanced = FirPick {
        classifier: rows[pick_idx].classifier.clone(),
        grid_index: picked.grid_index,
        fir: rows[pick_idx].explainability.fir,
        selected_features: picked.selected_features.clone(),
    };

    let explanations = if config.explainers.is_empty() {
        None
    } else {
        Some(explain_pipeline(config, ds, &split, &pipeline)?)
    };

    let report = RunReport {
        config: config.clone(),
        dataset: summarize_dataset(ds),
        split: SplitSummary {
            requested_test_ratio: config.test_ratio,
            train_rows: split.train.len(),
            test_rows: split.test.len(),
            train_positives: split.train.iter().filter(|&&r| labels[r] == 1).count(),
            test_positives: split.test.iter().filter(|&&r| labels[r] == 1).count(),
        },
        n_candidates: grid.len(),
        classifier_rows: rows,
        fir_balanced,
        explanations,
    };
    Ok(RunOutcome {
        report,
        candidates: search.ranked,
        pipeline,
    })
}

/// PDP grids mapped back to raw feature units for export.
fn raw_grid(pipeline: &PipelineModel, curve: &PdpCurve) -> PdpExport {
    let mut grids_raw = Vec::new();
    for (axis, feature) in curve.features.iter().enumerate() {
        let col = pipeline
            .selected_names
            .iter()
            .position(|n| n == feature)
            .map(|i| pipeline.selected_cols[i]);
        let grid = match col {
            Some(c) => curve.grids[axis]
                .iter()
                .map(|&v| inverse_numeric(&pipeline.plan, c, v))
                .collect(),
            None => curve.grids[axis].clone(),
        };
        grids_raw.push(grid);
    }
    PdpExport {
        features: curve.features.clone(),
        grids_raw,
        mean: curve.mean.clone(),
        band: curve.band.clone(),
    }
}

/// Run the configured explainer suite on a fitted pipeline.
pub fn explain_pipeline(
    config: &RunConfig,
    ds: &Dataset,
    split: &SplitIndices,
    pipeline: &PipelineModel,
) -> Result<ExplanationBundle> {
    let labels = ds.labels();
    let want = |name: &str| config.explainers.iter().any(|e| e == name);
    let x_train = pipeline.transform(ds, &split.train)?;
    let eval_rows: &[usize] = if split.test.is_empty() {
        &split.train
    } else {
        &split.test
    };
    let x_eval = pipeline.transform(ds, eval_rows)?;
    let y_eval: Vec<u8> = eval_rows.iter().map(|&r| labels[r]).collect();
    let model = &pipeline.model;
    let m = model.n_features();

    let gini = if want("gini") {
        Some(gini_importance(model)?)
    } else {
        None
    };
    let permutation = if want("permutation") {
        Some(permutation_importance(
            model,
            &x_eval,
            &y_eval,
            MetricName::Accuracy,
            10,
            derive_seed(config.seed, 0x9e41),
        )?)
    } else {
        None
    };

    let mut pdp_exports = Vec::new();
    if want("pdp") {
        for feature in &pipeline.selected_names {
            let curve = pdp(model, &x_train, feature, 20)?;
            pdp_exports.push(raw_grid(pipeline, &curve));
        }
    }

    let mut pdp2d_exports = Vec::new();
    if want("pdp2d") && model.is_tree_based() {
        // Pairs of the three strongest numerical features (implicit ranks).
        let ranking = gini_importance(model)?;
        let numeric: Vec<String> = ranking
            .entries
            .iter()
            .filter(|e| {
                ds.column_index(&e.feature)
                    .map(|c| ds.specs[c].kind == FeatureKind::Numerical)
                    .unwrap_or(false)
            })
            .map(|e| e.feature.clone())
            .take(3)
            .collect();
        for i in 0..numeric.len() {
            for j in i + 1..numeric.len() {
                let curve = pdp2d(model, &x_train, &numeric[i], &numeric[j], 12)?;
                pdp2d_exports.push(raw_grid(pipeline, &curve));
            }
        }
    }

    // Background for the Shapley sweeps: up to 100 seed-chosen training
    // rows. The coalition count grows as 2^m, so wide models trim both the
    // background and the explained rows to keep the exact sweep tractable.
    let background = {
        let mut rows: Vec<usize> = (0..x_train.n_rows()).collect();
        rows.shuffle(&mut stream_rng(config.seed, 0x5a9));
        let take = if m >= 10 { 50 } else { 100 };
        let mut rows: Vec<usize> = rows.into_iter().take(take).collect();
        rows.sort_unstable();
        x_train.select(&rows, &(0..m).collect::<Vec<_>>())
    };

    let shap = if want("shap") {
        let mut rows: Vec<usize> = (0..x_eval.n_rows()).collect();
        if m >= 10 && rows.len() > 30 {
            rows.shuffle(&mut stream_rng(config.seed, 0x5aa));
            rows.truncate(30);
            rows.sort_unstable();
        }
        let x_rows = x_eval.select(&rows, &(0..m).collect::<Vec<_>>());
        Some(shap_summary(model, &x_rows, &background)?)
    } else {
        None
    };

    let mut exemplars = Vec::new();
    if (want("paths") || want("shap")) && model.is_tree_based() {
        // First correctly classified exemplar of each class.
        let mut tn = None;
        let mut tp = None;
        for (local, &row) in eval_rows.iter().enumerate() {
            let predicted = model.predict_class(x_eval.row(local))?;
            if labels[row] == 0 && predicted == 0 && tn.is_none() {
                tn = Some((local, row));
            }
            if labels[row] == 1 && predicted == 1 && tp.is_none() {
                tp = Some((local, row));
            }
        }
        for (case, found) in [("true_negative", tn), ("true_positive", tp)] {
            if let Some((local, row)) = found {
                exemplars.push(ExemplarExplanation {
                    case: case.to_string(),
                    row,
                    path: path_contributions(model, x_eval.row(local))?,
                    shap: shapley_exact(model, &background, x_eval.row(local))?,
                });
            }
        }
    }

    Ok(ExplanationBundle {
        model_features: pipeline.selected_names.clone(),
        gini,
        permutation,
        pdp: pdp_exports,
        pdp2d: pdp2d_exports,
        shap,
        exemplars,
    })
}

// ---------------------------------------------------------------------
// Canonical JSON
// ---------------------------------------------------------------------

/// Serialize to canonical JSON: sorted object keys, floats at 6 decimals,
/// non-finite floats as null.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_canonical(&v, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_canonical(v: &serde_json::Value, out: &mut String) {
    match v {
        serde_json::Value::Null => out.push_str("null"),
        serde_json::Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                match n.as_f64() {
                    Some(f) if f.is_finite() => {
                        let _ = write!(out, "{f:.6}");
                    }
                    _ => out.push_str("null"),
                }
            }
        }
        serde_json::Value::String(s) => {
            let _ = write!(out, "{}", serde_json::Value::String(s.clone()));
        }
        serde_json::Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        serde_json::Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", serde_json::Value::String((*key).clone()));
                out.push(':');
                write_canonical(&map[*key], out);
            }
            out.push('}');
        }
    }
}

// ---------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

fn fmt6(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

fn metrics_csv_cells(m: &MetricsReport) -> String {
    [
        m.accuracy,
        m.balanced_accuracy,
        m.sensitivity,
        m.specificity,
        m.precision,
        m.f1,
    ]
    .map(fmt6)
    .join(",")
}

fn candidates_csv(candidates: &[CandidateResult]) -> String {
    let mut out = String::from(
        "grid_index,classifier,num_method,num_k,nom_method,nom_k,accuracy,balanced_accuracy,\
         sensitivity,specificity,precision,f1,fold_baccs,invalid\n",
    );
    for c in candidates {
        let (nm, nk, mm, mk) = match &c.config.selection {
            Some(s) => (
                s.num_method.to_string(),
                s.num_k.to_string(),
                s.nom_method.to_string(),
                s.nom_k.to_string(),
            ),
            None => ("all".into(), String::new(), "all".into(), String::new()),
        };
        let folds = c
            .folds
            .iter()
            .map(|f| fmt6(f.metrics.balanced_accuracy))
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            out,
            "{},{},{nm},{nk},{mm},{mk},{},{folds},{}",
            c.grid_index,
            c.config.classifier.kind,
            metrics_csv_cells(&c.cv),
            c.invalid.clone().unwrap_or_default()
        );
    }
    out
}

fn classifier_table_csv(rows: &[ClassifierRow]) -> String {
    let mut out = String::from(
        "classifier,cv_accuracy,cv_balanced_accuracy,cv_sensitivity,cv_specificity,cv_precision,\
         cv_f1,test_accuracy,test_balanced_accuracy,test_sensitivity,test_specificity,\
         test_precision,test_f1,selected_count,num_method,num_selected,nom_method,nom_selected,\
         interpretability,fidelity,fir\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.classifier,
            metrics_csv_cells(&r.cv),
            metrics_csv_cells(&r.test),
            r.selected_count,
            r.num_method.clone().unwrap_or_else(|| "all".into()),
            r.num_selected.join(";"),
            r.nom_method.clone().unwrap_or_else(|| "all".into()),
            r.nom_selected.join(";"),
            fmt6(r.explainability.interpretability),
            fmt6(r.explainability.fidelity),
            fmt6(r.explainability.fir),
        );
    }
    out
}

fn importance_csv(ranking: &ImportanceRanking) -> String {
    let mut out = String::from("feature,weight,std\n");
    for e in &ranking.entries {
        let _ = writeln!(out, "{},{},{}", e.feature, fmt6(e.weight), fmt6(e.std));
    }
    out
}

fn pdp_csv(export: &PdpExport) -> String {
    let mut out = String::new();
    if export.features.len() == 1 {
        let _ = writeln!(out, "{},mean,band", export.features[0]);
        for (i, &g) in export.grids_raw[0].iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt6(g),
                fmt6(export.mean[i]),
                fmt6(export.band[i])
            );
        }
    } else {
        let _ = writeln!(
            out,
            "{},{},mean,band",
            export.features[0], export.features[1]
        );
        let nb = export.grids_raw[1].len();
        for (i, &ga) in export.grids_raw[0].iter().enumerate() {
            for (j, &gb) in export.grids_raw[1].iter().enumerate() {
                let idx = i * nb + j;
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    fmt6(ga),
                    fmt6(gb),
                    fmt6(export.mean[idx]),
                    fmt6(export.band[idx])
                );
            }
        }
    }
    out
}

fn shap_summary_csv(summary: &ShapSummary) -> String {
    let mut out = String::from("feature,mean_abs_class0,mean_abs_class1\n");
    let mut order: Vec<usize> = (0..summary.features.len()).collect();
    order.sort_by(|&a, &b| {
        summary.mean_abs[1][b]
            .partial_cmp(&summary.mean_abs[1][a])
            .unwrap()
            .then_with(|| summary.features[a].cmp(&summary.features[b]))
    });
    for i in order {
        let _ = writeln!(
            out,
            "{},{},{}",
            summary.features[i],
            fmt6(summary.mean_abs[0][i]),
            fmt6(summary.mean_abs[1][i])
        );
    }
    out
}

/// Write every artifact of a run into `dir`, returning the manifest.
pub fn emit_report(outcome: &RunOutcome, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir.join("explain"))?;
    let mut files: Vec<(PathBuf, Vec<u8>)> = vec![
        (
            dir.join("report.json"),
            canonical_json(&outcome.report)?.into_bytes(),
        ),
        (
            dir.join("candidates.json"),
            canonical_json(&outcome.candidates)?.into_bytes(),
        ),
        (
            dir.join("candidates.csv"),
            candidates_csv(&outcome.candidates).into_bytes(),
        ),
        (
            dir.join("classifier_table.csv"),
            classifier_table_csv(&outcome.report.classifier_rows).into_bytes(),
        ),
        (
            dir.join("model.json"),
            outcome.pipeline.to_json()?.into_bytes(),
        ),
    ];

    if let Some(bundle) = &outcome.report.explanations {
        if let Some(gini) = &bundle.gini {
            files.push((
                dir.join("explain/gini_importance.csv"),
                importance_csv(gini).into_bytes(),
            ));
        }
        if let Some(perm) = &bundle.permutation {
            files.push((
                dir.join("explain/permutation_importance.csv"),
                importance_csv(perm).into_bytes(),
            ));
        }
        for export in &bundle.pdp {
            files.push((
                dir.join(format!("explain/pdp_{}.csv", export.features[0])),
                pdp_csv(export).into_bytes(),
            ));
        }
        for export in &bundle.pdp2d {
            files.push((
                dir.join(format!(
                    "explain/pdp2d_{}__{}.csv",
                    export.features[0], export.features[1]
                )),
                pdp_csv(export).into_bytes(),
            ));
        }
        if let Some(summary) = &bundle.shap {
            files.push((
                dir.join("explain/shap_summary.csv"),
                shap_summary_csv(summary).into_bytes(),
            ));
        }
        for exemplar in &bundle.exemplars {
            files.push((
                dir.join(format!("explain/shap_waterfall_{}.json", exemplar.case)),
                canonical_json(&exemplar.shap)?.into_bytes(),
            ));
            files.push((
                dir.join(format!(
                    "explain/path_contributions_{}.json",
                    exemplar.case
                )),
                canonical_json(&exemplar.path)?.into_bytes(),
            ));
        }
    }

    let mut manifest = Manifest { files: Vec::new() };
    for (path, bytes) in &files {
        std::fs::write(path, bytes)?;
        manifest.files.push(ManifestEntry {
            path: path
                .strip_prefix(dir)
                .unwrap_or(path)
                .to_string_lossy()
                .into_owned(),
            bytes: bytes.len() as u64,
        });
    }
    manifest.files.sort_by(|a, b| a.path.cmp(&b.path));
    std::fs::write(
        dir.join("manifest.json"),
        canonical_json(&manifest)?.into_bytes(),
    )?;
    Ok(manifest)
}

// ---------------------------------------------------------------------
// Config file parsing (key = value)
// ---------------------------------------------------------------------

fn parse_list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_counts(raw: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = raw.split_once("..") {
        let lo: usize = a.trim().parse().map_err(bad_number)?;
        let hi: usize = b.trim().parse().map_err(bad_number)?;
        return Ok((lo..=hi).collect());
    }
    parse_list(raw)
        .iter()
        .map(|s| s.parse().map_err(bad_number))
        .collect()
}

fn bad_number<E: std::fmt::Display>(e: E) -> Error {
    Error::Argument(format!("invalid number: {e}"))
}

/// Apply a `key = value` config file on top of an existing config.
/// `#` starts a comment; lists are comma-separated; count ranges accept
/// the inclusive `lo..hi` form.
pub fn apply_config_file(config: &mut RunConfig, text: &str) -> Result<()> {
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Argument(format!(
                "config line {} is not 'key = value': '{line}'",
                lineno + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "data" => config.data_path = PathBuf::from(value),
            "out" => config.out_dir = PathBuf::from(value),
            "seed" => config.seed = value.parse().map_err(bad_number)?,
            "test_ratio" => config.test_ratio = value.parse().map_err(bad_number)?,
            "folds" => config.folds = value.parse().map_err(bad_number)?,
            "scoring" => config.scoring = value.parse()?,
            "feature_selection" => {
                config.grid.feature_selection = value
                    .parse()
                    .map_err(|_| Error::Argument(format!("invalid bool '{value}'")))?
            }
            "drop_features" => config.drop_features = parse_list(value),
            "explainers" => {
                config.explainers = if value == "none" {
                    Vec::new()
                } else {
                    parse_list(value)
                }
            }
            "classifiers" => {
                config.grid.classifiers = parse_list(value)
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<_>>()?
            }
            "num_methods" => config.grid.num_methods = parse_selection_methods(value)?,
            "nom_methods" => config.grid.nom_methods = parse_selection_methods(value)?,
            "num_ks" => config.grid.num_ks = parse_counts(value)?,
            "nom_ks" => config.grid.nom_ks = parse_counts(value)?,
            "normalize" => {
                let n = match value {
                    "zscore" => Normalize::Zscore,
                    "minmax" => Normalize::Minmax,
                    "none" => Normalize::None,
                    other => {
                        return Err(Error::Argument(format!("unknown normalize '{other}'")))
                    }
                };
                for p in config.grid.preprocess.iter_mut() {
                    p.normalize = n;
                }
            }
            "impute" => {
                let i = match value {
                    "mean" => NumericImpute::Mean,
                    "median" => NumericImpute::Median,
                    other => return Err(Error::Argument(format!("unknown impute '{other}'"))),
                };
                for p in config.grid.preprocess.iter_mut() {
                    p.impute_numerical = i;
                }
            }
            other => {
                return Err(Error::Argument(format!(
                    "unknown config key '{other}' at line {}",
                    lineno + 1
                )))
            }
        }
    }
    Ok(())
}

fn parse_selection_methods(raw: &str) -> Result<Vec<SelectionMethod>> {
    parse_list(raw)
        .iter()
        .map(|s| match s.as_str() {
            "anova" => Ok(SelectionMethod::Anova),
            "chi2" => Ok(SelectionMethod::Chi2),
            "mutual_info" => Ok(SelectionMethod::MutualInfo),
            "rfe" => Ok(SelectionMethod::Rfe),
            other => Err(Error::Argument(format!(
                "unknown selection method '{other}'"
            ))),
        })
        .collect()
}

// ---------------------------------------------------------------------
// Ledger recomputation (the `metrics` subcommand)
// ---------------------------------------------------------------------

/// Recompute the metric formulas from a candidates ledger's confusion
/// counts and compare them against the stored values. Returns the
/// recomputed CSV and the number of mismatches.
pub fn recompute_ledger(text: &str, tolerance: f64) -> Result<(String, usize)> {
    let candidates: Vec<CandidateResult> = serde_json::from_str(text)?;
    let mut out = String::from(
        "grid_index,fold,tp,tn,fp,fn,accuracy,balanced_accuracy,sensitivity,specificity,\
         precision,f1,matches_stored\n",
    );
    let mut mismatches = 0usize;
    for cand in &candidates {
        let mut recomputed = Vec::new();
        for (f, fold) in cand.folds.iter().enumerate() {
            let m = crate::metrics::classification_metrics(&fold.confusion)?;
            let stored = &fold.metrics;
            let ok = (m.accuracy - stored.accuracy).abs() <= tolerance
                && (m.balanced_accuracy - stored.balanced_accuracy).abs() <= tolerance
                && (m.sensitivity - stored.sensitivity).abs() <= tolerance
                && (m.specificity - stored.specificity).abs() <= tolerance
                && (m.precision - stored.precision).abs() <= tolerance
                && (m.f1 - stored.f1).abs() <= tolerance;
            if !ok {
                mismatches += 1;
            }
            let _ = writeln!(
                out,
                "{},{f},{},{},{},{},{},{ok}",
                cand.grid_index,
                fold.confusion.tp,
                fold.confusion.tn,
                fold.confusion.fp,
                fold.confusion.fn_,
                metrics_csv_cells(&m),
            );
            recomputed.push(m);
        }
        if !recomputed.is_empty() {
            let mean = MetricsReport::mean_of(&recomputed);
            if (mean.balanced_accuracy - cand.cv.balanced_accuracy).abs() > tolerance {
                mismatches += 1;
            }
        }
    }
    Ok((out, mismatches))
}

/// Recompute the FIR identity for every classifier row of a report.
/// Returns the mismatch count.
pub fn recompute_report_explainability(text: &str, tolerance: f64) -> Result<usize> {
    let report: RunReport = serde_json::from_str(text)?;
    let mut mismatches = 0usize;
    for row in &report.classifier_rows {
        let e = &row.explainability;
        let fir = e.fidelity / (e.fidelity + e.interpretability);
        if (fir - e.fir).abs() > tolerance {
            mismatches += 1;
        }
    }
    Ok(mismatches)
}
