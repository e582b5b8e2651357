//! Cross-module integration tests over the bundled dataset plus CLI
//! smoke tests (the binary is exercised through CARGO_BIN_EXE).

use std::path::PathBuf;
use std::process::Command;

use xgrove::data::{load_csv, stratified_split, Dataset, FeatureKind};
use xgrove::ensemble::{EnsembleConfig, EnsembleKind};
use xgrove::matrix::Matrix;
use xgrove::metrics::MetricName;
use xgrove::model_select::{evaluate_candidate, CandidateConfig, SelectionSpec};
use xgrove::preprocess::PreprocessConfig;
use xgrove::report::{run_on_dataset, RunConfig};
use xgrove::select::SelectionMethod;
use xgrove::tree::{fit as fit_tree, FitTarget, TreeParams};

fn bundled() -> Dataset {
    let path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/heart_failure_synthetic.csv");
    load_csv(&path, &xgrove::data::heart_failure_schema()).unwrap()
}

#[test]
fn bundled_csv_has_canonical_shape() {
    let ds = bundled();
    assert_eq!(ds.n_rows(), 299);
    assert_eq!(ds.input_cols().len(), 12);
    let labels = ds.labels();
    assert_eq!(labels.iter().filter(|&&c| c == 1).count(), 96);
    assert_eq!(labels.iter().filter(|&&c| c == 0).count(), 203);
    let numerical = ds
        .input_cols()
        .iter()
        .filter(|&&c| ds.specs[c].kind == FeatureKind::Numerical)
        .count();
    assert_eq!(numerical, 7);
}

#[test]
fn first_split_of_canonical_training_set_uses_time() {
    let ds = bundled();
    let labels = ds.labels();
    let split = stratified_split(&ds, 0.3, 0).unwrap();
    let y: Vec<u8> = split.train.iter().map(|&r| labels[r]).collect();
    let cols = ds.input_cols();
    let x = ds.values.select(&split.train, &cols);
    let weights = vec![1.0; x.n_rows()];
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    let params = TreeParams {
        max_depth: Some(1),
        ..TreeParams::default()
    };
    let tree = fit_tree(
        &x,
        FitTarget::Class {
            y: &y,
            weights: &weights,
        },
        &rows,
        &params,
        &mut xgrove::rng::seed_rng(0),
    )
    .unwrap();
    let root_feature = tree.nodes[0].feature.expect("root splits");
    assert_eq!(ds.specs[cols[root_feature]].name, "time");

    // Confirm against per-feature brute force: no feature reaches a
    // larger Gini gain than the chosen one.
    let gain_of = |f: usize| -> f64 {
        let term = |w0: f64, w1: f64| {
            let w = w0 + w1;
            if w <= 0.0 {
                0.0
            } else {
                w - (w0 * w0 + w1 * w1) / w
            }
        };
        let total = [
            y.iter().filter(|&&c| c == 0).count() as f64,
            y.iter().filter(|&&c| c == 1).count() as f64,
        ];
        let mut values: Vec<f64> = (0..x.n_rows()).map(|r| x.get(r, f)).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        let mut best = 0.0f64;
        for pair in values.windows(2) {
            let t = pair[0] + (pair[1] - pair[0]) / 2.0;
            let mut left = [0.0f64; 2];
            for r in 0..x.n_rows() {
                if x.get(r, f) <= t {
                    left[y[r] as usize] += 1.0;
                }
            }
            let gain = term(total[0], total[1])
                - term(left[0], left[1])
                - term(total[0] - left[0], total[1] - left[1]);
            best = best.max(gain);
        }
        best
    };
    let chosen_gain = gain_of(root_feature);
    for f in 0..x.n_cols() {
        assert!(
            gain_of(f) <= chosen_gain + 1e-9,
            "feature {f} out-gains the chosen root"
        );
    }
}

#[test]
fn extra_trees_fixed_candidate_lands_near_published_value() {
    // The published 0.851 is a best-found configuration; on the bundled
    // data this fixed candidate is seed-dependent, so the band is
    // required on at least one pipeline seed.
    let ds = bundled();
    let labels = ds.labels();
    let cand = CandidateConfig {
        classifier: EnsembleConfig::default_for(EnsembleKind::ExtraTrees),
        selection: Some(SelectionSpec {
            num_method: SelectionMethod::Anova,
            num_k: 4,
            nom_method: SelectionMethod::MutualInfo,
            nom_k: 1,
        }),
        preprocess: PreprocessConfig::default(),
    };
    let mut in_band = 0;
    let mut values = Vec::new();
    for seed in 0..5u64 {
        let split = stratified_split(&ds, 0.3, seed).unwrap();
        let folds = xgrove::data::make_folds(&split.train, &labels, 5, seed).unwrap();
        let result = evaluate_candidate(&ds, &split, &folds, &cand, seed).unwrap();
        assert_eq!(result.folds.len(), 5);
        assert_eq!(result.selected_features.len(), 5);
        values.push(result.cv.balanced_accuracy);
        if (result.cv.balanced_accuracy - 0.851).abs() <= 0.05 {
            in_band += 1;
        }
    }
    assert!(
        in_band >= 1,
        "no seed within ±0.05 of 0.851: {values:?}"
    );
    for v in values {
        assert!(v > 0.7, "fixed candidate collapsed: {v}");
    }
}

#[test]
fn exemplar_explanations_have_the_expected_signs() {
    let ds = bundled();
    let mut config = RunConfig::default();
    config.seed = 0;
    config.grid.classifiers = vec![EnsembleKind::ExtraTrees, EnsembleKind::DecisionTree];
    config.grid.num_methods = vec![SelectionMethod::Anova];
    config.grid.num_ks = vec![4];
    config.grid.nom_methods = vec![SelectionMethod::MutualInfo];
    config.grid.nom_ks = vec![1];
    let outcome = run_on_dataset(&config, &ds).unwrap();
    let bundle = outcome.report.explanations.as_ref().unwrap();

    let tn = bundle
        .exemplars
        .iter()
        .find(|e| e.case == "true_negative")
        .expect("true negative exemplar");
    // Survivor correctly classified: the bias sits at the class-0 prior.
    assert_eq!(tn.path.predicted_class, 0);
    assert!(
        (tn.path.bias - 0.679).abs() < 0.1,
        "tn bias {} far from the class-0 prior",
        tn.path.bias
    );

    let tp = bundle
        .exemplars
        .iter()
        .find(|e| e.case == "true_positive")
        .expect("true positive exemplar");
    assert_eq!(tp.path.predicted_class, 1);
    // Short follow-up pushes the deceased prediction toward class 1.
    let time_shap = tp
        .shap
        .values
        .iter()
        .find(|(f, _)| f == "time")
        .map(|(_, v)| *v)
        .expect("time attribution");
    assert!(time_shap > 0.0, "tp time attribution {time_shap} not positive");

    // Ejection-fraction curve: clear negative effect over the low range.
    let ef = bundle
        .pdp
        .iter()
        .find(|e| e.features == ["ejection_fraction"])
        .expect("ef curve");
    let low_region: Vec<(f64, f64)> = ef.grids_raw[0]
        .iter()
        .cloned()
        .zip(ef.mean.iter().cloned())
        .filter(|(g, _)| *g <= 30.0)
        .collect();
    assert!(low_region.len() >= 2);
    let first = low_region.first().unwrap().1;
    let last = low_region.last().unwrap().1;
    assert!(
        first - last >= 0.05,
        "ef effect not clearly decreasing: {first:.3} -> {last:.3}"
    );
    for pair in low_region.windows(2) {
        assert!(
            pair[1].1 <= pair[0].1 + 0.02,
            "ef curve rises sharply inside the low region: {:?}",
            pair
        );
    }

    // 2D surface: short follow-up keeps mortality probability high at any
    // serum-creatinine value, clearly above the long-follow-up region.
    let surface = bundle
        .pdp2d
        .iter()
        .find(|e| e.features == ["time", "serum_creatinine"])
        .expect("time x serum_creatinine surface");
    let nb = surface.grids_raw[1].len();
    let first_row = &surface.mean[..nb];
    let last_row = &surface.mean[surface.mean.len() - nb..];
    let low_time_min = first_row.iter().cloned().fold(f64::INFINITY, f64::min);
    let high_time_max = last_row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(
        low_time_min > 0.6,
        "short follow-up row dips to {low_time_min:.3}"
    );
    assert!(low_time_min > high_time_max);
}

// ---------------------------------------------------------------------
// CLI smoke tests
// ---------------------------------------------------------------------

fn xgrove_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_xgrove"))
}

fn data_arg() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/heart_failure_synthetic.csv")
        .to_string_lossy()
        .into_owned()
}

#[test]
fn cli_invalid_data_path_exits_2() {
    let out = xgrove_bin()
        .args(["run", "--data", "/no/such/file.csv", "--out", "/tmp/unused"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_mid_pipeline_failure_leaves_a_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    // 500 folds cannot fit 209 training rows: the pipeline fails after
    // the dataset stage and must leave a failure record behind.
    let out = xgrove_bin()
        .args([
            "run",
            "--data",
            &data_arg(),
            "--folds",
            "500",
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let report = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert!(value["failure"].as_str().unwrap().contains("500"));
    assert_eq!(value["config"]["folds"].as_u64(), Some(500));
}

#[test]
fn cli_unknown_scoring_exits_2() {
    let out = xgrove_bin()
        .args(["run", "--data", &data_arg(), "--scoring", "auc"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_run_explain_metrics_chain() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        "classifiers = decision_tree, extra_trees\n\
         num_methods = anova\nnum_ks = 4\nnom_methods = mutual_info\nnom_ks = 1\n\
         explainers = gini, paths\n",
    )
    .unwrap();
    let out_dir = dir.path().join("run");
    let out = xgrove_bin()
        .args([
            "run",
            "--data",
            &data_arg(),
            "--seed",
            "0",
            "--out",
            out_dir.to_str().unwrap(),
            "--config",
            conf.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "run failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in [
        "report.json",
        "candidates.json",
        "candidates.csv",
        "classifier_table.csv",
        "model.json",
        "manifest.json",
        "explain/gini_importance.csv",
    ] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }

    let out = xgrove_bin()
        .args([
            "metrics",
            "--ledger",
            out_dir.join("candidates.json").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "metrics failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    let explain_dir = dir.path().join("explain");
    let out = xgrove_bin()
        .args([
            "explain",
            "--model",
            out_dir.join("model.json").to_str().unwrap(),
            "--data",
            &data_arg(),
            "--out",
            explain_dir.to_str().unwrap(),
            "--explainers",
            "gini,permutation",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "explain failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(explain_dir.join("explanations.json").exists());
}

#[test]
fn cli_no_feature_selection_reports_all_features() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        "classifiers = decision_tree, random_forest\nexplainers = none\n",
    )
    .unwrap();
    let out_dir = dir.path().join("run");
    let out = xgrove_bin()
        .args([
            "run",
            "--data",
            &data_arg(),
            "--no-feature-selection",
            "--out",
            out_dir.to_str().unwrap(),
            "--config",
            conf.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "run failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&report).unwrap();
    for row in value["classifier_rows"].as_array().unwrap() {
        assert_eq!(row["selected_count"].as_u64(), Some(12));
        assert!(row["num_method"].is_null());
    }
}

#[test]
fn drop_feature_flag_runs_the_ablation() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        "classifiers = decision_tree\nnum_methods = anova\nnum_ks = 3\n\
         nom_methods = chi2\nnom_ks = 1\nexplainers = none\n",
    )
    .unwrap();
    let out_dir = dir.path().join("run");
    let out = xgrove_bin()
        .args([
            "run",
            "--data",
            &data_arg(),
            "--drop-feature",
            "time",
            "--out",
            out_dir.to_str().unwrap(),
            "--config",
            conf.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "run failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(value["dataset"]["inputs"].as_u64(), Some(11));
    let names: Vec<&str> = value["dataset"]["features"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap())
        .collect();
    assert!(!names.contains(&"time"));
}

#[test]
fn min_matrix_helper_is_consistent() {
    // Guard for the row-major layout the CLI-facing code relies on.
    let m = Matrix::from_rows(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert_eq!(m.row(1), &[4.0, 5.0, 6.0]);
    assert_eq!(m.column(2), vec![3.0, 6.0]);
}

#[test]
fn scoring_names_match_cli_documentation() {
    for name in [
        "accuracy",
        "balanced_accuracy",
        "sensitivity",
        "specificity",
        "precision",
        "f1",
    ] {
        assert!(name.parse::<MetricName>().is_ok(), "{name}");
    }
}
