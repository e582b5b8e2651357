//! Exercises the C ABI from Rust: handle lifecycle, status codes, and
//! agreement between FFI predictions and the core library.

use std::ffi::{CStr, CString};
use std::path::PathBuf;

use xgrove_ffi::*;

fn data_csv() -> CString {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/heart_failure_synthetic.csv");
    CString::new(path.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(xg_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn version_is_a_cstring() {
    let v = unsafe { CStr::from_ptr(xg_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}

#[test]
fn dataset_lifecycle_and_errors() {
    unsafe {
        let mut ds: *mut XgDataset = std::ptr::null_mut();
        let missing = CString::new("/nonexistent/file.csv").unwrap();
        let status = xg_dataset_load_csv(missing.as_ptr(), &mut ds);
        assert_ne!(status, XgStatus::Ok);
        assert!(!last_error().is_empty());

        let status = xg_dataset_load_csv(data_csv().as_ptr(), &mut ds);
        assert_eq!(status, XgStatus::Ok, "{}", last_error());
        let mut rows = 0usize;
        assert_eq!(xg_dataset_rows(ds, &mut rows), XgStatus::Ok);
        assert_eq!(rows, 299);
        let mut inputs = 0usize;
        assert_eq!(xg_dataset_inputs(ds, &mut inputs), XgStatus::Ok);
        assert_eq!(inputs, 12);
        xg_dataset_free(ds);
        xg_dataset_free(std::ptr::null_mut()); // null is fine
    }
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        let status = xg_dataset_load_csv(std::ptr::null(), std::ptr::null_mut());
        assert_eq!(status, XgStatus::NullPointer);
        let mut rows = 0usize;
        assert_eq!(
            xg_dataset_rows(std::ptr::null(), &mut rows),
            XgStatus::NullPointer
        );
    }
}

#[test]
fn run_predict_and_shap_roundtrip() {
    let out_dir = tempfile::tempdir().unwrap();
    let out_c = CString::new(out_dir.path().to_str().unwrap()).unwrap();
    // Tiny grid keeps the test fast; explainers off (exercised elsewhere).
    let config = CString::new(
        "classifiers = decision_tree, extra_trees\n\
         num_methods = anova\n\
         num_ks = 4\n\
         nom_methods = mutual_info\n\
         nom_ks = 1\n\
         explainers = none\n",
    )
    .unwrap();
    unsafe {
        let status = xg_run(config.as_ptr(), data_csv().as_ptr(), out_c.as_ptr());
        assert_eq!(status, XgStatus::Ok, "{}", last_error());
        assert!(out_dir.path().join("report.json").exists());
        assert!(out_dir.path().join("model.json").exists());

        let model_path =
            CString::new(out_dir.path().join("model.json").to_str().unwrap()).unwrap();
        let mut model: *mut XgModel = std::ptr::null_mut();
        assert_eq!(
            xg_model_load(model_path.as_ptr(), &mut model),
            XgStatus::Ok,
            "{}",
            last_error()
        );

        let mut raw_arity = 0usize;
        assert_eq!(xg_model_raw_inputs(model, &mut raw_arity), XgStatus::Ok);
        assert_eq!(raw_arity, 12);
        let mut n_features = 0usize;
        assert_eq!(xg_model_n_features(model, &mut n_features), XgStatus::Ok);
        assert_eq!(n_features, 5);

        let mut names_ptr: *mut std::ffi::c_char = std::ptr::null_mut();
        assert_eq!(
            xg_model_feature_names_json(model, &mut names_ptr),
            XgStatus::Ok
        );
        let names = CStr::from_ptr(names_ptr).to_string_lossy().into_owned();
        assert!(names.contains("time"), "{names}");
        xg_string_free(names_ptr);

        // Prediction through the FFI equals the core library path.
        let core_model = xgrove::model_select::PipelineModel::from_json(
            &std::fs::read_to_string(out_dir.path().join("model.json")).unwrap(),
        )
        .unwrap();
        let ds = xgrove::data::load_csv_flexible(
            &PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("../../data/heart_failure_synthetic.csv"),
        )
        .unwrap();
        let raw: Vec<f64> = ds
            .input_cols()
            .iter()
            .map(|&c| ds.values.get(0, c))
            .collect();
        let mut p1 = -1.0f64;
        assert_eq!(
            xg_model_predict(model, raw.as_ptr(), raw.len(), &mut p1),
            XgStatus::Ok,
            "{}",
            last_error()
        );
        let expected = core_model.predict_raw(&raw).unwrap()[1];
        assert!((p1 - expected).abs() < 1e-12);

        // Wrong arity surfaces as an argument error.
        assert_eq!(
            xg_model_predict(model, raw.as_ptr(), 3, &mut p1),
            XgStatus::Argument
        );

        // Shapley through the FFI: efficiency holds.
        let mut background: *mut XgDataset = std::ptr::null_mut();
        assert_eq!(
            xg_dataset_load_csv(data_csv().as_ptr(), &mut background),
            XgStatus::Ok
        );
        let mut values = vec![0.0f64; n_features];
        let mut base = 0.0f64;
        assert_eq!(
            xg_model_shap(
                model,
                background,
                raw.as_ptr(),
                raw.len(),
                values.as_mut_ptr(),
                values.len(),
                &mut base,
            ),
            XgStatus::Ok,
            "{}",
            last_error()
        );
        let total: f64 = values.iter().sum();
        assert!((base + total - expected).abs() < 1e-9);

        // Buffer-length mismatch is rejected.
        assert_eq!(
            xg_model_shap(
                model,
                background,
                raw.as_ptr(),
                raw.len(),
                values.as_mut_ptr(),
                2,
                &mut base,
            ),
            XgStatus::Argument
        );

        xg_dataset_free(background);
        xg_model_free(model);
    }
}
