//! Ensemble-tree toolkit for tabular binary classification with built-in
//! explainability.
//!
//! The crate covers the full path from a CSV file to an explained model:
//!
//! * [`data`] — typed dataset loading, stratified train/test splits and
//!   stratified cross-validation folds;
//! * [`preprocess`] — fit-on-train imputation, normalization and encoding;
//! * [`select`] — univariate feature scoring (ANOVA-F, chi-squared, mutual
//!   information) and recursive feature elimination;
//! * [`tree`] — a CART-style decision tree, the base learner everywhere;
//! * [`ensemble`] — random forest, extra trees, AdaBoost, gradient boosting,
//!   regularized second-order boosting and hard voting on top of [`tree`];
//! * [`metrics`] — confusion-matrix metrics plus the
//!   interpretability/fidelity/FIR triple used to balance accuracy against
//!   explainability;
//! * [`model_select`] — exhaustive grid search over (classifier × feature
//!   selection) candidates scored by stratified k-fold cross-validation;
//! * [`explain`] — post-hoc explainers: Gini importance, per-instance path
//!   contributions, permutation importance, 1D/2D partial dependence and
//!   exact interventional Shapley values;
//! * [`report`] — the run orchestrator behind the `xgrove` CLI, emitting a
//!   deterministic JSON report, CSV ledgers and plot-ready explanation
//!   exports.
//!
//! Everything downstream of a `(dataset, config, seed)` triple is
//! deterministic, including parallel grid evaluation.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod explain;
pub mod matrix;
pub mod metrics;
pub mod model_select;
pub mod preprocess;
pub mod report;
pub mod rng;
pub mod select;
pub mod synth;
pub mod tree;

pub use error::{Error, Result};
pub use matrix::Matrix;
