//! Ensemble classifiers built on the CART base learner: random forest,
//! extra trees, AdaBoost, gradient boosting, a regularized second-order
//! booster and hard majority voting. A single decision tree is included as
//! the degenerate (and fully interpretable) ensemble.
//!
//! Fitting is deterministic per `(config, data, seed)`: every tree draws
//! from its own derived RNG stream, so forests may fit their members in
//! parallel without affecting the result.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::stream_rng;
use crate::tree::{self, FitTarget, Tree, TreeParams};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    DecisionTree,
    RandomForest,
    ExtraTrees,
    AdaBoost,
    GradientBoosting,
    XgbStyle,
    MaxVoting,
}

impl EnsembleKind {
    pub const ALL: [EnsembleKind; 7] = [
        EnsembleKind::DecisionTree,
        EnsembleKind::RandomForest,
        EnsembleKind::ExtraTrees,
        EnsembleKind::AdaBoost,
        EnsembleKind::GradientBoosting,
        EnsembleKind::XgbStyle,
        EnsembleKind::MaxVoting,
    ];

    pub fn is_boosting(self) -> bool {
        matches!(
            self,
            EnsembleKind::AdaBoost | EnsembleKind::GradientBoosting | EnsembleKind::XgbStyle
        )
    }
}

impl std::fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EnsembleKind::DecisionTree => "decision_tree",
            EnsembleKind::RandomForest => "random_forest",
            EnsembleKind::ExtraTrees => "extra_trees",
            EnsembleKind::AdaBoost => "adaboost",
            EnsembleKind::GradientBoosting => "gradient_boosting",
            EnsembleKind::XgbStyle => "xgb_style",
            EnsembleKind::MaxVoting => "max_voting",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "decision_tree" => EnsembleKind::DecisionTree,
            "random_forest" => EnsembleKind::RandomForest,
            "extra_trees" => EnsembleKind::ExtraTrees,
            "adaboost" => EnsembleKind::AdaBoost,
            "gradient_boosting" => EnsembleKind::GradientBoosting,
            "xgb_style" => EnsembleKind::XgbStyle,
            "max_voting" => EnsembleKind::MaxVoting,
            other => return Err(Error::Argument(format!("unknown classifier '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub kind: EnsembleKind,
    pub n_estimators: usize,
    pub learning_rate: f64,
    /// Per-node candidate features; `None` keeps the kind's default
    /// (floor(sqrt(m)) for the forests, all features otherwise).
    pub feature_subsample: Option<usize>,
    /// L2 leaf penalty of the second-order booster.
    pub lambda: f64,
    /// Minimum split gain of the second-order booster.
    pub gamma: f64,
    pub max_depth: Option<u32>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    /// Bagging on/off (random forest only).
    pub bootstrap: bool,
    /// Voting members (max_voting only).
    pub members: Vec<EnsembleConfig>,
    pub seed: u64,
}

impl EnsembleConfig {
    /// Defaults per classifier kind: 100 estimators, learning rate 0.1,
    /// unlimited depth for the forests and depth 3 for the boosters,
    /// lambda 1 / gamma 0 for the second-order booster; the voting
    /// ensemble aggregates a forest, an extra-trees model and a gradient
    /// booster.
    pub fn default_for(kind: EnsembleKind) -> Self {
        let base = EnsembleConfig {
            kind,
            n_estimators: 100,
            learning_rate: 0.1,
            feature_subsample: None,
            lambda: 1.0,
            gamma: 0.0,
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
            bootstrap: kind == EnsembleKind::RandomForest,
            members: Vec::new(),
            seed: 0,
        };
        match kind {
            EnsembleKind::DecisionTree => EnsembleConfig {
                n_estimators: 1,
                ..base
            },
            EnsembleKind::AdaBoost | EnsembleKind::GradientBoosting | EnsembleKind::XgbStyle => {
                EnsembleConfig {
                    max_depth: Some(3),
                    ..base
                }
            }
            EnsembleKind::MaxVoting => EnsembleConfig {
                members: vec![
                    EnsembleConfig::default_for(EnsembleKind::RandomForest),
                    EnsembleConfig::default_for(EnsembleKind::ExtraTrees),
                    EnsembleConfig::default_for(EnsembleKind::GradientBoosting),
                ],
                ..base
            },
            _ => base,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators < 1 {
            return Err(Error::Argument("n_estimators must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Argument("learning_rate must be > 0".into()));
        }
        if self.kind == EnsembleKind::MaxVoting {
            if self.members.is_empty() {
                return Err(Error::Argument("max_voting requires members".into()));
            }
            for m in &self.members {
                if m.kind == EnsembleKind::MaxVoting {
                    return Err(Error::Argument("max_voting members cannot nest".into()));
                }
                m.validate()?;
            }
        }
        Ok(())
    }

    fn tree_params(&self, n_features: usize) -> TreeParams {
        let subsample = match self.kind {
            EnsembleKind::RandomForest | EnsembleKind::ExtraTrees => Some(
                self.feature_subsample
                    .unwrap_or_else(|| (n_features as f64).sqrt().floor().max(1.0) as usize)
                    .min(n_features),
            ),
            _ => self.feature_subsample.map(|k| k.min(n_features)),
        };
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            min_samples_split: self.min_samples_split,
            feature_subsample: subsample,
            random_threshold: self.kind == EnsembleKind::ExtraTrees,
        }
    }
}

/// A trained ensemble. Immutable and freely shareable across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedEnsemble {
    pub kind: EnsembleKind,
    pub config: EnsembleConfig,
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
    /// Per-tree vote weights (AdaBoost alphas); empty elsewhere.
    pub tree_weights: Vec<f64>,
    /// Prior log-odds for the boosters, 0 elsewhere.
    pub base_score: f64,
    /// Degenerate single-class shortcut: fixed P(class 1).
    pub constant: Option<f64>,
    pub members: Vec<FittedEnsemble>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Fit an ensemble on the already-preprocessed feature matrix `x`.
pub fn fit(
    config: &EnsembleConfig,
    x: &Matrix,
    y: &[u8],
    feature_names: &[String],
) -> Result<FittedEnsemble> {
    config.validate()?;
    if x.n_rows() == 0 {
        return Err(Error::Argument("cannot fit on zero rows".into()));
    }
    if x.n_rows() != y.len() {
        return Err(Error::Argument("labels/row count mismatch".into()));
    }
    if feature_names.len() != x.n_cols() {
        return Err(Error::Argument(
            "one feature name per column required".into(),
        ));
    }

    let prior = y.iter().map(|&c| c as f64).sum::<f64>() / y.len() as f64;
    let single_class = prior == 0.0 || prior == 1.0;
    if single_class && config.kind.is_boosting() {
        log::warn!(
            "single-class training labels; {} degenerates to the constant prior",
            config.kind
        );
        return Ok(FittedEnsemble {
            kind: config.kind,
            config: config.clone(),
            feature_names: feature_names.to_vec(),
            trees: Vec::new(),
            tree_weights: Vec::new(),
            base_score: 0.0,
            constant: Some(prior),
            members: Vec::new(),
        });
    }

    let params = config.tree_params(x.n_cols());
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    let unit = vec![1.0f64; x.n_rows()];

    let mut fitted = FittedEnsemble {
        kind: config.kind,
        config: config.clone(),
        feature_names: feature_names.to_vec(),
        trees: Vec::new(),
        tree_weights: Vec::new(),
        base_score: 0.0,
        constant: None,
        members: Vec::new(),
    };

    match config.kind {
        EnsembleKind::DecisionTree => {
            let mut rng = stream_rng(config.seed, 0);
            fitted.trees.push(tree::fit(
                x,
                FitTarget::Class { y, weights: &unit },
                &rows,
                &params,
                &mut rng,
            )?);
        }
        EnsembleKind::RandomForest | EnsembleKind::ExtraTrees => {
            let bootstrap = config.bootstrap;
            fitted.trees = (0..config.n_estimators)
                .into_par_iter()
                .map(|t| {
                    let mut rng = stream_rng(config.seed, t as u64);
                    let sample: Vec<usize> = if bootstrap {
                        (0..rows.len())
                            .map(|_| rng.random_range(0..rows.len()))
                            .collect()
                    } else {
                        rows.clone()
                    };
                    tree::fit(
                        x,
                        FitTarget::Class { y, weights: &unit },
                        &sample,
                        &params,
                        &mut rng,
                    )
                })
                .collect::<Result<Vec<Tree>>>()?;
        }
        EnsembleKind::AdaBoost => {
            let n = x.n_rows();
            let mut w = vec![1.0 / n as f64; n];
            for t in 0..config.n_estimators {
                let mut rng = stream_rng(config.seed, t as u64);
                let tree = tree::fit(
                    x,
                    FitTarget::Class { y, weights: &w },
                    &rows,
                    &params,
                    &mut rng,
                )?;
                let misclassified: Vec<bool> = (0..n)
                    .map(|r| {
                        let p = tree.predict_proba(x.row(r)).expect("arity");
                        usize::from(p[1] > 0.5) != y[r] as usize
                    })
                    .collect();
                let epsilon: f64 = misclassified
                    .iter()
                    .zip(&w)
                    .filter(|(m, _)| **m)
                    .map(|(_, wi)| wi)
                    .sum();
                if epsilon >= 0.5 {
                    break;
                }
                let alpha = ((1.0 - epsilon.max(1e-10)) / epsilon.max(1e-10)).ln();
                fitted.trees.push(tree);
                fitted.tree_weights.push(alpha);
                if epsilon == 0.0 {
                    break;
                }
                for (wi, &mis) in w.iter_mut().zip(&misclassified) {
                    if mis {
                        *wi *= alpha.exp();
                    }
                }
                let total: f64 = w.iter().sum();
                w.iter_mut().for_each(|wi| *wi /= total);
            }
            if fitted.trees.is_empty() {
                log::warn!("adaboost found no weak learner better than chance; using the prior");
                fitted.constant = Some(prior);
            }
        }
        EnsembleKind::GradientBoosting | EnsembleKind::XgbStyle => {
            fitted.base_score = (prior / (1.0 - prior)).ln();
            let n = x.n_rows();
            let mut margins = vec![fitted.base_score; n];
            let mut residuals = vec![0.0f64; n];
            let mut gradients = vec![0.0f64; n];
            let mut hessians = vec![0.0f64; n];
            for t in 0..config.n_estimators {
                for r in 0..n {
                    let p = sigmoid(margins[r]);
                    residuals[r] = y[r] as f64 - p;
                    gradients[r] = p - y[r] as f64;
                    hessians[r] = p * (1.0 - p);
                }
                let mut rng = stream_rng(config.seed, t as u64);
                let target = if config.kind == EnsembleKind::GradientBoosting {
                    FitTarget::Residual {
                        residuals: &residuals,
                        hessians: &hessians,
                    }
                } else {
                    FitTarget::GradHess {
                        gradients: &gradients,
                        hessians: &hessians,
                        lambda: config.lambda,
                        gamma: config.gamma,
                    }
                };
                let tree = tree::fit(x, target, &rows, &params, &mut rng)?;
                for r in 0..n {
                    margins[r] += config.learning_rate * tree.predict_margin(x.row(r));
                }
                fitted.trees.push(tree);
            }
        }
        EnsembleKind::MaxVoting => {
            fitted.members = config
                .members
                .iter()
                .enumerate()
                .map(|(j, member)| {
                    // Members derive their stream from the voting seed so
                    // the whole ensemble is reproducible from one number.
                    let cfg = member.clone().with_seed(crate::rng::derive_seed(
                        config.seed,
                        0x4f7e + j as u64,
                    ));
                    fit(&cfg, x, y, feature_names)
                })
                .collect::<Result<Vec<_>>>()?;
        }
    }
    Ok(fitted)
}

impl FittedEnsemble {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Whether the model exposes its own trees (false for voting).
    pub fn is_tree_based(&self) -> bool {
        self.kind != EnsembleKind::MaxVoting
    }

    fn check_arity(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::Argument(format!(
                "expected {} features, got {}",
                self.n_features(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Raw additive margin of the boosters (before the sigmoid): the
    /// alpha-normalized vote for AdaBoost, prior log-odds plus scaled leaf
    /// values for the gradient boosters.
    pub fn margin(&self, x: &[f64]) -> f64 {
        match self.kind {
            EnsembleKind::AdaBoost => {
                let total: f64 = self.tree_weights.iter().sum();
                if total <= 0.0 {
                    return 0.0;
                }
                let vote: f64 = self
                    .trees
                    .iter()
                    .zip(&self.tree_weights)
                    .map(|(t, &a)| {
                        let p = t.predict_proba(x).expect("arity checked");
                        a * if p[1] > 0.5 { 1.0 } else { -1.0 }
                    })
                    .sum();
                vote / total
            }
            EnsembleKind::GradientBoosting | EnsembleKind::XgbStyle => {
                self.base_score
                    + self.config.learning_rate
                        * self.trees.iter().map(|t| t.predict_margin(x)).sum::<f64>()
            }
            _ => 0.0,
        }
    }

    /// `[P(class 0), P(class 1)]` for one row.
    pub fn predict_proba_row(&self, x: &[f64]) -> Result<[f64; 2]> {
        self.check_arity(x)?;
        if let Some(p1) = self.constant {
            return Ok([1.0 - p1, p1]);
        }
        Ok(match self.kind {
            EnsembleKind::DecisionTree => self.trees[0].predict_proba(x)?,
            EnsembleKind::RandomForest | EnsembleKind::ExtraTrees => {
                let mut acc = [0.0f64; 2];
                for tree in &self.trees {
                    let p = tree.predict_proba(x)?;
                    acc[0] += p[0];
                    acc[1] += p[1];
                }
                let k = self.trees.len() as f64;
                [acc[0] / k, acc[1] / k]
            }
            EnsembleKind::AdaBoost | EnsembleKind::GradientBoosting | EnsembleKind::XgbStyle => {
                let p1 = sigmoid(self.margin(x));
                [1.0 - p1, p1]
            }
            EnsembleKind::MaxVoting => {
                let mut votes = [0usize; 2];
                for member in &self.members {
                    votes[member.predict_class(x)?] += 1;
                }
                let k = self.members.len() as f64;
                [votes[0] as f64 / k, votes[1] as f64 / k]
            }
        })
    }

    /// Majority class; ties go to class 0.
    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        let p = self.predict_proba_row(x)?;
        Ok(usize::from(p[1] > p[0]))
    }

    /// Probability matrix (rows sum to 1) for a batch.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        if x.n_cols() != self.n_features() {
            return Err(Error::Argument(format!(
                "expected {} features, got {}",
                self.n_features(),
                x.n_cols()
            )));
        }
        let mut out = Matrix::zeros(x.n_rows(), 2);
        for r in 0..x.n_rows() {
            let p = self.predict_proba_row(x.row(r))?;
            out.set(r, 0, p[0]);
            out.set(r, 1, p[1]);
        }
        Ok(out)
    }

    /// Serialize to the documented JSON envelope (compact; trees carry
    /// full-precision floats for bit-exact reload).
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<FittedEnsemble> {
        Ok(serde_json::from_str(text)?)
    }
}
