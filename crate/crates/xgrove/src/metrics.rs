//! Classification metrics and the interpretability/fidelity/FIR triple.
//!
//! Class 1 (death event) is the positive class. Metrics with a zero
//! denominator are reported as 0 and flagged as degenerate rather than
//! erroring, so sweeping degenerate classifiers through a grid stays
//! well-defined.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Tally predictions against labels.
    pub fn from_predictions(predicted: &[usize], actual: &[u8]) -> Result<ConfusionMatrix> {
        if predicted.len() != actual.len() {
            return Err(Error::Argument("prediction/label length mismatch".into()));
        }
        let mut cm = ConfusionMatrix::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (a, p) {
                (1, 1) => cm.tp += 1,
                (0, 0) => cm.tn += 1,
                (0, 1) => cm.fp += 1,
                (1, 0) => cm.fn_ += 1,
                _ => return Err(Error::Argument("labels must be binary 0/1".into())),
            }
        }
        Ok(cm)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f1: f64,
    /// Set when any metric had a zero denominator.
    pub degenerate: bool,
}

impl MetricsReport {
    pub fn get(&self, metric: MetricName) -> f64 {
        match metric {
            MetricName::Accuracy => self.accuracy,
            MetricName::BalancedAccuracy => self.balanced_accuracy,
            MetricName::Sensitivity => self.sensitivity,
            MetricName::Specificity => self.specificity,
            MetricName::Precision => self.precision,
            MetricName::F1 => self.f1,
        }
    }

    /// Unweighted component-wise mean, the cross-validated aggregate.
    pub fn mean_of(reports: &[MetricsReport]) -> MetricsReport {
        let k = reports.len() as f64;
        let mut out = MetricsReport::default();
        for r in reports {
            out.accuracy += r.accuracy / k;
            out.balanced_accuracy += r.balanced_accuracy / k;
            out.sensitivity += r.sensitivity / k;
            out.specificity += r.specificity / k;
            out.precision += r.precision / k;
            out.f1 += r.f1 / k;
            out.degenerate |= r.degenerate;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Accuracy,
    BalancedAccuracy,
    Sensitivity,
    Specificity,
    Precision,
    F1,
}

impl std::fmt::Display for MetricName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MetricName::Accuracy => "accuracy",
            MetricName::BalancedAccuracy => "balanced_accuracy",
            MetricName::Sensitivity => "sensitivity",
            MetricName::Specificity => "specificity",
            MetricName::Precision => "precision",
            MetricName::F1 => "f1",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "accuracy" => MetricName::Accuracy,
            "balanced_accuracy" | "bacc" => MetricName::BalancedAccuracy,
            "sensitivity" | "recall" => MetricName::Sensitivity,
            "specificity" => MetricName::Specificity,
            "precision" => MetricName::Precision,
            "f1" => MetricName::F1,
            other => return Err(Error::Argument(format!("unknown metric '{other}'"))),
        })
    }
}

fn ratio(num: f64, den: f64, degenerate: &mut bool) -> f64 {
    if den == 0.0 {
        *degenerate = true;
        0.0
    } else {
        num / den
    }
}

/// Accuracy, sensitivity, specificity, balanced accuracy, precision and
/// F1 from a confusion matrix.
pub fn classification_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    if cm.total() == 0 {
        return Err(Error::Argument("empty confusion matrix".into()));
    }
    let (tp, tn, fp, fn_) = (cm.tp as f64, cm.tn as f64, cm.fp as f64, cm.fn_ as f64);
    let mut degenerate = false;
    let accuracy = (tp + tn) / (tp + tn + fp + fn_);
    let sensitivity = ratio(tp, tp + fn_, &mut degenerate);
    let specificity = ratio(tn, tn + fp, &mut degenerate);
    let balanced_accuracy = (sensitivity + specificity) / 2.0;
    let precision = ratio(tp, tp + fp, &mut degenerate);
    let f1 = ratio(
        2.0 * precision * sensitivity,
        precision + sensitivity,
        &mut degenerate,
    );
    Ok(MetricsReport {
        accuracy,
        balanced_accuracy,
        sensitivity,
        specificity,
        precision,
        f1,
        degenerate,
    })
}

/// Interpretability / fidelity / FIR triple of one candidate model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplainabilityScore {
    /// Fraction of input features masked away by selection.
    pub interpretability: f64,
    /// Interpretable-baseline score over the model's score.
    pub fidelity: f64,
    /// `fidelity / (fidelity + interpretability)`; 0.5 is the declared
    /// optimum of the accuracy-explainability balance.
    pub fir: f64,
}

/// Compute the triple from the selected-feature count and the two
/// balanced accuracies (single decision tree as baseline).
pub fn explainability_score(
    selected: usize,
    total: usize,
    bacc_baseline_tree: f64,
    bacc_model: f64,
) -> Result<ExplainabilityScore> {
    if selected > total || total == 0 {
        return Err(Error::Argument(format!(
            "selected {selected} of {total} features is not a valid selection"
        )));
    }
    if bacc_model <= 0.0 {
        return Err(Error::Argument(
            "fidelity undefined: model balanced accuracy is zero".into(),
        ));
    }
    let interpretability = (total - selected) as f64 / total as f64;
    let fidelity = bacc_baseline_tree / bacc_model;
    let fir = fidelity / (fidelity + interpretability);
    Ok(ExplainabilityScore {
        interpretability,
        fidelity,
        fir,
    })
}
