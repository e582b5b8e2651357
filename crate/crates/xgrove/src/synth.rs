//! Bundled synthetic heart-failure demo dataset.
//!
//! The generator reproduces the shape of the public heart-failure survival
//! cohort (299 records, 203 survivors / 96 deceased, 7 numerical + 5 binary
//! inputs) with class-conditional distributions that mirror the published
//! summary statistics: follow-up time is by far the strongest mortality
//! signal, serum creatinine and ejection fraction form a second tier, age a
//! third, while CPK, platelets, serum sodium and most binary flags carry
//! little to no signal. Values are clipped to the documented ranges.
//!
//! The data is fully determined by the seed, so tests and the committed
//! `data/heart_failure_synthetic.csv` stay in sync.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::data::{heart_failure_schema, Dataset, FeatureKind};
use crate::matrix::Matrix;
use crate::rng::stream_rng;

const SURVIVORS: usize = 203;
const DECEASED: usize = 96;

struct NumSpec {
    col: &'static str,
    /// (mean, std) for survivors and deceased.
    class0: (f64, f64),
    class1: (f64, f64),
    clip: (f64, f64),
    /// Round to this many decimals (matches the source data's granularity).
    decimals: u32,
    log_scale: bool,
}

struct NomSpec {
    col: &'static str,
    /// P(value = 1) for survivors and deceased.
    p_class0: f64,
    p_class1: f64,
}

fn numeric_specs() -> Vec<NumSpec> {
    vec![
        NumSpec {
            col: "age",
            class0: (59.0, 10.8),
            class1: (64.5, 12.8),
            clip: (40.0, 95.0),
            decimals: 0,
            log_scale: false,
        },
        NumSpec {
            col: "creatinine_phosphokinase",
            class0: (540.0, 930.0),
            class1: (560.0, 1000.0),
            clip: (23.0, 7861.0),
            decimals: 0,
            log_scale: true,
        },
        NumSpec {
            col: "ejection_fraction",
            class0: (41.5, 10.5),
            class1: (31.5, 12.5),
            clip: (14.0, 80.0),
            decimals: 0,
            log_scale: false,
        },
        NumSpec {
            col: "platelets",
            class0: (263000.0, 98000.0),
            class1: (258000.0, 98000.0),
            clip: (25100.0, 850000.0),
            decimals: 0,
            log_scale: false,
        },
        NumSpec {
            col: "serum_creatinine",
            class0: (1.15, 0.55),
            class1: (2.05, 1.40),
            clip: (0.5, 9.4),
            decimals: 1,
            log_scale: true,
        },
        NumSpec {
            col: "serum_sodium",
            class0: (137.0, 4.0),
            class1: (136.0, 4.8),
            clip: (113.0, 148.0),
            decimals: 0,
            log_scale: false,
        },
        NumSpec {
            col: "time",
            class0: (162.0, 62.0),
            class1: (64.0, 58.0),
            clip: (4.0, 285.0),
            decimals: 0,
            log_scale: false,
        },
    ]
}

fn nominal_specs() -> Vec<NomSpec> {
    vec![
        NomSpec {
            col: "anaemia",
            p_class0: 0.38,
            p_class1: 0.55,
        },
        NomSpec {
            col: "diabetes",
            p_class0: 0.42,
            p_class1: 0.42,
        },
        NomSpec {
            col: "high_blood_pressure",
            p_class0: 0.33,
            p_class1: 0.41,
        },
        NomSpec {
            col: "sex",
            p_class0: 0.65,
            p_class1: 0.65,
        },
        NomSpec {
            col: "smoking",
            p_class0: 0.32,
            p_class1: 0.32,
        },
    ]
}

fn round_to(v: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (v * scale).round() / scale
}

/// Generate the 299-row demo dataset for a seed.
pub fn heart_failure_demo(seed: u64) -> Dataset {
    let specs = heart_failure_schema();
    let n = SURVIVORS + DECEASED;
    let n_cols = specs.len();
    let target_col = n_cols - 1;

    // Class labels in a deterministic interleaved order.
    let mut labels = vec![0u8; SURVIVORS];
    labels.extend(std::iter::repeat_n(1u8, DECEASED));
    use rand::seq::SliceRandom;
    labels.shuffle(&mut stream_rng(seed, 0));

    let mut values = Matrix::zeros(n, n_cols);
    for (r, &y) in labels.iter().enumerate() {
        values.set(r, target_col, y as f64);
    }

    for (ci, spec) in specs.iter().enumerate().take(target_col) {
        let mut rng = stream_rng(seed, 100 + ci as u64);
        match spec.kind {
            FeatureKind::Numerical => {
                let ns = numeric_specs()
                    .into_iter()
                    .find(|s| s.col == spec.name)
                    .expect("numeric spec");
                for (r, &y) in labels.iter().enumerate() {
                    let (mean, std) = if y == 0 { ns.class0 } else { ns.class1 };
                    let v = if ns.log_scale {
                        // Parametrize the log-normal so that the arithmetic
                        // mean and std match the requested moments.
                        let sigma2 = (1.0 + (std * std) / (mean * mean)).ln();
                        let mu = mean.ln() - sigma2 / 2.0;
                        LogNormal::new(mu, sigma2.sqrt()).unwrap().sample(&mut rng)
                    } else {
                        Normal::new(mean, std).unwrap().sample(&mut rng)
                    };
                    let v = round_to(v.clamp(ns.clip.0, ns.clip.1), ns.decimals);
                    values.set(r, ci, v);
                }
            }
            _ => {
                let ns = nominal_specs()
                    .into_iter()
                    .find(|s| s.col == spec.name)
                    .expect("nominal spec");
                for (r, &y) in labels.iter().enumerate() {
                    let p = if y == 0 { ns.p_class0 } else { ns.p_class1 };
                    let v = f64::from(rng.random_bool(p));
                    values.set(r, ci, v);
                }
            }
        }
    }

    let ds = Dataset {
        specs,
        missing: vec![false; n * n_cols],
        values,
        target_col,
    };
    ds.validate().expect("generated dataset is valid");
    ds
}

/// Seed of the committed `data/heart_failure_synthetic.csv`.
pub const BUNDLED_SEED: u64 = 20;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_has_canonical_shape() {
        let ds = heart_failure_demo(BUNDLED_SEED);
        assert_eq!(ds.n_rows(), 299);
        assert_eq!(ds.input_cols().len(), 12);
        let labels = ds.labels();
        let pos = labels.iter().filter(|&&y| y == 1).count();
        assert_eq!(pos, 96);
        assert_eq!(labels.len() - pos, 203);
        assert!(ds.missing.iter().all(|&m| !m));
    }

    #[test]
    fn demo_is_seed_deterministic() {
        let a = heart_failure_demo(5);
        let b = heart_failure_demo(5);
        assert_eq!(a.values, b.values);
        let c = heart_failure_demo(6);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn demo_values_respect_documented_ranges() {
        let ds = heart_failure_demo(BUNDLED_SEED);
        let age = ds.column_index("age").unwrap();
        let ef = ds.column_index("ejection_fraction").unwrap();
        for r in 0..ds.n_rows() {
            assert!((40.0..=95.0).contains(&ds.values.get(r, age)));
            assert!((14.0..=80.0).contains(&ds.values.get(r, ef)));
        }
    }
}
