//! Typed tabular datasets, stratified splits and cross-validation folds.
//!
//! A [`Dataset`] couples a column schema with a dense numeric value matrix
//! and a missingness mask. Nominal categories are stored as small integer
//! codes; string categories are coded on first appearance (or by the
//! position in the schema's declared category list, when given).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::stream_rng;
use rand::seq::SliceRandom;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numerical,
    Nominal,
    Ordinal,
}

/// One column of the schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Optional validity range for numerical columns.
    pub range: Option<(f64, f64)>,
    /// Category names for nominal columns; the code of a category is its
    /// position in this list. Filled on first appearance when absent.
    pub categories: Option<Vec<String>>,
}

impl FeatureSpec {
    pub fn numerical(name: &str) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Numerical,
            range: None,
            categories: None,
        }
    }

    pub fn nominal(name: &str) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Nominal,
            range: None,
            categories: None,
        }
    }
}

/// Column-typed table of instances plus a missingness mask.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub specs: Vec<FeatureSpec>,
    pub values: Matrix,
    /// Row-major, same shape as `values`; `true` marks a missing cell.
    pub missing: Vec<bool>,
    pub target_col: usize,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.values.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.n_cols()
    }

    /// Column indices of the input features (everything but the target).
    pub fn input_cols(&self) -> Vec<usize> {
        (0..self.n_cols()).filter(|&c| c != self.target_col).collect()
    }

    pub fn input_names(&self) -> Vec<String> {
        self.input_cols()
            .into_iter()
            .map(|c| self.specs[c].name.clone())
            .collect()
    }

    /// Binary target labels as 0/1.
    pub fn labels(&self) -> Vec<u8> {
        (0..self.n_rows())
            .map(|r| self.values.get(r, self.target_col) as u8)
            .collect()
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.n_cols() + col]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.name == name)
    }

    /// Structural checks shared by every constructor.
    pub fn validate(&self) -> Result<()> {
        if self.n_rows() == 0 {
            return Err(Error::Schema("no data rows".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.specs {
            if !seen.insert(s.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name '{}'", s.name)));
            }
        }
        for r in 0..self.n_rows() {
            if self.is_missing(r, self.target_col) {
                return Err(Error::Schema(format!("missing target value at row {r}")));
            }
            let t = self.values.get(r, self.target_col);
            if t != 0.0 && t != 1.0 {
                return Err(Error::Schema(format!(
                    "target must be binary 0/1, found {t} at row {r}"
                )));
            }
        }
        Ok(())
    }

    /// Copy of the dataset without the named input columns.
    pub fn drop_columns(&self, names: &[String]) -> Result<Dataset> {
        for n in names {
            let idx = self
                .column_index(n)
                .ok_or_else(|| Error::Argument(format!("unknown column '{n}'")))?;
            if idx == self.target_col {
                return Err(Error::Argument("cannot drop the target column".into()));
            }
        }
        let keep: Vec<usize> = (0..self.n_cols())
            .filter(|&c| !names.iter().any(|n| n == &self.specs[c].name))
            .collect();
        let rows: Vec<usize> = (0..self.n_rows()).collect();
        let values = self.values.select(&rows, &keep);
        let mut missing = Vec::with_capacity(rows.len() * keep.len());
        for r in 0..self.n_rows() {
            for &c in &keep {
                missing.push(self.is_missing(r, c));
            }
        }
        let target_col = keep
            .iter()
            .position(|&c| c == self.target_col)
            .expect("target kept");
        Ok(Dataset {
            specs: keep.iter().map(|&c| self.specs[c].clone()).collect(),
            values,
            missing,
            target_col,
        })
    }
}

/// Train/test partition of row indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold assignment over the training indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// `assignments[i]` is the fold id of `train[i]`.
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// (in-fold, out-of-fold) training rows for fold `f`.
    pub fn fold_rows(&self, train: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut fit = Vec::new();
        let mut held = Vec::new();
        for (i, &row) in train.iter().enumerate() {
            if self.assignments[i] == f {
                held.push(row);
            } else {
                fit.push(row);
            }
        }
        (fit, held)
    }
}

/// Schema of the heart-failure survival records: 7 numerical inputs,
/// 5 binary nominal inputs and the binary `DEATH_EVENT` target.
pub fn heart_failure_schema() -> Vec<FeatureSpec> {
    vec![
        FeatureSpec::numerical("age"),
        FeatureSpec::nominal("anaemia"),
        FeatureSpec::numerical("creatinine_phosphokinase"),
        FeatureSpec::nominal("diabetes"),
        FeatureSpec::numerical("ejection_fraction"),
        FeatureSpec::nominal("high_blood_pressure"),
        FeatureSpec::numerical("platelets"),
        FeatureSpec::numerical("serum_creatinine"),
        FeatureSpec::numerical("serum_sodium"),
        FeatureSpec::nominal("sex"),
        FeatureSpec::nominal("smoking"),
        FeatureSpec::numerical("time"),
        FeatureSpec::nominal("DEATH_EVENT"),
    ]
}

/// Name of the target column in the canonical schema.
pub const TARGET_COLUMN: &str = "DEATH_EVENT";

/// Load a CSV file against a schema. The header must contain exactly the
/// schema's column names (any order). Empty cells become missing values.
pub fn load_csv(path: &Path, schema: &[FeatureSpec]) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.to_string())
        .collect();

    // Map each schema column to its position in the file.
    let mut file_pos = Vec::with_capacity(schema.len());
    for spec in schema {
        match header.iter().position(|h| h == &spec.name) {
            Some(p) => file_pos.push(p),
            None => {
                return Err(Error::Schema(format!("missing column '{}'", spec.name)));
            }
        }
    }
    if header.len() != schema.len() {
        let extra: Vec<&String> = header
            .iter()
            .filter(|h| !schema.iter().any(|s| &s.name == *h))
            .collect();
        return Err(Error::Schema(format!("unexpected column(s) {extra:?}")));
    }

    let mut specs: Vec<FeatureSpec> = schema.to_vec();
    let mut codebooks: Vec<HashMap<String, f64>> = specs
        .iter()
        .map(|s| {
            let mut m = HashMap::new();
            if let Some(cats) = &s.categories {
                for (i, c) in cats.iter().enumerate() {
                    m.insert(c.clone(), i as f64);
                }
            }
            m
        })
        .collect();

    let mut data: Vec<f64> = Vec::new();
    let mut missing: Vec<bool> = Vec::new();
    let mut n_rows = 0usize;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        for (col, spec) in specs.iter_mut().enumerate() {
            let raw = record.get(file_pos[col]).unwrap_or("");
            if raw.is_empty() {
                data.push(f64::NAN);
                missing.push(true);
                continue;
            }
            let value = match raw.parse::<f64>() {
                Ok(v) => {
                    if spec.kind == FeatureKind::Numerical {
                        if let Some((lo, hi)) = spec.range {
                            if v < lo || v > hi {
                                return Err(Error::Schema(format!(
                                    "value {v} out of range [{lo}, {hi}] in column '{}' at row {row_idx}",
                                    spec.name
                                )));
                            }
                        }
                    }
                    v
                }
                Err(_) if spec.kind != FeatureKind::Numerical => {
                    // String category: code by declared list or first appearance.
                    let book = &mut codebooks[col];
                    match book.get(raw) {
                        Some(&code) => code,
                        None => {
                            let code = book.len() as f64;
                            book.insert(raw.to_string(), code);
                            spec.categories
                                .get_or_insert_with(Vec::new)
                                .push(raw.to_string());
                            code
                        }
                    }
                }
                Err(_) => {
                    return Err(Error::Parse {
                        row: row_idx,
                        column: spec.name.clone(),
                        message: format!("'{raw}' is not numeric"),
                    });
                }
            };
            data.push(value);
            missing.push(false);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::Schema("no data rows".into()));
    }

    let target_col = specs
        .iter()
        .position(|s| s.name == TARGET_COLUMN)
        .unwrap_or(specs.len() - 1);
    let ds = Dataset {
        values: Matrix::from_rows(n_rows, specs.len(), data),
        specs,
        missing,
        target_col,
    };
    ds.validate()?;
    log::info!(
        "loaded {} rows x {} columns from {}",
        ds.n_rows(),
        ds.n_cols(),
        path.display()
    );
    Ok(ds)
}

/// Write a dataset back to CSV. Missing cells become empty, coded nominal
/// categories are written back as their category strings.
pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let names: Vec<&str> = ds.specs.iter().map(|s| s.name.as_str()).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for r in 0..ds.n_rows() {
        for (c, spec) in ds.specs.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            if ds.is_missing(r, c) {
                continue;
            }
            let v = ds.values.get(r, c);
            match &spec.categories {
                Some(cats) if (v as usize) < cats.len() && v.fract() == 0.0 => {
                    out.push_str(&cats[v as usize]);
                }
                _ => {
                    let _ = write!(out, "{v}");
                }
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Load a CSV against the canonical heart-failure schema when the header
/// matches it, otherwise against a schema inferred from the file: binary
/// 0/1 columns become nominal, everything else numerical, and the target
/// is the `DEATH_EVENT` column (or the last column when absent).
pub fn load_csv_flexible(path: &Path) -> Result<Dataset> {
    match load_csv(path, &heart_failure_schema()) {
        Ok(ds) => Ok(ds),
        Err(Error::Schema(_)) => {
            let mut reader = csv::ReaderBuilder::new().from_path(path)?;
            let header: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
            if header.is_empty() {
                return Err(Error::Schema("empty header".into()));
            }
            let mut specs: Vec<FeatureSpec> =
                header.iter().map(|name| FeatureSpec::numerical(name)).collect();
            let mut distinct: Vec<std::collections::BTreeSet<String>> =
                vec![Default::default(); header.len()];
            for record in reader.records().take(512) {
                let record = record?;
                for (c, cell) in record.iter().enumerate() {
                    if distinct[c].len() <= 8 {
                        distinct[c].insert(cell.to_string());
                    }
                }
            }
            for (c, values) in distinct.iter().enumerate() {
                let binary = values.iter().all(|v| v.is_empty() || v == "0" || v == "1");
                if binary || header[c] == TARGET_COLUMN {
                    specs[c].kind = FeatureKind::Nominal;
                }
            }
            load_csv(path, &specs)
        }
        Err(other) => Err(other),
    }
}

/// Distinct target classes in ascending order with their row indices.
fn rows_by_class(labels: &[u8], rows: &[usize]) -> Vec<(u8, Vec<usize>)> {
    let mut classes: Vec<u8> = rows.iter().map(|&r| labels[r]).collect();
    classes.sort_unstable();
    classes.dedup();
    classes
        .into_iter()
        .map(|c| {
            (
                c,
                rows.iter().copied().filter(|&r| labels[r] == c).collect(),
            )
        })
        .collect()
}

/// Stratified train/test split.
///
/// Per-class test counts are `floor(n_c * ratio)` plus one remainder seat
/// for the classes with the largest fractional part (ties by ascending
/// class id); the number of seats is the rounded sum of the fractional
/// parts. Membership is decided by a seed-derived shuffle within each
/// class, so the split is deterministic per `(dataset, ratio, seed)`.
pub fn stratified_split(ds: &Dataset, test_ratio: f64, seed: u64) -> Result<SplitIndices> {
    if !(0.0..1.0).contains(&test_ratio) {
        return Err(Error::Argument(format!(
            "test_ratio must be in [0, 1), got {test_ratio}"
        )));
    }
    let labels = ds.labels();
    let all: Vec<usize> = (0..ds.n_rows()).collect();
    let per_class = rows_by_class(&labels, &all);
    if per_class.len() < 2 || per_class.iter().any(|(_, rows)| rows.is_empty()) {
        return Err(Error::Argument("every class needs at least one row".into()));
    }

    // Largest-remainder seat allocation.
    let mut quotas: Vec<(u8, usize, f64)> = per_class
        .iter()
        .map(|(c, rows)| {
            let exact = rows.len() as f64 * test_ratio;
            (*c, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let seats = quotas.iter().map(|q| q.2).sum::<f64>().round() as usize;
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        quotas[b]
            .2
            .partial_cmp(&quotas[a].2)
            .unwrap()
            .then(quotas[a].0.cmp(&quotas[b].0))
    });
    for &i in order.iter().take(seats) {
        quotas[i].1 += 1;
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for ((class, rows), quota) in per_class.iter().zip(&quotas) {
        debug_assert_eq!(*class, quota.0);
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut stream_rng(seed, 0x5711 + *class as u64));
        test.extend_from_slice(&shuffled[..quota.1.min(shuffled.len())]);
        train.extend_from_slice(&shuffled[quota.1.min(shuffled.len())..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Stratified k-fold assignment over `train`.
///
/// Fold sizes differ by at most one overall and per class; the extra seats
/// of successive classes continue round-robin where the previous class
/// stopped so the global balance holds too.
pub fn make_folds(train: &[usize], labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Argument(format!("k must be >= 2, got {k}")));
    }
    if k > train.len() {
        return Err(Error::Argument(format!(
            "k = {k} exceeds the {} training rows",
            train.len()
        )));
    }
    let per_class = rows_by_class(labels, train);
    for (c, rows) in &per_class {
        if rows.len() < k {
            log::warn!(
                "class {c} has only {} members for {k}-fold CV; some folds will miss it",
                rows.len()
            );
        }
    }

    let pos_of: HashMap<usize, usize> = train.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let mut assignments = vec![0usize; train.len()];
    let mut next_fold = 0usize;
    for (class, rows) in &per_class {
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut stream_rng(seed, 0xf01d + *class as u64));
        let base = shuffled.len() / k;
        let extras = shuffled.len() % k;
        let mut cursor = 0usize;
        for i in 0..k {
            let fold = (next_fold + i) % k;
            let take = base + usize::from(i < extras);
            for &row in &shuffled[cursor..cursor + take] {
                assignments[pos_of[&row]] = fold;
            }
            cursor += take;
        }
        next_fold = (next_fold + extras) % k;
    }
    Ok(FoldPlan { k, assignments })
}
