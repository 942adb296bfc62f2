//! CSV loading and preprocessing for the ten-feature kidney screening table.
//!
//! The canonical column set is fixed: ten numeric features plus a binary
//! `Class` label (`ckd` / `notckd`). Files may list columns in any order;
//! loading reorders them to the canonical schema. Missing feature cells are
//! written as empty fields or `?` and are represented in memory as NaN plus
//! a parallel missing-mask, so downstream code never confuses a sentinel
//! with a real measurement.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Number of feature columns in the canonical schema.
pub const FEATURE_COUNT: usize = 10;

const CKD_FEATURES: [&str; FEATURE_COUNT] = [
    "Age",
    "Sex",
    "Sodium",
    "Potassium",
    "Chloride",
    "Bicarbonate",
    "Urea",
    "Creatinine",
    "UreaAcid",
    "Albumin",
];

const CKD_LABEL: &str = "Class";
const POSITIVE_LABEL: &str = "ckd";
const NEGATIVE_LABEL: &str = "notckd";
const STATS_MAGIC: &str = "ckdmlp-stats v1";

/// Ordered feature names plus the label column name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataSchema {
    feature_names: Vec<String>,
    label_name: String,
}

impl DataSchema {
    /// Builds a schema after checking the fixed arity and name uniqueness.
    pub fn new(feature_names: Vec<String>, label_name: String) -> Result<DataSchema> {
        if feature_names.len() != FEATURE_COUNT {
            return Err(Error::Schema(format!(
                "expected {FEATURE_COUNT} feature names, got {}",
                feature_names.len()
            )));
        }
        let mut seen = feature_names.clone();
        seen.push(label_name.clone());
        seen.sort();
        if let Some(dup) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Schema(format!("duplicate column name '{}'", dup[0])));
        }
        Ok(DataSchema {
            feature_names,
            label_name,
        })
    }

    /// The canonical kidney screening schema.
    pub fn ckd() -> DataSchema {
        DataSchema {
            feature_names: CKD_FEATURES.iter().map(|s| s.to_string()).collect(),
            label_name: CKD_LABEL.to_string(),
        }
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    /// Position of a feature in the canonical order.
    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }
}

/// A feature table with labels and an explicit missing-value mask.
///
/// Feature cells flagged missing hold NaN; all other cells are finite.
/// Labels are `1` (positive, `ckd`) or `0` (negative, `notckd`).
#[derive(Clone, Debug)]
pub struct Dataset {
    schema: DataSchema,
    features: Matrix,
    labels: Vec<u8>,
    missing: Vec<bool>,
}

/// Bit-level equality, so datasets with missing cells (NaN sentinels)
/// still compare equal to copies of themselves.
impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema
            && self.labels == other.labels
            && self.missing == other.missing
            && self.features.shape() == other.features.shape()
            && self
                .features
                .data()
                .iter()
                .zip(other.features.data())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Dataset {
    /// Assembles a dataset, enforcing the representation invariants.
    ///
    /// Cells flagged in `missing` are overwritten with the NaN sentinel no
    /// matter what value was passed, so the mask is the single source of
    /// truth for missingness.
    pub fn new(
        schema: DataSchema,
        mut features: Matrix,
        labels: Vec<u8>,
        missing: Vec<bool>,
    ) -> Result<Dataset> {
        if features.cols() != schema.feature_count() {
            return Err(Error::Shape {
                op: "dataset",
                lhs: format!("{}x{}", features.rows(), features.cols()),
                rhs: format!("{} feature columns", schema.feature_count()),
            });
        }
        if labels.len() != features.rows() {
            return Err(Error::Shape {
                op: "dataset",
                lhs: format!("{} rows", features.rows()),
                rhs: format!("{} labels", labels.len()),
            });
        }
        if missing.len() != features.rows() * features.cols() {
            return Err(Error::Shape {
                op: "dataset",
                lhs: format!("{} cells", features.rows() * features.cols()),
                rhs: format!("{} mask entries", missing.len()),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Input(format!(
                "labels must be 0 or 1, found {bad}"
            )));
        }
        let cols = features.cols();
        for i in 0..features.rows() {
            for j in 0..cols {
                if missing[i * cols + j] {
                    features.set(i, j, f64::NAN);
                } else if !features.get(i, j).is_finite() {
                    return Err(Error::Input(format!(
                        "feature value at row {i}, column '{}' is not finite",
                        schema.feature_names()[j]
                    )));
                }
            }
        }
        Ok(Dataset {
            schema,
            features,
            labels,
            missing,
        })
    }

    /// Assembles a fully observed dataset (empty missing-mask).
    pub fn complete(schema: DataSchema, features: Matrix, labels: Vec<u8>) -> Result<Dataset> {
        let mask = vec![false; features.rows() * features.cols()];
        Dataset::new(schema, features, labels, mask)
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn schema(&self) -> &DataSchema {
        &self.schema
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.features.cols() + col]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    /// Rows with label `1`.
    pub fn positive_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Copies the given rows (in the given order) into a new dataset.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        let cols = self.features.cols();
        let features = self.features.select_rows(indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        let mut missing = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            missing.extend_from_slice(&self.missing[i * cols..(i + 1) * cols]);
        }
        Dataset {
            schema: self.schema.clone(),
            features,
            labels,
            missing,
        }
    }

    /// Replaces every missing cell with its column mean over observed cells.
    ///
    /// Observed cells are carried over bit-for-bit. A column with no observed
    /// values cannot be imputed and produces an error naming the column.
    pub fn impute_mean(&self) -> Result<Dataset> {
        let rows = self.features.rows();
        let cols = self.features.cols();
        let mut means = vec![0.0f64; cols];
        for (j, mean) in means.iter_mut().enumerate() {
            let mut sum = 0.0;
            let mut count = 0usize;
            for i in 0..rows {
                if !self.is_missing(i, j) {
                    sum += self.features.get(i, j);
                    count += 1;
                }
            }
            if count == 0 {
                return Err(Error::Imputation(self.schema.feature_names()[j].clone()));
            }
            *mean = sum / count as f64;
        }
        let features = Matrix::from_fn(rows, cols, |i, j| {
            if self.is_missing(i, j) {
                means[j]
            } else {
                self.features.get(i, j)
            }
        });
        Dataset::new(
            self.schema.clone(),
            features,
            self.labels.clone(),
            vec![false; rows * cols],
        )
    }

    /// Splits into `(train, test)` according to `spec`.
    ///
    /// Row membership is decided by a seeded shuffle; both sides keep the
    /// original row order. The same spec on the same dataset always yields
    /// the same split.
    pub fn split(&self, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
        spec.validate()?;
        let n = self.n_rows();
        if n < 2 {
            return Err(Error::Split(format!(
                "need at least 2 rows to split, have {n}"
            )));
        }
        let target = (spec.train_fraction * n as f64).round() as usize;
        if target == 0 || target >= n {
            return Err(Error::Split(format!(
                "train fraction {} of {n} rows leaves an empty side",
                spec.train_fraction
            )));
        }
        let mut rng = crate::seeding::stream_rng(spec.seed, 0);
        use rand::seq::SliceRandom;

        let mut in_train = vec![false; n];
        if spec.stratified {
            let mut pos: Vec<usize> = (0..n).filter(|&i| self.labels[i] == 1).collect();
            let mut neg: Vec<usize> = (0..n).filter(|&i| self.labels[i] == 0).collect();
            if pos.is_empty() || neg.is_empty() {
                return Err(Error::Split(
                    "stratified split requires at least one row of each class".to_string(),
                ));
            }
            // Per-class counts: round the positive share, give the rest to
            // the negatives, then clamp so neither class overflows. This
            // keeps each class's train share within one row of the requested
            // fraction while hitting the overall target exactly.
            let ideal_pos = (spec.train_fraction * pos.len() as f64).round() as usize;
            let min_pos = target.saturating_sub(neg.len());
            let max_pos = pos.len().min(target);
            let take_pos = ideal_pos.clamp(min_pos, max_pos);
            let take_neg = target - take_pos;
            pos.shuffle(&mut rng);
            neg.shuffle(&mut rng);
            for &i in pos.iter().take(take_pos).chain(neg.iter().take(take_neg)) {
                in_train[i] = true;
            }
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for &i in order.iter().take(target) {
                in_train[i] = true;
            }
        }

        let train_idx: Vec<usize> = (0..n).filter(|&i| in_train[i]).collect();
        let test_idx: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
        Ok((self.select_rows(&train_idx), self.select_rows(&test_idx)))
    }

    /// Renders the dataset as CSV text in schema order.
    ///
    /// Missing cells are written as empty fields; labels as `ckd`/`notckd`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for name in self.schema.feature_names() {
            out.push_str(name);
            out.push(',');
        }
        out.push_str(self.schema.label_name());
        out.push('\n');
        for i in 0..self.n_rows() {
            for j in 0..self.features.cols() {
                if !self.is_missing(i, j) {
                    let _ = write!(out, "{}", self.features.get(i, j));
                }
                out.push(',');
            }
            out.push_str(if self.labels[i] == 1 {
                POSITIVE_LABEL
            } else {
                NEGATIVE_LABEL
            });
            out.push('\n');
        }
        out
    }

    /// Writes [`Dataset::to_csv_string`] to a file.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// Parameters of a train/test split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    /// Fraction of rows assigned to the train side, strictly between 0 and 1.
    pub train_fraction: f64,
    pub seed: u64,
    /// Preserve the class ratio on both sides.
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must be strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

fn parse_sex(raw: &str) -> Option<f64> {
    match raw {
        "1" => Some(1.0),
        "0" => Some(0.0),
        _ => None,
    }
}

fn parse_label(raw: &str) -> Option<u8> {
    if raw == POSITIVE_LABEL {
        Some(1)
    } else if raw == NEGATIVE_LABEL {
        Some(0)
    } else {
        None
    }
}

/// Reads a CSV file against the given schema.
///
/// The header must contain exactly the schema's columns (any order); data
/// columns are reordered into schema order. Feature cells that are empty or
/// `?` count as missing. `Sex` must be `1` (male) or `0` (female); every
/// other feature must parse as a finite number; the label must be
/// `ckd` or `notckd`.
pub fn load_csv(path: &Path, schema: &DataSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .clone();
    let mut positions: HashMap<&str, usize> = HashMap::new();
    for (idx, name) in headers.iter().enumerate() {
        if positions.insert(name, idx).is_some() {
            return Err(Error::Schema(format!("duplicate column '{name}'")));
        }
    }
    let mut expected: Vec<&str> = schema.feature_names().iter().map(String::as_str).collect();
    expected.push(schema.label_name());
    for name in &expected {
        if !positions.contains_key(*name) {
            return Err(Error::Schema(format!("missing column '{name}'")));
        }
    }
    if positions.len() != expected.len() {
        let extra: Vec<&str> = headers
            .iter()
            .filter(|h| !expected.contains(h))
            .collect();
        return Err(Error::Schema(format!(
            "unexpected column '{}'",
            extra.first().unwrap_or(&"")
        )));
    }
    let feature_pos: Vec<usize> = schema
        .feature_names()
        .iter()
        .map(|n| positions[n.as_str()])
        .collect();
    let label_pos = positions[schema.label_name()];
    let sex_idx = schema.feature_index("Sex");

    let mut values: Vec<f64> = Vec::new();
    let mut missing: Vec<bool> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Schema(format!("row {row}: {e}")))?;
        if record.len() != expected.len() {
            return Err(Error::FieldCount {
                row,
                expected: expected.len(),
                found: record.len(),
            });
        }
        for (j, &pos) in feature_pos.iter().enumerate() {
            let raw = &record[pos];
            let column = schema.feature_names()[j].clone();
            if raw.is_empty() || raw == "?" {
                values.push(f64::NAN);
                missing.push(true);
                continue;
            }
            let value = if Some(j) == sex_idx {
                parse_sex(raw).ok_or_else(|| Error::Parse {
                    row,
                    column: column.clone(),
                    message: format!("expected 1 (male) or 0 (female), found '{raw}'"),
                })?
            } else {
                let v: f64 = raw.parse().map_err(|_| Error::Parse {
                    row,
                    column: column.clone(),
                    message: format!("not a number: '{raw}'"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column,
                        message: format!("not finite: '{raw}'"),
                    });
                }
                v
            };
            values.push(value);
            missing.push(false);
        }
        let raw_label = &record[label_pos];
        let label = parse_label(raw_label).ok_or_else(|| Error::Parse {
            row,
            column: schema.label_name().to_string(),
            message: format!("expected '{POSITIVE_LABEL}' or '{NEGATIVE_LABEL}', found '{raw_label}'"),
        })?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Input(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    let features = Matrix::from_vec(labels.len(), schema.feature_count(), values)?;
    Dataset::new(schema.clone(), features, labels, missing)
}

/// Column-wise standardization parameters fitted on a training split.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    means: Vec<f64>,
    divisors: Vec<f64>,
}

impl Standardizer {
    /// Fits per-column mean and population standard deviation.
    ///
    /// Constant columns get a divisor of 1 so they are centered only; their
    /// recorded mean is the constant itself, which keeps the transformed
    /// column exactly zero.
    pub fn fit(features: &Matrix) -> Result<Standardizer> {
        if !features.is_finite() {
            return Err(Error::Input(
                "cannot fit standardizer on non-finite features; impute first".to_string(),
            ));
        }
        let rows = features.rows();
        let cols = features.cols();
        let mut means = vec![0.0; cols];
        let mut divisors = vec![1.0; cols];
        for j in 0..cols {
            let col = features.col_vec(j);
            let constant = col.iter().all(|&v| v == col[0]);
            if constant {
                means[j] = col[0];
                divisors[j] = 1.0;
                continue;
            }
            let mean = col.iter().sum::<f64>() / rows as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / rows as f64;
            let std = var.sqrt();
            means[j] = mean;
            divisors[j] = if std == 0.0 { 1.0 } else { std };
        }
        Ok(Standardizer { means, divisors })
    }

    /// The no-op standardizer: zero means, unit divisors.
    pub fn identity(columns: usize) -> Standardizer {
        assert!(columns >= 1, "standardizer needs at least one column");
        Standardizer {
            means: vec![0.0; columns],
            divisors: vec![1.0; columns],
        }
    }

    pub fn from_parts(means: Vec<f64>, divisors: Vec<f64>) -> Result<Standardizer> {
        if means.len() != divisors.len() {
            return Err(Error::Shape {
                op: "standardizer",
                lhs: format!("{} means", means.len()),
                rhs: format!("{} divisors", divisors.len()),
            });
        }
        if means.iter().any(|v| !v.is_finite())
            || divisors.iter().any(|v| !v.is_finite() || *v <= 0.0)
        {
            return Err(Error::Input(
                "standardizer means must be finite and divisors finite and positive".to_string(),
            ));
        }
        Ok(Standardizer { means, divisors })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Per-column divisors: the population standard deviation, or 1 for
    /// columns that were constant at fit time.
    pub fn divisors(&self) -> &[f64] {
        &self.divisors
    }

    /// Applies `(x - mean) / divisor` column by column.
    pub fn transform(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.means.len() {
            return Err(Error::Shape {
                op: "standardize",
                lhs: format!("{}x{}", features.rows(), features.cols()),
                rhs: format!("{} columns", self.means.len()),
            });
        }
        Ok(Matrix::from_fn(features.rows(), features.cols(), |i, j| {
            (features.get(i, j) - self.means[j]) / self.divisors[j]
        }))
    }

    /// Inverts [`Standardizer::transform`]: `x * divisor + mean`.
    pub fn inverse_transform(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.means.len() {
            return Err(Error::Shape {
                op: "standardize",
                lhs: format!("{}x{}", features.rows(), features.cols()),
                rhs: format!("{} columns", self.means.len()),
            });
        }
        Ok(Matrix::from_fn(features.rows(), features.cols(), |i, j| {
            features.get(i, j) * self.divisors[j] + self.means[j]
        }))
    }

    /// Writes the fitted parameters to a small sidecar file.
    ///
    /// Values round-trip exactly, so a reloaded standardizer transforms
    /// bit-identically to the original.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "{STATS_MAGIC}");
        let _ = writeln!(out, "{}", join_line(&self.means));
        let _ = writeln!(out, "{}", join_line(&self.divisors));
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a sidecar written by [`Standardizer::save`].
    pub fn load(path: &Path) -> Result<Standardizer> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty standardizer file".to_string()))?;
        if header != STATS_MAGIC {
            return Err(Error::Format(format!(
                "unsupported header '{header}'; expected '{STATS_MAGIC}'"
            )));
        }
        let means = parse_line(
            lines
                .next()
                .ok_or_else(|| Error::Format("missing means line".to_string()))?,
            "means",
        )?;
        let divisors = parse_line(
            lines
                .next()
                .ok_or_else(|| Error::Format("missing divisors line".to_string()))?,
            "divisors",
        )?;
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::Format(
                "trailing content after the divisors line".to_string(),
            ));
        }
        if means.len() != divisors.len() {
            return Err(Error::Format(format!(
                "{} means but {} divisors",
                means.len(),
                divisors.len()
            )));
        }
        Standardizer::from_parts(means, divisors)
            .map_err(|e| Error::Format(format!("inconsistent standardizer: {e}")))
    }
}

fn join_line(values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out
}

fn parse_line(line: &str, what: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Format(format!("{what} line: unparsable number")))?;
    if values.is_empty() {
        return Err(Error::Format(format!("{what} line is empty")));
    }
    Ok(values)
}
