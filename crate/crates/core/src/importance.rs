//! Permutation feature importance.
//!
//! A feature matters to a model if shuffling that feature's column (and
//! nothing else) hurts the model's score. Each feature is permuted
//! `repeats` times with independent seeded substreams; the importance is
//! the mean score degradation and its spread across repeats.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{bce_loss, MlpModel};
use crate::seeding::stream_rng;

/// How degradation is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scoring {
    /// Baseline accuracy minus permuted accuracy (threshold 0.5).
    AccuracyDrop,
    /// Permuted cross-entropy minus baseline cross-entropy.
    LossIncrease,
}

/// One feature's aggregated importance.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureImportance {
    pub feature: String,
    /// Mean degradation over repeats.
    pub score: f64,
    /// Population standard deviation of the degradation over repeats.
    pub stddev: f64,
}

/// All features ranked by importance.
#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceReport {
    pub scoring: Scoring,
    /// The unpermuted model score (accuracy or loss, per `scoring`).
    pub baseline: f64,
    /// Sorted by descending score; features that tie keep schema order.
    pub features: Vec<FeatureImportance>,
}

impl ImportanceReport {
    /// Renders `rank,feature,score,stddev` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,feature,score,stddev\n");
        for (i, f) in self.features.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", i + 1, f.feature, f.score, f.stddev);
        }
        out
    }

    /// Writes [`ImportanceReport::to_csv`] to a file.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Feature names in rank order.
    pub fn ranking(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.feature.as_str()).collect()
    }
}

fn model_score(
    model: &MlpModel,
    features: &Matrix,
    labels: &[u8],
    scoring: Scoring,
) -> Result<f64> {
    let scores = model.forward(features)?;
    match scoring {
        Scoring::AccuracyDrop => {
            let correct = (0..scores.rows())
                .filter(|&i| u8::from(scores.get(i, 0) >= 0.5) == labels[i])
                .count();
            Ok(correct as f64 / labels.len() as f64)
        }
        Scoring::LossIncrease => bce_loss(&scores, labels),
    }
}

/// Permutation importance with the default accuracy-drop scoring.
pub fn permutation_importance(
    model: &MlpModel,
    data: &Dataset,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    permutation_importance_with(model, data, repeats, seed, Scoring::AccuracyDrop)
}

/// Permutation importance with an explicit scoring rule.
///
/// The permutation of feature `f` in repeat `r` is drawn from substream
/// `(f << 32) | r` of `seed`, so every (feature, repeat) pair is independent
/// and the whole computation is reproducible.
pub fn permutation_importance_with(
    model: &MlpModel,
    data: &Dataset,
    repeats: usize,
    seed: u64,
    scoring: Scoring,
) -> Result<ImportanceReport> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".to_string()));
    }
    if repeats > u32::MAX as usize {
        return Err(Error::Config(format!(
            "repeats must fit in 32 bits, got {repeats}"
        )));
    }
    if data.missing_count() > 0 {
        return Err(Error::Input(
            "importance data contains missing values; impute first".to_string(),
        ));
    }
    if model.input_dim() != data.features().cols() {
        return Err(Error::Shape {
            op: "importance",
            lhs: format!("model with {} inputs", model.input_dim()),
            rhs: format!("{} feature columns", data.features().cols()),
        });
    }
    let features = data.features();
    let labels = data.labels();
    let baseline = model_score(model, features, labels, scoring)?;

    use rand::seq::SliceRandom;
    let mut ranked = Vec::with_capacity(data.schema().feature_count());
    for (f, name) in data.schema().feature_names().iter().enumerate() {
        let mut drops = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let stream = ((f as u64) << 32) | r as u64;
            let mut rng = stream_rng(seed, stream);
            let mut column = features.col_vec(f);
            column.shuffle(&mut rng);
            let mut permuted = features.clone();
            for (i, v) in column.into_iter().enumerate() {
                permuted.set(i, f, v);
            }
            let permuted_score = model_score(model, &permuted, labels, scoring)?;
            drops.push(match scoring {
                Scoring::AccuracyDrop => baseline - permuted_score,
                Scoring::LossIncrease => permuted_score - baseline,
            });
        }
        let mean = drops.iter().sum::<f64>() / repeats as f64;
        let var = drops.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / repeats as f64;
        ranked.push(FeatureImportance {
            feature: name.clone(),
            score: mean,
            stddev: var.sqrt(),
        });
    }
    // Stable sort: equal scores keep their schema order.
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(ImportanceReport {
        scoring,
        baseline,
        features: ranked,
    })
}
