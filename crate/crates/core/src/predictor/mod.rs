//! Regressions from the five controllable parameters to subjective scores,
//! with the per-category hold-out split, rank/linear metrics and feature
//! ablation.

mod dataset;
pub mod forest;
pub mod knn;
pub mod linear;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub use dataset::{split_by_category, Dataset, DatasetRow, FeatureMask, TargetMode, TargetSpec};
pub use forest::{ForestConfig, ForestModel};
pub use knn::KnnModel;
pub use linear::LinearModel;

use crate::model::{Category, Feature, FeatureVector};
use crate::stats;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictorError {
    #[error("category-too-small: {0} has fewer than two questions")]
    CategoryTooSmall(Category),
    #[error("empty-train: no training rows")]
    EmptyTrain,
    #[error("singular-system: normal equations are singular (ridge = 0)")]
    SingularSystem,
    #[error("mask-mismatch: model expects {expected} features, got {found}")]
    MaskMismatch { expected: usize, found: usize },
    #[error("degenerate-test: {0}")]
    DegenerateTest(&'static str),
}

impl PredictorError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::CategoryTooSmall(_) => "category-too-small",
            Self::EmptyTrain => "empty-train",
            Self::SingularSystem => "singular-system",
            Self::MaskMismatch { .. } => "mask-mismatch",
            Self::DegenerateTest(_) => "degenerate-test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    LinearRidge,
    Knn,
    TreeEnsemble,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [ModelFamily::LinearRidge, ModelFamily::Knn, ModelFamily::TreeEnsemble];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::LinearRidge => "linear-ridge",
            Self::Knn => "knn",
            Self::TreeEnsemble => "tree-ensemble",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub ridge_lambda: f64,
    pub knn_k: usize,
    pub forest: ForestConfig,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self { ridge_lambda: 1e-6, knn_k: 5, forest: ForestConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedParams {
    Linear(LinearModel),
    Knn(KnnModel),
    Forest(ForestModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingFingerprint {
    pub seed: u64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorModel {
    pub family: ModelFamily,
    pub params: FittedParams,
    pub feature_mask: FeatureMask,
    pub fingerprint: TrainingFingerprint,
    /// How training targets were built, when trained from ratings.
    pub target: Option<TargetSpec>,
}

impl PredictorModel {
    /// A linear model with given weights over the masked features.
    pub fn linear(weights: Vec<f64>, intercept: f64, feature_mask: FeatureMask) -> Self {
        Self {
            family: ModelFamily::LinearRidge,
            params: FittedParams::Linear(LinearModel { weights, intercept }),
            feature_mask,
            fingerprint: TrainingFingerprint { seed: 0, rows: 0 },
            target: None,
        }
    }

    fn raw(&self, x: &[f64]) -> f64 {
        match &self.params {
            FittedParams::Linear(m) => m.predict(x),
            FittedParams::Knn(m) => m.predict(x),
            FittedParams::Forest(m) => m.predict(x),
        }
    }
}

pub fn train(family: ModelFamily, train: &Dataset, hyper: &Hyperparameters, seed: u64) -> Result<PredictorModel, PredictorError> {
    if train.is_empty() {
        return Err(PredictorError::EmptyTrain);
    }
    let inputs = train.inputs();
    let targets = train.targets();
    let params = match family {
        ModelFamily::LinearRidge => FittedParams::Linear(linear::fit(&inputs, &targets, hyper.ridge_lambda)?),
        ModelFamily::Knn => FittedParams::Knn(KnnModel::fit(&inputs, &targets, hyper.knn_k)),
        ModelFamily::TreeEnsemble => FittedParams::Forest(ForestModel::fit(&inputs, &targets, &hyper.forest, seed)),
    };
    Ok(PredictorModel {
        family,
        params,
        feature_mask: train.feature_mask,
        fingerprint: TrainingFingerprint { seed, rows: train.len() },
        target: None,
    })
}

/// Predicts from features already reduced to the model's mask.
pub fn predict(model: &PredictorModel, features: &[f64]) -> Result<f64, PredictorError> {
    let expected = model.feature_mask.width();
    if features.len() != expected {
        return Err(PredictorError::MaskMismatch { expected, found: features.len() });
    }
    Ok(model.raw(features))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub raw: f64,
    /// `raw` clamped to the [0, 5] MOS scale.
    pub clamped: f64,
}

/// Predicts from a full feature vector, applying the model's mask.
pub fn predict_full(model: &PredictorModel, x: &FeatureVector) -> Prediction {
    let raw = model.raw(&model.feature_mask.apply(x));
    Prediction { raw, clamped: raw.clamp(0.0, 5.0) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub srcc: f64,
    pub plcc: f64,
    pub krcc: f64,
    pub rmse: f64,
}

/// Agreement between predictions and targets. A coefficient whose input
/// has one constant side is reported as 0.
pub fn metrics(predictions: &[f64], targets: &[f64]) -> Result<MetricsBundle, PredictorError> {
    if predictions.is_empty() {
        return Err(PredictorError::DegenerateTest("empty test set"));
    }
    let constant = |xs: &[f64]| xs.iter().all(|v| *v == xs[0]);
    if constant(predictions) && constant(targets) {
        return Err(PredictorError::DegenerateTest("predictions and targets are both constant"));
    }
    if predictions.len() < 2 {
        return Err(PredictorError::DegenerateTest("need at least two test rows"));
    }
    Ok(MetricsBundle {
        srcc: stats::spearman(predictions, targets).unwrap_or(0.0),
        plcc: stats::pearson(predictions, targets).unwrap_or(0.0),
        krcc: stats::kendall(predictions, targets).unwrap_or(0.0),
        rmse: stats::rmse(predictions, targets),
    })
}

pub fn evaluate(model: &PredictorModel, test: &Dataset) -> Result<MetricsBundle, PredictorError> {
    let predictions: Vec<f64> = test.rows.iter().map(|r| predict_full(model, &r.features).raw).collect();
    metrics(&predictions, &test.targets())
}

/// Evaluates on records from configurations never seen in training.
pub fn verify_held_out(model: &PredictorModel, new_grid: &Dataset) -> Result<MetricsBundle, PredictorError> {
    evaluate(model, new_grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `None` for the full-feature model.
    pub dropped: Option<Feature>,
    pub metrics: MetricsBundle,
}

impl AblationRow {
    pub fn label(&self) -> String {
        String::from(self.dropped.map_or("none", |f| f.as_str()))
    }
}

/// Full-feature run followed by one run per dropped feature, all on the
/// same split and seed.
pub fn ablate(dataset: &Dataset, family: ModelFamily, hyper: &Hyperparameters, seed: u64) -> Result<Vec<AblationRow>, PredictorError> {
    let masks = core::iter::once((None, FeatureMask::all()))
        .chain(Feature::ALL.into_iter().map(|f| (Some(f), FeatureMask::all().without(f))));
    masks
        .map(|(dropped, mask)| {
            let masked = dataset.clone().with_mask(mask);
            let (tr, te) = split_by_category(&masked, seed)?;
            let model = train(family, &tr, hyper, seed)?;
            Ok(AblationRow { dropped, metrics: evaluate(&model, &te)? })
        })
        .collect()
}
