use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{to_feature_vector, Category, Dimension, Feature, FeatureVector, PipelineParams, RatingRecord};
use crate::pipeline::{self, Anchors, PipelineError};

use super::PredictorError;

/// Which features a model sees. Masked-out features stay in the rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureMask(pub [bool; 5]);

impl Default for FeatureMask {
    fn default() -> Self {
        Self::all()
    }
}

impl FeatureMask {
    pub fn all() -> Self {
        Self([true; 5])
    }

    pub fn without(self, f: Feature) -> Self {
        let mut m = self.0;
        m[f.index()] = false;
        Self(m)
    }

    pub fn contains(&self, f: Feature) -> bool {
        self.0[f.index()]
    }

    pub fn active(&self) -> impl Iterator<Item = Feature> + '_ {
        Feature::ALL.into_iter().filter(|f| self.contains(*f))
    }

    pub fn width(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn apply(&self, x: &FeatureVector) -> Vec<f64> {
        self.active().map(|f| x.get(f)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub features: FeatureVector,
    pub target: f64,
    pub question_id: String,
    pub category: Category,
    pub dimension: Dimension,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
    pub feature_mask: FeatureMask,
}

/// What a row's target is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    /// One row per surviving rating; target is the rater's z-score.
    #[default]
    Record,
    /// One row per condition; target is the rescaled MOS.
    Mos,
}

/// How targets were derived, stored with fitted models so evaluation
/// rebuilds targets the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub mode: TargetMode,
    pub dimension: Dimension,
    pub params: PipelineParams,
    /// Frozen MOS anchors of the training data (MOS mode only).
    pub anchors: Option<Anchors>,
}

impl TargetSpec {
    pub fn new(mode: TargetMode, dimension: Dimension) -> Self {
        Self { mode, dimension, params: PipelineParams::default(), anchors: None }
    }
}

impl Dataset {
    pub fn new(rows: Vec<DatasetRow>) -> Self {
        Self { rows, feature_mask: FeatureMask::all() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn with_mask(mut self, mask: FeatureMask) -> Self {
        self.feature_mask = mask;
        self
    }

    /// Model inputs with the mask applied.
    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| self.feature_mask.apply(&r.features)).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }

    pub fn question_ids(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.question_id.as_str()).collect()
    }

    fn subset(&self, keep: impl Fn(&DatasetRow) -> bool) -> Dataset {
        Dataset {
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
            feature_mask: self.feature_mask,
        }
    }

    /// Cleans `records` and derives targets according to `spec`.
    ///
    /// Returns the dataset and the MOS anchors of this data. When
    /// `spec.anchors` is set, MOS targets are mapped with those instead.
    pub fn from_ratings(records: &[RatingRecord], spec: &TargetSpec) -> Result<(Dataset, Anchors), PipelineError> {
        let (table, report) = match &spec.anchors {
            Some(a) => pipeline::run_pipeline_with_anchors(records, &spec.params, a)?,
            None => pipeline::run_pipeline(records, &spec.params)?,
        };
        let rows = match spec.mode {
            TargetMode::Record => {
                let survivors = pipeline::surviving_records(records, &report);
                let normalized = pipeline::zscore_normalize(&survivors);
                survivors
                    .iter()
                    .zip(normalized.chunks(Dimension::ALL.len()))
                    .filter_map(|(r, zs)| {
                        let z = zs.iter().find(|n| n.dimension == spec.dimension)?.z;
                        Some(DatasetRow {
                            features: to_feature_vector(r.content, r.qos),
                            target: z,
                            question_id: r.question_id.clone(),
                            category: r.category,
                            dimension: spec.dimension,
                        })
                    })
                    .collect()
            }
            TargetMode::Mos => {
                let categories: BTreeMap<&str, Category> =
                    records.iter().map(|r| (r.question_id.as_str(), r.category)).collect();
                table
                    .iter()
                    .filter(|(_, d, _)| *d == spec.dimension)
                    .map(|(c, d, e)| DatasetRow {
                        features: to_feature_vector(c.content, c.qos),
                        target: e.mos_scaled,
                        question_id: c.question_id.clone(),
                        category: categories[c.question_id.as_str()],
                        dimension: d,
                    })
                    .collect()
            }
        };
        Ok((Dataset::new(rows), table.anchors))
    }
}

/// Holds out one seeded-random question per category; every row of a held
/// out question goes to the test set.
pub fn split_by_category(dataset: &Dataset, seed: u64) -> Result<(Dataset, Dataset), PredictorError> {
    let mut by_category: BTreeMap<Category, BTreeSet<&str>> = BTreeMap::new();
    for r in &dataset.rows {
        by_category.entry(r.category).or_default().insert(r.question_id.as_str());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held_out: BTreeSet<String> = BTreeSet::new();
    for (category, questions) in &by_category {
        if questions.len() < 2 {
            return Err(PredictorError::CategoryTooSmall(*category));
        }
        let pick = rng.random_range(0..questions.len());
        held_out.insert(String::from(*questions.iter().nth(pick).expect("index in range")));
    }
    let test = dataset.subset(|r| held_out.contains(&r.question_id));
    let train = dataset.subset(|r| !held_out.contains(&r.question_id));
    assert!(train.question_ids().is_disjoint(&test.question_ids()));
    Ok((train, test))
}
