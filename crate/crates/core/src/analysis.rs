//! Descriptive analytics over MOS tables: dimension correlations, MBTI
//! grouping, topic tiers and per-level distributions.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{mbti_letter, to_feature_vector, Category, Dimension, Feature, MbtiAxis, RaterProfile, RatingRecord};
use crate::pipeline::MosTable;
use crate::stats::{self, FiveNumber, StatsError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("degenerate-input: {0}")]
    Degenerate(String),
    #[error("unknown-rater: {0}")]
    UnknownRater(String),
    #[error("unknown-dimension: {0}")]
    UnknownDimension(String),
}

impl AnalysisError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Degenerate(_) => "degenerate-input",
            Self::UnknownRater(_) => "unknown-rater",
            Self::UnknownDimension(_) => "unknown-dimension",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub dims: [Dimension; 3],
    pub values: [[f64; 3]; 3],
}

impl CorrelationMatrix {
    pub fn get(&self, a: Dimension, b: Dimension) -> f64 {
        let i = |d| self.dims.iter().position(|x| *x == d).expect("all dimensions present");
        self.values[i(a)][i(b)]
    }
}

/// Pairwise Pearson correlation of the scaled MOS over conditions that carry
/// all three dimensions.
pub fn dimension_correlations(table: &MosTable) -> Result<CorrelationMatrix, AnalysisError> {
    let dims = Dimension::ALL;
    let mut cols: [Vec<f64>; 3] = Default::default();
    for row in table.entries.values() {
        if dims.iter().all(|d| row.contains_key(d)) {
            for (k, d) in dims.iter().enumerate() {
                cols[k].push(row[d].mos_scaled);
            }
        }
    }
    if cols[0].len() < 2 {
        return Err(AnalysisError::Degenerate("fewer than two complete conditions".into()));
    }
    let mut values = [[1.0; 3]; 3];
    for i in 0..3 {
        for j in i + 1..3 {
            let r = stats::pearson(&cols[i], &cols[j]).map_err(|_: StatsError| {
                AnalysisError::Degenerate(format!("constant column among {} / {}", dims[i], dims[j]))
            })?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { dims, values })
}

/// PCA input rows: the five features of each condition followed by its
/// scaled MOS on `dim`.
pub fn pca_samples(table: &MosTable, dim: Dimension) -> Vec<[f64; 6]> {
    table
        .entries
        .iter()
        .filter_map(|(c, row)| {
            let e = row.get(&dim)?;
            let x = to_feature_vector(c.content, c.qos).0;
            Some([x[0], x[1], x[2], x[3], x[4], e.mos_scaled])
        })
        .collect()
}

/// Records split by the raters' letter on one MBTI axis.
#[derive(Debug, Clone, PartialEq)]
pub struct MbtiGroups {
    pub axis: MbtiAxis,
    /// `(letter, records)` for the axis' first and second letter.
    pub groups: [(char, Vec<RatingRecord>); 2],
}

pub fn group_by_mbti(
    records: &[RatingRecord],
    profiles: &[RaterProfile],
    axis: MbtiAxis,
) -> Result<MbtiGroups, AnalysisError> {
    let by_id: BTreeMap<&str, &RaterProfile> = profiles.iter().map(|p| (p.rater_id.as_str(), p)).collect();
    let [a, b] = axis.letters();
    let mut groups = [(a, Vec::new()), (b, Vec::new())];
    for r in records {
        let profile = by_id
            .get(r.rater_id.as_str())
            .ok_or_else(|| AnalysisError::UnknownRater(r.rater_id.clone()))?;
        let letter = mbti_letter(&profile.mbti, axis).ok_or_else(|| AnalysisError::UnknownRater(r.rater_id.clone()))?;
        let slot = usize::from(letter != a);
        groups[slot].1.push(r.clone());
    }
    Ok(MbtiGroups { axis, groups })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    High,
    Mid,
    Low,
}

impl Tier {
    /// Both boundaries belong to the mid tier.
    pub fn of(mos: f64) -> Self {
        if mos > 4.0 {
            Self::High
        } else if mos >= 2.0 {
            Self::Mid
        } else {
            Self::Low
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::High => "high",
            Self::Mid => "mid",
            Self::Low => "low",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierRow {
    pub tier: Tier,
    pub category: Category,
    pub mean_mos: f64,
    pub n: usize,
}

/// Mean MOS per (tier, category). Tiers or categories without samples are
/// absent from the output.
pub fn topic_tiers(samples: &[(Category, f64)]) -> Vec<TierRow> {
    let mut acc: BTreeMap<(Tier, Category), (f64, usize)> = BTreeMap::new();
    for &(cat, mos) in samples {
        let e = acc.entry((Tier::of(mos), cat)).or_insert((0.0, 0));
        e.0 += mos;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|((tier, category), (s, n))| TierRow { tier, category, mean_mos: s / n as f64, n })
        .collect()
}

/// Overall MOS of every condition paired with its question's category.
/// Conditions whose question has no known category are skipped.
pub fn tier_samples(table: &MosTable, categories: &BTreeMap<String, Category>) -> Vec<(Category, f64)> {
    table
        .entries
        .iter()
        .filter_map(|(c, row)| Some((*categories.get(&c.question_id)?, row.get(&Dimension::Overall)?.mos_scaled)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: String,
    pub samples: Vec<f64>,
    pub summary: FiveNumber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionExport {
    pub key: Feature,
    pub dimension: Dimension,
    pub levels: Vec<LevelSummary>,
    pub warnings: Vec<String>,
}

/// Table 1 level id of a feature value, e.g. `A1`, `S0.05`, `P0.0`, `T3`.
pub fn level_label(key: Feature, value: f64) -> String {
    match key {
        Feature::Density => format!("D{}", value as u8),
        Feature::Accuracy => format!("A{}", value as u8),
        Feature::Speed => format!("S{value:?}"),
        Feature::PausePos => format!("P{value:?}"),
        Feature::PauseDur => format!("T{value}"),
    }
}

fn standard_levels(key: Feature) -> &'static [f64] {
    match key {
        Feature::Density | Feature::Accuracy => &[0.0, 1.0],
        Feature::Speed => &[0.01, 0.05, 0.1],
        Feature::PausePos => &[0.0, 0.25, 0.5, 0.75],
        Feature::PauseDur => &[3.0, 5.0, 7.0],
    }
}

/// Per-level samples of one dimension's scaled MOS, grouped by `key`.
///
/// The standard levels are always considered, in grid order; a standard
/// level without samples is omitted with a warning. Values outside the
/// standard grid get their own levels after the standard ones.
pub fn distribution_export(table: &MosTable, key: &str, dimension: Dimension) -> Result<DistributionExport, AnalysisError> {
    let key = Feature::parse(key).ok_or_else(|| AnalysisError::UnknownDimension(key.into()))?;
    let mut buckets: Vec<(f64, Vec<f64>)> = standard_levels(key).iter().map(|&v| (v, Vec::new())).collect();
    for (c, row) in &table.entries {
        let Some(e) = row.get(&dimension) else { continue };
        let v = to_feature_vector(c.content, c.qos).get(key);
        match buckets.iter_mut().find(|(lv, _)| *lv == v) {
            Some((_, s)) => s.push(e.mos_scaled),
            None => buckets.push((v, alloc::vec![e.mos_scaled])),
        }
    }
    let n_standard = standard_levels(key).len();
    buckets[n_standard..].sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut levels = Vec::new();
    let mut warnings = Vec::new();
    for (v, samples) in buckets {
        let level = level_label(key, v);
        match stats::five_number(&samples) {
            Some(summary) => levels.push(LevelSummary { level, samples, summary }),
            None => warnings.push(format!("level {level} has no samples")),
        }
    }
    Ok(DistributionExport { key, dimension, levels, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{scores, ConditionId, ContentConfig, Grid, Language, QosConfig};
    use crate::pipeline::MosEntry;
    use alloc::vec;

    fn table_from(rows: &[(ContentConfig, QosConfig, [f64; 3])]) -> MosTable {
        let mut t = MosTable::default();
        for (i, (content, qos, m)) in rows.iter().enumerate() {
            let cond = ConditionId { question_id: format!("q{i}"), content: *content, qos: *qos };
            let row = Dimension::ALL
                .iter()
                .zip(m)
                .map(|(d, v)| (*d, MosEntry { mos_z: *v, mos_scaled: *v, n_valid: 1 }))
                .collect();
            t.entries.insert(cond, row);
        }
        t
    }

    fn grid_rows(f: impl Fn(usize) -> [f64; 3]) -> Vec<(ContentConfig, QosConfig, [f64; 3])> {
        Grid::standard().combinations().into_iter().enumerate().map(|(i, (c, q))| (c, q, f(i))).collect()
    }

    #[test]
    fn identical_columns_correlate_perfectly() {
        let t = table_from(&grid_rows(|i| [i as f64, i as f64, ((i * 7) % 11) as f64]));
        let m = dimension_correlations(&t).unwrap();
        assert!((m.get(Dimension::Overall, Dimension::Content) - 1.0).abs() < 1e-12);
        for i in 0..3 {
            assert_eq!(m.values[i][i], 1.0);
        }
        assert_eq!(m.values[0][2], m.values[2][0]);
    }

    #[test]
    fn constant_column_is_degenerate() {
        let t = table_from(&grid_rows(|i| [i as f64, 1.0, 2.0]));
        assert_eq!(dimension_correlations(&t).unwrap_err().code(), "degenerate-input");
    }

    fn rec(rater: &str) -> RatingRecord {
        let (content, qos) = Grid::standard().combinations()[0];
        RatingRecord {
            session_id: "s".into(),
            rater_id: rater.into(),
            question_id: "q".into(),
            category: Category::CreativeTasks,
            content,
            qos,
            scores: scores(3, 3, 3),
            timestamp: chrono::DateTime::from_timestamp_millis(0).unwrap(),
        }
    }

    fn profile(id: &str, mbti: &str) -> RaterProfile {
        RaterProfile { rater_id: id.into(), language: Language::En, mbti: mbti.into(), patience: 3, sessions_completed: 0 }
    }

    #[test]
    fn mbti_partition() {
        let records = vec![rec("a"), rec("b"), rec("a"), rec("b"), rec("b")];
        let profiles = [profile("a", "ENTP"), profile("b", "INFP")];
        let g = group_by_mbti(&records, &profiles, MbtiAxis::EI).unwrap();
        assert_eq!(g.groups[0].0, 'E');
        assert_eq!(g.groups[0].1.len(), 2);
        assert_eq!(g.groups[1].0, 'I');
        assert_eq!(g.groups[1].1.len(), 3);
        let g = group_by_mbti(&records, &profiles, MbtiAxis::SN).unwrap();
        assert_eq!(g.groups[1].1.len(), 5);
        let err = group_by_mbti(&[rec("zz")], &profiles, MbtiAxis::EI).unwrap_err();
        assert_eq!(err.code(), "unknown-rater");
    }

    #[test]
    fn tiers() {
        let all_high = topic_tiers(&[(Category::CreativeTasks, 4.5), (Category::KnowledgeReasoning, 4.5)]);
        assert!(all_high.iter().all(|r| r.tier == Tier::High));
        assert_eq!(all_high.len(), 2);

        let rows = topic_tiers(&[(Category::CreativeTasks, 1.0), (Category::CreativeTasks, 3.0), (Category::CreativeTasks, 4.5)]);
        let got: Vec<(Tier, f64)> = rows.iter().map(|r| (r.tier, r.mean_mos)).collect();
        assert_eq!(got, vec![(Tier::High, 4.5), (Tier::Mid, 3.0), (Tier::Low, 1.0)]);

        assert_eq!(Tier::of(4.0), Tier::Mid);
        assert_eq!(Tier::of(2.0), Tier::Mid);
        assert_eq!(Tier::of(1.999), Tier::Low);
    }

    #[test]
    fn distribution_levels() {
        let t = table_from(&grid_rows(|i| [i as f64, 0.0, 0.0]));
        let d = distribution_export(&t, "accuracy", Dimension::Overall).unwrap();
        let labels: Vec<&str> = d.levels.iter().map(|l| l.level.as_str()).collect();
        assert_eq!(labels, ["A0", "A1"]);
        let s = distribution_export(&t, "speed", Dimension::Overall).unwrap();
        let labels: Vec<&str> = s.levels.iter().map(|l| l.level.as_str()).collect();
        assert_eq!(labels, ["S0.01", "S0.05", "S0.1"]);
        let p = distribution_export(&t, "pause_pos", Dimension::Overall).unwrap();
        assert_eq!(p.levels[0].level, "P0.0");
        let d = distribution_export(&t, "pause_dur", Dimension::Overall).unwrap();
        assert_eq!(d.levels[2].level, "T7");
        assert_eq!(distribution_export(&t, "colour", Dimension::Overall).unwrap_err().code(), "unknown-dimension");
    }

    #[test]
    fn empty_level_warns() {
        let rows: Vec<_> = grid_rows(|_| [1.0, 1.0, 1.0]).into_iter().filter(|(c, _, _)| c.accuracy == 1).collect();
        let t = table_from(&rows);
        let d = distribution_export(&t, "accuracy", Dimension::Overall).unwrap();
        assert_eq!(d.levels.len(), 1);
        assert_eq!(d.warnings.len(), 1);
    }

    #[test]
    fn five_number_of_one_to_five() {
        let f = stats::five_number(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((f.min, f.q1, f.median, f.q3, f.max), (1.0, 2.0, 3.0, 4.0, 5.0));
    }
}
