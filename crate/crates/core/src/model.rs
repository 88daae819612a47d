//! Shared domain types for rating studies over streamed text answers.
//!
//! Everything here is an immutable value once constructed. Validation is
//! explicit (`validate` / `validate_record`) because records arrive from
//! untrusted JSON and must be rejected with a precise reason rather than a
//! generic decode failure.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::hash::{Hash, Hasher};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Lowest admissible integer rating.
pub const SCORE_MIN: i32 = 1;
/// Highest admissible integer rating.
pub const SCORE_MAX: i32 = 5;
/// A rater may take part in at most this many sessions.
pub const MAX_SESSIONS_PER_RATER: u32 = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("score-out-of-range: {dimension} = {value} (expected {SCORE_MIN}..={SCORE_MAX})")]
    ScoreOutOfRange { dimension: Dimension, value: i32 },
    #[error("missing-dimension: {0}")]
    MissingDimension(Dimension),
    #[error("unknown-question: {0}")]
    UnknownQuestion(String),
    #[error("bad-mbti: {0:?}")]
    BadMbti(String),
    #[error("bad-patience: {0} (expected 1..=5)")]
    BadPatience(u8),
    #[error("bad-qos: {0}")]
    BadQos(&'static str),
    #[error("bad-content: {0}")]
    BadContent(&'static str),
    #[error("bad-grid: {0}")]
    BadGrid(&'static str),
    #[error("bad-fixture: {0}")]
    BadFixture(String),
    #[error("bad-params: {0}")]
    BadParams(&'static str),
}

impl ValidationError {
    /// Stable machine-readable code, used in service error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Self::ScoreOutOfRange { .. } => "score-out-of-range",
            Self::MissingDimension(_) => "missing-dimension",
            Self::UnknownQuestion(_) => "unknown-question",
            Self::BadMbti(_) => "bad-mbti",
            Self::BadPatience(_) => "bad-patience",
            Self::BadQos(_) => "bad-qos",
            Self::BadContent(_) => "bad-content",
            Self::BadGrid(_) => "bad-grid",
            Self::BadFixture(_) => "bad-fixture",
            Self::BadParams(_) => "bad-params",
        }
    }
}

/// Service-quality tuple governing stream timing.
///
/// `speed_s_per_token` is seconds per emitted token (not tokens per second).
/// Equality and ordering use `f64::total_cmp` so configs can key maps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QosConfig {
    pub speed_s_per_token: f64,
    pub pause_pos: f64,
    pub pause_dur_s: f64,
}

impl QosConfig {
    pub fn new(speed_s_per_token: f64, pause_pos: f64, pause_dur_s: f64) -> Result<Self, ValidationError> {
        let qos = Self { speed_s_per_token, pause_pos, pause_dur_s };
        qos.validate()?;
        Ok(qos)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if !(self.speed_s_per_token.is_finite() && self.speed_s_per_token > 0.0) {
            return Err(ValidationError::BadQos("speed_s_per_token must be > 0"));
        }
        if !(self.pause_pos >= 0.0 && self.pause_pos < 1.0) {
            return Err(ValidationError::BadQos("pause_pos must lie in [0, 1)"));
        }
        if !(self.pause_dur_s.is_finite() && self.pause_dur_s >= 0.0) {
            return Err(ValidationError::BadQos("pause_dur_s must be >= 0"));
        }
        Ok(())
    }

    /// True when every component is one of the levels of [`Grid::standard`].
    pub fn is_standard_grid(&self) -> bool {
        let g = Grid::standard();
        g.speeds.contains(&self.speed_s_per_token)
            && g.pause_positions.contains(&self.pause_pos)
            && g.pause_durations.contains(&self.pause_dur_s)
    }

    fn key(&self) -> [f64; 3] {
        [self.speed_s_per_token, self.pause_pos, self.pause_dur_s]
    }
}

impl PartialEq for QosConfig {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QosConfig {}

impl PartialOrd for QosConfig {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QosConfig {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    }
}

impl Hash for QosConfig {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for v in self.key() {
            v.to_bits().hash(state);
        }
    }
}

/// Binary content-quality tuple: information density and content accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContentConfig {
    pub density: u8,
    pub accuracy: u8,
}

impl ContentConfig {
    pub const ALL: [ContentConfig; 4] = [
        ContentConfig { density: 0, accuracy: 0 },
        ContentConfig { density: 0, accuracy: 1 },
        ContentConfig { density: 1, accuracy: 0 },
        ContentConfig { density: 1, accuracy: 1 },
    ];

    pub fn new(density: u8, accuracy: u8) -> Result<Self, ValidationError> {
        let c = Self { density, accuracy };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.density > 1 {
            return Err(ValidationError::BadContent("density must be 0 or 1"));
        }
        if self.accuracy > 1 {
            return Err(ValidationError::BadContent("accuracy must be 0 or 1"));
        }
        Ok(())
    }
}

/// One of the three rating dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Overall,
    Content,
    Response,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Overall, Dimension::Content, Dimension::Response];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Overall => "overall",
            Self::Content => "content",
            Self::Response => "response",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.as_str() == s)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The five dialogue topics questions are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    KnowledgeReasoning,
    CreativeTasks,
    LifestyleEntertainment,
    EmpathyPersonalGrowth,
    SocietyProfessionalDevelopment,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::KnowledgeReasoning,
        Category::CreativeTasks,
        Category::LifestyleEntertainment,
        Category::EmpathyPersonalGrowth,
        Category::SocietyProfessionalDevelopment,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::KnowledgeReasoning => "knowledge_reasoning",
            Self::CreativeTasks => "creative_tasks",
            Self::LifestyleEntertainment => "lifestyle_entertainment",
            Self::EmpathyPersonalGrowth => "empathy_personal_growth",
            Self::SocietyProfessionalDevelopment => "society_professional_development",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Zh,
    En,
}

/// One of the four MBTI axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MbtiAxis {
    #[serde(rename = "EI")]
    EI,
    #[serde(rename = "SN")]
    SN,
    #[serde(rename = "TF")]
    TF,
    #[serde(rename = "JP")]
    JP,
}

impl MbtiAxis {
    pub const ALL: [MbtiAxis; 4] = [MbtiAxis::EI, MbtiAxis::SN, MbtiAxis::TF, MbtiAxis::JP];

    /// The two letters of the axis, in code order.
    pub fn letters(&self) -> [char; 2] {
        match self {
            Self::EI => ['E', 'I'],
            Self::SN => ['S', 'N'],
            Self::TF => ['T', 'F'],
            Self::JP => ['J', 'P'],
        }
    }

    fn position(&self) -> usize {
        *self as usize
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EI" | "E/I" | "IE" => Some(Self::EI),
            "SN" | "S/N" | "NS" => Some(Self::SN),
            "TF" | "T/F" | "FT" => Some(Self::TF),
            "JP" | "J/P" | "PJ" => Some(Self::JP),
            _ => None,
        }
    }
}

/// Validates a four-letter MBTI code, returning it uppercased.
pub fn parse_mbti(code: &str) -> Result<[char; 4], ValidationError> {
    let chars: Vec<char> = code.chars().collect();
    if chars.len() != 4 {
        return Err(ValidationError::BadMbti(code.to_string()));
    }
    let mut out = ['?'; 4];
    for (axis, (slot, c)) in MbtiAxis::ALL.iter().zip(out.iter_mut().zip(chars)) {
        let c = c.to_ascii_uppercase();
        if !axis.letters().contains(&c) {
            return Err(ValidationError::BadMbti(code.to_string()));
        }
        *slot = c;
    }
    Ok(out)
}

/// Letter of `code` on `axis`, or `None` if the code is malformed.
pub fn mbti_letter(code: &str, axis: MbtiAxis) -> Option<char> {
    parse_mbti(code).ok().map(|letters| letters[axis.position()])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaterProfile {
    #[serde(default)]
    pub rater_id: String,
    pub language: Language,
    pub mbti: String,
    pub patience: u8,
    #[serde(default)]
    pub sessions_completed: u32,
}

impl RaterProfile {
    pub fn validate(&self) -> Result<(), ValidationError> {
        parse_mbti(&self.mbti)?;
        if !(1..=5).contains(&self.patience) {
            return Err(ValidationError::BadPatience(self.patience));
        }
        if self.sessions_completed > MAX_SESSIONS_PER_RATER {
            return Err(ValidationError::BadParams("sessions_completed exceeds session limit"));
        }
        Ok(())
    }
}

/// Per-dimension integer scores. Kept as a map so that a record missing a
/// dimension can still be decoded and then rejected by validation.
pub type Scores = BTreeMap<Dimension, i32>;

pub fn scores(overall: i32, content: i32, response: i32) -> Scores {
    let mut s = Scores::new();
    s.insert(Dimension::Overall, overall);
    s.insert(Dimension::Content, content);
    s.insert(Dimension::Response, response);
    s
}

/// One rater's three-dimensional score for one presented condition.
///
/// Field order is the canonical JSON key order of `ratings.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub session_id: String,
    pub rater_id: String,
    pub question_id: String,
    pub category: Category,
    pub content: ContentConfig,
    pub qos: QosConfig,
    pub scores: Scores,
    #[serde(with = "ts_millis")]
    pub timestamp: DateTime<Utc>,
}

impl RatingRecord {
    pub fn condition(&self) -> ConditionId {
        ConditionId {
            question_id: self.question_id.clone(),
            content: self.content,
            qos: self.qos,
        }
    }

    /// Key under which a store admits at most one record.
    pub fn uniqueness_key(&self) -> (String, ConditionId) {
        (self.rater_id.clone(), self.condition())
    }

    pub fn score(&self, dim: Dimension) -> Option<i32> {
        self.scores.get(&dim).copied()
    }
}

/// Checks every record-level invariant. The error names the first violated
/// field in declaration order.
pub fn validate_record(record: &RatingRecord, fixture: Option<&ContentFixture>) -> Result<(), ValidationError> {
    if let Some(fx) = fixture {
        if !fx.contains(&record.question_id) {
            return Err(ValidationError::UnknownQuestion(record.question_id.clone()));
        }
    }
    record.content.validate()?;
    record.qos.validate()?;
    validate_scores(&record.scores)
}

pub fn validate_scores(scores: &Scores) -> Result<(), ValidationError> {
    for dim in Dimension::ALL {
        match scores.get(&dim) {
            None => return Err(ValidationError::MissingDimension(dim)),
            Some(&v) if !(SCORE_MIN..=SCORE_MAX).contains(&v) => {
                return Err(ValidationError::ScoreOutOfRange { dimension: dim, value: v })
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Checks that no (rater, condition) appears twice.
pub fn find_duplicate(records: &[RatingRecord]) -> Option<usize> {
    let mut seen = BTreeSet::new();
    records.iter().position(|r| !seen.insert(r.uniqueness_key()))
}

/// A (question, content, QoS) triple presented to raters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConditionId {
    pub question_id: String,
    pub content: ContentConfig,
    pub qos: QosConfig,
}

/// The five model inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Density,
    Accuracy,
    Speed,
    PausePos,
    PauseDur,
}

impl Feature {
    pub const ALL: [Feature; 5] = [
        Feature::Density,
        Feature::Accuracy,
        Feature::Speed,
        Feature::PausePos,
        Feature::PauseDur,
    ];

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Density => "density",
            Self::Accuracy => "accuracy",
            Self::Speed => "speed",
            Self::PausePos => "pause_pos",
            Self::PauseDur => "pause_dur",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered 5-tuple `(density, accuracy, speed, pause_pos, pause_dur)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; 5]);

impl FeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        self.0[f.index()]
    }
}

pub fn to_feature_vector(content: ContentConfig, qos: QosConfig) -> FeatureVector {
    FeatureVector([
        f64::from(content.density),
        f64::from(content.accuracy),
        qos.speed_s_per_token,
        qos.pause_pos,
        qos.pause_dur_s,
    ])
}

pub fn from_feature_vector(x: &FeatureVector) -> Result<(ContentConfig, QosConfig), ValidationError> {
    let flag = |v: f64| -> Result<u8, ValidationError> {
        if v == 0.0 {
            Ok(0)
        } else if v == 1.0 {
            Ok(1)
        } else {
            Err(ValidationError::BadContent("content flags must be exactly 0 or 1"))
        }
    };
    let [rho, alpha, v, pos, dur] = x.0;
    let content = ContentConfig::new(flag(rho)?, flag(alpha)?)?;
    let qos = QosConfig::new(v, pos, dur)?;
    Ok((content, qos))
}

/// Thresholds of the rating cleanup chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    /// Maximum admissible |z| for any of a rater's scores.
    pub tau: f64,
    /// Minimum rank agreement with the group.
    pub gamma: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self { tau: 2.0, gamma: 0.5 }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(ValidationError::BadParams("tau must be > 0"));
        }
        if !(-1.0..=1.0).contains(&self.gamma) {
            return Err(ValidationError::BadParams("gamma must lie in [-1, 1]"));
        }
        Ok(())
    }
}

/// Experiment grid as read from `grid.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub speeds: Vec<f64>,
    pub pause_positions: Vec<f64>,
    pub pause_durations: Vec<f64>,
    pub content_configs: Vec<ContentConfig>,
}

impl Grid {
    /// The 3 x 4 x 3 QoS grid crossed with all four content configs.
    pub fn standard() -> Self {
        Self {
            speeds: alloc::vec![0.01, 0.05, 0.1],
            pause_positions: alloc::vec![0.0, 0.25, 0.5, 0.75],
            pause_durations: alloc::vec![3.0, 5.0, 7.0],
            content_configs: ContentConfig::ALL.to_vec(),
        }
    }

    /// Off-grid QoS levels used for held-out verification.
    pub fn held_out() -> Self {
        Self {
            speeds: alloc::vec![0.03, 0.06],
            pause_positions: alloc::vec![0.3, 0.6],
            pause_durations: alloc::vec![1.0, 9.0],
            content_configs: ContentConfig::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.speeds.is_empty()
            || self.pause_positions.is_empty()
            || self.pause_durations.is_empty()
            || self.content_configs.is_empty()
        {
            return Err(ValidationError::BadGrid("every grid axis needs at least one level"));
        }
        for qos in self.qos_points_unchecked() {
            qos.validate()?;
        }
        for c in &self.content_configs {
            c.validate()?;
        }
        let combos = self.combinations();
        let distinct: BTreeSet<_> = combos.iter().collect();
        if distinct.len() != combos.len() {
            return Err(ValidationError::BadGrid("grid levels must be distinct"));
        }
        Ok(())
    }

    fn qos_points_unchecked(&self) -> Vec<QosConfig> {
        let mut out = Vec::with_capacity(self.speeds.len() * self.pause_positions.len() * self.pause_durations.len());
        for &v in &self.speeds {
            for &p in &self.pause_positions {
                for &d in &self.pause_durations {
                    out.push(QosConfig { speed_s_per_token: v, pause_pos: p, pause_dur_s: d });
                }
            }
        }
        out
    }

    /// QoS points in speed-major order.
    pub fn qos_points(&self) -> Vec<QosConfig> {
        self.qos_points_unchecked()
    }

    /// All (content, qos) pairs, content-major.
    pub fn combinations(&self) -> Vec<(ContentConfig, QosConfig)> {
        let qos = self.qos_points();
        let mut out = Vec::with_capacity(qos.len() * self.content_configs.len());
        for &c in &self.content_configs {
            for &q in &qos {
                out.push((c, q));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerVariant {
    pub density: u8,
    pub accuracy: u8,
    pub answer_text: String,
}

impl AnswerVariant {
    pub fn content(&self) -> ContentConfig {
        ContentConfig { density: self.density, accuracy: self.accuracy }
    }
}

/// One question of `content.json` with its four answer variants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentItem {
    pub question_id: String,
    pub category: Category,
    pub language: Language,
    pub question_text: String,
    pub variants: Vec<AnswerVariant>,
}

impl ContentItem {
    pub fn variant(&self, content: ContentConfig) -> Option<&AnswerVariant> {
        self.variants.iter().find(|v| v.content() == content)
    }
}

/// Validated question fixture.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContentFixture {
    items: Vec<ContentItem>,
    index: BTreeMap<String, usize>,
}

impl ContentFixture {
    pub fn new(items: Vec<ContentItem>) -> Result<Self, ValidationError> {
        let mut index = BTreeMap::new();
        for (i, item) in items.iter().enumerate() {
            if index.insert(item.question_id.clone(), i).is_some() {
                return Err(ValidationError::BadFixture(alloc::format!(
                    "duplicate question_id {}",
                    item.question_id
                )));
            }
            for v in &item.variants {
                v.content().validate()?;
            }
            for c in ContentConfig::ALL {
                let n = item.variants.iter().filter(|v| v.content() == c).count();
                if n != 1 {
                    return Err(ValidationError::BadFixture(alloc::format!(
                        "question {} must provide exactly one variant for density={} accuracy={}, found {n}",
                        item.question_id, c.density, c.accuracy
                    )));
                }
            }
        }
        Ok(Self { items, index })
    }

    pub fn items(&self) -> &[ContentItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, question_id: &str) -> bool {
        self.index.contains_key(question_id)
    }

    pub fn get(&self, question_id: &str) -> Option<&ContentItem> {
        self.index.get(question_id).map(|&i| &self.items[i])
    }
}

/// ISO-8601 UTC timestamps with millisecond precision, e.g.
/// `2025-01-02T03:04:05.678Z`.
pub mod ts_millis {
    use alloc::string::String;

    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn format(ts: &DateTime<Utc>) -> String {
        ts.to_rfc3339_opts(SecondsFormat::Millis, true)
    }

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format(ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn record(scores: Scores) -> RatingRecord {
        RatingRecord {
            session_id: "s1".into(),
            rater_id: "r1".into(),
            question_id: "q1".into(),
            category: Category::CreativeTasks,
            content: ContentConfig { density: 1, accuracy: 0 },
            qos: QosConfig::new(0.05, 0.25, 3.0).unwrap(),
            scores,
            timestamp: DateTime::from_timestamp_millis(1_700_000_000_123).unwrap(),
        }
    }

    #[test]
    fn record_validation() {
        assert_eq!(validate_record(&record(super::scores(3, 5, 1)), None), Ok(()));
        assert_eq!(
            validate_record(&record(super::scores(0, 3, 3)), None),
            Err(ValidationError::ScoreOutOfRange { dimension: Dimension::Overall, value: 0 })
        );
        let mut partial = Scores::new();
        partial.insert(Dimension::Overall, 3);
        partial.insert(Dimension::Content, 3);
        assert_eq!(
            validate_record(&record(partial), None),
            Err(ValidationError::MissingDimension(Dimension::Response))
        );
    }

    #[test]
    fn unknown_question_is_rejected() {
        let fx = ContentFixture::new(vec![]).unwrap();
        let err = validate_record(&record(super::scores(3, 3, 3)), Some(&fx)).unwrap_err();
        assert_eq!(err.code(), "unknown-question");
    }

    #[test]
    fn qos_invariants() {
        assert!(QosConfig::new(0.0, 0.0, 3.0).is_err());
        assert!(QosConfig::new(0.1, 1.0, 3.0).is_err());
        assert!(QosConfig::new(0.1, 0.5, -1.0).is_err());
        assert!(QosConfig::new(0.1, 0.0, 0.0).is_ok());
        assert!(QosConfig::new(0.05, 0.75, 7.0).unwrap().is_standard_grid());
        assert!(!QosConfig::new(0.03, 0.75, 7.0).unwrap().is_standard_grid());
    }

    #[test]
    fn mbti_parsing() {
        assert_eq!(parse_mbti("INTJ").unwrap(), ['I', 'N', 'T', 'J']);
        assert_eq!(parse_mbti("enfp").unwrap(), ['E', 'N', 'F', 'P']);
        assert!(parse_mbti("XXXX").is_err());
        assert!(parse_mbti("INT").is_err());
        assert!(parse_mbti("NITJ").is_err());
        assert_eq!(mbti_letter("INTJ", MbtiAxis::SN), Some('N'));
        assert_eq!(mbti_letter("INTJ", MbtiAxis::JP), Some('J'));
    }

    #[test]
    fn profile_validation() {
        let mut p = RaterProfile {
            rater_id: String::new(),
            language: Language::En,
            mbti: "INTJ".into(),
            patience: 3,
            sessions_completed: 0,
        };
        assert!(p.validate().is_ok());
        p.patience = 6;
        assert_eq!(p.validate().unwrap_err().code(), "bad-patience");
        p.patience = 3;
        p.mbti = "XXXX".into();
        assert_eq!(p.validate().unwrap_err().code(), "bad-mbti");
    }

    #[test]
    fn feature_vector_mapping() {
        let x = to_feature_vector(ContentConfig { density: 1, accuracy: 0 }, QosConfig::new(0.05, 0.25, 3.0).unwrap());
        assert_eq!(x.0, [1.0, 0.0, 0.05, 0.25, 3.0]);
        let x = to_feature_vector(ContentConfig { density: 0, accuracy: 0 }, QosConfig::new(0.01, 0.0, 3.0).unwrap());
        assert_eq!(x.0, [0.0, 0.0, 0.01, 0.0, 3.0]);
        assert!(from_feature_vector(&FeatureVector([0.5, 0.0, 0.01, 0.0, 3.0])).is_err());
    }

    #[test]
    fn feature_vector_round_trip_and_injective_on_grid() {
        let grid = Grid::standard();
        let combos = grid.combinations();
        assert_eq!(grid.qos_points().len(), 36);
        assert_eq!(combos.len(), 144);
        let mut seen = BTreeSet::new();
        for &(c, q) in &combos {
            let x = to_feature_vector(c, q);
            assert_eq!(from_feature_vector(&x).unwrap(), (c, q));
            let bits: Vec<u64> = x.0.iter().map(|v| v.to_bits()).collect();
            assert!(seen.insert(bits), "feature map is not injective");
        }
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::standard().validate().is_ok());
        assert!(Grid::held_out().validate().is_ok());
        let mut g = Grid::standard();
        g.speeds.push(0.01);
        assert!(g.validate().is_err());
        g.speeds.clear();
        assert!(g.validate().is_err());
    }

    #[test]
    fn fixture_requires_all_four_variants() {
        let item = |variants: Vec<AnswerVariant>| ContentItem {
            question_id: "q".into(),
            category: Category::CreativeTasks,
            language: Language::En,
            question_text: "?".into(),
            variants,
        };
        let v = |d, a| AnswerVariant { density: d, accuracy: a, answer_text: "x".into() };
        assert!(ContentFixture::new(vec![item(vec![v(0, 0), v(0, 1), v(1, 0), v(1, 1)])]).is_ok());
        assert!(ContentFixture::new(vec![item(vec![v(0, 0), v(0, 1), v(1, 0)])]).is_err());
        assert!(ContentFixture::new(vec![item(vec![v(0, 0), v(0, 1), v(1, 0), v(1, 0)])]).is_err());
    }

    #[test]
    fn duplicate_detection() {
        let a = record(super::scores(3, 3, 3));
        let mut b = a.clone();
        b.session_id = "s2".into();
        assert_eq!(find_duplicate(&[a.clone()]), None);
        assert_eq!(find_duplicate(&[a, b]), Some(1));
    }

    #[test]
    fn pipeline_params_defaults() {
        let p = PipelineParams::default();
        assert_eq!((p.tau, p.gamma), (2.0, 0.5));
        assert!(p.validate().is_ok());
        assert!(PipelineParams { tau: 0.0, gamma: 0.5 }.validate().is_err());
        assert!(PipelineParams { tau: 2.0, gamma: 1.5 }.validate().is_err());
    }
}
