//! Synthetic rater populations with a known ground-truth utility.
//!
//! An honest rater `r` scores dimension `m` of condition `x` as
//! `round(clamp(scale_r * (u_m(x) + bias_r + eps), 1, 5))` with
//! `eps ~ Normal(0, noise_sd)`. The dimension utilities are coupled:
//! content uses only the two content flags, response only the three QoS
//! parameters, overall all five. Each is an affine map of its partial sum
//! `w . x`, centred at the mean of the standard grid and stretched by a
//! per-dimension gain so the scores fill the whole 1..5 scale. Without the
//! stretch the extreme scores become rare enough to push honest raters
//! past the z-score outlier bound.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::{
    scores, to_feature_vector, Category, ContentConfig, Grid, Language, MbtiAxis, QosConfig, RaterProfile, RatingRecord,
    SCORE_MAX, SCORE_MIN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdversaryKind {
    /// Independent uniform integer scores.
    #[default]
    Uniform,
    /// Mirrors the overall utility around the scale midpoint.
    Inverted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerDimension {
    pub overall: f64,
    pub content: f64,
    pub response: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticWorld {
    /// Weights over (density, accuracy, speed, pause_pos, pause_dur).
    pub weights: [f64; 5],
    /// Utility of each dimension at the grid centre.
    pub centre: PerDimension,
    pub gains: PerDimension,
    pub noise_sd: f64,
    /// Std of the per-rater additive offset.
    pub bias_sd: f64,
    /// Per-rater scale is uniform in `[1 - scale_spread, 1 + scale_spread]`.
    pub scale_spread: f64,
    pub adversarial_raters: usize,
    pub adversary: AdversaryKind,
    pub seed: u64,
}

impl Default for SyntheticWorld {
    /// Accuracy dominates, speed second; pause position carries no weight.
    fn default() -> Self {
        Self {
            weights: [0.5, 2.0, -10.0, 0.0, -0.15],
            centre: PerDimension { overall: 3.0, content: 3.0, response: 3.0 },
            gains: PerDimension { overall: 1.5, content: 1.6, response: 4.0 },
            noise_sd: 0.3,
            bias_sd: 0.15,
            scale_spread: 0.1,
            adversarial_raters: 1,
            adversary: AdversaryKind::Uniform,
            seed: 0,
        }
    }
}

/// Mean feature vector of the standard grid.
pub const GRID_CENTRE: [f64; 5] = [0.5, 0.5, 0.16 / 3.0, 0.375, 5.0];

impl SyntheticWorld {
    /// Ground-truth utility `u(x) = w . x`.
    pub fn utility(&self, content: ContentConfig, qos: QosConfig) -> f64 {
        let x = to_feature_vector(content, qos).0;
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum()
    }

    fn dimension_utilities(&self, content: ContentConfig, qos: QosConfig) -> [f64; 3] {
        let x = to_feature_vector(content, qos).0;
        let w = self.weights;
        let partial = |range: core::ops::Range<usize>| range.map(|i| w[i] * (x[i] - GRID_CENTRE[i])).sum::<f64>();
        let (c, g) = (self.centre, self.gains);
        [
            c.overall + g.overall * partial(0..5),
            c.content + g.content * partial(0..2),
            c.response + g.response * partial(2..5),
        ]
    }
}

/// A condition to be rated, carrying its question's topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCondition {
    pub question_id: String,
    pub category: Category,
    pub content: ContentConfig,
    pub qos: QosConfig,
}

/// Two synthetic questions per topic.
pub fn default_questions() -> Vec<(String, Category)> {
    Category::ALL
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| (0..2).map(move |j| (format!("syn-{ci}{j}"), *c)))
        .collect()
}

/// Assigns each question `per_question` grid combinations, rotating through
/// the grid so consecutive questions continue where the previous one
/// stopped.
pub fn conditions_for(questions: &[(String, Category)], grid: &Grid, per_question: usize) -> Vec<SynthCondition> {
    let combos = grid.combinations();
    let mut out = Vec::with_capacity(questions.len() * per_question);
    let mut cursor = 0;
    for (q, cat) in questions {
        for _ in 0..per_question.min(combos.len()) {
            let (content, qos) = combos[cursor % combos.len()];
            cursor += 1;
            out.push(SynthCondition { question_id: q.clone(), category: *cat, content, qos });
        }
    }
    out
}

fn clamp_round(v: f64) -> i32 {
    libm::round(v.clamp(f64::from(SCORE_MIN), f64::from(SCORE_MAX))) as i32
}

pub fn honest_rater_id(i: usize) -> String {
    format!("h{i:03}")
}

pub fn adversarial_rater_id(i: usize) -> String {
    format!("a{i:03}")
}

fn timestamp(ms: i64) -> DateTime<Utc> {
    // 2025-01-01T00:00:00Z
    DateTime::from_timestamp_millis(1_735_689_600_000 + ms).expect("timestamp in range")
}

/// Rates every condition by `n_honest` honest raters and the world's
/// adversarial raters. Output order is rater-major, then condition order.
pub fn generate(world: &SyntheticWorld, conditions: &[SynthCondition], n_honest: usize) -> Vec<RatingRecord> {
    let noise = Normal::new(0.0, world.noise_sd.max(0.0)).expect("finite noise sd");
    let bias = Normal::new(0.0, world.bias_sd.max(0.0)).expect("finite bias sd");
    let mut out = Vec::with_capacity((n_honest + world.adversarial_raters) * conditions.len());
    let mut clock = 0i64;

    let total = n_honest + world.adversarial_raters;
    for r in 0..total {
        let mut rng = ChaCha8Rng::seed_from_u64(world.seed);
        rng.set_stream(r as u64);
        let honest = r < n_honest;
        let rater_id = if honest { honest_rater_id(r) } else { adversarial_rater_id(r - n_honest) };
        let offset = bias.sample(&mut rng);
        let scale = 1.0 + world.scale_spread * (2.0 * rng.random::<f64>() - 1.0);
        for c in conditions {
            let u = world.dimension_utilities(c.content, c.qos);
            let s: [i32; 3] = if honest {
                u.map(|ud| clamp_round(scale * (ud + offset + noise.sample(&mut rng))))
            } else {
                match world.adversary {
                    AdversaryKind::Uniform => [0; 3].map(|_| rng.random_range(SCORE_MIN..=SCORE_MAX)),
                    AdversaryKind::Inverted => u.map(|ud| clamp_round(6.0 - (ud + noise.sample(&mut rng)))),
                }
            };
            out.push(RatingRecord {
                session_id: format!("synth-{rater_id}"),
                rater_id: rater_id.clone(),
                question_id: c.question_id.clone(),
                category: c.category,
                content: c.content,
                qos: c.qos,
                scores: scores(s[0], s[1], s[2]),
                timestamp: timestamp(clock),
            });
            clock += 1;
        }
    }
    out
}

/// Random profiles (MBTI, patience) for the raters of [`generate`].
pub fn generate_profiles(world: &SyntheticWorld, n_honest: usize) -> Vec<RaterProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(world.seed ^ 0x5EED_0F_BEEF);
    (0..n_honest + world.adversarial_raters)
        .map(|r| {
            let mbti: String = MbtiAxis::ALL.iter().map(|a| a.letters()[rng.random_range(0..2)]).collect();
            RaterProfile {
                rater_id: if r < n_honest { honest_rater_id(r) } else { adversarial_rater_id(r - n_honest) },
                language: if rng.random_bool(0.5) { Language::En } else { Language::Zh },
                mbti,
                patience: rng.random_range(1..=5),
                sessions_completed: 1,
            }
        })
        .collect()
}
