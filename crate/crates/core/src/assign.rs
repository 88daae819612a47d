//! Balanced assignment of (content, QoS) conditions to raters.
//!
//! For each question the planner picks, among combinations the rater has not
//! seen yet, one whose QoS config has the lowest global count for that
//! question, then the lowest content count; remaining ties are broken by a
//! seeded uniform draw. This keeps per-question QoS counts within one of
//! each other at all times.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ConditionId, ContentConfig, Grid, QosConfig, MAX_SESSIONS_PER_RATER};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssignError {
    #[error("exhausted: rater {rater_id} has seen every combination of question {question_id}")]
    Exhausted { rater_id: String, question_id: String },
    #[error("session-limit-exceeded: rater {0} already has {MAX_SESSIONS_PER_RATER} sessions")]
    SessionLimitExceeded(String),
}

impl AssignError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Exhausted { .. } => "exhausted",
            Self::SessionLimitExceeded(_) => "session-limit-exceeded",
        }
    }
}

/// Global per-question assignment counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AssignmentCounter {
    qos: BTreeMap<String, BTreeMap<QosConfig, u64>>,
    content: BTreeMap<String, BTreeMap<ContentConfig, u64>>,
}

impl AssignmentCounter {
    pub fn qos_count(&self, question_id: &str, qos: QosConfig) -> u64 {
        self.qos.get(question_id).and_then(|m| m.get(&qos)).copied().unwrap_or(0)
    }

    pub fn content_count(&self, question_id: &str, content: ContentConfig) -> u64 {
        self.content.get(question_id).and_then(|m| m.get(&content)).copied().unwrap_or(0)
    }

    pub fn record(&mut self, question_id: &str, content: ContentConfig, qos: QosConfig) {
        *self.qos.entry(question_id.into()).or_default().entry(qos).or_default() += 1;
        *self.content.entry(question_id.into()).or_default().entry(content).or_default() += 1;
    }

    /// Per-QoS counts of one question over `grid`, zeros included.
    pub fn qos_counts(&self, question_id: &str, grid: &[QosConfig]) -> Vec<u64> {
        grid.iter().map(|q| self.qos_count(question_id, *q)).collect()
    }

    pub fn content_counts(&self, question_id: &str, contents: &[ContentConfig]) -> Vec<u64> {
        contents.iter().map(|c| self.content_count(question_id, *c)).collect()
    }
}

/// Picks a condition for `question_id` and records it in `counter`.
///
/// `seen` holds the conditions the rater has already been assigned.
pub fn assign_condition<R: Rng>(
    rater_id: &str,
    question_id: &str,
    combos: &[(ContentConfig, QosConfig)],
    counter: &mut AssignmentCounter,
    seen: &BTreeSet<ConditionId>,
    rng: &mut R,
) -> Result<(ContentConfig, QosConfig), AssignError> {
    let mut best_key = (u64::MAX, u64::MAX);
    let mut best: Vec<(ContentConfig, QosConfig)> = Vec::new();
    for &(content, qos) in combos {
        let cond = ConditionId { question_id: question_id.into(), content, qos };
        if seen.contains(&cond) {
            continue;
        }
        let key = (counter.qos_count(question_id, qos), counter.content_count(question_id, content));
        if key < best_key {
            best_key = key;
            best.clear();
        }
        if key == best_key {
            best.push((content, qos));
        }
    }
    if best.is_empty() {
        return Err(AssignError::Exhausted { rater_id: rater_id.into(), question_id: question_id.into() });
    }
    let (content, qos) = best[rng.random_range(0..best.len())];
    counter.record(question_id, content, qos);
    Ok((content, qos))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanItem {
    pub question_id: String,
    pub content: ContentConfig,
    pub qos: QosConfig,
}

impl PlanItem {
    pub fn condition(&self) -> ConditionId {
        ConditionId { question_id: self.question_id.clone(), content: self.content, qos: self.qos }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub session_id: String,
    pub rater_id: String,
    pub items: Vec<PlanItem>,
    /// Seed of the assignment tie-breaks and the item shuffle.
    pub seed: u64,
    #[serde(with = "crate::model::ts_millis")]
    pub created_at: DateTime<Utc>,
}

/// Assignment state: counters, per-rater history and session counts.
/// Replaying the same plans through [`Planner::apply`] rebuilds identical
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct Planner {
    questions: Vec<String>,
    combos: Vec<(ContentConfig, QosConfig)>,
    counter: AssignmentCounter,
    history: BTreeMap<String, BTreeSet<ConditionId>>,
    sessions: BTreeMap<String, u32>,
}

impl Planner {
    pub fn new(questions: Vec<String>, grid: &Grid) -> Self {
        Self {
            questions,
            combos: grid.combinations(),
            counter: AssignmentCounter::default(),
            history: BTreeMap::new(),
            sessions: BTreeMap::new(),
        }
    }

    pub fn counter(&self) -> &AssignmentCounter {
        &self.counter
    }

    pub fn questions(&self) -> &[String] {
        &self.questions
    }

    pub fn sessions_of(&self, rater_id: &str) -> u32 {
        self.sessions.get(rater_id).copied().unwrap_or(0)
    }

    pub fn history_of(&self, rater_id: &str) -> Option<&BTreeSet<ConditionId>> {
        self.history.get(rater_id)
    }

    /// Builds the next plan for `rater_id` without mutating the planner.
    /// Commit it with [`Planner::apply`].
    pub fn plan(&self, rater_id: &str, session_id: &str, seed: u64, created_at: DateTime<Utc>) -> Result<SessionPlan, AssignError> {
        if self.sessions_of(rater_id) >= MAX_SESSIONS_PER_RATER {
            return Err(AssignError::SessionLimitExceeded(rater_id.into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counter = self.counter.clone();
        let empty = BTreeSet::new();
        let seen = self.history.get(rater_id).unwrap_or(&empty);
        let mut items = Vec::with_capacity(self.questions.len());
        for q in &self.questions {
            let (content, qos) = assign_condition(rater_id, q, &self.combos, &mut counter, seen, &mut rng)?;
            items.push(PlanItem { question_id: q.clone(), content, qos });
        }
        items.shuffle(&mut rng);
        Ok(SessionPlan { session_id: session_id.into(), rater_id: rater_id.into(), items, seed, created_at })
    }

    /// Records a plan's assignments.
    pub fn apply(&mut self, plan: &SessionPlan) {
        let seen = self.history.entry(plan.rater_id.clone()).or_default();
        for item in &plan.items {
            self.counter.record(&item.question_id, item.content, item.qos);
            seen.insert(item.condition());
        }
        *self.sessions.entry(plan.rater_id.clone()).or_default() += 1;
    }
}

/// Largest minus smallest value.
pub fn spread(counts: &[u64]) -> u64 {
    match (counts.iter().max(), counts.iter().min()) {
        (Some(hi), Some(lo)) => hi - lo,
        _ => 0,
    }
}
