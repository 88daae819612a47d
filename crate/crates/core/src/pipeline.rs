//! Rating cleanup chain: per-rater z-scores, deviation-based rejection,
//! group-consistency rejection and Mean Opinion Scores rescaled to [0, 5].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{ConditionId, Dimension, PipelineParams, RatingRecord, ValidationError};
use crate::stats;

/// Raters need at least this many conditions shared with the rest of the
/// group before their rank agreement is measured.
pub const MIN_OVERLAP: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Params(#[from] ValidationError),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Params(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRating {
    pub rater_id: String,
    pub condition: ConditionId,
    pub dimension: Dimension,
    pub z: f64,
}

/// Standardizes every score against the rater's own mean and population
/// standard deviation in that dimension. A rater with zero spread in a
/// dimension gets z = 0 throughout it.
pub fn zscore_normalize(records: &[RatingRecord]) -> Vec<NormalizedRating> {
    let mut groups: BTreeMap<(&str, Dimension), Vec<f64>> = BTreeMap::new();
    for r in records {
        for (&dim, &v) in &r.scores {
            groups.entry((r.rater_id.as_str(), dim)).or_default().push(f64::from(v));
        }
    }
    let moments: BTreeMap<(&str, Dimension), (f64, f64)> = groups
        .into_iter()
        .map(|(k, xs)| (k, (stats::mean(&xs), stats::population_std(&xs))))
        .collect();

    let mut out = Vec::with_capacity(records.len() * 3);
    for r in records {
        let condition = r.condition();
        for (&dim, &v) in &r.scores {
            let (mu, sigma) = moments[&(r.rater_id.as_str(), dim)];
            let z = if sigma > 0.0 { (f64::from(v) - mu) / sigma } else { 0.0 };
            out.push(NormalizedRating {
                rater_id: r.rater_id.clone(),
                condition: condition.clone(),
                dimension: dim,
                z,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutlierSplit {
    pub valid: BTreeSet<String>,
    pub rejected: BTreeSet<String>,
}

/// Keeps a rater iff every one of their |z| values (over all conditions and
/// dimensions jointly) is at most `tau`.
pub fn filter_outlier_raters(normalized: &[NormalizedRating], tau: f64) -> OutlierSplit {
    let mut max_abs: BTreeMap<&str, f64> = BTreeMap::new();
    for n in normalized {
        let m = max_abs.entry(n.rater_id.as_str()).or_insert(0.0);
        *m = m.max(n.z.abs());
    }
    let mut split = OutlierSplit::default();
    for (rater, m) in max_abs {
        if m <= tau {
            split.valid.insert(rater.into());
        } else {
            split.rejected.insert(rater.into());
        }
    }
    split
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConsistencySplit {
    pub retained: BTreeSet<String>,
    pub rejected: BTreeSet<String>,
    /// Raters sharing fewer than [`MIN_OVERLAP`] conditions with the group.
    pub insufficient_overlap: BTreeSet<String>,
    pub srcc: BTreeMap<String, f64>,
}

/// Rank agreement of each valid rater with the leave-one-out group mean.
///
/// For every dimension the rater's z-scores over the conditions they rated
/// are correlated (Spearman) with the mean z of the other valid raters on
/// the same conditions; the rater's value is the mean over dimensions. A
/// rater is retained iff that value is at least `gamma`.
pub fn filter_inconsistent_raters(
    normalized: &[NormalizedRating],
    valid: &BTreeSet<String>,
    gamma: f64,
) -> ConsistencySplit {
    type Key<'a> = (&'a ConditionId, Dimension);
    let mut totals: BTreeMap<Key<'_>, (f64, usize)> = BTreeMap::new();
    let mut own: BTreeMap<&str, BTreeMap<Key<'_>, (f64, usize)>> = BTreeMap::new();
    for n in normalized.iter().filter(|n| valid.contains(&n.rater_id)) {
        let key = (&n.condition, n.dimension);
        let t = totals.entry(key).or_insert((0.0, 0));
        t.0 += n.z;
        t.1 += 1;
        let o = own.entry(n.rater_id.as_str()).or_default().entry(key).or_insert((0.0, 0));
        o.0 += n.z;
        o.1 += 1;
    }

    let mut out = ConsistencySplit::default();
    for rater in valid {
        let Some(mine) = own.get(rater.as_str()) else {
            out.insufficient_overlap.insert(rater.clone());
            continue;
        };
        let mut per_dim: BTreeMap<Dimension, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        let mut shared: BTreeSet<&ConditionId> = BTreeSet::new();
        for (key, &(sum, count)) in mine {
            let (tsum, tcount) = totals[key];
            if tcount == count {
                continue;
            }
            let group_mean = (tsum - sum) / (tcount - count) as f64;
            let entry = per_dim.entry(key.1).or_default();
            entry.0.push(sum / count as f64);
            entry.1.push(group_mean);
            shared.insert(key.0);
        }
        if shared.len() < MIN_OVERLAP {
            out.insufficient_overlap.insert(rater.clone());
            continue;
        }
        let values: Vec<f64> = per_dim
            .values()
            .filter_map(|(mine, group)| stats::spearman(mine, group).ok())
            .collect();
        let srcc = if values.is_empty() { 0.0 } else { stats::mean(&values) };
        out.srcc.insert(rater.clone(), srcc);
        if srcc >= gamma {
            out.retained.insert(rater.clone());
        } else {
            out.rejected.insert(rater.clone());
        }
    }
    out
}

/// Repeats [`filter_inconsistent_raters`] against the shrinking retained set
/// until no rater is dropped, so every retained rater agrees with the final
/// group. Rejections accumulate over rounds; each rater's SRCC is the value
/// from the last round it took part in.
pub fn filter_inconsistent_until_stable(
    normalized: &[NormalizedRating],
    valid: &BTreeSet<String>,
    gamma: f64,
) -> ConsistencySplit {
    let mut out = ConsistencySplit { retained: valid.clone(), ..Default::default() };
    loop {
        let round = filter_inconsistent_raters(normalized, &out.retained, gamma);
        let stable = round.retained.len() == out.retained.len();
        out.rejected.extend(round.rejected);
        out.insufficient_overlap.extend(round.insufficient_overlap);
        out.srcc.extend(round.srcc);
        out.retained = round.retained;
        if stable {
            return out;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosEntry {
    pub mos_z: f64,
    pub mos_scaled: f64,
    pub n_valid: usize,
}

/// Linear map of one dimension's mean z-scores onto [0, 5].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub min: f64,
    pub max: f64,
}

impl Anchor {
    /// Degenerate ranges map to the midpoint; values outside frozen anchors
    /// are clamped into [0, 5].
    pub fn scale(&self, mos_z: f64) -> f64 {
        if self.max > self.min {
            (5.0 * ((mos_z - self.min) / (self.max - self.min))).clamp(0.0, 5.0)
        } else {
            2.5
        }
    }
}

pub type Anchors = BTreeMap<Dimension, Anchor>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MosTable {
    pub entries: BTreeMap<ConditionId, BTreeMap<Dimension, MosEntry>>,
    pub anchors: Anchors,
}

impl MosTable {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of (condition, dimension) entries.
    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn get(&self, condition: &ConditionId, dim: Dimension) -> Option<&MosEntry> {
        self.entries.get(condition)?.get(&dim)
    }

    /// Iterates `(condition, dimension, entry)` in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&ConditionId, Dimension, &MosEntry)> {
        self.entries
            .iter()
            .flat_map(|(c, dims)| dims.iter().map(move |(d, e)| (c, *d, e)))
    }
}

/// Result of [`compute_mos`]: the table plus conditions that had no valid
/// rating left and were omitted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MosOutcome {
    pub table: MosTable,
    pub empty_conditions: Vec<ConditionId>,
}

/// Mean z per (condition, dimension) over `raters`, with anchors taken from
/// the data (min and max per dimension).
pub fn compute_mos(normalized: &[NormalizedRating], raters: &BTreeSet<String>) -> MosOutcome {
    compute_mos_inner(normalized, raters, None)
}

/// As [`compute_mos`] but maps onto [0, 5] with previously frozen anchors.
/// Dimensions missing from `anchors` fall back to data anchors.
pub fn compute_mos_with_anchors(normalized: &[NormalizedRating], raters: &BTreeSet<String>, anchors: &Anchors) -> MosOutcome {
    compute_mos_inner(normalized, raters, Some(anchors))
}

fn compute_mos_inner(normalized: &[NormalizedRating], raters: &BTreeSet<String>, frozen: Option<&Anchors>) -> MosOutcome {
    let mut sums: BTreeMap<&ConditionId, BTreeMap<Dimension, (f64, usize)>> = BTreeMap::new();
    let mut seen: BTreeSet<&ConditionId> = BTreeSet::new();
    for n in normalized {
        seen.insert(&n.condition);
        if !raters.contains(&n.rater_id) {
            continue;
        }
        let s = sums.entry(&n.condition).or_default().entry(n.dimension).or_insert((0.0, 0));
        s.0 += n.z;
        s.1 += 1;
    }
    let empty_conditions = seen.into_iter().filter(|c| !sums.contains_key(c)).cloned().collect();

    let mut data_anchors: Anchors = BTreeMap::new();
    for dims in sums.values() {
        for (&dim, &(s, n)) in dims {
            let z = s / n as f64;
            data_anchors
                .entry(dim)
                .and_modify(|a| {
                    a.min = a.min.min(z);
                    a.max = a.max.max(z);
                })
                .or_insert(Anchor { min: z, max: z });
        }
    }
    let anchors: Anchors = match frozen {
        None => data_anchors,
        Some(f) => data_anchors
            .into_iter()
            .map(|(d, a)| (d, f.get(&d).copied().unwrap_or(a)))
            .collect(),
    };

    let entries = sums
        .into_iter()
        .map(|(c, dims)| {
            let row = dims
                .into_iter()
                .map(|(dim, (s, n))| {
                    let mos_z = s / n as f64;
                    (dim, MosEntry { mos_z, mos_scaled: anchors[&dim].scale(mos_z), n_valid: n })
                })
                .collect();
            (c.clone(), row)
        })
        .collect();
    MosOutcome { table: MosTable { entries, anchors }, empty_conditions }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineReport {
    pub raters_in: usize,
    pub records_in: usize,
    pub records_out: usize,
    pub rejected_by_z: BTreeSet<String>,
    pub rejected_by_srcc: BTreeSet<String>,
    pub rejected_insufficient_overlap: BTreeSet<String>,
    pub final_raters: BTreeSet<String>,
    pub srcc: BTreeMap<String, f64>,
    pub empty_conditions: Vec<ConditionId>,
}

impl PipelineReport {
    pub fn records_removed(&self) -> usize {
        self.records_in - self.records_out
    }
}

/// Runs normalization, outlier rejection, consistency rejection and MOS
/// computation in that order.
pub fn run_pipeline(records: &[RatingRecord], params: &PipelineParams) -> Result<(MosTable, PipelineReport), PipelineError> {
    run_pipeline_inner(records, params, None)
}

pub fn run_pipeline_with_anchors(
    records: &[RatingRecord],
    params: &PipelineParams,
    anchors: &Anchors,
) -> Result<(MosTable, PipelineReport), PipelineError> {
    run_pipeline_inner(records, params, Some(anchors))
}

fn run_pipeline_inner(
    records: &[RatingRecord],
    params: &PipelineParams,
    anchors: Option<&Anchors>,
) -> Result<(MosTable, PipelineReport), PipelineError> {
    params.validate()?;
    let normalized = zscore_normalize(records);
    let outliers = filter_outlier_raters(&normalized, params.tau);
    let consistency = filter_inconsistent_until_stable(&normalized, &outliers.valid, params.gamma);
    let mos = match anchors {
        None => compute_mos(&normalized, &consistency.retained),
        Some(a) => compute_mos_with_anchors(&normalized, &consistency.retained, a),
    };

    let raters_in = records.iter().map(|r| r.rater_id.as_str()).collect::<BTreeSet<_>>().len();
    let records_out = records.iter().filter(|r| consistency.retained.contains(&r.rater_id)).count();
    let report = PipelineReport {
        raters_in,
        records_in: records.len(),
        records_out,
        rejected_by_z: outliers.rejected,
        rejected_by_srcc: consistency.rejected,
        rejected_insufficient_overlap: consistency.insufficient_overlap,
        final_raters: consistency.retained,
        srcc: consistency.srcc,
        empty_conditions: mos.empty_conditions,
    };
    Ok((mos.table, report))
}

/// Records of the raters that survived the pipeline, in input order.
pub fn surviving_records(records: &[RatingRecord], report: &PipelineReport) -> Vec<RatingRecord> {
    records
        .iter()
        .filter(|r| report.final_raters.contains(&r.rater_id))
        .cloned()
        .collect()
}
