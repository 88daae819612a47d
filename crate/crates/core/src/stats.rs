//! Correlation and summary statistics.
//!
//! Ranks use average fractional ranks for ties, so `spearman` is the
//! Pearson correlation of ranks. `kendall` is tau-b, computed with Knight's
//! O(n log n) merge-sort algorithm.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum StatsError {
    #[error("degenerate-input: {0}")]
    Degenerate(&'static str),
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard deviation with divisor n.
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    libm::sqrt(ss / xs.len() as f64)
}

/// Average fractional ranks (1-based). Tied values share the mean of the
/// ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) hold ranks i+1..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::Degenerate("length mismatch"));
    }
    if a.len() < 2 {
        return Err(StatsError::Degenerate("need at least two observations"));
    }
    Ok(())
}

fn centered_products(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (sab, saa, sbb)
}

fn clamp_unit(r: f64) -> f64 {
    r.clamp(-1.0, 1.0)
}

/// Pearson product-moment correlation. Both inputs must vary.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    check_pair(a, b)?;
    let (sab, saa, sbb) = centered_products(a, b);
    if saa == 0.0 || sbb == 0.0 {
        return Err(StatsError::Degenerate("constant input"));
    }
    Ok(clamp_unit(sab / libm::sqrt(saa * sbb)))
}

/// Spearman rank correlation (tie-aware Pearson of average ranks).
///
/// When exactly one side is constant there is no rank agreement to measure
/// and the result is 0; when both are constant the input is degenerate.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    check_pair(a, b)?;
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let (sab, saa, sbb) = centered_products(&ra, &rb);
    match (saa == 0.0, sbb == 0.0) {
        (true, true) => Err(StatsError::Degenerate("both inputs constant")),
        (true, false) | (false, true) => Ok(0.0),
        (false, false) => Ok(clamp_unit(sab / libm::sqrt(saa * sbb))),
    }
}

/// Number of tied pairs within runs of equal values in a sorted slice.
fn tied_pairs_sorted<T: PartialEq>(xs: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in xs.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    if !xs.is_empty() {
        total += run * (run - 1) / 2;
    }
    total
}

/// Merge sort counting swaps (inversions) of `v`.
fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = count_inversions(&mut v[..mid], &mut buf[..mid]);
    swaps += count_inversions(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j].total_cmp(&v[i]) == Ordering::Less {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + (n - j)].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall tau-b with tie corrections.
pub fn kendall(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    check_pair(a, b)?;
    let n = a.len() as u64;
    let n0 = n * (n - 1) / 2;

    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));

    let firsts: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let n1 = tied_pairs_sorted(&firsts);
    let n3 = tied_pairs_sorted(&pairs);

    let mut seconds: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; seconds.len()];
    let swaps = count_inversions(&mut seconds, &mut buf);
    let n2 = tied_pairs_sorted(&seconds);

    let denom_a = (n0 - n1) as f64;
    let denom_b = (n0 - n2) as f64;
    if denom_a == 0.0 || denom_b == 0.0 {
        return Err(StatsError::Degenerate("all pairs tied"));
    }
    // concordant - discordant = n0 - n1 - n2 + n3 - 2 * swaps
    let s = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    Ok(clamp_unit(s / libm::sqrt(denom_a * denom_b)))
}

/// Min, nearest-rank quartiles and max.
///
/// The p-quantile is the value at 1-based position `ceil(p * n)` of the
/// sorted sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = libm::ceil(p * n as f64) as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn five_number(xs: &[f64]) -> Option<FiveNumber> {
    if xs.is_empty() {
        return None;
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    Some(FiveNumber {
        min: s[0],
        q1: nearest_rank(&s, 0.25),
        median: nearest_rank(&s, 0.5),
        q3: nearest_rank(&s, 0.75),
        max: s[s.len() - 1],
    })
}

pub fn rmse(pred: &[f64], target: &[f64]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let ss: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    libm::sqrt(ss / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
        assert_eq!(average_ranks(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
        assert!(average_ranks(&[]).is_empty());
    }

    #[test]
    fn spearman_examples() {
        assert!(close(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0));
        assert!(close(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0));
        assert!(close(spearman(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap(), 0.6));
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert!(spearman(&[2.0, 2.0], &[1.0, 1.0]).is_err());
        assert_eq!(spearman(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn kendall_examples() {
        assert!(close(kendall(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap(), 1.0));
        assert!(close(kendall(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0));
        assert!(close(kendall(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap(), 1.0 / 3.0));
        assert!(kendall(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn pearson_examples() {
        assert!(close(pearson(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0));
        assert!(close(pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap(), 0.5));
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn population_std_divides_by_n() {
        assert!(close(population_std(&[1.0, 5.0]), 2.0));
        assert_eq!(population_std(&[3.0]), 0.0);
    }

    #[test]
    fn quartiles_nearest_rank() {
        let f = five_number(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!((f.min, f.q1, f.median, f.q3, f.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert!(five_number(&[]).is_none());
        let f = five_number(&[7.0]).unwrap();
        assert_eq!((f.min, f.q1, f.median, f.q3, f.max), (7.0, 7.0, 7.0, 7.0, 7.0));
    }
}
