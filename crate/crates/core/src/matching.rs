//! 1:M nearest-neighbour matching with replacement on a scalar score, and the
//! matching estimator of the average treatment effect.
//!
//! Each unit is matched to the `m` units of the opposite arm whose scores are
//! closest. Among equidistant candidates the smaller unit index wins, so every
//! matched set has exactly `m` members.

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    m: usize,
    /// Flattened matched sets, `m` entries per unit, nearest first.
    sets: Vec<usize>,
    counts: Vec<usize>,
}

impl MatchResult {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    /// Matched set `J_M(i)`.
    pub fn set(&self, i: usize) -> &[usize] {
        &self.sets[i * self.m..(i + 1) * self.m]
    }

    /// `K_M(i)`: how often unit `i` serves as a match.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
}

/// Opposite-arm candidates sorted by score, then index.
struct SortedArm {
    scores: Vec<f64>,
    index: Vec<usize>,
}

impl SortedArm {
    fn new(scores: &[f64], a: &[u8], arm: u8) -> Self {
        let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| a[i] == arm).collect();
        idx.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(i.cmp(&j)));
        Self {
            scores: idx.iter().map(|&i| scores[i]).collect(),
            index: idx,
        }
    }

    /// Appends to `out` the `m` candidates nearest to `s` under the order
    /// (distance, index).
    fn nearest(&self, s: f64, m: usize, out: &mut Vec<usize>, group: &mut Vec<usize>) {
        let len = self.scores.len();
        let pos = self.scores.partition_point(|&x| x < s);
        // candidates [left, right) are consumed
        let mut left = pos;
        let mut right = pos;
        let mut need = m;
        while need > 0 {
            let dl = (left > 0).then(|| s - self.scores[left - 1]);
            let dr = (right < len).then(|| self.scores[right] - s);
            let d = match (dl, dr) {
                (Some(l), Some(r)) => l.min(r),
                (Some(l), None) => l,
                (None, Some(r)) => r,
                (None, None) => unreachable!("arm size checked by caller"),
            };
            group.clear();
            while left > 0 && s - self.scores[left - 1] == d {
                left -= 1;
                group.push(self.index[left]);
            }
            while right < len && self.scores[right] - s == d {
                group.push(self.index[right]);
                right += 1;
            }
            group.sort_unstable();
            let take = need.min(group.len());
            out.extend_from_slice(&group[..take]);
            need -= take;
        }
    }
}

fn check_scores(scores: &[f64], a: &[u8], m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidArgument("number of matches must be >= 1".into()));
    }
    if scores.len() != a.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} units",
            scores.len(),
            a.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("matching scores".into()));
    }
    for arm in [0u8, 1] {
        let have = a.iter().filter(|&&x| x == arm).count();
        if have < m {
            return Err(Error::ArmTooSmall { arm, have, need: m });
        }
    }
    Ok(())
}

/// Matches every unit to its `m` nearest opposite-arm units by score.
/// O(n log n) plus the size of any tie groups encountered.
pub fn match_1m(scores: &[f64], a: &[u8], m: usize) -> Result<MatchResult> {
    check_scores(scores, a, m)?;
    let arms = [SortedArm::new(scores, a, 0), SortedArm::new(scores, a, 1)];
    let n = scores.len();
    let mut sets = Vec::with_capacity(n * m);
    let mut counts = vec![0usize; n];
    let mut group = Vec::new();
    for i in 0..n {
        let start = sets.len();
        arms[usize::from(1 - a[i])].nearest(scores[i], m, &mut sets, &mut group);
        for &j in &sets[start..] {
            counts[j] += 1;
        }
    }
    Ok(MatchResult { m, sets, counts })
}

/// Exhaustive O(n²) matcher with the same tie rule. Reference for testing.
pub fn match_1m_bruteforce(scores: &[f64], a: &[u8], m: usize) -> Result<MatchResult> {
    check_scores(scores, a, m)?;
    let n = scores.len();
    let mut sets = Vec::with_capacity(n * m);
    let mut counts = vec![0usize; n];
    for i in 0..n {
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&j| a[j] != a[i])
            .map(|j| ((scores[j] - scores[i]).abs(), j))
            .collect();
        cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for &(_, j) in &cand[..m] {
            sets.push(j);
            counts[j] += 1;
        }
    }
    Ok(MatchResult { m, sets, counts })
}

fn check_lengths(y: &[f64], a: &[u8], mr: &MatchResult) -> Result<()> {
    if y.len() != a.len() || mr.n() != a.len() {
        return Err(Error::DimensionMismatch(format!(
            "|y| = {}, |a| = {}, matched units = {}",
            y.len(),
            a.len(),
            mr.n()
        )));
    }
    Ok(())
}

/// Matching estimator in its weighted form
/// `n⁻¹ Σ (2Aᵢ − 1)(1 + K_M(i)/M) Yᵢ`.
pub fn ate_matching(y: &[f64], a: &[u8], mr: &MatchResult) -> Result<f64> {
    check_lengths(y, a, mr)?;
    let m = mr.m as f64;
    let total: f64 = y
        .iter()
        .zip(a)
        .zip(mr.counts())
        .map(|((&yi, &ai), &k)| sign(ai) * (1.0 + k as f64 / m) * yi)
        .sum();
    Ok(total / y.len() as f64)
}

/// Matching estimator in its imputation form
/// `n⁻¹ Σ (2Aᵢ − 1)[Yᵢ − M⁻¹ Σ_{j ∈ J_M(i)} Y_j]`.
pub fn ate_matching_imputed(y: &[f64], a: &[u8], mr: &MatchResult) -> Result<f64> {
    check_lengths(y, a, mr)?;
    let m = mr.m as f64;
    let total: f64 = (0..y.len())
        .map(|i| {
            let imputed: f64 = mr.set(i).iter().map(|&j| y[j]).sum::<f64>() / m;
            sign(a[i]) * (y[i] - imputed)
        })
        .sum();
    Ok(total / y.len() as f64)
}

fn sign(a: u8) -> f64 {
    if a == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Matches on `scores` and returns the estimate.
pub fn ate_from_scores(d: &Dataset, scores: &[f64], m: usize) -> Result<f64> {
    let mr = match_1m(scores, d.a(), m)?;
    ate_matching(d.y(), d.a(), &mr)
}
