//! Split criterion of the PRC tree.
//!
//! For a candidate feature the rows are ordered by value and, for each unique
//! value `v`, the prefix `x <= v` is scored as a predicted-positive set. When
//! that prefix's precision is below the positive prevalence (the baseline),
//! the point is replaced by the complementary set `x > v`. Features are ranked
//! by the trapezoidal area under these points, taken in the orientation where
//! positives rank low, and the winner's threshold is the point with the
//! largest F1.

use std::fmt;

use crate::data::{class_counts, Dataset, Label};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// Unique feature values, strictly ascending.
    pub thresholds: Vec<f64>,
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
    pub baseline: f64,
    pub total_positives: usize,
    pub total_negatives: usize,
}

impl PrCurve {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

impl fmt::Display for PrCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>16} {:>10} {:>10}",
            "threshold", "recall", "precision"
        )?;
        for ((t, r), p) in self
            .thresholds
            .iter()
            .zip(&self.recall)
            .zip(&self.precision)
        {
            writeln!(f, "{t:>16.6} {r:>10.6} {p:>10.6}")?;
        }
        write!(f, "baseline {:.6}", self.baseline)
    }
}

/// Best split found for a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature_index: usize,
    pub auprc: f64,
    pub threshold: f64,
    pub f1: f64,
}

/// Fraction of positive labels.
pub fn compute_baseline(labels: &[Label]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (neg, pos) = class_counts(labels);
    Ok(pos as f64 / (pos + neg) as f64)
}

/// Harmonic mean `2rp / (r + p)`, 0 when both are 0.
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a + b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

pub fn compute_pr_curve(values: &[f64], labels: &[Label]) -> Result<PrCurve> {
    if values.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            found: values.len(),
        });
    }
    let mut pairs: Vec<(f64, bool)> = values
        .iter()
        .zip(labels)
        .map(|(&v, l)| (v, l.is_positive()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    curve_from_sorted(&pairs)
}

/// Builds the curve from `(value, is_positive)` pairs already sorted by value.
pub(crate) fn curve_from_sorted(pairs: &[(f64, bool)]) -> Result<PrCurve> {
    let n = pairs.len();
    let total_positives = pairs.iter().filter(|p| p.1).count();
    let total_negatives = n - total_positives;
    if total_positives == 0 || total_negatives == 0 {
        return Err(Error::SingleClass);
    }
    let baseline = total_positives as f64 / (total_positives + total_negatives) as f64;
    let positives = total_positives as f64;

    let mut thresholds = Vec::new();
    let mut recall = Vec::new();
    let mut precision = Vec::new();
    let mut covered = 0usize;
    let mut covered_positives = 0usize;
    let mut i = 0;
    while i < n {
        let value = pairs[i].0;
        while i < n && pairs[i].0 == value {
            covered += 1;
            covered_positives += usize::from(pairs[i].1);
            i += 1;
        }
        let mut r = covered_positives as f64 / positives;
        let mut p = covered_positives as f64 / covered as f64;
        if p < baseline {
            // Score the complement x > value instead.
            let rest = n - covered;
            if rest == 0 {
                r = 0.0;
                p = baseline;
            } else {
                r = 1.0 - r;
                p = (total_positives - covered_positives) as f64 / rest as f64;
            }
        }
        thresholds.push(value);
        recall.push(r);
        precision.push(p);
    }

    Ok(PrCurve {
        thresholds,
        recall,
        precision,
        baseline,
        total_positives,
        total_negatives,
    })
}

/// Trapezoidal area: `r_1 (1 + p_1) / 2` for the first point, then
/// `(r_j - r_{j-1}) (p_j + p_{j-1}) / 2` for each following point.
///
/// Because flipped and unflipped points interleave, recall need not be
/// monotone and the sum can leave [0, 1]; the raw value is returned.
pub fn auprc_trapezoid(curve: &PrCurve) -> f64 {
    let (r, p) = (&curve.recall, &curve.precision);
    if r.is_empty() {
        return 0.0;
    }
    let mut area = r[0] * (1.0 + p[0]) / 2.0;
    for j in 1..r.len() {
        area += (r[j] - r[j - 1]) * (p[j] + p[j - 1]) / 2.0;
    }
    debug_assert!(area.is_finite());
    area
}

/// Threshold of the curve point with the largest F1; ties go to the smaller threshold.
pub fn select_threshold(curve: &PrCurve) -> (f64, f64) {
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for ((&t, &r), &p) in curve
        .thresholds
        .iter()
        .zip(&curve.recall)
        .zip(&curve.precision)
    {
        let f1 = harmonic_mean(r, p);
        if f1 > best.1 {
            best = (t, f1);
        }
    }
    best
}

/// Feature chosen by [`select_feature`], along with its curve.
#[derive(Debug, Clone)]
pub struct SelectedFeature {
    pub feature_index: usize,
    pub auprc: f64,
    pub curve: PrCurve,
}

/// Candidate feature with the largest AUPRC over all rows of `dataset`.
pub fn select_feature(dataset: &Dataset, candidates: &[usize]) -> Result<SelectedFeature> {
    let rows: Vec<usize> = (0..dataset.n_rows()).collect();
    select_feature_on_rows(dataset, &rows, candidates)
}

/// Same as [`select_feature`] restricted to `rows` (repeats allowed).
/// Ties go to the lowest feature index; an AUPRC must exceed 0 to be selected.
pub fn select_feature_on_rows(
    dataset: &Dataset,
    rows: &[usize],
    candidates: &[usize],
) -> Result<SelectedFeature> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter(
            "empty candidate feature set".into(),
        ));
    }
    if let Some(&bad) = candidates.iter().find(|&&f| f >= dataset.n_features()) {
        return Err(Error::InvalidParameter(format!(
            "feature index {bad} out of range for {} features",
            dataset.n_features()
        )));
    }
    let mut order = candidates.to_vec();
    order.sort_unstable();
    order.dedup();

    let mut pairs = Vec::with_capacity(rows.len());
    let mut best: Option<SelectedFeature> = None;
    for feature in order {
        pairs.clear();
        pairs.extend(
            rows.iter()
                .map(|&i| (dataset.value(i, feature), dataset.label(i).is_positive())),
        );
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let curve = curve_from_sorted(&pairs)?;
        let auprc = oriented_auprc(&curve, &pairs)?;
        let current = best.as_ref().map_or(0.0, |b| b.auprc);
        if auprc > current {
            best = Some(SelectedFeature {
                feature_index: feature,
                auprc,
                curve,
            });
        }
    }
    best.ok_or(Error::NoInformativeFeature)
}

/// AUPRC scored with the feature oriented so that positives rank low, which is
/// the orientation the prefix sets `x <= v` describe. With the positives' mean
/// rank exactly central both orientations are scored and the larger is kept.
/// The result is unchanged when the feature is negated.
fn oriented_auprc(curve: &PrCurve, pairs: &[(f64, bool)]) -> Result<f64> {
    // Twice the summed midranks of the positives, against its value under no association.
    let mut doubled_rank_sum = 0u128;
    let mut start = 0usize;
    while start < pairs.len() {
        let mut end = start;
        let mut positives = 0u128;
        while end < pairs.len() && pairs[end].0 == pairs[start].0 {
            positives += u128::from(pairs[end].1);
            end += 1;
        }
        doubled_rank_sum += positives * (start + end - 1) as u128;
        start = end;
    }
    let central = curve.total_positives as u128 * (pairs.len() as u128 - 1);
    let forward = || auprc_trapezoid(curve);
    let reversed = || -> Result<f64> {
        let negated: Vec<(f64, bool)> = pairs.iter().rev().map(|&(v, l)| (-v, l)).collect();
        Ok(auprc_trapezoid(&curve_from_sorted(&negated)?))
    };
    Ok(match doubled_rank_sum.cmp(&central) {
        std::cmp::Ordering::Less => forward(),
        std::cmp::Ordering::Greater => reversed()?,
        std::cmp::Ordering::Equal => forward().max(reversed()?),
    })
}

/// Feature by AUPRC, then threshold by F1 on that feature's curve.
pub fn find_split(
    dataset: &Dataset,
    rows: &[usize],
    candidates: &[usize],
) -> Result<SplitCandidate> {
    let selected = select_feature_on_rows(dataset, rows, candidates)?;
    let (threshold, f1) = select_threshold(&selected.curve);
    Ok(SplitCandidate {
        feature_index: selected.feature_index,
        auprc: selected.auprc,
        threshold,
        f1,
    })
}
