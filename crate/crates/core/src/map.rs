//! Turning a score matrix into significance, confidence and smoothed maps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::SampleMatrix;
use crate::stat::{
    confidence_indices, min_samples, pvalue_median_eq, pvalue_median_geq, pvalue_median_leq,
    ConfidenceIndices, Sided,
};

/// Variance of the tie-breaking perturbation when the caller has no opinion.
pub const DEFAULT_TIE_VARIANCE: f64 = 1e-6;

/// Ternary verdict for one feature of a significance map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    /// The score median lies significantly above the threshold.
    Important,
    /// The score median lies significantly below the threshold.
    Unimportant,
    /// Neither null hypothesis could be rejected.
    Undecided,
}

impl Label {
    /// +1 / −1 / 0 encoding used by reports and exports.
    pub fn as_i8(self) -> i8 {
        match self {
            Label::Important => 1,
            Label::Unimportant => -1,
            Label::Undecided => 0,
        }
    }
}

/// Per-feature test verdicts at a fixed threshold, with the p-values that
/// produced them.
#[derive(Debug, Clone)]
pub struct SignificanceMap {
    pub h: f64,
    pub alpha: f64,
    pub labels: Vec<Label>,
    /// P-values of "median ≤ h"; rejection makes a feature [`Label::Important`].
    pub p_above: Vec<f64>,
    /// P-values of "median ≥ h"; rejection makes a feature [`Label::Unimportant`].
    pub p_below: Vec<f64>,
    pub shape: Option<(u16, u16)>,
}

/// Per-feature confidence bounds plus the outlier-trimmed smoothed map.
#[derive(Debug, Clone)]
pub struct ConfidenceBundle {
    pub alpha: f64,
    pub indices: ConfidenceIndices,
    /// Lower 1−α confidence bound per feature. When the rank `k1` is 0 the
    /// interval is unbounded below and the smallest sample stands in.
    pub lower: Vec<f64>,
    /// Upper 1−α confidence bound per feature.
    pub upper: Vec<f64>,
    /// Mean of the order statistics strictly between the two bound ranks.
    pub smoothed: Vec<f64>,
    pub shape: Option<(u16, u16)>,
}

/// Adds i.i.d. N(0, `variance`) perturbations to every entry so that exact
/// score ties cannot pin the counting statistic to the threshold.
///
/// Each feature draws from its own RNG stream derived from `seed` and the
/// feature index, sample by sample, so results do not depend on traversal
/// order. `variance = 0` leaves the values untouched.
pub fn tie_break(matrix: &SampleMatrix, variance: f64, seed: u64) -> Result<SampleMatrix> {
    if !variance.is_finite() || variance < 0.0 {
        return Err(Error::invalid(format!(
            "tie-break variance must be finite and non-negative, got {variance}"
        )));
    }
    let mut out = matrix.clone();
    if variance > 0.0 {
        let n = matrix.n_samples();
        let f = matrix.n_features();
        let dist = Normal::new(0.0, variance.sqrt())
            .map_err(|e| Error::invalid(format!("tie-break noise: {e}")))?;
        let mut noisy = matrix.values().to_vec();
        for j in 0..f {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            for i in 0..n {
                noisy[i * f + j] += dist.sample(&mut rng);
            }
        }
        out = SampleMatrix::new(n, f, noisy)?;
        if let Some((w, h)) = matrix.shape() {
            out = out.with_shape(w, h)?;
        }
    }
    out.set_tie_broken(true);
    Ok(out)
}

/// Splits the pooled score values into two groups by exhaustive search over
/// all sorted split positions, minimizing the summed within-group squared
/// deviation, and returns the midpoint of the two boundary values.
///
/// Equal objectives prefer the more balanced split, then the lower split
/// index. All-identical values carry no threshold information and fail with
/// [`Error::DegenerateInput`].
pub fn jenks_break(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "natural-breaks threshold needs at least 2 values, got {n}"
        )));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite value {bad}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[n - 1] {
        return Err(Error::DegenerateInput(format!(
            "all {n} values equal {}; no break exists",
            sorted[0]
        )));
    }
    // Prefix sums of x and x² make each candidate split O(1).
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, &x) in sorted.iter().enumerate() {
        s1[i + 1] = s1[i] + x;
        s2[i + 1] = s2[i] + x * x;
    }
    let group_ssd = |lo: usize, hi: usize| -> f64 {
        let len = (hi - lo) as f64;
        let sum = s1[hi] - s1[lo];
        (s2[hi] - s2[lo]) - sum * sum / len
    };
    let mut best: Option<(f64, usize, usize)> = None;
    for split in 1..n {
        let total = group_ssd(0, split) + group_ssd(split, n);
        let balance = split.abs_diff(n - split);
        let candidate = (total, balance, split);
        let better = match best {
            None => true,
            Some((t, b, _)) => total < t || (total == t && balance < b),
        };
        if better {
            best = Some(candidate);
        }
    }
    let (_, _, split) = best.expect("n ≥ 2 guarantees a split");
    Ok((sorted[split - 1] + sorted[split]) / 2.0)
}

/// Labels every feature by testing its score median against the threshold
/// `h` with the one-sided pair of median tests at level `alpha`.
///
/// Samples equal to `h` count toward the "at or above" side. Needs at least
/// ⌈−log₂ α⌉ samples; fewer fail with [`Error::InsufficientSamples`].
pub fn significance_map(matrix: &SampleMatrix, h: f64, alpha: f64) -> Result<SignificanceMap> {
    significance_verdicts(matrix, h, alpha, Sided::One)
}

/// Two-sided variant: a feature is labelled by the direction of its count
/// once the null "median equals h" is rejected at level `alpha`. Both
/// recorded p-value arrays hold the same two-sided p-value.
pub fn significance_map_two_sided(
    matrix: &SampleMatrix,
    h: f64,
    alpha: f64,
) -> Result<SignificanceMap> {
    significance_verdicts(matrix, h, alpha, Sided::Two)
}

fn significance_verdicts(
    matrix: &SampleMatrix,
    h: f64,
    alpha: f64,
    sided: Sided,
) -> Result<SignificanceMap> {
    if !h.is_finite() {
        return Err(Error::invalid(format!("threshold must be finite, got {h}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "significance level must lie strictly between 0 and 1, got {alpha}"
        )));
    }
    let n = matrix.n_samples();
    let required = min_samples(alpha, sided);
    if n < required {
        return Err(Error::InsufficientSamples {
            required,
            actual: n,
            alpha,
        });
    }
    let f = matrix.n_features();
    let mut labels = Vec::with_capacity(f);
    let mut p_above = Vec::with_capacity(f);
    let mut p_below = Vec::with_capacity(f);
    for j in 0..f {
        let count = matrix.column(j).filter(|&v| v >= h).count();
        match sided {
            Sided::One => {
                let above = pvalue_median_leq(n, count)?;
                let below = pvalue_median_geq(n, count)?;
                labels.push(if above.rejects(alpha) {
                    Label::Important
                } else if below.rejects(alpha) {
                    Label::Unimportant
                } else {
                    Label::Undecided
                });
                p_above.push(above.get());
                p_below.push(below.get());
            }
            Sided::Two => {
                let p = pvalue_median_eq(n, count)?;
                labels.push(if p.rejects(alpha) && count * 2 > n {
                    Label::Important
                } else if p.rejects(alpha) && count * 2 < n {
                    Label::Unimportant
                } else {
                    Label::Undecided
                });
                p_above.push(p.get());
                p_below.push(p.get());
            }
        }
    }
    Ok(SignificanceMap {
        h,
        alpha,
        labels,
        p_above,
        p_below,
        shape: matrix.shape(),
    })
}

/// Per-feature order-statistic confidence bounds at level 1−α together with
/// the smoothed map: the mean of the samples strictly between the two bound
/// ranks, which trims the same tail mass the interval excludes.
pub fn confidence_bundle(matrix: &SampleMatrix, alpha: f64) -> Result<ConfidenceBundle> {
    let n = matrix.n_samples();
    let indices = confidence_indices(n, alpha)?;
    let (k1, k2) = (indices.k1, indices.k2);
    if k2 - k1 <= 1 {
        return Err(Error::EmptyTrim { k1, k2 });
    }
    let f = matrix.n_features();
    let mut lower = Vec::with_capacity(f);
    let mut upper = Vec::with_capacity(f);
    let mut smoothed = Vec::with_capacity(f);
    for j in 0..f {
        let sorted = matrix.sorted_column(j);
        lower.push(if k1 >= 1 { sorted[k1 - 1] } else { sorted[0] });
        upper.push(sorted[k2 - 1]);
        let trim = &sorted[k1..k2 - 1];
        let mean = trim.iter().sum::<f64>() / trim.len() as f64;
        // The mean of a slice lies between its extremes; clamping only
        // removes the last-bit rounding that could break that guarantee.
        smoothed.push(mean.clamp(trim[0], trim[trim.len() - 1]));
    }
    Ok(ConfidenceBundle {
        alpha,
        indices,
        lower,
        upper,
        smoothed,
        shape: matrix.shape(),
    })
}

/// Plain per-feature mean of the sampled scores.
pub fn smoothgrad_map(matrix: &SampleMatrix) -> Vec<f64> {
    let n = matrix.n_samples() as f64;
    (0..matrix.n_features())
        .map(|j| matrix.column(j).sum::<f64>() / n)
        .collect()
}
