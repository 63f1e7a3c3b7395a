//! Exact binomial machinery for median hypothesis tests on sampled scores.
//!
//! Everything here works on the counting statistic `k = #{samples ≥ h}` of a
//! feature's score sample. Under the null hypothesis about the score median,
//! `k` is stochastically dominated by a binomial whose worst-case success
//! probability is maximized term by term, which is what the sums below encode.

use crate::error::{Error, Result};

/// Largest `n` for which binomial coefficients are accumulated in exact
/// integer arithmetic; beyond it the sums switch to a log-space evaluation.
const EXACT_MAX_N: usize = 64;

/// Sidedness of a median test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sided {
    One,
    Two,
}

/// Significance level plus sidedness for a batch of median tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestConfig {
    pub alpha: f64,
    pub sided: Sided,
}

impl TestConfig {
    /// Builds a config, rejecting significance levels outside (0, 1).
    pub fn new(alpha: f64, sided: Sided) -> Result<Self> {
        validate_alpha(alpha)?;
        Ok(TestConfig { alpha, sided })
    }

    /// Smallest sample count at which this config can ever reject.
    pub fn min_samples(&self) -> usize {
        min_samples(self.alpha, self.sided)
    }
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            alpha: 0.05,
            sided: Sided::One,
        }
    }
}

/// A p-value clamped to [0, 1]. Strictly below the significance level rejects.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PValue(f64);

impl PValue {
    fn new(raw: f64) -> Self {
        PValue(raw.clamp(0.0, 1.0))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// Whether the null hypothesis is rejected at level `alpha`.
    pub fn rejects(self, alpha: f64) -> bool {
        self.0 < alpha
    }
}

/// 1-based order-statistic ranks delimiting a two-sided median confidence
/// interval built from `n` samples: the `k1`-th and `k2`-th smallest values.
/// `k1` may be 0, meaning the interval is unbounded below.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfidenceIndices {
    pub k1: usize,
    pub k2: usize,
    pub n: usize,
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "significance level must lie strictly between 0 and 1, got {alpha}"
        )));
    }
    Ok(())
}

fn validate_nk(n: usize, k: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    if k > n {
        return Err(Error::invalid(format!(
            "count k={k} out of range for n={n} samples"
        )));
    }
    Ok(())
}

/// C(n, k) as an exact integer; only valid for `n ≤ 64`.
fn choose_u128(n: usize, k: usize) -> u128 {
    debug_assert!(n <= EXACT_MAX_N && k <= n);
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for j in 1..=k {
        c = c * (n - k + j) as u128 / j as u128;
    }
    c
}

/// ln C(n, k) via a product of ratios; used on the large-`n` path.
fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 0.0;
    for j in 1..=k {
        acc += (((n - k + j) as f64) / j as f64).ln();
    }
    acc
}

/// One binomial probability mass term C(n, i) pⁱ (1−p)ⁿ⁻ⁱ with 0⁰ = 1.
fn binom_pmf(n: usize, i: usize, p: f64) -> f64 {
    if p == 0.0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if i == n { 1.0 } else { 0.0 };
    }
    if n <= EXACT_MAX_N {
        choose_u128(n, i) as f64 * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32)
    } else {
        (ln_choose(n, i) + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()).exp()
    }
}

/// Σ_{i=lo}^{hi} C(n, i) · 2⁻ⁿ. Exact integer accumulation for `n ≤ 64`
/// keeps these fair-coin tail sums monotone in their bounds.
fn half_tail(n: usize, lo: usize, hi: usize) -> f64 {
    debug_assert!(lo <= hi && hi <= n);
    if n <= EXACT_MAX_N {
        let sum: u128 = (lo..=hi).map(|i| choose_u128(n, i)).sum();
        // 2⁻ⁿ is an exact power of two, so this multiply only rounds once.
        sum as f64 * (-(n as f64)).exp2()
    } else {
        let ln_half = -(n as f64) * std::f64::consts::LN_2;
        let mut ln_c = ln_choose(n, lo);
        let mut acc = (ln_c + ln_half).exp();
        for i in lo..hi {
            ln_c += ((n - i) as f64 / (i + 1) as f64).ln();
            acc += (ln_c + ln_half).exp();
        }
        acc
    }
}

/// Upper binomial tail P[X ≥ k] for X ~ B(n, p), i.e.
/// Σ_{i=k}^{n} C(n, i) pⁱ (1−p)ⁿ⁻ⁱ, under the convention 0⁰ = 1.
pub fn binom_tail_geq(n: usize, k: usize, p: f64) -> Result<f64> {
    validate_nk(n, k)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!(
            "success probability must lie in [0, 1], got {p}"
        )));
    }
    let sum: f64 = (k..=n).map(|i| binom_pmf(n, i, p)).sum();
    Ok(sum.clamp(0.0, 1.0))
}

/// P-value of the null "the score median is ≤ h" given that `k` of `n`
/// samples landed at or above `h`:
///
/// Σ_{i=k}^{n} C(n, i) p*ⁱ (1−p*)ⁿ⁻ⁱ with p* = min(1/2, i/n) per term.
///
/// Rejecting labels the feature *important* (median above the threshold).
pub fn pvalue_median_leq(n: usize, k: usize) -> Result<PValue> {
    validate_nk(n, k)?;
    // From index ⌈n/2⌉ up the per-term worst case is the fair coin, so that
    // block collapses into one exactly-accumulated tail sum.
    let split = n.div_ceil(2);
    let mut sum = 0.0;
    for i in k..split {
        sum += binom_pmf(n, i, i as f64 / n as f64);
    }
    sum += half_tail(n, k.max(split), n);
    Ok(PValue::new(sum))
}

/// P-value of the null "the score median is ≥ h" given `k` of `n` at or
/// above `h`. Reflecting samples about `h` turns this into
/// [`pvalue_median_leq`] with count `n − k`, and evaluating it that way keeps
/// the pair exactly symmetric. Rejecting labels the feature *unimportant*.
pub fn pvalue_median_geq(n: usize, k: usize) -> Result<PValue> {
    validate_nk(n, k)?;
    pvalue_median_leq(n, n - k)
}

/// Two-sided p-value of the null "the score median equals h": the fair-coin
/// probability of the tails { 0..min(k, n−k) } ∪ { max(k, n−k)..n }, each
/// index counted once.
pub fn pvalue_median_eq(n: usize, k: usize) -> Result<PValue> {
    validate_nk(n, k)?;
    let k1 = k.min(n - k);
    let k2 = k.max(n - k);
    let sum = if k2 <= k1 + 1 {
        // The two tails cover every index; the mass is the whole distribution
        // (k2 == k1 happens at k = n/2, k2 == k1+1 for odd n at the middle).
        1.0
    } else {
        half_tail(n, 0, k1) + half_tail(n, k2, n)
    };
    Ok(PValue::new(sum))
}

/// Order-statistic ranks of the two-sided 1−α median confidence interval:
/// the largest `k1` with Σ_{i=0}^{k1} C(n, i) 2⁻ⁿ ≤ α/2, and `k2 = n − k1`.
///
/// Fails with [`Error::InsufficientSamples`] when even the single point
/// `i = 0` carries more than α/2 mass, i.e. 2⁻ⁿ > α/2.
pub fn confidence_indices(n: usize, alpha: f64) -> Result<ConfidenceIndices> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    validate_alpha(alpha)?;
    let half_alpha = alpha / 2.0;
    let mut best: Option<usize> = None;
    if n <= EXACT_MAX_N {
        let mut acc: u128 = 0;
        for i in 0..=n / 2 {
            acc += choose_u128(n, i);
            if acc as f64 * (-(n as f64)).exp2() <= half_alpha {
                best = Some(i);
            } else {
                break;
            }
        }
    } else {
        let ln_half = -(n as f64) * std::f64::consts::LN_2;
        let mut ln_c = 0.0;
        let mut acc = 0.0;
        for i in 0..=n / 2 {
            if i > 0 {
                ln_c += ((n - i + 1) as f64 / i as f64).ln();
            }
            acc += (ln_c + ln_half).exp();
            if acc <= half_alpha {
                best = Some(i);
            } else {
                break;
            }
        }
    }
    match best {
        Some(k1) => {
            let k2 = n - k1;
            debug_assert!(k1 < k2);
            Ok(ConfidenceIndices { k1, k2, n })
        }
        None => Err(Error::InsufficientSamples {
            required: min_samples(alpha, Sided::Two),
            actual: n,
            alpha,
        }),
    }
}

/// Smallest sample count at which a median test at level `alpha` can reject:
/// ⌈−log₂ α⌉ one-sided, one more than that two-sided.
///
/// Panics if `alpha` lies outside (0, 1); validate user input first.
pub fn min_samples(alpha: f64, sided: Sided) -> usize {
    assert!(
        alpha > 0.0 && alpha < 1.0,
        "significance level must lie strictly between 0 and 1, got {alpha}"
    );
    let base = (-alpha.log2()).ceil().max(1.0) as usize;
    match sided {
        Sided::One => base,
        Sided::Two => base + 1,
    }
}

/// Asymptotic 1−α interval for a mean score: mean ± z_{α/2} · SE, where SE
/// is the jackknife standard error of the mean (delete-one resampling).
pub fn smoothgrad_asymptotic_ci(samples: &[f64], alpha: f64) -> Result<(f64, f64)> {
    validate_alpha(alpha)?;
    let n = samples.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "asymptotic interval needs at least 2 samples, got {n}"
        )));
    }
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite sample value {bad}")));
    }
    let total: f64 = samples.iter().sum();
    let mean = total / n as f64;
    // Delete-one means; their mean equals the full-sample mean exactly in
    // real arithmetic, so center on `mean` directly.
    let ss: f64 = samples
        .iter()
        .map(|&x| {
            let loo = (total - x) / (n - 1) as f64;
            (loo - mean) * (loo - mean)
        })
        .sum();
    let se = ((n - 1) as f64 / n as f64 * ss).sqrt();
    let z = normal_quantile(1.0 - alpha / 2.0);
    Ok((mean - z * se, mean + z * se))
}

/// Standard normal quantile Φ⁻¹(p) via Acklam's rational approximation of
/// the inverse error function (absolute error well below 1e-6).
///
/// Panics if `p` lies outside (0, 1).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile argument must lie in (0, 1)");
    // Coefficients kept exactly as published.
    #[allow(clippy::excessive_precision)]
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239e0,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838e0,
        -2.549732539343734e0,
        4.374664141464968e0,
        2.938163982698783e0,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996e0,
        3.754408661907416e0,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| -> f64 {
        // q = sqrt(-2 ln p_tail), valid for the lower tail; negate for upper.
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}
