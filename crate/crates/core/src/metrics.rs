//! Faithfulness, robustness, and stability metrics for attribution maps.
//!
//! Image-style faithfulness traces keep/remove curves over the feature
//! ranking (insertion, deletion, overall); robust variants average those
//! curves over noise-perturbed inputs while the map stays fixed. Text
//! faithfulness perturbs token sequences around the ranking (delete the
//! top tokens, retain them against a donor, or keep only them). Stability
//! is the mean per-feature standard deviation of explanations across noisy
//! inputs, and context-bias faithfulness measures how much of a
//! segmentation score survives masking the input down to the explained
//! region.
//!
//! All metrics depend on the attribution map only through its feature
//! ranking, so any strictly increasing transform of the scores leaves them
//! unchanged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::SampleMatrix;
use crate::sampling::{apply_noise, target_score, Input, NoiseSpec, Predictor};

/// Clean-score floor below which normalized curve metrics are refused.
pub const SCORE_FLOOR: f64 = 1e-9;

/// Default number of noise draws for robust metric estimates.
pub const DEFAULT_METRIC_DRAWS: usize = 10;

/// Default number of curve steps for insertion and deletion.
pub const DEFAULT_CURVE_STEPS: usize = 100;

/// How `fdt` disposes of the top-ranked tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenDeletion {
    /// Delete the positions outright, shortening the sequence.
    Shorten,
    /// Replace the positions with an empty token, preserving sequence
    /// length for predictors that require fixed-size inputs.
    Mask,
}

/// Feature indices ordered by attribution score, highest first; ties go to
/// the lower index so replays are deterministic.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

fn check_map(map: &[f64], n_features: usize) -> Result<()> {
    if map.len() != n_features {
        return Err(Error::invalid(format!(
            "attribution map has {} scores but the input has {} features",
            map.len(),
            n_features
        )));
    }
    if let Some(j) = map.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "attribution map score for feature {j} is not finite"
        )));
    }
    Ok(())
}

/// Shared keep/remove curve. `keep_top = true` reveals the top `count`
/// features into a blank (all-zero) input; `false` zeroes them out of the
/// full input.
fn curve_mean(
    predictor: &dyn Predictor,
    input: &Input,
    map: &[f64],
    target: usize,
    steps: usize,
    keep_top: bool,
) -> Result<f64> {
    if steps == 0 {
        return Err(Error::invalid("curve metrics need at least one step"));
    }
    let values = input.as_dense()?;
    check_map(map, values.len())?;
    let base = target_score(predictor, input, target)?;
    if base <= SCORE_FLOOR {
        return Err(Error::ZeroScore { score: base });
    }
    let ranking = rank_descending(map);
    let n = values.len();
    let mut sum = 0.0;
    for s in 0..=steps {
        let count = (((s * n) as f64 / steps as f64).round() as usize).min(n);
        let probe = if keep_top {
            let mut kept = vec![0.0; n];
            for &j in &ranking[..count] {
                kept[j] = values[j];
            }
            kept
        } else {
            let mut remaining = values.to_vec();
            for &j in &ranking[..count] {
                remaining[j] = 0.0;
            }
            remaining
        };
        sum += target_score(predictor, &input.replace_dense(probe), target)?;
    }
    Ok(sum / (steps + 1) as f64 / base)
}

/// Mean normalized score as top-ranked features are progressively revealed
/// into a blank input, over `steps + 1` evenly spaced keep fractions
/// including both endpoints. Values above 1 are legal and not clamped.
pub fn insertion(
    predictor: &dyn Predictor,
    input: &Input,
    map: &[f64],
    target: usize,
    steps: usize,
) -> Result<f64> {
    curve_mean(predictor, input, map, target, steps, true)
}

/// Mean normalized score as top-ranked features are progressively zeroed
/// out of the full input; mirror of [`insertion`].
pub fn deletion(
    predictor: &dyn Predictor,
    input: &Input,
    map: &[f64],
    target: usize,
    steps: usize,
) -> Result<f64> {
    curve_mean(predictor, input, map, target, steps, false)
}

/// Insertion minus deletion; also used for the robust pair, so the
/// difference identity holds exactly as computed.
pub fn overall(insertion: f64, deletion: f64) -> f64 {
    insertion - deletion
}

/// Mean of `metric` over `draws` noise-perturbed copies of `input`, one
/// deterministic RNG stream per draw.
fn robust_mean(
    spec: &NoiseSpec,
    draws: usize,
    seed: u64,
    input: &Input,
    mut metric: impl FnMut(&Input) -> Result<f64>,
) -> Result<f64> {
    if draws == 0 {
        return Err(Error::invalid("robust metrics need at least one noise draw"));
    }
    spec.validate()?;
    let mut sum = 0.0;
    for index in 0..draws {
        let at = |source: Error| Error::AtDraw {
            index,
            source: Box::new(source),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let noisy = apply_noise(spec, input, &mut rng).map_err(at)?;
        sum += metric(&noisy).map_err(at)?;
    }
    Ok(sum / draws as f64)
}

/// Mean insertion over noise-perturbed inputs with the map held fixed;
/// each draw is normalized by its own clean score.
#[allow(clippy::too_many_arguments)]
pub fn robust_insertion(
    predictor: &dyn Predictor,
    input: &Input,
    map: &[f64],
    target: usize,
    spec: &NoiseSpec,
    draws: usize,
    steps: usize,
    seed: u64,
) -> Result<f64> {
    robust_mean(spec, draws, seed, input, |noisy| {
        insertion(predictor, noisy, map, target, steps)
    })
}

/// Mean deletion over noise-perturbed inputs with the map held fixed.
#[allow(clippy::too_many_arguments)]
pub fn robust_deletion(
    predictor: &dyn Predictor,
    input: &Input,
    map: &[f64],
    target: usize,
    spec: &NoiseSpec,
    draws: usize,
    steps: usize,
    seed: u64,
) -> Result<f64> {
    robust_mean(spec, draws, seed, input, |noisy| {
        deletion(predictor, noisy, map, target, steps)
    })
}

/// Grand mean, over inputs and features, of the population standard
/// deviation of attribution scores across noisy-input explanations. Each
/// matrix holds one input's explanations as rows (at least two).
pub fn mstd(per_input: &[SampleMatrix]) -> Result<f64> {
    if per_input.is_empty() {
        return Err(Error::invalid("mstd needs at least one input"));
    }
    let mut sum = 0.0;
    let mut cells = 0usize;
    for (index, matrix) in per_input.iter().enumerate() {
        if matrix.n_samples() < 2 {
            return Err(Error::invalid(format!(
                "mstd needs at least 2 noisy explanations per input; input {index} has {}",
                matrix.n_samples()
            )));
        }
        let n = matrix.n_samples() as f64;
        for j in 0..matrix.n_features() {
            // Center on the first value so identical columns cancel exactly
            // and the std is zero with no rounding residue.
            let origin = matrix.get(0, j);
            let mean = matrix.column(j).map(|v| v - origin).sum::<f64>() / n;
            let variance = matrix
                .column(j)
                .map(|v| (v - origin - mean).powi(2))
                .sum::<f64>()
                / n;
            sum += variance.sqrt();
            cells += 1;
        }
    }
    Ok(sum / cells as f64)
}

/// The `n` top-ranked positions of `map` as a boolean mask over `len`.
fn top_mask(map: &[f64], n: usize, len: usize) -> Result<Vec<bool>> {
    check_map(map, len)?;
    if n == 0 || n > len {
        return Err(Error::invalid(format!(
            "top-n count {n} out of range for a sequence of {len} tokens"
        )));
    }
    let ranking = rank_descending(map);
    let mut top = vec![false; len];
    for &j in &ranking[..n] {
        top[j] = true;
    }
    Ok(top)
}

/// Target score after deleting the `n` top-ranked tokens (sequence
/// shortened).
pub fn fdt(
    predictor: &dyn Predictor,
    input: &Input,
    map: &[f64],
    n: usize,
    target: usize,
) -> Result<f64> {
    fdt_with(predictor, input, map, n, target, TokenDeletion::Shorten)
}

/// [`fdt`] with an explicit deletion mode for fixed-length predictors.
pub fn fdt_with(
    predictor: &dyn Predictor,
    input: &Input,
    map: &[f64],
    n: usize,
    target: usize,
    mode: TokenDeletion,
) -> Result<f64> {
    let tokens = input.as_tokens()?;
    let top = top_mask(map, n, tokens.len())?;
    let remaining: Vec<String> = match mode {
        TokenDeletion::Shorten => tokens
            .iter()
            .zip(&top)
            .filter(|(_, &t)| !t)
            .map(|(tok, _)| tok.clone())
            .collect(),
        TokenDeletion::Mask => tokens
            .iter()
            .zip(&top)
            .map(|(tok, &t)| if t { String::new() } else { tok.clone() })
            .collect(),
    };
    target_score(predictor, &Input::Tokens(remaining), target)
}

/// Target score keeping the `n` top-ranked tokens in place and replacing
/// every other position with the donor's token at that position.
pub fn fat(
    predictor: &dyn Predictor,
    input: &Input,
    map: &[f64],
    n: usize,
    donor: &[String],
    target: usize,
) -> Result<f64> {
    let tokens = input.as_tokens()?;
    if donor.len() < tokens.len() {
        return Err(Error::invalid(format!(
            "donor sequence has {} tokens but at least {} are required",
            donor.len(),
            tokens.len()
        )));
    }
    let top = top_mask(map, n, tokens.len())?;
    let patched: Vec<String> = tokens
        .iter()
        .enumerate()
        .map(|(i, tok)| {
            if top[i] {
                tok.clone()
            } else {
                donor[i].clone()
            }
        })
        .collect();
    target_score(predictor, &Input::Tokens(patched), target)
}

/// Target score keeping only the `n` top-ranked tokens, in original order.
pub fn st(
    predictor: &dyn Predictor,
    input: &Input,
    map: &[f64],
    n: usize,
    target: usize,
) -> Result<f64> {
    let tokens = input.as_tokens()?;
    let top = top_mask(map, n, tokens.len())?;
    let kept: Vec<String> = tokens
        .iter()
        .enumerate()
        .filter(|(i, _)| top[*i])
        .map(|(_, tok)| tok.clone())
        .collect();
    target_score(predictor, &Input::Tokens(kept), target)
}

/// Mean [`fdt`] over substitution-perturbed sequences, map held fixed.
#[allow(clippy::too_many_arguments)]
pub fn robust_fdt(
    predictor: &dyn Predictor,
    input: &Input,
    map: &[f64],
    n: usize,
    target: usize,
    spec: &NoiseSpec,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    robust_fdt_with(
        predictor,
        input,
        map,
        n,
        target,
        TokenDeletion::Shorten,
        spec,
        draws,
        seed,
    )
}

/// [`robust_fdt`] with an explicit deletion mode.
#[allow(clippy::too_many_arguments)]
pub fn robust_fdt_with(
    predictor: &dyn Predictor,
    input: &Input,
    map: &[f64],
    n: usize,
    target: usize,
    mode: TokenDeletion,
    spec: &NoiseSpec,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    robust_mean(spec, draws, seed, input, |noisy| {
        fdt_with(predictor, noisy, map, n, target, mode)
    })
}

/// Mean [`fat`] over substitution-perturbed sequences, map held fixed.
#[allow(clippy::too_many_arguments)]
pub fn robust_fat(
    predictor: &dyn Predictor,
    input: &Input,
    map: &[f64],
    n: usize,
    donor: &[String],
    target: usize,
    spec: &NoiseSpec,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    robust_mean(spec, draws, seed, input, |noisy| {
        fat(predictor, noisy, map, n, donor, target)
    })
}

/// Mean [`st`] over substitution-perturbed sequences, map held fixed.
#[allow(clippy::too_many_arguments)]
pub fn robust_st(
    predictor: &dyn Predictor,
    input: &Input,
    map: &[f64],
    n: usize,
    target: usize,
    spec: &NoiseSpec,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    robust_mean(spec, draws, seed, input, |noisy| {
        st(predictor, noisy, map, n, target)
    })
}

/// Per-feature scorer for a segmentation model; scores align with the
/// input's feature order.
pub trait Segmenter {
    /// Per-feature segmentation scores for the given input.
    fn segment_scores(&self, input: &Input) -> Result<Vec<f64>>;
}

fn checked_scores(segmenter: &dyn Segmenter, input: &Input, n: usize) -> Result<Vec<f64>> {
    let scores = segmenter.segment_scores(input)?;
    if scores.len() != n {
        return Err(Error::invalid(format!(
            "segmenter returned {} scores for {n} features",
            scores.len()
        )));
    }
    if let Some(j) = scores.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "segmentation score for feature {j} is not finite"
        )));
    }
    Ok(scores)
}

/// Fraction of the segmentation score inside `region` that survives
/// masking the input down to the union of `region` and `explanation`;
/// 1.0 means the explained area preserves the segmentation fully. Score
/// increases under masking are clipped to zero drop.
pub fn context_bias_faithfulness(
    segmenter: &dyn Segmenter,
    input: &Input,
    region: &[bool],
    explanation: &[bool],
) -> Result<f64> {
    let values = input.as_dense()?;
    if region.len() != values.len() || explanation.len() != values.len() {
        return Err(Error::invalid(format!(
            "masks of {} and {} entries do not match {} features",
            region.len(),
            explanation.len(),
            values.len()
        )));
    }
    let region_size = region.iter().filter(|&&r| r).count();
    if region_size == 0 {
        return Err(Error::EmptyMask);
    }
    let clean = checked_scores(segmenter, input, values.len())?;
    let masked_values: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| if region[i] || explanation[i] { v } else { 0.0 })
        .collect();
    let masked = checked_scores(segmenter, &input.replace_dense(masked_values), values.len())?;
    let mut drop = 0.0;
    for i in 0..values.len() {
        if region[i] {
            drop += (clean[i] - masked[i]).max(0.0);
        }
    }
    Ok(1.0 - drop / region_size as f64)
}

/// Named metric values from one evaluation run plus the noise provenance
/// needed to reproduce the robust entries; metrics that were not computed
/// stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub insertion: Option<f64>,
    pub deletion: Option<f64>,
    pub overall: Option<f64>,
    pub ri: Option<f64>,
    pub rd: Option<f64>,
    pub ro: Option<f64>,
    pub mstd: Option<f64>,
    pub fdt: Option<f64>,
    pub fat: Option<f64>,
    pub st: Option<f64>,
    pub rfdt: Option<f64>,
    pub rfat: Option<f64>,
    pub rst: Option<f64>,
    pub m_f: Option<f64>,
    /// Top-n count the text metrics were computed with.
    pub top_n: Option<usize>,
    /// Rendered noise spec used for the robust metrics.
    pub noise: Option<String>,
    /// Number of noise draws behind each robust metric.
    pub draws: Option<usize>,
    /// Seed behind the robust-metric noise streams.
    pub seed: Option<u64>,
}

impl MetricsReport {
    /// Present metric names and values, in a stable order.
    pub fn values(&self) -> Vec<(&'static str, f64)> {
        [
            ("insertion", self.insertion),
            ("deletion", self.deletion),
            ("overall", self.overall),
            ("ri", self.ri),
            ("rd", self.rd),
            ("ro", self.ro),
            ("mstd", self.mstd),
            ("fdt", self.fdt),
            ("fat", self.fat),
            ("st", self.st),
            ("rfdt", self.rfdt),
            ("rfat", self.rfat),
            ("rst", self.rst),
            ("m_f", self.m_f),
        ]
        .into_iter()
        .filter_map(|(name, value)| value.map(|v| (name, v)))
        .collect()
    }

    /// Checks that every present value is finite and that the difference
    /// identities hold to 1e-12.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.values() {
            if !value.is_finite() {
                return Err(Error::invalid(format!("metric {name} is not finite")));
            }
        }
        for (name, i, d, o) in [
            ("overall", self.insertion, self.deletion, self.overall),
            ("ro", self.ri, self.rd, self.ro),
        ] {
            if let (Some(i), Some(d), Some(o)) = (i, d, o) {
                if (o - (i - d)).abs() > 1e-12 {
                    return Err(Error::invalid(format!(
                        "{name} does not equal its difference identity"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use rand::distributions::{Distribution, Uniform};
    use rand::Rng;

    use super::*;
    use crate::sampling::{
        ConstPredictor, LinearSoftmaxPredictor, PlantedPredictor, TokenCountPredictor,
    };

    fn planted() -> (PlantedPredictor, Input) {
        let predictor = PlantedPredictor::linear(vec![0, 1]);
        let input = Input::dense(vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        (predictor, input)
    }

    fn bad_movie() -> (TokenCountPredictor, Input) {
        let predictor = TokenCountPredictor::new([("bad".to_string(), 5.0)]);
        let input = Input::tokens(vec![
            "bad".to_string(),
            "movie".to_string(),
            "tonight".to_string(),
        ])
        .unwrap();
        (predictor, input)
    }

    #[test]
    fn ranking_is_descending_with_index_ties() {
        assert_eq!(rank_descending(&[1.0, 1.0, 0.5]), vec![0, 1, 2]);
        assert_eq!(rank_descending(&[0.5, 1.0, 1.0]), vec![1, 2, 0]);
        assert_eq!(rank_descending(&[0.0, 0.3, 0.2, 0.9]), vec![3, 1, 2, 0]);
    }

    #[test]
    fn insertion_and_deletion_match_the_planted_enumeration() {
        let (predictor, input) = planted();
        let correct = [1.0, 1.0, 0.0, 0.0];
        let inverted = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(
            insertion(&predictor, &input, &correct, 1, 4).unwrap(),
            0.7,
            "correct map: curve (0, 0.5, 1, 1, 1)/5"
        );
        assert_eq!(
            deletion(&predictor, &input, &correct, 1, 4).unwrap(),
            0.3,
            "correct map: curve (1, 0.5, 0, 0, 0)/5"
        );
        assert_eq!(
            insertion(&predictor, &input, &inverted, 1, 4).unwrap(),
            0.3,
            "inverted map: curve (0, 0, 0, 0.5, 1)/5"
        );
        assert_eq!(
            deletion(&predictor, &input, &inverted, 1, 4).unwrap(),
            0.7,
            "inverted map: curve (1, 1, 1, 0.5, 0)/5"
        );
    }

    #[test]
    fn constant_predictor_scores_one_everywhere() {
        let predictor = ConstPredictor::new(0.6);
        let input = Input::dense(vec![0.2, 0.4, 0.6]).unwrap();
        let map = [0.9, 0.1, 0.5];
        let ins = insertion(&predictor, &input, &map, 0, 3).unwrap();
        let del = deletion(&predictor, &input, &map, 0, 3).unwrap();
        assert_eq!(ins, 1.0, "normalization cancels for a constant predictor");
        assert_eq!(del, 1.0);
        assert_eq!(overall(ins, del), 0.0);
    }

    #[test]
    fn overall_is_the_difference() {
        assert!((overall(0.7, 0.3) - 0.4).abs() < 1e-15);
        assert_eq!(overall(1.0, 1.0), 0.0);
        assert!((overall(0.3, 0.7) + 0.4).abs() < 1e-15);
    }

    #[test]
    fn zero_clean_score_is_refused() {
        let predictor = ConstPredictor::new(0.0);
        let input = Input::dense(vec![1.0, 2.0]).unwrap();
        let err = insertion(&predictor, &input, &[0.5, 0.5], 0, 2).unwrap_err();
        assert!(
            matches!(err, Error::ZeroScore { score } if score == 0.0),
            "got {err:?}"
        );
    }

    #[test]
    fn curve_arguments_are_validated() {
        let (predictor, input) = planted();
        assert!(insertion(&predictor, &input, &[1.0, 1.0, 0.0, 0.0], 1, 0).is_err());
        assert!(insertion(&predictor, &input, &[1.0, 1.0], 1, 4).is_err());
        assert!(insertion(&predictor, &input, &[1.0, f64::NAN, 0.0, 0.0], 1, 4).is_err());
    }

    #[test]
    fn normalized_scores_above_one_are_not_clamped() {
        // Negative logits for the target mean a blank input scores higher
        // than the clean one, pushing the normalized mean above 1.
        let predictor =
            LinearSoftmaxPredictor::new(vec![vec![-1.0, -1.0], vec![1.0, 1.0]]).unwrap();
        let input = Input::dense(vec![1.0, 1.0]).unwrap();
        let ins = insertion(&predictor, &input, &[1.0, 0.5], 0, 1).unwrap();
        assert!(ins > 1.0, "blank input outscores clean input, got {ins}");
    }

    #[test]
    fn metrics_depend_only_on_the_ranking() {
        let (predictor, input) = planted();
        let base: [f64; 4] = [0.9, 0.8, 0.1, 0.05];
        let shifted = [3.0, 2.0, 1.0, 0.0];
        let exp: Vec<f64> = base.iter().map(|v| v.exp()).collect();
        for map in [&shifted[..], &exp[..]] {
            assert_eq!(
                insertion(&predictor, &input, &base, 1, 4).unwrap(),
                insertion(&predictor, &input, map, 1, 4).unwrap(),
                "insertion must be rank-invariant"
            );
            assert_eq!(
                deletion(&predictor, &input, &base, 1, 4).unwrap(),
                deletion(&predictor, &input, map, 1, 4).unwrap(),
                "deletion must be rank-invariant"
            );
        }
    }

    #[test]
    fn correct_map_is_the_unique_insertion_maximizer() {
        let (predictor, input) = planted();
        let correct = [1.0, 1.0, 0.0, 0.0];
        let best = insertion(&predictor, &input, &correct, 1, 4).unwrap();
        let mut maximizers = 0;
        // All 24 rankings, encoded as maps assigning descending scores.
        let perms = permutations(&[0, 1, 2, 3]);
        for perm in &perms {
            let mut map = [0.0; 4];
            for (rank, &feature) in perm.iter().enumerate() {
                map[feature] = (4 - rank) as f64;
            }
            let value = insertion(&predictor, &input, &map, 1, 4).unwrap();
            assert!(value <= best + 1e-15, "ordering {perm:?} beats the planted map");
            if (value - best).abs() < 1e-15 {
                maximizers += 1;
                assert_eq!(
                    [perm[0].min(perm[1]), perm[0].max(perm[1])],
                    [0, 1],
                    "only planted-pair-first orderings may attain the maximum"
                );
            }
        }
        // Two arrangements of the planted pair times two of the tail.
        assert_eq!(maximizers, 4, "exactly the planted-first orderings attain 0.7");
    }

    fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for (i, &head) in items.iter().enumerate() {
            let mut rest = items.to_vec();
            rest.remove(i);
            for mut tail in permutations(&rest) {
                tail.insert(0, head);
                out.push(tail);
            }
        }
        out
    }

    #[test]
    fn zero_noise_robust_metrics_reduce_to_base() {
        let (predictor, input) = planted();
        let map = [1.0, 1.0, 0.0, 0.0];
        let spec = NoiseSpec::identity_dense();
        let ri = robust_insertion(&predictor, &input, &map, 1, &spec, 10, 4, 7).unwrap();
        let rd = robust_deletion(&predictor, &input, &map, 1, &spec, 10, 4, 7).unwrap();
        assert!((ri - 0.7).abs() <= 1e-12, "zero-noise RI drifted: {ri}");
        assert!((rd - 0.3).abs() <= 1e-12, "zero-noise RD drifted: {rd}");
        assert_eq!(overall(ri, rd), ri - rd, "difference identity is exact");
    }

    #[test]
    fn robust_insertion_matches_an_independent_replay() {
        let (predictor, input) = planted();
        let map = [1.0, 1.0, 0.0, 0.0];
        let spec = NoiseSpec::Uniform {
            low: -0.1,
            high: 0.1,
        };
        let value = robust_insertion(&predictor, &input, &map, 1, &spec, 10, 4, 7).unwrap();

        // Replay the stream contract by hand: one ChaCha8 stream per draw,
        // additive uniform noise per feature, then the 5-point curve.
        let clean = input.as_dense().unwrap();
        let dist = Uniform::new_inclusive(-0.1, 0.1);
        let mut expected = 0.0;
        for draw in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            rng.set_stream(draw);
            let noisy: Vec<f64> = clean.iter().map(|v| v + dist.sample(&mut rng)).collect();
            let f = |x: &[f64]| (x[0] + x[1]) / 2.0;
            let base = f(&noisy);
            let curve = [
                0.0,
                f(&[noisy[0], 0.0]),
                f(&[noisy[0], noisy[1]]),
                f(&[noisy[0], noisy[1]]),
                f(&[noisy[0], noisy[1]]),
            ];
            expected += curve.iter().sum::<f64>() / 5.0 / base;
        }
        expected /= 10.0;
        assert_eq!(value, expected, "robust insertion must follow the stream contract");
        assert!((value - 0.7).abs() < 0.1, "mild noise stays near 0.7: {value}");
    }

    #[test]
    fn robust_errors_carry_the_draw_index() {
        let predictor = ConstPredictor::new(0.0);
        let input = Input::dense(vec![1.0]).unwrap();
        let err =
            robust_insertion(&predictor, &input, &[1.0], 0, &NoiseSpec::identity_dense(), 3, 1, 0)
                .unwrap_err();
        assert!(
            matches!(err, Error::AtDraw { index: 0, .. }),
            "first draw fails first: {err:?}"
        );
        assert!(matches!(err.root_cause(), Error::ZeroScore { .. }));
        let (predictor, input) = planted();
        assert!(robust_insertion(
            &predictor,
            &input,
            &[1.0, 1.0, 0.0, 0.0],
            1,
            &NoiseSpec::identity_dense(),
            0,
            4,
            0
        )
        .is_err());
    }

    #[test]
    fn mstd_matches_hand_arithmetic() {
        let zeros_ones =
            SampleMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(mstd(std::slice::from_ref(&zeros_ones)).unwrap(), 0.5);
        let constant = SampleMatrix::from_rows(&[vec![0.4], vec![0.4], vec![0.4]]).unwrap();
        assert_eq!(mstd(std::slice::from_ref(&constant)).unwrap(), 0.0);
        // Grand mean weights every (input, feature) cell equally.
        let mixed = mstd(&[zeros_ones, constant]).unwrap();
        assert!((mixed - (0.5 + 0.5 + 0.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mstd_rejects_single_sample_inputs() {
        let single = SampleMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(mstd(&[single]).is_err(), "one noisy explanation has no spread");
        assert!(mstd(&[]).is_err());
    }

    #[test]
    fn mstd_is_zero_only_for_identical_explanations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let rows: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let identical = rows[0].clone();
            let spread = SampleMatrix::from_rows(&rows).unwrap();
            let flat = SampleMatrix::from_rows(&vec![identical; 4]).unwrap();
            assert!(mstd(&[spread]).unwrap() >= 0.0);
            assert_eq!(mstd(&[flat]).unwrap(), 0.0);
        }
    }

    #[test]
    fn text_metrics_match_the_token_example() {
        let (predictor, input) = bad_movie();
        let map = [1.0, 0.5, 0.2];
        let sigma5 = 0.9933071490757153;
        assert_eq!(
            fdt(&predictor, &input, &map, 1, 1).unwrap(),
            0.5,
            "removing the only weighted token leaves a zero sum"
        );
        assert_eq!(
            st(&predictor, &input, &map, 1, 1).unwrap(),
            sigma5,
            "keeping only the weighted token preserves the score"
        );
        let donor: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            fat(&predictor, &input, &map, 3, &donor, 1).unwrap(),
            sigma5,
            "full-length retention never consults the donor"
        );
        assert_eq!(fat(&predictor, &input, &map, 1, &donor, 1).unwrap(), sigma5);
    }

    #[test]
    fn fat_substitutes_donor_tokens_in_place() {
        let (predictor, input) = bad_movie();
        let map = [1.0, 0.5, 0.2];
        let donor: Vec<String> = ["q", "bad", "r", "extra"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        // Positions 1 and 2 come from the donor; position 1 adds another
        // "bad", doubling the weight sum to 10.
        let sigma10 = 1.0 / (1.0 + (-10.0f64).exp());
        assert_eq!(fat(&predictor, &input, &map, 1, &donor, 1).unwrap(), sigma10);
    }

    #[test]
    fn fdt_mask_mode_preserves_length() {
        let (predictor, input) = bad_movie();
        let map = [1.0, 0.5, 0.2];
        struct LengthGuard(TokenCountPredictor);
        impl Predictor for LengthGuard {
            fn n_labels(&self) -> usize {
                self.0.n_labels()
            }
            fn predict(&self, input: &Input) -> Result<Vec<f64>> {
                let tokens = input.as_tokens()?;
                if tokens.len() != 3 {
                    return Err(Error::invalid("this predictor requires 3 tokens"));
                }
                self.0.predict(input)
            }
        }
        let guard = LengthGuard(TokenCountPredictor::new([("bad".to_string(), 5.0)]));
        assert!(
            fdt(&guard, &input, &map, 1, 1).is_err(),
            "shortening breaks a fixed-length predictor"
        );
        let masked = fdt_with(&guard, &input, &map, 1, 1, TokenDeletion::Mask).unwrap();
        assert_eq!(masked, 0.5, "empty replacement token carries no weight");
        assert_eq!(
            fdt_with(&predictor, &input, &map, 3, 1, TokenDeletion::Shorten).unwrap(),
            0.5,
            "deleting every token leaves the empty sequence"
        );
    }

    #[test]
    fn text_metric_arguments_are_validated() {
        let (predictor, input) = bad_movie();
        let map = [1.0, 0.5, 0.2];
        assert!(fdt(&predictor, &input, &map, 0, 1).is_err());
        assert!(fdt(&predictor, &input, &map, 4, 1).is_err());
        let short_donor = vec!["x".to_string()];
        assert!(fat(&predictor, &input, &map, 1, &short_donor, 1).is_err());
        let dense = Input::dense(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(fdt(&predictor, &dense, &map, 1, 1).is_err());
    }

    #[test]
    fn zero_substitution_robust_text_metrics_reduce_to_base() {
        let (predictor, input) = bad_movie();
        let map = [1.0, 0.5, 0.2];
        let spec = NoiseSpec::identity_tokens();
        let base = st(&predictor, &input, &map, 1, 1).unwrap();
        let robust = robust_st(&predictor, &input, &map, 1, 1, &spec, 10, 3).unwrap();
        assert!((robust - base).abs() <= 1e-12);
        let donor: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let base_fat = fat(&predictor, &input, &map, 2, &donor, 1).unwrap();
        let robust_fat_value =
            robust_fat(&predictor, &input, &map, 2, &donor, 1, &spec, 10, 3).unwrap();
        assert!((robust_fat_value - base_fat).abs() <= 1e-12);
        let base_fdt = fdt(&predictor, &input, &map, 1, 1).unwrap();
        let robust_fdt_value =
            robust_fdt(&predictor, &input, &map, 1, 1, &spec, 10, 3).unwrap();
        assert!((robust_fdt_value - base_fdt).abs() <= 1e-12);
    }

    #[test]
    fn substitutions_move_robust_text_metrics() {
        let (predictor, input) = bad_movie();
        let map = [1.0, 0.5, 0.2];
        // Every token maps to an unweighted synonym, so any substitution of
        // "bad" lowers the kept-token score.
        let table = crate::sampling::SynonymTable::new([
            ("bad".to_string(), "awful".to_string()),
            ("movie".to_string(), "film".to_string()),
            ("tonight".to_string(), "today".to_string()),
        ]);
        let spec = NoiseSpec::TokenSubstitution { p: 1.0, table };
        let robust = robust_st(&predictor, &input, &map, 1, 1, &spec, 5, 3).unwrap();
        assert_eq!(robust, 0.5, "forced substitution always removes the weight");
    }

    struct ValueSegmenter;
    impl Segmenter for ValueSegmenter {
        fn segment_scores(&self, input: &Input) -> Result<Vec<f64>> {
            Ok(input.as_dense()?.to_vec())
        }
    }

    /// Feature 0's score collapses unless feature 1 survives the mask.
    struct NeighborSegmenter;
    impl Segmenter for NeighborSegmenter {
        fn segment_scores(&self, input: &Input) -> Result<Vec<f64>> {
            let v = input.as_dense()?;
            Ok(vec![if v[1] > 0.0 { v[0] } else { 0.0 }, v[1]])
        }
    }

    #[test]
    fn full_coverage_preserves_the_segmentation() {
        let input = Input::dense(vec![1.0, 2.0, 3.0]).unwrap();
        let region = [true, false, false];
        let explanation = [false, true, true];
        let m_f =
            context_bias_faithfulness(&ValueSegmenter, &input, &region, &explanation).unwrap();
        assert_eq!(m_f, 1.0, "union covers the whole input, nothing changes");
    }

    #[test]
    fn losing_a_needed_neighbor_zeroes_the_score() {
        let input = Input::dense(vec![1.0, 1.0]).unwrap();
        let region = [true, false];
        let explanation = [false, false];
        let m_f =
            context_bias_faithfulness(&NeighborSegmenter, &input, &region, &explanation).unwrap();
        assert_eq!(m_f, 0.0, "masking feature 1 collapses feature 0's score");
        // Explaining the neighbor restores it.
        let with_neighbor = [false, true];
        let m_f =
            context_bias_faithfulness(&NeighborSegmenter, &input, &region, &with_neighbor)
                .unwrap();
        assert_eq!(m_f, 1.0);
    }

    #[test]
    fn score_increases_are_clipped() {
        struct InverseSegmenter;
        impl Segmenter for InverseSegmenter {
            fn segment_scores(&self, input: &Input) -> Result<Vec<f64>> {
                Ok(input.as_dense()?.iter().map(|v| 1.0 - v).collect())
            }
        }
        let input = Input::dense(vec![0.5, 0.5]).unwrap();
        let m_f = context_bias_faithfulness(
            &InverseSegmenter,
            &input,
            &[true, false],
            &[false, false],
        )
        .unwrap();
        assert_eq!(m_f, 1.0, "negative drops are clipped by the Relu");
    }

    #[test]
    fn empty_region_is_refused() {
        let input = Input::dense(vec![1.0, 2.0]).unwrap();
        let err = context_bias_faithfulness(&ValueSegmenter, &input, &[false, false], &[true, true])
            .unwrap_err();
        assert!(matches!(err, Error::EmptyMask));
        assert!(
            context_bias_faithfulness(&ValueSegmenter, &input, &[true], &[true, true]).is_err(),
            "mask lengths must match the feature count"
        );
    }

    #[test]
    fn report_validates_difference_identities() {
        let mut report = MetricsReport {
            insertion: Some(0.7),
            deletion: Some(0.3),
            overall: Some(overall(0.7, 0.3)),
            ..MetricsReport::default()
        };
        report.validate().unwrap();
        assert_eq!(report.values().len(), 3);
        report.overall = Some(0.5);
        assert!(report.validate().is_err(), "0.5 is not 0.7 - 0.3");
        report.overall = Some(f64::NAN);
        assert!(report.validate().is_err(), "NaN metrics are rejected");
    }
}
