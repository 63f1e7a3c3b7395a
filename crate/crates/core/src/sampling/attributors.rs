//! Reference attribution methods. All of them min-max normalize their raw
//! scores onto [0, 1] per explanation, with all-equal raw maps collapsing to
//! a flat 0.5.

use rand::distributions::{Bernoulli, Distribution};
use rand::RngCore;

use super::{min_max_normalize, target_score, Attributor, Input, Predictor};
use crate::error::{Error, Result};

/// Monte-Carlo masking attribution: a feature's raw score is the mean
/// predictor score over the random masks that keep it.
#[derive(Debug, Clone, Copy)]
pub struct MaskingAttributor {
    n_masks: usize,
    keep_prob: f64,
}

impl MaskingAttributor {
    pub fn new(n_masks: usize, keep_prob: f64) -> Result<Self> {
        if n_masks == 0 {
            return Err(Error::invalid("mask count must be at least 1"));
        }
        if !(0.0..=1.0).contains(&keep_prob) {
            return Err(Error::invalid(format!(
                "keep probability must lie in [0, 1], got {keep_prob}"
            )));
        }
        Ok(MaskingAttributor { n_masks, keep_prob })
    }
}

impl Default for MaskingAttributor {
    /// 200 masks at keep probability 0.5.
    fn default() -> Self {
        MaskingAttributor {
            n_masks: 200,
            keep_prob: 0.5,
        }
    }
}

impl Attributor for MaskingAttributor {
    fn explain(
        &self,
        predictor: &dyn Predictor,
        input: &Input,
        target: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>> {
        let n = input.n_features();
        let dist = Bernoulli::new(self.keep_prob).expect("validated probability");
        let mut sums = vec![0.0; n];
        let mut counts = vec![0usize; n];
        let mut keep = vec![false; n];
        for _ in 0..self.n_masks {
            for flag in keep.iter_mut() {
                *flag = dist.sample(rng);
            }
            let masked = match input {
                Input::Dense { values, .. } => input.replace_dense(
                    values
                        .iter()
                        .zip(&keep)
                        .map(|(&v, &k)| if k { v } else { 0.0 })
                        .collect(),
                ),
                Input::Tokens(tokens) => Input::Tokens(
                    tokens
                        .iter()
                        .zip(&keep)
                        .filter(|(_, &k)| k)
                        .map(|(t, _)| t.clone())
                        .collect(),
                ),
            };
            let score = target_score(predictor, &masked, target)?;
            for j in 0..n {
                if keep[j] {
                    sums[j] += score;
                    counts[j] += 1;
                }
            }
        }
        let mut raw: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect();
        min_max_normalize(&mut raw);
        Ok(raw)
    }
}

/// Leave-one-out attribution: the raw score of a feature is the drop in the
/// target score when that feature is zeroed (dense) or removed (tokens).
#[derive(Debug, Clone, Copy, Default)]
pub struct OcclusionAttributor;

impl Attributor for OcclusionAttributor {
    fn explain(
        &self,
        predictor: &dyn Predictor,
        input: &Input,
        target: usize,
        _rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>> {
        let base = target_score(predictor, input, target)?;
        let n = input.n_features();
        let mut raw = Vec::with_capacity(n);
        for j in 0..n {
            let occluded = match input {
                Input::Dense { values, .. } => {
                    let mut v = values.clone();
                    v[j] = 0.0;
                    input.replace_dense(v)
                }
                Input::Tokens(tokens) => {
                    let mut t = tokens.clone();
                    t.remove(j);
                    Input::Tokens(t)
                }
            };
            raw.push(base - target_score(predictor, &occluded, target)?);
        }
        min_max_normalize(&mut raw);
        Ok(raw)
    }
}

/// Analytic-gradient attribution for predictors that expose one: the raw
/// score is the absolute input gradient of the target label.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradientAttributor;

impl Attributor for GradientAttributor {
    fn explain(
        &self,
        predictor: &dyn Predictor,
        input: &Input,
        target: usize,
        _rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>> {
        let grad = predictor.input_gradient(input, target).ok_or_else(|| {
            Error::SpecMismatch(
                "gradient attribution needs a predictor with an analytic input gradient".into(),
            )
        })?;
        if grad.len() != input.n_features() {
            return Err(Error::invalid(format!(
                "gradient has {} entries for {} features",
                grad.len(),
                input.n_features()
            )));
        }
        let mut raw: Vec<f64> = grad.into_iter().map(f64::abs).collect();
        min_max_normalize(&mut raw);
        Ok(raw)
    }
}

/// Returns a fixed attribution map regardless of the input.
#[derive(Debug, Clone)]
pub struct ConstAttributor {
    map: Vec<f64>,
}

impl ConstAttributor {
    pub fn new(map: Vec<f64>) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::invalid("constant map must be non-empty"));
        }
        if let Some(bad) = map.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite map value {bad}")));
        }
        Ok(ConstAttributor { map })
    }
}

impl Attributor for ConstAttributor {
    fn explain(
        &self,
        _predictor: &dyn Predictor,
        _input: &Input,
        _target: usize,
        _rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>> {
        Ok(self.map.clone())
    }
}
