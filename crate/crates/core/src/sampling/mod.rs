//! Drawing explanation samples: noise specs, predictor and attributor
//! interfaces, and the deterministic sampling loop that ties them together.

mod attributors;
mod predictors;

pub use attributors::{ConstAttributor, GradientAttributor, MaskingAttributor, OcclusionAttributor};
pub use predictors::{
    ConstPredictor, LinearSoftmaxPredictor, PlantedPredictor, TokenCountPredictor,
};

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use rand::distributions::{Bernoulli, Uniform};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::SampleMatrix;

/// Default standard deviation of additive normal input noise.
pub const DEFAULT_NORMAL_SIGMA: f64 = 0.1;
/// Default bounds of additive uniform input noise.
pub const DEFAULT_UNIFORM_RANGE: (f64, f64) = (-0.1, 0.1);
/// Default range of the multiplicative brightness factor.
pub const DEFAULT_BRIGHTNESS_RANGE: (f64, f64) = (0.9, 1.1);

/// A model input: either a dense feature array (optionally spatial) or a
/// token sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Dense {
        values: Vec<f64>,
        shape: Option<(u16, u16)>,
    },
    Tokens(Vec<String>),
}

impl Input {
    /// A dense input without spatial metadata.
    pub fn dense(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("input needs at least one feature"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite input value {bad}")));
        }
        Ok(Input::Dense {
            values,
            shape: None,
        })
    }

    /// A dense input carrying its image shape; `width · height` must match.
    pub fn dense_with_shape(values: Vec<f64>, width: u16, height: u16) -> Result<Self> {
        let len = values.len();
        let input = Self::dense(values)?;
        if width == 0 || height == 0 || width as usize * height as usize != len {
            return Err(Error::invalid(format!(
                "shape {width}×{height} does not cover {len} features"
            )));
        }
        match input {
            Input::Dense { values, .. } => Ok(Input::Dense {
                values,
                shape: Some((width, height)),
            }),
            Input::Tokens(_) => unreachable!(),
        }
    }

    /// A token-sequence input.
    pub fn tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::invalid("input needs at least one token"));
        }
        Ok(Input::Tokens(tokens))
    }

    /// Number of features: array length or token count.
    pub fn n_features(&self) -> usize {
        match self {
            Input::Dense { values, .. } => values.len(),
            Input::Tokens(tokens) => tokens.len(),
        }
    }

    /// Spatial metadata, if this is an image-like input.
    pub fn shape(&self) -> Option<(u16, u16)> {
        match self {
            Input::Dense { shape, .. } => *shape,
            Input::Tokens(_) => None,
        }
    }

    /// The dense values, or [`Error::SpecMismatch`] for token input.
    pub fn as_dense(&self) -> Result<&[f64]> {
        match self {
            Input::Dense { values, .. } => Ok(values),
            Input::Tokens(_) => Err(Error::SpecMismatch(
                "operation needs a dense input, got a token sequence".into(),
            )),
        }
    }

    /// The token sequence, or [`Error::SpecMismatch`] for dense input.
    pub fn as_tokens(&self) -> Result<&[String]> {
        match self {
            Input::Tokens(tokens) => Ok(tokens),
            Input::Dense { .. } => Err(Error::SpecMismatch(
                "operation needs a token sequence, got a dense input".into(),
            )),
        }
    }

    pub(crate) fn replace_dense(&self, values: Vec<f64>) -> Input {
        match self {
            Input::Dense { shape, .. } => Input::Dense {
                values,
                shape: *shape,
            },
            Input::Tokens(_) => unreachable!("replace_dense on token input"),
        }
    }
}

/// Token-to-synonym lookup used by substitution noise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynonymTable {
    map: HashMap<String, String>,
}

impl SynonymTable {
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        SynonymTable {
            map: pairs.into_iter().collect(),
        }
    }

    pub fn empty() -> Self {
        SynonymTable::default()
    }

    /// Parses `token<TAB>synonym` lines.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut map = HashMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("synonym table", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (token, synonym) = line.split_once('\t').ok_or_else(|| {
                Error::invalid(format!(
                    "synonym table line {}: expected token<TAB>synonym",
                    lineno + 1
                ))
            })?;
            map.insert(token.to_string(), synonym.to_string());
        }
        Ok(SynonymTable { map })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::io(format!("open {}", path.display()), e))?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn get(&self, token: &str) -> Option<&str> {
        self.map.get(token).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// How to perturb an input before re-explaining it.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    /// Additive i.i.d. N(0, σ²) per feature (dense inputs).
    Normal { sigma: f64 },
    /// Additive i.i.d. U(low, high) per feature (dense inputs).
    Uniform { low: f64, high: f64 },
    /// One multiplicative factor ~ U(low, high) for the whole input
    /// (dense inputs); preserves the sign pattern.
    Brightness { low: f64, high: f64 },
    /// Each token is independently replaced by its table synonym with
    /// probability `p` (token inputs); tokens without a synonym stay put.
    TokenSubstitution { p: f64, table: SynonymTable },
}

impl NoiseSpec {
    /// The default perturbation: additive normal noise with σ = 0.1.
    pub fn default_normal() -> Self {
        NoiseSpec::Normal {
            sigma: DEFAULT_NORMAL_SIGMA,
        }
    }

    pub fn default_uniform() -> Self {
        NoiseSpec::Uniform {
            low: DEFAULT_UNIFORM_RANGE.0,
            high: DEFAULT_UNIFORM_RANGE.1,
        }
    }

    pub fn default_brightness() -> Self {
        NoiseSpec::Brightness {
            low: DEFAULT_BRIGHTNESS_RANGE.0,
            high: DEFAULT_BRIGHTNESS_RANGE.1,
        }
    }

    /// A spec that leaves dense inputs untouched (unit brightness factor).
    pub fn identity_dense() -> Self {
        NoiseSpec::Brightness {
            low: 1.0,
            high: 1.0,
        }
    }

    /// A spec that leaves token inputs untouched (zero substitution rate).
    pub fn identity_tokens() -> Self {
        NoiseSpec::TokenSubstitution {
            p: 0.0,
            table: SynonymTable::empty(),
        }
    }

    /// Checks the parameter ranges of this spec.
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Normal { sigma } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::invalid(format!(
                        "normal noise needs sigma > 0, got {sigma}"
                    )));
                }
            }
            NoiseSpec::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(Error::invalid(format!(
                        "uniform noise needs low < high, got [{low}, {high}]"
                    )));
                }
            }
            NoiseSpec::Brightness { low, high } => {
                if !(low.is_finite() && high.is_finite() && 0.0 < low && low <= high) {
                    return Err(Error::invalid(format!(
                        "brightness needs 0 < low ≤ high, got [{low}, {high}]"
                    )));
                }
            }
            NoiseSpec::TokenSubstitution { p, .. } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid(format!(
                        "substitution probability must lie in [0, 1], got {p}"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::Normal { sigma } => write!(f, "normal(sigma={sigma})"),
            NoiseSpec::Uniform { low, high } => write!(f, "uniform({low},{high})"),
            NoiseSpec::Brightness { low, high } => write!(f, "brightness({low},{high})"),
            NoiseSpec::TokenSubstitution { p, table } => {
                write!(f, "token-substitution(p={p},synonyms={})", table.len())
            }
        }
    }
}

/// A scoring model. Implementations must be pure functions of their input so
/// that seeded sampling runs replay bit for bit.
pub trait Predictor: Send + Sync {
    /// Number of output labels.
    fn n_labels(&self) -> usize;

    /// Per-label scores for one input.
    fn predict(&self, input: &Input) -> Result<Vec<f64>>;

    /// Analytic gradient of the label's score with respect to each input
    /// feature, for predictors that have one in closed form.
    fn input_gradient(&self, input: &Input, label: usize) -> Option<Vec<f64>> {
        let _ = (input, label);
        None
    }
}

/// An explanation method scoring every feature of one input for one label.
pub trait Attributor: Send + Sync {
    /// Attribution scores, one per input feature. Implementations draw any
    /// randomness they need from `rng` and from nowhere else.
    fn explain(
        &self,
        predictor: &dyn Predictor,
        input: &Input,
        target: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<f64>>;
}

pub(crate) fn target_score(
    predictor: &dyn Predictor,
    input: &Input,
    target: usize,
) -> Result<f64> {
    let scores = predictor.predict(input)?;
    scores.get(target).copied().ok_or_else(|| {
        Error::invalid(format!(
            "target label {target} out of range for {} labels",
            scores.len()
        ))
    })
}

/// Index of the highest score; ties go to the lowest index.
pub fn top_label(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Rescales `values` onto [0, 1] by min-max; all-equal inputs become 0.5.
pub fn min_max_normalize(values: &mut [f64]) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        values.fill(0.5);
    } else {
        let span = hi - lo;
        for v in values.iter_mut() {
            *v = (*v - lo) / span;
        }
    }
}

/// Draws one perturbed copy of `input` according to `spec`, consuming
/// randomness from `rng`. Applying a spec to the wrong input kind fails with
/// [`Error::SpecMismatch`].
pub fn apply_noise(spec: &NoiseSpec, input: &Input, rng: &mut dyn RngCore) -> Result<Input> {
    spec.validate()?;
    match spec {
        NoiseSpec::Normal { sigma } => {
            let values = input.as_dense()?;
            let dist = Normal::new(0.0, *sigma).expect("validated sigma");
            let noisy = values.iter().map(|v| v + dist.sample(rng)).collect();
            Ok(input.replace_dense(noisy))
        }
        NoiseSpec::Uniform { low, high } => {
            let values = input.as_dense()?;
            let dist = Uniform::new_inclusive(*low, *high);
            let noisy = values.iter().map(|v| v + dist.sample(rng)).collect();
            Ok(input.replace_dense(noisy))
        }
        NoiseSpec::Brightness { low, high } => {
            let values = input.as_dense()?;
            let factor = Uniform::new_inclusive(*low, *high).sample(rng);
            Ok(input.replace_dense(values.iter().map(|v| v * factor).collect()))
        }
        NoiseSpec::TokenSubstitution { p, table } => {
            let tokens = input.as_tokens()?;
            if *p == 0.0 {
                return Ok(Input::Tokens(tokens.to_vec()));
            }
            let dist = Bernoulli::new(*p).expect("validated probability");
            let swapped = tokens
                .iter()
                .map(|t| {
                    // Draw for every token so the stream layout does not
                    // depend on the table contents.
                    let hit = dist.sample(rng);
                    match (hit, table.get(t)) {
                        (true, Some(s)) => s.to_string(),
                        _ => t.clone(),
                    }
                })
                .collect();
            Ok(Input::Tokens(swapped))
        }
    }
}

/// Explains `n` perturbed copies of `input` and stacks the results.
///
/// The target label is fixed to the predictor's top label on the clean
/// input. Sample `i` draws its noise and its attributor randomness from a
/// dedicated RNG stream derived from `(seed, i)`, so runs replay bit for bit
/// and each row is independent of how many other rows were requested.
pub fn sample_explanations(
    predictor: &dyn Predictor,
    attributor: &dyn Attributor,
    input: &Input,
    spec: &NoiseSpec,
    n: usize,
    seed: u64,
) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    spec.validate()?;
    let clean_scores = predictor.predict(input)?;
    if clean_scores.is_empty() {
        return Err(Error::invalid("predictor returned no scores"));
    }
    if let Some(bad) = clean_scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::invalid(format!(
            "predictor returned non-finite score {bad} on the clean input"
        )));
    }
    let target = top_label(&clean_scores);
    let n_features = input.n_features();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let row = (|| -> Result<Vec<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let noisy = apply_noise(spec, input, &mut rng)?;
            let row = attributor.explain(predictor, &noisy, target, &mut rng)?;
            if row.len() != n_features {
                return Err(Error::invalid(format!(
                    "attributor returned {} scores for {n_features} features",
                    row.len()
                )));
            }
            Ok(row)
        })()
        .map_err(|e| Error::AtSample {
            index: i,
            source: Box::new(e),
        })?;
        rows.push(row);
    }
    let matrix = SampleMatrix::from_rows(&rows)?;
    match input.shape() {
        Some((w, h)) => matrix.with_shape(w, h),
        None => Ok(matrix),
    }
}
