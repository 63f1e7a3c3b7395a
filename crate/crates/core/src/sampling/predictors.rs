//! Small reference predictors with closed-form behavior, used to exercise
//! the pipeline and to pin metric values in tests.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use super::{Input, Predictor};
use crate::error::{Error, Result};

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Softmax over the rows of a fixed weight matrix applied to a dense input.
#[derive(Debug, Clone)]
pub struct LinearSoftmaxPredictor {
    weights: Vec<Vec<f64>>,
}

impl LinearSoftmaxPredictor {
    /// Builds the predictor from an `n_labels × n_features` weight matrix.
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights[0].is_empty() {
            return Err(Error::invalid("weight matrix must be non-empty"));
        }
        let width = weights[0].len();
        for (i, row) in weights.iter().enumerate() {
            if row.len() != width {
                return Err(Error::invalid(format!(
                    "weight row {i} has {} values, expected {width}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|w| !w.is_finite()) {
                return Err(Error::invalid(format!("non-finite weight {bad} in row {i}")));
            }
        }
        Ok(LinearSoftmaxPredictor { weights })
    }

    /// Parses the textual weight format: a `P <n_labels> <n_features>`
    /// header line followed by one whitespace-separated row per label.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((no, line)) => {
                    let line = line.map_err(|e| Error::io("weight file", e))?;
                    if !line.trim().is_empty() {
                        break (no, line);
                    }
                }
                None => return Err(Error::invalid("weight file is empty")),
            }
        };
        let mut parts = header.1.split_whitespace();
        if parts.next() != Some("P") {
            return Err(Error::invalid(format!(
                "weight file line {}: header must start with 'P'",
                header.0 + 1
            )));
        }
        let parse_dim = |tok: Option<&str>, what: &str| -> Result<usize> {
            tok.and_then(|t| t.parse::<usize>().ok())
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::invalid(format!("weight file header: bad {what}")))
        };
        let n_labels = parse_dim(parts.next(), "label count")?;
        let n_features = parse_dim(parts.next(), "feature count")?;
        if parts.next().is_some() {
            return Err(Error::invalid("weight file header has trailing tokens"));
        }
        let mut weights = Vec::with_capacity(n_labels);
        for (no, line) in lines {
            let line = line.map_err(|e| Error::io("weight file", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| Error::invalid(format!("weight file line {}: bad number {tok:?}", no + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != n_features {
                return Err(Error::invalid(format!(
                    "weight file line {}: expected {n_features} values, got {}",
                    no + 1,
                    row.len()
                )));
            }
            weights.push(row);
            if weights.len() == n_labels {
                break;
            }
        }
        if weights.len() != n_labels {
            return Err(Error::invalid(format!(
                "weight file ended after {} of {n_labels} rows",
                weights.len()
            )));
        }
        Self::new(weights)
    }

    pub fn from_weight_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::io(format!("open {}", path.display()), e))?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn n_features(&self) -> usize {
        self.weights[0].len()
    }
}

impl Predictor for LinearSoftmaxPredictor {
    fn n_labels(&self) -> usize {
        self.weights.len()
    }

    fn predict(&self, input: &Input) -> Result<Vec<f64>> {
        let x = input.as_dense()?;
        if x.len() != self.n_features() {
            return Err(Error::invalid(format!(
                "input has {} features, weights expect {}",
                x.len(),
                self.n_features()
            )));
        }
        let logits: Vec<f64> = self
            .weights
            .iter()
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / total).collect())
    }

    fn input_gradient(&self, input: &Input, label: usize) -> Option<Vec<f64>> {
        // Gradient of the label's logit: the weight row itself.
        match input.as_dense() {
            Ok(x) if x.len() == self.n_features() && label < self.weights.len() => {
                Some(self.weights[label].clone())
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Link {
    Linear,
    Sigmoid,
}

/// A binary predictor whose positive-label score depends only on the mean of
/// a designated ("planted") feature subset.
#[derive(Debug, Clone)]
pub struct PlantedPredictor {
    planted: Vec<usize>,
    link: Link,
}

impl PlantedPredictor {
    /// Positive score = σ(mean of the planted features).
    pub fn sigmoid(planted: Vec<usize>) -> Self {
        PlantedPredictor {
            planted,
            link: Link::Sigmoid,
        }
    }

    /// Positive score = mean of the planted features; handy when metric
    /// values should come out as exact fractions.
    pub fn linear(planted: Vec<usize>) -> Self {
        PlantedPredictor {
            planted,
            link: Link::Linear,
        }
    }

    fn planted_mean(&self, x: &[f64]) -> Result<f64> {
        if self.planted.is_empty() {
            return Err(Error::invalid("planted feature set is empty"));
        }
        let mut sum = 0.0;
        for &j in &self.planted {
            let v = x.get(j).ok_or_else(|| {
                Error::invalid(format!("planted feature {j} out of range for {} features", x.len()))
            })?;
            sum += v;
        }
        Ok(sum / self.planted.len() as f64)
    }
}

impl Predictor for PlantedPredictor {
    fn n_labels(&self) -> usize {
        2
    }

    fn predict(&self, input: &Input) -> Result<Vec<f64>> {
        let m = self.planted_mean(input.as_dense()?)?;
        let s = match self.link {
            Link::Linear => m,
            Link::Sigmoid => sigmoid(m),
        };
        Ok(vec![1.0 - s, s])
    }

    fn input_gradient(&self, input: &Input, label: usize) -> Option<Vec<f64>> {
        let x = input.as_dense().ok()?;
        if label >= 2 {
            return None;
        }
        let m = self.planted_mean(x).ok()?;
        let factor = match self.link {
            Link::Linear => 1.0,
            Link::Sigmoid => {
                let s = sigmoid(m);
                s * (1.0 - s)
            }
        } / self.planted.len() as f64;
        let signed = if label == 1 { factor } else { -factor };
        let mut grad = vec![0.0; x.len()];
        for &j in &self.planted {
            grad[j] = signed;
        }
        Some(grad)
    }
}

/// A binary sequence predictor: positive score = σ(sum of the weights of
/// the tokens present, unknown tokens counting zero).
#[derive(Debug, Clone)]
pub struct TokenCountPredictor {
    weights: HashMap<String, f64>,
}

impl TokenCountPredictor {
    pub fn new(weights: impl IntoIterator<Item = (String, f64)>) -> Self {
        TokenCountPredictor {
            weights: weights.into_iter().collect(),
        }
    }

    /// Parses `token<TAB>weight` lines.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut weights = HashMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("token weight file", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (token, value) = line.split_once('\t').ok_or_else(|| {
                Error::invalid(format!(
                    "token weight file line {}: expected token<TAB>weight",
                    lineno + 1
                ))
            })?;
            let w: f64 = value.trim().parse().map_err(|_| {
                Error::invalid(format!(
                    "token weight file line {}: bad number {value:?}",
                    lineno + 1
                ))
            })?;
            if !w.is_finite() {
                return Err(Error::invalid(format!(
                    "token weight file line {}: weight must be finite",
                    lineno + 1
                )));
            }
            weights.insert(token.to_string(), w);
        }
        Ok(TokenCountPredictor { weights })
    }

    pub fn from_weight_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::io(format!("open {}", path.display()), e))?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}

impl Predictor for TokenCountPredictor {
    fn n_labels(&self) -> usize {
        2
    }

    fn predict(&self, input: &Input) -> Result<Vec<f64>> {
        let tokens = input.as_tokens()?;
        let sum: f64 = tokens
            .iter()
            .map(|t| self.weights.get(t).copied().unwrap_or(0.0))
            .sum();
        let s = sigmoid(sum);
        Ok(vec![1.0 - s, s])
    }
}

/// Scores every label of every input with the same constant.
#[derive(Debug, Clone, Copy)]
pub struct ConstPredictor {
    score: f64,
}

impl ConstPredictor {
    pub fn new(score: f64) -> Self {
        ConstPredictor { score }
    }
}

impl Predictor for ConstPredictor {
    fn n_labels(&self) -> usize {
        2
    }

    fn predict(&self, _input: &Input) -> Result<Vec<f64>> {
        Ok(vec![self.score, self.score])
    }

    fn input_gradient(&self, input: &Input, _label: usize) -> Option<Vec<f64>> {
        input.as_dense().ok().map(|x| vec![0.0; x.len()])
    }
}
