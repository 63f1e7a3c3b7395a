//! The sampled-explanation matrix shared by every stage of the pipeline.

use crate::error::{Error, Result};

/// An `n_samples × n_features` matrix of attribution scores, one row per
/// explanation of a perturbed input. Entries are guaranteed finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    n_samples: usize,
    n_features: usize,
    values: Vec<f64>,
    shape: Option<(u16, u16)>,
    tie_broken: bool,
}

impl SampleMatrix {
    /// Builds a matrix from row-major values; rejects empty dimensions,
    /// length mismatches and non-finite entries.
    pub fn new(n_samples: usize, n_features: usize, values: Vec<f64>) -> Result<Self> {
        if n_samples == 0 || n_features == 0 {
            return Err(Error::invalid(format!(
                "matrix dimensions must be positive, got {n_samples}×{n_features}"
            )));
        }
        let expect = n_samples
            .checked_mul(n_features)
            .ok_or_else(|| Error::invalid("matrix dimensions overflow"))?;
        if values.len() != expect {
            return Err(Error::invalid(format!(
                "expected {expect} values for a {n_samples}×{n_features} matrix, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                sample: pos / n_features,
                feature: pos % n_features,
            });
        }
        Ok(SampleMatrix {
            n_samples,
            n_features,
            values,
            shape: None,
            tie_broken: false,
        })
    }

    /// Builds a matrix from explanation rows of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("matrix needs at least one row"));
        }
        let width = rows[0].len();
        if let Some(bad) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::invalid(format!(
                "row {bad} has {} values, expected {width}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), width, rows.concat())
    }

    /// Attaches spatial metadata; `width · height` must equal `n_features`.
    pub fn with_shape(mut self, width: u16, height: u16) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("spatial dimensions must be positive"));
        }
        if width as usize * height as usize != self.n_features {
            return Err(Error::invalid(format!(
                "shape {width}×{height} does not cover {} features",
                self.n_features
            )));
        }
        self.shape = Some((width, height));
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Spatial metadata as `(width, height)`, if the scores form an image.
    pub fn shape(&self) -> Option<(u16, u16)> {
        self.shape
    }

    /// Whether tie-breaking noise has been applied to these scores.
    pub fn tie_broken(&self) -> bool {
        self.tie_broken
    }

    pub(crate) fn set_tie_broken(&mut self, flag: bool) {
        self.tie_broken = flag;
    }

    /// All values, row-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// One explanation row.
    pub fn row(&self, sample: usize) -> &[f64] {
        &self.values[sample * self.n_features..(sample + 1) * self.n_features]
    }

    pub fn get(&self, sample: usize, feature: usize) -> f64 {
        self.values[sample * self.n_features + feature]
    }

    /// One feature's scores across all samples.
    pub fn column(&self, feature: usize) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .skip(feature)
            .step_by(self.n_features)
            .copied()
    }

    /// One feature's scores collected in ascending order.
    pub fn sorted_column(&self, feature: usize) -> Vec<f64> {
        let mut col: Vec<f64> = self.column(feature).collect();
        col.sort_by(f64::total_cmp);
        col
    }

    /// A copy with every score passed through `f`, keeping shape and flags.
    pub fn map_values(&self, f: impl FnMut(f64) -> f64) -> Result<Self> {
        let mapped: Vec<f64> = self.values.iter().copied().map(f).collect();
        let mut out = SampleMatrix::new(self.n_samples, self.n_features, mapped)?;
        out.shape = self.shape;
        out.tie_broken = self.tie_broken;
        Ok(out)
    }
}
