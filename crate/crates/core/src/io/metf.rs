//! Binary interchange format for sample matrices.
//!
//! Layout (all integers little-endian): magic `"METF"`, version byte
//! (currently 1), flags byte (bit 0 = tie-broken), `n_samples` as u32,
//! `n_features` as u32, `width` and `height` as u16 (both zero when the
//! matrix has no spatial shape), then the payload as IEEE-754 32-bit
//! values in row-major (sample-major) order. The header is 18 bytes, so a
//! 1x1 matrix occupies exactly 22 bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::SampleMatrix;

/// The four magic bytes opening every sample-matrix file.
pub const METF_MAGIC: [u8; 4] = *b"METF";
/// The format version this build reads and writes.
pub const METF_VERSION: u8 = 1;
/// Total header size in bytes; the payload starts here.
pub const METF_HEADER_LEN: usize = 18;

const FLAG_TIE_BROKEN: u8 = 0b0000_0001;

/// Serializes a sample matrix into the binary interchange layout.
pub fn encode_sample_matrix(matrix: &SampleMatrix) -> Result<Vec<u8>> {
    let n_samples = u32::try_from(matrix.n_samples())
        .map_err(|_| Error::invalid("sample count exceeds the format's 32-bit limit"))?;
    let n_features = u32::try_from(matrix.n_features())
        .map_err(|_| Error::invalid("feature count exceeds the format's 32-bit limit"))?;
    let (width, height) = matrix.shape().unwrap_or((0, 0));
    let mut bytes = Vec::with_capacity(METF_HEADER_LEN + 4 * matrix.values().len());
    bytes.extend_from_slice(&METF_MAGIC);
    bytes.push(METF_VERSION);
    bytes.push(if matrix.tie_broken() { FLAG_TIE_BROKEN } else { 0 });
    bytes.extend_from_slice(&n_samples.to_le_bytes());
    bytes.extend_from_slice(&n_features.to_le_bytes());
    bytes.extend_from_slice(&width.to_le_bytes());
    bytes.extend_from_slice(&height.to_le_bytes());
    for (index, &value) in matrix.values().iter().enumerate() {
        let narrowed = value as f32;
        if !narrowed.is_finite() {
            return Err(Error::invalid(format!(
                "value at sample {}, feature {} exceeds 32-bit float range",
                index / matrix.n_features(),
                index % matrix.n_features()
            )));
        }
        bytes.extend_from_slice(&narrowed.to_le_bytes());
    }
    Ok(bytes)
}

/// Parses the binary interchange layout back into a sample matrix.
pub fn decode_sample_matrix(bytes: &[u8]) -> Result<SampleMatrix> {
    let fail = |offset: usize, reason: &str| Error::Format {
        offset: offset as u64,
        reason: reason.to_string(),
    };
    if bytes.len() < METF_HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != METF_MAGIC {
            return Err(fail(0, "bad magic"));
        }
        return Err(fail(bytes.len(), "truncated header"));
    }
    if bytes[..4] != METF_MAGIC {
        return Err(fail(0, "bad magic"));
    }
    if bytes[4] != METF_VERSION {
        return Err(fail(4, "unsupported version"));
    }
    if bytes[5] & !FLAG_TIE_BROKEN != 0 {
        return Err(fail(5, "unknown flag bits"));
    }
    let tie_broken = bytes[5] & FLAG_TIE_BROKEN != 0;
    let n_samples = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let n_features = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    if n_samples == 0 {
        return Err(fail(6, "zero samples"));
    }
    if n_features == 0 {
        return Err(fail(10, "zero features"));
    }
    let width = u16::from_le_bytes(bytes[14..16].try_into().unwrap());
    let height = u16::from_le_bytes(bytes[16..18].try_into().unwrap());
    let shape = match (width, height) {
        (0, 0) => None,
        (0, _) | (_, 0) => return Err(fail(14, "one spatial dimension is zero")),
        (w, h) => {
            if w as usize * h as usize != n_features {
                return Err(fail(14, "spatial shape does not match the feature count"));
            }
            Some((w, h))
        }
    };
    let expected = 4usize
        .checked_mul(n_samples)
        .and_then(|b| b.checked_mul(n_features))
        .ok_or_else(|| fail(6, "dimensions overflow"))?;
    let payload = &bytes[METF_HEADER_LEN..];
    if payload.len() < expected {
        return Err(fail(bytes.len(), "truncated payload"));
    }
    if payload.len() > expected {
        return Err(fail(METF_HEADER_LEN + expected, "trailing data"));
    }
    let mut values = Vec::with_capacity(n_samples * n_features);
    for (index, chunk) in payload.chunks_exact(4).enumerate() {
        let value = f32::from_le_bytes(chunk.try_into().unwrap());
        if !value.is_finite() {
            return Err(Error::NonFinite {
                sample: index / n_features,
                feature: index % n_features,
            });
        }
        values.push(value as f64);
    }
    let mut matrix = SampleMatrix::new(n_samples, n_features, values)?;
    if let Some((w, h)) = shape {
        matrix = matrix.with_shape(w, h)?;
    }
    matrix.set_tie_broken(tie_broken);
    Ok(matrix)
}

/// Writes a sample matrix to `path` in the binary interchange layout.
pub fn write_sample_matrix(matrix: &SampleMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_sample_matrix(matrix)?;
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Reads a sample matrix previously written by [`write_sample_matrix`].
pub fn read_sample_matrix(path: impl AsRef<Path>) -> Result<SampleMatrix> {
    let path = path.as_ref();
    let bytes =
        fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_sample_matrix(&bytes)
}
