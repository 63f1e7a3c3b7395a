//! Attribution-map image export as binary PGM (P5, maxval 255).
//!
//! Grayscale maps scores through `round(255 * clamp(score, 0, 1))`;
//! ternary significance labels become 0 (unimportant), 128 (undecided),
//! and 255 (important). A minimal reader supports round-trip checks and
//! re-importing exported maps.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::map::Label;

fn check_shape(len: usize, shape: (u16, u16)) -> Result<()> {
    let (width, height) = shape;
    if width == 0 || height == 0 {
        return Err(Error::invalid("image dimensions must be at least 1x1"));
    }
    if width as usize * height as usize != len {
        return Err(Error::invalid(format!(
            "{}x{} image cannot hold {len} values",
            width, height
        )));
    }
    Ok(())
}

fn encode_pgm(pixels: &[u8], (width, height): (u16, u16)) -> Vec<u8> {
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(pixels);
    bytes
}

/// Renders scores as grayscale PGM bytes; scores are clamped to [0, 1]
/// and scaled to 0..=255 with half-up rounding.
pub fn encode_grayscale_pgm(scores: &[f64], shape: (u16, u16)) -> Result<Vec<u8>> {
    check_shape(scores.len(), shape)?;
    let pixels: Vec<u8> = scores
        .iter()
        .map(|&score| {
            if score.is_nan() {
                return Err(Error::invalid("cannot render a NaN score"));
            }
            Ok((255.0 * score.clamp(0.0, 1.0)).round() as u8)
        })
        .collect::<Result<_>>()?;
    Ok(encode_pgm(&pixels, shape))
}

/// Renders significance labels as ternary PGM bytes: unimportant 0,
/// undecided 128, important 255.
pub fn encode_ternary_pgm(labels: &[Label], shape: (u16, u16)) -> Result<Vec<u8>> {
    check_shape(labels.len(), shape)?;
    let pixels: Vec<u8> = labels
        .iter()
        .map(|label| match label {
            Label::Unimportant => 0,
            Label::Undecided => 128,
            Label::Important => 255,
        })
        .collect();
    Ok(encode_pgm(&pixels, shape))
}

/// Writes a grayscale score map to `path`.
pub fn write_grayscale_pgm(scores: &[f64], shape: (u16, u16), path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_grayscale_pgm(scores, shape)?;
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes a ternary significance map to `path`.
pub fn write_ternary_pgm(labels: &[Label], shape: (u16, u16), path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_ternary_pgm(labels, shape)?;
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Parses PGM bytes produced by this module: raw pixels plus dimensions.
pub fn decode_pgm(bytes: &[u8]) -> Result<(Vec<u8>, (u16, u16))> {
    let fail = |offset: usize, reason: &str| Error::Format {
        offset: offset as u64,
        reason: reason.to_string(),
    };
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(fail(0, "not a binary PGM"));
    }
    // Header tokens: width, height, maxval, separated by whitespace; a
    // single whitespace byte then precedes the pixel data.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(fail(pos, "missing header field"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are ASCII");
        *field = text
            .parse()
            .map_err(|_| fail(start, "header field out of range"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(fail(pos, "unsupported maxval"));
    }
    if !(1..=u16::MAX as usize).contains(&width) || !(1..=u16::MAX as usize).contains(&height) {
        return Err(fail(2, "dimensions out of range"));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(fail(pos, "missing pixel-data separator"));
    }
    pos += 1;
    let pixels = &bytes[pos..];
    if pixels.len() != width * height {
        return Err(fail(bytes.len(), "pixel count does not match dimensions"));
    }
    Ok((pixels.to_vec(), (width as u16, height as u16)))
}

/// Reads a PGM file written by this module.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<(Vec<u8>, (u16, u16))> {
    let path = path.as_ref();
    let bytes =
        fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_pgm(&bytes)
}
