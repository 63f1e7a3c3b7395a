//! Parsers for flag values: predictor, attributor, and noise spec strings,
//! plus the input, map, and token-list file formats.
//!
//! Spec strings are `name` or `name:args`. Every parse failure is an
//! [`Error::InvalidArgument`] so the binary exits with the usage code.

use std::fs;
use std::path::Path;

use metfa::io::{decode_pgm, decode_sample_matrix};
use metfa::sampling::{
    ConstAttributor, ConstPredictor, GradientAttributor, LinearSoftmaxPredictor,
    MaskingAttributor, OcclusionAttributor, PlantedPredictor, TokenCountPredictor,
};
use metfa::{Attributor, Error, Input, NoiseSpec, Predictor, Result, SynonymTable};

/// Which input representation a predictor consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    /// Whitespace-separated numbers, optionally with a `shape W H` prefix.
    Dense,
    /// Whitespace-separated tokens.
    Tokens,
}

/// A predictor built from a spec string, together with its input kind.
pub struct ParsedPredictor {
    pub predictor: Box<dyn Predictor>,
    pub kind: InputKind,
}

/// A noise spec that may still need the input kind to become concrete:
/// `none` means "leave the input untouched", which is a different
/// [`NoiseSpec`] for dense and token inputs.
pub enum NoiseArg {
    Identity,
    Spec(NoiseSpec),
}

impl NoiseArg {
    /// The concrete spec for the given input kind.
    pub fn resolve(self, kind: InputKind) -> NoiseSpec {
        match self {
            NoiseArg::Spec(spec) => spec,
            NoiseArg::Identity => match kind {
                InputKind::Dense => NoiseSpec::identity_dense(),
                InputKind::Tokens => NoiseSpec::identity_tokens(),
            },
        }
    }
}

fn split_spec(spec: &str) -> (&str, Option<&str>) {
    match spec.split_once(':') {
        Some((name, args)) => (name, Some(args)),
        None => (spec, None),
    }
}

fn bad(what: &str, spec: &str, hint: impl AsRef<str>) -> Error {
    Error::InvalidArgument(format!("bad {what} {spec:?}: {}", hint.as_ref()))
}

fn parse_number<T: std::str::FromStr>(text: &str, what: &str, spec: &str) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| bad(what, spec, format!("cannot parse {text:?} as a number")))
}

fn parse_index_list(args: &str, spec: &str) -> Result<Vec<usize>> {
    args.split(',')
        .map(|part| parse_number(part, "predictor", spec))
        .collect()
}

fn parse_pair(args: &str, what: &str, spec: &str) -> Result<(f64, f64)> {
    let (first, second) = args
        .split_once(',')
        .ok_or_else(|| bad(what, spec, "expected two comma-separated numbers"))?;
    Ok((
        parse_number(first, what, spec)?,
        parse_number(second, what, spec)?,
    ))
}

fn require_args<'a>(args: Option<&'a str>, what: &str, spec: &str, hint: &str) -> Result<&'a str> {
    args.ok_or_else(|| bad(what, spec, hint))
}

fn forbid_args(args: Option<&str>, what: &str, spec: &str) -> Result<()> {
    match args {
        Some(_) => Err(bad(what, spec, "this kind takes no arguments")),
        None => Ok(()),
    }
}

/// Builds a predictor from `planted:<i,..>`, `planted-linear:<i,..>`,
/// `linear:<weight-file>`, `tokens:<weight-file>`, or `const:<score>`.
pub fn parse_predictor(spec: &str) -> Result<ParsedPredictor> {
    let (name, args) = split_spec(spec);
    let (predictor, kind): (Box<dyn Predictor>, InputKind) = match name {
        "planted" => {
            let args = require_args(args, "predictor", spec, "expected planted:<i,..>")?;
            (
                Box::new(PlantedPredictor::sigmoid(parse_index_list(args, spec)?)),
                InputKind::Dense,
            )
        }
        "planted-linear" => {
            let args = require_args(args, "predictor", spec, "expected planted-linear:<i,..>")?;
            (
                Box::new(PlantedPredictor::linear(parse_index_list(args, spec)?)),
                InputKind::Dense,
            )
        }
        "linear" => {
            let path = require_args(args, "predictor", spec, "expected linear:<weight-file>")?;
            (
                Box::new(LinearSoftmaxPredictor::from_weight_file(path.trim())?),
                InputKind::Dense,
            )
        }
        "tokens" => {
            let path = require_args(args, "predictor", spec, "expected tokens:<weight-file>")?;
            (
                Box::new(TokenCountPredictor::from_weight_file(path.trim())?),
                InputKind::Tokens,
            )
        }
        "const" => {
            let args = require_args(args, "predictor", spec, "expected const:<score>")?;
            (
                Box::new(ConstPredictor::new(parse_number(args, "predictor", spec)?)),
                InputKind::Dense,
            )
        }
        _ => {
            return Err(bad(
                "predictor",
                spec,
                "known kinds: planted:<i,..>, planted-linear:<i,..>, \
                 linear:<weight-file>, tokens:<weight-file>, const:<score>",
            ))
        }
    };
    Ok(ParsedPredictor { predictor, kind })
}

/// Builds an attributor from `masking[:<masks>,<keep-prob>]`, `occlusion`,
/// `gradient`, or `const:<v1,v2,..>`.
pub fn parse_attributor(spec: &str) -> Result<Box<dyn Attributor>> {
    let (name, args) = split_spec(spec);
    match name {
        "masking" => match args {
            None => Ok(Box::new(MaskingAttributor::default())),
            Some(args) => {
                let (masks, keep) = args
                    .split_once(',')
                    .ok_or_else(|| bad("attributor", spec, "expected masking:<masks>,<keep-prob>"))?;
                Ok(Box::new(MaskingAttributor::new(
                    parse_number(masks, "attributor", spec)?,
                    parse_number(keep, "attributor", spec)?,
                )?))
            }
        },
        "occlusion" => {
            forbid_args(args, "attributor", spec)?;
            Ok(Box::new(OcclusionAttributor))
        }
        "gradient" => {
            forbid_args(args, "attributor", spec)?;
            Ok(Box::new(GradientAttributor))
        }
        "const" => {
            let args = require_args(args, "attributor", spec, "expected const:<v1,v2,..>")?;
            let map = args
                .split(',')
                .map(|part| parse_number(part, "attributor", spec))
                .collect::<Result<Vec<f64>>>()?;
            Ok(Box::new(ConstAttributor::new(map)?))
        }
        _ => Err(bad(
            "attributor",
            spec,
            "known kinds: masking[:<masks>,<keep-prob>], occlusion, gradient, const:<v1,v2,..>",
        )),
    }
}

/// Parses `none`, `normal[:<sigma>]`, `uniform[:<lo>,<hi>]`,
/// `brightness[:<lo>,<hi>]`, or `subst:<p>[,<table-file>]`.
pub fn parse_noise(spec: &str) -> Result<NoiseArg> {
    let (name, args) = split_spec(spec);
    let parsed = match name {
        "none" => {
            forbid_args(args, "noise", spec)?;
            NoiseArg::Identity
        }
        "normal" => NoiseArg::Spec(match args {
            None => NoiseSpec::default_normal(),
            Some(args) => NoiseSpec::Normal {
                sigma: parse_number(args, "noise", spec)?,
            },
        }),
        "uniform" => NoiseArg::Spec(match args {
            None => NoiseSpec::default_uniform(),
            Some(args) => {
                let (low, high) = parse_pair(args, "noise", spec)?;
                NoiseSpec::Uniform { low, high }
            }
        }),
        "brightness" => NoiseArg::Spec(match args {
            None => NoiseSpec::default_brightness(),
            Some(args) => {
                let (low, high) = parse_pair(args, "noise", spec)?;
                NoiseSpec::Brightness { low, high }
            }
        }),
        "subst" => {
            let args = require_args(args, "noise", spec, "expected subst:<p>[,<table-file>]")?;
            let (p, table) = match args.split_once(',') {
                Some((p, path)) => (
                    parse_number(p, "noise", spec)?,
                    SynonymTable::from_file(path.trim())?,
                ),
                None => (parse_number(args, "noise", spec)?, SynonymTable::empty()),
            };
            NoiseArg::Spec(NoiseSpec::TokenSubstitution { p, table })
        }
        _ => {
            return Err(bad(
                "noise",
                spec,
                "known kinds: none, normal[:<sigma>], uniform[:<lo>,<hi>], \
                 brightness[:<lo>,<hi>], subst:<p>[,<table-file>]",
            ))
        }
    };
    if let NoiseArg::Spec(spec) = &parsed {
        spec.validate()?;
    }
    Ok(parsed)
}

/// Parses a `--threshold` value: `jenks` or an explicit number.
pub enum ThresholdArg {
    Jenks,
    Value(f64),
}

impl ThresholdArg {
    /// Parses the flag text.
    pub fn parse(text: &str) -> Result<Self> {
        if text == "jenks" {
            return Ok(ThresholdArg::Jenks);
        }
        let value: f64 = parse_number(text, "threshold", text)?;
        if !value.is_finite() {
            return Err(bad("threshold", text, "threshold must be finite"));
        }
        Ok(ThresholdArg::Value(value))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        context: format!("reading {}", path.display()),
        source,
    })
}

/// Reads an input file as the given kind. Dense files are whitespace
/// separated numbers, optionally prefixed by `shape W H`; token files are
/// whitespace-separated tokens.
pub fn read_input(path: &Path, kind: InputKind) -> Result<Input> {
    let text = read_text(path)?;
    match kind {
        InputKind::Tokens => Input::tokens(text.split_whitespace().map(str::to_string).collect()),
        InputKind::Dense => parse_dense(&text, path),
    }
}

fn parse_dense(text: &str, path: &Path) -> Result<Input> {
    let mut fields = text.split_whitespace().peekable();
    let shape = if fields.peek() == Some(&"shape") {
        fields.next();
        let mut dimension = |axis: &str| -> Result<u16> {
            fields
                .next()
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "{}: shape prefix is missing the {axis}",
                        path.display()
                    ))
                })?
                .parse()
                .map_err(|_| {
                    Error::InvalidArgument(format!(
                        "{}: shape {axis} must be a positive integer",
                        path.display()
                    ))
                })
        };
        Some((dimension("width")?, dimension("height")?))
    } else {
        None
    };
    let values = fields
        .map(|field| {
            field.parse().map_err(|_| {
                Error::InvalidArgument(format!(
                    "{}: cannot parse {field:?} as a number",
                    path.display()
                ))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    match shape {
        Some((width, height)) => Input::dense_with_shape(values, width, height),
        None => Input::dense(values),
    }
}

/// Reads an attribution map: a one-row sample-matrix file or a grayscale
/// PGM (pixels rescaled to `[0, 1]`).
pub fn read_map(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        context: format!("reading {}", path.display()),
        source,
    })?;
    if bytes.starts_with(b"METF") {
        let matrix = decode_sample_matrix(&bytes)?;
        if matrix.n_samples() != 1 {
            return Err(Error::InvalidArgument(format!(
                "{}: a map file must hold exactly one sample row, found {}",
                path.display(),
                matrix.n_samples()
            )));
        }
        Ok(matrix.row(0).to_vec())
    } else if bytes.starts_with(b"P5") {
        let (pixels, _) = decode_pgm(&bytes)?;
        Ok(pixels.iter().map(|&pixel| pixel as f64 / 255.0).collect())
    } else {
        Err(Error::InvalidArgument(format!(
            "{}: map files start with \"METF\" or \"P5\"",
            path.display()
        )))
    }
}

/// Reads a whitespace-separated token list, e.g. a donor sequence.
pub fn read_token_list(path: &Path) -> Result<Vec<String>> {
    let text = read_text(path)?;
    let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    if tokens.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{}: token file is empty",
            path.display()
        )));
    }
    Ok(tokens)
}

/// The seed from `--seed` if present, else the `METFA_SEED` environment
/// variable, else 0.
pub fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("METFA_SEED") {
        Ok(text) => text.trim().parse().map_err(|_| {
            Error::InvalidArgument(format!(
                "METFA_SEED must be an unsigned integer, found {text:?}"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(std::env::VarError::NotUnicode(_)) => Err(Error::InvalidArgument(
            "METFA_SEED is not valid unicode".to_string(),
        )),
    }
}
