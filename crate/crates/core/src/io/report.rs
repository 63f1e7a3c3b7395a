//! Deterministic JSON reports for test, smooth, metrics, and compare runs.
//!
//! Reports are rendered by hand so the byte stream is a pure function of
//! the data: fixed key order, no timestamps, floats printed with 17
//! significant digits so a reader recovers the exact doubles. Every report
//! embeds the resolved run configuration for replay.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::map::{ConfidenceBundle, SignificanceMap};
use crate::metrics::MetricsReport;

/// Resolved configuration of one tool invocation, embedded into every
/// report so a reader can replay the run. Fields that do not apply to the
/// subcommand stay `None` and render as JSON `null`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub alpha: Option<f64>,
    pub n_samples: Option<usize>,
    /// Requested threshold: a number rendered as text, or `"jenks"`.
    pub threshold: Option<String>,
    pub sided: Option<String>,
    pub noise: Option<String>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub draws: Option<usize>,
    /// Role/path pairs for every input and output file of the run.
    pub paths: Vec<(String, String)>,
}

impl RunManifest {
    /// A manifest for the named subcommand at the given tool version.
    pub fn new(subcommand: impl Into<String>, tool_version: impl Into<String>) -> Self {
        RunManifest {
            subcommand: subcommand.into(),
            tool_version: tool_version.into(),
            ..RunManifest::default()
        }
    }

    /// Records a role/path pair, e.g. `("samples", "runs/a.metf")`.
    pub fn path(mut self, role: impl Into<String>, path: impl Into<String>) -> Self {
        self.paths.push((role.into(), path.into()));
        self
    }
}

/// Renders a double with 17 significant digits; reparsing the text yields
/// the identical bit pattern.
pub fn json_f64(value: f64) -> String {
    format!("{value:.16e}")
}

fn escape_json(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                write!(out, "\\u{:04x}", c as u32).expect("writing to a string")
            }
            c => out.push(c),
        }
    }
    out
}

/// Incremental JSON object with insertion-ordered keys.
#[derive(Default)]
struct Obj {
    parts: Vec<String>,
}

impl Obj {
    fn raw(&mut self, key: &str, value: String) -> &mut Self {
        self.parts.push(format!("\"{}\":{}", escape_json(key), value));
        self
    }

    fn string(&mut self, key: &str, value: &str) -> &mut Self {
        self.raw(key, format!("\"{}\"", escape_json(value)))
    }

    fn float(&mut self, key: &str, value: f64) -> &mut Self {
        self.raw(key, json_f64(value))
    }

    fn int(&mut self, key: &str, value: u64) -> &mut Self {
        self.raw(key, value.to_string())
    }

    fn opt_float(&mut self, key: &str, value: Option<f64>) -> &mut Self {
        match value {
            Some(v) => self.float(key, v),
            None => self.raw(key, "null".to_string()),
        }
    }

    fn opt_int(&mut self, key: &str, value: Option<u64>) -> &mut Self {
        match value {
            Some(v) => self.int(key, v),
            None => self.raw(key, "null".to_string()),
        }
    }

    fn opt_string(&mut self, key: &str, value: Option<&str>) -> &mut Self {
        match value {
            Some(v) => self.string(key, v),
            None => self.raw(key, "null".to_string()),
        }
    }

    fn floats(&mut self, key: &str, values: &[f64]) -> &mut Self {
        let body: Vec<String> = values.iter().map(|&v| json_f64(v)).collect();
        self.raw(key, format!("[{}]", body.join(",")))
    }

    fn shape(&mut self, key: &str, shape: Option<(u16, u16)>) -> &mut Self {
        match shape {
            Some((w, h)) => self.raw(key, format!("[{w},{h}]")),
            None => self.raw(key, "null".to_string()),
        }
    }

    fn finish(&self) -> String {
        format!("{{{}}}", self.parts.join(","))
    }
}

fn manifest_json(manifest: &RunManifest) -> String {
    let mut obj = Obj::default();
    obj.string("tool_version", &manifest.tool_version)
        .string("subcommand", &manifest.subcommand)
        .opt_float("alpha", manifest.alpha)
        .opt_int("n_samples", manifest.n_samples.map(|v| v as u64))
        .opt_string("threshold", manifest.threshold.as_deref())
        .opt_string("sided", manifest.sided.as_deref())
        .opt_string("noise", manifest.noise.as_deref())
        .opt_int("seed", manifest.seed)
        .opt_int("steps", manifest.steps.map(|v| v as u64))
        .opt_int("draws", manifest.draws.map(|v| v as u64));
    let mut paths = Obj::default();
    for (role, path) in &manifest.paths {
        paths.string(role, path);
    }
    obj.raw("paths", paths.finish());
    obj.finish()
}

/// JSON for a significance-test run: resolved threshold, per-feature
/// labels (-1 / 0 / +1), and both one-sided p-value arrays.
pub fn significance_report_json(
    map: &SignificanceMap,
    n_samples: usize,
    manifest: &RunManifest,
) -> String {
    let labels: Vec<String> = map
        .labels
        .iter()
        .map(|label| label.as_i8().to_string())
        .collect();
    let mut obj = Obj::default();
    obj.raw("manifest", manifest_json(manifest))
        .float("alpha", map.alpha)
        .int("n_samples", n_samples as u64)
        .float("h", map.h)
        .shape("shape", map.shape)
        .raw("labels", format!("[{}]", labels.join(",")))
        .floats("p_above", &map.p_above)
        .floats("p_below", &map.p_below);
    obj.finish()
}

/// JSON for a confidence-bundle run: trim indices plus the lower, upper,
/// and smoothed per-feature maps.
pub fn confidence_report_json(bundle: &ConfidenceBundle, manifest: &RunManifest) -> String {
    let mut obj = Obj::default();
    obj.raw("manifest", manifest_json(manifest))
        .float("alpha", bundle.alpha)
        .int("n_samples", bundle.indices.n as u64)
        .int("k1", bundle.indices.k1 as u64)
        .int("k2", bundle.indices.k2 as u64)
        .shape("shape", bundle.shape)
        .floats("lower", &bundle.lower)
        .floats("upper", &bundle.upper)
        .floats("smoothed", &bundle.smoothed);
    obj.finish()
}

/// JSON for a metrics run; validates the report's difference identities
/// first. Metrics that were not computed are omitted from the `metrics`
/// object, so an empty report still renders valid metadata-only JSON.
pub fn metrics_report_json(report: &MetricsReport, manifest: &RunManifest) -> Result<String> {
    report.validate()?;
    let mut metrics = Obj::default();
    for (name, value) in report.values() {
        metrics.float(name, value);
    }
    let mut obj = Obj::default();
    obj.raw("manifest", manifest_json(manifest))
        .raw("metrics", metrics.finish())
        .opt_int("top_n", report.top_n.map(|v| v as u64))
        .opt_string("noise", report.noise.as_deref())
        .opt_int("draws", report.draws.map(|v| v as u64))
        .opt_int("seed", report.seed);
    Ok(obj.finish())
}

/// JSON for a stability comparison: the two mstd values and their ratio,
/// rendered as the string `"undefined"` when the denominator is zero.
pub fn compare_report_json(
    mstd_smoothed: f64,
    mstd_mean: f64,
    manifest: &RunManifest,
) -> String {
    let mut obj = Obj::default();
    obj.raw("manifest", manifest_json(manifest))
        .float("mstd_smoothed", mstd_smoothed)
        .float("mstd_mean", mstd_mean);
    if mstd_mean == 0.0 {
        obj.string("ratio", "undefined");
    } else {
        obj.float("ratio", mstd_smoothed / mstd_mean);
    }
    obj.finish()
}

/// Writes report text to `path`, surfacing failures with path context.
pub fn write_report(content: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, content).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
