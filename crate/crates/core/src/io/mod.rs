//! Bit-exact persistence: the binary sample-matrix interchange format,
//! PGM attribution-map export, and deterministic JSON reports.
//!
//! The matrix format lets external attribution tools feed their sampled
//! explanations into the tests here; maps render as dependency-free binary
//! PGM; reports serialize with a stable schema and byte-stable output for
//! replay verification.

mod metf;
mod pgm;
mod report;

pub use metf::{
    decode_sample_matrix, encode_sample_matrix, read_sample_matrix, write_sample_matrix,
    METF_HEADER_LEN, METF_MAGIC, METF_VERSION,
};
pub use pgm::{
    decode_pgm, encode_grayscale_pgm, encode_ternary_pgm, read_pgm, write_grayscale_pgm,
    write_ternary_pgm,
};
pub use report::{
    compare_report_json, confidence_report_json, json_f64, metrics_report_json,
    significance_report_json, write_report, RunManifest,
};
