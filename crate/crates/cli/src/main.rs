//! `metfa` — uncertainty-aware feature attribution from the command line.
//!
//! The pipeline splits into composable steps: `sample` explains noisy
//! copies of an input into a sample-matrix file, `test` turns such a file
//! into a significance map, `smooth` into confidence bounds and a
//! trimmed-mean map, `metrics` scores a fixed map against a predictor, and
//! `compare` measures map stability under input noise. `minsamples`
//! reports the smallest sample count the tests can work with.
//!
//! Exit codes: 0 on success, 2 for usage or configuration problems, 3 when
//! the sample count is too small for the requested level, 4 when the
//! predictor gives the input a near-zero score.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod parse;

#[derive(Parser)]
#[command(
    name = "metfa",
    version,
    about = "Significance maps, confidence bounds, and faithfulness metrics \
             for sampled feature-attribution explanations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the minimum sample count that can reject at the given level.
    Minsamples(MinsamplesArgs),
    /// Explain noisy copies of an input and store the sampled maps.
    Sample(SampleArgs),
    /// Label features important / unimportant / undecided by median tests.
    Test(TestArgs),
    /// Build lower / upper confidence bounds and the smoothed map.
    Smooth(SmoothArgs),
    /// Score a fixed attribution map with the faithfulness suite.
    Metrics(MetricsArgs),
    /// Compare smoothed-map stability against the plain sample mean.
    Compare(CompareArgs),
}

/// Which alternative the median test guards against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SidedArg {
    /// Separate one-sided tests per direction.
    One,
    /// A single two-sided test.
    Two,
}

/// Which metric family to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    /// Insertion / deletion curves and their noise-robust versions.
    Image,
    /// Token deletion, preservation, and augmentation scores.
    Text,
}

#[derive(Args)]
pub struct MinsamplesArgs {
    /// Significance level, strictly between 0 and 1.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Test sidedness the bound is computed for.
    #[arg(long, value_enum, default_value_t = SidedArg::One)]
    pub sided: SidedArg,
}

#[derive(Args)]
pub struct SampleArgs {
    /// Predictor spec: planted:<i,..> | planted-linear:<i,..> |
    /// linear:<weight-file> | tokens:<weight-file> | const:<score>.
    #[arg(long)]
    pub predictor: String,
    /// Attributor spec: masking[:<masks>,<keep-prob>] | occlusion |
    /// gradient | const:<v1,v2,..>.
    #[arg(long, default_value = "masking")]
    pub attributor: String,
    /// Input file: numbers (optional "shape W H" prefix) or token text.
    #[arg(long)]
    pub input: PathBuf,
    /// Noise spec: none | normal[:<sigma>] | uniform[:<lo>,<hi>] |
    /// brightness[:<lo>,<hi>] | subst:<p>[,<table-file>].
    /// Default: normal:0.1 for dense inputs, none for token inputs.
    #[arg(long)]
    pub noise: Option<String>,
    /// Number of sampled explanations.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// RNG seed; the METFA_SEED variable applies when the flag is absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output sample-matrix file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TestArgs {
    /// Sample-matrix file produced by `sample`.
    #[arg(long)]
    pub samples: PathBuf,
    /// Significance level for the per-feature tests.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Importance threshold: a number, or "jenks" to split the sampled
    /// scores at their natural break.
    #[arg(long, default_value = "jenks")]
    pub threshold: String,
    /// Run one-sided tests per direction or a single two-sided test.
    #[arg(long, value_enum, default_value_t = SidedArg::One)]
    pub sided: SidedArg,
    /// Write the ternary label map as a PGM image (needs a spatial shape).
    #[arg(long)]
    pub out_map: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out_report: Option<PathBuf>,
}

#[derive(Args)]
pub struct SmoothArgs {
    /// Sample-matrix file produced by `sample`.
    #[arg(long)]
    pub samples: PathBuf,
    /// Confidence level 1 - alpha for the per-feature bounds.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Write the smoothed (trimmed-mean) map as a PGM image.
    #[arg(long)]
    pub out_smoothed: Option<PathBuf>,
    /// Write the lower confidence bounds as a PGM image.
    #[arg(long)]
    pub out_lower: Option<PathBuf>,
    /// Write the upper confidence bounds as a PGM image.
    #[arg(long)]
    pub out_upper: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out_report: Option<PathBuf>,
}

#[derive(Args)]
pub struct MetricsArgs {
    /// Predictor spec (see `sample --help`).
    #[arg(long)]
    pub predictor: String,
    /// Input file the map explains.
    #[arg(long)]
    pub input: PathBuf,
    /// Attribution map: a one-row sample-matrix file or a grayscale PGM.
    #[arg(long)]
    pub map: PathBuf,
    /// Noise spec for the robust metrics (see `sample --help`).
    #[arg(long)]
    pub noise: Option<String>,
    /// Noise draws behind each robust metric.
    #[arg(long, default_value_t = 10)]
    pub draws: usize,
    /// Steps of the insertion / deletion curves.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Metric family; defaults to image for dense inputs, text for tokens.
    #[arg(long, value_enum)]
    pub suite: Option<SuiteArg>,
    /// Top-ranked token count for the text metrics.
    #[arg(long, default_value_t = 1)]
    pub topn: usize,
    /// Donor token file enabling the augmentation metrics.
    #[arg(long)]
    pub donor: Option<PathBuf>,
    /// Mask deleted tokens in place instead of shortening the sequence.
    #[arg(long)]
    pub fdt_masked: bool,
    /// RNG seed; the METFA_SEED variable applies when the flag is absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out_report: Option<PathBuf>,
}

#[derive(Args)]
pub struct CompareArgs {
    /// Predictor spec (see `sample --help`).
    #[arg(long)]
    pub predictor: String,
    /// Attributor spec (see `sample --help`).
    #[arg(long, default_value = "masking")]
    pub attributor: String,
    /// Input file.
    #[arg(long)]
    pub input: PathBuf,
    /// Noise spec for the sampled explanations of each perturbed input.
    #[arg(long)]
    pub inner_noise: Option<String>,
    /// Noise spec perturbing the input between draws.
    #[arg(long)]
    pub outer_noise: Option<String>,
    /// Sampled explanations per perturbed input.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Number of perturbed inputs to compare across.
    #[arg(long, default_value_t = 10)]
    pub noisy_draws: usize,
    /// Confidence level 1 - alpha behind the smoothed map.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// RNG seed; the METFA_SEED variable applies when the flag is absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out_report: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Minsamples(args) => commands::minsamples(args),
        Command::Sample(args) => commands::sample(args),
        Command::Test(args) => commands::test(args),
        Command::Smooth(args) => commands::smooth(args),
        Command::Metrics(args) => commands::metrics_cmd(args),
        Command::Compare(args) => commands::compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code(&error))
        }
    }
}

/// Maps failures onto stable exit codes scripts can branch on.
fn exit_code(error: &metfa::Error) -> u8 {
    match error.root_cause() {
        metfa::Error::InsufficientSamples { .. } => 3,
        metfa::Error::ZeroScore { .. } => 4,
        _ => 2,
    }
}
