//! Implementations behind the subcommands: each one wires parsed flags into
//! the library calls and writes the requested artifacts.
//!
//! Every run is a pure function of its flags (plus `METFA_SEED` when
//! `--seed` is absent): repeating a command reproduces its outputs byte for
//! byte. Reports embed a manifest describing the resolved configuration.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use metfa::io::{
    compare_report_json, confidence_report_json, metrics_report_json, significance_report_json,
    write_grayscale_pgm, write_report, write_ternary_pgm,
};
use metfa::metrics::TokenDeletion;
use metfa::sampling::top_label;
use metfa::{
    apply_noise, confidence_bundle, jenks_break, metrics, sample_explanations, significance_map,
    significance_map_two_sided, smoothgrad_map, write_sample_matrix, Error, Input, MetricsReport,
    NoiseSpec, Predictor, Result, RunManifest, SampleMatrix, Sided, TestConfig,
};

use crate::parse::{self, InputKind, ThresholdArg};
use crate::{
    CompareArgs, MetricsArgs, MinsamplesArgs, SampleArgs, SidedArg, SmoothArgs, SuiteArg, TestArgs,
};

fn manifest(subcommand: &str) -> RunManifest {
    RunManifest::new(subcommand, env!("CARGO_PKG_VERSION"))
}

fn display_path(path: &Path) -> String {
    path.display().to_string()
}

/// Writes a report to the `--out-report` path, or to stdout if none was
/// given.
fn emit_report(report: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_report(report, path),
        None => {
            println!("{report}");
            Ok(())
        }
    }
}

/// The concrete noise spec for an optional flag: absent means normal noise
/// for dense inputs and no substitutions for token inputs.
fn resolve_noise(flag: Option<&str>, kind: InputKind) -> Result<NoiseSpec> {
    match flag {
        Some(spec) => Ok(parse::parse_noise(spec)?.resolve(kind)),
        None => Ok(match kind {
            InputKind::Dense => NoiseSpec::default_normal(),
            InputKind::Tokens => NoiseSpec::identity_tokens(),
        }),
    }
}

fn top_target(predictor: &dyn Predictor, input: &Input) -> Result<usize> {
    Ok(top_label(&predictor.predict(input)?))
}

impl SidedArg {
    fn to_sided(self) -> Sided {
        match self {
            SidedArg::One => Sided::One,
            SidedArg::Two => Sided::Two,
        }
    }

    fn name(self) -> &'static str {
        match self {
            SidedArg::One => "one",
            SidedArg::Two => "two",
        }
    }
}

/// `minsamples`: print the smallest N whose test can reject at `--alpha`.
pub fn minsamples(args: &MinsamplesArgs) -> Result<()> {
    let config = TestConfig::new(args.alpha, args.sided.to_sided())?;
    println!("{}", config.min_samples());
    Ok(())
}

/// `sample`: explain `--n` noisy copies of the input and store the rows.
pub fn sample(args: &SampleArgs) -> Result<()> {
    let parsed = parse::parse_predictor(&args.predictor)?;
    let attributor = parse::parse_attributor(&args.attributor)?;
    let input = parse::read_input(&args.input, parsed.kind)?;
    let noise = resolve_noise(args.noise.as_deref(), parsed.kind)?;
    let seed = parse::resolve_seed(args.seed)?;
    let matrix = sample_explanations(
        parsed.predictor.as_ref(),
        attributor.as_ref(),
        &input,
        &noise,
        args.n,
        seed,
    )?;
    write_sample_matrix(&matrix, &args.out)
}

/// `test`: label each feature important / unimportant / undecided.
pub fn test(args: &TestArgs) -> Result<()> {
    let matrix = metfa::read_sample_matrix(&args.samples)?;
    let h = match ThresholdArg::parse(&args.threshold)? {
        ThresholdArg::Jenks => jenks_break(matrix.values())?,
        ThresholdArg::Value(value) => value,
    };
    let map = match args.sided {
        SidedArg::One => significance_map(&matrix, h, args.alpha)?,
        SidedArg::Two => significance_map_two_sided(&matrix, h, args.alpha)?,
    };
    if let Some(out_map) = &args.out_map {
        let shape = map.shape.ok_or_else(|| {
            Error::InvalidArgument(
                "--out-map needs samples with a spatial shape".to_string(),
            )
        })?;
        write_ternary_pgm(&map.labels, shape, out_map)?;
    }
    let mut manifest = manifest("test").path("samples", display_path(&args.samples));
    manifest.alpha = Some(args.alpha);
    manifest.n_samples = Some(matrix.n_samples());
    manifest.threshold = Some(args.threshold.clone());
    manifest.sided = Some(args.sided.name().to_string());
    if let Some(out_map) = &args.out_map {
        manifest = manifest.path("map", display_path(out_map));
    }
    if let Some(out_report) = &args.out_report {
        manifest = manifest.path("report", display_path(out_report));
    }
    let report = significance_report_json(&map, matrix.n_samples(), &manifest);
    emit_report(&report, args.out_report.as_deref())
}

/// `smooth`: write lower / upper confidence bounds and the trimmed-mean map.
pub fn smooth(args: &SmoothArgs) -> Result<()> {
    let matrix = metfa::read_sample_matrix(&args.samples)?;
    let bundle = confidence_bundle(&matrix, args.alpha)?;
    let mut manifest = manifest("smooth").path("samples", display_path(&args.samples));
    manifest.alpha = Some(args.alpha);
    manifest.n_samples = Some(matrix.n_samples());
    let images = [
        ("smoothed", &args.out_smoothed, &bundle.smoothed),
        ("lower", &args.out_lower, &bundle.lower),
        ("upper", &args.out_upper, &bundle.upper),
    ];
    for (role, out, scores) in images {
        if let Some(path) = out {
            let shape = bundle.shape.ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "--out-{role} needs samples with a spatial shape"
                ))
            })?;
            write_grayscale_pgm(scores, shape, path)?;
            manifest = manifest.path(role, display_path(path));
        }
    }
    if let Some(out_report) = &args.out_report {
        manifest = manifest.path("report", display_path(out_report));
    }
    let report = confidence_report_json(&bundle, &manifest);
    emit_report(&report, args.out_report.as_deref())
}

/// `metrics`: score a fixed map with the faithfulness suite.
pub fn metrics_cmd(args: &MetricsArgs) -> Result<()> {
    let parsed = parse::parse_predictor(&args.predictor)?;
    let input = parse::read_input(&args.input, parsed.kind)?;
    let map = parse::read_map(&args.map)?;
    let noise = resolve_noise(args.noise.as_deref(), parsed.kind)?;
    let seed = parse::resolve_seed(args.seed)?;
    let target = top_target(parsed.predictor.as_ref(), &input)?;
    let suite = args.suite.unwrap_or(match parsed.kind {
        InputKind::Dense => SuiteArg::Image,
        InputKind::Tokens => SuiteArg::Text,
    });
    let predictor = parsed.predictor.as_ref();
    let mut report = MetricsReport::default();
    match suite {
        SuiteArg::Image => {
            let insertion = metrics::insertion(predictor, &input, &map, target, args.steps)?;
            let deletion = metrics::deletion(predictor, &input, &map, target, args.steps)?;
            report.insertion = Some(insertion);
            report.deletion = Some(deletion);
            report.overall = Some(metrics::overall(insertion, deletion));
            let ri = metrics::robust_insertion(
                predictor, &input, &map, target, &noise, args.draws, args.steps, seed,
            )?;
            let rd = metrics::robust_deletion(
                predictor, &input, &map, target, &noise, args.draws, args.steps, seed,
            )?;
            report.ri = Some(ri);
            report.rd = Some(rd);
            report.ro = Some(metrics::overall(ri, rd));
        }
        SuiteArg::Text => {
            let mode = if args.fdt_masked {
                TokenDeletion::Mask
            } else {
                TokenDeletion::Shorten
            };
            report.fdt = Some(metrics::fdt_with(
                predictor, &input, &map, args.topn, target, mode,
            )?);
            report.st = Some(metrics::st(predictor, &input, &map, args.topn, target)?);
            report.rfdt = Some(metrics::robust_fdt_with(
                predictor, &input, &map, args.topn, target, mode, &noise, args.draws, seed,
            )?);
            report.rst = Some(metrics::robust_st(
                predictor, &input, &map, args.topn, target, &noise, args.draws, seed,
            )?);
            if let Some(donor_path) = &args.donor {
                let donor = parse::read_token_list(donor_path)?;
                report.fat = Some(metrics::fat(
                    predictor, &input, &map, args.topn, &donor, target,
                )?);
                report.rfat = Some(metrics::robust_fat(
                    predictor, &input, &map, args.topn, &donor, target, &noise, args.draws,
                    seed,
                )?);
            }
            report.top_n = Some(args.topn);
        }
    }
    report.noise = Some(noise.to_string());
    report.draws = Some(args.draws);
    report.seed = Some(seed);
    let mut manifest = manifest("metrics")
        .path("input", display_path(&args.input))
        .path("map", display_path(&args.map));
    if let Some(donor) = &args.donor {
        manifest = manifest.path("donor", display_path(donor));
    }
    if let Some(out_report) = &args.out_report {
        manifest = manifest.path("report", display_path(out_report));
    }
    manifest.noise = Some(noise.to_string());
    manifest.seed = Some(seed);
    manifest.steps = Some(args.steps);
    manifest.draws = Some(args.draws);
    let rendered = metrics_report_json(&report, &manifest)?;
    emit_report(&rendered, args.out_report.as_deref())
}

/// `compare`: stability of the trimmed-mean map against the plain mean.
///
/// For each outer draw the input is perturbed once, then one shared set of
/// inner-noise explanations feeds both maps, so the comparison isolates the
/// aggregation rule rather than sampling luck.
pub fn compare(args: &CompareArgs) -> Result<()> {
    let parsed = parse::parse_predictor(&args.predictor)?;
    let attributor = parse::parse_attributor(&args.attributor)?;
    let input = parse::read_input(&args.input, parsed.kind)?;
    let inner = resolve_noise(args.inner_noise.as_deref(), parsed.kind)?;
    let outer = resolve_noise(args.outer_noise.as_deref(), parsed.kind)?;
    let seed = parse::resolve_seed(args.seed)?;
    if args.noisy_draws < 2 {
        return Err(Error::InvalidArgument(format!(
            "--noisy-draws must be at least 2 to measure stability, got {}",
            args.noisy_draws
        )));
    }
    // Outer perturbations use streams 0..draws of the run seed; the inner
    // sampling seeds come from a dedicated stream so the two never overlap.
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    seeder.set_stream(u64::MAX);
    let mut smoothed_rows = Vec::with_capacity(args.noisy_draws);
    let mut mean_rows = Vec::with_capacity(args.noisy_draws);
    for draw in 0..args.noisy_draws {
        let inner_seed: u64 = seeder.gen();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(draw as u64);
        let at = |source: Error| Error::AtDraw {
            index: draw,
            source: Box::new(source),
        };
        let noisy = apply_noise(&outer, &input, &mut rng).map_err(at)?;
        let matrix = sample_explanations(
            parsed.predictor.as_ref(),
            attributor.as_ref(),
            &noisy,
            &inner,
            args.n,
            inner_seed,
        )
        .map_err(at)?;
        let bundle = confidence_bundle(&matrix, args.alpha).map_err(at)?;
        smoothed_rows.push(bundle.smoothed);
        mean_rows.push(smoothgrad_map(&matrix));
    }
    let mstd_smoothed = metrics::mstd(&[SampleMatrix::from_rows(&smoothed_rows)?])?;
    let mstd_mean = metrics::mstd(&[SampleMatrix::from_rows(&mean_rows)?])?;
    let mut manifest = manifest("compare").path("input", display_path(&args.input));
    if let Some(out_report) = &args.out_report {
        manifest = manifest.path("report", display_path(out_report));
    }
    manifest.alpha = Some(args.alpha);
    manifest.n_samples = Some(args.n);
    manifest.noise = Some(format!("inner={inner}, outer={outer}"));
    manifest.seed = Some(seed);
    manifest.draws = Some(args.noisy_draws);
    let report = compare_report_json(mstd_smoothed, mstd_mean, &manifest);
    emit_report(&report, args.out_report.as_deref())
}
