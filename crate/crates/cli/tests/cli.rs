//! End-to-end tests of the `metfa` binary: exit codes, seeded replay, and
//! the pinned values of small hand-checkable runs.

use std::path::Path;
use std::process::{Command, Output};

use metfa::{SampleMatrix, Sided};

fn bin() -> Command {
    let mut command = Command::new(env!("CARGO_BIN_EXE_metfa"));
    command.env_remove("METFA_SEED");
    command
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).expect("utf-8 stdout")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("not killed by a signal")
}

fn json(output: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(output)).expect("stdout is valid json")
}

fn number(value: &serde_json::Value, key: &str) -> f64 {
    value[key].as_f64().unwrap_or_else(|| panic!("{key} is a number, got {value}"))
}

/// A 10x1 staircase matrix file with scores 0.0, 0.1, ..., 0.9.
fn staircase(dir: &Path) -> std::path::PathBuf {
    let matrix = SampleMatrix::new(10, 1, (0..10).map(|i| i as f64 * 0.1).collect())
        .expect("staircase matrix")
        .with_shape(1, 1)
        .expect("1x1 shape");
    let path = dir.join("staircase.metf");
    metfa::write_sample_matrix(&matrix, &path).expect("write fixture");
    path
}

#[test]
fn minsamples_prints_the_analytic_bounds() {
    assert_eq!(
        stdout(&run(&["minsamples", "--alpha", "0.05", "--sided", "one"])),
        "5\n",
        "one-sided tests need 5 samples at 0.05"
    );
    assert_eq!(
        stdout(&run(&["minsamples", "--alpha", "0.05", "--sided", "two"])),
        "6\n",
        "two-sided tests need 6 samples at 0.05"
    );
    assert_eq!(
        stdout(&run(&["minsamples", "--alpha", "0.5"])),
        "1\n",
        "a lax level admits a single sample"
    );
    assert_eq!(
        metfa::min_samples(0.05, Sided::One),
        5,
        "binary agrees with the library bound"
    );
}

#[test]
fn out_of_range_levels_exit_with_the_usage_code() {
    for alpha in ["0", "1", "1.5", "-0.1", "nan"] {
        let output = run(&["minsamples", "--alpha", alpha]);
        assert_eq!(
            exit_code(&output),
            2,
            "alpha {alpha} should exit 2, stderr: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
}

#[test]
fn seeded_sample_runs_replay_byte_identically() {
    let dir = tempfile::tempdir().expect("tempdir");
    let input = dir.path().join("input.txt");
    std::fs::write(&input, "shape 2 2\n0.6 0.2\n0.8 0.4\n").expect("write input");
    let args = |out: &str, seed: &str| {
        vec![
            "sample".to_string(),
            "--predictor".into(),
            "planted:0,2".into(),
            "--attributor".into(),
            "masking:50,0.5".into(),
            "--input".into(),
            input.display().to_string(),
            "--n".into(),
            "10".into(),
            "--seed".into(),
            seed.into(),
            "--out".into(),
            dir.path().join(out).display().to_string(),
        ]
    };
    let first = args("a.metf", "42");
    let second = args("b.metf", "42");
    let other = args("c.metf", "43");
    for arg_set in [&first, &second, &other] {
        let output = bin().args(arg_set).output().expect("binary runs");
        stdout(&output);
    }
    let a = std::fs::read(dir.path().join("a.metf")).expect("read a");
    let b = std::fs::read(dir.path().join("b.metf")).expect("read b");
    let c = std::fs::read(dir.path().join("c.metf")).expect("read c");
    assert_eq!(a, b, "same seed, same bytes");
    assert_ne!(a, c, "different seeds should diverge");

    let matrix = metfa::read_sample_matrix(dir.path().join("a.metf")).expect("decode");
    assert_eq!(matrix.n_samples(), 10, "ten sampled explanations");
    assert_eq!(matrix.n_features(), 4, "four features");
    assert_eq!(matrix.shape(), Some((2, 2)), "input shape carries through");
}

#[test]
fn env_seed_applies_only_without_the_flag() {
    let dir = tempfile::tempdir().expect("tempdir");
    let input = dir.path().join("input.txt");
    std::fs::write(&input, "0.6 0.2 0.8 0.4\n").expect("write input");
    let sample = |out: &Path, seed_flag: Option<&str>, env: Option<&str>| {
        let mut command = bin();
        command.args([
            "sample",
            "--predictor",
            "planted:0,2",
            "--input",
            input.to_str().expect("utf-8"),
            "--n",
            "5",
            "--out",
            out.to_str().expect("utf-8"),
        ]);
        if let Some(seed) = seed_flag {
            command.args(["--seed", seed]);
        }
        if let Some(value) = env {
            command.env("METFA_SEED", value);
        }
        let output = command.output().expect("binary runs");
        stdout(&output);
        std::fs::read(out).expect("read output")
    };
    let flagged = sample(&dir.path().join("flag.metf"), Some("7"), None);
    let from_env = sample(&dir.path().join("env.metf"), None, Some("7"));
    let flag_wins = sample(&dir.path().join("both.metf"), Some("7"), Some("99"));
    let default = sample(&dir.path().join("default.metf"), None, None);
    let zero = sample(&dir.path().join("zero.metf"), Some("0"), None);
    assert_eq!(from_env, flagged, "METFA_SEED substitutes for --seed");
    assert_eq!(flag_wins, flagged, "--seed beats METFA_SEED");
    assert_eq!(default, zero, "without either, the seed defaults to 0");
    assert_ne!(default, flagged, "seed 0 and seed 7 should diverge");

    let bad_env = bin()
        .args([
            "sample",
            "--predictor",
            "planted:0,2",
            "--input",
            input.to_str().expect("utf-8"),
            "--out",
            dir.path().join("bad.metf").to_str().expect("utf-8"),
        ])
        .env("METFA_SEED", "not-a-number")
        .output()
        .expect("binary runs");
    assert_eq!(exit_code(&bad_env), 2, "a malformed METFA_SEED exits 2");
}

#[test]
fn constant_attributor_rows_are_identical_and_noise_free_rows_are_clean() {
    let dir = tempfile::tempdir().expect("tempdir");
    let input = dir.path().join("input.txt");
    std::fs::write(&input, "0.6 0.2 0.8 0.4\n").expect("write input");
    let out = dir.path().join("const.metf");
    let output = run(&[
        "sample",
        "--predictor",
        "planted:0,2",
        "--attributor",
        "const:0.9,0.1,0.8,0.2",
        "--input",
        input.to_str().expect("utf-8"),
        "--n",
        "5",
        "--out",
        out.to_str().expect("utf-8"),
    ]);
    stdout(&output);
    let matrix = metfa::read_sample_matrix(&out).expect("decode");
    for sample in 1..matrix.n_samples() {
        assert_eq!(
            matrix.row(sample),
            matrix.row(0),
            "a constant attributor ignores the noise draws"
        );
    }

    let single = dir.path().join("single.metf");
    let output = run(&[
        "sample",
        "--predictor",
        "planted:0,2",
        "--attributor",
        "const:0.9,0.1,0.8,0.2",
        "--input",
        input.to_str().expect("utf-8"),
        "--noise",
        "none",
        "--n",
        "1",
        "--out",
        single.to_str().expect("utf-8"),
    ]);
    stdout(&output);
    let matrix = metfa::read_sample_matrix(&single).expect("decode");
    let expected: Vec<f64> = [0.9f32, 0.1, 0.8, 0.2].iter().map(|&v| v as f64).collect();
    assert_eq!(
        matrix.row(0),
        expected,
        "one zero-noise sample is the clean attribution (at file precision)"
    );
}

#[test]
fn test_command_labels_clear_features() {
    let dir = tempfile::tempdir().expect("tempdir");
    let matrix = SampleMatrix::from_rows(&vec![vec![0.9, 0.1]; 10]).expect("matrix");
    let samples = dir.path().join("samples.metf");
    metfa::write_sample_matrix(&matrix, &samples).expect("write fixture");
    let report_path = dir.path().join("report.json");
    let output = run(&[
        "test",
        "--samples",
        samples.to_str().expect("utf-8"),
        "--threshold",
        "0.5",
        "--out-report",
        report_path.to_str().expect("utf-8"),
    ]);
    assert!(output.status.success(), "test command succeeds");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).expect("read report"))
            .expect("report is valid json");
    assert_eq!(number(&report, "h"), 0.5, "explicit threshold is used");
    assert_eq!(
        report["labels"],
        serde_json::json!([1, -1]),
        "all-high feature is important, all-low unimportant"
    );
    assert_eq!(
        report["manifest"]["threshold"], "0.5",
        "manifest records the request"
    );
    assert_eq!(
        report["manifest"]["sided"], "one",
        "default sidedness is recorded"
    );
}

#[test]
fn jenks_threshold_resolves_the_pooled_break() {
    let dir = tempfile::tempdir().expect("tempdir");
    let matrix =
        SampleMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 8.0], vec![9.0, 9.0]]).expect("matrix");
    let samples = dir.path().join("samples.metf");
    metfa::write_sample_matrix(&matrix, &samples).expect("write fixture");
    let report = json(&run(&[
        "test",
        "--samples",
        samples.to_str().expect("utf-8"),
        "--alpha",
        "0.2",
        "--threshold",
        "jenks",
    ]));
    assert_eq!(
        number(&report, "h"),
        5.0,
        "pooled scores {{1,1,2,8,9,9}} split at 5"
    );
    assert_eq!(
        report["manifest"]["threshold"], "jenks",
        "manifest keeps the symbolic request"
    );
}

#[test]
fn too_few_samples_exit_with_code_three() {
    let dir = tempfile::tempdir().expect("tempdir");
    let four = dir.path().join("four.metf");
    metfa::write_sample_matrix(
        &SampleMatrix::from_rows(&vec![vec![0.9, 0.1]; 4]).expect("matrix"),
        &four,
    )
    .expect("write fixture");
    let five = dir.path().join("five.metf");
    metfa::write_sample_matrix(
        &SampleMatrix::from_rows(&vec![vec![0.9, 0.1]; 5]).expect("matrix"),
        &five,
    )
    .expect("write fixture");

    let output = run(&["test", "--samples", four.to_str().expect("utf-8"), "--threshold", "0.5"]);
    assert_eq!(exit_code(&output), 3, "4 samples cannot reject one-sided");

    let output = run(&["test", "--samples", five.to_str().expect("utf-8"), "--threshold", "0.5"]);
    assert!(output.status.success(), "5 samples pass one-sided");

    let output = run(&[
        "test",
        "--samples",
        five.to_str().expect("utf-8"),
        "--threshold",
        "0.5",
        "--sided",
        "two",
    ]);
    assert_eq!(exit_code(&output), 3, "5 samples cannot reject two-sided");

    let output = run(&["smooth", "--samples", five.to_str().expect("utf-8")]);
    assert_eq!(
        exit_code(&output),
        3,
        "confidence bounds are two-sided and need 6 samples"
    );
}

#[test]
fn smooth_reports_the_staircase_bundle() {
    let dir = tempfile::tempdir().expect("tempdir");
    let samples = staircase(dir.path());
    let smoothed_pgm = dir.path().join("smoothed.pgm");
    let report = json(&run(&[
        "smooth",
        "--samples",
        samples.to_str().expect("utf-8"),
        "--out-smoothed",
        smoothed_pgm.to_str().expect("utf-8"),
    ]));
    // The oracle must see what the binary saw: the file narrows scores to
    // f32, so 0.8 reads back as 0.8f32 widened to f64.
    let matrix = metfa::read_sample_matrix(&samples).expect("re-read fixture");
    let expected = metfa::confidence_bundle(&matrix, 0.05).expect("bundle");
    assert_eq!(
        number_at(&report, "lower", 0),
        expected.lower[0],
        "lower bound falls back to the sample minimum at rank 0"
    );
    assert_eq!(report["lower"][0].as_f64(), Some(0.0), "minimum is 0.0");
    assert_eq!(
        number_at(&report, "upper", 0),
        expected.upper[0],
        "upper bound is bit-identical to the library"
    );
    assert_eq!(
        report["upper"][0].as_f64(),
        Some(0.8f32 as f64),
        "ninth order statistic"
    );
    assert_eq!(
        number_at(&report, "smoothed", 0),
        expected.smoothed[0],
        "smoothed map is bit-identical to the library"
    );
    assert_eq!(number(&report, "k1"), 1.0, "lower rank");
    assert_eq!(number(&report, "k2"), 9.0, "upper rank");

    let (pixels, shape) = metfa::io::read_pgm(&smoothed_pgm).expect("pgm decodes");
    assert_eq!(shape, (1, 1), "one-pixel map");
    assert_eq!(
        pixels,
        vec![(255.0 * expected.smoothed[0]).round() as u8],
        "pixel quantizes the smoothed score"
    );
}

fn number_at(value: &serde_json::Value, key: &str, index: usize) -> f64 {
    value[key][index]
        .as_f64()
        .unwrap_or_else(|| panic!("{key}[{index}] is a number, got {value}"))
}

#[test]
fn metrics_image_suite_pins_planted_values() {
    let dir = tempfile::tempdir().expect("tempdir");
    let input = dir.path().join("input.txt");
    std::fs::write(&input, "1 1 1 1\n").expect("write input");
    let map_path = dir.path().join("map.metf");
    metfa::write_sample_matrix(
        &SampleMatrix::new(1, 4, vec![1.0, 1.0, 0.0, 0.0]).expect("one-row map"),
        &map_path,
    )
    .expect("write fixture");
    let report = json(&run(&[
        "metrics",
        "--predictor",
        "planted-linear:0,1",
        "--input",
        input.to_str().expect("utf-8"),
        "--map",
        map_path.to_str().expect("utf-8"),
        "--steps",
        "4",
        "--noise",
        "none",
    ]));
    let metrics = &report["metrics"];
    assert_eq!(
        metrics["insertion"].as_f64(),
        Some(0.7),
        "revealing the planted pair first: (0 + 1/2 + 1 + 1 + 1) / 5"
    );
    assert_eq!(
        metrics["deletion"].as_f64(),
        Some(0.3),
        "zeroing the planted pair first: (1 + 1/2 + 0 + 0 + 0) / 5"
    );
    let insertion = number(metrics, "insertion");
    let deletion = number(metrics, "deletion");
    assert_eq!(
        number(metrics, "overall"),
        insertion - deletion,
        "overall is the literal difference"
    );
    assert!(
        (number(metrics, "ri") - insertion).abs() <= 1e-12,
        "zero noise: robust insertion equals insertion"
    );
    assert!(
        (number(metrics, "rd") - deletion).abs() <= 1e-12,
        "zero noise: robust deletion equals deletion"
    );
    assert_eq!(
        number(metrics, "ro"),
        number(metrics, "ri") - number(metrics, "rd"),
        "robust overall is the literal difference"
    );
    assert_eq!(report["manifest"]["steps"], 4, "manifest records the steps");
}

#[test]
fn constant_predictor_flattens_both_curves() {
    let dir = tempfile::tempdir().expect("tempdir");
    let input = dir.path().join("input.txt");
    std::fs::write(&input, "1 1 1 1\n").expect("write input");
    let map_path = dir.path().join("map.metf");
    metfa::write_sample_matrix(
        &SampleMatrix::new(1, 4, vec![1.0, 1.0, 0.0, 0.0]).expect("one-row map"),
        &map_path,
    )
    .expect("write fixture");
    let report = json(&run(&[
        "metrics",
        "--predictor",
        "const:0.5",
        "--input",
        input.to_str().expect("utf-8"),
        "--map",
        map_path.to_str().expect("utf-8"),
        "--noise",
        "none",
    ]));
    let metrics = &report["metrics"];
    assert_eq!(
        metrics["insertion"].as_f64(),
        Some(1.0),
        "every masked score equals the clean score"
    );
    assert_eq!(metrics["deletion"].as_f64(), Some(1.0), "deletion too");
    assert_eq!(
        metrics["overall"].as_f64(),
        Some(0.0),
        "a constant predictor cannot distinguish any map"
    );
}

#[test]
fn metrics_zero_score_exits_with_code_four() {
    let dir = tempfile::tempdir().expect("tempdir");
    let input = dir.path().join("input.txt");
    std::fs::write(&input, "1 1 1 1\n").expect("write input");
    let map_path = dir.path().join("map.metf");
    metfa::write_sample_matrix(
        &SampleMatrix::new(1, 4, vec![1.0, 1.0, 0.0, 0.0]).expect("one-row map"),
        &map_path,
    )
    .expect("write fixture");
    let output = run(&[
        "metrics",
        "--predictor",
        "const:0",
        "--input",
        input.to_str().expect("utf-8"),
        "--map",
        map_path.to_str().expect("utf-8"),
    ]);
    assert_eq!(
        exit_code(&output),
        4,
        "a zero clean score makes the curves undefined"
    );
}

#[test]
fn metrics_text_suite_reports_the_token_scores() {
    let dir = tempfile::tempdir().expect("tempdir");
    let weights = dir.path().join("weights.tsv");
    std::fs::write(&weights, "bad\t5\n").expect("write weights");
    let input = dir.path().join("review.txt");
    std::fs::write(&input, "a bad movie\n").expect("write input");
    let map_path = dir.path().join("map.metf");
    metfa::write_sample_matrix(
        &SampleMatrix::new(1, 3, vec![0.2, 1.0, 0.5]).expect("one-row map"),
        &map_path,
    )
    .expect("write fixture");
    let donor = dir.path().join("donor.txt");
    std::fs::write(&donor, "the fine film\n").expect("write donor");
    let predictor_spec = format!("tokens:{}", weights.display());
    let report = json(&run(&[
        "metrics",
        "--predictor",
        &predictor_spec,
        "--input",
        input.to_str().expect("utf-8"),
        "--map",
        map_path.to_str().expect("utf-8"),
        "--topn",
        "1",
        "--donor",
        donor.to_str().expect("utf-8"),
    ]));
    let metrics = &report["metrics"];
    assert_eq!(
        metrics["fdt"].as_f64(),
        Some(0.5),
        "deleting the only weighted token leaves the neutral score"
    );
    let sigma_5 = 1.0 / (1.0 + (-5.0f64).exp());
    assert!(
        (number(metrics, "st") - sigma_5).abs() <= 1e-12,
        "keeping just the weighted token preserves its score"
    );
    assert!(
        (number(metrics, "fat") - sigma_5).abs() <= 1e-12,
        "unweighted donor tokens do not move the score"
    );
    assert!(
        (number(metrics, "rfdt") - number(metrics, "fdt")).abs() <= 1e-12,
        "default token noise is the identity, so robust equals plain"
    );
    assert_eq!(report["top_n"], 1, "top-n count is recorded");
}

#[test]
fn compare_replays_and_guards_the_ratio() {
    let dir = tempfile::tempdir().expect("tempdir");
    let input = dir.path().join("input.txt");
    std::fs::write(&input, "0.6 0.2 0.8 0.4\n").expect("write input");
    let base = [
        "compare",
        "--predictor",
        "planted:0,2",
        "--attributor",
        "masking:30,0.5",
        "--input",
        input.to_str().expect("utf-8"),
        "--n",
        "10",
        "--noisy-draws",
        "4",
        "--seed",
        "5",
    ];
    let first = run(&base);
    let second = run(&base);
    assert_eq!(
        stdout(&first),
        stdout(&second),
        "the same seed reproduces the report byte for byte"
    );
    let report = json(&first);
    assert!(
        number(&report, "mstd_smoothed") > 0.0,
        "noisy sampling leaves visible variability"
    );
    assert!(report["ratio"].is_f64(), "ratio is numeric when defined");

    let constant = run(&[
        "compare",
        "--predictor",
        "planted:0,2",
        "--attributor",
        "const:0.9,0.1,0.8,0.2",
        "--input",
        input.to_str().expect("utf-8"),
        "--n",
        "10",
        "--noisy-draws",
        "3",
    ]);
    let report = json(&constant);
    assert_eq!(
        report["ratio"], "undefined",
        "zero variance on both sides yields the undefined marker"
    );
}

#[test]
fn flat_samples_cannot_render_a_spatial_map() {
    let dir = tempfile::tempdir().expect("tempdir");
    let samples = dir.path().join("flat.metf");
    metfa::write_sample_matrix(
        &SampleMatrix::from_rows(&vec![vec![0.9, 0.1]; 10]).expect("matrix"),
        &samples,
    )
    .expect("write fixture");
    let output = run(&[
        "test",
        "--samples",
        samples.to_str().expect("utf-8"),
        "--threshold",
        "0.5",
        "--out-map",
        dir.path().join("labels.pgm").to_str().expect("utf-8"),
    ]);
    assert_eq!(exit_code(&output), 2, "PGM export needs a shape");
}

#[test]
fn configuration_problems_exit_with_code_two() {
    let dir = tempfile::tempdir().expect("tempdir");
    let input = dir.path().join("input.txt");
    std::fs::write(&input, "0.5 0.5\n").expect("write input");
    let missing = dir.path().join("missing.metf");
    let cases: Vec<Vec<String>> = vec![
        vec![
            "sample".into(),
            "--predictor".into(),
            "mystery:1".into(),
            "--input".into(),
            input.display().to_string(),
            "--out".into(),
            dir.path().join("out.metf").display().to_string(),
        ],
        vec![
            "sample".into(),
            "--predictor".into(),
            "planted:0".into(),
            "--noise".into(),
            "sparkle".into(),
            "--input".into(),
            input.display().to_string(),
            "--out".into(),
            dir.path().join("out.metf").display().to_string(),
        ],
        vec![
            "sample".into(),
            "--predictor".into(),
            "planted:0".into(),
            "--attributor".into(),
            "mystery".into(),
            "--input".into(),
            input.display().to_string(),
            "--out".into(),
            dir.path().join("out.metf").display().to_string(),
        ],
        vec![
            "test".into(),
            "--samples".into(),
            missing.display().to_string(),
        ],
        vec![
            "test".into(),
            "--samples".into(),
            missing.display().to_string(),
            "--threshold".into(),
            "warm".into(),
        ],
    ];
    for args in cases {
        let output = bin().args(&args).output().expect("binary runs");
        assert_eq!(
            exit_code(&output),
            2,
            "args {args:?} should exit 2, stderr: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }

    let multi_row = dir.path().join("multi.metf");
    metfa::write_sample_matrix(
        &SampleMatrix::from_rows(&vec![vec![0.5, 0.5]; 2]).expect("matrix"),
        &multi_row,
    )
    .expect("write fixture");
    let output = run(&[
        "metrics",
        "--predictor",
        "planted:0",
        "--input",
        input.to_str().expect("utf-8"),
        "--map",
        multi_row.to_str().expect("utf-8"),
    ]);
    assert_eq!(exit_code(&output), 2, "a multi-row file is not a map");
}
