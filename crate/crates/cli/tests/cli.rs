//! End-to-end tests of the betascript binary: stage chaining, training,
//! identification, evaluation, and error reporting.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_betascript")
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn betascript")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = run(args, dir);
    assert!(
        out.status.success(),
        "betascript {:?} failed:\n{}\n{}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn write_profiles(dir: &Path, writers: usize, words: usize, pages: Option<usize>) -> PathBuf {
    let mut text = format!("rate_hz = 100.0\nwords_per_writer = {words}\n");
    if let Some(p) = pages {
        text.push_str(&format!("page_words = {p}\n"));
    }
    for i in 0..writers {
        text.push_str(&format!(
            r#"
[[writers]]
writer_id = "w{i:02}"
seed = {seed}
amplitude = [{a0}, {a1}]
rise_exponent = [1.5, 4.0]
peak_fraction = [0.3, 0.6]
duration = [0.2, 0.35]
boundary_velocity_frac = [0.03, 0.1]
theta = [{t0}, {t1}]
minor_ratio = [0.3, 0.7]
minor_ratio_2 = [0.8, 1.4]
span = [0.5, 1.2]
strokes_per_word = [4, 6]
noise_sigma = 0.0
"#,
            seed = 10 + i,
            a0 = 80.0 + 40.0 * i as f64,
            a1 = 130.0 + 40.0 * i as f64,
            t0 = 0.4 * i as f64,
            t1 = 0.4 * i as f64 + 0.4,
        ));
    }
    let path = dir.join("profiles.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn write_small_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(
        &path,
        r#"
[training]
hidden1 = 12
hidden2 = 8
epochs1 = 40
epochs2 = 25
softmax_epochs = 60
fine_tune_epochs = 30
min_samples_per_subgroup = 1000
"#,
    )
    .unwrap();
    path
}

#[test]
fn synth_train_identify_evaluate_flow() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write_profiles(dir, 3, 8, Some(4));
    write_small_config(dir);

    let out = ok(
        &["synth", "--profiles", "profiles.toml", "--out", "corpus.json"],
        dir,
    );
    assert!(out.contains("24 words"), "{out}");
    assert!(dir.join("corpus.truth.json").exists());

    let out = ok(
        &[
            "train",
            "--config",
            "config.toml",
            "--in",
            "corpus.json",
            "--out",
            "model.json",
            "--mode",
            "ebe+fepc",
        ],
        dir,
    );
    assert!(out.contains("3 writers"), "{out}");

    // The model records 36-dimensional inputs in fuzzy mode.
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["mode"], "ebe+fepc");
    for net in model["networks"].as_array().unwrap() {
        assert_eq!(net["input_dim"], 36);
    }

    let out = ok(
        &[
            "identify",
            "--model",
            "model.json",
            "--in",
            "corpus.json",
            "--out",
            "result.json",
        ],
        dir,
    );
    assert!(out.contains("identified: w"), "{out}");

    let out = ok(
        &[
            "evaluate",
            "--model",
            "model.json",
            "--in",
            "corpus.json",
            "--out",
            "cmc.csv",
            "--protocol",
            "pages",
        ],
        dir,
    );
    assert!(out.contains("Top-1"), "{out}");

    // CMC rates never decrease.
    let cmc = std::fs::read_to_string(dir.join("cmc.csv")).unwrap();
    let rates: Vec<f64> = cmc
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(!rates.is_empty());
    for w in rates.windows(2) {
        assert!(w[1] >= w[0]);
    }
    assert!((rates.last().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn stages_chain_through_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write_profiles(dir, 2, 4, None);
    write_small_config(dir);
    ok(
        &["synth", "--profiles", "profiles.toml", "--out", "corpus.json"],
        dir,
    );
    ok(
        &["preprocess", "--in", "corpus.json", "--out", "pre.json"],
        dir,
    );
    let out = ok(&["segment", "--in", "pre.json", "--out", "strokes.json"], dir);
    assert!(out.contains("strokes"), "{out}");
    ok(&["fit", "--in", "strokes.json", "--out", "params.json"], dir);
    let out = ok(
        &[
            "features",
            "--in",
            "params.json",
            "--out",
            "segments.json",
            "--mode",
            "ebe",
        ],
        dir,
    );
    assert!(out.contains("length 28"), "{out}");
    let out = ok(
        &["classify", "--in", "segments.json", "--out", "labeled.json"],
        dir,
    );
    assert!(out.contains("classified"), "{out}");

    // Segment also accepts raw ink and preprocesses on the fly.
    let direct = ok(
        &["segment", "--in", "corpus.json", "--out", "strokes2.json"],
        dir,
    );
    assert!(direct.contains("strokes"));
    let a = std::fs::read(dir.join("strokes.json")).unwrap();
    let b = std::fs::read(dir.join("strokes2.json")).unwrap();
    assert_eq!(a, b, "raw-ink segment path must match preprocessed path");
}

#[test]
fn wrong_schema_input_names_expected_version() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write_profiles(dir, 2, 3, None);
    ok(
        &["synth", "--profiles", "profiles.toml", "--out", "corpus.json"],
        dir,
    );
    ok(
        &["preprocess", "--in", "corpus.json", "--out", "pre.json"],
        dir,
    );
    // fit expects the strokes artifact, not the preprocessed one.
    let out = run(&["fit", "--in", "pre.json", "--out", "x.json"], dir);
    assert!(!out.status.success());
    let message = String::from_utf8_lossy(&out.stderr);
    assert!(
        message.contains("betascript/strokes/1"),
        "error must name the expected schema: {message}"
    );
}

#[test]
fn train_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write_profiles(dir, 2, 5, None);
    write_small_config(dir);
    ok(
        &["synth", "--profiles", "profiles.toml", "--out", "corpus.json"],
        dir,
    );
    for (out, jobs) in [("m1.json", "1"), ("m2.json", "0")] {
        ok(
            &[
                "train",
                "--config",
                "config.toml",
                "--in",
                "corpus.json",
                "--out",
                out,
                "--seed",
                "7",
                "--jobs",
                jobs,
            ],
            dir,
        );
    }
    let a = std::fs::read(dir.join("m1.json")).unwrap();
    let b = std::fs::read(dir.join("m2.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mode_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write_profiles(dir, 2, 5, None);
    write_small_config(dir);
    ok(
        &["synth", "--profiles", "profiles.toml", "--out", "corpus.json"],
        dir,
    );
    ok(
        &[
            "train",
            "--config",
            "config.toml",
            "--in",
            "corpus.json",
            "--out",
            "model.json",
            "--mode",
            "ebe",
        ],
        dir,
    );
    let out = run(
        &[
            "identify",
            "--model",
            "model.json",
            "--in",
            "corpus.json",
            "--mode",
            "ebe+fepc",
        ],
        dir,
    );
    assert!(!out.status.success());
    let message = String::from_utf8_lossy(&out.stderr);
    assert!(message.contains("mismatch"), "{message}");
}

#[test]
fn synth_is_deterministic_and_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    write_profiles(dir, 2, 3, Some(2));
    ok(&["synth", "--profiles", "profiles.toml", "--out", "a.json"], dir);
    ok(&["synth", "--profiles", "profiles.toml", "--out", "b.json"], dir);
    let a = std::fs::read(dir.join("a.json")).unwrap();
    let b = std::fs::read(dir.join("b.json")).unwrap();
    assert_eq!(a, b);

    // Canonical form: loading and re-saving is byte-stable.
    ok(&["preprocess", "--in", "a.json", "--out", "pre.json"], dir);
    let text = std::fs::read_to_string(dir.join("a.json")).unwrap();
    assert!(text.starts_with("{\"version\": 1, \"sample_rate_hz\": 100.000000"));
    assert!(text.contains("\"page\": \"p00\""));
}

#[test]
fn shipped_rules_file_matches_defaults() {
    // The annotated rules.toml at the workspace root must stay in sync with
    // the built-in thresholds, or --rules silently changes behavior.
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../rules.toml");
    let loaded = betascript_core::taxonomy::TaxonomyConfig::load(&path).unwrap();
    assert_eq!(loaded, betascript_core::taxonomy::TaxonomyConfig::default());
}

#[test]
fn missing_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["segment", "--in", "nope.json", "--out", "x.json"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
}
