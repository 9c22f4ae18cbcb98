//! End-to-end tests that drive the compiled binary through its public
//! command surface: generating archives, scanning records, checking
//! identifiability, selecting windows, fitting models, and validating
//! them — including the documented exit codes (0 success, 1 usage or
//! file errors, 2 identifiability failure, 3 numerical failure) and the
//! machine-readable output formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn msid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msid"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[track_caller]
fn assert_code(out: &Output, want: i32, what: &str) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "{what}\n--- stdout ---\n{}\n--- stderr ---\n{}",
        stdout_of(out),
        stderr_of(out)
    );
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("read {}: {e}", p.display()))
}

fn json_of(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("bad json ({e}):\n{text}"))
}

/// Generates the committed two-state archive into `dir` and returns its path.
fn generate_siso2(dir: &Path) -> PathBuf {
    let archive = dir.join("archive.csv");
    let out = msid(&[
        "generate",
        "--spec",
        path_str(&fixture("siso2.json")),
        "--out",
        path_str(&archive),
    ]);
    assert_code(&out, 0, "generate siso2");
    archive
}

/// The window selection used throughout: two windows each from records
/// 4 and 5 plus one from record 6 — five data-matrix columns, exactly
/// the minimum m*ell + n = 5 at ell = 3, order = 2.
fn write_minimal_selection(dir: &Path) -> PathBuf {
    let sel = dir.join("sel.txt");
    std::fs::write(&sel, "4,0,2\n5,0,2\n6,0,1\n").expect("write selection");
    sel
}

#[test]
fn pipeline_runs_end_to_end_on_the_two_state_fixture() {
    let dir = TempDir::new().expect("tempdir");
    let dir = dir.path();

    // generate: 7 records x 20 samples, single input, single output.
    let archive = generate_siso2(dir);
    let text = read(&archive);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,seg,u1,y1"), "csv header");
    assert_eq!(text.lines().count(), 1 + 7 * 20, "one row per sample");

    // scan: a table row per record plus a summary line.
    let scan = msid(&[
        "scan",
        "--archive",
        path_str(&archive),
        "--ell",
        "3",
        "--order",
        "2",
    ]);
    assert_code(&scan, 0, "scan");
    let scan_text = stdout_of(&scan);
    assert!(
        scan_text.contains("of 7 records"),
        "scan summary missing:\n{scan_text}"
    );

    // scan --json: an array with one object per record.
    let scan_json = msid(&[
        "scan",
        "--archive",
        path_str(&archive),
        "--ell",
        "3",
        "--order",
        "2",
        "--json",
    ]);
    assert_code(&scan_json, 0, "scan --json");
    let rows = json_of(&stdout_of(&scan_json));
    let rows = rows.as_array().expect("scan emits an array");
    assert_eq!(rows.len(), 7);
    for row in rows {
        assert_eq!(row["length"], 20);
        assert_eq!(row["windows"], 18);
        assert!(row["verdict"].is_string());
    }

    // check --select: the five-column selection passes every condition.
    let sel = write_minimal_selection(dir);
    let check = msid(&[
        "check",
        "--archive",
        path_str(&archive),
        "--ell",
        "3",
        "--order",
        "2",
        "--select",
        path_str(&sel),
        "--json",
    ]);
    assert_code(&check, 0, "check --select");
    let verdict = json_of(&stdout_of(&check));
    assert_eq!(verdict["pass"], true);
    assert_eq!(verdict["columns"], 5);
    assert_eq!(verdict["rank_u"], 3);
    assert_eq!(verdict["rank_w"], 5);
    assert_eq!(verdict["required_rank_w"], 5);

    // select: greedy search writes a parseable selection that checks out.
    let greedy_sel = dir.join("greedy.txt");
    let select = msid(&[
        "select",
        "--archive",
        path_str(&archive),
        "--ell",
        "3",
        "--order",
        "2",
        "--out",
        path_str(&greedy_sel),
    ]);
    assert_code(&select, 0, "select");
    assert!(
        stdout_of(&select).contains("identifiable at order 2"),
        "select verdict:\n{}",
        stdout_of(&select)
    );
    let greedy_text = read(&greedy_sel);
    let triples: Vec<&str> = greedy_text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    assert!(!triples.is_empty(), "greedy selection is empty");
    for triple in &triples {
        assert_eq!(triple.split(',').count(), 3, "triple: {triple}");
    }
    let recheck = msid(&[
        "check",
        "--archive",
        path_str(&archive),
        "--ell",
        "3",
        "--order",
        "2",
        "--select",
        path_str(&greedy_sel),
    ]);
    assert_code(&recheck, 0, "check of greedy selection");

    // fit: model JSON plus the default-named diagnostics and spectrum files.
    let model_path = dir.join("model.json");
    let fit = msid(&[
        "fit",
        "--archive",
        path_str(&archive),
        "--ell",
        "3",
        "--order",
        "2",
        "--select",
        path_str(&sel),
        "--out",
        path_str(&model_path),
    ]);
    assert_code(&fit, 0, "fit");
    let fit_text = stdout_of(&fit);
    assert!(fit_text.contains("5 windows"), "fit summary:\n{fit_text}");
    assert!(
        fit_text.contains("3 merged spans"),
        "fit summary:\n{fit_text}"
    );

    let model = json_of(&read(&model_path));
    assert_eq!(model["n"], 2);
    assert_eq!(model["m"], 1);
    assert_eq!(model["p"], 1);
    assert_eq!(model["A"].as_array().expect("A").len(), 4);
    let states = model["initial_states"].as_array().expect("states");
    assert_eq!(states.len(), 3, "one state per merged span");
    let named: Vec<&str> = states
        .iter()
        .map(|s| s["record"].as_str().expect("record id"))
        .collect();
    assert_eq!(named, ["4", "5", "6"]);
    for s in states {
        assert_eq!(s["offset"], 0);
        assert_eq!(s["x"].as_array().expect("x").len(), 2);
    }

    let diag = json_of(&read(&dir.join("model.diagnostics.json")));
    assert_eq!(diag["identifiability"]["pass"], true);
    assert_eq!(diag["regressor_rows"], 11);
    assert_eq!(diag["regressor_cols"], 9);
    assert_eq!(diag["stable"], true);
    let sv_csv = read(&dir.join("model.sv.csv"));
    assert_eq!(sv_csv.lines().next(), Some("matrix,index,value"));
    assert!(sv_csv.lines().count() > 3, "spectra rows:\n{sv_csv}");

    // validate on a held-out record: noise-free data, exact model, so the
    // per-channel prediction error is at numerical noise level.
    let validate = msid(&[
        "validate",
        "--model",
        path_str(&model_path),
        "--archive",
        path_str(&archive),
        "--record",
        "7",
        "--json",
    ]);
    assert_code(&validate, 0, "validate");
    let report = json_of(&stdout_of(&validate));
    assert_eq!(report["record"], "7");
    assert_eq!(report["horizon"], 20);
    let rms = report["per_channel_rms"].as_array().expect("rms");
    assert_eq!(rms.len(), 1);
    assert!(
        rms[0].as_f64().expect("rms value") <= 1e-8,
        "held-out rms too large: {rms:?}"
    );
    assert_eq!(
        report["estimated_initial_state"].as_array().expect("x0").len(),
        2
    );

    // validate --truth: impulse-response distance to the generating model.
    let truth_path = dir.join("truth.json");
    std::fs::write(
        &truth_path,
        r#"{"n": 2, "m": 1, "p": 1,
            "A": [0.9, 0.2, 0.0, 0.8], "B": [1.0, 1.0],
            "C": [1.0, 1.0], "D": [1.0]}"#,
    )
    .expect("write truth");
    let against_truth = msid(&[
        "validate",
        "--model",
        path_str(&model_path),
        "--archive",
        path_str(&archive),
        "--record",
        "7",
        "--truth",
        path_str(&truth_path),
        "--json",
    ]);
    assert_code(&against_truth, 0, "validate --truth");
    let report = json_of(&stdout_of(&against_truth));
    let md = report["markov_distance"].as_f64().expect("distance");
    assert!(md <= 1e-8, "markov distance too large: {md}");

    // fit --greedy: the selection search is usable directly from fit.
    let greedy_model = dir.join("gmodel.json");
    let fit_greedy = msid(&[
        "fit",
        "--archive",
        path_str(&archive),
        "--ell",
        "3",
        "--order",
        "2",
        "--greedy",
        "--stride",
        "2",
        "--out",
        path_str(&greedy_model),
    ]);
    assert_code(&fit_greedy, 0, "fit --greedy");
    assert_eq!(json_of(&read(&greedy_model))["n"], 2);
}

#[test]
fn identical_configuration_and_seed_reproduce_identical_bytes() {
    let dir = TempDir::new().expect("tempdir");
    let dir = dir.path();
    let spec = fixture("siso2.json");

    // Two generate runs from the same spec produce the same file.
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    for out in [&a, &b] {
        let run = msid(&[
            "generate",
            "--spec",
            path_str(&spec),
            "--out",
            path_str(out),
        ]);
        assert_code(&run, 0, "generate");
    }
    assert_eq!(read(&a), read(&b), "generate is deterministic");

    // A different seed produces different data.
    let c = dir.join("c.csv");
    let run = msid(&[
        "generate",
        "--spec",
        path_str(&spec),
        "--out",
        path_str(&c),
        "--seed",
        "123",
    ]);
    assert_code(&run, 0, "generate --seed");
    assert_ne!(read(&a), read(&c), "the seed drives the data");

    // Two fit runs over the same archive and selection produce the same
    // model, diagnostics, and spectrum bytes.
    let sel = write_minimal_selection(dir);
    let mut outputs: Vec<(String, String, String)> = Vec::new();
    for tag in ["m1", "m2"] {
        let model = dir.join(format!("{tag}.json"));
        let diag = dir.join(format!("{tag}.diag.json"));
        let sv = dir.join(format!("{tag}.sv.csv"));
        let run = msid(&[
            "fit",
            "--archive",
            path_str(&a),
            "--ell",
            "3",
            "--order",
            "2",
            "--select",
            path_str(&sel),
            "--out",
            path_str(&model),
            "--diagnostics",
            path_str(&diag),
            "--sv-out",
            path_str(&sv),
        ]);
        assert_code(&run, 0, "fit");
        outputs.push((read(&model), read(&diag), read(&sv)));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "model bytes differ");
    assert_eq!(outputs[0].1, outputs[1].1, "diagnostics bytes differ");
    assert_eq!(outputs[0].2, outputs[1].2, "spectrum bytes differ");
}

#[test]
fn archive_loading_is_insensitive_to_row_order() {
    let dir = TempDir::new().expect("tempdir");
    let dir = dir.path();
    let archive = generate_siso2(dir);

    // Rewrite the archive with all data rows reversed: segments
    // interleave and time runs backwards within each one. Loading sorts
    // rows by t within a segment, so the fit must not change.
    let text = read(&archive);
    let mut lines = text.lines();
    let header = lines.next().expect("header").to_string();
    let mut rows: Vec<&str> = lines.collect();
    rows.reverse();
    let shuffled = dir.join("shuffled.csv");
    std::fs::write(&shuffled, format!("{header}\n{}\n", rows.join("\n"))).expect("write");

    let sel = write_minimal_selection(dir);
    let mut models = Vec::new();
    for (tag, src) in [("ordered", &archive), ("shuffled", &shuffled)] {
        let model = dir.join(format!("{tag}.json"));
        let run = msid(&[
            "fit",
            "--archive",
            path_str(src),
            "--ell",
            "3",
            "--order",
            "2",
            "--select",
            path_str(&sel),
            "--out",
            path_str(&model),
        ]);
        assert_code(&run, 0, tag);
        models.push(read(&model));
    }
    assert_eq!(models[0], models[1], "row order changed the fit");
}

#[test]
fn scan_reports_every_record_of_the_two_input_archive() {
    let dir = TempDir::new().expect("tempdir");
    let dir = dir.path();
    let archive = dir.join("mimo.csv");
    let generate = msid(&[
        "generate",
        "--spec",
        path_str(&fixture("mimo4.json")),
        "--out",
        path_str(&archive),
    ]);
    assert_code(&generate, 0, "generate mimo4");
    assert!(
        stdout_of(&generate).contains("wrote 17 records"),
        "generate summary:\n{}",
        stdout_of(&generate)
    );

    let scan = msid(&[
        "scan",
        "--archive",
        path_str(&archive),
        "--ell",
        "5",
        "--order",
        "4",
        "--rank-mode",
        "gap",
        "--json",
    ]);
    assert_code(&scan, 0, "scan mimo4");
    let rows = json_of(&stdout_of(&scan));
    let rows = rows.as_array().expect("array");
    assert_eq!(rows.len(), 17, "one row per record");

    // The archive mixes many short snippets with four long captures.
    let long: Vec<(&str, u64)> = rows
        .iter()
        .filter(|r| r["length"].as_u64().expect("length") >= 172)
        .map(|r| {
            (
                r["record"].as_str().expect("id"),
                r["length"].as_u64().expect("length"),
            )
        })
        .collect();
    assert_eq!(
        long,
        [("5", 245), ("6", 265), ("15", 172), ("17", 193)],
        "long records"
    );
    for row in rows {
        let len = row["length"].as_u64().expect("length");
        assert_eq!(row["windows"].as_u64().expect("windows"), len - 5 + 1);
    }
}

#[test]
fn degenerate_data_exits_with_the_identifiability_code() {
    let dir = TempDir::new().expect("tempdir");
    let dir = dir.path();

    // Constant inputs: the stacked input matrix has rank 1, far below
    // m * ell, no matter how many windows are offered.
    let flat_spec = dir.join("flat.json");
    std::fs::write(
        &flat_spec,
        r#"{
            "model": {"n": 2, "m": 1, "p": 1,
                      "A": [0.9, 0.2, 0.0, 0.8], "B": [1.0, 1.0],
                      "C": [1.0, 1.0], "D": [1.0]},
            "record_lengths": [30, 30],
            "initial_states": "random",
            "input_law": {"type": "constant", "level": 0.7},
            "output_noise_sigma": 0.0,
            "seed": 9
        }"#,
    )
    .expect("write spec");
    let flat_archive = dir.join("flat.csv");
    let generate = msid(&[
        "generate",
        "--spec",
        path_str(&flat_spec),
        "--out",
        path_str(&flat_archive),
    ]);
    assert_code(&generate, 0, "generate constant-input archive");

    let full_span = dir.join("full.txt");
    std::fs::write(&full_span, "1,0,28\n2,0,28\n").expect("write selection");
    let check = msid(&[
        "check",
        "--archive",
        path_str(&flat_archive),
        "--ell",
        "3",
        "--order",
        "2",
        "--select",
        path_str(&full_span),
        "--json",
    ]);
    assert_code(&check, 2, "check on constant inputs");
    let verdict = json_of(&stdout_of(&check));
    assert_eq!(verdict["pass"], false);
    assert!(
        verdict["verdict"]
            .as_str()
            .expect("verdict")
            .contains("input"),
        "verdict names the input condition: {verdict}"
    );

    let fit = msid(&[
        "fit",
        "--archive",
        path_str(&flat_archive),
        "--ell",
        "3",
        "--order",
        "2",
        "--select",
        path_str(&full_span),
        "--out",
        path_str(&dir.join("flat-model.json")),
    ]);
    assert_code(&fit, 2, "fit refuses constant inputs");
    let err = stderr_of(&fit);
    assert!(
        err.contains("identifiability") && err.contains("input"),
        "fit error names the condition:\n{err}"
    );
    assert!(!dir.join("flat-model.json").exists(), "no model written");

    // Too few data-matrix columns: well-excited data, but the selection
    // offers only 4 columns where m * ell + n = 5 are required.
    let archive = generate_siso2(dir);
    let starved = dir.join("starved.txt");
    std::fs::write(&starved, "1,0,4\n").expect("write selection");
    let check = msid(&[
        "check",
        "--archive",
        path_str(&archive),
        "--ell",
        "3",
        "--order",
        "2",
        "--select",
        path_str(&starved),
        "--json",
    ]);
    assert_code(&check, 2, "check on starved selection");
    let verdict = json_of(&stdout_of(&check));
    assert_eq!(verdict["column_feasible"], false);
    assert!(
        verdict["verdict"]
            .as_str()
            .expect("verdict")
            .contains("columns"),
        "verdict names the column shortfall: {verdict}"
    );

    let fit = msid(&[
        "fit",
        "--archive",
        path_str(&archive),
        "--ell",
        "3",
        "--order",
        "2",
        "--select",
        path_str(&starved),
        "--out",
        path_str(&dir.join("starved-model.json")),
    ]);
    assert_code(&fit, 2, "fit refuses starved selection");
    assert!(
        stderr_of(&fit).contains("columns"),
        "fit error names the shortfall:\n{}",
        stderr_of(&fit)
    );

    // A block-row depth that cannot settle the order is rejected up front.
    let shallow = msid(&[
        "check",
        "--archive",
        path_str(&archive),
        "--ell",
        "2",
        "--order",
        "2",
        "--select",
        path_str(&starved),
    ]);
    assert_code(&shallow, 2, "ell <= order is refused");
    assert!(
        stderr_of(&shallow).contains("ell"),
        "depth error:\n{}",
        stderr_of(&shallow)
    );
}

#[test]
fn numerical_failures_exit_with_the_numerical_code() {
    let dir = TempDir::new().expect("tempdir");
    let dir = dir.path();
    let archive = generate_siso2(dir);

    // Unbounded prediction with an unstable model is a numerical error.
    let unstable = dir.join("unstable.json");
    std::fs::write(
        &unstable,
        r#"{"n": 1, "m": 1, "p": 1, "A": [1.05], "B": [1.0], "C": [1.0], "D": [0.0]}"#,
    )
    .expect("write model");
    let validate = msid(&[
        "validate",
        "--model",
        path_str(&unstable),
        "--archive",
        path_str(&archive),
        "--record",
        "1",
    ]);
    assert_code(&validate, 3, "validate unstable model");
    assert!(
        stderr_of(&validate).contains("unstable"),
        "error names the instability:\n{}",
        stderr_of(&validate)
    );

    // Bounding the horizon makes the same validation legitimate.
    let bounded = msid(&[
        "validate",
        "--model",
        path_str(&unstable),
        "--archive",
        path_str(&archive),
        "--record",
        "1",
        "--horizon",
        "10",
    ]);
    assert_code(&bounded, 0, "bounded validation of unstable model");
}

#[test]
fn usage_and_file_errors_exit_with_code_one() {
    let dir = TempDir::new().expect("tempdir");
    let dir = dir.path();

    // Unknown flag, missing required argument, missing subcommand.
    assert_code(&msid(&["scan", "--nope"]), 1, "unknown flag");
    assert_code(&msid(&["fit"]), 1, "missing required arguments");
    assert_code(&msid(&[]), 1, "missing subcommand");

    // Help and version are not errors.
    assert_code(&msid(&["--help"]), 0, "--help");
    assert_code(&msid(&["scan", "--help"]), 0, "scan --help");

    // Nonexistent input file.
    let missing = dir.join("missing.csv");
    let scan = msid(&[
        "scan",
        "--archive",
        path_str(&missing),
        "--ell",
        "3",
        "--order",
        "2",
    ]);
    assert_code(&scan, 1, "missing archive");
    assert!(
        stderr_of(&scan).contains("missing.csv"),
        "error names the file:\n{}",
        stderr_of(&scan)
    );

    // Malformed archive contents.
    let garbled = dir.join("garbled.csv");
    std::fs::write(&garbled, "t,seg,u1,y1\n0,a,not-a-number,1\n").expect("write");
    let scan = msid(&[
        "scan",
        "--archive",
        path_str(&garbled),
        "--ell",
        "3",
        "--order",
        "2",
    ]);
    assert_code(&scan, 1, "garbled archive");

    // A record id the archive does not contain.
    let archive = generate_siso2(dir);
    let model = dir.join("model.json");
    std::fs::write(
        &model,
        r#"{"n": 1, "m": 1, "p": 1, "A": [0.5], "B": [1.0], "C": [1.0], "D": [0.0]}"#,
    )
    .expect("write model");
    let validate = msid(&[
        "validate",
        "--model",
        path_str(&model),
        "--archive",
        path_str(&archive),
        "--record",
        "99",
    ]);
    assert_code(&validate, 1, "unknown record");
    assert!(
        stderr_of(&validate).contains("99"),
        "error names the record:\n{}",
        stderr_of(&validate)
    );
}
