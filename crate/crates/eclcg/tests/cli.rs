//! End-to-end tests of the command-line interface: payload formats, exit
//! codes, determinism, and the gen -> attack -> verify round trip.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eclcg"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary starts");
    child
        .stdin
        .take()
        .expect("stdin piped")
        .write_all(input.as_bytes())
        .expect("stdin accepts input");
    child.wait_with_output().expect("binary exits")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn gen_explicit_tiny_instance_flags_duplicates() {
    let out = run(&[
        "gen", "--p", "5", "--a", "1", "--b", "1", "--gx", "0", "--gy", "1", "--w0x", "2",
        "--w0y", "1", "--count", "2",
    ]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["values"], serde_json::json!(["3", "3"]));
    assert_eq!(v["flags"][0]["duplicate_x"], serde_json::json!(true));
    assert_eq!(v["flags"][1]["duplicate_x"], serde_json::json!(true));
}

#[test]
fn gen_singular_curve_exits_2() {
    let out = run(&[
        "gen", "--p", "5", "--a", "0", "--b", "0", "--gx", "0", "--gy", "0", "--w0x", "0",
        "--w0y", "0",
    ]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());
}

#[test]
fn gen_off_curve_point_exits_2() {
    let out = run(&[
        "gen", "--p", "5", "--a", "1", "--b", "1", "--gx", "1", "--gy", "1", "--w0x", "2",
        "--w0y", "1",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn gen_missing_parameter_exits_1() {
    let out = run(&["gen", "--p", "5", "--a", "1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn gen_unparseable_parameter_exits_1() {
    let out = run(&[
        "gen", "--p", "5x", "--a", "1", "--b", "1", "--gx", "0", "--gy", "1", "--w0x", "2",
        "--w0y", "1",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn gen_is_deterministic_for_a_fixed_seed() {
    let args = ["gen", "--random", "--bits", "48", "--count", "9", "--seed", "11"];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
    let third = run(&["gen", "--random", "--bits", "48", "--count", "9", "--seed", "12"]);
    assert_ne!(first.stdout, third.stdout);
}

#[test]
fn attack_with_six_values_exits_1() {
    let out = run_stdin(&["attack"], r#"["1","2","3","4","5","6"]"#);
    assert_eq!(code(&out), 1);
    assert!(out.stdout.is_empty());
}

#[test]
fn attack_with_duplicate_values_exits_2_with_stage() {
    let out = run_stdin(&["attack"], r#"["1","2","3","4","5","6","1"]"#);
    assert_eq!(code(&out), 2);
    let v = stdout_json(&out);
    assert_eq!(v["branch"], serde_json::json!("error"));
    assert_eq!(v["stage"], serde_json::json!("build_system"));
}

#[test]
fn attack_on_arithmetic_progression_reports_the_stage() {
    let out = run_stdin(&["attack"], r#"["1","2","3","4","5","6","7"]"#);
    assert_eq!(code(&out), 2);
    let v = stdout_json(&out);
    assert_eq!(v["branch"], serde_json::json!("error"));
    assert_eq!(v["stage"], serde_json::json!("rational_solve"));
}

#[test]
fn attack_accepts_bare_arrays_objects_and_wrapped_output() {
    let dir = tempfile::tempdir().expect("tempdir");
    let wrapped = dir.path().join("wrapped.json");
    let out = bin()
        .args(["gen", "--random", "--bits", "40", "--count", "8", "--seed", "5",
            "--reveal-secrets"])
        .output()
        .expect("binary runs");
    std::fs::write(&wrapped, &out.stdout).expect("write stream");
    let full = stdout_json(&out);

    let from_wrapped = run(&["attack", wrapped.to_str().expect("utf-8 path")]);
    assert_eq!(code(&from_wrapped), 0);

    let bare: Vec<serde_json::Value> = full["stream"]["values"]
        .as_array()
        .expect("values")
        .clone();
    let from_bare = run_stdin(&["attack"], &serde_json::json!(bare).to_string());
    let from_object = run_stdin(
        &["attack"],
        &serde_json::json!({"values": bare}).to_string(),
    );
    assert_eq!(code(&from_bare), 0);
    assert_eq!(stdout_json(&from_wrapped), stdout_json(&from_bare));
    assert_eq!(stdout_json(&from_wrapped), stdout_json(&from_object));
}

fn gen_to(dir: &Path, name: &str, args: &[&str]) -> std::path::PathBuf {
    let out = run(args);
    assert_eq!(code(&out), 0, "gen failed: {}", String::from_utf8_lossy(&out.stderr));
    let path = dir.join(name);
    std::fs::write(&path, &out.stdout).expect("write fixture");
    path
}

#[test]
fn round_trip_gen_attack_verify_recovers_everything() {
    let dir = tempfile::tempdir().expect("tempdir");
    for bits in [16u32, 48, 96] {
        let bits_s = bits.to_string();
        let stream = gen_to(
            dir.path(),
            &format!("s{bits}.json"),
            &["gen", "--random", "--bits", &bits_s, "--count", "10", "--seed", "9",
                "--reveal-secrets"],
        );
        let stream_s = stream.to_str().expect("utf-8 path");
        let attack_out = run(&["attack", stream_s]);
        assert_eq!(
            code(&attack_out),
            0,
            "attack at {bits} bits: {}",
            String::from_utf8_lossy(&attack_out.stderr)
        );
        let model = stdout_json(&attack_out);
        assert_eq!(model["branch"], serde_json::json!("modular"));
        assert_eq!(model["self_check"]["all_match"], serde_json::json!(true));

        let text = std::fs::read_to_string(&stream).expect("stream file");
        let full: serde_json::Value = serde_json::from_str(&text).expect("stream parses");
        let p = full["instance"]["p"].as_str().expect("prime string");
        assert_eq!(model["m"].as_str().expect("modulus"), p);
        assert!(model["recovered_points"].is_object());

        let model_path = dir.path().join(format!("m{bits}.json"));
        std::fs::write(&model_path, &attack_out.stdout).expect("write model");
        let verify_out = run(&[
            "verify",
            "--model",
            model_path.to_str().expect("utf-8 path"),
            "--stream",
            stream_s,
        ]);
        assert_eq!(code(&verify_out), 0);
        let report = stdout_json(&verify_out);
        assert_eq!(report["all_match"], serde_json::json!(true));
        assert_eq!(report["mismatches"], serde_json::json!(0));
    }
}

#[test]
fn verify_reports_mismatches_for_a_perturbed_model() {
    let dir = tempfile::tempdir().expect("tempdir");
    let stream = gen_to(
        dir.path(),
        "s.json",
        &["gen", "--random", "--bits", "32", "--count", "9", "--seed", "21"],
    );
    let stream_s = stream.to_str().expect("utf-8 path");
    let attack_out = run(&["attack", stream_s]);
    assert_eq!(code(&attack_out), 0);
    let mut model = stdout_json(&attack_out);

    let b: num_bigint::BigInt = model["model"]["params"]["b"]
        .as_str()
        .expect("b string")
        .parse()
        .expect("decimal");
    let m: num_bigint::BigInt = model["m"].as_str().expect("m string").parse().expect("decimal");
    let perturbed: num_bigint::BigInt = (b + 1) % &m;
    model["model"]["params"]["b"] = serde_json::json!(perturbed.to_string());

    let model_path = dir.path().join("m.json");
    std::fs::write(&model_path, model.to_string()).expect("write model");
    let verify_out = run(&[
        "verify",
        "--model",
        model_path.to_str().expect("utf-8 path"),
        "--stream",
        stream_s,
    ]);
    assert_eq!(code(&verify_out), 0, "mismatches are report content, not errors");
    let report = stdout_json(&verify_out);
    assert_eq!(report["all_match"], serde_json::json!(false));
    assert!(report["mismatches"].as_u64().expect("count") > 0);
    assert_eq!(report["indices"][0]["result"], serde_json::json!("mismatch"));
}

#[test]
fn verify_skips_a_flagged_infinity_slot() {
    let dir = tempfile::tempdir().expect("tempdir");
    let stream = gen_to(
        dir.path(),
        "f5.json",
        &["gen", "--p", "5", "--a", "1", "--b", "1", "--gx", "0", "--gy", "1", "--w0x", "2",
            "--w0y", "1", "--count", "8"],
    );
    let model = serde_json::json!({
        "branch": "modular",
        "m": "5",
        "params": {
            "ring": {"type": "residue_ring", "modulus": "5"},
            "x_g": "0", "y_g2": "1", "a": "1", "b": "1",
        },
    });
    let model_path = dir.path().join("m5.json");
    std::fs::write(&model_path, model.to_string()).expect("write model");
    let out = run(&[
        "verify",
        "--model",
        model_path.to_str().expect("utf-8 path"),
        "--stream",
        stream.to_str().expect("utf-8 path"),
    ]);
    assert_eq!(code(&out), 0);
    let report = stdout_json(&out);
    let rows = report["indices"].as_array().expect("rows");
    let last = rows.last().expect("at least the infinity row");
    assert_eq!(last["result"], serde_json::json!("skipped_infinity"));
    assert_eq!(last["index"], serde_json::json!(6));
}

#[test]
fn verify_with_unparseable_model_exits_1() {
    let dir = tempfile::tempdir().expect("tempdir");
    let model_path = dir.path().join("bad.json");
    std::fs::write(&model_path, "{not json").expect("write model");
    let stream = gen_to(
        dir.path(),
        "s.json",
        &["gen", "--random", "--bits", "16", "--count", "8", "--seed", "1"],
    );
    let out = run(&[
        "verify",
        "--model",
        model_path.to_str().expect("utf-8 path"),
        "--stream",
        stream.to_str().expect("utf-8 path"),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn experiment_writes_report_and_csv_deterministically() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out_path = dir.path().join("report.json");
    let csv_path = dir.path().join("trials.csv");
    let args = [
        "experiment", "--bits", "16", "--revealed", "8", "--trials", "4", "--seed", "3",
        "--jobs", "1",
    ];
    let direct = run(&args);
    assert_eq!(code(&direct), 0);
    let report = stdout_json(&direct);
    assert_eq!(report["counts"]["exact_recovery"], serde_json::json!(4));
    assert_eq!(report["exact_rate"], serde_json::json!(1.0));

    let mut to_file = args.to_vec();
    to_file.extend([
        "--out",
        out_path.to_str().expect("utf-8 path"),
        "--csv",
        csv_path.to_str().expect("utf-8 path"),
    ]);
    let filed = run(&to_file);
    assert_eq!(code(&filed), 0);
    assert!(filed.stdout.is_empty(), "--out moves the payload off stdout");

    let written: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).expect("report file"))
            .expect("report parses");
    for key in ["counts", "exact_rate", "all_predictions_ok"] {
        assert_eq!(written[key], report[key], "stable field {key}");
    }
    let csv = std::fs::read_to_string(&csv_path).expect("csv file");
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("index,status,cofactor_bits,resamples,micros")
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn experiment_rejects_bad_configuration_with_exit_1() {
    let out = run(&["experiment", "--bits", "4", "--trials", "1"]);
    assert_eq!(code(&out), 1);
    let out = run(&["experiment", "--revealed", "6", "--trials", "1", "--bits", "16"]);
    assert_eq!(code(&out), 1);
    let out = run(&["experiment", "--jobs", "0", "--trials", "1", "--bits", "16"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn help_and_version_exit_0_unknown_flag_exits_1() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["gen", "--no-such-flag"])), 1);
}
