//! Command-line front end: generate streams, recover models from streams,
//! replay a model against a stream, and run batch experiments.
//!
//! stdout carries exactly the declared JSON (or nothing when `--out` is
//! given); everything else goes to stderr.  Exit codes: 0 success, 1
//! malformed input or usage, 2 a typed domain rejection (singular curve,
//! off-curve point, inconsistent stream).

use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};

use eclcg::attack::{self, AttackError, AttackInput, RecoveredModel, Stage};
use eclcg::curve::Point;
use eclcg::generator::{self, GeneratorInstance, InstanceWire, StepFlags};
use eclcg::harness::{outcomes_csv, run_experiment, TrialConfig};
use eclcg::nt;
use eclcg::ring::coord_to_string;

/// Exact arithmetic triples in size per predicted element on the rational
/// branch, so replay checks against such models stop after this many steps.
const RATIONAL_REPLAY_CAP: usize = 8;

#[derive(Parser)]
#[command(name = "eclcg", version, about = "Elliptic curve congruential generator toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a stream of x-coordinates from an explicit or random instance.
    Gen(GenArgs),
    /// Recover modulus and curve parameters from revealed outputs.
    Attack(AttackArgs),
    /// Run many generate-and-recover trials and report statistics.
    Experiment(ExperimentArgs),
    /// Replay a recovered model against a stream, index by index.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Sample a random instance instead of taking explicit parameters.
    #[arg(long)]
    random: bool,
    /// Prime size in bits (with --random).
    #[arg(long)]
    bits: Option<u64>,
    /// Prime modulus, decimal.
    #[arg(long)]
    p: Option<String>,
    /// Curve coefficient A, decimal.
    #[arg(long)]
    a: Option<String>,
    /// Curve coefficient B, decimal.
    #[arg(long)]
    b: Option<String>,
    /// Composer x-coordinate, decimal.
    #[arg(long)]
    gx: Option<String>,
    /// Composer y-coordinate, decimal.
    #[arg(long)]
    gy: Option<String>,
    /// Initial point x-coordinate, decimal.
    #[arg(long)]
    w0x: Option<String>,
    /// Initial point y-coordinate, decimal.
    #[arg(long)]
    w0y: Option<String>,
    /// Number of outputs to emit.
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include the instance (curve and secret points) in the output.
    #[arg(long)]
    reveal_secrets: bool,
    /// Miller-Rabin rounds for primality checks.
    #[arg(long, default_value_t = nt::DEFAULT_MR_ROUNDS)]
    mr_rounds: u32,
}

#[derive(Args)]
struct AttackArgs {
    /// Stream file (JSON array of decimal strings, or gen output); "-" reads stdin.
    #[arg(default_value = "-")]
    input: String,
    /// Which length-7 windows of the stream to use.
    #[arg(long, value_enum, default_value_t = WindowChoice::All)]
    windows: WindowChoice,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum WindowChoice {
    All,
    First,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Prime size in bits per trial.
    #[arg(long, default_value_t = 500)]
    bits: u64,
    /// Consecutive outputs revealed to the recovery.
    #[arg(long, default_value_t = 7)]
    revealed: usize,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value_t = nt::DEFAULT_MR_ROUNDS)]
    mr_rounds: u32,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write one CSV row per trial here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Model file: attack output or a bare recovered-model object.
    #[arg(long)]
    model: String,
    /// Stream file, same formats as for attack; "-" reads stdin.
    #[arg(long)]
    stream: String,
}

enum Failure {
    /// Malformed input or flags; exit 1, message on stderr.
    Usage(String),
    /// Typed domain rejection; exit 2, message on stderr.
    Domain(String),
    /// Typed rejection with a JSON payload for stdout; exit 2.
    Payload(Value, String),
}

fn usage<S: Into<String>>(msg: S) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Attack(args) => cmd_attack(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Payload(payload, msg)) => {
            emit(&payload);
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn emit(payload: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(payload).expect("payload serializes")
    );
}

fn parse_dec(label: &str, s: &str) -> Result<BigInt, Failure> {
    s.trim()
        .parse::<BigInt>()
        .map_err(|_| usage(format!("{label}: not a decimal integer: {s:?}")))
}

fn cmd_gen(args: GenArgs) -> Result<(), Failure> {
    let explicit: [(&str, &Option<String>); 7] = [
        ("--p", &args.p),
        ("--a", &args.a),
        ("--b", &args.b),
        ("--gx", &args.gx),
        ("--gy", &args.gy),
        ("--w0x", &args.w0x),
        ("--w0y", &args.w0y),
    ];
    let given = explicit.iter().filter(|(_, v)| v.is_some()).count();
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed);

    let inst: GeneratorInstance = if args.random {
        if given > 0 {
            return Err(usage("--random conflicts with explicit parameters"));
        }
        let bits = args
            .bits
            .ok_or_else(|| usage("--random requires --bits"))?;
        if bits < 3 {
            return Err(usage("--bits must be at least 3"));
        }
        generator::random_instance(bits, args.mr_rounds, &mut rng)
    } else {
        if args.bits.is_some() {
            return Err(usage("--bits requires --random"));
        }
        if given != explicit.len() {
            let missing: Vec<&str> = explicit
                .iter()
                .filter(|(_, v)| v.is_none())
                .map(|(n, _)| *n)
                .collect();
            return Err(usage(format!(
                "explicit generation needs all of --p --a --b --gx --gy --w0x --w0y (missing: {})",
                missing.join(" ")
            )));
        }
        let field = |label: &str, v: &Option<String>| {
            parse_dec(label, v.as_deref().expect("presence checked"))
        };
        let wire = InstanceWire {
            p: field("--p", &args.p)?,
            a: field("--a", &args.a)?,
            b: field("--b", &args.b)?,
            gx: field("--gx", &args.gx)?,
            gy: field("--gy", &args.gy)?,
            w0x: field("--w0x", &args.w0x)?,
            w0y: field("--w0y", &args.w0y)?,
        };
        wire.into_instance(&mut rng)
            .map_err(|e| Failure::Domain(e.to_string()))?
    };

    let stream = inst.emit_sequence(args.count);
    let payload = if args.reveal_secrets {
        json!({
            "instance": InstanceWire::from_instance(&inst),
            "stream": stream,
        })
    } else {
        serde_json::to_value(&stream).expect("stream serializes")
    };
    emit(&payload);
    Ok(())
}

/// Stream input as the other subcommands accept it: a bare JSON array of
/// decimal strings, a gen stream object, or the full gen --reveal-secrets
/// output (the wrapper is unwrapped, flags are kept if present).
struct StreamInput {
    values: Vec<BigInt>,
    flags: Vec<StepFlags>,
}

fn read_source(path: &str) -> Result<String, Failure> {
    if path == "-" {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| usage(format!("reading stdin: {e}")))?;
        Ok(text)
    } else {
        std::fs::read_to_string(path).map_err(|e| usage(format!("reading {path}: {e}")))
    }
}

fn parse_stream(text: &str) -> Result<StreamInput, Failure> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| usage(format!("stream is not JSON: {e}")))?;
    let node = match &root {
        Value::Object(map) if map.contains_key("stream") => &map["stream"],
        other => other,
    };
    let (raw_values, flags) = match node {
        Value::Array(items) => (items.clone(), Vec::new()),
        Value::Object(map) => {
            let values = map
                .get("values")
                .and_then(Value::as_array)
                .cloned()
                .ok_or_else(|| usage("stream object has no \"values\" array"))?;
            let flags: Vec<StepFlags> = match map.get("flags") {
                Some(v) => serde_json::from_value(v.clone())
                    .map_err(|e| usage(format!("bad \"flags\" entry: {e}")))?,
                None => Vec::new(),
            };
            (values, flags)
        }
        _ => return Err(usage("stream must be a JSON array or a stream object")),
    };
    let mut values = Vec::with_capacity(raw_values.len());
    for (i, item) in raw_values.iter().enumerate() {
        let v = match item {
            Value::String(s) => parse_dec(&format!("values[{i}]"), s)?,
            Value::Number(n) => parse_dec(&format!("values[{i}]"), &n.to_string())?,
            _ => return Err(usage(format!("values[{i}] is not a decimal string"))),
        };
        values.push(v);
    }
    Ok(StreamInput { values, flags })
}

fn error_stage(err: &AttackError) -> &'static str {
    match err {
        AttackError::WrongLength { .. }
        | AttackError::NegativeInput
        | AttackError::DistinctnessViolation => "build_system",
        AttackError::MixedBranch => "window_refinement",
        AttackError::InconsistentInput { stage } => match stage {
            Stage::InputValidation => "input_validation",
            Stage::ModulusNormalization => "modulus_normalization",
            Stage::DependencyReduction => "dependency_reduction",
            Stage::LambdaSolve => "lambda_solve",
            Stage::QuadraticCheck => "quadratic_check",
            Stage::RationalSolve => "rational_solve",
            Stage::Plausibility => "plausibility",
            Stage::WindowRefinement => "window_refinement",
        },
    }
}

fn typed_rejection(err: &AttackError) -> Failure {
    let payload = json!({
        "branch": "error",
        "error": err.to_string(),
        "stage": error_stage(err),
    });
    Failure::Payload(payload, err.to_string())
}

fn cmd_attack(args: AttackArgs) -> Result<(), Failure> {
    let text = read_source(&args.input)?;
    let stream = parse_stream(&text)?;
    let values = &stream.values;
    if values.len() < attack::WINDOW {
        return Err(usage(format!(
            "attack needs at least {} values, got {}",
            attack::WINDOW,
            values.len()
        )));
    }

    let window_count = match args.windows {
        WindowChoice::First => 1,
        WindowChoice::All => values.len() - attack::WINDOW + 1,
    };
    let mut inputs = Vec::new();
    let mut first_window_error: Option<AttackError> = None;
    for start in 0..window_count {
        match AttackInput::new(values[start..start + attack::WINDOW].to_vec()) {
            Ok(input) => inputs.push(input),
            Err(e) => {
                eprintln!("window {}: skipped ({e})", start + 1);
                first_window_error.get_or_insert(e);
            }
        }
    }
    if inputs.is_empty() {
        let err = first_window_error.expect("at least one window was examined");
        return Err(typed_rejection(&err));
    }

    let mut models = Vec::new();
    let mut first_attack_error: Option<AttackError> = None;
    for (i, input) in inputs.iter().enumerate() {
        match attack::attack(input) {
            Ok(model) => models.push(model),
            Err(e) => {
                eprintln!("window {}: rejected ({e})", i + 1);
                first_attack_error.get_or_insert(e);
            }
        }
    }
    if models.is_empty() {
        let err = first_attack_error.expect("at least one window was attacked");
        return Err(typed_rejection(&err));
    }
    let windows_used = models.len();
    let model = attack::refine_windows(&models).map_err(|e| typed_rejection(&e))?;

    let check = replay_check(&model, values);
    let points = recovered_points_json(&model, values);
    let branch = match &model {
        RecoveredModel::Modular { .. } => "modular",
        RecoveredModel::Rational { .. } => "rational",
    };
    let mut payload = json!({
        "branch": branch,
        "model": model,
        "windows_used": windows_used,
        "self_check": check,
    });
    if let RecoveredModel::Modular { m, .. } = &model {
        payload["m"] = Value::String(m.to_string());
    }
    if let Some(points) = points {
        payload["recovered_points"] = points;
    }
    emit(&payload);
    Ok(())
}

/// Re-predicts the input stream from its first two values under the
/// recovered model.  Modular comparisons reduce the expected value first;
/// rational replay is capped because the terms grow triply exponentially.
fn replay_check(model: &RecoveredModel, values: &[BigInt]) -> Value {
    let params = model.params();
    let targets = values.len() - 2;
    let cap = match model {
        RecoveredModel::Modular { .. } => targets,
        RecoveredModel::Rational { .. } => targets.min(RATIONAL_REPLAY_CAP),
    };
    let run = params.predict_run_ints(&values[0], &values[1], cap);
    let mut predicted = Vec::new();
    let mut matched = Vec::new();
    let mut all = true;
    for (i, coord) in run.values.iter().enumerate() {
        let expected = params.ring.from_bigint(&values[i + 2]);
        let ok = *coord == expected;
        all &= ok;
        predicted.push(Value::String(coord_to_string(coord)));
        matched.push(Value::Bool(ok));
    }
    let stop = run.stop.as_ref().map(|s| {
        json!({
            "index": s.step + 3,
            "g": s.failure.g.to_string(),
        })
    });
    all &= run.stop.is_none() && run.values.len() == targets;
    json!({
        "predicted": predicted,
        "matched": matched,
        "truncated": cap < targets,
        "stop": stop,
        "all_match": all,
    })
}

fn point_json(point: &Point) -> Value {
    match point {
        Point::Infinity => Value::String("infinity".into()),
        Point::Affine { x, y } => json!({
            "x": coord_to_string(x),
            "y": coord_to_string(y),
        }),
    }
}

/// When the recovered modulus is prime, lifts the secret points as well.
fn recovered_points_json(model: &RecoveredModel, values: &[BigInt]) -> Option<Value> {
    let m = model.modulus()?;
    let mut rng = ChaCha20Rng::seed_from_u64(0x9E37_79B9_7F4A_7C15);
    if !nt::is_probable_prime(m, nt::DEFAULT_MR_ROUNDS, &mut rng) {
        eprintln!("modulus is composite; skipping point recovery");
        return None;
    }
    match attack::recover_points(model, &values[0], &values[1], &mut rng) {
        Ok(pts) => Some(json!({
            "g": point_json(&pts.g),
            "w1": point_json(&pts.w1),
            "w0": point_json(&pts.w0),
        })),
        Err(e) => {
            eprintln!("point recovery failed: {e}");
            None
        }
    }
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), Failure> {
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be positive"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("thread pool already initialized: {e}");
        }
    }
    let config = TrialConfig {
        prime_bits: args.bits,
        revealed: args.revealed,
        trials: args.trials,
        master_seed: args.seed,
        mr_rounds: args.mr_rounds,
    };
    let run = run_experiment(&config).map_err(|e| usage(e.to_string()))?;
    let report = serde_json::to_value(&run.report).expect("report serializes");
    if let Some(csv_path) = &args.csv {
        std::fs::write(csv_path, outcomes_csv(&run.outcomes))
            .map_err(|e| usage(format!("writing {}: {e}", csv_path.display())))?;
    }
    match &args.out {
        Some(out_path) => {
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            std::fs::write(out_path, text + "\n")
                .map_err(|e| usage(format!("writing {}: {e}", out_path.display())))?;
            eprintln!(
                "{} trials done, exact rate {:.3}",
                run.report.counts.total(),
                run.report.exact_rate
            );
        }
        None => emit(&report),
    }
    Ok(())
}

fn parse_model(text: &str) -> Result<RecoveredModel, Failure> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| usage(format!("model is not JSON: {e}")))?;
    let node = match &root {
        Value::Object(map) if map.contains_key("model") => &map["model"],
        other => other,
    };
    let model: RecoveredModel = serde_json::from_value(node.clone())
        .map_err(|e| usage(format!("not a recovered model: {e}")))?;
    if !model.validate() {
        return Err(usage("model is internally inconsistent"));
    }
    Ok(model)
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let model = parse_model(&read_source(&args.model)?)?;
    let stream = parse_stream(&read_source(&args.stream)?)?;
    let values = &stream.values;
    if values.len() < 3 {
        return Err(usage(format!(
            "verification needs at least 3 values, got {}",
            values.len()
        )));
    }

    let params = model.params();
    let targets = values.len() - 2;
    let cap = match &model {
        RecoveredModel::Modular { .. } => targets,
        RecoveredModel::Rational { .. } => targets.min(RATIONAL_REPLAY_CAP),
    };
    if cap < targets {
        eprintln!("rational replay capped at {cap} of {targets} indices");
    }
    let run = params.predict_run_ints(&values[0], &values[1], cap);

    let mut rows = Vec::new();
    let mut matches = 0usize;
    let mut mismatches = 0usize;
    let mut failed = false;
    let row = |index: usize, result: &str, extra: Value| {
        let mut v = json!({"index": index, "result": result});
        if let Value::Object(extra) = extra {
            v.as_object_mut().expect("object").extend(extra);
        }
        v
    };
    for i in 0..targets {
        let index = i + 3;
        if let Some(coord) = run.values.get(i) {
            let expected = params.ring.from_bigint(&values[i + 2]);
            let ok = *coord == expected;
            if ok {
                matches += 1;
            } else {
                mismatches += 1;
            }
            rows.push(row(
                index,
                if ok { "match" } else { "mismatch" },
                json!({
                    "expected": values[i + 2].to_string(),
                    "predicted": coord_to_string(coord),
                }),
            ));
        } else if let Some(stop) = run.stop.as_ref().filter(|s| s.step == i) {
            failed = true;
            rows.push(row(
                index,
                "denominator_failure",
                json!({"g": stop.failure.g.to_string()}),
            ));
        } else {
            rows.push(row(index, "not_evaluated", json!({})));
        }
    }
    if let Some(last) = stream.flags.get(values.len()) {
        if last.hit_infinity {
            rows.push(row(values.len() + 1, "skipped_infinity", json!({})));
        }
    }

    let payload = json!({
        "checked": targets,
        "matches": matches,
        "mismatches": mismatches,
        "indices": rows,
        "all_match": mismatches == 0 && !failed && matches == targets,
    });
    emit(&payload);
    Ok(())
}
