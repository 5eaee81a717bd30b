//! Command-line front end: scenario configs in, deterministic CSV/JSON
//! artifacts out.
//!
//! Exit codes: 0 on success, 1 when the scenario ran but failed (dead
//! signal, degenerate geometry, no run grabbed), 2 for unusable
//! invocations and input documents. All writes land inside `--out`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fieldgrasp::fieldsim::{sample_sensor, SensorPose};
use fieldgrasp::geom::{Line3, RigidTransform, Vec3};
use fieldgrasp::harness::{
    compute_report, replay_log, report_from_summaries, run_closed_loop, scene_for_run,
    HarnessError, RunOutcome, RunSummary, ScenarioConfig, TrajectoryLog, WindowFailure,
};
use fieldgrasp::localize::{estimate_current_rms, localize_conductor, ConductorEstimate};
use fieldgrasp::sigproc::{extract_field_vector, DEFAULT_AMPLITUDE_FLOOR};

#[derive(Parser)]
#[command(
    name = "fieldgrasp",
    version,
    about = "Locate an AC conductor from two magnetometers and rehearse grabbing it"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario config (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory all output files are written to (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Overrides the config's master seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Suppresses warnings and progress output.
    #[arg(long, global = true, conflicts_with = "verbose")]
    quiet: bool,

    /// Reports every file written.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Samples one analysis window per magnetometer at the first start pose
    /// and records the scene's ground truth for later scoring.
    Simulate,
    /// One-shot extraction and triangulation from a freshly sampled window
    /// pair at the first start pose.
    Localize,
    /// Runs the closed-loop grabbing procedure from every start pose and
    /// aggregates the results.
    Grab,
    /// Re-runs extraction and triangulation over two recorded sensor
    /// streams (`t,bx,by,bz` CSV).
    Replay {
        /// First magnetometer's recording.
        m1_csv: PathBuf,
        /// Second magnetometer's recording.
        m2_csv: PathBuf,
    },
    /// Aggregates `run_*.summary.json` files from a directory into a
    /// report.
    Report {
        /// Directory holding run summaries (e.g. a previous `grab` output).
        runs_dir: PathBuf,
    },
}

enum CliError {
    /// Unusable invocation or input document.
    Usage(String),
    /// The scenario ran and failed.
    Runtime(String),
}

/// Errors from input documents keep the usage exit code; everything that
/// happens while the scenario runs is a runtime failure.
fn classify(e: HarnessError) -> CliError {
    match e {
        HarnessError::Schema(_)
        | HarnessError::InvalidConfig(_)
        | HarnessError::StartIndexOutOfRange { .. }
        | HarnessError::LengthMismatch { .. } => CliError::Usage(e.to_string()),
        _ => CliError::Runtime(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let out = cli
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("--out <DIR> is required".into()))?;
    match &cli.command {
        Command::Simulate => cmd_simulate(&load_config(cli)?, &out, cli),
        Command::Localize => cmd_localize(&load_config(cli)?, &out, cli),
        Command::Grab => cmd_grab(&load_config(cli)?, &out, cli),
        Command::Replay { m1_csv, m2_csv } => {
            cmd_replay(&load_config(cli)?, m1_csv, m2_csv, &out, cli)
        }
        Command::Report { runs_dir } => cmd_report(runs_dir, &out, cli),
    }
}

/// Loads, validates and (optionally) re-seeds the scenario config. Nothing
/// is written before this succeeds, so a bad config leaves no artifacts.
fn load_config(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config <PATH> is required".into()))?;
    let raw = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg = ScenarioConfig::from_json_str(&raw).map_err(classify)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if !cli.quiet {
        for w in cfg.validate().map_err(classify)? {
            eprintln!("warning: {w}");
        }
    }
    Ok(cfg)
}

fn ensure_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))
}

fn write_artifact(out: &Path, name: &str, bytes: &[u8], cli: &Cli) -> Result<(), CliError> {
    let path = out.join(name);
    fs::write(&path, bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    if cli.verbose {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

/// World poses of the two magnetometers with the tool at a given start
/// pose: base ∘ start ∘ mount.
fn sensor_world_poses(
    cfg: &ScenarioConfig,
    start_index: usize,
) -> Result<(RigidTransform, RigidTransform), CliError> {
    let tool = cfg
        .base_transform()
        .and_then(|b| Ok(b.compose(&cfg.start_transform(start_index)?)))
        .map_err(classify)?;
    let m1 = tool.compose(&cfg.mount_m1_transform().map_err(classify)?);
    let m2 = tool.compose(&cfg.mount_m2_transform().map_err(classify)?);
    Ok((m1, m2))
}

fn line_json(line: &Line3) -> serde_json::Value {
    serde_json::json!({
        "point_m": [line.point().x, line.point().y, line.point().z],
        "direction": [
            line.direction().x(),
            line.direction().y(),
            line.direction().z()
        ],
    })
}

fn to_pretty(value: &serde_json::Value) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("cannot encode JSON: {e}")))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn cmd_simulate(cfg: &ScenarioConfig, out: &Path, cli: &Cli) -> Result<(), CliError> {
    let scene = scene_for_run(cfg, 0).map_err(classify)?;
    let (m1, m2) = sensor_world_poses(cfg, 0)?;
    let window = |pose: RigidTransform| {
        sample_sensor(
            &scene,
            &SensorPose::new(pose),
            cfg.sample_rate_hz,
            cfg.window_len,
            0.0,
        )
        .map_err(|e| CliError::Runtime(e.to_string()))
    };
    let w1 = window(m1)?;
    let w2 = window(m2)?;

    ensure_out(out)?;
    let mut buf = Vec::new();
    w1.to_csv(&mut buf)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    write_artifact(out, "sensor_m1.csv", &buf, cli)?;
    buf.clear();
    w2.to_csv(&mut buf)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    write_artifact(out, "sensor_m2.csv", &buf, cli)?;

    let base = cfg.base_transform().map_err(classify)?;
    let conductor = scene.conductors.first();
    let truth = serde_json::json!({
        "seed": cfg.seed,
        "sample_rate_hz": cfg.sample_rate_hz,
        "window_len": cfg.window_len,
        "target_frequency_hz": cfg.target_frequency_hz,
        "sensor_m1_world_m": [m1.translation.x, m1.translation.y, m1.translation.z],
        "sensor_m2_world_m": [m2.translation.x, m2.translation.y, m2.translation.z],
        "conductor_world": conductor.map(|c| line_json(&c.line)),
        "conductor_base": conductor.map(|c| line_json(&c.line.transformed(&base.inverse()))),
        "grab_point_base_m": conductor.map(|c| {
            let p = c.line.transformed(&base.inverse()).closest_point_to(Vec3::zero());
            serde_json::json!([p.x, p.y, p.z])
        }),
        "current_rms_a": conductor.map(|c| c.current_rms),
        "frequency_hz": conductor.map(|c| c.frequency),
    });
    write_artifact(out, "ground_truth.json", &to_pretty(&truth)?, cli)?;

    if !cli.quiet {
        eprintln!(
            "simulated {} samples per sensor at {} Hz",
            cfg.window_len, cfg.sample_rate_hz
        );
    }
    Ok(())
}

fn cmd_localize(cfg: &ScenarioConfig, out: &Path, cli: &Cli) -> Result<(), CliError> {
    let scene = scene_for_run(cfg, 0).map_err(classify)?;
    let (m1, m2) = sensor_world_poses(cfg, 0)?;
    let sample = |pose: RigidTransform| {
        sample_sensor(
            &scene,
            &SensorPose::new(pose),
            cfg.sample_rate_hz,
            cfg.window_len,
            0.0,
        )
        .map_err(|e| CliError::Runtime(e.to_string()))
    };
    let w1 = sample(m1)?;
    let w2 = sample(m2)?;
    let b1 = extract_field_vector(&w1, cfg.target_frequency_hz, DEFAULT_AMPLITUDE_FLOOR)
        .map_err(|e| CliError::Runtime(format!("sensor m1: {e}")))?;
    let b2 = extract_field_vector(&w2, cfg.target_frequency_hz, DEFAULT_AMPLITUDE_FLOOR)
        .map_err(|e| CliError::Runtime(format!("sensor m2: {e}")))?;

    let rig = cfg.rig().map_err(classify)?;
    let est: ConductorEstimate = localize_conductor(&b1, &b2, &rig, cfg.params.alpha_min_rad)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    // The estimate lives in the m1 frame; the planner consumes it in the
    // base frame.
    let m1_in_base = cfg
        .start_transform(0)
        .and_then(|s| Ok(s.compose(&cfg.mount_m1_transform()?)))
        .map_err(classify)?;
    let line_base = est.line.transformed(&m1_in_base);

    let result = serde_json::json!({
        "field_m1_t": [b1.vector.x, b1.vector.y, b1.vector.z],
        "field_m2_t": [b2.vector.x, b2.vector.y, b2.vector.z],
        "angle_between_fields_rad": est.angle_between_fields,
        "magnitude_consistency": est.magnitude_consistency,
        "line_m1": line_json(&est.line),
        "line_base": line_json(&line_base),
        "current_rms_a_from_m1": estimate_current_rms(&est.line, &b1, Vec3::zero()),
        "current_rms_a_from_m2": estimate_current_rms(&est.line, &b2, rig.translation()),
    });
    ensure_out(out)?;
    write_artifact(out, "localize.json", &to_pretty(&result)?, cli)?;

    if !cli.quiet {
        eprintln!(
            "localized: field angle {:.4} rad, consistency {:.6}",
            est.angle_between_fields, est.magnitude_consistency
        );
    }
    Ok(())
}

fn cmd_grab(cfg: &ScenarioConfig, out: &Path, cli: &Cli) -> Result<(), CliError> {
    ensure_out(out)?;
    let mut logs: Vec<TrajectoryLog> = Vec::new();
    for index in 0..cfg.start_poses.len() {
        let log = run_closed_loop(cfg, index).map_err(classify)?;

        let mut buf = Vec::new();
        log.to_csv(&mut buf).map_err(classify)?;
        write_artifact(out, &format!("run_{index:02}.cycles.csv"), &buf, cli)?;
        let summary = log.summary();
        write_artifact(
            out,
            &format!("run_{index:02}.summary.json"),
            summary.to_json_string().map_err(classify)?.as_bytes(),
            cli,
        )?;

        if !cli.quiet {
            let error = summary
                .grab_error_m
                .map(|e| format!(", error {e:.3e} m"))
                .unwrap_or_default();
            eprintln!(
                "run {index:02}: {}, {} cycles, {} stopping points{error}",
                outcome_label(&summary.outcome),
                summary.cycles,
                summary.stopping_points
            );
        }
        logs.push(log);
    }

    let report = compute_report(&logs);
    write_artifact(
        out,
        "report.json",
        report.to_json_string().map_err(classify)?.as_bytes(),
        cli,
    )?;
    write_artifact(out, "report.txt", report.render_text().as_bytes(), cli)?;
    if !cli.quiet {
        print!("{}", report.render_text());
    }

    if logs.iter().all(|l| l.outcome != RunOutcome::Grabbed) {
        return Err(CliError::Runtime("no run grabbed the conductor".into()));
    }
    Ok(())
}

fn outcome_label(outcome: &RunOutcome) -> &str {
    match outcome {
        RunOutcome::Grabbed => "grabbed",
        RunOutcome::IterationLimit => "iteration limit",
        RunOutcome::Failed { .. } => "failed",
    }
}

fn cmd_replay(
    cfg: &ScenarioConfig,
    m1_csv: &Path,
    m2_csv: &Path,
    out: &Path,
    cli: &Cli,
) -> Result<(), CliError> {
    let open = |p: &Path| {
        fs::File::open(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))
    };
    let windows = replay_log(open(m1_csv)?, open(m2_csv)?, cfg).map_err(classify)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "window",
        "t0_s",
        "status",
        "point_x_m",
        "point_y_m",
        "point_z_m",
        "dir_x",
        "dir_y",
        "dir_z",
        "angle_rad",
        "consistency",
    ])
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut ok = 0usize;
    for win in &windows {
        let mut row = vec![win.index.to_string(), format!("{}", win.t0_s)];
        match &win.result {
            Ok(est) => {
                ok += 1;
                row.push("ok".into());
                let p = est.line.point();
                let d = est.line.direction();
                for v in [p.x, p.y, p.z, d.x(), d.y(), d.z()] {
                    row.push(format!("{v}"));
                }
                row.push(format!("{}", est.angle_between_fields));
                row.push(format!("{}", est.magnitude_consistency));
            }
            Err(WindowFailure::BelowFloor) => {
                row.push("below_floor".into());
                row.extend(std::iter::repeat_n(String::new(), 8));
            }
            Err(WindowFailure::Degenerate { angle_rad }) => {
                row.push("degenerate".into());
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(format!("{angle_rad}"));
                row.push(String::new());
            }
        }
        w.write_record(&row)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    ensure_out(out)?;
    write_artifact(out, "estimates.csv", &bytes, cli)?;

    if !cli.quiet {
        eprintln!("replayed {} windows: {} localized", windows.len(), ok);
    }
    Ok(())
}

fn cmd_report(runs_dir: &Path, out: &Path, cli: &Cli) -> Result<(), CliError> {
    let entries = fs::read_dir(runs_dir)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", runs_dir.display())))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.starts_with("run_") && n.ends_with(".summary.json"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::Runtime(format!(
            "no run_*.summary.json files in {}",
            runs_dir.display()
        )));
    }

    let mut summaries: Vec<RunSummary> = Vec::with_capacity(names.len());
    for name in &names {
        let path = runs_dir.join(name);
        let raw = fs::read_to_string(&path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        summaries.push(
            RunSummary::from_json_str(&raw)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        );
    }

    let report = report_from_summaries(summaries);
    ensure_out(out)?;
    write_artifact(
        out,
        "report.json",
        report.to_json_string().map_err(classify)?.as_bytes(),
        cli,
    )?;
    write_artifact(out, "report.txt", report.render_text().as_bytes(), cli)?;
    if !cli.quiet {
        print!("{}", report.render_text());
    }
    Ok(())
}
