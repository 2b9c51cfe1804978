//! Command-line frontend: simulate recording sessions, estimate clock
//! offsets, compute trigger phases, evaluate sync precision and drift,
//! remap bundles into the MCU domain and run the whole pipeline.
//!
//! Every subcommand prints JSON on standard output. Exit codes: 0 on
//! success, 2 on argument or configuration errors, 3 on data errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rigsync_core::bundle::{
    read_bundle, read_imu_csv, remap_timestamps, write_bundle, write_remapped, ProfileFormat,
};
use rigsync_core::eval::{drift_fit, precision_stats, row_time_scale, track_strobe_row, EvalConfig};
use rigsync_core::pipeline::{drift_pairs, run_pipeline, trial_peaks, PipelineConfig};
use rigsync_core::sim::{simulate_session, SessionConfig};
use rigsync_core::{compute_phase_shift, estimate_offset, quantize_phase, Error, TimeInstant};

#[derive(Parser)]
#[command(name = "rigsync", version, about = "Smartphone + depth-camera rig synchronization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a recording session and write it as a bundle directory.
    Simulate(SimulateArgs),
    /// Time- and frame-sync calculations.
    #[command(subcommand)]
    Sync(SyncCommand),
    /// Evaluate sync precision or drift from recorded bundles.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Remap a bundle's streams into the common MCU domain (extraction).
    Extract(ExtractArgs),
    /// Run the full pipeline and emit a sync report.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Session configuration JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Recording length override, seconds.
    #[arg(long)]
    duration_s: Option<f64>,
    /// Extra depth phase injection override, nanoseconds.
    #[arg(long)]
    extra_phase_ns: Option<i64>,
    /// Output bundle directory.
    #[arg(long, required_unless_present = "emit_default_config")]
    out: Option<PathBuf>,
    /// Row-profile storage format.
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: ProfileFormat,
    /// Print the default session configuration and exit.
    #[arg(long)]
    emit_default_config: bool,
}

#[derive(Subcommand)]
enum SyncCommand {
    /// Gyro-correlation clock offset between two IMU CSV files.
    Offset(OffsetArgs),
    /// Trigger phase from two exposure midpoints and the framing period.
    Phase(PhaseArgs),
}

#[derive(Args)]
struct OffsetArgs {
    /// Reference-device IMU CSV (the MCU side).
    #[arg(long)]
    imu_a: PathBuf,
    /// Other device's IMU CSV (the smartphone side).
    #[arg(long)]
    imu_b: PathBuf,
    /// Correlation grid rate, Hz.
    #[arg(long, default_value_t = 500.0)]
    rate: f64,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long)]
    t_s0_ns: i64,
    #[arg(long)]
    t_d0_ns: i64,
    #[arg(long)]
    period_ns: i64,
    #[arg(long, default_value_t = 390)]
    step_ns: i64,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Inter-launch precision from one bundle per launch.
    Precision(PrecisionArgs),
    /// Alignment drift over one bundle.
    Drift(DriftArgs),
}

#[derive(Args)]
struct PrecisionArgs {
    /// Bundle directories, one per launch.
    #[arg(required = true)]
    bundles: Vec<PathBuf>,
    /// Frames used per launch.
    #[arg(long, default_value_t = 16)]
    frames: usize,
    /// 1-based tracked strobe band.
    #[arg(long, default_value_t = 4)]
    strobe: usize,
}

#[derive(Args)]
struct DriftArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Use every n-th stored profile.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// 1-based tracked strobe band.
    #[arg(long, default_value_t = 4)]
    strobe: usize,
    /// Also write the (frame_timestamp_ns, row_position) points as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Smartphone-to-MCU offset; estimated from the bundle's IMU records
    /// when omitted.
    #[arg(long)]
    offset_ns: Option<f64>,
    /// Correlation grid rate for the estimate, Hz.
    #[arg(long, default_value_t = 500.0)]
    rate: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// Pipeline configuration JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Launch count override.
    #[arg(long)]
    launches: Option<u32>,
    /// Write the report and drift points into this directory as well.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the default pipeline configuration and exit.
    #[arg(long)]
    emit_default_config: bool,
}

fn parse_format(s: &str) -> std::result::Result<ProfileFormat, String> {
    match s {
        "csv" => Ok(ProfileFormat::Csv),
        "packed" => Ok(ProfileFormat::Packed),
        other => Err(format!("unknown format '{other}', expected csv or packed")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<Error>()
                .map(|e| if e.is_usage() { 2 } else { 3 })
                .unwrap_or(3);
            ExitCode::from(code)
        }
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value)?;
    writeln!(stdout)?;
    Ok(())
}

fn load_json_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())).into())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Sync(SyncCommand::Offset(args)) => sync_offset(args),
        Command::Sync(SyncCommand::Phase(args)) => sync_phase(args),
        Command::Eval(EvalCommand::Precision(args)) => eval_precision(args),
        Command::Eval(EvalCommand::Drift(args)) => eval_drift(args),
        Command::Extract(args) => extract(args),
        Command::Report(args) => report(args),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg: SessionConfig = match &args.config {
        Some(path) => load_json_config(path)?,
        None => SessionConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(duration) = args.duration_s {
        cfg.duration_s = duration;
    }
    if let Some(extra) = args.extra_phase_ns {
        cfg.extra_phase_ns = extra;
    }
    if args.emit_default_config {
        return print_json(&serde_json::to_value(&cfg)?);
    }
    let out = args.out.expect("clap enforces --out");
    let bundle = simulate_session::<f64>(&cfg)?;
    write_bundle(&bundle, &out, args.format)?;
    print_json(&json!({
        "out": out,
        "frames_rendered": bundle.profiles.len(),
        "triggers": bundle.triggers.len(),
        "t_s0_s_ns": bundle.info.t_s0_s_ns,
        "t_d0_m_ns": bundle.info.t_d0_m_ns,
        "offset_used_ns": bundle.info.offset_used_ns,
        "phase": bundle.info.phase,
    }))
}

fn sync_offset(args: OffsetArgs) -> Result<()> {
    let a = read_imu_csv::<f64>(&args.imu_a)?;
    let b = read_imu_csv::<f64>(&args.imu_b)?;
    let estimate = estimate_offset(&a, &b, args.rate)?;
    print_json(&serde_json::to_value(estimate)?)
}

fn sync_phase(args: PhaseArgs) -> Result<()> {
    let phase = compute_phase_shift(
        TimeInstant::from_nanos(args.t_s0_ns),
        TimeInstant::from_nanos(args.t_d0_ns),
        args.period_ns,
    )?;
    let correction = quantize_phase(phase, args.step_ns)?;
    print_json(&serde_json::to_value(correction)?)
}

fn eval_precision(args: PrecisionArgs) -> Result<()> {
    let eval = EvalConfig { strobe_index: args.strobe, ..EvalConfig::default() };
    let mut peak_sets = Vec::with_capacity(args.bundles.len());
    let mut scale = None;
    let mut interval_ns = None;
    for dir in &args.bundles {
        let bundle = read_bundle::<f64>(dir)?;
        let take = args.frames.min(bundle.profiles.len()).max(1);
        let peaks = trial_peaks(&bundle.profiles[..take], &eval)?;
        if scale.is_none() && peaks.len() >= 2 {
            let interval = bundle.info.config.depth.strobe.interval_ns;
            scale = Some(row_time_scale(&peaks, interval)?);
            interval_ns = Some(interval);
        }
        peak_sets.push(peaks);
    }
    let scale = scale.ok_or(Error::InsufficientPeaks { found: 1, needed: 2 })?;
    let rows: Vec<f64> = track_strobe_row(&peak_sets, args.strobe)
        .into_iter()
        .flatten()
        .collect();
    let report = precision_stats(&rows, scale)?;
    print_json(&json!({
        "launches": args.bundles.len(),
        "valid_trials": rows.len(),
        "strobe_interval_ns": interval_ns,
        "report": report,
    }))
}

fn eval_drift(args: DriftArgs) -> Result<()> {
    let eval = EvalConfig { strobe_index: args.strobe, ..EvalConfig::default() };
    let mut bundle = read_bundle::<f64>(&args.bundle)?;
    if args.stride > 1 {
        bundle.profiles = bundle
            .profiles
            .into_iter()
            .step_by(args.stride)
            .collect();
    }
    let pairs = drift_pairs(&bundle, &eval)?;
    if bundle.profiles.is_empty() {
        return Err(Error::InsufficientData("bundle contains no profiles".into()).into());
    }
    let peaks = trial_peaks(&bundle.profiles[..1], &eval)?;
    let scale = row_time_scale(&peaks, bundle.info.config.depth.strobe.interval_ns)?;
    let report = drift_fit(&pairs, scale)?;
    if let Some(csv) = &args.csv {
        write_drift_csv(csv, &pairs)?;
    }
    print_json(&json!({
        "pairs": pairs.len(),
        "row_time_scale_ns": scale,
        "report": report,
        "csv": args.csv,
    }))
}

fn write_drift_csv(path: &Path, pairs: &[(i64, f64)]) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "frame_timestamp_ns,row_position")?;
    for (t, row) in pairs {
        writeln!(w, "{t},{row:e}")?;
    }
    w.flush()?;
    Ok(())
}

fn extract(args: ExtractArgs) -> Result<()> {
    let bundle = read_bundle::<f64>(&args.bundle)?;
    let (offset_ns, source) = match args.offset_ns {
        Some(offset) => (offset, "manual"),
        None => {
            let est = estimate_offset(&bundle.mcu_imu, &bundle.phone_imu, args.rate)?;
            (est.offset_ns, "estimated")
        }
    };
    let remapped = remap_timestamps(&bundle, offset_ns)?;
    let files = write_remapped(&args.bundle, &remapped)?;
    print_json(&json!({
        "offset_ns": offset_ns,
        "offset_source": source,
        "remapped_depth_frames": remapped.depth_frames.len(),
        "files": files,
    }))
}

fn report(args: ReportArgs) -> Result<()> {
    let mut cfg: PipelineConfig = match &args.config {
        Some(path) => load_json_config(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(launches) = args.launches {
        cfg.launches = launches;
    }
    if args.emit_default_config {
        return print_json(&serde_json::to_value(&cfg)?);
    }
    let report = run_pipeline::<f64>(&cfg)?;
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("report.json"), serde_json::to_vec_pretty(&report)?)?;
    }
    print_json(&serde_json::to_value(&report)?)
}
