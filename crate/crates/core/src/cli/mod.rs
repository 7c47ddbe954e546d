//! `dale-forge` command line: `simulate`, `meter` and `validate`.

mod pipeline;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::datasets::{
    house_dir, read_calibration, read_house, write_house, MainsSeries, CALIBRATION_FILE, LABELS_FILE,
    MAINS_FILE, METADATA_FILE,
};
use crate::error::{Error, Result};
use crate::household::{load_house_config, presets, House};
use crate::rfnet::write_event_log;
use crate::stats::{report, ReportOptions, LARGE_GAP_THRESHOLD};

pub use pipeline::{
    analytic_mains, calibration_for, meter_records, read_waveform_dir, synthesize, SimulationPlan, Synthesis,
    CLAMP_DEVICE, PLUG_DEVICE, SITE_DEVICE,
};

pub const LOG_ENV: &str = "DALE_FORGE_LOG";

#[derive(Debug, Parser)]
#[command(name = "dale-forge", version, about = "Synthesise, meter and validate household electricity datasets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a house and write its dataset directory.
    Simulate(SimulateArgs),
    /// Turn stored waveform chunks into a 1 Hz mains.dat.
    Meter(MeterArgs),
    /// Summarise a dataset and write report files.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// House description file; overrides --house-preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "small")]
    pub house_preset: String,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset root; the house is written to <out>/house_<n>.
    #[arg(long, default_value = "dataset")]
    pub out: PathBuf,
    /// Simulated span, e.g. 3600, 90m, 24h, 7d.
    #[arg(long, default_value = "1d", value_parser = parse_duration)]
    pub duration: f64,
    #[arg(long, default_value_t = 1)]
    pub house: u32,
    /// Start time in whole seconds since the Unix epoch.
    #[arg(long, default_value_t = 1_420_070_400)]
    pub start: i64,
    /// Seconds of raw waveform to store, beginning at the start time.
    #[arg(long, default_value_t = 0)]
    pub waveform_seconds: u32,
    #[arg(long, default_value_t = 16_000)]
    pub sample_rate: u32,
    #[arg(long)]
    pub bit_flip_probability: Option<f64>,
    /// Write every RF event as JSON lines.
    #[arg(long)]
    pub event_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MeterArgs {
    /// Directory holding vi-*.wav chunks.
    pub dir: PathBuf,
    /// Calibration file; defaults to the one in the chunk directory.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Output file; defaults to mains.dat in the chunk directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub chunk_period: f64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// A house directory or a dataset root holding house_<n> directories.
    pub root: PathBuf,
    /// Report directory; defaults to <root>/validation (or beside a single house).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = LARGE_GAP_THRESHOLD)]
    pub large_gap_threshold: f64,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Seconds from `3600`, `3600s`, `90m`, `24h` or `7d`.
pub fn parse_duration(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let (num, scale) = match s.char_indices().last() {
        Some((k, 's')) => (&s[..k], 1.0),
        Some((k, 'm')) => (&s[..k], 60.0),
        Some((k, 'h')) => (&s[..k], 3600.0),
        Some((k, 'd')) => (&s[..k], 86_400.0),
        _ => (s, 1.0),
    };
    let x: f64 = num.trim().parse().map_err(|_| format!("cannot read `{s}` as a duration"))?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(format!("duration must be positive, got `{s}`"));
    }
    Ok(x * scale)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => 1,
        Error::Io { .. } => 3,
        _ => 2,
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    let seed = seed.unwrap_or_else(rand::random);
    println!("seed: {seed}");
    seed
}

fn load_house(args: &SimulateArgs) -> Result<House> {
    match &args.config {
        Some(path) => load_house_config(path),
        None => presets::house(&args.house_preset).ok_or_else(|| {
            Error::invalid(format!(
                "unknown house preset `{}`; choose one of {}",
                args.house_preset,
                presets::HOUSE_PRESETS.join(", ")
            ))
        }),
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<PathBuf> {
    let seed = resolve_seed(args.seed);
    let mut plan = SimulationPlan::new(load_house(args)?, seed, args.duration);
    plan.instance = args.house;
    plan.start = args.start;
    plan.waveform_seconds = args.waveform_seconds;
    plan.sample_rate = args.sample_rate;
    plan.rf.record_log = args.event_log.is_some();
    if let Some(p) = args.bit_flip_probability {
        plan.rf.bit_flip_probability = p;
    }
    plan.rf.validate()?;
    let synthesis = synthesize(&plan)?;
    let dir = write_house(&synthesis.dataset, &args.out)?;
    if let Some(path) = &args.event_log {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        write_event_log(&synthesis.rf.log, &mut w).map_err(|e| Error::io(path, e))?;
    }
    let (iam, cctx) = (synthesis.rf.iam_totals(), synthesis.rf.cctx_totals());
    println!("wrote {}", dir.display());
    println!("iam_dropout={:.6} cctx_dropout={:.6}", iam.dropout(), cctx.dropout());
    Ok(dir)
}

pub fn cmd_meter(args: &MeterArgs) -> Result<PathBuf> {
    resolve_seed(args.seed);
    let calib_path = match &args.calibration {
        Some(p) => p.clone(),
        None => [CALIBRATION_FILE, "calibration.dat"]
            .iter()
            .map(|n| args.dir.join(n))
            .find(|p| p.exists())
            .ok_or_else(|| Error::invalid(format!("no calibration file in {}", args.dir.display())))?,
    };
    let text = fs::read_to_string(&calib_path).map_err(|e| Error::io(&calib_path, e))?;
    let calib = read_calibration(&text, &calib_path)?;
    let records = read_waveform_dir(&args.dir)?;
    if records.is_empty() {
        return Err(Error::InsufficientData(format!("no waveform chunks in {}", args.dir.display())));
    }
    let mains: MainsSeries = meter_records(&records, &calib, args.chunk_period)?;
    let out = args.out.clone().unwrap_or_else(|| args.dir.join(MAINS_FILE));
    fs::write(&out, mains.to_text()).map_err(|e| Error::io(&out, e))?;
    println!("wrote {} rows to {}", mains.rows.len(), out.display());
    Ok(out)
}

fn is_house_dir(dir: &Path) -> bool {
    dir.join(LABELS_FILE).exists() || dir.join(METADATA_FILE).exists()
}

/// House directories under `root`, or `root` itself.
pub fn house_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if is_house_dir(root) {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("house_"))
                && is_house_dir(p)
        })
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::InsufficientData(format!("no house directories under {}", root.display())));
    }
    Ok(dirs)
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<Vec<PathBuf>> {
    resolve_seed(args.seed);
    let opts = ReportOptions {
        large_gap_threshold: args.large_gap_threshold,
        ..ReportOptions::default()
    };
    let base = match &args.out {
        Some(p) => p.clone(),
        None if is_house_dir(&args.root) => args.root.parent().unwrap_or(Path::new(".")).join("validation"),
        None => args.root.join("validation"),
    };
    let mut written = Vec::new();
    for dir in house_dirs(&args.root)? {
        let ds = read_house(&dir)?;
        let r = report(&ds, &opts)?;
        print!("{}", r.to_key_value());
        let out = house_dir(&base, ds.house());
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        r.write(&out)?;
        written.push(out);
    }
    Ok(written)
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a).map(drop),
        Command::Meter(a) => cmd_meter(a).map(drop),
        Command::Validate(a) => cmd_validate(a).map(drop),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}


#[cfg(test)]
mod tests;
