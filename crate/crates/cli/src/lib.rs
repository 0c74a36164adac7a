//! `psa-lab`: runs the simulator campaigns from a JSON config and writes
//! plot-ready CSV, a JSON sidecar and optionally a binary table.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use psa_core::analyzer::{
    channel_intensities, extract_cos_phase, extract_gain, extract_signal_phase, localized_fraction,
    phase_histogram, spectrum_peaks, TransferPoint,
};
use psa_core::beatnote::{cell_off_record, synthesize_beatnote, BeatnoteRecord, DetectionConfig};
use psa_core::config::{parse_config, to_document, Emit, ParseOptions, RunConfig, Verbosity};
use psa_core::io::{
    read_record_binary, read_record_csv, read_table, write_histogram_csv, write_record_binary,
    write_record_csv, write_sweep_binary, write_sweep_csv,
};
use psa_core::squeezer::{evolve_two_mode, output_relative_phase, r_for_max_gain};
use psa_core::sweeps::{run, LOCALIZATION_TOLERANCE};
use psa_core::{
    AmplifierParams, Error, ErrorCategory, FieldAmplitude, Result, ScanKind, SweepResult,
};
use serde_json::json;
use sha2::{Digest, Sha256};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "PSA_LAB_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "psa-lab",
    version,
    about = "Phase-sensitive amplifier simulator: gain curves, spectra and phase-transfer curves",
    after_help = "Output files are named <kind>_<UTC timestamp>_<config hash>. The output \
                  directory is taken from --out, then the config's output_dir, then \
                  $PSA_LAB_OUT_DIR, then ./psa_out.\n\nExit codes: 0 success, 2 configuration \
                  error, 3 physics/domain error, 4 I/O error."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Master seed; overrides the config
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Output directory; overrides the config and $PSA_LAB_OUT_DIR
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Comma-separated output formats: csv, json, binary
    #[arg(long, global = true, value_name = "LIST")]
    pub emit: Option<String>,

    /// Treat unknown config keys as errors instead of warnings
    #[arg(long, global = true)]
    pub strict: bool,

    /// Suppress the summary line and warnings
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Signal gain versus input relative phase
    PhaseScan,
    /// Maximum and minimum gain versus pump power
    PowerSweep,
    /// Maximum PSA gain against the PIA gain versus pump power
    PiaCompare,
    /// Gain spectrum versus pump-signal detuning, with bandwidth
    Spectrum,
    /// Output phase and gain versus input phase
    Transfer,
    /// Histogram of output phases from a transfer-curve CSV
    Histogram(HistogramArgs),
    /// Synthesize a cell-on / cell-off beatnote record pair
    Synth(SynthArgs),
    /// Recover gain and output phase from a cell-on / cell-off record pair
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct HistogramArgs {
    /// Transfer-curve CSV
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Number of bins over [-π, π)
    #[arg(long, default_value_t = 64)]
    pub bins: usize,
    /// Column holding the output phase
    #[arg(long, default_value = "phi_out")]
    pub column: String,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Squeezing parameter
    #[arg(long, conflicts_with = "g_max")]
    pub r: Option<f64>,
    /// Maximum PSA gain; sets r
    #[arg(long)]
    pub g_max: Option<f64>,
    /// Pump phase, rad
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub pump_phase: f64,
    /// I_s,in / I_i,in
    #[arg(long, default_value_t = 1.0)]
    pub input_ratio: f64,
    /// Pump-signal detuning, kHz
    #[arg(long, default_value_t = 2.0)]
    pub detuning: f64,
    /// Sample rate, kHz
    #[arg(long, default_value_t = 100.0)]
    pub sample_rate: f64,
    /// Samples per record
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Additive Gaussian noise on the intensity
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Residual pump intensity reaching the photodiode
    #[arg(long, default_value_t = 1.0)]
    pub pump_intensity: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Cell-on record (.csv or .bin)
    #[arg(long, value_name = "PATH")]
    pub on: PathBuf,
    /// Cell-off record (.csv or .bin)
    #[arg(long, value_name = "PATH")]
    pub off: PathBuf,
    /// Residual pump intensity reaching the photodiode
    #[arg(long, default_value_t = 1.0)]
    pub pump_intensity: f64,
    /// I_s,in / I_i,in of the recorded inputs
    #[arg(long, default_value_t = 1.0)]
    pub input_ratio: f64,
    /// How to report the output phase
    #[arg(long, value_enum, default_value_t = PhaseView::Wrapped)]
    pub phase: PhaseView,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseView {
    Wrapped,
    Folded,
}

/// Process exit code of an error.
pub fn exit_code(err: &Error) -> u8 {
    match err.category() {
        ErrorCategory::Config => 2,
        ErrorCategory::Physics => 3,
        ErrorCategory::Io => 4,
    }
}

fn usage(key: &str, expected: &str, received: impl std::fmt::Display) -> Error {
    Error::Config {
        key: key.into(),
        expected: expected.into(),
        received: received.to_string(),
    }
}

/// What a run produced: the summary line and the files written.
#[derive(Debug, Clone)]
pub struct Report {
    pub summary: String,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
    pub verbosity: Verbosity,
}

impl Report {
    fn new(summary: String, files: Vec<PathBuf>) -> Self {
        Report {
            summary,
            warnings: Vec::new(),
            files,
            verbosity: Verbosity::Normal,
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Report> {
    let kind = match cli.command {
        Command::PhaseScan => ScanKind::PhaseScan,
        Command::PowerSweep => ScanKind::PowerSweep,
        Command::PiaCompare => ScanKind::PiaCompare,
        Command::Spectrum => ScanKind::DetuningSpectrum,
        Command::Transfer => ScanKind::TransferCurve,
        Command::Histogram(ref a) => return histogram(&cli.global, a),
        Command::Synth(ref a) => return synth(&cli.global, a),
        Command::Analyze(ref a) => return analyze(a),
    };
    let (cfg, warnings) = load_config(&cli.global, kind)?;
    let mut report = scan(&cfg)?;
    report.warnings = warnings;
    Ok(report)
}

fn default_out_dir() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// Reads the config (or an empty document) and applies the flag overrides.
pub fn load_config(global: &GlobalArgs, kind: ScanKind) -> Result<(RunConfig, Vec<String>)> {
    let text = match &global.config {
        Some(path) => fs::read_to_string(path).map_err(at(path))?,
        None => "{}".to_string(),
    };
    let opts = ParseOptions {
        strict: global.strict,
        kind: Some(kind),
        default_output_dir: default_out_dir(),
    };
    let parsed = parse_config(&text, &opts)?;
    let mut cfg = parsed.config;
    if let Some(seed) = global.seed {
        cfg.scan.seed = seed;
    }
    if let Some(out) = &global.out {
        cfg.output_dir = out.clone();
    }
    if let Some(list) = &global.emit {
        cfg.emit = Emit::parse_list(list)?;
    }
    if global.quiet {
        cfg.verbosity = Verbosity::Quiet;
    }
    Ok((cfg, parsed.warnings))
}

/// `<kind>_<UTC timestamp>_<first 8 hex digits of SHA-256 over the config echo>`
pub fn file_stem(kind: &str, echo: &[u8]) -> String {
    let digest = Sha256::digest(echo);
    let hash: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    format!("{kind}_{stamp}_{hash}")
}

/// Attaches the path to an I/O error.
fn at(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(at(path))?))
}

fn scan(cfg: &RunConfig) -> Result<Report> {
    let result = run(&cfg.scan)?;
    let echo = to_document(cfg);
    let stem = file_stem(cfg.scan.kind.name(), echo.to_string().as_bytes());
    fs::create_dir_all(&cfg.output_dir).map_err(at(&cfg.output_dir))?;

    let mut files = Vec::new();
    for emit in &cfg.emit {
        let path = cfg.output_dir.join(match emit {
            Emit::Csv => format!("{stem}.csv"),
            Emit::Json => format!("{stem}.json"),
            Emit::Binary => format!("{stem}.bin"),
        });
        let mut out = create(&path)?;
        match emit {
            Emit::Csv => write_sweep_csv(&result, &mut out)?,
            Emit::Binary => write_sweep_binary(&result, &mut out)?,
            Emit::Json => {
                let doc = json!({ "config": echo, "metadata": result.metadata });
                serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Error::Io(e.into()))?;
                writeln!(out)?;
            }
        }
        out.flush()?;
        files.push(path);
    }

    let summary = format!(
        "{}: {} -> {}",
        cfg.scan.kind.name(),
        describe(&result),
        files
            .first()
            .map(|p| p.display().to_string())
            .unwrap_or_default()
    );
    let mut report = Report::new(summary, files);
    report.verbosity = cfg.verbosity;
    Ok(report)
}

fn max_of(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, v)| {
            if v > best.1 {
                (k, v)
            } else {
                best
            }
        })
}

/// Key numbers of a sweep. For power and detuning sweeps the reported pair is
/// the one at the largest `g_max`.
pub fn describe(result: &SweepResult) -> String {
    let kind = result.metadata.spec.kind;
    let (g_max, g_min) = match kind {
        ScanKind::PhaseScan | ScanKind::TransferCurve => (
            result.summary("g_max").unwrap_or(f64::NAN),
            result.summary("g_min").unwrap_or(f64::NAN),
        ),
        ScanKind::PowerSweep | ScanKind::DetuningSpectrum | ScanKind::PiaCompare => {
            let (k, g) = max_of(result.column("g_max").unwrap_or(&[]));
            let g_min = result.column("g_min").map(|c| c[k]).unwrap_or(f64::NAN);
            (g, g_min)
        }
    };
    let mut parts = vec![format!("g_max={g_max:.6}")];
    if g_min.is_finite() {
        parts.push(format!("g_min={g_min:.6}"));
        parts.push(format!("product={:.6}", g_max * g_min));
    }
    for key in [
        "bandwidth_khz",
        "max_product_deviation",
        "max_pia_relation_deviation",
        "localized_fraction",
    ] {
        if let Some(v) = result.summary(key) {
            let label = key.strip_suffix("_khz").unwrap_or(key);
            let unit = if key.ends_with("_khz") { " kHz" } else { "" };
            parts.push(format!("{label}={v:.6}{unit}"));
        }
    }
    parts.join(", ")
}

fn out_dir(global: &GlobalArgs) -> PathBuf {
    global
        .out
        .clone()
        .or_else(default_out_dir)
        .unwrap_or_else(|| PathBuf::from(psa_core::config::DEFAULT_OUTPUT_DIR))
}

fn histogram(global: &GlobalArgs, args: &HistogramArgs) -> Result<Report> {
    let bytes = fs::read(&args.input).map_err(at(&args.input))?;
    let table = read_table(bytes.as_slice())?;
    let phi = table
        .column(&args.column)
        .ok_or_else(|| usage("--column", "a column of the input CSV", &args.column))?;
    let phi_in = table
        .headers
        .first()
        .and_then(|h| table.column(h))
        .unwrap_or_default();
    let gain = table.column("gain");
    let points: Vec<TransferPoint> = phi
        .iter()
        .enumerate()
        .map(|(k, &p)| TransferPoint {
            phi_in: phi_in[k],
            gain: gain.as_ref().map_or(f64::NAN, |g| g[k]),
            phi_out: p,
            cos_phi_out: p.cos(),
        })
        .collect();
    let hist = phase_histogram(&points, args.bins)?;

    let dir = out_dir(global);
    fs::create_dir_all(&dir).map_err(at(&dir))?;
    let mut seed_material = bytes.clone();
    seed_material.extend_from_slice(format!("{}:{}", args.column, args.bins).as_bytes());
    let path = dir.join(format!("{}.csv", file_stem("histogram", &seed_material)));
    let mut out = create(&path)?;
    write_histogram_csv(&hist, &mut out)?;
    out.flush()?;

    let summary = format!(
        "histogram: {} points in {} bins, localized fraction {:.4} -> {}",
        hist.total(),
        args.bins,
        localized_fraction(&points, LOCALIZATION_TOLERANCE),
        path.display()
    );
    Ok(Report::new(summary, vec![path]))
}

fn synth(global: &GlobalArgs, args: &SynthArgs) -> Result<Report> {
    let r = match (args.r, args.g_max) {
        (Some(r), None) => r,
        (None, Some(g)) => r_for_max_gain(g)?,
        (None, None) => 0.0,
        (Some(_), Some(_)) => return Err(usage("--r", "either --r or --g-max", "both")),
    };
    if !(args.input_ratio.is_finite() && args.input_ratio > 0.0) {
        return Err(usage(
            "--input-ratio",
            "finite number > 0",
            args.input_ratio,
        ));
    }
    let params = AmplifierParams::new(r, args.pump_phase)?;
    let det = DetectionConfig {
        sample_rate: args.sample_rate,
        n_samples: args.samples,
        noise_sigma: args.noise_sigma,
        rng_seed: global.seed.unwrap_or(0),
        residual_pump_intensity: args.pump_intensity,
    };
    let s_in = FieldAmplitude::real(1.0)?;
    let i_in = FieldAmplitude::real(1.0 / args.input_ratio.sqrt())?;
    let (s_out, i_out) = evolve_two_mode(s_in, i_in, &params)?;
    let pump = params.pump_phase();
    let on = synthesize_beatnote(s_out, i_out, pump, args.detuning, &det)?;
    let off = cell_off_record(s_in, i_in, pump, args.detuning, &det)?;

    let emit = match &global.emit {
        Some(list) => Emit::parse_list(list)?,
        None => BTreeSet::from([Emit::Csv]),
    };
    if emit.contains(&Emit::Json) {
        return Err(usage("--emit", "csv and/or binary for records", "json"));
    }
    let dir = out_dir(global);
    fs::create_dir_all(&dir).map_err(at(&dir))?;
    let material = format!("{args:?}{:?}", global.seed);
    let stem = file_stem("synth", material.as_bytes());
    let mut files = Vec::new();
    for (tag, rec) in [("on", &on), ("off", &off)] {
        for e in &emit {
            let path = match e {
                Emit::Csv => dir.join(format!("{stem}_{tag}.csv")),
                _ => dir.join(format!("{stem}_{tag}.bin")),
            };
            let mut out = create(&path)?;
            match e {
                Emit::Csv => write_record_csv(rec, &mut out)?,
                _ => write_record_binary(rec, &mut out)?,
            }
            out.flush()?;
            files.push(path);
        }
    }

    let phase = output_relative_phase(s_in, i_in, &params)?;
    let summary = format!(
        "synth: gain={:.6}, cos_phi_out={:.6}, phi_out={:.6} rad -> {}",
        s_out.intensity() / s_in.intensity(),
        phase.cos(),
        phase,
        files[0].display()
    );
    Ok(Report::new(summary, files))
}

fn read_record(path: &Path, residual_pump_intensity: f64) -> Result<BeatnoteRecord> {
    let file = BufReader::new(File::open(path).map_err(at(path))?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => read_record_binary(file, residual_pump_intensity),
        _ => read_record_csv(file, residual_pump_intensity),
    }
}

fn analyze(args: &AnalyzeArgs) -> Result<Report> {
    if !(args.input_ratio.is_finite() && args.input_ratio > 0.0) {
        return Err(usage(
            "--input-ratio",
            "finite number > 0",
            args.input_ratio,
        ));
    }
    let i_p = args.pump_intensity;
    let on = read_record(&args.on, i_p)?;
    let off = read_record(&args.off, i_p)?;
    let view = |p: f64| match args.phase {
        PhaseView::Wrapped => psa_core::phase::wrap(p),
        PhaseView::Folded => psa_core::phase::fold(p),
    };

    let summary = if args.input_ratio == 1.0 {
        let gain = extract_gain(&on, &off)?;
        let p_off = spectrum_peaks(&off)?;
        // balanced inputs: each channel carries half the beat-free intensity
        let i_s = 0.5 * (p_off.dc - i_p);
        let readout = extract_cos_phase(&on, i_p, gain, i_s)?;
        let mut s = format!("analyze: gain={gain:.9}, cos_phi_out={:.9}", readout.cos);
        if readout.out_of_tolerance {
            s.push_str(" (cos readout outside tolerance, clamped)");
        }
        s
    } else {
        let dominant = args.input_ratio > 1.0;
        let p_on = spectrum_peaks(&on)?;
        let p_off = spectrum_peaks(&off)?;
        let ch_on = channel_intensities(&p_on, i_p, dominant);
        let ch_off = channel_intensities(&p_off, i_p, dominant);
        if ch_off.signal.is_nan() || ch_off.signal <= 0.0 {
            return Err(Error::ZeroSignal);
        }
        let gain = ch_on.signal / ch_off.signal;
        let mut s = format!("analyze: gain={gain:.9}");
        if ch_off.idler > 0.0 {
            s.push_str(&format!(", gain_idler={:.9}", ch_on.idler / ch_off.idler));
        }
        if let Some(phase) = extract_signal_phase(&p_on, i_p, &ch_on)? {
            s.push_str(&format!(
                ", cos_phi_out={:.9}, phi_out={:.9} rad",
                phase.cos(),
                view(phase)
            ));
        }
        s
    };
    Ok(Report::new(summary, Vec::new()))
}
