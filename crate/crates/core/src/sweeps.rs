//! Experiment campaigns: phase scans, pump-power sweeps, PIA comparison,
//! detuning spectra and phase-transfer curves.
//!
//! Every campaign can run through two pipelines. `ModelExact` reads gains and
//! phases straight off the amplifier outputs. `FullBeatnote` synthesizes the
//! cell-on and cell-off photodiode traces for each point and recovers the same
//! quantities through the FFT readout, the way the measurement does.
//!
//! Grid points are independent and evaluated in parallel; each point draws
//! its noise from `derive_seed(seed, point_index)`, so results do not depend
//! on scheduling.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analyzer::{
    channel_intensities, extract_cos_phase, extract_gain, extract_signal_phase, localized_fraction,
    reconstruct_scan, spectrum_peaks, TransferPoint,
};
use crate::beatnote::{cell_off_record, derive_seed, synthesize_beatnote, DetectionConfig};
use crate::calibration::{effective_r, CalibrationMap, OperatingPoint};
use crate::error::{Error, Result};
use crate::field::FieldAmplitude;
use crate::phase::{distance_to_axis, fold, unwrap, wrap};
use crate::squeezer::{evolve_two_mode, AmplifierParams};

/// Inner phase-scan resolution used to locate gain extrema.
pub const EXTREMA_GRID_POINTS: usize = 256;
/// Bracket width at which golden-section refinement stops, radians.
pub const EXTREMA_TOLERANCE: f64 = 1e-10;
/// Relative deviation of `g_min` from `1/g_max` still counted as ideal.
pub const BANDWIDTH_THRESHOLD: f64 = 0.05;
/// Half-width of the plateau regions around Δφ_in = kπ used for slopes.
pub const PLATEAU_HALF_WIDTH: f64 = FRAC_PI_4;
/// Output-phase distance from {0, π} counted as localized, radians.
pub const LOCALIZATION_TOLERANCE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    PhaseScan,
    PowerSweep,
    PiaCompare,
    DetuningSpectrum,
    TransferCurve,
}

impl ScanKind {
    pub fn name(self) -> &'static str {
        match self {
            ScanKind::PhaseScan => "phase_scan",
            ScanKind::PowerSweep => "power_sweep",
            ScanKind::PiaCompare => "pia_compare",
            ScanKind::DetuningSpectrum => "detuning_spectrum",
            ScanKind::TransferCurve => "transfer_curve",
        }
    }

    /// Unit of the grid values.
    pub fn grid_unit(self) -> &'static str {
        match self {
            ScanKind::PhaseScan | ScanKind::TransferCurve => "rad",
            ScanKind::PowerSweep | ScanKind::PiaCompare => "mW",
            ScanKind::DetuningSpectrum => "kHz",
        }
    }

    fn x_label(self) -> &'static str {
        match self {
            ScanKind::TransferCurve => "phi_in",
            _ => "x",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    ModelExact,
    FullBeatnote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub kind: ScanKind,
    pub grid: Vec<f64>,
    pub amplifier: AmplifierParams,
    pub calibration: CalibrationMap,
    pub detection: DetectionConfig,
    /// I_s,in / I_i,in
    pub input_ratio: f64,
    pub pipeline: Pipeline,
    pub seed: u64,
}

impl ScanSpec {
    /// Spec with the default calibration, detection and a pure-PSA input.
    pub fn new(kind: ScanKind, grid: Vec<f64>, amplifier: AmplifierParams) -> Self {
        ScanSpec {
            kind,
            grid,
            amplifier,
            calibration: CalibrationMap::default(),
            detection: DetectionConfig::default(),
            input_ratio: 1.0,
            pipeline: Pipeline::ModelExact,
            seed: 0,
        }
    }

    pub fn with_pipeline(mut self, pipeline: Pipeline) -> Self {
        self.pipeline = pipeline;
        self
    }

    pub fn with_input_ratio(mut self, ratio: f64) -> Self {
        self.input_ratio = ratio;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Scan("grid is empty".into()));
        }
        if let Some(bad) = self.grid.iter().find(|v| !v.is_finite()) {
            return Err(Error::Scan(format!("grid contains non-finite value {bad}")));
        }
        let increasing = self.grid.windows(2).all(|w| w[1] > w[0]);
        let decreasing = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::Scan("grid is not strictly monotone".into()));
        }
        if !(self.input_ratio.is_finite() && self.input_ratio > 0.0) {
            return Err(Error::config(
                "input_ratio",
                "finite number > 0",
                self.input_ratio,
            ));
        }
        self.calibration.validate()?;

        let lo = self.grid.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        match self.kind {
            ScanKind::PhaseScan | ScanKind::TransferCurve => {
                let n = self.grid.len() as f64;
                let covered = (hi - lo) * n / (n - 1.0).max(1.0);
                if self.kind == ScanKind::PhaseScan && covered < TAU * (1.0 - 1e-9) {
                    return Err(Error::Scan(format!(
                        "phase scan must cover 2π, grid covers {covered} rad"
                    )));
                }
            }
            ScanKind::PowerSweep | ScanKind::PiaCompare => {
                if lo < 0.0 || hi > 80.0 {
                    return Err(Error::Scan(format!(
                        "pump powers must lie in [0, 80] mW, grid spans [{lo}, {hi}]"
                    )));
                }
            }
            ScanKind::DetuningSpectrum => {
                if lo < 0.0 {
                    return Err(Error::Scan(format!("detuning must be >= 0 kHz, got {lo}")));
                }
            }
        }

        if self.pipeline == Pipeline::FullBeatnote {
            if self.kind == ScanKind::DetuningSpectrum {
                for &d in &self.grid {
                    self.detection.validate(d)?;
                }
            } else {
                self.detection.validate(self.amplifier.detuning())?;
            }
        }
        Ok(())
    }

    fn inputs(&self) -> Inputs {
        Inputs {
            signal: FieldAmplitude::real(1.0).expect("finite"),
            idler: FieldAmplitude::real(1.0 / self.input_ratio.sqrt())
                .expect("validated ratio gives a finite amplitude"),
        }
    }

    /// Operating point at a detuning. A pump power (from the grid or the
    /// amplifier) goes through the calibration map; an explicit `r` is the
    /// effective value at the amplifier's own detuning and rolls off from
    /// there.
    fn operating_point(&self, power: Option<f64>, detuning: f64) -> Result<OperatingPoint> {
        let cal = &self.calibration;
        match power.or(self.amplifier.pump_power()) {
            Some(p) => effective_r(p, detuning, cal),
            None => Ok(OperatingPoint {
                r_eff: self.amplifier.r() * cal.rolloff(detuning)
                    / cal.rolloff(self.amplifier.detuning()),
                loss: cal.loss(detuning),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Inputs {
    signal: FieldAmplitude,
    idler: FieldAmplitude,
}

impl Inputs {
    fn signal_only(self) -> Inputs {
        Inputs {
            idler: FieldAmplitude::ZERO,
            ..self
        }
    }

    fn is_balanced(&self) -> bool {
        self.signal.intensity() == self.idler.intensity()
    }
}

/// What one pipeline evaluation yields at one input phase.
#[derive(Debug, Clone, Copy)]
struct Measurement {
    gain: f64,
    gain_idler: Option<f64>,
    /// idler output over signal input intensity
    conversion: f64,
    /// `None` when only the cosine is observable (balanced full-beatnote)
    phase: Option<f64>,
    cos_phase: f64,
}

struct Probe<'a> {
    spec: &'a ScanSpec,
    inputs: Inputs,
    op: OperatingPoint,
    delta: f64,
    want_phase: bool,
}

impl Probe<'_> {
    fn measure(&self, pump_phase: f64, seed: u64) -> Result<Measurement> {
        let params = AmplifierParams::new(self.op.r_eff, pump_phase)?;
        let (s_out, i_out) = evolve_two_mode(self.inputs.signal, self.inputs.idler, &params)?;
        let s_out = s_out.attenuate(self.op.loss);
        let i_out = i_out.attenuate(self.op.loss);
        match self.spec.pipeline {
            Pipeline::ModelExact => self.model(s_out, i_out, params.pump_phase()),
            Pipeline::FullBeatnote => self.beatnote(s_out, i_out, params.pump_phase(), seed),
        }
    }

    fn model(
        &self,
        s_out: FieldAmplitude,
        i_out: FieldAmplitude,
        pump: f64,
    ) -> Result<Measurement> {
        let s_in = self.inputs.signal.intensity();
        let i_in = self.inputs.idler.intensity();
        let phase = if self.want_phase {
            if s_out.intensity() == 0.0 {
                return Err(Error::ZeroSignal);
            }
            Some(wrap(s_out.phase() - pump))
        } else {
            None
        };
        Ok(Measurement {
            gain: s_out.intensity() / s_in,
            gain_idler: (i_in > 0.0).then(|| i_out.intensity() / i_in),
            conversion: i_out.intensity() / s_in,
            phase,
            cos_phase: phase.map_or(f64::NAN, f64::cos),
        })
    }

    fn beatnote(
        &self,
        s_out: FieldAmplitude,
        i_out: FieldAmplitude,
        pump: f64,
        seed: u64,
    ) -> Result<Measurement> {
        let det = DetectionConfig {
            rng_seed: seed,
            ..self.spec.detection
        };
        let i_p = det.residual_pump_intensity;
        let on = synthesize_beatnote(s_out, i_out, pump, self.delta, &det)?;
        let off = cell_off_record(
            self.inputs.signal,
            self.inputs.idler,
            pump,
            self.delta,
            &det,
        )?;

        if self.inputs.is_balanced() {
            let gain = extract_gain(&on, &off)?;
            let cos_phase = if self.want_phase {
                extract_cos_phase(&on, i_p, gain, self.inputs.signal.intensity())?.cos
            } else {
                f64::NAN
            };
            return Ok(Measurement {
                gain,
                gain_idler: Some(gain),
                conversion: gain,
                phase: None,
                cos_phase,
            });
        }

        let dominant = self.inputs.signal.intensity() > self.inputs.idler.intensity();
        let p_on = spectrum_peaks(&on)?;
        let p_off = spectrum_peaks(&off)?;
        let ch_on = channel_intensities(&p_on, i_p, dominant);
        let ch_off = channel_intensities(&p_off, i_p, dominant);
        if ch_off.signal.is_nan() || ch_off.signal <= 0.0 {
            return Err(Error::ZeroSignal);
        }
        let phase = if self.want_phase {
            extract_signal_phase(&p_on, i_p, &ch_on)?
        } else {
            None
        };
        Ok(Measurement {
            gain: ch_on.signal / ch_off.signal,
            gain_idler: (ch_off.idler > 0.0).then(|| ch_on.idler / ch_off.idler),
            conversion: ch_on.idler / ch_off.signal,
            phase,
            cos_phase: phase.map_or(f64::NAN, f64::cos),
        })
    }

    /// Maximum and minimum signal gain over the input phase: a uniform scan
    /// of `[0, π)` followed by golden-section refinement around the best
    /// grid points.
    fn extrema(&self, seed: u64) -> Result<(f64, f64)> {
        let mut counter = 0u64;
        let mut eval = |x: f64| -> Result<f64> {
            counter += 1;
            Ok(self.measure(x, derive_seed(seed, counter))?.gain)
        };
        let step = PI / EXTREMA_GRID_POINTS as f64;
        let mut samples = Vec::with_capacity(EXTREMA_GRID_POINTS);
        for j in 0..EXTREMA_GRID_POINTS {
            let x = j as f64 * step;
            samples.push((x, eval(x)?));
        }
        let best_max = samples
            .iter()
            .copied()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        let best_min = samples
            .iter()
            .copied()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");

        let refined_max = golden_section(best_max.0 - step, best_max.0 + step, |x| {
            eval(x).map(|g| -g)
        })?;
        let refined_min = golden_section(best_min.0 - step, best_min.0 + step, &mut eval)?;
        Ok((
            best_max.1.max(-refined_max.1),
            best_min.1.min(refined_min.1),
        ))
    }
}

/// Minimises `f` on `[a, b]` to a bracket of `EXTREMA_TOLERANCE`.
fn golden_section(
    mut a: f64,
    mut b: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > EXTREMA_TOLERANCE {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Named data series of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub spec: ScanSpec,
    pub seed: u64,
    pub version: String,
    /// Derived scalars, e.g. the detuning bandwidth.
    pub summary: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub x_label: String,
    pub x: Vec<f64>,
    pub columns: Vec<Column>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    fn new(spec: &ScanSpec) -> Self {
        SweepResult {
            x_label: spec.kind.x_label().to_string(),
            x: spec.grid.clone(),
            columns: Vec::new(),
            metadata: SweepMetadata {
                spec: spec.clone(),
                seed: spec.seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                summary: BTreeMap::new(),
                notes: Vec::new(),
            },
        }
    }

    fn push(&mut self, name: &str, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.x.len());
        self.columns.push(Column {
            name: name.to_string(),
            values,
        });
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
    }

    pub fn summary(&self, key: &str) -> Option<f64> {
        self.metadata.summary.get(key).copied()
    }

    /// Transfer points, when the sweep carries output phases.
    pub fn transfer_points(&self) -> Option<Vec<TransferPoint>> {
        let gain = self.column("gain")?;
        let phi = self.column("phi_out")?;
        let cos = self.column("cos_phi_out")?;
        Some(
            (0..self.x.len())
                .map(|k| TransferPoint {
                    phi_in: self.x[k],
                    gain: gain[k],
                    phi_out: phi[k],
                    cos_phi_out: cos[k],
                })
                .collect(),
        )
    }
}

fn point_seed(spec: &ScanSpec, index: usize) -> u64 {
    derive_seed(spec.seed, index as u64)
}

fn expect_kind(spec: &ScanSpec, kind: ScanKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::Scan(format!(
            "expected a {} spec, got {}",
            kind.name(),
            spec.kind.name()
        )));
    }
    spec.validate()
}

pub fn run(spec: &ScanSpec) -> Result<SweepResult> {
    match spec.kind {
        ScanKind::PhaseScan => run_phase_scan(spec),
        ScanKind::PowerSweep => run_power_sweep(spec),
        ScanKind::PiaCompare => run_pia_compare(spec),
        ScanKind::DetuningSpectrum => run_detuning_spectrum(spec),
        ScanKind::TransferCurve => run_transfer_curve(spec),
    }
}

fn phase_probe(spec: &ScanSpec, want_phase: bool) -> Result<Probe<'_>> {
    let delta = spec.amplifier.detuning();
    Ok(Probe {
        spec,
        inputs: spec.inputs(),
        op: spec.operating_point(None, delta)?,
        delta,
        want_phase,
    })
}

fn measure_scan(probe: &Probe<'_>) -> Result<Vec<Measurement>> {
    let spec = probe.spec;
    spec.grid
        .par_iter()
        .enumerate()
        .map(|(k, &x)| probe.measure(x, point_seed(spec, k)))
        .collect()
}

/// Signal gain versus input relative phase; the piezo sets the pump phase.
pub fn run_phase_scan(spec: &ScanSpec) -> Result<SweepResult> {
    expect_kind(spec, ScanKind::PhaseScan)?;
    let probe = phase_probe(spec, false)?;
    let points = measure_scan(&probe)?;

    let mut out = SweepResult::new(spec);
    let gain: Vec<f64> = points.iter().map(|m| m.gain).collect();
    let (g_max, g_min) = min_max(&gain);
    out.push("gain", gain);
    if let Some(idler) = points
        .iter()
        .map(|m| m.gain_idler)
        .collect::<Option<Vec<_>>>()
    {
        if !probe.inputs.is_balanced() {
            out.push("gain_idler", idler);
        }
    }
    out.metadata.summary.insert("r_eff".into(), probe.op.r_eff);
    out.metadata.summary.insert("g_max".into(), g_max);
    out.metadata.summary.insert("g_min".into(), g_min);
    Ok(out)
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &v| {
            (hi.max(v), lo.min(v))
        })
}

fn extrema_at(spec: &ScanSpec, power: Option<f64>, delta: f64, seed: u64) -> Result<(f64, f64)> {
    let probe = Probe {
        spec,
        inputs: spec.inputs(),
        op: spec.operating_point(power, delta)?,
        delta,
        want_phase: false,
    };
    probe.extrema(seed)
}

/// `g_max`, `g_min` and the ideal `1/g_max` versus pump power.
pub fn run_power_sweep(spec: &ScanSpec) -> Result<SweepResult> {
    expect_kind(spec, ScanKind::PowerSweep)?;
    let delta = spec.amplifier.detuning();
    let pairs: Vec<(f64, f64)> = spec
        .grid
        .par_iter()
        .enumerate()
        .map(|(k, &p)| extrema_at(spec, Some(p), delta, point_seed(spec, k)))
        .collect::<Result<_>>()?;

    let mut out = SweepResult::new(spec);
    out.push("g_max", pairs.iter().map(|p| p.0).collect());
    out.push("g_min", pairs.iter().map(|p| p.1).collect());
    out.push("inv_g_max", pairs.iter().map(|p| 1.0 / p.0).collect());
    let worst = pairs
        .iter()
        .map(|p| (p.0 * p.1 - 1.0).abs())
        .fold(0.0, f64::max);
    out.metadata
        .summary
        .insert("max_product_deviation".into(), worst);
    Ok(out)
}

/// Maximum PSA gain, PIA gain (idler unseeded) and the PSA maximum implied by
/// the PIA gain, versus pump power.
///
/// The implied maximum `(√G + √(G − 1))²` is evaluated with the measured
/// conversion gain in place of `G − 1`. The two agree by photon-number
/// conservation, but the subtraction loses all precision as `G → 1`, and the
/// conversion form also stays exact under the detuning loss.
pub fn run_pia_compare(spec: &ScanSpec) -> Result<SweepResult> {
    expect_kind(spec, ScanKind::PiaCompare)?;
    let delta = spec.amplifier.detuning();
    let rows: Vec<(f64, f64, f64)> = spec
        .grid
        .par_iter()
        .enumerate()
        .map(|(k, &p)| {
            let seed = point_seed(spec, k);
            let (g_max, _) = extrema_at(spec, Some(p), delta, seed)?;
            let op = spec.operating_point(Some(p), delta)?;
            let probe = Probe {
                spec,
                inputs: spec.inputs().signal_only(),
                op,
                delta,
                want_phase: false,
            };
            let m = probe.measure(spec.amplifier.pump_phase(), derive_seed(seed, u64::MAX))?;
            let expected = m.gain.sqrt() + m.conversion.max(0.0).sqrt();
            Ok((g_max, m.gain, expected * expected))
        })
        .collect::<Result<_>>()?;

    let mut out = SweepResult::new(spec);
    out.push("g_max", rows.iter().map(|r| r.0).collect());
    out.push("g_pia", rows.iter().map(|r| r.1).collect());
    out.push("g_max_from_pia", rows.iter().map(|r| r.2).collect());
    let worst = rows
        .iter()
        .map(|r| (r.0 - r.2).abs() / r.2)
        .fold(0.0, f64::max);
    out.metadata
        .summary
        .insert("max_pia_relation_deviation".into(), worst);
    Ok(out)
}

/// Gain spectrum versus pump–signal detuning, with the bandwidth defined as
/// the largest detuning up to which `g_min` stays within
/// `BANDWIDTH_THRESHOLD` of `1/g_max`.
pub fn run_detuning_spectrum(spec: &ScanSpec) -> Result<SweepResult> {
    expect_kind(spec, ScanKind::DetuningSpectrum)?;
    let pairs: Vec<(f64, f64)> = spec
        .grid
        .par_iter()
        .enumerate()
        .map(|(k, &d)| extrema_at(spec, None, d, point_seed(spec, k)))
        .collect::<Result<_>>()?;

    let mut out = SweepResult::new(spec);
    let g_max: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let g_min: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let inv: Vec<f64> = g_max.iter().map(|g| 1.0 / g).collect();

    let mut order: Vec<usize> = (0..spec.grid.len()).collect();
    order.sort_by(|&a, &b| spec.grid[a].total_cmp(&spec.grid[b]));
    let bandwidth = order
        .iter()
        .take_while(|&&k| (g_min[k] - inv[k]).abs() <= BANDWIDTH_THRESHOLD * inv[k])
        .last()
        .map(|&k| spec.grid[k]);

    out.push("g_max", g_max);
    out.push("g_min", g_min);
    out.push("inv_g_max", inv);
    if let Some(bw) = bandwidth {
        out.metadata.summary.insert("bandwidth_khz".into(), bw);
    }
    out.metadata.notes.push(
        "detuning roll-off (Lorentzian on r) and loss (Gaussian in detuning) are phenomenological"
            .into(),
    );
    Ok(out)
}

/// Output phase and gain versus input phase, for equal (pure PSA) or unequal
/// (mixed PSA-PIA) signal and idler seeds.
pub fn run_transfer_curve(spec: &ScanSpec) -> Result<SweepResult> {
    expect_kind(spec, ScanKind::TransferCurve)?;
    let probe = phase_probe(spec, true)?;
    let points = measure_scan(&probe)?;

    let cos: Vec<f64> = points.iter().map(|m| m.cos_phase).collect();
    let unwrapped = match points.iter().map(|m| m.phase).collect::<Option<Vec<_>>>() {
        Some(phases) => unwrap(&phases),
        None => reconstruct_scan(&cos),
    };

    let mut out = SweepResult::new(spec);
    let gain: Vec<f64> = points.iter().map(|m| m.gain).collect();
    let (g_max, g_min) = min_max(&gain);
    out.push("gain", gain);
    let idler: Vec<f64> = points
        .iter()
        .map(|m| m.gain_idler.unwrap_or(f64::NAN))
        .collect();
    out.push("gain_idler", idler);
    out.push("cos_phi_out", cos);
    out.push(
        "phi_out_wrapped",
        unwrapped.iter().map(|&p| wrap(p)).collect(),
    );
    out.push(
        "phi_out_folded",
        unwrapped.iter().map(|&p| fold(p)).collect(),
    );
    out.push("phi_out", unwrapped);

    let (slope_min, slope_max) = plateau_slopes(&out.x, out.column("phi_out").unwrap());
    let summary = &mut out.metadata.summary;
    summary.insert("g_max".into(), g_max);
    summary.insert("g_min".into(), g_min);
    if let Some(pts) = out.transfer_points() {
        let frac = localized_fraction(&pts, LOCALIZATION_TOLERANCE);
        out.metadata
            .summary
            .insert("localized_fraction".into(), frac);
    }
    if slope_max.is_finite() {
        out.metadata
            .summary
            .insert("plateau_slope_min".into(), slope_min);
        out.metadata
            .summary
            .insert("plateau_slope_max".into(), slope_max);
    }
    Ok(out)
}

/// Smallest and largest `|dφ_out/dφ_in|` over the plateau regions, the input
/// phases within `PLATEAU_HALF_WIDTH` of a multiple of π. Central differences
/// on the scan grid.
pub fn plateau_slopes(phi_in: &[f64], phi_out: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 1..phi_in.len().saturating_sub(1) {
        if distance_to_axis(phi_in[k]) > PLATEAU_HALF_WIDTH {
            continue;
        }
        let slope = ((phi_out[k + 1] - phi_out[k - 1]) / (phi_in[k + 1] - phi_in[k - 1])).abs();
        lo = lo.min(slope);
        hi = hi.max(slope);
    }
    (lo, hi)
}

/// `count` evenly spaced points on `[start, stop)`.
pub fn uniform_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    let step = (stop - start) / count as f64;
    (0..count).map(|k| start + k as f64 * step).collect()
}

/// `count` evenly spaced points on `[start, stop]`.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    let step = (stop - start) / (count - 1) as f64;
    (0..count).map(|k| start + k as f64 * step).collect()
}
