//! Readout of gain and output phase from beatnote records.
//!
//! A rectangular-window FFT over an integer number of δ periods gives the
//! coherent amplitudes of the DC, δ and 2δ components directly. The gain is
//! the ratio of the 2δ (signal × idler) amplitudes with the cell on and off;
//! the output phase comes from the δ (pump × signal/idler) component.

use std::cell::RefCell;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::beatnote::BeatnoteRecord;
use crate::error::{Error, Result};
use crate::phase::{distance_to_axis, wrap};

/// Relative floor on the cell-off 2δ amplitude, as a fraction of its DC level.
pub const REFERENCE_FLOOR: f64 = 1e-12;

/// Allowed excursion of a noiseless cosine readout beyond ±1.
pub const COS_TOLERANCE: f64 = 1e-6;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPeaks {
    pub dc: f64,
    pub at_delta: Complex64,
    pub at_two_delta: Complex64,
    /// kHz
    pub bin_resolution: f64,
}

/// Raw DFT `X_k = Σ x_j e^{−2πijk/n}` of a record.
pub fn spectrum(rec: &BeatnoteRecord) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = rec
        .samples
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    if buf.is_empty() {
        return buf;
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(&mut buf));
    buf
}

fn delta_bin(rec: &BeatnoteRecord) -> Result<usize> {
    let n = rec.samples.len();
    let periods = n as f64 * rec.delta / rec.sample_rate;
    let k = periods.round();
    if !(periods.is_finite() && (periods - k).abs() <= 1e-9 * periods.max(1.0) && k >= 1.0) {
        return Err(Error::Detection {
            violation: format!("δ on an exact FFT bin (n·δ/sample_rate = {periods})"),
        });
    }
    let k = k as usize;
    if 2 * k >= n.div_ceil(2) {
        return Err(Error::Detection {
            violation: format!("2δ below Nyquist (bin {} of {n})", 2 * k),
        });
    }
    Ok(k)
}

/// Single-sided coherent amplitudes: a tone `A·cos(2πft + θ)` on bin `f`
/// reads back as `A·e^{iθ}`, the DC term as the record mean.
pub fn spectrum_peaks(rec: &BeatnoteRecord) -> Result<SpectrumPeaks> {
    let k = delta_bin(rec)?;
    let x = spectrum(rec);
    let n = x.len() as f64;
    Ok(SpectrumPeaks {
        dc: x[0].re / n,
        at_delta: x[k] * (2.0 / n),
        at_two_delta: x[2 * k] * (2.0 / n),
        bin_resolution: rec.sample_rate / n,
    })
}

fn check_pair(on: &BeatnoteRecord, off: &BeatnoteRecord) -> Result<()> {
    if on.delta != off.delta || on.sample_rate != off.sample_rate || on.len() != off.len() {
        return Err(Error::RecordMismatch(format!(
            "on (δ {}, rate {}, n {}) vs off (δ {}, rate {}, n {})",
            on.delta,
            on.sample_rate,
            on.len(),
            off.delta,
            off.sample_rate,
            off.len()
        )));
    }
    Ok(())
}

/// Gain from the ratio of the 2δ peaks with the cell on and off.
pub fn extract_gain(on: &BeatnoteRecord, off: &BeatnoteRecord) -> Result<f64> {
    check_pair(on, off)?;
    let p_on = spectrum_peaks(on)?;
    let p_off = spectrum_peaks(off)?;
    let reference = p_off.at_two_delta.norm();
    let floor = REFERENCE_FLOOR * p_off.dc.abs();
    if reference.is_nan() || reference <= floor {
        return Err(Error::NoReferenceBeat {
            amplitude: reference,
            floor,
        });
    }
    Ok(p_on.at_two_delta.norm() / reference)
}

/// Signed cosine readout of the output phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosReadout {
    /// clamped to [-1, 1]
    pub cos: f64,
    pub raw: f64,
    /// `|raw|` exceeded 1 by more than the tolerance
    pub out_of_tolerance: bool,
}

/// Clamping tolerance for a cosine readout: the noiseless floor plus three
/// standard deviations of the bin noise after normalisation.
pub fn cos_tolerance(noise_sigma: f64, n_samples: usize, norm: f64) -> f64 {
    let bin_sigma = noise_sigma * (2.0 / n_samples as f64).sqrt();
    COS_TOLERANCE + 3.0 * bin_sigma / norm
}

/// `Re(at_δ) / (4·√(I_p·G·I_s,in))`, which equals `cos Δφ_out` for equal
/// signal and idler.
pub fn extract_cos_phase(
    rec: &BeatnoteRecord,
    i_p: f64,
    gain: f64,
    i_s_in: f64,
) -> Result<CosReadout> {
    if i_p.is_nan() || i_p <= 0.0 {
        return Err(Error::NoLocalOscillator);
    }
    for (what, v) in [("gain", gain), ("input signal intensity", i_s_in)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain {
                what,
                constraint: "must be > 0",
                value: v,
            });
        }
    }
    let peaks = spectrum_peaks(rec)?;
    let norm = 4.0 * (i_p * gain * i_s_in).sqrt();
    let raw = peaks.at_delta.re / norm;
    let tol = cos_tolerance(rec.config_echo.noise_sigma, rec.len(), norm);
    Ok(CosReadout {
        cos: raw.clamp(-1.0, 1.0),
        raw,
        out_of_tolerance: raw.abs() > 1.0 + tol,
    })
}

/// Signal and idler intensities recovered from one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelIntensities {
    pub signal: f64,
    pub idler: f64,
}

/// Splits `DC − I_p = |s|² + |i|²` and `|2δ| = 2|s||i|` into the two channel
/// intensities. Which channel is the stronger one is not observable from a
/// single record; `signal_dominant` supplies it.
pub fn channel_intensities(
    peaks: &SpectrumPeaks,
    i_p: f64,
    signal_dominant: bool,
) -> ChannelIntensities {
    let total = (peaks.dc - i_p).max(0.0);
    let cross = peaks.at_two_delta.norm();
    let sum = (total + cross).sqrt();
    let diff = (total - cross).max(0.0).sqrt();
    let big = 0.5 * (sum + diff);
    let small = 0.5 * (sum - diff);
    let (signal, idler) = if signal_dominant {
        (big, small)
    } else {
        (small, big)
    };
    ChannelIntensities {
        signal: signal * signal,
        idler: idler * idler,
    }
}

/// Output phase of the signal relative to the pump from the complex δ and 2δ
/// bins. Needs unequal channel intensities; returns `None` when the two are
/// too close to separate the signal phase from the idler phase.
pub fn extract_signal_phase(
    peaks: &SpectrumPeaks,
    i_p: f64,
    channels: &ChannelIntensities,
) -> Result<Option<f64>> {
    if i_p.is_nan() || i_p <= 0.0 {
        return Err(Error::NoLocalOscillator);
    }
    let s = channels.signal.sqrt();
    let i = channels.idler.sqrt();
    if (s - i).abs() <= 1e-9 * (s + i) {
        return Ok(None);
    }
    // at_δ / 2√I_p = |s|e^{iψs} + |i|e^{−iψi},  arg(at_2δ) = ψs − ψi
    let z = peaks.at_delta / (2.0 * i_p.sqrt());
    let half = if peaks.at_two_delta.norm() > 0.0 {
        0.5 * peaks.at_two_delta.arg()
    } else {
        0.0
    };
    let w = z * Complex64::cis(-half);
    let sigma = (w.im / (s - i)).atan2(w.re / (s + i));
    Ok(Some(wrap(sigma + half)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchHint {
    /// `acos` onto `[0, π]`
    Principal,
    /// the branch `±acos + 2πk` closest to `previous + trend`
    Continuity { previous: f64, trend: f64 },
}

/// Inverts a cosine readout. Exact ties between the two continuity branches
/// go to the lower (lagging) one.
pub fn reconstruct_phase(cos_phi: f64, hint: BranchHint) -> f64 {
    let a = cos_phi.clamp(-1.0, 1.0).acos();
    match hint {
        BranchHint::Principal => a,
        BranchHint::Continuity { previous, trend } => {
            let target = previous + trend;
            let nearest = |base: f64| base + TAU * ((target - base) / TAU).round();
            let up = nearest(a);
            let down = nearest(-a);
            let (du, dd) = ((up - target).abs(), (down - target).abs());
            if (du - dd).abs() <= 1e-12 {
                up.min(down)
            } else if du < dd {
                up
            } else {
                down
            }
        }
    }
}

/// Reconstructs a continuous phase curve from cosine readouts along a scan of
/// increasing input phase. The cosine cannot tell the curve from its mirror
/// image; the curve is oriented to be non-increasing overall, and shifted so
/// its first point lies in `[−π, π)`.
pub fn reconstruct_scan(cos_values: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(cos_values.len());
    for (k, &c) in cos_values.iter().enumerate() {
        let hint = match k {
            0 => BranchHint::Principal,
            1 => BranchHint::Continuity {
                previous: out[0],
                trend: 0.0,
            },
            _ => BranchHint::Continuity {
                previous: out[k - 1],
                trend: out[k - 1] - out[k - 2],
            },
        };
        out.push(reconstruct_phase(c, hint));
    }
    if let (Some(&first), Some(&last)) = (out.first(), out.last()) {
        if last > first {
            out.iter_mut().for_each(|v| *v = -*v);
        }
        let shift = wrap(out[0]) - out[0];
        out.iter_mut().for_each(|v| *v += shift);
    }
    out
}

/// One point of a phase-transfer scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferPoint {
    pub phi_in: f64,
    pub gain: f64,
    pub phi_out: f64,
    pub cos_phi_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `n_bins + 1` uniform edges spanning `[−π, π)`
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Histogram of wrapped output phases.
pub fn phase_histogram(points: &[TransferPoint], n_bins: usize) -> Result<Histogram> {
    if n_bins < 2 {
        return Err(Error::Domain {
            what: "histogram bin count",
            constraint: "must be >= 2",
            value: n_bins as f64,
        });
    }
    let width = TAU / n_bins as f64;
    let edges = (0..=n_bins).map(|k| -PI + k as f64 * width).collect();
    let mut counts = vec![0u64; n_bins];
    for p in points {
        let idx = ((wrap(p.phi_out) + PI) / width).floor() as usize;
        counts[idx.min(n_bins - 1)] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Fraction of output phases within `tolerance` of 0 or π (mod π).
pub fn localized_fraction(points: &[TransferPoint], tolerance: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let hits = points
        .iter()
        .filter(|p| distance_to_axis(p.phi_out) <= tolerance)
        .count();
    hits as f64 / points.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beatnote::DetectionConfig;

    fn record(f: impl Fn(f64) -> f64) -> BeatnoteRecord {
        let cfg = DetectionConfig::default();
        let samples = (0..cfg.n_samples)
            .map(|k| f(k as f64 / cfg.sample_rate))
            .collect();
        BeatnoteRecord {
            samples,
            sample_rate: cfg.sample_rate,
            delta: 2.0,
            config_echo: cfg,
        }
    }

    #[test]
    fn constant_trace() {
        let p = spectrum_peaks(&record(|_| 3.5)).unwrap();
        assert!((p.dc - 3.5).abs() < 1e-14);
        assert!(p.at_delta.norm() < 1e-13 && p.at_two_delta.norm() < 1e-13);
        assert!((p.bin_resolution - 0.05).abs() < 1e-15);
    }

    #[test]
    fn two_delta_tone() {
        let p = spectrum_peaks(&record(|t| 2.0 + 2.0 * (TAU * 4.0 * t).cos())).unwrap();
        assert!((p.dc - 2.0).abs() < 1e-13);
        assert!(p.at_delta.norm() < 1e-12);
        assert!((p.at_two_delta - Complex64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn tone_phase_is_read_back() {
        let p = spectrum_peaks(&record(|t| 0.7 * (TAU * 2.0 * t + 1.1).cos())).unwrap();
        assert!((p.at_delta.norm() - 0.7).abs() < 1e-12);
        assert!((p.at_delta.arg() - 1.1).abs() < 1e-12);
    }

    #[test]
    fn negative_cos_term() {
        // 4√(I_p G I_s)·cos(δt)·cos(π) with I_p = 0.25, G = 4, I_s = 1
        let p = spectrum_peaks(&record(|t| 10.0 - 4.0 * (TAU * 2.0 * t).cos())).unwrap();
        assert!((p.at_delta.re + 4.0).abs() < 1e-12);
        assert!(p.at_delta.im.abs() < 1e-12);
    }

    #[test]
    fn off_bin_is_rejected() {
        let mut rec = record(|_| 1.0);
        rec.delta = 2.01;
        assert!(matches!(spectrum_peaks(&rec), Err(Error::Detection { .. })));
    }

    #[test]
    fn gain_errors() {
        let flat = record(|_| 1.0);
        assert!(matches!(
            extract_gain(&flat, &flat),
            Err(Error::NoReferenceBeat { .. })
        ));
        let beat = record(|t| 2.0 + 2.0 * (TAU * 4.0 * t).cos());
        assert_eq!(extract_gain(&beat, &beat).unwrap(), 1.0);
        let mut short = beat.clone();
        short.samples.truncate(1000);
        assert!(matches!(
            extract_gain(&beat, &short),
            Err(Error::RecordMismatch(_))
        ));
    }

    #[test]
    fn cos_readout_requires_local_oscillator() {
        let beat = record(|t| 2.0 + 2.0 * (TAU * 4.0 * t).cos());
        assert!(matches!(
            extract_cos_phase(&beat, 0.0, 1.0, 1.0),
            Err(Error::NoLocalOscillator)
        ));
    }

    #[test]
    fn cos_readout_clamps() {
        let rec = record(|t| 5.0 + 4.0 * (1.0 + 1e-9) * (TAU * 2.0 * t).cos());
        let r = extract_cos_phase(&rec, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(r.cos, 1.0);
        assert!(!r.out_of_tolerance);
        let rec = record(|t| 5.0 + 4.4 * (TAU * 2.0 * t).cos());
        assert!(
            extract_cos_phase(&rec, 1.0, 1.0, 1.0)
                .unwrap()
                .out_of_tolerance
        );
    }

    #[test]
    fn principal_branch() {
        assert_eq!(reconstruct_phase(1.0, BranchHint::Principal), 0.0);
        assert!((reconstruct_phase(-1.0, BranchHint::Principal) - PI).abs() < 1e-15);
    }

    #[test]
    fn continuity_branch() {
        let v = reconstruct_phase(
            0.5f64.cos(),
            BranchHint::Continuity {
                previous: -0.45,
                trend: -0.05,
            },
        );
        assert!((v + 0.5).abs() < 1e-14);
        let v = reconstruct_phase(
            (0.3f64).cos(),
            BranchHint::Continuity {
                previous: TAU + 0.2,
                trend: 0.05,
            },
        );
        assert!((v - TAU - 0.3).abs() < 1e-12);
        // ties go down
        let v = reconstruct_phase(
            0.1f64.cos(),
            BranchHint::Continuity {
                previous: 0.0,
                trend: 0.0,
            },
        );
        assert!((v + 0.1).abs() < 1e-14);
    }

    #[test]
    fn scan_reconstruction_follows_a_line() {
        let truth: Vec<f64> = (0..200).map(|k| 0.3 - 0.05 * k as f64).collect();
        let cos: Vec<f64> = truth.iter().map(|p| p.cos()).collect();
        let rec = reconstruct_scan(&cos);
        for (a, b) in rec.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    fn pt(phi_out: f64) -> TransferPoint {
        TransferPoint {
            phi_in: 0.0,
            gain: 1.0,
            phi_out,
            cos_phi_out: phi_out.cos(),
        }
    }

    #[test]
    fn histogram_basics() {
        let h = phase_histogram(&vec![pt(0.0); 10], 8).unwrap();
        assert_eq!(h.edges.len(), 9);
        assert_eq!(h.total(), 10);
        let occupied: Vec<usize> = (0..8).filter(|&k| h.counts[k] > 0).collect();
        assert_eq!(occupied.len(), 1);
        let k = occupied[0];
        assert!(h.edges[k] <= 0.0 && 0.0 < h.edges[k + 1]);

        let empty = phase_histogram(&[], 4).unwrap();
        assert_eq!(empty.total(), 0);
        assert!(phase_histogram(&[], 1).is_err());

        // π wraps to −π and lands in the first bin
        let h = phase_histogram(&[pt(PI)], 4).unwrap();
        assert_eq!(h.counts[0], 1);
    }

    #[test]
    fn localization() {
        let pts = [pt(0.0), pt(PI - 0.1), pt(-PI + 0.05), pt(1.0)];
        assert_eq!(localized_fraction(&pts, 0.15), 0.75);
        assert_eq!(localized_fraction(&[], 0.15), 0.0);
    }
}
