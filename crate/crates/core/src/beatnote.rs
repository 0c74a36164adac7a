//! Photodiode trace behind the cell: the three-beam beatnote.
//!
//! The detected field is the residual pump (local oscillator) plus the signal
//! at `+δ` and the idler at `−δ` relative to it,
//!
//! ```text
//! E(t) = √I_p·e^{iφp} + s_out·e^{i2πδt} + i_out·e^{−i2πδt}
//! ```
//!
//! and the trace is `|E(t)|²` plus optional white Gaussian detector noise.
//! Records always span an integer number of δ periods so the δ and 2δ tones
//! sit on exact FFT bins.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldAmplitude;

/// Seed stream used for cell-off records derived from a cell-on seed.
const CELL_OFF_STREAM: u64 = 0x0FF;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    /// kHz
    pub sample_rate: f64,
    pub n_samples: usize,
    /// additive noise std per sample, intensity units
    pub noise_sigma: f64,
    pub rng_seed: u64,
    /// I_p, intensity units
    pub residual_pump_intensity: f64,
}

impl Default for DetectionConfig {
    /// 100 kHz sampling, 2000 samples: 40 periods of a 2 kHz beat.
    fn default() -> Self {
        DetectionConfig {
            sample_rate: 100.0,
            n_samples: 2000,
            noise_sigma: 0.0,
            rng_seed: 0,
            residual_pump_intensity: 1.0,
        }
    }
}

impl DetectionConfig {
    /// Frequency resolution of a record, kHz.
    pub fn bin_resolution(&self) -> f64 {
        self.sample_rate / self.n_samples as f64
    }

    /// Checks the sampling invariants for a beat at `delta` kHz and returns
    /// the FFT bin index of δ.
    pub fn validate(&self, delta: f64) -> Result<usize> {
        let violation = |v: String| Err(Error::Detection { violation: v });
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return violation(format!("sample_rate > 0 (got {})", self.sample_rate));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return violation(format!("noise_sigma >= 0 (got {})", self.noise_sigma));
        }
        let ip = self.residual_pump_intensity;
        if !(ip.is_finite() && ip >= 0.0) {
            return violation(format!("residual_pump_intensity >= 0 (got {ip})"));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return violation(format!("beat frequency delta > 0 (got {delta})"));
        }
        if self.sample_rate < 20.0 * delta {
            return violation(format!(
                "sample_rate >= 10·(2δ) (sample_rate {} kHz, δ {} kHz)",
                self.sample_rate, delta
            ));
        }
        let periods = self.n_samples as f64 * delta / self.sample_rate;
        let whole = periods.round();
        if (periods - whole).abs() > 1e-9 * periods.max(1.0) || whole < 4.0 {
            return violation(format!(
                "n_samples·δ/sample_rate integer >= 4 (got {periods})"
            ));
        }
        Ok(whole as usize)
    }
}

/// One sampled photodiode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatnoteRecord {
    pub samples: Vec<f64>,
    /// kHz
    pub sample_rate: f64,
    /// kHz
    pub delta: f64,
    pub config_echo: DetectionConfig,
}

impl BeatnoteRecord {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample times in ms.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let dt = 1.0 / self.sample_rate;
        (0..self.samples.len()).map(move |k| k as f64 * dt)
    }

    pub fn scaled(&self, factor: f64) -> BeatnoteRecord {
        BeatnoteRecord {
            samples: self.samples.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// SplitMix64 finalizer over `(master, index)`; used for every per-point
/// and per-record seed so results do not depend on evaluation order.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn synthesize_beatnote(
    s_out: FieldAmplitude,
    i_out: FieldAmplitude,
    pump_phase: f64,
    delta: f64,
    cfg: &DetectionConfig,
) -> Result<BeatnoteRecord> {
    let periods = cfg.validate(delta)?;
    let lo = Complex64::from_polar(cfg.residual_pump_intensity.sqrt(), pump_phase);
    let s = s_out.complex();
    let i = i_out.complex();
    let n = cfg.n_samples;
    let step = std::f64::consts::TAU / n as f64;

    let mut samples: Vec<f64> = (0..n)
        .map(|k| {
            // the record holds whole periods, so the phase index reduces mod n
            let rot = Complex64::cis(step * ((k * periods) % n) as f64);
            (lo + s * rot + i * rot.conj()).norm_sqr()
        })
        .collect();

    if cfg.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Detection {
            violation: e.to_string(),
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        for v in samples.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    Ok(BeatnoteRecord {
        samples,
        sample_rate: cfg.sample_rate,
        delta,
        config_echo: *cfg,
    })
}

/// Reference trace with the cell switched off: inputs pass through unchanged.
pub fn cell_off_record(
    s_in: FieldAmplitude,
    i_in: FieldAmplitude,
    pump_phase: f64,
    delta: f64,
    cfg: &DetectionConfig,
) -> Result<BeatnoteRecord> {
    let off_cfg = DetectionConfig {
        rng_seed: derive_seed(cfg.rng_seed, CELL_OFF_STREAM),
        ..*cfg
    };
    synthesize_beatnote(s_in, i_in, pump_phase, delta, &off_cfg)
}

/// Noise level giving `snr_db` relative to the RMS of the AC part of `trace`.
pub fn noise_sigma_for_snr(trace: &[f64], snr_db: f64) -> f64 {
    if trace.is_empty() {
        return 0.0;
    }
    let n = trace.len() as f64;
    let mean = trace.iter().sum::<f64>() / n;
    let var = trace.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / 10f64.powf(snr_db / 20.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(ip: f64) -> DetectionConfig {
        DetectionConfig {
            residual_pump_intensity: ip,
            ..DetectionConfig::default()
        }
    }

    fn real(v: f64) -> FieldAmplitude {
        FieldAmplitude::real(v).unwrap()
    }

    #[test]
    fn pump_only_is_flat() {
        let rec = synthesize_beatnote(real(0.0), real(0.0), 0.3, 2.0, &cfg(1.0)).unwrap();
        assert_eq!(rec.len(), 2000);
        assert!(rec.samples.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn signal_idler_beat_without_pump() {
        let rec = synthesize_beatnote(real(1.0), real(1.0), 0.0, 2.0, &cfg(0.0)).unwrap();
        for (t, v) in rec.times().zip(&rec.samples) {
            let expected = 2.0 + 2.0 * (std::f64::consts::TAU * 4.0 * t).cos();
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn config_violations_are_named() {
        let mut c = cfg(1.0);
        c.n_samples = 2010;
        let e = synthesize_beatnote(real(1.0), real(1.0), 0.0, 2.0, &c).unwrap_err();
        assert!(e.to_string().contains("integer"));

        let e = synthesize_beatnote(real(1.0), real(1.0), 0.0, 10.0, &cfg(1.0)).unwrap_err();
        assert!(e.to_string().contains("sample_rate >= 10"));

        let mut c = cfg(1.0);
        c.n_samples = 100; // 2 periods
        assert!(synthesize_beatnote(real(1.0), real(1.0), 0.0, 2.0, &c).is_err());

        let mut c = cfg(-1.0);
        c.residual_pump_intensity = -1.0;
        assert!(synthesize_beatnote(real(1.0), real(1.0), 0.0, 2.0, &c).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let mut c = cfg(1.0);
        c.noise_sigma = 0.1;
        c.rng_seed = 42;
        let a = synthesize_beatnote(real(1.0), real(1.0), 0.0, 2.0, &c).unwrap();
        let b = synthesize_beatnote(real(1.0), real(1.0), 0.0, 2.0, &c).unwrap();
        assert_eq!(a, b);
        c.rng_seed = 43;
        let d = synthesize_beatnote(real(1.0), real(1.0), 0.0, 2.0, &c).unwrap();
        assert_ne!(a.samples, d.samples);
    }

    #[test]
    fn cell_off_uses_its_own_stream() {
        let mut c = cfg(1.0);
        let on = synthesize_beatnote(real(1.0), real(0.5), 0.2, 2.0, &c).unwrap();
        let off = cell_off_record(real(1.0), real(0.5), 0.2, 2.0, &c).unwrap();
        assert_eq!(on.samples, off.samples);

        c.noise_sigma = 0.05;
        let on = synthesize_beatnote(real(1.0), real(0.5), 0.2, 2.0, &c).unwrap();
        let off = cell_off_record(real(1.0), real(0.5), 0.2, 2.0, &c).unwrap();
        assert_ne!(on.samples, off.samples);
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|k| derive_seed(7, k)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn snr_scaling() {
        let trace: Vec<f64> = (0..1000).map(|k| 3.0 + (k as f64 * 0.1).cos()).collect();
        let s20 = noise_sigma_for_snr(&trace, 20.0);
        let s40 = noise_sigma_for_snr(&trace, 40.0);
        assert!((s20 / s40 - 10.0).abs() < 1e-12);
    }
}
