//! Two-mode parametric amplifier for classical field amplitudes.
//!
//! The pump is undepleted and enters only through its phase. Signal and idler
//! evolve under the two-mode Bogoliubov map
//!
//! ```text
//! s_out = cosh(r)·s_in + e^{2i·φp}·sinh(r)·conj(i_in)
//! i_out = cosh(r)·i_in + e^{2i·φp}·sinh(r)·conj(s_in)
//! ```
//!
//! and everything else in this module (gain law, extrema, the PIA relation,
//! the output phase) is a closed-form consequence of it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::field::FieldAmplitude;
use crate::phase::wrap;

/// Operating point of the amplifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct AmplifierParams {
    r: f64,
    pump_phase: f64,
    pump_power: Option<f64>,
    detuning: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    r: f64,
    pump_phase: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pump_power_mw: Option<f64>,
    detuning_khz: f64,
}

impl TryFrom<RawParams> for AmplifierParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        AmplifierParams::new(raw.r, raw.pump_phase)?
            .with_detuning(raw.detuning_khz)?
            .with_pump_power(raw.pump_power_mw)
    }
}

impl From<AmplifierParams> for RawParams {
    fn from(p: AmplifierParams) -> Self {
        RawParams {
            r: p.r,
            pump_phase: p.pump_phase,
            pump_power_mw: p.pump_power,
            detuning_khz: p.detuning,
        }
    }
}

impl AmplifierParams {
    pub fn new(r: f64, pump_phase: f64) -> Result<Self> {
        ensure_finite(r, "squeezing parameter r")?;
        ensure_finite(pump_phase, "pump phase")?;
        if r < 0.0 {
            return Err(Error::Domain {
                what: "squeezing parameter r",
                constraint: "must be >= 0",
                value: r,
            });
        }
        Ok(AmplifierParams {
            r,
            pump_phase: wrap(pump_phase),
            pump_power: None,
            detuning: 0.0,
        })
    }

    /// Squeezing parameter giving a pure-PSA maximum gain of `g_max`.
    pub fn for_max_gain(g_max: f64, pump_phase: f64) -> Result<Self> {
        Self::new(r_for_max_gain(g_max)?, pump_phase)
    }

    pub fn with_detuning(mut self, detuning_khz: f64) -> Result<Self> {
        ensure_finite(detuning_khz, "detuning")?;
        if detuning_khz < 0.0 {
            return Err(Error::Domain {
                what: "detuning",
                constraint: "must be >= 0 kHz",
                value: detuning_khz,
            });
        }
        self.detuning = detuning_khz;
        Ok(self)
    }

    pub fn with_pump_power(mut self, power_mw: Option<f64>) -> Result<Self> {
        if let Some(p) = power_mw {
            ensure_finite(p, "pump power")?;
            if p < 0.0 {
                return Err(Error::Domain {
                    what: "pump power",
                    constraint: "must be >= 0 mW",
                    value: p,
                });
            }
        }
        self.pump_power = power_mw;
        Ok(self)
    }

    pub fn with_r(self, r: f64) -> Result<Self> {
        Ok(AmplifierParams {
            r: AmplifierParams::new(r, 0.0)?.r,
            ..self
        })
    }

    pub fn with_pump_phase(self, pump_phase: f64) -> Result<Self> {
        ensure_finite(pump_phase, "pump phase")?;
        Ok(AmplifierParams {
            pump_phase: wrap(pump_phase),
            ..self
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn pump_phase(&self) -> f64 {
        self.pump_phase
    }

    pub fn pump_power(&self) -> Option<f64> {
        self.pump_power
    }

    pub fn detuning(&self) -> f64 {
        self.detuning
    }
}

/// Maximum and minimum of the phase-sensitive gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPair {
    pub g_max: f64,
    pub g_min: f64,
}

impl GainPair {
    pub fn product(&self) -> f64 {
        self.g_max * self.g_min
    }
}

/// `r` such that `e^{2r} = g_max`.
pub fn r_for_max_gain(g_max: f64) -> Result<f64> {
    ensure_finite(g_max, "maximum gain")?;
    if g_max < 1.0 {
        return Err(Error::Domain {
            what: "maximum gain",
            constraint: "must be >= 1",
            value: g_max,
        });
    }
    Ok(0.5 * g_max.ln())
}

/// Single-pass gain parameter `g = cosh²(r)`.
pub fn g_from_r(r: f64) -> f64 {
    let c = r.cosh();
    c * c
}

pub fn evolve_two_mode(
    s_in: FieldAmplitude,
    i_in: FieldAmplitude,
    params: &AmplifierParams,
) -> Result<(FieldAmplitude, FieldAmplitude)> {
    let (c, sh) = (params.r.cosh(), params.r.sinh());
    let pump = Complex64::from_polar(1.0, 2.0 * params.pump_phase);
    let s = s_in.complex();
    let i = i_in.complex();
    let s_out = s * c + pump * sh * i.conj();
    let i_out = i * c + pump * sh * s.conj();
    Ok((
        FieldAmplitude::from_complex(s_out)?,
        FieldAmplitude::from_complex(i_out)?,
    ))
}

fn check_g(g: f64) -> Result<f64> {
    ensure_finite(g, "gain parameter g")?;
    if g < 1.0 {
        return Err(Error::Domain {
            what: "gain parameter g",
            constraint: "must be >= 1",
            value: g,
        });
    }
    Ok(g)
}

/// Phase-sensitive gain `2g − 1 + 2√(g(g−1))·cos Φ`.
///
/// Evaluated as `|√g + √(g−1)·e^{iΦ}|²` with the real part split into two
/// non-negative terms, so deep deamplification near `Φ = π` keeps full
/// relative precision.
pub fn psa_gain(g: f64, phi: f64) -> Result<f64> {
    let g = check_g(g)?;
    ensure_finite(phi, "relative phase")?;
    let a = g.sqrt();
    let b = (g - 1.0).sqrt();
    let half = 0.5 * phi;
    let re = 1.0 / (a + b) + 2.0 * b * half.cos() * half.cos();
    let im = b * phi.sin();
    Ok(re * re + im * im)
}

pub fn gain_extrema(g: f64) -> Result<GainPair> {
    let g = check_g(g)?;
    let g_max = psa_gain(g, 0.0)?;
    let sum = g.sqrt() + (g - 1.0).sqrt();
    Ok(GainPair {
        g_max,
        g_min: 1.0 / (sum * sum),
    })
}

/// Phase-insensitive gain `cosh²(r)` of a signal seeded without idler.
pub fn pia_gain(r: f64) -> Result<f64> {
    ensure_finite(r, "squeezing parameter r")?;
    if r < 0.0 {
        return Err(Error::Domain {
            what: "squeezing parameter r",
            constraint: "must be >= 0",
            value: r,
        });
    }
    Ok(g_from_r(r))
}

/// Maximum PSA gain implied by a PIA gain: `(√G_pia + √(G_pia − 1))²`.
pub fn psa_max_from_pia(g_pia: f64) -> Result<f64> {
    let g = check_g(g_pia)?;
    let sum = g.sqrt() + (g - 1.0).sqrt();
    Ok(sum * sum)
}

/// Signal intensity gain `|s_out|²/|s_in|²`.
pub fn signal_gain(
    s_in: FieldAmplitude,
    i_in: FieldAmplitude,
    params: &AmplifierParams,
) -> Result<f64> {
    if s_in.intensity() == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let (s_out, _) = evolve_two_mode(s_in, i_in, params)?;
    Ok(s_out.intensity() / s_in.intensity())
}

/// Output phase of the signal relative to the pump, `wrap(arg s_out − φp)`.
pub fn output_relative_phase(
    s_in: FieldAmplitude,
    i_in: FieldAmplitude,
    params: &AmplifierParams,
) -> Result<f64> {
    if s_in.intensity() == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let (s_out, _) = evolve_two_mode(s_in, i_in, params)?;
    if s_out.intensity() == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok(wrap(s_out.phase() - params.pump_phase))
}
