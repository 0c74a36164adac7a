//! Phenomenological map from pump power and detuning to the effective
//! squeezing parameter and a transmission loss.
//!
//! `r(P, δ) = r_P(P) · L(δ)` with `L(δ) = 1/(1 + (δ/hwhm)²)`, and the output
//! intensities are multiplied by `exp(−κ·(δ/hwhm)²)`. `r_P` is either linear
//! in power or saturating, `r_sat·P/(P + p_sat)`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    Linear,
    Saturating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationMap {
    pub mode: CalibrationMode,
    /// r per mW (linear mode)
    pub slope: f64,
    pub r_sat: f64,
    /// mW
    pub p_sat: f64,
    /// kHz
    pub bandwidth_hwhm: f64,
    pub loss_exponent_scale: f64,
}

/// Pump power at which the default map is anchored, mW.
pub const ANCHOR_POWER_MW: f64 = 40.0;
/// Detuning at which the default map is anchored, kHz.
pub const ANCHOR_DETUNING_KHZ: f64 = 2.0;
/// Maximum gain reached at the anchor.
pub const ANCHOR_MAX_GAIN: f64 = 7.0;

const DEFAULT_P_SAT_MW: f64 = 30.0;
const DEFAULT_HWHM_KHZ: f64 = 200.0;
const DEFAULT_LOSS_SCALE: f64 = 0.003;

/// Effective squeezing and intensity transmission at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub r_eff: f64,
    pub loss: f64,
}

impl Default for CalibrationMap {
    /// Saturating map fitted so that 40 mW at 2 kHz gives a maximum gain of
    /// exactly 7 after loss. The linear slope is fitted to the same anchor.
    fn default() -> Self {
        let mut cal = CalibrationMap {
            mode: CalibrationMode::Saturating,
            slope: 1.0,
            r_sat: 1.0,
            p_sat: DEFAULT_P_SAT_MW,
            bandwidth_hwhm: DEFAULT_HWHM_KHZ,
            loss_exponent_scale: DEFAULT_LOSS_SCALE,
        };
        cal.fit_anchor(ANCHOR_POWER_MW, ANCHOR_DETUNING_KHZ, ANCHOR_MAX_GAIN)
            .expect("default anchor is in range");
        cal
    }
}

impl CalibrationMap {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("calibration.slope", self.slope),
            ("calibration.r_sat", self.r_sat),
            ("calibration.p_sat", self.p_sat),
            ("calibration.bandwidth_hwhm", self.bandwidth_hwhm),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, "finite number > 0", v));
            }
        }
        let k = self.loss_exponent_scale;
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::config(
                "calibration.loss_exponent_scale",
                "finite number >= 0",
                k,
            ));
        }
        Ok(())
    }

    /// Lorentzian roll-off of the squeezing parameter.
    pub fn rolloff(&self, detuning_khz: f64) -> f64 {
        let x = detuning_khz / self.bandwidth_hwhm;
        1.0 / (1.0 + x * x)
    }

    /// Intensity transmission at a detuning.
    pub fn loss(&self, detuning_khz: f64) -> f64 {
        let x = detuning_khz / self.bandwidth_hwhm;
        (-self.loss_exponent_scale * x * x).exp()
    }

    fn power_term(&self, power_mw: f64) -> f64 {
        match self.mode {
            CalibrationMode::Linear => self.slope * power_mw,
            CalibrationMode::Saturating => self.r_sat * power_mw / (power_mw + self.p_sat),
        }
    }

    /// Rescales `slope` and `r_sat` so that `power_mw` at `detuning_khz`
    /// yields `loss · e^{2 r_eff} = g_max`. Both modes are fitted; the shape
    /// parameters (`p_sat`, `bandwidth_hwhm`, loss scale) are kept.
    pub fn fit_anchor(&mut self, power_mw: f64, detuning_khz: f64, g_max: f64) -> Result<()> {
        let loss = self.loss(detuning_khz);
        let target = 0.5 * (g_max / loss).ln();
        if !(power_mw > 0.0 && target.is_finite() && target > 0.0) {
            return Err(Error::Domain {
                what: "calibration anchor",
                constraint: "needs power > 0 and g_max above the loss floor",
                value: g_max,
            });
        }
        let l = self.rolloff(detuning_khz);
        self.slope = target / (power_mw * l);
        self.r_sat = target * (power_mw + self.p_sat) / (power_mw * l);
        Ok(())
    }
}

pub fn effective_r(
    power_mw: f64,
    detuning_khz: f64,
    cal: &CalibrationMap,
) -> Result<OperatingPoint> {
    cal.validate()?;
    ensure_finite(power_mw, "pump power")?;
    ensure_finite(detuning_khz, "detuning")?;
    if power_mw < 0.0 {
        return Err(Error::Domain {
            what: "pump power",
            constraint: "must be >= 0 mW",
            value: power_mw,
        });
    }
    if detuning_khz < 0.0 {
        return Err(Error::Domain {
            what: "detuning",
            constraint: "must be >= 0 kHz",
            value: detuning_khz,
        });
    }
    Ok(OperatingPoint {
        r_eff: cal.power_term(power_mw) * cal.rolloff(detuning_khz),
        loss: cal.loss(detuning_khz),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_power() {
        let cal = CalibrationMap::default();
        let op = effective_r(0.0, 50.0, &cal).unwrap();
        assert_eq!(op.r_eff, 0.0);
        assert_eq!(op.loss, cal.loss(50.0));
    }

    #[test]
    fn half_saturation_at_p_sat() {
        let cal = CalibrationMap::default();
        let op = effective_r(cal.p_sat, 0.0, &cal).unwrap();
        assert!((op.r_eff - cal.r_sat / 2.0).abs() < 1e-15);
        assert_eq!(op.loss, 1.0);
    }

    #[test]
    fn lorentzian_half_width() {
        let cal = CalibrationMap::default();
        assert!((cal.rolloff(cal.bandwidth_hwhm) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn anchor_is_exact() {
        for mode in [CalibrationMode::Saturating, CalibrationMode::Linear] {
            let cal = CalibrationMap {
                mode,
                ..CalibrationMap::default()
            };
            let op = effective_r(40.0, 2.0, &cal).unwrap();
            let g = op.loss * (2.0 * op.r_eff).exp();
            assert!((g - 7.0).abs() < 1e-12, "{mode:?}: {g}");
        }
    }

    #[test]
    fn monotone() {
        let cal = CalibrationMap::default();
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let op = effective_r(30.0, k as f64 * 40.0, &cal).unwrap();
            assert!(op.r_eff <= prev);
            prev = op.r_eff;
        }
        let mut prev = -1.0;
        for k in 0..50 {
            let op = effective_r(k as f64 * 2.0, 2.0, &cal).unwrap();
            assert!(op.r_eff >= prev);
            prev = op.r_eff;
        }
    }

    #[test]
    fn rejects_invalid() {
        let bad = CalibrationMap {
            bandwidth_hwhm: 0.0,
            ..CalibrationMap::default()
        };
        let err = effective_r(1.0, 1.0, &bad).unwrap_err();
        assert!(err.to_string().contains("bandwidth_hwhm"));
        assert!(effective_r(-1.0, 0.0, &CalibrationMap::default()).is_err());
        assert!(effective_r(1.0, -1.0, &CalibrationMap::default()).is_err());
    }
}
