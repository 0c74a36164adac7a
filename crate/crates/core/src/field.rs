use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Result};

/// Complex amplitude of one optical mode, in units where the input signal
/// intensity is 1. `|a|²` is the intensity, `arg a` the optical phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawField", into = "RawField")]
pub struct FieldAmplitude(Complex64);

#[derive(Serialize, Deserialize)]
struct RawField {
    re: f64,
    im: f64,
}

impl TryFrom<RawField> for FieldAmplitude {
    type Error = crate::Error;

    fn try_from(raw: RawField) -> Result<Self> {
        FieldAmplitude::new(raw.re, raw.im)
    }
}

impl From<FieldAmplitude> for RawField {
    fn from(f: FieldAmplitude) -> Self {
        RawField {
            re: f.0.re,
            im: f.0.im,
        }
    }
}

impl FieldAmplitude {
    pub const ZERO: FieldAmplitude = FieldAmplitude(Complex64::new(0.0, 0.0));

    pub fn new(re: f64, im: f64) -> Result<Self> {
        ensure_finite(re, "field amplitude (re)")?;
        ensure_finite(im, "field amplitude (im)")?;
        Ok(FieldAmplitude(Complex64::new(re, im)))
    }

    pub fn real(re: f64) -> Result<Self> {
        Self::new(re, 0.0)
    }

    /// Builds a mode from its intensity and phase.
    pub fn from_intensity(intensity: f64, phase: f64) -> Result<Self> {
        ensure_finite(intensity, "intensity")?;
        ensure_finite(phase, "phase")?;
        if intensity < 0.0 {
            return Err(crate::Error::Domain {
                what: "intensity",
                constraint: "must be >= 0",
                value: intensity,
            });
        }
        Ok(FieldAmplitude(Complex64::from_polar(
            intensity.sqrt(),
            phase,
        )))
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn complex(self) -> Complex64 {
        self.0
    }

    pub fn intensity(self) -> f64 {
        self.0.norm_sqr()
    }

    pub fn magnitude(self) -> f64 {
        self.0.norm()
    }

    pub fn phase(self) -> f64 {
        self.0.arg()
    }

    /// Multiplies the intensity by `factor` (amplitude by its square root).
    pub fn attenuate(self, factor: f64) -> Self {
        FieldAmplitude(self.0 * factor.sqrt())
    }
}
