//! Simulator for non-degenerate phase-sensitive amplification by four-wave
//! mixing: the two-mode amplifier, the three-beam heterodyne beatnote seen by
//! the output photodiode, the FFT readout of gain and output phase, and the
//! sweeps that produce gain curves, gain spectra and phase-transfer curves.

pub mod analyzer;
pub mod beatnote;
pub mod calibration;
pub mod config;
pub mod error;
pub mod field;
pub mod io;
pub mod phase;
pub mod squeezer;
pub mod sweeps;

pub use analyzer::{
    extract_cos_phase, extract_gain, phase_histogram, reconstruct_phase, spectrum_peaks,
    BranchHint, Histogram, SpectrumPeaks, TransferPoint,
};
pub use beatnote::{cell_off_record, synthesize_beatnote, BeatnoteRecord, DetectionConfig};
pub use calibration::{effective_r, CalibrationMap, CalibrationMode, OperatingPoint};
pub use config::{parse_config, Emit, ParseOptions, RunConfig, Verbosity};
pub use error::{Error, ErrorCategory, Result};
pub use field::FieldAmplitude;
pub use squeezer::{
    evolve_two_mode, gain_extrema, output_relative_phase, pia_gain, psa_gain, psa_max_from_pia,
    AmplifierParams, GainPair,
};
pub use sweeps::{Pipeline, ScanKind, ScanSpec, SweepResult};
