//! Phase conventions.
//!
//! Stored phases live in `[-π, π)`. Scans may additionally be presented
//! unwrapped (continuous along the scan) or folded onto `[0, π]`, the way a
//! cosine readout naturally reports them.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// Wraps an angle into `[-π, π)`.
pub fn wrap(angle: f64) -> f64 {
    if (-PI..PI).contains(&angle) {
        return angle;
    }
    let w = (angle + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Folds an angle onto `[0, π]` (the absolute value of its wrapped form).
pub fn fold(angle: f64) -> f64 {
    wrap(angle).abs()
}

/// Distance from `angle` to the nearest multiple of π.
pub fn distance_to_axis(angle: f64) -> f64 {
    (angle - PI * (angle / PI).round()).abs()
}

/// Removes 2π jumps between consecutive samples.
pub fn unwrap(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &p in phases {
        if let Some(q) = prev {
            let step = p + offset - q;
            offset -= TAU * (step / TAU).round();
        }
        let v = p + offset;
        out.push(v);
        prev = Some(v);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasePresentation {
    /// `[-π, π)`
    Wrapped,
    /// `[0, π]`
    Folded,
    /// continuous along the scan
    Unwrapped,
}

impl PhasePresentation {
    pub fn apply(self, scan: &[f64]) -> Vec<f64> {
        match self {
            PhasePresentation::Wrapped => scan.iter().map(|&p| wrap(p)).collect(),
            PhasePresentation::Folded => scan.iter().map(|&p| fold(p)).collect(),
            PhasePresentation::Unwrapped => unwrap(scan),
        }
    }
}
