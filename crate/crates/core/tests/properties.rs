use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use proptest::prelude::*;
use psa_core::analyzer::{
    extract_cos_phase, extract_gain, phase_histogram, spectrum, TransferPoint,
};
use psa_core::beatnote::{cell_off_record, synthesize_beatnote, DetectionConfig};
use psa_core::phase::wrap;
use psa_core::squeezer::{g_from_r, output_relative_phase, pia_gain, psa_gain};
use psa_core::{evolve_two_mode, gain_extrema, psa_max_from_pia, AmplifierParams, FieldAmplitude};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn field(mag: f64, phase: f64) -> FieldAmplitude {
    FieldAmplitude::from_complex(Complex64::from_polar(mag, phase)).unwrap()
}

fn one() -> FieldAmplitude {
    FieldAmplitude::real(1.0).unwrap()
}

fn det(seed: u64) -> DetectionConfig {
    DetectionConfig {
        rng_seed: seed,
        ..DetectionConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn photon_number_difference_is_conserved(
        ms in 0.0..10.0f64, ps in -PI..PI,
        mi in 0.0..10.0f64, pi in -PI..PI,
        r in 0.0..3.0f64, pp in -PI..PI,
    ) {
        let (s, i) = (field(ms, ps), field(mi, pi));
        let params = AmplifierParams::new(r, pp).unwrap();
        let (so, io) = evolve_two_mode(s, i, &params).unwrap();
        let before = s.intensity() - i.intensity();
        let after = so.intensity() - io.intensity();
        // scale of the individual output photon numbers
        let scale = (s.intensity() + i.intensity()) * (2.0 * r).cosh();
        prop_assert!((after - before).abs() <= 1e-12 * scale.max(1e-300));
    }

    #[test]
    fn gain_formula_matches_evolution(
        m in 0.01..10.0f64, ps in -PI..PI, pi in -PI..PI,
        r in 0.0..3.0f64, pp in -PI..PI,
    ) {
        let (s, i) = (field(m, ps), field(m, pi));
        let params = AmplifierParams::new(r, pp).unwrap();
        let (so, _) = evolve_two_mode(s, i, &params).unwrap();
        let phi = 2.0 * params.pump_phase() - ps - pi;
        let expected = psa_gain(g_from_r(r), phi).unwrap();
        prop_assert!(rel(so.intensity() / s.intensity(), expected) <= 1e-12);
    }

    #[test]
    fn ideal_product_is_one(g in 1.0..100.0f64) {
        let pair = gain_extrema(g).unwrap();
        prop_assert!((pair.g_max * pair.g_min - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn pia_consistency(r in 0.0..3.0f64) {
        let from_pia = psa_max_from_pia(pia_gain(r).unwrap()).unwrap();
        let direct = gain_extrema(g_from_r(r)).unwrap().g_max;
        prop_assert!(rel(from_pia, direct) <= 1e-12);
    }

    /// Unequal seeds: the stronger-seeded channel never reaches `1/G_max`.
    #[test]
    fn mixed_input_bound(ratio in 1.01..20.0f64, r in 0.05..3.0f64, pp in -PI..PI) {
        let s = FieldAmplitude::real(1.0).unwrap();
        let i = FieldAmplitude::real(1.0 / ratio.sqrt()).unwrap();
        let gain = |phase: f64| {
            let p = AmplifierParams::new(r, phase).unwrap();
            evolve_two_mode(s, i, &p).unwrap().0.intensity()
        };
        // extrema of |c + sh·a·e^{2iφ}|² sit at φ = 0 and π/2
        let (g_max, g_min) = (gain(0.0), gain(PI / 2.0));
        prop_assert!(g_min > 1.0 / g_max);
        let g = gain(pp);
        prop_assert!(g <= g_max * (1.0 + 1e-12) && g >= g_min * (1.0 - 1e-12));
    }

    #[test]
    fn output_phase_is_odd_with_period_pi(r in 0.0..3.0f64, x in -PI..PI) {
        let f = |phase: f64| {
            output_relative_phase(one(), one(), &AmplifierParams::new(r, phase).unwrap()).unwrap()
        };
        prop_assert!(wrap(f(-x) + f(x)).abs() <= 1e-12);
        let d = (f(x + PI) - f(x)).rem_euclid(PI);
        prop_assert!(d.min(PI - d) <= 1e-12);
    }

    #[test]
    fn parseval(
        ms in 0.0..3.0f64, ps in -PI..PI, mi in 0.0..3.0f64, pi in -PI..PI,
        pp in -PI..PI, noise in 0.0..0.5f64, seed in any::<u64>(),
    ) {
        let cfg = DetectionConfig { noise_sigma: noise, ..det(seed) };
        let rec = synthesize_beatnote(field(ms, ps), field(mi, pi), pp, 2.0, &cfg).unwrap();
        let time: f64 = rec.samples.iter().map(|v| v * v).sum();
        let freq: f64 = spectrum(&rec).iter().map(|z| z.norm_sqr()).sum::<f64>() / rec.len() as f64;
        prop_assert!(rel(freq, time) <= 1e-9);
    }

    #[test]
    fn equal_channels_reduce_to_product_form(
        gain in 0.01..50.0f64, i_s in 0.01..4.0f64, psi in -PI..PI,
        i_p in 0.01..4.0f64, pp in -PI..PI, delta in prop::sample::select(vec![1.0, 2.0, 2.5, 5.0]),
    ) {
        let a = (gain * i_s).sqrt();
        let s = field(a, pp + psi);
        let cfg = DetectionConfig { residual_pump_intensity: i_p, ..DetectionConfig::default() };
        let rec = synthesize_beatnote(s, s, pp, delta, &cfg).unwrap();
        let scale = i_p + 4.0 * gain * i_s + 4.0 * (i_p * gain * i_s).sqrt();
        for (k, t) in rec.times().enumerate() {
            let wt = TAU * delta * t;
            let closed = 2.0 * gain * i_s
                + 2.0 * gain * i_s * (2.0 * wt).cos()
                + i_p
                + 4.0 * (i_p * gain * i_s).sqrt() * wt.cos() * psi.cos();
            prop_assert!((rec.samples[k] - closed).abs() <= 1e-12 * scale, "sample {}", k);
        }
    }

    #[test]
    fn synthesis_is_deterministic(seed in any::<u64>(), noise in 0.0..1.0f64, pp in -PI..PI) {
        let cfg = DetectionConfig { noise_sigma: noise, ..det(seed) };
        let a = synthesize_beatnote(one(), one(), pp, 2.0, &cfg).unwrap();
        let b = synthesize_beatnote(one(), one(), pp, 2.0, &cfg).unwrap();
        prop_assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn noiseless_traces_are_bounded(
        ms in 0.0..5.0f64, ps in -PI..PI, mi in 0.0..5.0f64, pi in -PI..PI,
        pp in -PI..PI, i_p in 0.0..4.0f64,
    ) {
        let (s, i) = (field(ms, ps), field(mi, pi));
        let cfg = DetectionConfig { residual_pump_intensity: i_p, ..DetectionConfig::default() };
        let rec = synthesize_beatnote(s, i, pp, 2.0, &cfg).unwrap();
        let bound = (i_p.sqrt() + ms + mi).powi(2);
        for &v in &rec.samples {
            prop_assert!(v >= 0.0);
            prop_assert!(v <= bound * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn extraction_is_scale_invariant(
        r in 0.0..3.0f64, pp in -PI..PI, c in 1e-3..1e3f64,
    ) {
        let params = AmplifierParams::new(r, pp).unwrap();
        let (so, io) = evolve_two_mode(one(), one(), &params).unwrap();
        let cfg = DetectionConfig::default();
        let on = synthesize_beatnote(so, io, params.pump_phase(), 2.0, &cfg).unwrap();
        let off = cell_off_record(one(), one(), params.pump_phase(), 2.0, &cfg).unwrap();
        let g = extract_gain(&on, &off).unwrap();
        let g_scaled = extract_gain(&on.scaled(c), &off.scaled(c)).unwrap();
        prop_assert!(rel(g_scaled, g) <= 1e-12);
        let i_p = cfg.residual_pump_intensity;
        let cos = extract_cos_phase(&on, i_p, g, 1.0).unwrap().cos;
        let cos_scaled = extract_cos_phase(&on.scaled(c), c * i_p, g_scaled, c).unwrap().cos;
        prop_assert!((cos_scaled - cos).abs() <= 1e-12);
    }

    #[test]
    fn histogram_conserves_mass(
        phases in prop::collection::vec(-20.0..20.0f64, 0..300),
        bins in 2usize..100,
    ) {
        let points: Vec<TransferPoint> = phases
            .iter()
            .map(|&p| TransferPoint { phi_in: 0.0, gain: 1.0, phi_out: p, cos_phi_out: p.cos() })
            .collect();
        let h = phase_histogram(&points, bins).unwrap();
        prop_assert_eq!(h.total(), points.len() as u64);
        prop_assert_eq!(h.edges.len(), bins + 1);
    }
}

/// Noiseless synthesize → analyze recovers gain and `cos Δφ_out` for any r on
/// a 64-point input-phase grid.
#[test]
fn noiseless_round_trip_over_r() {
    let cfg = DetectionConfig::default();
    let i_p = cfg.residual_pump_intensity;
    for j in 0..31 {
        let r = 0.1 * j as f64;
        for k in 0..64 {
            let x = -PI + TAU * k as f64 / 64.0;
            let params = AmplifierParams::new(r, x).unwrap();
            let (so, io) = evolve_two_mode(one(), one(), &params).unwrap();
            let on = synthesize_beatnote(so, io, params.pump_phase(), 2.0, &cfg).unwrap();
            let off = cell_off_record(one(), one(), params.pump_phase(), 2.0, &cfg).unwrap();
            let g = extract_gain(&on, &off).unwrap();
            assert!(rel(g, so.intensity()) <= 1e-9, "r={r} x={x}: {g}");
            let cos = extract_cos_phase(&on, i_p, g, 1.0).unwrap().cos;
            let expected = output_relative_phase(one(), one(), &params).unwrap().cos();
            assert!(
                (cos - expected).abs() <= 1e-9,
                "r={r} x={x}: {cos} vs {expected}"
            );
        }
    }
}
