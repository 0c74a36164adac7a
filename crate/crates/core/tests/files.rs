use std::f64::consts::{PI, TAU};
use std::fs::File;

use psa_core::beatnote::synthesize_beatnote;
use psa_core::io::{
    read_record_binary, read_record_csv, read_sweep_binary, read_table, write_record_binary,
    write_record_csv, write_sweep_binary, write_sweep_csv, write_sweep_json,
};
use psa_core::sweeps::{run, uniform_grid};
use psa_core::{AmplifierParams, DetectionConfig, FieldAmplitude, ScanKind, ScanSpec};
use tempfile::TempDir;

#[test]
fn sweep_files_round_trip_losslessly() {
    let dir = TempDir::new().unwrap();
    let spec = ScanSpec::new(
        ScanKind::TransferCurve,
        uniform_grid(-PI, PI, 97),
        AmplifierParams::new(1.1, 0.0).unwrap(),
    )
    .with_input_ratio(1.78);
    let res = run(&spec).unwrap();

    let csv = dir.path().join("t.csv");
    write_sweep_csv(&res, File::create(&csv).unwrap()).unwrap();
    let bin = dir.path().join("t.bin");
    write_sweep_binary(&res, File::create(&bin).unwrap()).unwrap();
    let a = read_table(File::open(&csv).unwrap()).unwrap();
    let b = read_sweep_binary(File::open(&bin).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.column("phi_in").unwrap(), res.x);
    for c in &res.columns {
        assert_eq!(a.column(&c.name).unwrap(), c.values, "{}", c.name);
    }

    let json = dir.path().join("t.json");
    write_sweep_json(&res, File::create(&json).unwrap()).unwrap();
    let meta: psa_core::sweeps::SweepMetadata =
        serde_json::from_reader(File::open(&json).unwrap()).unwrap();
    assert_eq!(meta, res.metadata);
}

#[test]
fn record_files_round_trip() {
    let dir = TempDir::new().unwrap();
    let cfg = DetectionConfig {
        noise_sigma: 0.05,
        rng_seed: 11,
        ..DetectionConfig::default()
    };
    let s = FieldAmplitude::from_intensity(2.0, 0.4).unwrap();
    let i = FieldAmplitude::from_intensity(0.5, -1.0).unwrap();
    let rec = synthesize_beatnote(s, i, TAU / 3.0, 2.0, &cfg).unwrap();

    let csv = dir.path().join("r.csv");
    write_record_csv(&rec, File::create(&csv).unwrap()).unwrap();
    let bin = dir.path().join("r.bin");
    write_record_binary(&rec, File::create(&bin).unwrap()).unwrap();
    let from_csv = read_record_csv(File::open(&csv).unwrap(), 1.0).unwrap();
    let from_bin = read_record_binary(File::open(&bin).unwrap(), 1.0).unwrap();
    for r in [&from_csv, &from_bin] {
        assert_eq!(r.samples, rec.samples);
        assert_eq!(r.sample_rate, rec.sample_rate);
        assert_eq!(r.delta, rec.delta);
    }

    // truncated binary is a format error, not a panic
    let bytes = std::fs::read(&bin).unwrap();
    assert!(read_record_binary(&bytes[..bytes.len() - 3], 1.0).is_err());
}
