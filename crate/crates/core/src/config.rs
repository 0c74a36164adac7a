//! Run configuration: a JSON document with documented defaults.
//!
//! Every key is optional except where the subcommand cannot supply it (the
//! scan kind). Unknown keys are reported as warnings, or as errors in strict
//! mode. [`to_document`] writes a fully explicit document that parses back to
//! the same [`RunConfig`].

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::beatnote::DetectionConfig;
use crate::calibration::{
    effective_r, CalibrationMap, CalibrationMode, ANCHOR_DETUNING_KHZ, ANCHOR_MAX_GAIN,
    ANCHOR_POWER_MW,
};
use crate::error::{Error, Result};
use crate::squeezer::{r_for_max_gain, AmplifierParams};
use crate::sweeps::{linspace, uniform_grid, Pipeline, ScanKind, ScanSpec};

/// Pump power used when the config names no operating point, mW.
pub const DEFAULT_PUMP_POWER_MW: f64 = 30.0;
pub const DEFAULT_OUTPUT_DIR: &str = "psa_out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    Csv,
    Json,
    Binary,
}

impl Emit {
    fn parse(s: &str) -> Option<Emit> {
        match s.trim() {
            "csv" => Some(Emit::Csv),
            "json" => Some(Emit::Json),
            "binary" => Some(Emit::Binary),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Emit::Csv => "csv",
            Emit::Json => "json",
            Emit::Binary => "binary",
        }
    }

    /// Parses a comma-separated list such as `csv,json`.
    pub fn parse_list(list: &str) -> Result<BTreeSet<Emit>> {
        let set = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| Emit::parse(s).ok_or_else(|| Error::config("emit", "csv|json|binary", s)))
            .collect::<Result<BTreeSet<_>>>()?;
        if set.is_empty() {
            return Err(Error::config("emit", "non-empty list", "empty list"));
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verbosity {
    Quiet,
    Normal,
    Verbose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scan: ScanSpec,
    pub output_dir: PathBuf,
    pub emit: BTreeSet<Emit>,
    pub verbosity: Verbosity,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub strict: bool,
    /// Kind implied by the subcommand; must agree with the document's `kind`.
    pub kind: Option<ScanKind>,
    /// Output directory when the document has none.
    pub default_output_dir: Option<PathBuf>,
}

/// Parsed config plus the warnings raised in lenient mode.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

const TOP_KEYS: &[&str] = &[
    "kind",
    "grid",
    "amplifier",
    "calibration",
    "detection",
    "input_ratio",
    "pipeline",
    "seed",
    "output_dir",
    "emit",
    "verbosity",
];
const GRID_KEYS: &[&str] = &["start", "stop", "points", "endpoint"];
const AMPLIFIER_KEYS: &[&str] = &["r", "g_max", "pump_power_mw", "pump_phase", "detuning_khz"];
const CALIBRATION_KEYS: &[&str] = &[
    "mode",
    "slope",
    "r_sat",
    "p_sat",
    "bandwidth_hwhm",
    "loss_exponent_scale",
    "anchor",
];
const ANCHOR_KEYS: &[&str] = &["power_mw", "detuning_khz", "g_max"];
const DETECTION_KEYS: &[&str] = &[
    "sample_rate",
    "n_samples",
    "noise_sigma",
    "rng_seed",
    "residual_pump_intensity",
];

fn kind_from_str(s: &str) -> Option<ScanKind> {
    Some(match s {
        "phase_scan" => ScanKind::PhaseScan,
        "power_sweep" => ScanKind::PowerSweep,
        "pia_compare" => ScanKind::PiaCompare,
        "detuning_spectrum" => ScanKind::DetuningSpectrum,
        "transfer_curve" => ScanKind::TransferCurve,
        _ => return None,
    })
}

/// Default grid of each campaign.
pub fn default_grid(kind: ScanKind) -> Vec<f64> {
    match kind {
        ScanKind::PhaseScan => uniform_grid(0.0, TAU, 256),
        ScanKind::TransferCurve => uniform_grid(-PI, PI, 512),
        ScanKind::PowerSweep | ScanKind::PiaCompare => linspace(0.0, 80.0, 17),
        ScanKind::DetuningSpectrum => linspace(0.0, 2000.0, 201),
    }
}

fn describe(v: &Value) -> String {
    match v {
        Value::String(s) => format!("\"{s}\""),
        other => other.to_string(),
    }
}

/// Typed access to one JSON object, naming keys by their dotted path.
struct Section<'a> {
    path: String,
    map: &'a Map<String, Value>,
}

impl<'a> Section<'a> {
    fn new(path: &str, value: &'a Value) -> Result<Self> {
        let map = value
            .as_object()
            .ok_or_else(|| Error::config(path, "object", describe(value)))?;
        Ok(Section {
            path: path.to_string(),
            map,
        })
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn unknown(&self, known: &[&str], out: &mut Vec<String>) {
        out.extend(
            self.map
                .keys()
                .filter(|k| !known.contains(&k.as_str()))
                .map(|k| self.key(k)),
        );
    }

    fn get(&self, k: &str) -> Option<&'a Value> {
        self.map.get(k).filter(|v| !v.is_null())
    }

    fn number(&self, k: &str) -> Result<Option<f64>> {
        match self.get(k) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| Error::config(self.key(k), "finite number", describe(v))),
        }
    }

    fn number_where(
        &self,
        k: &str,
        expected: &str,
        ok: impl Fn(f64) -> bool,
    ) -> Result<Option<f64>> {
        match self.number(k)? {
            Some(x) if !ok(x) => Err(Error::config(self.key(k), expected, x)),
            other => Ok(other),
        }
    }

    fn unsigned(&self, k: &str) -> Result<Option<u64>> {
        match self.get(k) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| Error::config(self.key(k), "unsigned integer", describe(v))),
        }
    }

    fn string(&self, k: &str) -> Result<Option<&'a str>> {
        match self.get(k) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(Some)
                .ok_or_else(|| Error::config(self.key(k), "string", describe(v))),
        }
    }

    fn boolean(&self, k: &str) -> Result<Option<bool>> {
        match self.get(k) {
            None => Ok(None),
            Some(v) => v
                .as_bool()
                .map(Some)
                .ok_or_else(|| Error::config(self.key(k), "boolean", describe(v))),
        }
    }

    fn section(&self, k: &str) -> Result<Option<Section<'a>>> {
        self.get(k)
            .map(|v| Section::new(&self.key(k), v))
            .transpose()
    }
}

/// Parses and validates a config document.
pub fn parse_config(text: &str, opts: &ParseOptions) -> Result<Parsed> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| Error::config("<document>", "well-formed JSON", e))?;
    let top = Section::new("", &doc)?;

    let mut unknown = Vec::new();
    top.unknown(TOP_KEYS, &mut unknown);

    let kind = match (top.string("kind")?, opts.kind) {
        (Some(s), implied) => {
            let k = kind_from_str(s).ok_or_else(|| {
                Error::config(
                    "kind",
                    "phase_scan|power_sweep|pia_compare|detuning_spectrum|transfer_curve",
                    format!("\"{s}\""),
                )
            })?;
            if let Some(implied) = implied {
                if implied != k {
                    return Err(Error::config("kind", implied.name(), format!("\"{s}\"")));
                }
            }
            k
        }
        (None, Some(implied)) => implied,
        (None, None) => return Err(Error::config("kind", "scan kind", "nothing")),
    };

    let grid = parse_grid(&top, kind, &mut unknown)?;
    let calibration = parse_calibration(&top, &mut unknown)?;
    let detection = parse_detection(&top, &mut unknown)?;
    let amplifier = parse_amplifier(&top, &calibration, &mut unknown)?;

    let input_ratio = top
        .number_where("input_ratio", "number > 0", |x| x > 0.0)?
        .unwrap_or(1.0);
    let pipeline = match top.string("pipeline")? {
        None | Some("model_exact") => Pipeline::ModelExact,
        Some("full_beatnote") => Pipeline::FullBeatnote,
        Some(other) => {
            return Err(Error::config(
                "pipeline",
                "model_exact|full_beatnote",
                format!("\"{other}\""),
            ))
        }
    };
    let seed = top.unsigned("seed")?.unwrap_or(0);

    let output_dir = match top.string("output_dir")? {
        Some(s) => PathBuf::from(s),
        None => opts
            .default_output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
    };
    let emit = match top.get("emit") {
        None => [Emit::Csv, Emit::Json].into_iter().collect(),
        Some(Value::String(s)) => Emit::parse_list(s)?,
        Some(Value::Array(items)) => {
            let names = items
                .iter()
                .map(|v| {
                    v.as_str()
                        .ok_or_else(|| Error::config("emit", "list of strings", describe(v)))
                })
                .collect::<Result<Vec<_>>>()?;
            Emit::parse_list(&names.join(","))?
        }
        Some(v) => {
            return Err(Error::config(
                "emit",
                "list of csv|json|binary",
                describe(v),
            ))
        }
    };
    let verbosity = match top.string("verbosity")? {
        None | Some("normal") => Verbosity::Normal,
        Some("quiet") => Verbosity::Quiet,
        Some("verbose") => Verbosity::Verbose,
        Some(other) => {
            return Err(Error::config(
                "verbosity",
                "quiet|normal|verbose",
                format!("\"{other}\""),
            ))
        }
    };

    if opts.strict {
        if let Some(key) = unknown.first() {
            return Err(Error::config(
                key.clone(),
                "no such key (strict mode)",
                "a value",
            ));
        }
    }
    let warnings = unknown
        .into_iter()
        .map(|k| format!("ignoring unknown config key `{k}`"))
        .collect();

    let scan = ScanSpec {
        kind,
        grid,
        amplifier,
        calibration,
        detection,
        input_ratio,
        pipeline,
        seed,
    };
    scan.validate()?;
    Ok(Parsed {
        config: RunConfig {
            scan,
            output_dir,
            emit,
            verbosity,
        },
        warnings,
    })
}

fn parse_grid(top: &Section<'_>, kind: ScanKind, unknown: &mut Vec<String>) -> Result<Vec<f64>> {
    match top.get("grid") {
        None => Ok(default_grid(kind)),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(k, v)| {
                v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| {
                    Error::config(format!("grid[{k}]"), "finite number", describe(v))
                })
            })
            .collect(),
        Some(v @ Value::Object(_)) => {
            let g = Section::new("grid", v)?;
            g.unknown(GRID_KEYS, unknown);
            let start = g
                .number("start")?
                .ok_or_else(|| Error::config("grid.start", "number", "nothing"))?;
            let stop = g
                .number("stop")?
                .ok_or_else(|| Error::config("grid.stop", "number", "nothing"))?;
            let points = g
                .unsigned("points")?
                .filter(|&n| n >= 1)
                .ok_or_else(|| Error::config("grid.points", "integer >= 1", "nothing"))?
                as usize;
            Ok(if g.boolean("endpoint")?.unwrap_or(false) {
                linspace(start, stop, points)
            } else {
                uniform_grid(start, stop, points)
            })
        }
        Some(v) => Err(Error::config(
            "grid",
            "array of numbers or {start, stop, points}",
            describe(v),
        )),
    }
}

fn parse_calibration(top: &Section<'_>, unknown: &mut Vec<String>) -> Result<CalibrationMap> {
    let mut cal = CalibrationMap::default();
    let Some(c) = top.section("calibration")? else {
        return Ok(cal);
    };
    c.unknown(CALIBRATION_KEYS, unknown);
    cal.mode = match c.string("mode")? {
        None | Some("saturating") => CalibrationMode::Saturating,
        Some("linear") => CalibrationMode::Linear,
        Some(other) => {
            return Err(Error::config(
                c.key("mode"),
                "linear|saturating",
                format!("\"{other}\""),
            ))
        }
    };
    let positive = |x: f64| x > 0.0;
    if let Some(v) = c.number_where("p_sat", "number > 0", positive)? {
        cal.p_sat = v;
    }
    if let Some(v) = c.number_where("bandwidth_hwhm", "number > 0", positive)? {
        cal.bandwidth_hwhm = v;
    }
    if let Some(v) = c.number_where("loss_exponent_scale", "number >= 0", |x| x >= 0.0)? {
        cal.loss_exponent_scale = v;
    }
    let slope = c.number_where("slope", "number > 0", positive)?;
    let r_sat = c.number_where("r_sat", "number > 0", positive)?;

    let anchor = c.section("anchor")?;
    if anchor.is_some() || (slope.is_none() && r_sat.is_none()) {
        let (mut p, mut d, mut g) = (ANCHOR_POWER_MW, ANCHOR_DETUNING_KHZ, ANCHOR_MAX_GAIN);
        if let Some(a) = &anchor {
            a.unknown(ANCHOR_KEYS, unknown);
            p = a
                .number_where("power_mw", "number > 0", positive)?
                .unwrap_or(p);
            d = a
                .number_where("detuning_khz", "number >= 0", |x| x >= 0.0)?
                .unwrap_or(d);
            g = a
                .number_where("g_max", "number > 1", |x| x > 1.0)?
                .unwrap_or(g);
        }
        cal.fit_anchor(p, d, g)?;
    }
    if let Some(v) = slope {
        cal.slope = v;
    }
    if let Some(v) = r_sat {
        cal.r_sat = v;
    }
    cal.validate()?;
    Ok(cal)
}

fn parse_detection(top: &Section<'_>, unknown: &mut Vec<String>) -> Result<DetectionConfig> {
    let mut det = DetectionConfig::default();
    let Some(d) = top.section("detection")? else {
        return Ok(det);
    };
    d.unknown(DETECTION_KEYS, unknown);
    if let Some(v) = d.number_where("sample_rate", "number > 0 (kHz)", |x| x > 0.0)? {
        det.sample_rate = v;
    }
    if let Some(v) = d.unsigned("n_samples")? {
        det.n_samples = v as usize;
    }
    if let Some(v) = d.number_where("noise_sigma", "number >= 0", |x| x >= 0.0)? {
        det.noise_sigma = v;
    }
    if let Some(v) = d.unsigned("rng_seed")? {
        det.rng_seed = v;
    }
    if let Some(v) = d.number_where("residual_pump_intensity", "number >= 0", |x| x >= 0.0)? {
        det.residual_pump_intensity = v;
    }
    Ok(det)
}

fn parse_amplifier(
    top: &Section<'_>,
    cal: &CalibrationMap,
    unknown: &mut Vec<String>,
) -> Result<AmplifierParams> {
    let a = top.section("amplifier")?;
    if let Some(a) = &a {
        a.unknown(AMPLIFIER_KEYS, unknown);
    }
    let field = |k: &str, expected: &str, ok: fn(f64) -> bool| -> Result<Option<f64>> {
        match &a {
            Some(a) => a.number_where(k, expected, ok),
            None => Ok(None),
        }
    };
    let r = field("r", "number >= 0", |x| x >= 0.0)?;
    let g_max = field("g_max", "number >= 1", |x| x >= 1.0)?;
    let power = field("pump_power_mw", "number >= 0 (mW)", |x| x >= 0.0)?;
    let phase = field("pump_phase", "finite number (rad)", |_| true)?.unwrap_or(0.0);
    let detuning =
        field("detuning_khz", "number >= 0 (kHz)", |x| x >= 0.0)?.unwrap_or(ANCHOR_DETUNING_KHZ);

    let given = [r.is_some(), g_max.is_some(), power.is_some()];
    if given.iter().filter(|&&b| b).count() > 1 {
        return Err(Error::config(
            "amplifier",
            "at most one of r, g_max, pump_power_mw",
            "several",
        ));
    }
    let base = AmplifierParams::new(0.0, phase)?.with_detuning(detuning)?;
    match (r, g_max, power) {
        (Some(r), _, _) => base.with_r(r),
        (_, Some(g), _) => base.with_r(r_for_max_gain(g)?),
        (_, _, p) => {
            let p = p.unwrap_or(DEFAULT_PUMP_POWER_MW);
            let op = effective_r(p, detuning, cal)?;
            base.with_r(op.r_eff)?.with_pump_power(Some(p))
        }
    }
}

/// Fully explicit config document; parsing it yields `cfg` again.
pub fn to_document(cfg: &RunConfig) -> Value {
    let s = &cfg.scan;
    let mut amplifier = json!({
        "pump_phase": s.amplifier.pump_phase(),
        "detuning_khz": s.amplifier.detuning(),
    });
    match s.amplifier.pump_power() {
        Some(p) => amplifier["pump_power_mw"] = json!(p),
        None => amplifier["r"] = json!(s.amplifier.r()),
    }
    json!({
        "kind": s.kind.name(),
        "grid": s.grid,
        "amplifier": amplifier,
        "calibration": s.calibration,
        "detection": s.detection,
        "input_ratio": s.input_ratio,
        "pipeline": s.pipeline,
        "seed": s.seed,
        "output_dir": cfg.output_dir.to_string_lossy(),
        "emit": cfg.emit.iter().map(|e| e.name()).collect::<Vec<_>>(),
        "verbosity": cfg.verbosity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lenient(kind: Option<ScanKind>) -> ParseOptions {
        ParseOptions {
            kind,
            ..ParseOptions::default()
        }
    }

    #[test]
    fn minimal_phase_scan_fills_defaults() {
        let p = parse_config(r#"{"kind": "phase_scan"}"#, &lenient(None)).unwrap();
        let s = &p.config.scan;
        assert_eq!(s.grid.len(), 256);
        assert_eq!(s.amplifier.pump_power(), Some(DEFAULT_PUMP_POWER_MW));
        let op = effective_r(30.0, 2.0, &CalibrationMap::default()).unwrap();
        assert_eq!(s.amplifier.r(), op.r_eff);
        assert_eq!(s.input_ratio, 1.0);
        assert_eq!(p.config.emit.len(), 2);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn mixed_ratio() {
        let p = parse_config(
            r#"{"input_ratio": 1.78, "amplifier": {"g_max": 5.3}}"#,
            &lenient(Some(ScanKind::TransferCurve)),
        )
        .unwrap();
        assert_eq!(p.config.scan.kind, ScanKind::TransferCurve);
        assert_eq!(p.config.scan.input_ratio, 1.78);
        assert!((p.config.scan.amplifier.r() - 5.3f64.ln() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn negative_power_is_named() {
        let e = parse_config(
            r#"{"kind": "phase_scan", "amplifier": {"pump_power_mw": -5}}"#,
            &lenient(None),
        )
        .unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("amplifier.pump_power_mw"), "{msg}");
        assert!(msg.contains(">= 0") && msg.contains("-5"), "{msg}");
    }

    #[test]
    fn unknown_keys() {
        let text = r#"{"kind": "phase_scan", "colour": "blue", "detection": {"gain": 1}}"#;
        let p = parse_config(text, &lenient(None)).unwrap();
        assert_eq!(p.warnings.len(), 2);
        let strict = ParseOptions {
            strict: true,
            ..ParseOptions::default()
        };
        let e = parse_config(text, &strict).unwrap_err();
        assert!(e.to_string().contains("colour"));
    }

    #[test]
    fn kind_conflict() {
        let e = parse_config(
            r#"{"kind": "phase_scan"}"#,
            &lenient(Some(ScanKind::PowerSweep)),
        )
        .unwrap_err();
        assert!(e.to_string().contains("power_sweep"));
        assert!(parse_config("{}", &lenient(None)).is_err());
    }

    #[test]
    fn type_errors_name_the_key() {
        let e = parse_config(
            r#"{"kind": "phase_scan", "detection": {"n_samples": "many"}}"#,
            &lenient(None),
        )
        .unwrap_err();
        assert!(e.to_string().contains("detection.n_samples"));
        let e = parse_config(r#"{"kind": "phase_scan", "emit": []}"#, &lenient(None)).unwrap_err();
        assert!(e.to_string().contains("emit"));
        let e = parse_config(
            r#"{"kind": "phase_scan", "amplifier": {"r": 1, "g_max": 3}}"#,
            &lenient(None),
        )
        .unwrap_err();
        assert!(e.to_string().contains("at most one"));
    }

    #[test]
    fn echo_round_trip() {
        for text in [
            r#"{"kind": "power_sweep", "seed": 9, "emit": "csv,binary"}"#,
            r#"{"kind": "transfer_curve", "input_ratio": 1.78, "amplifier": {"g_max": 5.3, "pump_phase": 0.4}}"#,
            r#"{"kind": "detuning_spectrum", "calibration": {"mode": "linear", "bandwidth_hwhm": 150}}"#,
            r#"{"kind": "phase_scan", "grid": {"start": -1, "stop": 6, "points": 70, "endpoint": true},
                "pipeline": "full_beatnote", "detection": {"noise_sigma": 0.01, "rng_seed": 3}}"#,
        ] {
            let first = parse_config(text, &lenient(None)).unwrap().config;
            let echo = to_document(&first).to_string();
            let second = parse_config(&echo, &lenient(None)).unwrap().config;
            assert_eq!(first, second, "{text}");
        }
    }
}
