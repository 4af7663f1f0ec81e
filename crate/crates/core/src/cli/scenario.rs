//! Flat `key = value` scenario files.
//!
//! ```text
//! # Si-APD behind an up-converter
//! mu = 0.2
//! alpha_db_per_km = 0.21
//! clock_hz = 1e9
//! baseline_error = 0.01
//! delay_n = 100
//! attack = hybrid_nomem
//! detector.name = si
//! detector.efficiency = 0.35
//! detector.dark_per_window = 3.5e-8
//! detector.dead_time_s = 45e-9
//! detector.receiver_loss_db = 2.1
//! ```
//!
//! Numbers use `.` as the decimal separator regardless of locale. Text after
//! `#` is ignored. Unknown or repeated keys are rejected.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::detector::{
    make_detector_from_upconversion, DetectorSpec, GatingMode, UpConversionCurve,
};
use crate::link::LinkScenario;
use crate::security::{AttackLabel, AttackModel};

use super::CliError;

/// Diagnostic for a malformed scenario file. Columns are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: ", self.line, self.column)?;
        if let Some(key) = &self.key {
            write!(f, "key `{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorFields {
    pub name: String,
    pub efficiency: Option<f64>,
    pub dark_per_window: Option<f64>,
    pub dead_time_s: f64,
    pub receiver_loss_db: f64,
    pub mode: Option<GatingMode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpconvFields {
    pub a1: f64,
    pub a2: f64,
    pub b: [f64; 5],
    pub bandwidth_hz: f64,
    pub pump_mw: f64,
}

impl UpconvFields {
    pub fn curve(&self) -> crate::Result<UpConversionCurve> {
        UpConversionCurve::new(self.a1, self.a2, self.b, self.bandwidth_hz)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub mu: f64,
    pub alpha_db_per_km: f64,
    pub clock_hz: f64,
    pub baseline_error: f64,
    pub delay_n: u32,
    pub attack: AttackLabel,
    pub delta: Option<f64>,
    pub n_detectors: Option<u32>,
    pub f_fixed: Option<f64>,
    pub detector: DetectorFields,
    pub upconv: Option<UpconvFields>,
}

const UPCONV_KEYS: [&str; 9] = [
    "upconv.a1",
    "upconv.a2",
    "upconv.b0",
    "upconv.b1",
    "upconv.b2",
    "upconv.b3",
    "upconv.b4",
    "upconv.bandwidth_hz",
    "upconv.pump_mw",
];

const KNOWN_KEYS: [&str; 15] = [
    "mu",
    "alpha_db_per_km",
    "clock_hz",
    "baseline_error",
    "delay_n",
    "attack",
    "delta",
    "n_detectors",
    "f_fixed",
    "detector.name",
    "detector.efficiency",
    "detector.dark_per_window",
    "detector.dead_time_s",
    "detector.receiver_loss_db",
    "detector.mode",
];

struct Entry {
    line: usize,
    value_column: usize,
    value: String,
}

struct Entries {
    map: BTreeMap<String, Entry>,
    last_line: usize,
}

impl Entries {
    fn err(&self, key: &str, message: impl Into<String>) -> ParseError {
        let (line, column) = self
            .map
            .get(key)
            .map(|e| (e.line, e.value_column))
            .unwrap_or((self.last_line, 1));
        ParseError {
            line,
            column,
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn text(&self, key: &str) -> Result<&str, ParseError> {
        self.map
            .get(key)
            .map(|e| e.value.as_str())
            .ok_or_else(|| self.err(key, "missing required key"))
    }

    fn number(&self, key: &str) -> Result<f64, ParseError> {
        let raw = self.text(key)?;
        parse_decimal(raw).ok_or_else(|| self.err(key, format!("invalid number {raw:?}")))
    }

    fn opt_number(&self, key: &str) -> Result<Option<f64>, ParseError> {
        if self.has(key) {
            self.number(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn integer(&self, key: &str) -> Result<u32, ParseError> {
        let raw = self.text(key)?;
        match raw.parse::<u32>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(self.err(key, format!("expected a positive integer, got {raw:?}"))),
        }
    }
}

/// Locale-independent decimal parse; rejects non-finite values.
pub fn parse_decimal(raw: &str) -> Option<f64> {
    let ok_chars = raw
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-'));
    if raw.is_empty() || !ok_chars {
        return None;
    }
    raw.parse::<f64>().ok().filter(|v| v.is_finite())
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut map = BTreeMap::new();
        let mut last_line = 1;
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            last_line = line_no;
            let content = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            };
            if content.trim().is_empty() {
                continue;
            }
            let Some(eq) = content.find('=') else {
                let column = content.len() - content.trim_start().len() + 1;
                return Err(ParseError {
                    line: line_no,
                    column,
                    key: None,
                    message: "expected `key = value`".into(),
                });
            };
            let key = content[..eq].trim();
            let key_column = content.len() - content.trim_start().len() + 1;
            if key.is_empty() {
                return Err(ParseError {
                    line: line_no,
                    column: key_column,
                    key: None,
                    message: "empty key".into(),
                });
            }
            if !KNOWN_KEYS.contains(&key) && !UPCONV_KEYS.contains(&key) {
                return Err(ParseError {
                    line: line_no,
                    column: key_column,
                    key: Some(key.to_string()),
                    message: "unknown key".into(),
                });
            }
            let after = &content[eq + 1..];
            let value = after.trim();
            let value_column = eq + 2 + (after.len() - after.trim_start().len());
            if map.contains_key(key) {
                return Err(ParseError {
                    line: line_no,
                    column: key_column,
                    key: Some(key.to_string()),
                    message: "duplicate key".into(),
                });
            }
            map.insert(
                key.to_string(),
                Entry {
                    line: line_no,
                    value_column,
                    value: value.to_string(),
                },
            );
        }
        let e = Entries { map, last_line };

        let upconv_present: Vec<&str> = UPCONV_KEYS.iter().copied().filter(|k| e.has(k)).collect();
        let upconv = match upconv_present.len() {
            0 => None,
            n if n == UPCONV_KEYS.len() => Some(UpconvFields {
                a1: e.number("upconv.a1")?,
                a2: e.number("upconv.a2")?,
                b: [
                    e.number("upconv.b0")?,
                    e.number("upconv.b1")?,
                    e.number("upconv.b2")?,
                    e.number("upconv.b3")?,
                    e.number("upconv.b4")?,
                ],
                bandwidth_hz: e.number("upconv.bandwidth_hz")?,
                pump_mw: e.number("upconv.pump_mw")?,
            }),
            _ => {
                let missing = UPCONV_KEYS.iter().find(|k| !e.has(k)).unwrap();
                return Err(e.err(missing, "all upconv.* keys are required once any is given"));
            }
        };

        let efficiency = e.opt_number("detector.efficiency")?;
        let dark_per_window = e.opt_number("detector.dark_per_window")?;
        if upconv.is_some() {
            for key in ["detector.efficiency", "detector.dark_per_window"] {
                if e.has(key) {
                    return Err(e.err(key, "derived from upconv.* and must not be given"));
                }
            }
        } else {
            for (key, v) in [
                ("detector.efficiency", efficiency),
                ("detector.dark_per_window", dark_per_window),
            ] {
                if v.is_none() {
                    return Err(e.err(key, "missing required key"));
                }
            }
        }

        let attack = e.text("attack")?;
        let attack = attack
            .parse::<AttackLabel>()
            .map_err(|err| e.err("attack", err.to_string()))?;
        let mode = match e.map.get("detector.mode") {
            Some(entry) => Some(
                entry
                    .value
                    .parse::<GatingMode>()
                    .map_err(|err| e.err("detector.mode", err.to_string()))?,
            ),
            None => None,
        };
        let n_detectors = if e.has("n_detectors") {
            Some(e.integer("n_detectors")?)
        } else {
            None
        };
        let name = e.text("detector.name")?;
        if name.is_empty() || name.contains(',') {
            return Err(e.err("detector.name", "must be non-empty and contain no commas"));
        }

        Ok(Self {
            mu: e.number("mu")?,
            alpha_db_per_km: e.number("alpha_db_per_km")?,
            clock_hz: e.number("clock_hz")?,
            baseline_error: e.number("baseline_error")?,
            delay_n: e.integer("delay_n")?,
            attack,
            delta: e.opt_number("delta")?,
            n_detectors,
            f_fixed: e.opt_number("f_fixed")?,
            detector: DetectorFields {
                name: name.to_string(),
                efficiency,
                dark_per_window,
                dead_time_s: e.number("detector.dead_time_s")?,
                receiver_loss_db: e.number("detector.receiver_loss_db")?,
                mode,
            },
            upconv,
        })
    }

    /// Serializes in canonical key order. Numbers use the shortest
    /// round-trip representation.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("mu", self.mu.to_string());
        put("alpha_db_per_km", self.alpha_db_per_km.to_string());
        put("clock_hz", self.clock_hz.to_string());
        put("baseline_error", self.baseline_error.to_string());
        put("delay_n", self.delay_n.to_string());
        put("attack", self.attack.to_string());
        if let Some(d) = self.delta {
            put("delta", d.to_string());
        }
        if let Some(n) = self.n_detectors {
            put("n_detectors", n.to_string());
        }
        if let Some(f) = self.f_fixed {
            put("f_fixed", f.to_string());
        }
        let d = &self.detector;
        put("detector.name", d.name.clone());
        if let Some(v) = d.efficiency {
            put("detector.efficiency", v.to_string());
        }
        if let Some(v) = d.dark_per_window {
            put("detector.dark_per_window", v.to_string());
        }
        put("detector.dead_time_s", d.dead_time_s.to_string());
        put("detector.receiver_loss_db", d.receiver_loss_db.to_string());
        if let Some(m) = d.mode {
            put("detector.mode", m.to_string());
        }
        if let Some(u) = &self.upconv {
            put("upconv.a1", u.a1.to_string());
            put("upconv.a2", u.a2.to_string());
            for (i, b) in u.b.iter().enumerate() {
                put(&format!("upconv.b{i}"), b.to_string());
            }
            put("upconv.bandwidth_hz", u.bandwidth_hz.to_string());
            put("upconv.pump_mw", u.pump_mw.to_string());
        }
        out
    }

    /// Detector described by the file, building it from the up-conversion
    /// curve when one is given.
    pub fn detector_spec(&self) -> Result<DetectorSpec, CliError> {
        let d = &self.detector;
        let mut spec = match &self.upconv {
            Some(u) => make_detector_from_upconversion(
                &u.curve()?,
                u.pump_mw,
                d.dead_time_s,
                d.receiver_loss_db,
            )?,
            None => DetectorSpec::new(
                d.name.clone(),
                d.efficiency.unwrap_or_default(),
                d.dark_per_window.unwrap_or_default(),
                d.dead_time_s,
                d.receiver_loss_db,
                d.mode.unwrap_or_default(),
            )?,
        };
        spec.name = d.name.clone();
        if let Some(m) = d.mode {
            spec.mode = m;
        }
        Ok(spec)
    }

    /// Link scenario at `length_km` plus the attack it names.
    pub fn build(&self, length_km: f64) -> Result<(LinkScenario, AttackModel), CliError> {
        self.build_with_detector(length_km, self.detector_spec()?)
    }

    pub fn build_with_detector(
        &self,
        length_km: f64,
        detector: DetectorSpec,
    ) -> Result<(LinkScenario, AttackModel), CliError> {
        let n_detectors = self.n_detectors.unwrap_or(2);
        let scenario = LinkScenario {
            mu: self.mu,
            alpha_db_per_km: self.alpha_db_per_km,
            length_km,
            clock_hz: self.clock_hz,
            baseline_error: self.baseline_error,
            detector,
            n_detectors,
            delay_n: self.delay_n,
            dead_time_delta: self.delta.unwrap_or(1.0 / f64::from(n_detectors)),
        };
        scenario.validate()?;
        let attack = self.attack.model(self.delay_n)?;
        Ok((scenario, attack))
    }
}
