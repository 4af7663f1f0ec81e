//! Standard parameter sets.
//!
//! Each preset carries both detector variants: subscript 1 is the gated
//! InGaAs/InP APD, subscript 2 the up-conversion Si-APD. Presets can be
//! extended or overridden by `<name>.preset` files in the directory named by
//! `DPSRK_PRESET_DIR`, using the same `key = value` layout as the files under
//! `presets/` in this crate. Values may be written as plain decimals or in
//! scientific notation such as `9.2*10^-6`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::detector::GatingMode;
use crate::security::AttackLabel;

use super::scenario::{parse_decimal, DetectorFields, ScenarioFile};
use super::CliError;

pub const PRESET_DIR_ENV: &str = "DPSRK_PRESET_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorChoice {
    Si,
    Ingaas,
}

impl DetectorChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectorChoice::Si => "si",
            DetectorChoice::Ingaas => "ingaas",
        }
    }
}

impl fmt::Display for DetectorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "si" => Ok(DetectorChoice::Si),
            "ingaas" => Ok(DetectorChoice::Ingaas),
            other => Err(format!("unknown detector {other:?} (expected si|ingaas)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: String,
    pub b: f64,
    pub mu: f64,
    pub f: f64,
    pub nu: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub alpha: f64,
    pub lr1: f64,
    pub lr2: f64,
    pub d1: f64,
    pub d2: f64,
    pub n_set: Vec<u32>,
    pub td1: f64,
    pub td2: f64,
}

/// Field names in file order.
pub const PRESET_KEYS: [&str; 14] = [
    "b", "mu", "f", "nu", "eta1", "eta2", "alpha", "lr1", "lr2", "d1", "d2", "n_set", "td1", "td2",
];

impl Preset {
    fn standard(name: &str, mu: f64, nu: f64, d1: f64) -> Self {
        Self {
            name: name.to_string(),
            b: 0.01,
            mu,
            f: 1.16,
            nu,
            eta1: 0.155,
            eta2: 0.35,
            alpha: 0.21,
            lr1: 3.0,
            lr2: 2.1,
            d1,
            d2: 3.5e-8,
            n_set: vec![1, 10, 100],
            td1: 200e-9,
            td2: 45e-9,
        }
    }

    /// Numeric value of a scalar field.
    pub fn field(&self, key: &str) -> Option<f64> {
        Some(match key {
            "b" => self.b,
            "mu" => self.mu,
            "f" => self.f,
            "nu" => self.nu,
            "eta1" => self.eta1,
            "eta2" => self.eta2,
            "alpha" => self.alpha,
            "lr1" => self.lr1,
            "lr2" => self.lr2,
            "d1" => self.d1,
            "d2" => self.d2,
            "td1" => self.td1,
            "td2" => self.td2,
            _ => return None,
        })
    }

    /// Default Bob delay: the largest of the preset's N values.
    pub fn default_delay(&self) -> u32 {
        self.n_set.iter().copied().max().unwrap_or(1)
    }

    /// Scenario for one detector variant.
    pub fn scenario(
        &self,
        detector: DetectorChoice,
        delay_n: u32,
        attack: AttackLabel,
    ) -> ScenarioFile {
        let fields = match detector {
            DetectorChoice::Si => DetectorFields {
                name: "si".into(),
                efficiency: Some(self.eta2),
                dark_per_window: Some(self.d2),
                dead_time_s: self.td2,
                receiver_loss_db: self.lr2,
                mode: Some(GatingMode::Nongated),
            },
            DetectorChoice::Ingaas => DetectorFields {
                name: "ingaas".into(),
                efficiency: Some(self.eta1),
                dark_per_window: Some(self.d1),
                dead_time_s: self.td1,
                receiver_loss_db: self.lr1,
                mode: Some(GatingMode::Gated),
            },
        };
        ScenarioFile {
            mu: self.mu,
            alpha_db_per_km: self.alpha,
            clock_hz: self.nu,
            baseline_error: self.b,
            delay_n,
            attack,
            delta: None,
            n_detectors: None,
            f_fixed: Some(self.f),
            detector: fields,
            upconv: None,
        }
    }

    /// Parses the `key = value` preset layout.
    pub fn parse(name: &str, text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
            let k = k.trim();
            if !PRESET_KEYS.contains(&k) {
                return Err(format!("line {}: unknown key {k:?}", i + 1));
            }
            if values.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(format!("line {}: duplicate key {k:?}", i + 1));
            }
        }
        let get = |k: &str| -> Result<f64, String> {
            let raw = values.get(k).ok_or_else(|| format!("missing key {k:?}"))?;
            parse_sci_number(raw).ok_or_else(|| format!("key {k:?}: invalid number {raw:?}"))
        };
        let n_raw = values.get("n_set").ok_or("missing key \"n_set\"")?;
        let n_set = n_raw
            .split(',')
            .map(|s| s.trim().parse::<u32>().ok().filter(|&n| n >= 1))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| format!("key \"n_set\": invalid list {n_raw:?}"))?;
        Ok(Self {
            name: name.to_string(),
            b: get("b")?,
            mu: get("mu")?,
            f: get("f")?,
            nu: get("nu")?,
            eta1: get("eta1")?,
            eta2: get("eta2")?,
            alpha: get("alpha")?,
            lr1: get("lr1")?,
            lr2: get("lr2")?,
            d1: get("d1")?,
            d2: get("d2")?,
            n_set,
            td1: get("td1")?,
            td2: get("td2")?,
        })
    }
}

/// Parses `m*10^e` (scientific notation) or a plain decimal. The mantissa and
/// exponent are joined textually so the result is the correctly rounded
/// value of `m`e`e`.
pub fn parse_sci_number(raw: &str) -> Option<f64> {
    let compact: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
    match compact.split_once("*10^") {
        Some((mantissa, exp)) => {
            let exp = exp.trim_start_matches('{').trim_end_matches('}');
            exp.parse::<i32>().ok()?;
            parse_decimal(mantissa)?;
            parse_decimal(&format!("{mantissa}e{exp}"))
        }
        None => parse_decimal(&compact),
    }
}

#[derive(Debug, Clone)]
pub struct PresetRegistry {
    presets: BTreeMap<String, Preset>,
}

impl PresetRegistry {
    /// The ten standard sets plus `fig3-lowloss`, which keeps fig3
    /// but uses α = 0.2 dB/km and 1 dB receiver loss for both detectors.
    pub fn builtin() -> Self {
        let list = [
            Preset::standard("fig3", 0.2, 1e9, 9.2e-6),
            Preset::standard("fig4", 0.77, 10e9, 2.0e-3),
            Preset::standard("fig5", 0.2, 10e9, 2.0e-3),
            Preset::standard("fig6", 0.77, 1e9, 9.2e-6),
            Preset::standard("fig7", 0.2, 10e9, 9.2e-6),
            Preset::standard("fig8", 0.77, 1e9, 2.0e-3),
            Preset::standard("fig9", 0.05, 1e9, 9.2e-6),
            Preset::standard("fig10", 0.05, 10e9, 9.2e-6),
            Preset::standard("fig11", 0.77, 10e9, 9.2e-6),
            Preset::standard("fig12", 0.2, 1e9, 2.0e-3),
            Preset {
                alpha: 0.2,
                lr1: 1.0,
                lr2: 1.0,
                ..Preset::standard("fig3-lowloss", 0.2, 1e9, 9.2e-6)
            },
        ];
        Self {
            presets: list.into_iter().map(|p| (p.name.clone(), p)).collect(),
        }
    }

    /// Built-ins overlaid with `*.preset` files from `dir`.
    pub fn with_dir(dir: &Path) -> Result<Self, CliError> {
        let mut reg = Self::builtin();
        let entries = std::fs::read_dir(dir).map_err(|e| {
            CliError::Usage(format!(
                "cannot read preset directory {}: {e}",
                dir.display()
            ))
        })?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "preset"))
            .collect();
        paths.sort();
        for path in paths {
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| CliError::Usage(format!("bad preset file name {}", path.display())))?
                .to_string();
            let text = std::fs::read_to_string(&path)?;
            let preset = Preset::parse(&name, &text)
                .map_err(|m| CliError::Usage(format!("{}: {m}", path.display())))?;
            reg.presets.insert(name, preset);
        }
        Ok(reg)
    }

    /// Built-ins, or the overlay named by `DPSRK_PRESET_DIR` when set.
    pub fn from_env() -> Result<Self, CliError> {
        match std::env::var_os(PRESET_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Self::with_dir(Path::new(&dir)),
            _ => Ok(Self::builtin()),
        }
    }

    pub fn get(&self, name: &str) -> Result<&Preset, CliError> {
        self.presets.get(name).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown preset {name:?}; available: {}",
                self.names().join(", ")
            ))
        })
    }

    /// Names in natural order.
    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.presets.keys().cloned().collect();
        names.sort_by_key(|n| natural_key(n));
        names
    }

    pub fn iter(&self) -> impl Iterator<Item = &Preset> {
        let order = self.names();
        order.into_iter().map(move |n| &self.presets[&n])
    }
}

fn natural_key(name: &str) -> (String, u64, String) {
    let prefix: String = name.chars().take_while(|c| !c.is_ascii_digit()).collect();
    let rest = &name[prefix.len()..];
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    let suffix = rest[digits.len()..].to_string();
    (prefix, digits.parse().unwrap_or(0), suffix)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_notation() {
        assert_eq!(parse_sci_number("9.2*10^-6"), Some(9.2e-6));
        assert_eq!(parse_sci_number("10*10^{9}"), Some(10e9));
        assert_eq!(parse_sci_number("200 * 10^-9"), Some(200e-9));
        assert_eq!(parse_sci_number("0.155"), Some(0.155));
        assert_eq!(parse_sci_number("1*10^x"), None);
        assert_eq!(parse_sci_number("abc"), None);
    }

    #[test]
    fn registry_order_and_lookup() {
        let reg = PresetRegistry::builtin();
        let names = reg.names();
        assert_eq!(names[0], "fig3");
        assert_eq!(names[1], "fig3-lowloss");
        assert_eq!(names.last().unwrap(), "fig12");
        assert!(reg.get("fig99").is_err());
        assert_eq!(reg.get("fig4").unwrap().nu, 1e10);
        assert_eq!(reg.get("fig3").unwrap().default_delay(), 100);
    }

    #[test]
    fn preset_scenario_detectors() {
        let p = PresetRegistry::builtin().get("fig3").unwrap().clone();
        let si = p.scenario(DetectorChoice::Si, 100, AttackLabel::HybridNomem);
        let (s, _) = si.build(0.0).unwrap();
        assert_eq!(s.detector.efficiency, 0.35);
        assert_eq!(s.detector.dead_time_s, 45e-9);
        let ig = p.scenario(DetectorChoice::Ingaas, 100, AttackLabel::HybridNomem);
        let (s, _) = ig.build(0.0).unwrap();
        assert_eq!(s.detector.dark_per_window, 9.2e-6);
        assert_eq!(s.detector.mode, GatingMode::Gated);
    }

    #[test]
    fn preset_parse_errors() {
        assert!(Preset::parse("x", "b = 0.01\n").is_err());
        assert!(Preset::parse("x", "zz = 1\n").is_err());
    }
}
