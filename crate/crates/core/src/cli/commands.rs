use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::detector::{
    dark_per_window, make_detector_from_upconversion, optimize_pump, DarkConvention,
    UpConversionCurve, PUMP_DOMAIN_MW,
};
use crate::link::LinkScenario;
use crate::montecarlo::{
    analytic_link, expected_ir_qber, simulate_intercept_resend, simulate_link, McConfig, McResult,
};
use crate::rate::{max_secure_distance, optimize_mu, secure_rate_with, ErrorCorrection, RatePoint};
use crate::security::{AttackLabel, AttackModel};

use super::presets::{DetectorChoice, PresetRegistry};
use super::scenario::ScenarioFile;
use super::{fmt_num, CliError, EXIT_INSECURE, EXIT_MC_CHECK, EXIT_OK};

/// Column names after the axis column.
pub const SWEEP_COLUMNS: [&str; 10] = [
    "p_signal",
    "p_dark",
    "p_click",
    "qber",
    "tau",
    "f",
    "sifted_bps",
    "secure_bps",
    "secure_deadtime_bps",
    "flags",
];

/// Header of a distance sweep.
pub const SWEEP_HEADER: &str =
    "L_km,p_signal,p_dark,p_click,qber,tau,f,sifted_bps,secure_bps,secure_deadtime_bps,flags";

/// |z| above this fails the Monte Carlo self-check.
pub const MC_Z_LIMIT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetectorSelect {
    #[default]
    Si,
    Ingaas,
    Both,
}

impl FromStr for DetectorSelect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "si" => Ok(Self::Si),
            "ingaas" => Ok(Self::Ingaas),
            "both" => Ok(Self::Both),
            other => Err(format!(
                "unknown detector {other:?} (expected si|ingaas|both)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FMode {
    #[default]
    Table,
    Fixed,
}

impl FromStr for FMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "table" => Ok(Self::Table),
            "fixed" => Ok(Self::Fixed),
            other => Err(format!("unknown f mode {other:?} (expected table|fixed)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Distance,
    Pump,
    Mu,
}

impl Axis {
    pub fn column(&self) -> &'static str {
        match self {
            Axis::Distance => "L_km",
            Axis::Pump => "pump_mw",
            Axis::Mu => "mu",
        }
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "distance" => Ok(Self::Distance),
            "pump" => Ok(Self::Pump),
            "mu" => Ok(Self::Mu),
            other => Err(format!(
                "unknown axis {other:?} (expected distance|pump|mu)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McMode {
    Link,
    Ir,
}

impl FromStr for McMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "link" => Ok(Self::Link),
            "ir" => Ok(Self::Ir),
            other => Err(format!("unknown mode {other:?} (expected link|ir)")),
        }
    }
}

/// Where a scenario comes from plus command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct ScenarioOptions {
    pub scenario: Option<PathBuf>,
    pub preset: Option<String>,
    pub detector: DetectorSelect,
    pub delay_n: Option<u32>,
    pub attack: Option<AttackLabel>,
    pub delta: Option<f64>,
    pub f_mode: FMode,
}

impl ScenarioOptions {
    pub fn preset(name: &str) -> Self {
        Self {
            preset: Some(name.to_string()),
            ..Self::default()
        }
    }

    /// One scenario per selected detector.
    pub fn resolve(&self) -> Result<Vec<ScenarioFile>, CliError> {
        let mut files = match (&self.scenario, &self.preset) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "--scenario and --preset are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Usage(
                    "one of --scenario or --preset is required".into(),
                ))
            }
            (Some(path), None) => {
                if self.detector != DetectorSelect::Si {
                    return Err(CliError::Usage("--detector applies to presets only".into()));
                }
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
                let file = ScenarioFile::parse(&text).map_err(|source| CliError::Parse {
                    path: path.display().to_string(),
                    source,
                })?;
                vec![file]
            }
            (None, Some(name)) => {
                let registry = PresetRegistry::from_env()?;
                let preset = registry.get(name)?;
                let n = self.delay_n.unwrap_or_else(|| preset.default_delay());
                let attack = self.attack.unwrap_or(AttackLabel::HybridNomem);
                let choices: &[DetectorChoice] = match self.detector {
                    DetectorSelect::Si => &[DetectorChoice::Si],
                    DetectorSelect::Ingaas => &[DetectorChoice::Ingaas],
                    DetectorSelect::Both => &[DetectorChoice::Si, DetectorChoice::Ingaas],
                };
                choices
                    .iter()
                    .map(|&c| preset.scenario(c, n, attack))
                    .collect()
            }
        };
        for f in &mut files {
            if let Some(n) = self.delay_n {
                f.delay_n = n;
            }
            if let Some(a) = self.attack {
                f.attack = a;
            }
            if let Some(d) = self.delta {
                f.delta = Some(d);
            }
        }
        Ok(files)
    }

    /// Exactly one scenario; `--detector both` is rejected.
    pub fn resolve_one(&self) -> Result<ScenarioFile, CliError> {
        let mut files = self.resolve()?;
        if files.len() != 1 {
            return Err(CliError::Usage(
                "this command takes a single detector".into(),
            ));
        }
        Ok(files.remove(0))
    }

    pub fn error_correction(&self, file: &ScenarioFile) -> ErrorCorrection {
        match self.f_mode {
            FMode::Table => ErrorCorrection::default(),
            FMode::Fixed => ErrorCorrection::Fixed(file.f_fixed.unwrap_or(1.16)),
        }
    }
}

struct Described<'a>(&'a ScenarioFile);

impl fmt::Display for Described<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, {}, N={}",
            self.0.detector.name, self.0.attack, self.0.delay_n
        )
    }
}

fn write_table(out: &mut dyn Write, title: &str, p: &RatePoint) -> std::io::Result<()> {
    writeln!(out, "{:<26}{}", "scenario", title)?;
    let rows: [(&str, f64); 10] = [
        ("L_km", p.length_km),
        ("p_signal", p.p_signal),
        ("p_dark", p.p_dark),
        ("p_click", p.p_click),
        ("qber", p.qber),
        ("tau", p.tau),
        ("f", p.f_used),
        ("sifted_bps", p.sifted_rate_hz),
        ("secure_bps", p.secure_rate_hz),
        ("secure_deadtime_bps", p.secure_rate_deadtime_hz),
    ];
    for (name, v) in rows {
        writeln!(out, "{name:<26}{}", fmt_num(v))?;
    }
    let flags = p.flags.to_string();
    writeln!(
        out,
        "{:<26}{}",
        "flags",
        if flags.is_empty() { "-" } else { &flags }
    )
}

fn csv_fields(axis_value: f64, p: &RatePoint) -> String {
    let nums = [
        axis_value,
        p.p_signal,
        p.p_dark,
        p.p_click,
        p.qber,
        p.tau,
        p.f_used,
        p.sifted_rate_hz,
        p.secure_rate_hz,
        p.secure_rate_deadtime_hz,
    ];
    let mut row: Vec<String> = nums.iter().map(|&v| fmt_num(v)).collect();
    row.push(p.flags.to_string());
    row.join(",")
}

fn sweep_header(axis: Axis, with_detector: bool) -> String {
    let mut h = String::from(axis.column());
    for c in SWEEP_COLUMNS {
        h.push(',');
        h.push_str(c);
    }
    if with_detector {
        h.push_str(",detector");
    }
    h
}

fn emit(csv_path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match csv_path {
        Some(path) => fs::write(path, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// `rate`: every RatePoint field at one distance.
pub fn cmd_rate(
    opts: &ScenarioOptions,
    length_km: f64,
    csv_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let files = opts.resolve()?;
    let with_detector = files.len() > 1;
    let mut csv = sweep_header(Axis::Distance, with_detector);
    csv.push('\n');
    let mut all_secure = true;
    for file in &files {
        let (s, a) = file.build(length_km)?;
        let p = secure_rate_with(&s, &a, &opts.error_correction(file))?;
        write_table(out, &Described(file).to_string(), &p)?;
        all_secure &= p.is_secure();
        csv.push_str(&csv_fields(length_km, &p));
        if with_detector {
            csv.push(',');
            csv.push_str(&file.detector.name);
        }
        csv.push('\n');
    }
    if let Some(path) = csv_path {
        fs::write(path, csv)?;
    }
    Ok(if all_secure { EXIT_OK } else { EXIT_INSECURE })
}

#[derive(Debug, Clone, Copy)]
pub struct SweepSpec {
    pub axis: Axis,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    /// Fixed distance for pump and μ sweeps.
    pub length_km: Option<f64>,
}

impl SweepSpec {
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(CliError::Usage(format!(
                "sweep needs lo < hi, got {} and {}",
                self.lo, self.hi
            )));
        }
        if self.steps < 2 {
            return Err(CliError::Usage("sweep needs at least 2 steps".into()));
        }
        let n = self.steps - 1;
        Ok((0..self.steps)
            .map(|i| {
                if i == n {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * i as f64 / n as f64
                }
            })
            .collect())
    }
}

fn sweep_point(
    file: &ScenarioFile,
    base: &LinkScenario,
    attack: &AttackModel,
    ec: &ErrorCorrection,
    curve: &UpConversionCurve,
    axis: Axis,
    x: f64,
) -> Result<RatePoint, CliError> {
    let s = match axis {
        Axis::Distance => base.with_length(x),
        Axis::Mu => base.with_mu(x),
        Axis::Pump => {
            let mut det = make_detector_from_upconversion(
                curve,
                x,
                file.detector.dead_time_s,
                file.detector.receiver_loss_db,
            )?;
            det.name = file.detector.name.clone();
            LinkScenario {
                detector: det,
                ..base.clone()
            }
        }
    };
    Ok(secure_rate_with(&s, attack, ec)?)
}

/// `sweep`: CSV rows over a grid, in axis order.
pub fn cmd_sweep(
    opts: &ScenarioOptions,
    spec: &SweepSpec,
    csv_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let grid = spec.grid()?;
    let length = match spec.axis {
        Axis::Distance => 0.0,
        _ => spec
            .length_km
            .ok_or_else(|| CliError::Usage("--length is required for pump and mu sweeps".into()))?,
    };
    if spec.axis == Axis::Pump {
        let (lo, hi) = PUMP_DOMAIN_MW;
        if spec.lo < lo || spec.hi > hi {
            return Err(CliError::Usage(format!(
                "pump sweep must stay within [{lo}, {hi}] mW"
            )));
        }
    }
    if spec.axis == Axis::Mu && spec.lo <= 0.0 {
        return Err(CliError::Usage("mu sweep needs lo > 0".into()));
    }
    let files = opts.resolve()?;
    let with_detector = files.len() > 1;
    let mut text = sweep_header(spec.axis, with_detector);
    text.push('\n');
    for file in &files {
        let curve = match &file.upconv {
            Some(u) => u.curve()?,
            None => UpConversionCurve::reference(),
        };
        let (base, attack) = match spec.axis {
            Axis::Pump => file.build_with_detector(
                length,
                make_detector_from_upconversion(
                    &curve,
                    spec.lo,
                    file.detector.dead_time_s,
                    file.detector.receiver_loss_db,
                )?,
            )?,
            _ => file.build(length)?,
        };
        let ec = opts.error_correction(file);
        let rows: Vec<RatePoint> = grid
            .par_iter()
            .map(|&x| sweep_point(file, &base, &attack, &ec, &curve, spec.axis, x))
            .collect::<Result<_, _>>()?;
        for (x, p) in grid.iter().zip(&rows) {
            text.push_str(&csv_fields(*x, p));
            if with_detector {
                text.push(',');
                text.push_str(&file.detector.name);
            }
            text.push('\n');
        }
    }
    emit(csv_path, &text, out)?;
    Ok(EXIT_OK)
}

/// `max-distance`: one line per detector.
pub fn cmd_max_distance(
    opts: &ScenarioOptions,
    r_min: f64,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut code = EXIT_OK;
    for file in opts.resolve()? {
        let (s, a) = file.build(0.0)?;
        match max_secure_distance(&s, &a, &opts.error_correction(&file), r_min) {
            Ok(km) => writeln!(
                out,
                "max secure distance: {km:.2} km ({}, r_min={r_min} b/s)",
                Described(&file)
            )?,
            Err(crate::Error::NoSecureDistance) => {
                writeln!(out, "no secure distance ({})", Described(&file))?;
                code = EXIT_INSECURE;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(code)
}

/// `optimize-mu`: best mean photon number at one distance.
pub fn cmd_optimize_mu(
    opts: &ScenarioOptions,
    length_km: f64,
    mu_range: (f64, f64),
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut code = EXIT_OK;
    for file in opts.resolve()? {
        let (s, a) = file.build(length_km)?;
        let best = optimize_mu(&s, &a, &opts.error_correction(&file), mu_range)?;
        writeln!(out, "{:<26}{}", "mu_opt", fmt_num(best.mu))?;
        write_table(out, &Described(&file).to_string(), &best.point)?;
        if !best.point.is_secure() {
            code = EXIT_INSECURE;
        }
    }
    Ok(code)
}

/// `optimize-pump`: NEP-optimal pump of the scenario's up-converter, or of
/// the reference curve when no scenario is given.
pub fn cmd_optimize_pump(
    scenario: Option<&Path>,
    pump_range: (f64, f64),
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let curve = match scenario {
        Some(path) => {
            let opts = ScenarioOptions {
                scenario: Some(path.to_path_buf()),
                ..Default::default()
            };
            match opts.resolve_one()?.upconv {
                Some(u) => u.curve()?,
                None => return Err(CliError::Usage("scenario has no upconv.* keys".into())),
            }
        }
        None => UpConversionCurve::reference(),
    };
    let op = optimize_pump(&curve, pump_range)?;
    let d = dark_per_window(
        op.dark_rate_hz,
        DarkConvention::PerMode {
            bandwidth_hz: curve.bandwidth_hz(),
        },
    )?;
    for (name, v) in [
        ("pump_mw", op.pump_mw),
        ("efficiency", op.efficiency),
        ("dark_rate_hz", op.dark_rate_hz),
        ("nep", op.nep),
        ("dark_per_window", d),
    ] {
        writeln!(out, "{name:<26}{}", fmt_num(v))?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone)]
pub struct McOptions {
    pub length_km: f64,
    pub n_pulses: u64,
    pub seed: u64,
    pub mode: McMode,
    pub ir_fraction: f64,
    pub eve_delay_m: u32,
    /// Bob's delay set; defaults to the scenario's N.
    pub bob_delays: Option<Vec<u32>>,
}

/// One row of the Monte Carlo report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McRow {
    pub quantity: &'static str,
    pub estimate: f64,
    pub se: f64,
    pub analytic: f64,
    pub z: f64,
}

/// z-score of `estimate` against `analytic` with the standard error
/// implied by the analytic proportion over `trials`.
pub fn null_z(estimate: f64, analytic: f64, trials: u64) -> f64 {
    let se = (analytic * (1.0 - analytic) / trials as f64).sqrt();
    if se > 0.0 {
        (estimate - analytic) / se
    } else if estimate == analytic {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn mc_rows(result: &McResult, analytic_click: f64, analytic_qber: f64) -> Vec<McRow> {
    let mut rows = vec![McRow {
        quantity: "p_click",
        estimate: result.p_click.value,
        se: result.p_click.se,
        analytic: analytic_click,
        z: null_z(result.p_click.value, analytic_click, result.n_pulses),
    }];
    if let Some(q) = result.qber {
        rows.push(McRow {
            quantity: "qber",
            estimate: q.value,
            se: q.se,
            analytic: analytic_qber,
            z: null_z(q.value, analytic_qber, result.clicks),
        });
    }
    rows
}

/// `mc`: Monte Carlo estimate against the analytic values.
pub fn cmd_mc(
    opts: &ScenarioOptions,
    mc: &McOptions,
    csv_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let file = opts.resolve_one()?;
    let (s, _) = file.build(mc.length_km)?;
    let mut cfg = McConfig::link(s.clone(), mc.n_pulses, mc.seed);
    if let Some(delays) = &mc.bob_delays {
        cfg.bob_delays = delays.clone();
    }
    let (analytic_click, link_qber) = analytic_link(&s)?;
    let (result, analytic_qber) = match mc.mode {
        McMode::Link => (simulate_link(&cfg)?, link_qber),
        McMode::Ir => {
            cfg.ir_fraction = mc.ir_fraction;
            cfg.eve_delay_m = mc.eve_delay_m;
            (simulate_intercept_resend(&cfg)?, expected_ir_qber(&cfg)?)
        }
    };
    let rows = mc_rows(&result, analytic_click, analytic_qber);

    writeln!(
        out,
        "mc {} ({}), n={}, seed={}, clicks={}, errors={}",
        match mc.mode {
            McMode::Link => "link",
            McMode::Ir => "ir",
        },
        Described(&file),
        result.n_pulses,
        mc.seed,
        result.clicks,
        result.errors
    )?;
    writeln!(
        out,
        "{:<10}{:>24}{:>24}{:>24}{:>12}",
        "quantity", "estimate", "se", "analytic", "z"
    )?;
    let mut csv = String::from("quantity,estimate,se,analytic,z\n");
    for r in &rows {
        writeln!(
            out,
            "{:<10}{:>24}{:>24}{:>24}{:>12.3}",
            r.quantity,
            fmt_num(r.estimate),
            fmt_num(r.se),
            fmt_num(r.analytic),
            r.z
        )?;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.quantity,
            fmt_num(r.estimate),
            fmt_num(r.se),
            fmt_num(r.analytic),
            fmt_num(r.z)
        ));
    }
    if result.qber.is_none() {
        writeln!(out, "qber      no clicks")?;
    }
    if let Some(path) = csv_path {
        fs::write(path, csv)?;
    }
    let failed = rows.iter().any(|r| r.z.abs() > MC_Z_LIMIT);
    if failed {
        writeln!(out, "self-check failed: |z| > {MC_Z_LIMIT}")?;
        return Ok(EXIT_MC_CHECK);
    }
    Ok(EXIT_OK)
}

/// `presets list`.
pub fn cmd_presets_list(out: &mut dyn Write) -> Result<i32, CliError> {
    let reg = PresetRegistry::from_env()?;
    writeln!(
        out,
        "{:<14}{:>6}{:>10}{:>10}{:>8}{:>8}  N",
        "name", "mu", "nu", "d1", "alpha", "f"
    )?;
    for p in reg.iter() {
        let ns: Vec<String> = p.n_set.iter().map(u32::to_string).collect();
        writeln!(
            out,
            "{:<14}{:>6}{:>10}{:>10}{:>8}{:>8}  {}",
            p.name,
            p.mu,
            format!("{:e}", p.nu),
            format!("{:e}", p.d1),
            p.alpha,
            p.f,
            ns.join(",")
        )?;
    }
    Ok(EXIT_OK)
}
