//! Single-photon detector models.
//!
//! Two families are covered: an InGaAs/InP APD described directly by its
//! efficiency and dark counts per gate, and a frequency up-conversion stage
//! (PPLN waveguide) followed by a silicon APD, whose efficiency and dark
//! count rate are empirical functions of pump power.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::search::scan_then_refine;

/// Pump powers (mW) over which the up-conversion fits are trusted.
pub const PUMP_DOMAIN_MW: (f64, f64) = (0.0, 30.0);

/// Convergence target for [`optimize_pump`], in mW.
pub const PUMP_TOLERANCE_MW: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GatingMode {
    Gated,
    #[default]
    Nongated,
}

impl fmt::Display for GatingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatingMode::Gated => "gated",
            GatingMode::Nongated => "nongated",
        })
    }
}

impl FromStr for GatingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gated" => Ok(GatingMode::Gated),
            "nongated" => Ok(GatingMode::Nongated),
            other => Err(Error::InvalidParameter {
                name: "detector.mode",
                reason: format!("expected gated|nongated, got {other:?}"),
            }),
        }
    }
}

/// Parameters of one detector as seen by the link model.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub name: String,
    /// Quantum efficiency η.
    pub efficiency: f64,
    /// Dark-click probability per measurement window, d.
    pub dark_per_window: f64,
    /// Dead time t_d in seconds.
    pub dead_time_s: f64,
    /// Extra loss inside the receiver, L_r, in dB.
    pub receiver_loss_db: f64,
    pub mode: GatingMode,
}

impl DetectorSpec {
    pub fn new(
        name: impl Into<String>,
        efficiency: f64,
        dark_per_window: f64,
        dead_time_s: f64,
        receiver_loss_db: f64,
        mode: GatingMode,
    ) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            efficiency,
            dark_per_window,
            dead_time_s,
            receiver_loss_db,
            mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::Domain {
                what: "detector efficiency",
                value: self.efficiency,
            });
        }
        // Two detectors must keep 2d < 1.
        if !(0.0..0.5).contains(&self.dark_per_window) {
            return Err(Error::Domain {
                what: "dark counts per window",
                value: self.dark_per_window,
            });
        }
        if !(self.dead_time_s >= 0.0 && self.dead_time_s.is_finite()) {
            return Err(Error::Domain {
                what: "dead time",
                value: self.dead_time_s,
            });
        }
        if !(self.receiver_loss_db >= 0.0 && self.receiver_loss_db.is_finite()) {
            return Err(Error::Domain {
                what: "receiver loss",
                value: self.receiver_loss_db,
            });
        }
        Ok(())
    }

    /// Gated InGaAs/InP APD with the standard parameter-set values
    /// (η = 0.155, L_r = 3.0 dB, t_d = 200 ns) and the given d.
    pub fn ingaas(dark_per_window: f64) -> Result<Self> {
        Self::new(
            "ingaas",
            0.155,
            dark_per_window,
            200e-9,
            3.0,
            GatingMode::Gated,
        )
    }

    /// Up-conversion Si-APD with the standard parameter-set values
    /// (η = 0.35, d = 3.5e-8, L_r = 2.1 dB, t_d = 45 ns).
    pub fn si_upconversion() -> Self {
        Self {
            name: "si".to_string(),
            efficiency: 0.35,
            dark_per_window: 3.5e-8,
            dead_time_s: 45e-9,
            receiver_loss_db: 2.1,
            mode: GatingMode::Nongated,
        }
    }
}

/// Empirical pump-power dependence of an up-conversion stage.
///
/// Efficiency follows `a1 · sin²(√(a2 · p))`, dark counts follow the quartic
/// `b0 + b1 p + … + b4 p⁴` (s⁻¹), with `p` in mW.
#[derive(Debug, Clone, PartialEq)]
pub struct UpConversionCurve {
    a1: f64,
    a2: f64,
    b: [f64; 5],
    bandwidth_hz: f64,
}

impl UpConversionCurve {
    pub fn new(a1: f64, a2: f64, b: [f64; 5], bandwidth_hz: f64) -> Result<Self> {
        if !(a1 > 0.0 && a1 <= 1.0) {
            return Err(Error::Domain {
                what: "up-conversion peak efficiency a1",
                value: a1,
            });
        }
        if !(a2 > 0.0 && a2.is_finite()) {
            return Err(Error::Domain {
                what: "up-conversion scale a2",
                value: a2,
            });
        }
        if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
            return Err(Error::Domain {
                what: "waveguide bandwidth",
                value: bandwidth_hz,
            });
        }
        let curve = Self {
            a1,
            a2,
            b,
            bandwidth_hz,
        };
        const SAMPLES: usize = 30_001;
        let (lo, hi) = PUMP_DOMAIN_MW;
        for i in 0..SAMPLES {
            let p = lo + (hi - lo) * i as f64 / (SAMPLES - 1) as f64;
            let rate = curve.polynomial(p);
            if !(rate >= 0.0) {
                return Err(Error::ModelRange {
                    what: "dark-count polynomial",
                    at: p,
                    value: rate,
                });
            }
        }
        Ok(curve)
    }

    /// PPLN fit: a1 = 0.465, a2 = 79.75 mW⁻¹,
    /// b = (50, 826.4, 110.3, −0.403, 0.00065), B_d = 50 GHz.
    pub fn reference() -> Self {
        Self::new(0.465, 79.75, [50.0, 826.4, 110.3, -0.403, 0.00065], 50e9)
            .expect("reference curve is valid")
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }

    pub fn coefficients(&self) -> [f64; 5] {
        self.b
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    /// Pump power of the first efficiency maximum, (π/2)²/a2.
    pub fn first_peak_mw(&self) -> f64 {
        FRAC_PI_2 * FRAC_PI_2 / self.a2
    }

    fn polynomial(&self, p: f64) -> f64 {
        self.b.iter().rev().fold(0.0, |acc, &c| acc * p + c)
    }
}

fn check_pump(pump_mw: f64) -> Result<()> {
    let (lo, hi) = PUMP_DOMAIN_MW;
    if !(lo..=hi).contains(&pump_mw) {
        return Err(Error::Domain {
            what: "pump power (mW)",
            value: pump_mw,
        });
    }
    Ok(())
}

/// Conversion efficiency at the given pump power.
pub fn up_efficiency(curve: &UpConversionCurve, pump_mw: f64) -> Result<f64> {
    check_pump(pump_mw)?;
    let s = (curve.a2 * pump_mw).sqrt().sin();
    Ok(curve.a1 * s * s)
}

/// Dark-count rate (s⁻¹) of the up-converter at the given pump power.
pub fn up_dark_rate(curve: &UpConversionCurve, pump_mw: f64) -> Result<f64> {
    check_pump(pump_mw)?;
    let rate = curve.polynomial(pump_mw);
    if rate < 0.0 {
        return Err(Error::ModelRange {
            what: "dark-count polynomial",
            at: pump_mw,
            value: rate,
        });
    }
    Ok(rate)
}

/// How a dark-count rate maps onto a measurement window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DarkConvention {
    /// Up-converter: rate divided by the waveguide bandwidth B_d.
    PerMode { bandwidth_hz: f64 },
    /// Gated APD: rate times the gate width 1/B.
    PerGate { bit_rate_hz: f64 },
}

pub fn dark_per_window(dark_rate_hz: f64, convention: DarkConvention) -> Result<f64> {
    if !(dark_rate_hz >= 0.0) {
        return Err(Error::Domain {
            what: "dark-count rate",
            value: dark_rate_hz,
        });
    }
    let divisor = match convention {
        DarkConvention::PerMode { bandwidth_hz } => bandwidth_hz,
        DarkConvention::PerGate { bit_rate_hz } => bit_rate_hz,
    };
    if !(divisor > 0.0) {
        return Err(Error::Domain {
            what: "bandwidth or bit rate",
            value: divisor,
        });
    }
    Ok(dark_rate_hz / divisor)
}

/// Normalized noise-equivalent power √(2D)/η. Lower is better.
pub fn nep(dark_rate_hz: f64, efficiency: f64) -> Result<f64> {
    if !(efficiency > 0.0) {
        return Err(Error::Domain {
            what: "efficiency",
            value: efficiency,
        });
    }
    if !(dark_rate_hz >= 0.0) {
        return Err(Error::Domain {
            what: "dark-count rate",
            value: dark_rate_hz,
        });
    }
    Ok((2.0 * dark_rate_hz).sqrt() / efficiency)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpOperatingPoint {
    pub pump_mw: f64,
    pub efficiency: f64,
    pub dark_rate_hz: f64,
    pub nep: f64,
}

/// Pump power minimizing NEP within `range`.
///
/// NEP diverges at every zero of the efficiency curve, so the range is
/// scanned first and golden-section search refines the best basin to
/// [`PUMP_TOLERANCE_MW`].
pub fn optimize_pump(curve: &UpConversionCurve, range: (f64, f64)) -> Result<PumpOperatingPoint> {
    let (lo, hi) = range;
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::InvalidRange { lo, hi });
    }
    check_pump(lo)?;
    check_pump(hi)?;

    let objective = |p: f64| -> f64 {
        let eta = up_efficiency(curve, p).unwrap_or(0.0);
        match up_dark_rate(curve, p) {
            Ok(d) if eta > 0.0 => (2.0 * d).sqrt() / eta,
            _ => f64::INFINITY,
        }
    };
    let (pump_mw, value) = scan_then_refine(objective, lo, hi, 1024, PUMP_TOLERANCE_MW)?;
    if !value.is_finite() {
        return Err(Error::NoFeasiblePoint(
            "up-conversion efficiency is zero across the pump range",
        ));
    }
    let efficiency = up_efficiency(curve, pump_mw)?;
    let dark_rate_hz = up_dark_rate(curve, pump_mw)?;
    Ok(PumpOperatingPoint {
        pump_mw,
        efficiency,
        dark_rate_hz,
        nep: nep(dark_rate_hz, efficiency)?,
    })
}

/// Si-APD detector behind an up-converter pumped at `pump_mw`.
pub fn make_detector_from_upconversion(
    curve: &UpConversionCurve,
    pump_mw: f64,
    dead_time_s: f64,
    receiver_loss_db: f64,
) -> Result<DetectorSpec> {
    let efficiency = up_efficiency(curve, pump_mw)?;
    let rate = up_dark_rate(curve, pump_mw)?;
    let d = dark_per_window(
        rate,
        DarkConvention::PerMode {
            bandwidth_hz: curve.bandwidth_hz,
        },
    )?;
    DetectorSpec::new(
        "si-upconversion",
        efficiency,
        d,
        dead_time_s,
        receiver_loss_db,
        GatingMode::Nongated,
    )
}
