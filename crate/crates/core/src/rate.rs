//! Secure key rate assembly, dead-time saturation, μ optimization and the
//! maximum secure distance solver.

use std::fmt;

use crate::error::{Error, Result};
use crate::link::{p_click, p_dark, p_signal, qber_from, LinkScenario};
use crate::search::{bisect_boundary, scan_then_refine};
use crate::security::{
    bs_transmission, f_ec, poisson_multiphoton, shrink_hybrid, shrink_individual,
    single_photon_fraction, surviving_fraction, AttackKind, AttackModel, EcTable,
};

/// Bisection resolution of [`max_secure_distance`], km.
pub const DISTANCE_TOLERANCE_KM: f64 = 0.01;
/// Convergence target of [`optimize_mu`].
pub const MU_TOLERANCE: f64 = 1e-5;
/// Dead time removing more than this fraction of the rate marks a point
/// as dead-time limited.
pub const DEADTIME_LIMITED_LOSS: f64 = 0.1;

/// How the error-correction inefficiency f(e) is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorCorrection {
    /// Interpolate a breakpoint table; errors above it yield zero rate.
    Table(EcTable),
    /// Constant f regardless of e.
    Fixed(f64),
}

impl Default for ErrorCorrection {
    fn default() -> Self {
        ErrorCorrection::Table(EcTable::cascade())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RateFlags {
    pub clamped: bool,
    pub insecure: bool,
    pub above_ec_range: bool,
    pub deadtime_limited: bool,
}

impl RateFlags {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

/// `|`-separated flag names, empty when no flag is set.
impl fmt::Display for RateFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = [
            (self.clamped, "clamped"),
            (self.insecure, "insecure"),
            (self.above_ec_range, "above_ec_range"),
            (self.deadtime_limited, "deadtime_limited"),
        ];
        let mut first = true;
        for (set, name) in names {
            if set {
                if !first {
                    f.write_str("|")?;
                }
                f.write_str(name)?;
                first = false;
            }
        }
        Ok(())
    }
}

/// Every derived quantity at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub length_km: f64,
    pub p_signal: f64,
    pub p_dark: f64,
    pub p_click: f64,
    pub qber: f64,
    pub tau: f64,
    /// NaN when e lies above the error-correction table.
    pub f_used: f64,
    pub sifted_rate_hz: f64,
    pub secure_rate_hz: f64,
    pub secure_rate_deadtime_hz: f64,
    pub flags: RateFlags,
}

impl RatePoint {
    pub fn is_secure(&self) -> bool {
        !self.flags.insecure && self.secure_rate_hz > 0.0
    }
}

/// Binary entropy with H(0) = H(1) = 0.
pub fn binary_entropy(e: f64) -> f64 {
    if e <= 0.0 || e >= 1.0 {
        return 0.0;
    }
    -(e * e.log2() + (1.0 - e) * (1.0 - e).log2())
}

/// Secure key rate with the cascade error-correction table.
pub fn secure_rate(s: &LinkScenario, a: &AttackModel) -> Result<RatePoint> {
    secure_rate_with(s, a, &ErrorCorrection::default())
}

/// R = ν p_click {τ − f(e) H(e)}, clamped at 0, plus its dead-time
/// corrected counterpart.
pub fn secure_rate_with(
    s: &LinkScenario,
    a: &AttackModel,
    ec: &ErrorCorrection,
) -> Result<RatePoint> {
    s.validate()?;
    let signal = p_signal(s);
    let dark = p_dark(s)?;
    let click = p_click(s)?;
    let mut flags = RateFlags {
        clamped: click.clamped,
        ..RateFlags::default()
    };
    let sifted = s.clock_hz * click.value;

    let qber = match qber_from(signal.value, dark, s.baseline_error) {
        Ok(e) => e,
        Err(Error::UndefinedQber) => {
            flags.insecure = true;
            return Ok(RatePoint {
                length_km: s.length_km,
                p_signal: signal.value,
                p_dark: dark,
                p_click: click.value,
                qber: 0.5,
                tau: 0.0,
                f_used: f64::NAN,
                sifted_rate_hz: 0.0,
                secure_rate_hz: 0.0,
                secure_rate_deadtime_hz: 0.0,
                flags,
            });
        }
        Err(other) => return Err(other),
    };

    let f_used = match ec {
        ErrorCorrection::Fixed(f) => *f,
        ErrorCorrection::Table(t) => match f_ec(t, qber) {
            Ok(f) => f,
            Err(Error::AboveEcRange(_)) => {
                flags.above_ec_range = true;
                f64::NAN
            }
            Err(other) => return Err(other),
        },
    };

    let tau = match a.kind {
        AttackKind::HybridBsIr => {
            let eta_bs = bs_transmission(&s.detector, s.alpha_db_per_km, s.length_km);
            let gamma = surviving_fraction(s.mu, eta_bs, a.delay_n, a.eve_memory);
            shrink_hybrid(qber, gamma, a.delay_n)
        }
        AttackKind::IndividualWithMemory | AttackKind::IndividualNoMemory => {
            let beta = single_photon_fraction(click.value, poisson_multiphoton(s.mu))?;
            if beta > 0.0 {
                shrink_individual(qber, beta, a.eve_memory)?
            } else {
                0.0
            }
        }
    };

    let secure = if flags.above_ec_range {
        0.0
    } else {
        (sifted * (tau - f_used * binary_entropy(qber))).max(0.0)
    };
    if !(secure > 0.0) {
        flags.insecure = true;
    }
    let factor = dead_time_factor_for(s, click.value);
    if factor < 1.0 - DEADTIME_LIMITED_LOSS {
        flags.deadtime_limited = true;
    }

    Ok(RatePoint {
        length_km: s.length_km,
        p_signal: signal.value,
        p_dark: dark,
        p_click: click.value,
        qber,
        tau,
        f_used,
        sifted_rate_hz: sifted,
        secure_rate_hz: secure,
        secure_rate_deadtime_hz: secure * factor,
        flags,
    })
}

/// Probability that the clicked detector is live: exp(−δ ν p_click t_d).
pub fn dead_time_factor(s: &LinkScenario) -> Result<f64> {
    Ok(dead_time_factor_for(s, p_click(s)?.value))
}

fn dead_time_factor_for(s: &LinkScenario, p_click: f64) -> f64 {
    (-s.dead_time_delta * s.clock_hz * p_click * s.detector.dead_time_s).exp()
}

/// Ideal single-photon BB84 comparison curve, ½ ν p_signal.
pub fn bb84_reference(s: &LinkScenario) -> f64 {
    0.5 * s.clock_hz * p_signal(s).value
}

/// Small-error limit of the hybrid-attack rate: ν(1 − μ/N) p_signal without
/// memory, ν(1 − 2μ) p_signal with.
pub fn asymptotic_rate(s: &LinkScenario, a: &AttackModel) -> f64 {
    let kept = if a.eve_memory {
        1.0 - 2.0 * s.mu
    } else {
        1.0 - s.mu / f64::from(a.delay_n)
    };
    (s.clock_hz * kept * p_signal(s).value).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuOptimum {
    pub mu: f64,
    pub point: RatePoint,
}

/// Mean photon number maximizing the dead-time corrected secure rate on
/// `[lo, hi]`. When no μ in range is secure, the returned point carries the
/// insecure flag.
pub fn optimize_mu(
    s: &LinkScenario,
    a: &AttackModel,
    ec: &ErrorCorrection,
    mu_range: (f64, f64),
) -> Result<MuOptimum> {
    let (lo, hi) = mu_range;
    if !(lo > 0.0 && lo < hi && hi <= 1.0) {
        return Err(Error::InvalidRange { lo, hi });
    }
    s.with_mu(lo).validate()?;
    let objective = |mu: f64| -> f64 {
        secure_rate_with(&s.with_mu(mu), a, ec)
            .map(|p| -p.secure_rate_deadtime_hz)
            .unwrap_or(0.0)
    };
    let (mu, _) = scan_then_refine(objective, lo, hi, 1024, MU_TOLERANCE)?;
    let point = secure_rate_with(&s.with_mu(mu), a, ec)?;
    Ok(MuOptimum { mu, point })
}

/// Largest distance at which the dead-time corrected rate stays above
/// `r_min`, located by doubling and then bisection to
/// [`DISTANCE_TOLERANCE_KM`].
pub fn max_secure_distance(
    s: &LinkScenario,
    a: &AttackModel,
    ec: &ErrorCorrection,
    r_min: f64,
) -> Result<f64> {
    if !(r_min >= 0.0) {
        return Err(Error::Domain {
            what: "minimum rate",
            value: r_min,
        });
    }
    let above = |l: f64| -> bool {
        secure_rate_with(&s.with_length(l), a, ec)
            .map(|p| p.secure_rate_deadtime_hz > r_min)
            .unwrap_or(false)
    };
    // propagate scenario errors before reporting insecurity
    secure_rate_with(&s.with_length(0.0), a, ec)?;
    if !above(0.0) {
        return Err(Error::NoSecureDistance);
    }
    const MAX_KM: f64 = 1e6;
    let (mut inside, mut outside) = (0.0, 1.0);
    while above(outside) {
        inside = outside;
        outside *= 2.0;
        if outside > MAX_KM {
            return Err(Error::InvalidParameter {
                name: "r_min",
                reason: format!("rate never falls to {r_min} within {MAX_KM} km"),
            });
        }
    }
    Ok(bisect_boundary(
        above,
        inside,
        outside,
        DISTANCE_TOLERANCE_KM,
    ))
}
