//! Privacy-amplification shrinking factors and error-correction overhead.
//!
//! Two analysis tracks are supported:
//! * individual attacks, where the single-photon fraction β of a Poisson
//!   source bounds Eve's photon-number-splitting gain;
//! * the hybrid beam-splitter + intercept-resend attack, where the fraction
//!   γ of bits Eve never learns sets the shrinking factor directly.

use std::fmt;
use std::str::FromStr;

use crate::detector::DetectorSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    IndividualWithMemory,
    IndividualNoMemory,
    HybridBsIr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackModel {
    pub kind: AttackKind,
    /// Selects γ₂ over γ₁ for the hybrid attack.
    pub eve_memory: bool,
    pub delay_n: u32,
}

impl AttackModel {
    pub fn new(kind: AttackKind, eve_memory: bool, delay_n: u32) -> Result<Self> {
        if delay_n == 0 {
            return Err(Error::Domain {
                what: "delay N",
                value: 0.0,
            });
        }
        let eve_memory = match kind {
            AttackKind::IndividualWithMemory => true,
            AttackKind::IndividualNoMemory => false,
            AttackKind::HybridBsIr => eve_memory,
        };
        Ok(Self {
            kind,
            eve_memory,
            delay_n,
        })
    }

    pub fn hybrid(eve_memory: bool, delay_n: u32) -> Result<Self> {
        Self::new(AttackKind::HybridBsIr, eve_memory, delay_n)
    }

    pub fn with_delay(self, delay_n: u32) -> Result<Self> {
        Self::new(self.kind, self.eve_memory, delay_n)
    }

    /// Label used by scenario files and the CLI.
    pub fn label(&self) -> AttackLabel {
        match (self.kind, self.eve_memory) {
            (AttackKind::IndividualWithMemory, _) => AttackLabel::IndividualMem,
            (AttackKind::IndividualNoMemory, _) => AttackLabel::IndividualNomem,
            (AttackKind::HybridBsIr, true) => AttackLabel::HybridMem,
            (AttackKind::HybridBsIr, false) => AttackLabel::HybridNomem,
        }
    }
}

/// Flat attack selector: `individual_mem`, `individual_nomem`, `hybrid_mem`,
/// `hybrid_nomem`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackLabel {
    IndividualMem,
    IndividualNomem,
    HybridMem,
    HybridNomem,
}

impl AttackLabel {
    pub const ALL: [AttackLabel; 4] = [
        AttackLabel::IndividualMem,
        AttackLabel::IndividualNomem,
        AttackLabel::HybridMem,
        AttackLabel::HybridNomem,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AttackLabel::IndividualMem => "individual_mem",
            AttackLabel::IndividualNomem => "individual_nomem",
            AttackLabel::HybridMem => "hybrid_mem",
            AttackLabel::HybridNomem => "hybrid_nomem",
        }
    }

    pub fn model(&self, delay_n: u32) -> Result<AttackModel> {
        match self {
            AttackLabel::IndividualMem => {
                AttackModel::new(AttackKind::IndividualWithMemory, true, delay_n)
            }
            AttackLabel::IndividualNomem => {
                AttackModel::new(AttackKind::IndividualNoMemory, false, delay_n)
            }
            AttackLabel::HybridMem => AttackModel::hybrid(true, delay_n),
            AttackLabel::HybridNomem => AttackModel::hybrid(false, delay_n),
        }
    }
}

impl fmt::Display for AttackLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "attack",
                reason: format!(
                    "expected individual_mem|individual_nomem|hybrid_mem|hybrid_nomem, got {s:?}"
                ),
            })
    }
}

/// Error-correction inefficiency f(e) as piecewise-linear breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct EcTable {
    points: Vec<(f64, f64)>,
}

impl EcTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "ec table",
                reason: "needs at least two breakpoints".into(),
            });
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidParameter {
                name: "ec table",
                reason: "error rates must be strictly increasing".into(),
            });
        }
        if points.iter().any(|&(_, f)| !(f >= 1.0)) {
            return Err(Error::InvalidParameter {
                name: "ec table",
                reason: "f(e) must be at least 1".into(),
            });
        }
        Ok(Self { points })
    }

    /// Cascade-style breakpoints (0.01, 1.16), (0.05, 1.16), (0.1, 1.22),
    /// (0.15, 1.35).
    pub fn cascade() -> Self {
        Self {
            points: vec![(0.01, 1.16), (0.05, 1.16), (0.1, 1.22), (0.15, 1.35)],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn max_error(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }
}

impl Default for EcTable {
    fn default() -> Self {
        Self::cascade()
    }
}

/// f(e): constant below the first breakpoint, linear between breakpoints,
/// undefined above the last.
pub fn f_ec(table: &EcTable, e: f64) -> Result<f64> {
    if !(e >= 0.0) {
        return Err(Error::Domain {
            what: "error rate",
            value: e,
        });
    }
    let pts = &table.points;
    if e <= pts[0].0 {
        return Ok(pts[0].1);
    }
    for w in pts.windows(2) {
        let ((e0, f0), (e1, f1)) = (w[0], w[1]);
        if e == e1 {
            return Ok(f1);
        }
        if e < e1 {
            return Ok(f0 + (f1 - f0) * (e - e0) / (e1 - e0));
        }
    }
    Err(Error::AboveEcRange(e))
}

/// Probability that a Poisson source with mean μ emits two or more photons.
pub fn poisson_multiphoton(mu: f64) -> f64 {
    // 1 − (1+μ)e^{−μ} cancels badly for small μ; -expm1(-μ) − μe^{−μ} keeps
    // relative accuracy.
    (-(-mu).exp_m1() - mu * (-mu).exp()).max(0.0)
}

/// β = (p_click − p_m)/p_click. Non-positive values mean a PNS attack can
/// learn every bit.
pub fn single_photon_fraction(p_click: f64, p_m: f64) -> Result<f64> {
    if !(p_click > 0.0) {
        return Err(Error::UndefinedQber);
    }
    Ok((p_click - p_m) / p_click)
}

/// Shrinking factor for individual attacks.
///
/// With memory: −β log₂[½ + 2(e/β) − 2(e/β)²].
/// Without: −((1+β)/2) log₂[½ + 4(e/(1+β)) − 8(e/(1+β))²].
/// The log argument reaches 1 at e/β = ½ (resp. e/(1+β) = ¼); beyond that
/// no secret bits remain and 0 is returned.
pub fn shrink_individual(e: f64, beta: f64, eve_memory: bool) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Insecure("single-photon fraction is not positive"));
    }
    if !(e >= 0.0) {
        return Err(Error::Domain {
            what: "error rate",
            value: e,
        });
    }
    let beta = beta.min(1.0);
    let (scale, x, x_max, lin, quad) = if eve_memory {
        (beta, e / beta, 0.5, 2.0, 2.0)
    } else {
        ((1.0 + beta) / 2.0, e / (1.0 + beta), 0.25, 4.0, 8.0)
    };
    if x >= x_max {
        return Ok(0.0);
    }
    let arg = 0.5 + lin * x - quad * x * x;
    if arg >= 1.0 {
        return Ok(0.0);
    }
    Ok((-scale * arg.log2()).max(0.0))
}

/// Beam-splitter transmission Eve must leave to keep Bob's click rate:
/// η·10^{−(αL+L_r)/10}.
pub fn bs_transmission(detector: &DetectorSpec, alpha_db_per_km: f64, length_km: f64) -> f64 {
    let loss_db = alpha_db_per_km * length_km + detector.receiver_loss_db;
    detector.efficiency * 10f64.powf(-loss_db / 10.0)
}

/// Fraction γ of bits Eve does not learn from the beam-splitter part of
/// the attack: 1 − μ(1−η_BS)/N without memory, 1 − 2μ(1−η_BS) with.
/// Clamped at 0.
pub fn surviving_fraction(mu: f64, eta_bs: f64, delay_n: u32, eve_memory: bool) -> f64 {
    let leaked = mu * (1.0 - eta_bs);
    let gamma = if eve_memory {
        1.0 - 2.0 * leaked
    } else {
        1.0 - leaked / f64::from(delay_n)
    };
    gamma.max(0.0)
}

/// Same quantity written through Bob's signal probability:
/// 1 − μ/N + p_signal/N, or 1 − 2μ + 2p_signal.
pub fn surviving_fraction_from_signal(
    mu: f64,
    p_signal: f64,
    delay_n: u32,
    eve_memory: bool,
) -> f64 {
    let gamma = if eve_memory {
        1.0 - 2.0 * mu + 2.0 * p_signal
    } else {
        let n = f64::from(delay_n);
        1.0 - mu / n + p_signal / n
    };
    gamma.max(0.0)
}

/// Hybrid-attack shrinking factor γ − e/(N(1 − 1/2N)), clamped at 0.
pub fn shrink_hybrid(e: f64, gamma: f64, delay_n: u32) -> f64 {
    (gamma - e * hybrid_slope(delay_n)).max(0.0)
}

/// 1/(N(1 − 1/2N)) = 1/(N − ½).
pub fn hybrid_slope(delay_n: u32) -> f64 {
    let n = f64::from(delay_n);
    1.0 / (n * (1.0 - 1.0 / (2.0 * n)))
}

/// Error an intercept-resend measurement causes when Bob's delay differs
/// from Eve's: ½(1 − 1/2N).
pub fn ir_error_floor(delay_n: u32) -> f64 {
    let n = f64::from(delay_n.max(1));
    0.5 * (1.0 - 1.0 / (2.0 * n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn multiphoton_values() {
        assert_eq!(poisson_multiphoton(0.0), 0.0);
        // 1 − 1.2e^{−0.2} and 1 − 1.77e^{−0.77}, 40-digit evaluation
        assert!((poisson_multiphoton(0.2) - 0.017_523_096_306_421_806).abs() < 1e-15);
        assert!((poisson_multiphoton(0.77) - 0.180_466_869_089_126_31).abs() < 1e-15);
        let tiny = poisson_multiphoton(1e-6);
        assert!((tiny / 5e-13 - 1.0).abs() < 1e-5, "{tiny}");
    }

    #[test]
    fn beta_values() {
        assert_eq!(single_photon_fraction(0.3, 0.0).unwrap(), 1.0);
        assert_eq!(single_photon_fraction(0.3, 0.3).unwrap(), 0.0);
        assert!(single_photon_fraction(3.43e-4, 1.75e-2).unwrap() < 0.0);
        assert!(single_photon_fraction(0.0, 0.1).is_err());
    }

    #[test]
    fn individual_shrinking() {
        assert_eq!(shrink_individual(0.0, 1.0, true).unwrap(), 1.0);
        assert_eq!(shrink_individual(0.0, 1.0, false).unwrap(), 1.0);
        let t = shrink_individual(0.05, 1.0, true).unwrap();
        assert!((t - 0.749_038_426_466_781_2).abs() < 1e-14, "{t}");
        assert!(matches!(
            shrink_individual(0.01, 0.0, true),
            Err(Error::Insecure(_))
        ));
        assert_eq!(shrink_individual(0.5, 1.0, true).unwrap(), 0.0);
        assert_eq!(shrink_individual(0.6, 1.0, true).unwrap(), 0.0);
        assert_eq!(shrink_individual(0.5, 1.0, false).unwrap(), 0.0);
    }

    #[test]
    fn bs_transmission_values() {
        let ideal = DetectorSpec::new("i", 1.0, 0.0, 0.0, 0.0, Default::default()).unwrap();
        assert_eq!(bs_transmission(&ideal, 0.0, 50.0), 1.0);
        let si = DetectorSpec::si_upconversion();
        let t = bs_transmission(&si, 0.21, 100.0);
        assert!((t - 1.714_225_867_789_561_7e-3).abs() / t < 1e-13);
        assert_eq!(bs_transmission(&si, 0.21, 1e6), 0.0);
    }

    #[test]
    fn surviving_fraction_values() {
        assert!((surviving_fraction(0.2, 0.0, 10, false) - 0.98).abs() < 1e-15);
        assert!((surviving_fraction(0.2, 0.0, 10, true) - 0.6).abs() < 1e-15);
        assert_eq!(surviving_fraction(0.5, 0.0, 10, true), 0.0);
        assert_eq!(surviving_fraction(0.77, 0.0, 10, true), 0.0);
    }

    #[test]
    fn hybrid_shrinking() {
        assert_eq!(shrink_hybrid(0.0, 1.0, 10), 1.0);
        let t = shrink_hybrid(0.02, 0.98, 10);
        assert!((t - 0.977_894_736_842_105_26).abs() < 1e-15);
        assert_eq!(shrink_hybrid(0.25, 0.5, 1), 0.0);
    }

    #[test]
    fn ec_table_breakpoints() {
        let t = EcTable::cascade();
        for (e, f) in [(0.01, 1.16), (0.05, 1.16), (0.1, 1.22), (0.15, 1.35)] {
            assert_eq!(f_ec(&t, e).unwrap(), f);
        }
        assert!((f_ec(&t, 0.075).unwrap() - 1.19).abs() < 1e-12);
        assert_eq!(f_ec(&t, 0.0).unwrap(), 1.16);
        assert_eq!(f_ec(&t, 0.004).unwrap(), 1.16);
        assert!(matches!(f_ec(&t, 0.1501), Err(Error::AboveEcRange(_))));
    }

    #[test]
    fn ec_table_validation() {
        assert!(EcTable::new(vec![(0.1, 1.2)]).is_err());
        assert!(EcTable::new(vec![(0.1, 1.2), (0.1, 1.3)]).is_err());
        assert!(EcTable::new(vec![(0.1, 0.9), (0.2, 1.3)]).is_err());
    }

    #[test]
    fn ir_floor_values() {
        assert_eq!(ir_error_floor(1), 0.25);
        assert!((ir_error_floor(10) - 0.475).abs() < 1e-15);
        assert!((ir_error_floor(u32::MAX) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn attack_labels_round_trip() {
        for l in AttackLabel::ALL {
            assert_eq!(l.as_str().parse::<AttackLabel>().unwrap(), l);
            assert_eq!(l.model(10).unwrap().label(), l);
        }
        assert!("hybrid".parse::<AttackLabel>().is_err());
        assert!(AttackModel::hybrid(false, 0).is_err());
    }

    proptest! {
        #[test]
        fn individual_non_increasing(beta in 0.01f64..=1.0, a in 0.0f64..1.0, b in 0.0f64..1.0, mem: bool) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (lo, hi) = (lo * beta / 2.0, hi * beta / 2.0);
            prop_assert!(shrink_individual(hi, beta, mem).unwrap() <= shrink_individual(lo, beta, mem).unwrap() + 1e-15);
        }

        #[test]
        fn hybrid_is_linear_with_exact_slope(n in 1u32..1000, e1 in 0.0f64..0.5, e2 in 0.0f64..0.5) {
            // γ large enough that no clamping happens
            let gamma = 10.0;
            let t1 = shrink_hybrid(e1, gamma, n);
            let t2 = shrink_hybrid(e2, gamma, n);
            if (e1 - e2).abs() > 1e-3 {
                let slope = (t1 - t2) / (e1 - e2);
                prop_assert!((slope + hybrid_slope(n)).abs() < 1e-9 * hybrid_slope(n).max(1.0));
            }
            prop_assert_eq!(hybrid_slope(n), 1.0 / (f64::from(n) * (1.0 - 1.0 / (2.0 * f64::from(n)))));
        }

        #[test]
        fn gamma_forms_agree(mu in 0.01f64..1.0, l in 0.0f64..300.0, n in 1u32..200, mem: bool) {
            let si = DetectorSpec::si_upconversion();
            let eta_bs = bs_transmission(&si, 0.21, l);
            let p_signal = mu * eta_bs;
            let a = surviving_fraction(mu, eta_bs, n, mem);
            let b = surviving_fraction_from_signal(mu, p_signal, n, mem);
            prop_assert!((a - b).abs() < 1e-14);
        }

        #[test]
        fn memory_never_helps(mu in 0.0f64..1.0, eta_bs in 0.0f64..=1.0, n in 2u32..1000) {
            prop_assert!(surviving_fraction(mu, eta_bs, n, true) <= surviving_fraction(mu, eta_bs, n, false));
        }

        #[test]
        fn f_ec_monotone(a in 0.0f64..0.15, b in 0.0f64..0.15) {
            let t = EcTable::cascade();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(f_ec(&t, lo).unwrap() <= f_ec(&t, hi).unwrap());
        }
    }
}
