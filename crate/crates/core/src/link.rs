//! Per-window click probabilities and QBER for a fiber link.

use crate::detector::DetectorSpec;
use crate::error::{Error, Result};

/// Channel, source and receiver parameters for one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkScenario {
    /// Mean photon number per pulse, μ.
    pub mu: f64,
    pub alpha_db_per_km: f64,
    pub length_km: f64,
    /// Pulse repetition rate ν. The measurement window is 1/ν.
    pub clock_hz: f64,
    /// Baseline system error rate b.
    pub baseline_error: f64,
    pub detector: DetectorSpec,
    pub n_detectors: u32,
    /// Bob's interferometer delay in clock periods, N.
    pub delay_n: u32,
    /// Dead-time exponent scale δ.
    pub dead_time_delta: f64,
}

impl LinkScenario {
    /// Scenario with two detectors and δ = 1/2 (one over the detector count).
    pub fn new(
        mu: f64,
        alpha_db_per_km: f64,
        length_km: f64,
        clock_hz: f64,
        baseline_error: f64,
        detector: DetectorSpec,
        delay_n: u32,
    ) -> Result<Self> {
        let s = Self {
            mu,
            alpha_db_per_km,
            length_km,
            clock_hz,
            baseline_error,
            detector,
            n_detectors: 2,
            delay_n,
            dead_time_delta: 0.5,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let domain = |what, value| Err(Error::Domain { what, value });
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return domain("mean photon number", self.mu);
        }
        if !(self.alpha_db_per_km >= 0.0) {
            return domain("fiber loss coefficient", self.alpha_db_per_km);
        }
        if !(self.length_km >= 0.0) {
            return domain("link length", self.length_km);
        }
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return domain("clock rate", self.clock_hz);
        }
        if !(0.0..0.5).contains(&self.baseline_error) {
            return domain("baseline error", self.baseline_error);
        }
        if self.n_detectors == 0 {
            return domain("detector count", 0.0);
        }
        if self.delay_n == 0 {
            return domain("delay N", 0.0);
        }
        if !(self.dead_time_delta >= 0.0 && self.dead_time_delta.is_finite()) {
            return domain("dead-time delta", self.dead_time_delta);
        }
        self.detector.validate()?;
        p_dark(self).map(|_| ())
    }

    pub fn with_length(&self, length_km: f64) -> Self {
        Self {
            length_km,
            ..self.clone()
        }
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..self.clone() }
    }

    /// Fiber plus receiver transmittance 10^{−(αL+L_r)/10}.
    pub fn transmittance(&self) -> f64 {
        let loss_db = self.alpha_db_per_km * self.length_km + self.detector.receiver_loss_db;
        10f64.powf(-loss_db / 10.0)
    }
}

/// A probability that may have been clamped to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamped {
    pub value: f64,
    pub clamped: bool,
}

impl Clamped {
    fn at_most_one(raw: f64) -> Self {
        if raw > 1.0 {
            Self {
                value: 1.0,
                clamped: true,
            }
        } else {
            Self {
                value: raw,
                clamped: false,
            }
        }
    }
}

/// μ·η·10^{−(αL+L_r)/10}.
pub fn p_signal(s: &LinkScenario) -> Clamped {
    Clamped::at_most_one(s.mu * s.detector.efficiency * s.transmittance())
}

/// Dark-click probability over all of Bob's detectors.
pub fn p_dark(s: &LinkScenario) -> Result<f64> {
    let p = f64::from(s.n_detectors) * s.detector.dark_per_window;
    if p >= 1.0 {
        return Err(Error::InvalidRegime(p));
    }
    Ok(p)
}

pub fn p_click(s: &LinkScenario) -> Result<Clamped> {
    let signal = p_signal(s);
    let dark = p_dark(s)?;
    let mut total = Clamped::at_most_one(signal.value + dark);
    total.clamped |= signal.clamped;
    Ok(total)
}

/// QBER from its components: (½ p_dark + b p_signal) / p_click.
pub fn qber_from(p_signal: f64, p_dark: f64, baseline_error: f64) -> Result<f64> {
    let p_click = p_signal + p_dark;
    if !(p_click > 0.0) {
        return Err(Error::UndefinedQber);
    }
    Ok((0.5 * p_dark + baseline_error * p_signal) / p_click)
}

pub fn qber(s: &LinkScenario) -> Result<f64> {
    qber_from(p_signal(s).value, p_dark(s)?, s.baseline_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::GatingMode;
    use proptest::prelude::*;

    fn fig3_si(length_km: f64) -> LinkScenario {
        LinkScenario::new(
            0.2,
            0.21,
            length_km,
            1e9,
            0.01,
            DetectorSpec::si_upconversion(),
            10,
        )
        .unwrap()
    }

    fn ideal(mu: f64) -> LinkScenario {
        let det = DetectorSpec::new("ideal", 1.0, 0.0, 0.0, 0.0, GatingMode::Nongated).unwrap();
        LinkScenario::new(mu, 0.0, 0.0, 1e9, 0.0, det, 1).unwrap()
    }

    #[test]
    fn signal_zero_loss() {
        let p = p_signal(&ideal(0.2));
        assert_eq!(p.value, 0.2);
        assert!(!p.clamped);
    }

    #[test]
    fn signal_fig3_si_100km() {
        // 0.07 · 10^{-2.31}
        let p = p_signal(&fig3_si(100.0)).value;
        assert!((p - 3.428_451_735_579_124e-4).abs() / p < 1e-13, "{p}");
    }

    #[test]
    fn signal_vanishes_with_huge_loss() {
        let mut s = fig3_si(100.0);
        s.alpha_db_per_km = 1e6;
        assert_eq!(p_signal(&s).value, 0.0);
    }

    #[test]
    fn dark_probabilities() {
        assert!((p_dark(&fig3_si(0.0)).unwrap() - 7e-8).abs() < 1e-22);
        let mut s = fig3_si(0.0);
        s.detector.dark_per_window = 0.0;
        assert_eq!(p_dark(&s).unwrap(), 0.0);
        s.detector.dark_per_window = 9.2e-6;
        assert!((p_dark(&s).unwrap() - 1.84e-5).abs() < 1e-19);
        s.n_detectors = 3;
        s.detector.dark_per_window = 0.4;
        assert!(matches!(p_dark(&s), Err(Error::InvalidRegime(_))));
    }

    #[test]
    fn click_sum_and_clamp() {
        let s = fig3_si(100.0);
        let c = p_click(&s).unwrap();
        assert_eq!(c.value, p_signal(&s).value + p_dark(&s).unwrap());
        assert!((c.value - 3.429_151_735_579_124e-4).abs() < 1e-15);

        let mut z = ideal(0.2);
        z.detector.efficiency = 0.0;
        assert_eq!(p_click(&z).unwrap().value, 0.0);

        let mut big = ideal(0.9);
        big.detector.dark_per_window = 0.1;
        let c = p_click(&big).unwrap();
        assert_eq!(c.value, 1.0);
        assert!(c.clamped);
    }

    #[test]
    fn qber_limits() {
        let mut s = fig3_si(100.0);
        s.detector.efficiency = 0.0;
        assert_eq!(qber(&s).unwrap(), 0.5);

        let mut s = fig3_si(100.0);
        s.detector.dark_per_window = 0.0;
        assert_eq!(qber(&s).unwrap(), 0.01);

        let mut none = ideal(0.2);
        none.detector.efficiency = 0.0;
        assert!(matches!(qber(&none), Err(Error::UndefinedQber)));
    }

    #[test]
    fn qber_fig3_si_200km() {
        // 40-digit evaluation of the signal/dark/QBER chain: 0.022279312407297247
        let e = qber(&fig3_si(200.0)).unwrap();
        assert!((e - 0.022_279_312_407_297_247).abs() < 1e-12, "{e}");
    }

    #[test]
    fn scenario_validation() {
        let det = DetectorSpec::si_upconversion();
        assert!(LinkScenario::new(0.0, 0.21, 0.0, 1e9, 0.01, det.clone(), 1).is_err());
        assert!(LinkScenario::new(0.2, -0.1, 0.0, 1e9, 0.01, det.clone(), 1).is_err());
        assert!(LinkScenario::new(0.2, 0.21, 0.0, 1e9, 0.5, det.clone(), 1).is_err());
        assert!(LinkScenario::new(0.2, 0.21, 0.0, 1e9, 0.01, det.clone(), 0).is_err());
        assert!(LinkScenario::new(0.2, 0.21, 0.0, 0.0, 0.01, det, 1).is_err());
    }

    proptest! {
        #[test]
        fn qber_monotone_in_length(l in 0.0f64..400.0, dl in 0.0f64..100.0) {
            let a = qber(&fig3_si(l)).unwrap();
            let b = qber(&fig3_si(l + dl)).unwrap();
            prop_assert!(b >= a);
            prop_assert!((0.01..=0.5).contains(&a));
        }

        #[test]
        fn signal_strictly_decreasing(l in 0.0f64..300.0, dl in 0.01f64..100.0) {
            prop_assert!(p_signal(&fig3_si(l + dl)).value < p_signal(&fig3_si(l)).value);
        }

        #[test]
        fn signal_scale_law(l1 in 0.0f64..200.0, l2 in 0.0f64..200.0) {
            let joint = p_signal(&fig3_si(l1 + l2)).value;
            let split = p_signal(&fig3_si(l1)).value * 10f64.powf(-0.21 * l2 / 10.0);
            prop_assert!(((joint - split) / joint).abs() < 1e-12);
        }

        #[test]
        fn qber_tends_to_baseline_as_dark_vanishes(l in 0.0f64..300.0) {
            let mut s = fig3_si(l);
            s.detector.dark_per_window = 1e-300;
            prop_assert!((qber(&s).unwrap() - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn qber_tends_to_half_far_away() {
        let e = qber(&fig3_si(2000.0)).unwrap();
        assert!((e - 0.5).abs() < 1e-9);
    }
}
