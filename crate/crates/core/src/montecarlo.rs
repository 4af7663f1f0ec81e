//! Seeded per-window Monte Carlo of Bob's detection record.
//!
//! This is a semiclassical Bernoulli model, not an optical state simulation.
//! Each measurement window independently produces a signal click with
//! probability p_signal; windows without one produce a dark click with
//! probability p_dark. A window holding both counts once, with the signal's
//! bit value. Signal clicks are wrong with probability b, dark-only clicks
//! with probability ½. Its only purpose is to check the analytic click,
//! QBER and intercept-resend expressions empirically.
//!
//! Randomness comes from ChaCha8 (`rand_chacha` 0.9). The run is cut into
//! fixed partitions of [`PARTITION_WINDOWS`] windows; partition `k` uses the
//! generator seeded with `seed` on stream `k`. Results therefore do not
//! depend on how many threads execute the partitions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::link::{p_dark, p_signal, qber_from, LinkScenario};
use crate::security::ir_error_floor;

pub const PARTITION_WINDOWS: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub n_pulses: u64,
    pub seed: u64,
    pub scenario: LinkScenario,
    /// Fraction of windows Eve attacks with intercept-resend.
    pub ir_fraction: f64,
    /// Eve's interferometer delay M.
    pub eve_delay_m: u32,
    /// Delays Bob picks from uniformly, per window.
    pub bob_delays: Vec<u32>,
}

impl McConfig {
    /// Passive-link configuration: no attack, Bob uses the scenario's N.
    pub fn link(scenario: LinkScenario, n_pulses: u64, seed: u64) -> Self {
        let n = scenario.delay_n;
        Self {
            n_pulses,
            seed,
            scenario,
            ir_fraction: 0.0,
            eve_delay_m: n,
            bob_delays: vec![n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 {
            return Err(Error::Domain {
                what: "pulse count",
                value: 0.0,
            });
        }
        if !(0.0..=1.0).contains(&self.ir_fraction) {
            return Err(Error::Domain {
                what: "intercept-resend fraction",
                value: self.ir_fraction,
            });
        }
        if self.eve_delay_m == 0 {
            return Err(Error::Domain {
                what: "Eve's delay M",
                value: 0.0,
            });
        }
        if self.bob_delays.is_empty() || self.bob_delays.contains(&0) {
            return Err(Error::InvalidParameter {
                name: "bob_delays",
                reason: "needs at least one positive delay".into(),
            });
        }
        self.scenario.validate()
    }
}

/// A binomial proportion estimate with its plug-in standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    fn binomial(successes: u64, trials: u64) -> Self {
        let p = successes as f64 / trials as f64;
        Self {
            value: p,
            se: (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McResult {
    pub n_pulses: u64,
    pub clicks: u64,
    pub errors: u64,
    pub p_click: Estimate,
    /// `None` when no window clicked.
    pub qber: Option<Estimate>,
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    clicks: u64,
    errors: u64,
}

struct WindowModel {
    p_signal: f64,
    p_dark: f64,
    baseline: f64,
    ir_fraction: f64,
    eve_delay_m: u32,
    bob_delays: Vec<u32>,
}

impl WindowModel {
    fn new(cfg: &McConfig, with_attack: bool) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            p_signal: p_signal(&cfg.scenario).value,
            p_dark: p_dark(&cfg.scenario)?,
            baseline: cfg.scenario.baseline_error,
            ir_fraction: if with_attack { cfg.ir_fraction } else { 0.0 },
            eve_delay_m: cfg.eve_delay_m,
            bob_delays: cfg.bob_delays.clone(),
        })
    }

    fn signal_error_probability<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.ir_fraction > 0.0 && rng.random::<f64>() < self.ir_fraction {
            let n = self.bob_delays[rng.random_range(0..self.bob_delays.len())];
            if n != self.eve_delay_m {
                return ir_error_floor(n);
            }
        }
        self.baseline
    }

    fn run_partition(&self, seed: u64, index: u64, windows: u64) -> Tally {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let mut t = Tally::default();
        for _ in 0..windows {
            let p_err = if rng.random::<f64>() < self.p_signal {
                self.signal_error_probability(&mut rng)
            } else if rng.random::<f64>() < self.p_dark {
                0.5
            } else {
                continue;
            };
            t.clicks += 1;
            if rng.random::<f64>() < p_err {
                t.errors += 1;
            }
        }
        t
    }

    fn run(&self, n_pulses: u64, seed: u64) -> McResult {
        let parts = n_pulses.div_ceil(PARTITION_WINDOWS);
        let total = (0..parts)
            .into_par_iter()
            .map(|k| {
                let start = k * PARTITION_WINDOWS;
                let windows = PARTITION_WINDOWS.min(n_pulses - start);
                self.run_partition(seed, k, windows)
            })
            .reduce(Tally::default, |a, b| Tally {
                clicks: a.clicks + b.clicks,
                errors: a.errors + b.errors,
            });
        McResult {
            n_pulses,
            clicks: total.clicks,
            errors: total.errors,
            p_click: Estimate::binomial(total.clicks, n_pulses),
            qber: (total.clicks > 0).then(|| Estimate::binomial(total.errors, total.clicks)),
        }
    }
}

/// Passive link: estimates p_click and QBER.
pub fn simulate_link(cfg: &McConfig) -> Result<McResult> {
    Ok(WindowModel::new(cfg, false)?.run(cfg.n_pulses, cfg.seed))
}

/// Link with a fraction of windows intercepted and resent by Eve using
/// delay M while Bob draws his delay from `bob_delays`.
pub fn simulate_intercept_resend(cfg: &McConfig) -> Result<McResult> {
    Ok(WindowModel::new(cfg, true)?.run(cfg.n_pulses, cfg.seed))
}

/// Analytic counterparts of the passive-link estimates: (p_click, QBER).
pub fn analytic_link(s: &LinkScenario) -> Result<(f64, f64)> {
    let ps = p_signal(s).value;
    let pd = p_dark(s)?;
    Ok((ps + pd, qber_from(ps, pd, s.baseline_error)?))
}

/// Expected QBER of the intercept-resend simulation, composing the
/// attacked fraction, Bob's delay distribution and dark-only clicks.
pub fn expected_ir_qber(cfg: &McConfig) -> Result<f64> {
    cfg.validate()?;
    let s = &cfg.scenario;
    let ps = p_signal(s).value;
    let pd = p_dark(s)?;
    let b = s.baseline_error;
    let per_delay: f64 = cfg
        .bob_delays
        .iter()
        .map(|&n| {
            if n == cfg.eve_delay_m {
                b
            } else {
                ir_error_floor(n)
            }
        })
        .sum::<f64>()
        / cfg.bob_delays.len() as f64;
    let signal_err = (1.0 - cfg.ir_fraction) * b + cfg.ir_fraction * per_delay;
    let dark_only = (1.0 - ps) * pd;
    let clicks = ps + dark_only;
    if !(clicks > 0.0) {
        return Err(Error::UndefinedQber);
    }
    Ok((ps * signal_err + 0.5 * dark_only) / clicks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{DetectorSpec, GatingMode};

    fn toy(mu: f64, efficiency: f64, dark: f64, b: f64) -> LinkScenario {
        let det =
            DetectorSpec::new("toy", efficiency, dark, 0.0, 0.0, GatingMode::Nongated).unwrap();
        LinkScenario::new(mu, 0.0, 0.0, 1e9, b, det, 1).unwrap()
    }

    #[test]
    fn certain_click_no_error() {
        let cfg = McConfig::link(toy(1.0, 1.0, 0.0, 0.0), 10_000, 7);
        let r = simulate_link(&cfg).unwrap();
        assert_eq!(r.clicks, 10_000);
        assert_eq!(r.errors, 0);
        assert_eq!(r.p_click.value, 1.0);
        assert_eq!(r.qber.unwrap().value, 0.0);
    }

    #[test]
    fn dark_only_errors_are_half() {
        let cfg = McConfig::link(toy(0.2, 0.0, 0.01, 0.0), 1_000_000, 3);
        let r = simulate_link(&cfg).unwrap();
        let q = r.qber.unwrap();
        assert!(q.covers(0.5, 3.0), "{q:?}");
    }

    #[test]
    fn deterministic_across_calls() {
        let cfg = McConfig::link(toy(0.3, 0.5, 1e-3, 0.02), 3 * PARTITION_WINDOWS + 17, 99);
        let a = simulate_link(&cfg).unwrap();
        let b = simulate_link(&cfg).unwrap();
        assert_eq!(a, b);
        let other = McConfig { seed: 100, ..cfg };
        assert_ne!(simulate_link(&other).unwrap(), a);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let cfg = McConfig::link(toy(0.3, 0.5, 1e-3, 0.02), 4 * PARTITION_WINDOWS + 5, 11);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = single.install(|| simulate_link(&cfg).unwrap());
        let b = many.install(|| simulate_link(&cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn standard_error_is_binomial() {
        let cfg = McConfig::link(toy(0.3, 0.5, 1e-3, 0.02), 200_000, 5);
        let r = simulate_link(&cfg).unwrap();
        let p = r.clicks as f64 / r.n_pulses as f64;
        assert_eq!(r.p_click.se, (p * (1.0 - p) / r.n_pulses as f64).sqrt());
        let q = r.errors as f64 / r.clicks as f64;
        assert_eq!(r.qber.unwrap().se, (q * (1.0 - q) / r.clicks as f64).sqrt());
        assert!(r.errors <= r.clicks);
    }

    #[test]
    fn matched_delay_adds_no_error() {
        let mut cfg = McConfig::link(toy(1.0, 1.0, 0.0, 0.0), 100_000, 1);
        cfg.ir_fraction = 1.0;
        cfg.eve_delay_m = 3;
        cfg.bob_delays = vec![3];
        let r = simulate_intercept_resend(&cfg).unwrap();
        assert_eq!(r.errors, 0);
        assert_eq!(expected_ir_qber(&cfg).unwrap(), 0.0);
    }

    #[test]
    fn intercept_resend_floor_n1() {
        let mut cfg = McConfig::link(toy(1.0, 1.0, 0.0, 0.0), 1_000_000, 21);
        cfg.ir_fraction = 1.0;
        cfg.eve_delay_m = 2;
        cfg.bob_delays = vec![1];
        let r = simulate_intercept_resend(&cfg).unwrap();
        assert!(r.qber.unwrap().covers(0.25, 3.0), "{r:?}");
        assert_eq!(expected_ir_qber(&cfg).unwrap(), 0.25);
    }

    #[test]
    fn zero_fraction_reduces_to_link() {
        let mut cfg = McConfig::link(toy(0.3, 0.5, 1e-3, 0.02), 500_000, 8);
        cfg.eve_delay_m = 2;
        cfg.bob_delays = vec![1, 3];
        assert_eq!(
            simulate_intercept_resend(&cfg).unwrap(),
            simulate_link(&cfg).unwrap()
        );
    }

    #[test]
    fn mixed_delays_match_expectation() {
        let mut cfg = McConfig::link(toy(0.5, 0.8, 1e-3, 0.01), 2_000_000, 4);
        cfg.ir_fraction = 0.5;
        cfg.eve_delay_m = 2;
        cfg.bob_delays = vec![1, 2, 10];
        let r = simulate_intercept_resend(&cfg).unwrap();
        let expected = expected_ir_qber(&cfg).unwrap();
        assert!(r.qber.unwrap().covers(expected, 3.0), "{r:?} vs {expected}");
    }

    #[test]
    fn config_validation() {
        let base = McConfig::link(toy(0.3, 0.5, 1e-3, 0.02), 10, 0);
        assert!(simulate_link(&McConfig {
            n_pulses: 0,
            ..base.clone()
        })
        .is_err());
        assert!(simulate_link(&McConfig {
            ir_fraction: 1.5,
            ..base.clone()
        })
        .is_err());
        assert!(simulate_link(&McConfig {
            bob_delays: vec![],
            ..base.clone()
        })
        .is_err());
        assert!(simulate_link(&McConfig {
            eve_delay_m: 0,
            ..base
        })
        .is_err());
    }

    #[test]
    fn standard_error_halves_with_four_times_windows() {
        let s = toy(0.2, 0.5, 1e-4, 0.01);
        let a = simulate_link(&McConfig::link(s.clone(), 250_000, 2)).unwrap();
        let b = simulate_link(&McConfig::link(s, 1_000_000, 2)).unwrap();
        let ratio = b.p_click.se / (a.p_click.se / 2.0);
        assert!((ratio - 1.0).abs() < 0.2, "{ratio}");
    }
}
