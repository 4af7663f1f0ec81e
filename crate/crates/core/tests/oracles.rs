//! Brute-force oracles for the searches in `detector` and `rate`.

use dpsrk::cli::{DetectorChoice, PresetRegistry};
use dpsrk::detector::{
    nep, optimize_pump, up_dark_rate, up_efficiency, DetectorSpec, UpConversionCurve,
};
use dpsrk::link::LinkScenario;
use dpsrk::rate::{max_secure_distance, optimize_mu, secure_rate_with, ErrorCorrection};
use dpsrk::security::{AttackLabel, AttackModel};

fn nep_at(c: &UpConversionCurve, p: f64) -> f64 {
    let eta = up_efficiency(c, p).unwrap();
    if eta <= 0.0 {
        return f64::INFINITY;
    }
    nep(up_dark_rate(c, p).unwrap(), eta).unwrap()
}

#[test]
fn pump_optimum_matches_dense_grid() {
    let c = UpConversionCurve::reference();
    for (lo, hi) in [(1e-4, 0.5), (1e-4, 0.03), (0.01, 0.2)] {
        let op = optimize_pump(&c, (lo, hi)).unwrap();
        let n = 100_000;
        let (mut best_p, mut best_v) = (lo, f64::INFINITY);
        for i in 0..n {
            let p = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let v = nep_at(&c, p);
            if v < best_v {
                best_v = v;
                best_p = p;
            }
        }
        assert!(
            (op.pump_mw - best_p).abs() < 1e-4,
            "[{lo}, {hi}]: {} vs {best_p}",
            op.pump_mw
        );
        assert!(op.nep <= best_v * (1.0 + 1e-9));
    }
}

#[test]
fn pump_optimum_frozen_value() {
    // independent high-precision grid minimum
    let op = optimize_pump(&UpConversionCurve::reference(), (1e-4, 0.5)).unwrap();
    assert!((op.pump_mw - 0.0269296).abs() < 1e-5, "{}", op.pump_mw);
    assert!((op.nep - 26.1554).abs() < 1e-3, "{}", op.nep);
}

#[test]
fn mu_optimum_matches_dense_grid() {
    let reg = PresetRegistry::builtin();
    let ec = ErrorCorrection::default();
    for (preset, det, label, length) in [
        ("fig3", DetectorChoice::Si, AttackLabel::HybridMem, 100.0),
        (
            "fig3",
            DetectorChoice::Ingaas,
            AttackLabel::HybridNomem,
            60.0,
        ),
        ("fig7", DetectorChoice::Si, AttackLabel::IndividualMem, 30.0),
        (
            "fig12",
            DetectorChoice::Ingaas,
            AttackLabel::IndividualNomem,
            40.0,
        ),
    ] {
        let (s, a) = reg
            .get(preset)
            .unwrap()
            .scenario(det, 10, label)
            .build(length)
            .unwrap();
        let got = optimize_mu(&s, &a, &ec, (0.001, 1.0)).unwrap();
        let n = 10_000;
        let mut best = 0.0f64;
        for i in 0..n {
            let mu = 0.001 + 0.999 * i as f64 / (n - 1) as f64;
            let r = secure_rate_with(&s.with_mu(mu), &a, &ec)
                .unwrap()
                .secure_rate_deadtime_hz;
            best = best.max(r);
        }
        let r = got.point.secure_rate_deadtime_hz;
        assert!(
            r >= best * (1.0 - 1e-6),
            "{preset} {label}: {r} < grid {best}"
        );
    }
}

#[test]
fn memory_attack_optimum_is_quarter_photon() {
    let det = DetectorSpec {
        dark_per_window: 0.0,
        dead_time_s: 0.0,
        ..DetectorSpec::si_upconversion()
    };
    for length in [50.0, 150.0, 250.0] {
        let s = LinkScenario::new(0.2, 0.21, length, 1e9, 0.0, det.clone(), 100).unwrap();
        let a = AttackModel::hybrid(true, 100).unwrap();
        let mu = optimize_mu(&s, &a, &ErrorCorrection::default(), (0.001, 1.0))
            .unwrap()
            .mu;
        let eta_bs = s.detector.efficiency * 10f64.powf(-(0.21 * length + 2.1) / 10.0);
        let exact = 1.0 / (4.0 * (1.0 - eta_bs));
        assert!((mu - exact).abs() < 1e-4, "L={length}: {mu} vs {exact}");
    }
}

#[test]
fn max_distance_matches_fine_sweep() {
    let reg = PresetRegistry::builtin();
    let ec = ErrorCorrection::default();
    for name in ["fig3", "fig5", "fig9", "fig12"] {
        for det in [DetectorChoice::Si, DetectorChoice::Ingaas] {
            for n in [1, 100] {
                let file = reg
                    .get(name)
                    .unwrap()
                    .scenario(det, n, AttackLabel::HybridNomem);
                let (s, a) = file.build(0.0).unwrap();
                let Ok(bisect) = max_secure_distance(&s, &a, &ec, 0.0) else {
                    continue;
                };
                let mut last = 0.0;
                for i in 0..=4000 {
                    let l = i as f64 * 0.1;
                    if secure_rate_with(&s.with_length(l), &a, &ec)
                        .unwrap()
                        .secure_rate_deadtime_hz
                        > 0.0
                    {
                        last = l;
                    }
                }
                assert!(
                    (bisect - last).abs() <= 0.11,
                    "{name} {det} N={n}: bisect {bisect} sweep {last}"
                );
            }
        }
    }
}
