use optomech::floquet::FloquetOptions;
use optomech::integrator::SteadyClass;
use optomech::model::{self, DriveModulation, PhaseMode, SystemParams};
use optomech::sweep::{self, Axis, ScanKind, SteadySettings, SweepError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p_star() -> SystemParams {
    SystemParams::reference()
}

#[test]
fn linear_and_nonlinear_thresholds_agree_on_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..5 {
        let gamma = rng.random_range(5e-4..2e-3);
        let omega_b = rng.random_range(5e-3..2e-2);
        let p = SystemParams {
            omega1: 1.0,
            omega2: 1.0 + omega_b + rng.random_range(-2e-3..2e-3),
            omega_b,
            gamma1: rng.random_range(5e-3..2e-2),
            gamma2: gamma,
            gamma0: gamma,
            coupling: rng.random_range(0.1..0.4),
            drive_freq: 1.0 + rng.random_range(-3e-3..3e-3),
        };
        let th = model::threshold_amplitude(&p).unwrap();
        let closed = model::threshold_amplitude_closed_form(&p).unwrap();
        assert!(((th - closed) / closed).abs() < 1e-10);
        let nl = sweep::bisect_generation_threshold(&p, (0.9 * th, 1.1 * th), 1e-3, &SteadySettings::default())
            .unwrap_or_else(|e| panic!("{p:?}: {e}"));
        assert!(((nl - th) / th).abs() < 0.01, "{p:?}: nonlinear {nl:e} vs linear {th:e}");
    }
}

#[test]
fn halving_the_coupling_doubles_the_threshold() {
    let p = p_star();
    let half = SystemParams {
        coupling: 0.5 * p.coupling,
        ..p
    };
    let s = SteadySettings::default();
    let th = model::threshold_amplitude(&p).unwrap();
    let a = sweep::bisect_generation_threshold(&p, (0.8 * th, 1.2 * th), 1e-3, &s).unwrap();
    let b = sweep::bisect_generation_threshold(&half, (1.6 * th, 2.4 * th), 1e-3, &s).unwrap();
    assert!((b / a - 2.0).abs() < 0.02, "ratio {}", b / a);
}

#[test]
fn bracket_must_straddle_generation() {
    let p = p_star();
    let th = model::threshold_amplitude(&p).unwrap();
    let e = sweep::bisect_generation_threshold(&p, (1.2 * th, 1.5 * th), 1e-3, &SteadySettings::default())
        .unwrap_err();
    assert!(matches!(
        e,
        SweepError::Bracket {
            lo_class: SteadyClass::SteadyNonzero,
            ..
        }
    ));
}

#[test]
fn tongue_map_is_bit_identical_across_runs() {
    let p = p_star();
    let run = || {
        sweep::tongue_map(
            &p,
            0.9,
            &Axis::linear(0.1, 3.0, 13),
            &Axis::linear(0.0, 0.5, 6),
            PhaseMode::Sin,
            &FloquetOptions::default(),
        )
        .unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a.cells.len(), b.cells.len());
    for (x, y) in a.cells.iter().zip(&b.cells) {
        assert_eq!(x.growth_rate.to_bits(), y.growth_rate.to_bits());
    }
    let (_, nf) = a.shape();
    let l1 = model::eigenvalues_linearized(&p, a.amp0).unwrap().lambda1.re;
    for j in 0..nf {
        assert!(a.rate(0, j) < 0.0);
        assert!((a.rate(0, j) - l1).abs() < 1e-8);
    }
    assert!(!a.positive_cells().is_empty());
}

#[test]
fn floquet_scan_matches_eigenvalues_without_modulation() {
    let p = p_star();
    let amps = Axis::linear(0.0, 7e-4, 8).values();
    let fl = sweep::scan_drive_amplitude(
        &p,
        &amps,
        ScanKind::FloquetRate,
        &DriveModulation::constant(0.0),
        &SteadySettings::default(),
        &FloquetOptions {
            reference_period: Some(300.0),
            ..FloquetOptions::default()
        },
    )
    .unwrap();
    let ev = sweep::scan_drive_amplitude(
        &p,
        &amps,
        ScanKind::Eigenvalues,
        &DriveModulation::constant(0.0),
        &SteadySettings::default(),
        &FloquetOptions::default(),
    )
    .unwrap();
    let g = fl.column("growth_rate").unwrap();
    let r1 = ev.column("re_lambda1").unwrap();
    for (a, b) in g.iter().zip(&r1) {
        assert!((a - b).abs() < 1e-9, "{a:e} vs {b:e}");
    }
}

#[test]
fn steady_scan_reports_seed_level_below_threshold() {
    let p = p_star();
    let th = model::threshold_amplitude(&p).unwrap();
    let s = SteadySettings::default();
    let t = sweep::scan_drive_amplitude(
        &p,
        &[0.0, 0.5 * th, 1.2 * th],
        ScanKind::SteadyIntensities,
        &DriveModulation::constant(0.0),
        &s,
        &FloquetOptions::default(),
    )
    .unwrap();
    assert_eq!(t.rows[0].values, vec![0.0, 0.0, 0.0]);
    assert_eq!(t.rows[0].label, "decayed");
    assert_eq!(t.rows[1].label, "decayed");
    assert_eq!(t.rows[2].label, "steady_nonzero");
    // |a2|^2 and |b|^2 saturate together
    let v = &t.rows[2].values;
    assert!(((v[1] - v[2]) / v[1]).abs() < 1e-3);
}
