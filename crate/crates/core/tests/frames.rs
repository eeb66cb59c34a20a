use optomech::integrator::{self, Method, SolverOptions};
use optomech::model::{self, DriveModulation, ModeState, PhaseMode, SystemParams};
use optomech::ode::{AdaptiveConfig, Dopri5, StepError};
use optomech::Complex64;

fn p_star() -> SystemParams {
    SystemParams::reference()
}

fn fig3_drive(p: &SystemParams) -> DriveModulation {
    let th = model::threshold_amplitude(p).unwrap();
    let wp = model::parametric_frequency(p, 0.9 * th).unwrap();
    DriveModulation::modulated(0.9 * th, 0.17, 1.09 * wp, PhaseMode::Sin)
}

#[test]
fn lab_frame_matches_rotating_frame() {
    let p = p_star();
    let drive = fig3_drive(&p);
    let init = ModeState::new(
        Complex64::new(0.01, -0.02),
        Complex64::new(1e-3, 2e-3),
        Complex64::new(-2e-3, 1e-3),
    );
    let t_end = 2000.0;
    let opts = SolverOptions {
        method: Method::Rk45 {
            rtol: 1e-12,
            atol: 1e-16,
        },
        t_end,
        output_interval: Some(100.0),
        ..SolverOptions::default()
    };
    let rot = integrator::integrate(&p, &drive, &init, &opts).unwrap();

    let mut f = |t: f64, y: &[Complex64; 3]| {
        model::rhs_lab_frame(&ModeState::from_array(*y), t, &p, &drive)
            .unwrap()
            .to_array()
    };
    let mut lab = Dopri5::new(0.0, init.to_array(), AdaptiveConfig::new(1e-12, 1e-16));
    let mut worst = 0.0f64;
    for (t, s) in rot.times.iter().zip(&rot.states).skip(1) {
        lab.advance::<_, _, StepError>(&mut f, *t, |_, _| Ok(())).unwrap();
        let back = Complex64::from_polar(1.0, p.drive_freq * t);
        let y = lab.y;
        let d = [y[0] * back - s.a1, y[1] * back - s.a2, y[2] - s.b];
        worst = worst.max(d.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    assert!(worst < 1e-7, "frame mismatch {worst:e}");
}

fn max_state_diff(a: &integrator::Trajectory, b: &integrator::Trajectory) -> f64 {
    assert_eq!(a.times.len(), b.times.len());
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| (*x - *y).norm())
        .fold(0.0, f64::max)
}

#[test]
fn adaptive_and_fixed_step_agree() {
    let p = p_star();
    let th = model::threshold_amplitude(&p).unwrap();
    let rtol = 1e-10;
    let scenarios = [
        DriveModulation::constant(0.5 * th),
        DriveModulation::constant(1.5 * th),
        fig3_drive(&p),
    ];
    for drive in scenarios {
        let init = integrator::pump_start(&p, &drive).unwrap();
        let base = SolverOptions {
            t_end: 2e4,
            output_interval: Some(500.0),
            seed_eps: 1e-3,
            ..SolverOptions::default()
        };
        let adaptive = integrator::integrate(
            &p,
            &drive,
            &init,
            &SolverOptions {
                method: Method::Rk45 { rtol, atol: 1e-16 },
                ..base
            },
        )
        .unwrap();
        let fixed = integrator::integrate(
            &p,
            &drive,
            &init,
            &SolverOptions {
                method: Method::Rk4 { dt: 0.25 },
                ..base
            },
        )
        .unwrap();
        let d = max_state_diff(&adaptive, &fixed);
        assert!(d <= (10.0 * rtol).max(1e-7), "{drive:?}: {d:e}");
    }
}

#[test]
fn integrate_from_continues_a_run() {
    let p = p_star();
    let drive = fig3_drive(&p);
    let init = integrator::pump_start(&p, &drive).unwrap();
    let opts = SolverOptions {
        method: Method::Rk4 { dt: 0.5 },
        t_end: 1000.0,
        seed_eps: 1e-4,
        ..SolverOptions::default()
    };
    let whole = integrator::integrate(&p, &drive, &init, &opts).unwrap();
    let half = SolverOptions { t_end: 500.0, ..opts };
    let first = integrator::integrate(&p, &drive, &init, &half).unwrap();
    let (t, s) = first.last().unwrap();
    let second = integrator::integrate_from(&p, &drive, t, s, &half).unwrap();
    let (t_end, end) = second.last().unwrap();
    assert_eq!(t_end, 1000.0);
    let (_, expect) = whole.last().unwrap();
    assert!((*end - *expect).norm() < 1e-14);
}

#[test]
fn subthreshold_seed_relaxes_below_seed_level() {
    let p = p_star();
    let th = model::threshold_amplitude(&p).unwrap();
    let drive = DriveModulation::constant(0.5 * th);
    let mut opts = SolverOptions::steady_state(&p, &drive);
    opts.seed_eps = 1e-6;
    opts.output_interval = Some(1000.0);
    let init = model::stationary_below_threshold(&p, 0.5 * th, false).unwrap();
    let tr = integrator::integrate(&p, &drive, &init, &opts).unwrap();
    let [_, i2, ib] = tr.last().unwrap().1.intensities();
    assert!(i2 < 1e-12 && ib < 1e-12, "{i2:e} {ib:e}");
}
