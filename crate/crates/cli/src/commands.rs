//! Subcommands. Each writes its CSV files, the resolved configuration and a
//! metadata sidecar into the output directory and returns summary lines for
//! stdout.

use std::fmt;

use optomech::integrator::{self, classify_steady, fmt_f64, ClassifyOptions, IntegrateError, SteadyClass, Trajectory};
use optomech::model::{self, DriveModulation};
use optomech::sweep::{self, ScanKind};
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig};
use crate::error::CliError;
use crate::output::OutDir;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Stationary,
    Eigen,
    Threshold { nonlinear: bool },
    Simulate,
    Scan,
    Tongue,
    TransistorDemo,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Stationary => "stationary",
            Command::Eigen => "eigen",
            Command::Threshold { .. } => "threshold",
            Command::Simulate => "simulate",
            Command::Scan => "scan",
            Command::Tongue => "tongue",
            Command::TransistorDemo => "transistor-demo",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

struct Summary {
    lines: Vec<String>,
    meta: Value,
}

/// Runs `cmd`; `force` permits evaluating the stationary state above threshold.
pub fn run(cmd: Command, cfg: &RunConfig, force: bool) -> Result<Vec<String>, CliError> {
    let mut out = OutDir::create(&cfg.out_dir)?;
    let echo = cfg.to_toml();
    out.write("config.resolved.toml", |w| w.write_all(echo.as_bytes()))?;
    let result = match cmd {
        Command::Stationary => stationary(cfg, force, &mut out),
        Command::Eigen => eigen(cfg, &mut out),
        Command::Threshold { nonlinear } => threshold(cfg, nonlinear, &mut out),
        Command::Simulate => simulate(cfg, &mut out),
        Command::Scan => scan(cfg, &mut out),
        Command::Tongue => tongue(cfg, &mut out),
        Command::TransistorDemo => transistor(cfg, &mut out),
    };
    let (summary, failure) = match result {
        Ok(s) => (Some(s), None),
        Err((s, e)) => (s, Some(e)),
    };
    if let Some(summary) = &summary {
        let meta = json!({
            "config": cfg,
            "summary": summary.meta,
            "error": failure.as_ref().map(|e| e.to_string()),
        });
        out.write_sidecar(cmd.name(), &echo, meta)?;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(summary.map(|s| s.lines).unwrap_or_default()),
    }
}

/// A failure, optionally with partial results that still get a sidecar.
type Outcome = Result<Summary, (Option<Summary>, CliError)>;

fn fail(e: CliError) -> (Option<Summary>, CliError) {
    (None, e)
}

fn numeric(e: impl fmt::Display) -> (Option<Summary>, CliError) {
    fail(CliError::numeric(e))
}

fn stationary(cfg: &RunConfig, force: bool, out: &mut OutDir) -> Outcome {
    let p = &cfg.params;
    let amp = cfg.drive.amp0;
    let s = model::stationary_below_threshold(p, amp, force).map_err(|e| {
        numeric(match e {
            model_err @ optomech::ModelError::UnstableFixedPoint { .. } => format!("{model_err} (use --force)"),
            other => other.to_string(),
        })
    })?;
    let ev = model::eigenvalues_linearized(p, amp).map_err(numeric)?;
    let regime = model::coupling_regime(p, amp)
        .map(|r| r.as_str().to_string())
        .unwrap_or_else(|_| "n/a".into());
    out.write("stationary.csv", |w| {
        writeln!(w, "# optomech stationary v1")?;
        writeln!(
            w,
            "amp,re_a1,im_a1,re_a2,im_a2,re_b,im_b,abs2_a1,re_lambda1,im_lambda1,re_lambda2,im_lambda2,regime"
        )?;
        let cells = [
            amp,
            s.a1.re,
            s.a1.im,
            s.a2.re,
            s.a2.im,
            s.b.re,
            s.b.im,
            s.a1.norm_sqr(),
            ev.lambda1.re,
            ev.lambda1.im,
            ev.lambda2.re,
            ev.lambda2.im,
        ];
        let row: Vec<String> = cells.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "{},{regime}", row.join(","))
    })
    .map_err(fail)?;
    Ok(Summary {
        lines: vec![
            format!("amp = {}", fmt_f64(amp)),
            format!("a1 = {} {:+e}i, |a1|^2 = {}", fmt_f64(s.a1.re), s.a1.im, fmt_f64(s.a1.norm_sqr())),
            format!("lambda1 = {} {:+e}i", fmt_f64(ev.lambda1.re), ev.lambda1.im),
            format!("lambda2 = {} {:+e}i", fmt_f64(ev.lambda2.re), ev.lambda2.im),
            format!("regime = {regime}"),
        ],
        meta: json!({ "amp": amp, "abs2_a1": s.a1.norm_sqr(), "regime": regime }),
    })
}

fn eigen(cfg: &RunConfig, out: &mut OutDir) -> Outcome {
    let spec = sweep::ScanSpec {
        kind: ScanKind::Eigenvalues,
        ..cfg.scan_spec()
    };
    let table = sweep::run_scan(&spec, &cfg.steady_settings(), &cfg.floquet).map_err(numeric)?;
    out.write("eigen.csv", |w| table.write_csv(w)).map_err(fail)?;
    let ep = model::ep_amplitude(&cfg.params).ok();
    Ok(Summary {
        lines: vec![
            format!("{} amplitudes, {} failed", table.rows.len(), table.failures()),
            format!("exceptional point: {}", ep.map_or("none".into(), fmt_f64)),
        ],
        meta: json!({ "rows": table.rows.len(), "failures": table.failures(), "ep_amplitude": ep }),
    })
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn threshold(cfg: &RunConfig, nonlinear: bool, out: &mut OutDir) -> Outcome {
    let p = &cfg.params;
    let th = model::threshold_amplitude(p).map_err(numeric)?;
    let th_c = model::threshold_amplitude_closed_form(p).ok();
    let ep = model::ep_amplitude(p).ok();
    let ep_c = model::ep_amplitude_closed_form(p).ok();
    let mut rows: Vec<(&str, f64, f64)> = vec![
        ("exceptional_point", ep.unwrap_or(f64::NAN), ep_c.unwrap_or(f64::NAN)),
        ("threshold", th, th_c.unwrap_or(f64::NAN)),
    ];
    let nl = if nonlinear {
        let (lo, hi) = cfg.scan.bracket;
        let v = sweep::bisect_generation_threshold(p, (lo * th, hi * th), cfg.scan.bisect_tol, &cfg.steady_settings())
            .map_err(numeric)?;
        rows.push(("threshold_nonlinear", v, th));
        Some(v)
    } else {
        None
    };
    out.write("threshold.csv", |w| {
        writeln!(w, "# optomech threshold v1")?;
        writeln!(w, "quantity,value,reference,rel_diff")?;
        for (name, v, r) in &rows {
            writeln!(w, "{name},{},{},{}", fmt_f64(*v), fmt_f64(*r), fmt_f64(rel(*v, *r)))?;
        }
        Ok(())
    })
    .map_err(fail)?;
    let mut lines = Vec::new();
    for (name, v, r) in &rows {
        let label = if *name == "threshold_nonlinear" { "linear" } else { "closed form" };
        lines.push(format!(
            "{name}: {} ({label} {}, rel diff {:.3e})",
            fmt_f64(*v),
            fmt_f64(*r),
            rel(*v, *r)
        ));
    }
    Ok(Summary {
        lines,
        meta: json!({
            "threshold_root": th,
            "threshold_closed_form": th_c,
            "ep_root": ep,
            "ep_closed_form": ep_c,
            "threshold_nonlinear": nl,
        }),
    })
}

fn classification(traj: &Trajectory, cfg: &RunConfig) -> Option<SteadyClass> {
    let seed = cfg.solver.seed_eps;
    let opts = ClassifyOptions {
        window: cfg.solver.t_end / cfg.windows as f64,
        floor: (seed * seed).max(f64::MIN_POSITIVE),
        drift_tol: cfg.drift_tol,
    };
    classify_steady(traj, &opts).ok()
}

fn trajectory_meta(traj: &Trajectory, seed_eps: f64, class: Option<SteadyClass>) -> Value {
    let i2 = traj.intensity(1);
    let peak = i2.iter().copied().fold(0.0, f64::max);
    let seed_i = seed_eps * seed_eps;
    json!({
        "samples": traj.len(),
        "t_final": traj.last().map(|(t, _)| t),
        "final_intensities": traj.last().map(|(_, s)| s.intensities()),
        "peak_abs2_a2": peak,
        "seed_intensity": seed_i,
        "growth_decades": if seed_i > 0.0 && peak > 0.0 { (peak / seed_i).log10() } else { f64::NAN },
        "class": class.map(|c| c.as_str()),
        "params_digest": traj.params_digest,
    })
}

fn simulate(cfg: &RunConfig, out: &mut OutDir) -> Outcome {
    let init = integrator::pump_start(&cfg.params, &cfg.drive).map_err(numeric)?;
    let (traj, err) = match integrator::integrate(&cfg.params, &cfg.drive, &init, &cfg.solver) {
        Ok(t) => (t, None),
        Err(IntegrateError::Divergence { t, norm, partial }) => {
            let msg = format!("state norm {norm:e} exceeded the overflow guard at t = {t:e}");
            (*partial, Some(CliError::Numeric(msg)))
        }
        Err(e) => return Err(numeric(e)),
    };
    out.write("trajectory.csv", |w| traj.write_csv(w)).map_err(fail)?;
    let class = if err.is_none() { classification(&traj, cfg) } else { None };
    let meta = trajectory_meta(&traj, cfg.solver.seed_eps, class);
    let decades = meta["growth_decades"].as_f64().unwrap_or(f64::NAN);
    let summary = Summary {
        lines: vec![
            format!("{} samples to t = {}", traj.len(), fmt_f64(traj.last().map_or(0.0, |(t, _)| t))),
            format!("peak |a2|^2 / seed = 1e{decades:.2}"),
            format!("late-time class: {}", class.map_or("n/a", |c| c.as_str())),
        ],
        meta,
    };
    match err {
        None => Ok(summary),
        Some(e) => Err((Some(summary), e)),
    }
}

fn scan(cfg: &RunConfig, out: &mut OutDir) -> Outcome {
    let spec = cfg.scan_spec();
    let table = sweep::run_scan(&spec, &cfg.steady_settings(), &cfg.floquet).map_err(numeric)?;
    out.write("scan.csv", |w| table.write_csv(w)).map_err(fail)?;
    Ok(Summary {
        lines: vec![format!(
            "{} scan over {} amplitudes, {} failed",
            spec.kind.as_str(),
            table.rows.len(),
            table.failures()
        )],
        meta: json!({ "kind": spec.kind.as_str(), "rows": table.rows.len(), "failures": table.failures() }),
    })
}

fn tongue(cfg: &RunConfig, out: &mut OutDir) -> Outcome {
    let th = model::threshold_amplitude(&cfg.params).map_err(numeric)?;
    let ratio = cfg.drive.amp0 / th;
    let grid = sweep::tongue_map(
        &cfg.params,
        ratio,
        &cfg.scan.mod_freq_axis,
        &cfg.scan.alpha_axis,
        cfg.drive.phase_mode,
        &cfg.floquet,
    )
    .map_err(numeric)?;
    out.write("tongue.csv", |w| grid.write_csv(w)).map_err(fail)?;
    let positive = grid.positive_cells().len();
    let violations = grid.monotonicity_violations(5);
    Ok(Summary {
        lines: vec![
            format!(
                "{}x{} grid at amp0 = {} amp_th, omega_p = {}",
                grid.alphas.len(),
                grid.mod_freq_ratios.len(),
                fmt_f64(ratio),
                fmt_f64(grid.omega_p)
            ),
            format!("{positive} cells with positive growth, {} failed", grid.failures()),
            format!("max Liouville residual {:.3e}", grid.max_residual()),
            format!("{} monotonicity violations near tongue tips", violations.len()),
        ],
        meta: json!({
            "amp0": grid.amp0,
            "amp0_ratio": ratio,
            "threshold": grid.threshold,
            "omega_p": grid.omega_p,
            "positive_cells": positive,
            "failures": grid.failures(),
            "max_liouville_residual": grid.max_residual(),
            "monotonicity_violations": violations,
        }),
    })
}

fn transistor(cfg: &RunConfig, out: &mut OutDir) -> Outcome {
    let d = &cfg.drive;
    if !(d.alpha > 0.0) {
        return Err(fail(CliError::Config(ConfigError {
            key: "drive.alpha".into(),
            line: None,
            message: "transistor-demo needs alpha > 0 for the sidebands".into(),
        })));
    }
    let tw = model::three_wave_drive(d.amp0, d.alpha, d.mod_freq, cfg.params.drive_freq);
    let period = 2.0 * std::f64::consts::PI / d.mod_freq;
    let synthesis_error = (0..=1000)
        .map(|k| {
            let t = period * k as f64 / 1000.0;
            let target = model::drive_amplitude(&tw.modulation, t)
                * optomech::Complex64::from_polar(1.0, -cfg.params.drive_freq * t);
            (tw.field(t) - target).norm() / d.amp0
        })
        .fold(0.0, f64::max);
    out.write("waves.csv", |w| {
        writeln!(w, "# optomech three-wave drive v1")?;
        writeln!(w, "wave,frequency,re_amplitude,im_amplitude,intensity,relative_intensity")?;
        let carrier = tw.waves[0].intensity();
        for (name, wave) in ["carrier", "lower", "upper"].iter().zip(&tw.waves) {
            writeln!(
                w,
                "{name},{},{},{},{},{}",
                fmt_f64(wave.frequency),
                fmt_f64(wave.amplitude.re),
                fmt_f64(wave.amplitude.im),
                fmt_f64(wave.intensity()),
                fmt_f64(wave.intensity() / carrier)
            )?;
        }
        Ok(())
    })
    .map_err(fail)?;

    let settings = cfg.steady_settings();
    let off_drive = DriveModulation::constant(d.amp0);
    let (on, off) = rayon::join(
        || sweep::simulate_steady(&cfg.params, &tw.modulation, &settings),
        || sweep::simulate_steady(&cfg.params, &off_drive, &settings),
    );
    let on = on.map_err(numeric)?;
    let off = off.map_err(numeric)?;
    out.write("transistor_on.csv", |w| on.trajectory.write_csv(w)).map_err(fail)?;
    out.write("transistor_off.csv", |w| off.trajectory.write_csv(w)).map_err(fail)?;
    let switched = on.class.is_generating() && off.class == SteadyClass::Decayed;
    let seed = settings.seed_for(&cfg.params, d);
    Ok(Summary {
        lines: vec![
            format!(
                "sideband/carrier intensity = {} (alpha^2/4 = {})",
                fmt_f64(tw.sideband_ratio()),
                fmt_f64(d.alpha * d.alpha / 4.0)
            ),
            format!("synthesis error (relative) = {synthesis_error:.3e}"),
            format!("sidebands on:  {}", on.class),
            format!("sidebands off: {}", off.class),
            format!("switching {}", if switched { "observed" } else { "not observed" }),
        ],
        meta: json!({
            "sideband_ratio": tw.sideband_ratio(),
            "synthesis_error": synthesis_error,
            "on": trajectory_meta(&on.trajectory, seed, Some(on.class)),
            "off": trajectory_meta(&off.trajectory, seed, Some(off.class)),
            "switched": switched,
        }),
    })
}
