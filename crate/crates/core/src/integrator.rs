//! Time integration of the nonlinear mode equations with trajectory
//! recording and late-time classification.

use std::f64::consts::FRAC_PI_4;
use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::ModelError;
use crate::model::{self, DriveModulation, ModeState, SystemParams};
use crate::ode::{self, AdaptiveConfig, Dopri5, StepError};

pub const DEFAULT_OVERFLOW_GUARD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Rk4 { dt: f64 },
    Rk45 { rtol: f64, atol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub method: Method,
    pub t_end: f64,
    /// keep every n-th step (ignored when `output_interval` is set)
    pub sample_stride: usize,
    /// fixed sampling grid spacing
    pub output_interval: Option<f64>,
    /// magnitude of the perturbation added to `a2` and `b` of the initial state
    pub seed_eps: f64,
    /// phase of that perturbation, radians
    pub seed_phase: f64,
    pub overflow_guard: f64,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: Method::Rk45 {
                rtol: 1e-9,
                atol: 1e-15,
            },
            t_end: 1.0,
            sample_stride: 1,
            output_interval: None,
            seed_eps: 0.0,
            seed_phase: FRAC_PI_4,
            overflow_guard: DEFAULT_OVERFLOW_GUARD,
            max_steps: 50_000_000,
        }
    }
}

impl SolverOptions {
    /// Defaults for steady-state studies: horizon `50 / min(gamma0, gamma2)`
    /// and a seed `1e-6 * amp0 / gamma1`.
    pub fn steady_state(params: &SystemParams, drive: &DriveModulation) -> Self {
        SolverOptions {
            t_end: default_horizon(params),
            seed_eps: default_seed(params, drive.amp0),
            ..SolverOptions::default()
        }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        let bad = |m: &str| Err(IntegrateError::InvalidOptions(m.to_string()));
        match self.method {
            Method::Rk4 { dt } if !(dt > 0.0 && dt.is_finite()) => return bad("dt must be > 0"),
            Method::Rk45 { rtol, atol } if !(rtol > 0.0 && atol > 0.0) => {
                return bad("rtol and atol must be > 0")
            }
            _ => {}
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be > 0");
        }
        if self.sample_stride == 0 {
            return bad("sample_stride must be >= 1");
        }
        if let Some(iv) = self.output_interval {
            if !(iv > 0.0 && iv.is_finite()) {
                return bad("output_interval must be > 0");
            }
        }
        if !(self.seed_eps >= 0.0 && self.seed_eps.is_finite()) {
            return bad("seed_eps must be >= 0");
        }
        if !(self.overflow_guard > 0.0) {
            return bad("overflow_guard must be > 0");
        }
        Ok(())
    }

    /// Complex seed `seed_eps * exp(i seed_phase)`.
    pub fn seed(&self) -> Complex64 {
        Complex64::from_polar(self.seed_eps, self.seed_phase)
    }
}

/// `50 / min(gamma0, gamma2)`: the slowest rate sets the transient.
pub fn default_horizon(params: &SystemParams) -> f64 {
    50.0 / params.gamma0.min(params.gamma2)
}

/// `1e-6 * amp0 / gamma1`
pub fn default_seed(params: &SystemParams, amp0: f64) -> f64 {
    1e-6 * amp0 / params.gamma1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ModeState>,
    pub params_digest: String,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &ModeState)> {
        self.times.last().copied().zip(self.states.last())
    }

    /// Intensity series: index 0 = |a1|^2, 1 = |a2|^2, 2 = |b|^2.
    pub fn intensity(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.intensities()[index]).collect()
    }

    fn push(&mut self, t: f64, s: ModeState) {
        if self.times.last().map_or(true, |&last| t > last) {
            self.times.push(t);
            self.states.push(s);
        }
    }

    /// Appends `other`, dropping samples not strictly after the current end.
    pub fn extend(&mut self, other: &Trajectory) {
        for (t, st) in other.times.iter().zip(&other.states) {
            self.push(*t, *st);
        }
    }

    /// CSV with a one-line schema header carrying the digest, then a column row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# optomech trajectory v1 params_digest={}", self.params_digest)?;
        writeln!(w, "t,re_a1,im_a1,re_a2,im_a2,re_b,im_b,abs2_a1,abs2_a2,abs2_b")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let [i1, i2, ib] = s.intensities();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_f64(*t),
                fmt_f64(s.a1.re),
                fmt_f64(s.a1.im),
                fmt_f64(s.a2.re),
                fmt_f64(s.a2.im),
                fmt_f64(s.b.re),
                fmt_f64(s.b.im),
                fmt_f64(i1),
                fmt_f64(i2),
                fmt_f64(ib)
            )?;
        }
        Ok(())
    }
}

/// 17 significant digits, round-trip safe.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reproducibility hash over the inputs of an integration.
pub fn params_digest(params: &SystemParams, drive: &DriveModulation, opts: &SolverOptions) -> String {
    let mut h = Sha256::new();
    h.update(format!("{params:?}|{drive:?}|{opts:?}").as_bytes());
    hex::encode(&h.finalize()[..16])
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("state norm {norm:e} exceeded the overflow guard at t = {t:e}")]
    Divergence {
        t: f64,
        norm: f64,
        partial: Box<Trajectory>,
    },
}

/// Integrates the rotating-frame mode equations from `init` (plus the seed
/// perturbation on `a2` and `b`) over `[0, opts.t_end]`.
pub fn integrate(
    params: &SystemParams,
    drive: &DriveModulation,
    init: &ModeState,
    opts: &SolverOptions,
) -> Result<Trajectory, IntegrateError> {
    let seed = opts.seed();
    let start = ModeState::new(init.a1, init.a2 + seed, init.b + seed);
    integrate_from(params, drive, 0.0, &start, opts)
}

/// Integrates over `[t0, t0 + opts.t_end]` starting exactly at `state` (no
/// seed is added).
pub fn integrate_from(
    params: &SystemParams,
    drive: &DriveModulation,
    t0: f64,
    state: &ModeState,
    opts: &SolverOptions,
) -> Result<Trajectory, IntegrateError> {
    params.validate()?;
    drive.validate()?;
    state.check_finite()?;
    opts.validate()?;
    if !(t0.is_finite() && t0 >= 0.0) {
        return Err(IntegrateError::InvalidOptions(format!("start time {t0} must be >= 0")));
    }

    let start = *state;
    let t_stop = t0 + opts.t_end;
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![start],
        params_digest: params_digest(params, drive, opts),
    };
    let mut f = |t: f64, y: &[Complex64; 3]| model::rhs_unchecked(y, t, params, drive);
    let guard = opts.overflow_guard;

    match opts.method {
        Method::Rk4 { dt } => {
            let stride = match opts.output_interval {
                Some(iv) => ((iv / dt).round() as usize).max(1),
                None => opts.sample_stride,
            };
            let n = (opts.t_end / dt).ceil() as usize;
            if n > opts.max_steps {
                return Err(StepError::TooManySteps {
                    t: t0,
                    max_steps: opts.max_steps,
                }
                .into());
            }
            let mut y = start.to_array();
            for k in 0..n {
                let t = t0 + k as f64 * dt;
                let last = k + 1 == n;
                let h = if last { t_stop - t } else { dt };
                y = ode::rk4_step(&mut f, t, &y, h);
                let t_new = if last { t_stop } else { t0 + (k + 1) as f64 * dt };
                let s = ModeState::from_array(y);
                check_guard(&mut traj, t_new, &s, guard)?;
                if (k + 1) % stride == 0 || last {
                    traj.push(t_new, s);
                }
            }
        }
        Method::Rk45 { rtol, atol } => {
            let mut cfg = AdaptiveConfig::new(rtol, atol);
            cfg.max_steps = opts.max_steps;
            let mut stepper = Dopri5::new(t0, start.to_array(), cfg);
            match opts.output_interval {
                Some(iv) => {
                    let n = (opts.t_end / iv).ceil() as usize;
                    for k in 1..=n {
                        let target = (t0 + k as f64 * iv).min(t_stop);
                        stepper.advance(&mut f, target, |t, y| {
                            check_guard(&mut traj, t, &ModeState::from_array(*y), guard)
                        })?;
                        traj.push(stepper.t, ModeState::from_array(stepper.y));
                    }
                }
                None => {
                    let stride = opts.sample_stride;
                    let mut count = 0usize;
                    stepper.advance(&mut f, t_stop, |t, y| {
                        let s = ModeState::from_array(*y);
                        check_guard(&mut traj, t, &s, guard)?;
                        count += 1;
                        if count % stride == 0 {
                            traj.push(t, s);
                        }
                        Ok::<(), IntegrateError>(())
                    })?;
                    traj.push(stepper.t, ModeState::from_array(stepper.y));
                }
            }
        }
    }
    Ok(traj)
}

fn check_guard(traj: &mut Trajectory, t: f64, s: &ModeState, guard: f64) -> Result<(), IntegrateError> {
    let norm = s.norm();
    if norm.is_finite() && norm <= guard {
        return Ok(());
    }
    Err(IntegrateError::Divergence {
        t,
        norm,
        partial: Box::new(traj.clone()),
    })
}

/// Subthreshold fixed point of the mean drive amplitude. Above threshold the
/// same formula is used as a starting point.
pub fn pump_start(params: &SystemParams, drive: &DriveModulation) -> Result<ModeState, ModelError> {
    model::stationary_below_threshold(params, drive.envelope(0.0), true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyClass {
    Decayed,
    SteadyNonzero,
    Growing,
    Oscillating,
}

impl SteadyClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            SteadyClass::Decayed => "decayed",
            SteadyClass::SteadyNonzero => "steady_nonzero",
            SteadyClass::Growing => "growing",
            SteadyClass::Oscillating => "oscillating",
        }
    }

    /// Anything but decay counts as generation.
    pub fn is_generating(&self) -> bool {
        !matches!(self, SteadyClass::Decayed)
    }
}

impl std::fmt::Display for SteadyClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// length of each of the three trailing windows
    pub window: f64,
    /// intensity below which `|a2|^2` and `|b|^2` count as zero
    pub floor: f64,
    /// relative change between the last two window averages counted as steady
    pub drift_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WindowError {
    #[error("trajectory spans {span:e}, need three windows of {window:e}")]
    TooShort { span: f64, window: f64 },
    #[error("window ending at t = {t_end:e} holds {count} samples, need at least 2")]
    TooFewSamples { t_end: f64, count: usize },
}

/// Classifies the late-time behaviour of `|a2|^2` and `|b|^2` from the three
/// trailing windows of the trajectory.
pub fn classify_steady(traj: &Trajectory, opts: &ClassifyOptions) -> Result<SteadyClass, WindowError> {
    let (t0, t1) = match (traj.times.first(), traj.times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => {
            return Err(WindowError::TooShort {
                span: 0.0,
                window: opts.window,
            })
        }
    };
    if t1 - t0 < 3.0 * opts.window * (1.0 - 1e-12) {
        return Err(WindowError::TooShort {
            span: t1 - t0,
            window: opts.window,
        });
    }
    let mut avg = [[0.0; 2]; 3];
    let mut peak = [0.0f64; 2];
    for (w, slot) in avg.iter_mut().enumerate() {
        let hi = t1 - (2 - w) as f64 * opts.window;
        let lo = hi - opts.window;
        let mut sum = [0.0; 2];
        let mut count = 0usize;
        for (t, s) in traj.times.iter().zip(&traj.states) {
            if *t >= lo && *t <= hi {
                let [_, i2, ib] = s.intensities();
                sum[0] += i2;
                sum[1] += ib;
                count += 1;
                if w == 2 {
                    peak[0] = peak[0].max(i2);
                    peak[1] = peak[1].max(ib);
                }
            }
        }
        if count < 2 {
            return Err(WindowError::TooFewSamples { t_end: hi, count });
        }
        *slot = [sum[0] / count as f64, sum[1] / count as f64];
    }
    if peak[0] < opts.floor && peak[1] < opts.floor {
        return Ok(SteadyClass::Decayed);
    }
    let steady = (0..2).all(|k| {
        let last = avg[2][k];
        last > 0.0 && ((last - avg[1][k]) / last).abs() < opts.drift_tol
    });
    if steady {
        return Ok(SteadyClass::SteadyNonzero);
    }
    let total = |w: usize| avg[w][0] + avg[w][1];
    if total(0) < total(1) && total(1) < total(2) {
        Ok(SteadyClass::Growing)
    } else {
        Ok(SteadyClass::Oscillating)
    }
}
