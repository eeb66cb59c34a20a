//! Parameter scans over drive amplitude, nonlinear threshold bisection and
//! the (modulation frequency, modulation depth) growth-rate map.
//!
//! Every scan point is an independent work item run on the current rayon
//! pool. Results are collected by index, so output order never depends on
//! scheduling, and a failing point is recorded in its row instead of
//! aborting the scan.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ModelError;
use crate::floquet::{self, FloquetError, FloquetOptions};
use crate::integrator::{
    self, classify_steady, fmt_f64, ClassifyOptions, IntegrateError, Method, SolverOptions, SteadyClass,
    Trajectory, WindowError,
};
use crate::model::{self, DriveModulation, PhaseMode, SystemParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("invalid axis: {0}")]
    InvalidAxis(String),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Floquet(#[from] FloquetError),
    #[error("bracket [{lo:e}, {hi:e}] classifies as {lo_class} / {hi_class}; need decayed below and generating above")]
    Bracket {
        lo: f64,
        hi: f64,
        lo_class: SteadyClass,
        hi_class: SteadyClass,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Axis {
    pub fn linear(min: f64, max: f64, count: usize) -> Self {
        Axis {
            min,
            max,
            count,
            spacing: Spacing::Linear,
        }
    }

    pub fn log(min: f64, max: f64, count: usize) -> Self {
        Axis {
            min,
            max,
            count,
            spacing: Spacing::Log,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.count < 2 {
            return Err(SweepError::InvalidAxis(format!("count {} must be >= 2", self.count)));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(SweepError::InvalidAxis(format!(
                "need finite min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.spacing == Spacing::Log && self.min <= 0.0 {
            return Err(SweepError::InvalidAxis(format!(
                "log spacing needs min > 0, got {}",
                self.min
            )));
        }
        Ok(())
    }

    /// Grid points, endpoints included exactly.
    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i + 1 == n {
                    return self.max;
                }
                let s = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.min + s * (self.max - self.min),
                    Spacing::Log => (self.min.ln() + s * (self.max / self.min).ln()).exp(),
                }
            })
            .collect()
    }
}

/// What the amplitude axis is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanQuantity {
    /// absolute drive amplitude, units of omega1
    #[default]
    Amp,
    /// multiples of the linear generation threshold
    AmpRatio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    #[default]
    SteadyIntensities,
    Eigenvalues,
    FloquetRate,
}

impl ScanKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanKind::SteadyIntensities => "steady_intensities",
            ScanKind::Eigenvalues => "eigenvalues",
            ScanKind::FloquetRate => "floquet_rate",
        }
    }

    pub fn columns(&self) -> &'static [&'static str] {
        match self {
            ScanKind::SteadyIntensities => &["amp", "abs2_a1", "abs2_a2", "abs2_b"],
            ScanKind::Eigenvalues => &[
                "amp",
                "re_lambda1",
                "im_lambda1",
                "re_lambda2",
                "im_lambda2",
                "gap_re",
                "gap_im",
            ],
            ScanKind::FloquetRate => &["amp", "growth_rate", "decrement", "liouville_residual"],
        }
    }

    /// Name of the text column that follows the numeric ones.
    pub fn label_column(&self) -> &'static str {
        match self {
            ScanKind::SteadyIntensities => "class",
            ScanKind::Eigenvalues => "regime",
            ScanKind::FloquetRate => "period",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub quantity: ScanQuantity,
    pub axis: Axis,
    pub params: SystemParams,
    /// modulation used by every point; its `amp0` is replaced by the axis value
    pub drive: DriveModulation,
    pub kind: ScanKind,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<(), SweepError> {
        self.axis.validate()?;
        if self.axis.min < 0.0 {
            return Err(SweepError::InvalidAxis(format!(
                "drive amplitudes must be >= 0, got min {}",
                self.axis.min
            )));
        }
        self.params.validate()?;
        Ok(())
    }

    /// Absolute amplitudes, ascending.
    pub fn amplitudes(&self) -> Result<Vec<f64>, SweepError> {
        self.validate()?;
        let scale = match self.quantity {
            ScanQuantity::Amp => 1.0,
            ScanQuantity::AmpRatio => model::threshold_amplitude(&self.params)?,
        };
        Ok(self.axis.values().into_iter().map(|v| v * scale).collect())
    }
}

/// Integration and classification settings for one steady-state run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadySettings {
    pub rtol: f64,
    pub atol: f64,
    /// total budget; `None` means `50 / min(gamma0, gamma2)`
    pub horizon: Option<f64>,
    /// seed magnitude; `None` means `1e-6 * amp0 / gamma1`
    pub seed_eps: Option<f64>,
    pub seed_phase: f64,
    /// the horizon is split into this many classification windows
    pub windows: usize,
    pub samples_per_window: usize,
    pub drift_tol: f64,
}

impl Default for SteadySettings {
    fn default() -> Self {
        SteadySettings {
            rtol: 1e-9,
            atol: 1e-15,
            horizon: None,
            seed_eps: None,
            seed_phase: std::f64::consts::FRAC_PI_4,
            windows: 10,
            samples_per_window: 50,
            drift_tol: 1e-3,
        }
    }
}

impl SteadySettings {
    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: &str| Err(SweepError::InvalidSettings(m.to_string()));
        if self.windows < 3 {
            return bad("windows must be >= 3");
        }
        if self.samples_per_window < 2 {
            return bad("samples_per_window must be >= 2");
        }
        if !(self.drift_tol > 0.0) {
            return bad("drift_tol must be > 0");
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return bad("horizon must be > 0");
            }
        }
        Ok(())
    }

    pub fn horizon_for(&self, params: &SystemParams) -> f64 {
        self.horizon.unwrap_or_else(|| integrator::default_horizon(params))
    }

    pub fn seed_for(&self, params: &SystemParams, drive: &DriveModulation) -> f64 {
        self.seed_eps
            .unwrap_or_else(|| integrator::default_seed(params, drive.amp0))
    }

    /// Solver and classifier options for one run.
    pub fn options_for(&self, params: &SystemParams, drive: &DriveModulation) -> (SolverOptions, ClassifyOptions) {
        let horizon = self.horizon_for(params);
        let window = horizon / self.windows as f64;
        let seed = self.seed_for(params, drive);
        let solver = SolverOptions {
            method: Method::Rk45 {
                rtol: self.rtol,
                atol: self.atol,
            },
            t_end: horizon,
            output_interval: Some(window / self.samples_per_window as f64),
            seed_eps: seed,
            seed_phase: self.seed_phase,
            ..SolverOptions::default()
        };
        let classify = ClassifyOptions {
            window,
            floor: (seed * seed).max(f64::MIN_POSITIVE),
            drift_tol: self.drift_tol,
        };
        (solver, classify)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyOutcome {
    pub class: SteadyClass,
    /// mean `|a1|^2, |a2|^2, |b|^2` over the last classification window
    pub final_means: [f64; 3],
    pub seed_intensity: f64,
    /// the run hit the overflow guard
    pub diverged: bool,
    pub trajectory: Trajectory,
}

/// Seeded nonlinear run from the pump-only stationary state, integrated one
/// window at a time and stopped early once the late-time state is steady.
pub fn simulate_steady(
    params: &SystemParams,
    drive: &DriveModulation,
    settings: &SteadySettings,
) -> Result<SteadyOutcome, SweepError> {
    settings.validate()?;
    let (solver, classify) = settings.options_for(params, drive);
    let window = classify.window;
    let init = integrator::pump_start(params, drive)?;

    let mut chunk_opts = solver;
    chunk_opts.t_end = window;
    let mut traj = match integrator::integrate(params, drive, &init, &chunk_opts) {
        Ok(t) => t,
        Err(IntegrateError::Divergence { partial, .. }) => return Ok(diverged(*partial, &solver)),
        Err(e) => return Err(e.into()),
    };
    for k in 1..settings.windows {
        let (t, s) = match traj.last() {
            Some((t, s)) => (t, *s),
            None => break,
        };
        match integrator::integrate_from(params, drive, t, &s, &chunk_opts) {
            Ok(next) => traj.extend(&next),
            Err(IntegrateError::Divergence { partial, .. }) => {
                traj.extend(&partial);
                return Ok(diverged(traj, &solver));
            }
            Err(e) => return Err(e.into()),
        }
        if k >= 2 && k + 1 < settings.windows && classify_steady(&traj, &classify)? == SteadyClass::SteadyNonzero {
            break;
        }
    }
    let class = classify_steady(&traj, &classify)?;
    Ok(SteadyOutcome {
        class,
        final_means: window_means(&traj, window),
        seed_intensity: solver.seed_eps * solver.seed_eps,
        diverged: false,
        trajectory: traj,
    })
}

fn diverged(traj: Trajectory, solver: &SolverOptions) -> SteadyOutcome {
    let last = traj.last().map(|(_, s)| s.intensities()).unwrap_or([f64::INFINITY; 3]);
    SteadyOutcome {
        class: SteadyClass::Growing,
        final_means: last,
        seed_intensity: solver.seed_eps * solver.seed_eps,
        diverged: true,
        trajectory: traj,
    }
}

fn window_means(traj: &Trajectory, window: f64) -> [f64; 3] {
    let t_end = traj.last().map_or(0.0, |(t, _)| t);
    let mut sum = [0.0; 3];
    let mut n = 0usize;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        if *t >= t_end - window {
            let i = s.intensities();
            for k in 0..3 {
                sum[k] += i[k];
            }
            n += 1;
        }
    }
    sum.map(|v| v / n.max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", content = "message", rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    Failed(String),
}

impl PointStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, PointStatus::Ok)
    }

    /// CSV cell; commas and newlines in messages are replaced.
    pub fn cell(&self) -> String {
        match self {
            PointStatus::Ok => "ok".to_string(),
            PointStatus::Failed(m) => format!("error: {}", m.replace([',', '\n', '\r'], ";")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub amp: f64,
    /// numeric outputs after `amp`, matching `ScanKind::columns()[1..]`
    pub values: Vec<f64>,
    pub label: String,
    pub status: PointStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub kind: ScanKind,
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let cols = self.kind.columns();
        let idx = cols.iter().position(|c| *c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| if idx == 0 { r.amp } else { r.values[idx - 1] })
                .collect(),
        )
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.status.is_ok()).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# optomech scan v1 kind={}", self.kind.as_str())?;
        writeln!(
            w,
            "{},{},status",
            self.kind.columns().join(","),
            self.kind.label_column()
        )?;
        for r in &self.rows {
            let mut line = fmt_f64(r.amp);
            for v in &r.values {
                line.push(',');
                line.push_str(&fmt_f64(*v));
            }
            writeln!(w, "{line},{},{}", r.label, r.status.cell())?;
        }
        Ok(())
    }
}

/// Runs one task per amplitude in parallel; rows come back sorted by amplitude.
pub fn scan_drive_amplitude(
    params: &SystemParams,
    amps: &[f64],
    kind: ScanKind,
    base_drive: &DriveModulation,
    steady: &SteadySettings,
    floquet_opts: &FloquetOptions,
) -> Result<ScanTable, SweepError> {
    params.validate()?;
    steady.validate()?;
    if amps.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(SweepError::InvalidAxis("amplitudes must be finite and >= 0".into()));
    }
    let mut sorted = amps.to_vec();
    sorted.sort_by(f64::total_cmp);

    let n_values = kind.columns().len() - 1;
    let rows = sorted
        .par_iter()
        .map(|&amp| {
            let drive = DriveModulation { amp0: amp, ..*base_drive };
            match scan_point(params, &drive, kind, steady, floquet_opts) {
                Ok((values, label)) => ScanRow {
                    amp,
                    values,
                    label,
                    status: PointStatus::Ok,
                },
                Err(e) => ScanRow {
                    amp,
                    values: vec![f64::NAN; n_values],
                    label: String::new(),
                    status: PointStatus::Failed(e.to_string()),
                },
            }
        })
        .collect();
    Ok(ScanTable { kind, rows })
}

/// Scan driven by a [`ScanSpec`].
pub fn run_scan(spec: &ScanSpec, steady: &SteadySettings, floquet_opts: &FloquetOptions) -> Result<ScanTable, SweepError> {
    let amps = spec.amplitudes()?;
    scan_drive_amplitude(&spec.params, &amps, spec.kind, &spec.drive, steady, floquet_opts)
}

fn scan_point(
    params: &SystemParams,
    drive: &DriveModulation,
    kind: ScanKind,
    steady: &SteadySettings,
    floquet_opts: &FloquetOptions,
) -> Result<(Vec<f64>, String), SweepError> {
    match kind {
        ScanKind::SteadyIntensities => {
            let out = simulate_steady(params, drive, steady)?;
            Ok((out.final_means.to_vec(), out.class.as_str().to_string()))
        }
        ScanKind::Eigenvalues => {
            let ev = model::eigenvalues_linearized(params, drive.amp0)?;
            let label = model::coupling_regime(params, drive.amp0)
                .map(|r| r.as_str().to_string())
                .unwrap_or_else(|_| "n/a".to_string());
            Ok((
                vec![
                    ev.lambda1.re,
                    ev.lambda1.im,
                    ev.lambda2.re,
                    ev.lambda2.im,
                    (ev.lambda1.re - ev.lambda2.re).abs(),
                    (ev.lambda1.im - ev.lambda2.im).abs(),
                ],
                label,
            ))
        }
        ScanKind::FloquetRate => {
            let r = floquet::monodromy(params, drive, floquet_opts)?;
            if !r.growth_rate.is_finite() {
                return Err(SweepError::Model(ModelError::NonFiniteState("growth_rate")));
            }
            Ok((
                vec![r.growth_rate, r.decrement(), r.liouville_residual()],
                fmt_f64(r.period),
            ))
        }
    }
}

/// Classifies a seeded run at constant drive `amp`.
pub fn classify_amplitude(params: &SystemParams, amp: f64, settings: &SteadySettings) -> Result<SteadyClass, SweepError> {
    Ok(simulate_steady(params, &DriveModulation::constant(amp), settings)?.class)
}

/// Generation threshold from nonlinear runs: bisects the constant-drive
/// amplitude between a decaying `lo` and a generating `hi` until the bracket
/// is narrower than `tol` times the linear threshold (or `tol * hi` when that
/// is unavailable), then returns the midpoint.
pub fn bisect_generation_threshold(
    params: &SystemParams,
    bracket: (f64, f64),
    tol: f64,
    settings: &SteadySettings,
) -> Result<f64, SweepError> {
    let (mut lo, mut hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
        return Err(SweepError::InvalidAxis(format!("bracket [{lo}, {hi}] must satisfy 0 <= lo < hi")));
    }
    if !(tol > 0.0) {
        return Err(SweepError::InvalidSettings("tol must be > 0".into()));
    }
    let (c_lo, c_hi) = rayon::join(
        || classify_amplitude(params, lo, settings),
        || classify_amplitude(params, hi, settings),
    );
    let (c_lo, c_hi) = (c_lo?, c_hi?);
    if c_lo != SteadyClass::Decayed || !matches!(c_hi, SteadyClass::SteadyNonzero | SteadyClass::Growing) {
        return Err(SweepError::Bracket {
            lo,
            hi,
            lo_class: c_lo,
            hi_class: c_hi,
        });
    }
    let scale = model::threshold_amplitude(params).unwrap_or(hi);
    while hi - lo >= tol * scale {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if classify_amplitude(params, mid, settings)?.is_generating() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TongueCell {
    /// NaN when the point failed
    pub growth_rate: f64,
    pub liouville_residual: f64,
    pub status: PointStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TongueGrid {
    pub params: SystemParams,
    pub phase_mode: PhaseMode,
    pub amp0_ratio: f64,
    pub amp0: f64,
    pub threshold: f64,
    pub omega_p: f64,
    /// modulation frequencies in units of `omega_p`
    pub mod_freq_ratios: Vec<f64>,
    pub alphas: Vec<f64>,
    /// row-major: `cells[i_alpha * mod_freq_ratios.len() + j_freq]`
    pub cells: Vec<TongueCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneViolation {
    pub freq_index: usize,
    pub alpha_index: usize,
    /// rate at `alpha_index - 1`
    pub previous: f64,
    pub rate: f64,
}

impl TongueGrid {
    pub fn shape(&self) -> (usize, usize) {
        (self.alphas.len(), self.mod_freq_ratios.len())
    }

    pub fn cell(&self, i_alpha: usize, j_freq: usize) -> &TongueCell {
        &self.cells[i_alpha * self.mod_freq_ratios.len() + j_freq]
    }

    pub fn rate(&self, i_alpha: usize, j_freq: usize) -> f64 {
        self.cell(i_alpha, j_freq).growth_rate
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| !c.status.is_ok()).count()
    }

    /// `(i_alpha, j_freq)` of every cell with positive growth.
    pub fn positive_cells(&self) -> Vec<(usize, usize)> {
        let (na, nf) = self.shape();
        (0..na)
            .flat_map(|i| (0..nf).map(move |j| (i, j)))
            .filter(|&(i, j)| self.rate(i, j) > 0.0)
            .collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.liouville_residual)
            .fold(0.0, |m, r| if r.is_nan() { f64::NAN } else { m.max(r) })
    }

    /// Checks that growth is non-decreasing in alpha for up to `depth` rows
    /// above the tip (the first positive cell) of each column.
    pub fn monotonicity_violations(&self, depth: usize) -> Vec<MonotoneViolation> {
        let (na, nf) = self.shape();
        let mut out = Vec::new();
        for j in 0..nf {
            let Some(tip) = (0..na).find(|&i| self.rate(i, j) > 0.0) else {
                continue;
            };
            for i in (tip + 1)..na.min(tip + 1 + depth) {
                let (prev, cur) = (self.rate(i - 1, j), self.rate(i, j));
                if !(cur > 0.0) {
                    break;
                }
                if cur < prev {
                    out.push(MonotoneViolation {
                        freq_index: j,
                        alpha_index: i,
                        previous: prev,
                        rate: cur,
                    });
                }
            }
        }
        out
    }

    /// One row per cell: axes, outputs, status.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# optomech tongue v1 amp0_ratio={} amp0={} omega_p={}",
            fmt_f64(self.amp0_ratio),
            fmt_f64(self.amp0),
            fmt_f64(self.omega_p)
        )?;
        writeln!(
            w,
            "mod_freq_ratio,mod_freq,alpha,growth_rate,decrement,log_decrement,liouville_residual,status"
        )?;
        let rate0 = self.params.gamma2.min(self.params.gamma0).max(f64::MIN_POSITIVE);
        let (na, nf) = self.shape();
        for i in 0..na {
            for j in 0..nf {
                let c = self.cell(i, j);
                let r = self.mod_freq_ratios[j];
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    fmt_f64(r),
                    fmt_f64(r * self.omega_p),
                    fmt_f64(self.alphas[i]),
                    fmt_f64(c.growth_rate),
                    fmt_f64(2.0 * c.growth_rate),
                    fmt_f64(floquet::log_decrement(2.0 * c.growth_rate, rate0)),
                    fmt_f64(c.liouville_residual),
                    c.status.cell()
                )?;
            }
        }
        Ok(())
    }
}

/// Default modulation-frequency axis, units of `omega_p`.
pub fn default_mod_freq_axis() -> Axis {
    Axis::linear(0.1, 3.0, 121)
}

pub fn default_alpha_axis() -> Axis {
    Axis::linear(0.0, 0.5, 51)
}

/// Floquet growth rate over (modulation frequency, modulation depth) at
/// `amp0 = amp0_ratio * threshold`, with frequencies in units of the
/// parametric frequency at `amp0`.
pub fn tongue_map(
    params: &SystemParams,
    amp0_ratio: f64,
    mod_freq_axis: &Axis,
    alpha_axis: &Axis,
    phase_mode: PhaseMode,
    opts: &FloquetOptions,
) -> Result<TongueGrid, SweepError> {
    params.validate()?;
    mod_freq_axis.validate()?;
    alpha_axis.validate()?;
    if !(amp0_ratio > 0.0 && amp0_ratio < 1.0) {
        return Err(SweepError::InvalidSettings(format!(
            "amp0_ratio {amp0_ratio} must lie in (0, 1)"
        )));
    }
    if mod_freq_axis.min <= 0.0 {
        return Err(SweepError::InvalidAxis("modulation frequencies must be > 0".into()));
    }
    if alpha_axis.min < 0.0 || alpha_axis.max >= 1.0 {
        return Err(SweepError::InvalidAxis("alpha must lie in [0, 1)".into()));
    }
    let threshold = model::threshold_amplitude(params)?;
    let amp0 = amp0_ratio * threshold;
    let omega_p = model::parametric_frequency(params, amp0)?;
    let ratios = mod_freq_axis.values();
    let alphas = alpha_axis.values();
    let nf = ratios.len();

    let cells = (0..alphas.len() * nf)
        .into_par_iter()
        .map(|k| {
            let (alpha, ratio) = (alphas[k / nf], ratios[k % nf]);
            let drive = DriveModulation::modulated(amp0, alpha, ratio * omega_p, phase_mode);
            match floquet::monodromy(params, &drive, opts) {
                Ok(r) if r.growth_rate.is_finite() => TongueCell {
                    growth_rate: r.growth_rate,
                    liouville_residual: r.liouville_residual(),
                    status: PointStatus::Ok,
                },
                Ok(_) => failed_cell("non-finite growth rate".into()),
                Err(e) => failed_cell(e.to_string()),
            }
        })
        .collect();

    Ok(TongueGrid {
        params: *params,
        phase_mode,
        amp0_ratio,
        amp0,
        threshold,
        omega_p,
        mod_freq_ratios: ratios,
        alphas,
        cells,
    })
}

fn failed_cell(msg: String) -> TongueCell {
    TongueCell {
        growth_rate: f64::NAN,
        liouville_residual: f64::NAN,
        status: PointStatus::Failed(msg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p_star() -> SystemParams {
        SystemParams::reference()
    }

    #[test]
    fn axis_values_hit_endpoints() {
        let a = Axis::linear(0.0, 1.0, 5);
        assert_eq!(a.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let l = Axis::log(1e-3, 1e-1, 3).values();
        assert_eq!(l[0], 1e-3);
        assert!((l[1] - 1e-2).abs() < 1e-15);
        assert_eq!(l[2], 1e-1);
    }

    #[test]
    fn axis_validation() {
        assert!(Axis::linear(0.0, 1.0, 1).validate().is_err());
        assert!(Axis::linear(1.0, 1.0, 3).validate().is_err());
        assert!(Axis::linear(2.0, 1.0, 3).validate().is_err());
        assert!(Axis::log(0.0, 1.0, 3).validate().is_err());
        assert!(Axis::linear(f64::NAN, 1.0, 3).validate().is_err());
        assert!(Axis::log(0.1, 1.0, 3).validate().is_ok());
    }

    #[test]
    fn eigen_scan_rows_sorted_and_first_row_uncoupled() {
        let p = p_star();
        let t = scan_drive_amplitude(
            &p,
            &[8e-4, 0.0, 2e-4],
            ScanKind::Eigenvalues,
            &DriveModulation::constant(0.0),
            &SteadySettings::default(),
            &FloquetOptions::default(),
        )
        .unwrap();
        let amps: Vec<f64> = t.rows.iter().map(|r| r.amp).collect();
        assert_eq!(amps, vec![0.0, 2e-4, 8e-4]);
        let v = &t.rows[0].values;
        // uncoupled: iDelta2 - gamma2 and -(i omega_b + gamma0)
        assert!((v[0] + p.gamma2).abs() < 1e-15);
        assert!((v[1] - p.detuning2()).abs() < 1e-15);
        assert!((v[2] + p.gamma0).abs() < 1e-15);
        assert!((v[3] + p.omega_b).abs() < 1e-15);
        assert_eq!(t.rows[1].label, "strong_coupling");
        assert_eq!(t.rows[2].label, "unstable");
    }

    #[test]
    fn failed_point_is_recorded_not_fatal() {
        let p = SystemParams {
            gamma1: 0.0,
            ..p_star()
        };
        // resonant pump with no loss: the linearization is undefined
        let t = scan_drive_amplitude(
            &p,
            &[0.0, 1e-4],
            ScanKind::Eigenvalues,
            &DriveModulation::constant(0.0),
            &SteadySettings::default(),
            &FloquetOptions::default(),
        )
        .unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.failures() >= 1);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("error: "));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn csv_layout() {
        let t = ScanTable {
            kind: ScanKind::FloquetRate,
            rows: vec![ScanRow {
                amp: 1e-4,
                values: vec![-1e-3, -2e-3, 0.0],
                label: fmt_f64(100.0),
                status: PointStatus::Ok,
            }],
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# optomech scan v1 kind=floquet_rate");
        assert_eq!(lines[1], "amp,growth_rate,decrement,liouville_residual,period,status");
        let cells: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0].parse::<f64>().unwrap(), 1e-4);
        assert_eq!(cells[5], "ok");
    }

    #[test]
    fn ratio_axis_scales_by_threshold() {
        let p = p_star();
        let spec = ScanSpec {
            quantity: ScanQuantity::AmpRatio,
            axis: Axis::linear(0.0, 2.0, 3),
            params: p,
            drive: DriveModulation::constant(0.0),
            kind: ScanKind::Eigenvalues,
        };
        let th = model::threshold_amplitude(&p).unwrap();
        assert_eq!(spec.amplitudes().unwrap(), vec![0.0, th, 2.0 * th]);
    }

    #[test]
    fn steady_run_classifies_both_sides() {
        let p = p_star();
        let th = model::threshold_amplitude(&p).unwrap();
        let s = SteadySettings::default();
        let below = simulate_steady(&p, &DriveModulation::constant(0.9 * th), &s).unwrap();
        assert_eq!(below.class, SteadyClass::Decayed);
        assert!(below.final_means[1] < below.seed_intensity);
        let above = simulate_steady(&p, &DriveModulation::constant(1.5 * th), &s).unwrap();
        assert_eq!(above.class, SteadyClass::SteadyNonzero);
        assert!(above.final_means[1] > 1e-4);
    }

    #[test]
    fn bisection_rejects_stable_bracket() {
        let p = p_star();
        let th = model::threshold_amplitude(&p).unwrap();
        let e = bisect_generation_threshold(&p, (0.2 * th, 0.5 * th), 1e-3, &SteadySettings::default()).unwrap_err();
        assert!(matches!(
            e,
            SweepError::Bracket {
                hi_class: SteadyClass::Decayed,
                ..
            }
        ));
        assert!(bisect_generation_threshold(&p, (th, th), 1e-3, &SteadySettings::default()).is_err());
    }

    #[test]
    fn small_tongue_grid_shape_and_unmodulated_row() {
        let p = p_star();
        let g = tongue_map(
            &p,
            0.9,
            &Axis::linear(0.5, 2.5, 5),
            &Axis::linear(0.0, 0.2, 3),
            PhaseMode::Sin,
            &FloquetOptions::default(),
        )
        .unwrap();
        assert_eq!(g.shape(), (3, 5));
        assert_eq!(g.cells.len(), 15);
        let l1 = model::eigenvalues_linearized(&p, g.amp0).unwrap().lambda1.re;
        for j in 0..5 {
            assert!((g.rate(0, j) - l1).abs() < 1e-8, "{} vs {l1}", g.rate(0, j));
        }
        assert_eq!(g.failures(), 0);
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 17);
    }

    #[test]
    fn tongue_map_rejects_above_threshold_ratio() {
        let p = p_star();
        let a = Axis::linear(0.5, 1.0, 2);
        assert!(tongue_map(&p, 1.2, &a, &a, PhaseMode::Sin, &FloquetOptions::default()).is_err());
    }

    #[test]
    fn monotonicity_scan_reports_decrease() {
        let mk = |r: f64| TongueCell {
            growth_rate: r,
            liouville_residual: 0.0,
            status: PointStatus::Ok,
        };
        let g = TongueGrid {
            params: p_star(),
            phase_mode: PhaseMode::Sin,
            amp0_ratio: 0.9,
            amp0: 1.0,
            threshold: 1.0,
            omega_p: 1.0,
            mod_freq_ratios: vec![1.0],
            alphas: vec![0.0, 0.1, 0.2, 0.3],
            cells: vec![mk(-1.0), mk(0.5), mk(0.3), mk(0.6)],
        };
        let v = g.monotonicity_violations(5);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].alpha_index, 2);
        assert_eq!(g.positive_cells(), vec![(1, 0), (2, 0), (3, 0)]);
    }
}
