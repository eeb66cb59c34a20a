//! Run configuration: strict TOML parsing, default resolution and the
//! resolved echo.
//!
//! Grammar (all quantities in units of omega1; if `omega1` is given and is not
//! 1, every frequency, rate and amplitude is divided by it and every time is
//! multiplied by it):
//!
//! ```toml
//! [system]                 # required
//! omega1 = 1.0             # default 1
//! omega2 = 1.01            # required
//! omega_b = 0.01           # required
//! gamma1 = 1e-2            # required
//! gamma2 = 1e-3            # required
//! gamma0 = 1e-3            # required
//! coupling = 0.2           # required
//! drive_freq = 1.0         # default omega1
//!
//! [drive]
//! amp0 = 4.5e-4            # or amp0_ratio (multiple of the threshold), default amp0_ratio = 0.9
//! alpha = 0.17             # default 0
//! mod_freq = 4.6e-3        # or mod_freq_ratio (multiple of omega_p at amp0); required when alpha > 0
//! phase_mode = "sin"       # "sin" | "cos"
//!
//! [solver]
//! method = "rk45"          # "rk45" | "rk4"
//! rtol = 1e-9
//! atol = 1e-15
//! dt = 0.05                # rk4 only
//! t_end = 5e4              # default 50 / min(gamma0, gamma2)
//! output_interval = 25.0   # default t_end / 2000
//! sample_stride = 1
//! seed_eps = 4.5e-8        # default 1e-6 amp0 / gamma1 (per point in scans)
//! seed_phase = 0.785398    # default pi/4
//! overflow_guard = 1e12
//! max_steps = 50000000
//! windows = 10             # steady-state classification windows over t_end
//! samples_per_window = 50
//! drift_tol = 1e-3
//! floquet_rtol = 1e-10
//! floquet_atol = 1e-14
//! pump = "adiabatic"       # "adiabatic" | "lagged"
//!
//! [scan]
//! quantity = "amp_ratio"   # "amp" | "amp_ratio"
//! min = 0.0
//! max = 2.0
//! count = 200
//! spacing = "linear"       # "linear" | "log"
//! kind = "steady_intensities"  # | "eigenvalues" | "floquet_rate"
//! mod_freq_min = 0.1       # tongue axes; modulation frequency in units of omega_p
//! mod_freq_max = 3.0
//! mod_freq_count = 121
//! alpha_min = 0.0
//! alpha_max = 0.5
//! alpha_count = 51
//! bracket_lo = 0.9         # nonlinear threshold bracket, multiples of the threshold
//! bracket_hi = 1.1
//! bisect_tol = 1e-3
//! ```

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::path::PathBuf;

use optomech::floquet::{FloquetOptions, PumpResponse};
use optomech::integrator::{self, fmt_f64, Method, SolverOptions, DEFAULT_OVERFLOW_GUARD};
use optomech::model::{self, DriveModulation, PhaseMode, SystemParams};
use optomech::sweep::{Axis, ScanKind, ScanQuantity, ScanSpec, Spacing, SteadySettings};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::Spanned;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}", self.render())]
pub struct ConfigError {
    /// dotted key, e.g. `system.gamma1`
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn render(&self) -> String {
        match self.line {
            Some(l) => format!("line {l}: `{}`: {}", self.key, self.message),
            None => format!("`{}`: {}", self.key, self.message),
        }
    }
}

type F = Option<Spanned<f64>>;
type I = Option<Spanned<i64>>;
type S = Option<Spanned<String>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: Option<Spanned<RawSystem>>,
    drive: Option<RawDrive>,
    solver: Option<RawSolver>,
    scan: Option<RawScan>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    omega1: F,
    omega2: F,
    omega_b: F,
    gamma1: F,
    gamma2: F,
    gamma0: F,
    coupling: F,
    drive_freq: F,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrive {
    amp0: F,
    amp0_ratio: F,
    alpha: F,
    mod_freq: F,
    mod_freq_ratio: F,
    phase_mode: S,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    method: S,
    rtol: F,
    atol: F,
    dt: F,
    t_end: F,
    output_interval: F,
    sample_stride: I,
    seed_eps: F,
    seed_phase: F,
    overflow_guard: F,
    max_steps: I,
    windows: I,
    samples_per_window: I,
    drift_tol: F,
    floquet_rtol: F,
    floquet_atol: F,
    pump: S,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    quantity: S,
    min: F,
    max: F,
    count: I,
    spacing: S,
    kind: S,
    mod_freq_min: F,
    mod_freq_max: F,
    mod_freq_count: I,
    alpha_min: F,
    alpha_max: F,
    alpha_count: I,
    bracket_lo: F,
    bracket_hi: F,
    bisect_tol: F,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanConfig {
    pub quantity: ScanQuantity,
    pub axis: Axis,
    pub kind: ScanKind,
    /// units of omega_p
    pub mod_freq_axis: Axis,
    pub alpha_axis: Axis,
    /// multiples of the linear threshold
    pub bracket: (f64, f64),
    pub bisect_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: SystemParams,
    pub drive: DriveModulation,
    /// `seed_eps` resolved for `drive.amp0`
    pub solver: SolverOptions,
    /// explicit seed; `None` derives `1e-6 amp / gamma1` per run
    pub seed_eps: Option<f64>,
    pub windows: usize,
    pub samples_per_window: usize,
    pub drift_tol: f64,
    pub floquet: FloquetOptions,
    pub scan: ScanConfig,
    pub out_dir: PathBuf,
    pub random_seed: Option<u64>,
}

impl RunConfig {
    pub fn steady_settings(&self) -> SteadySettings {
        let (rtol, atol) = match self.solver.method {
            Method::Rk45 { rtol, atol } => (rtol, atol),
            Method::Rk4 { .. } => (SteadySettings::default().rtol, SteadySettings::default().atol),
        };
        SteadySettings {
            rtol,
            atol,
            horizon: Some(self.solver.t_end),
            seed_eps: self.seed_eps,
            seed_phase: self.solver.seed_phase,
            windows: self.windows,
            samples_per_window: self.samples_per_window,
            drift_tol: self.drift_tol,
        }
    }

    pub fn scan_spec(&self) -> ScanSpec {
        ScanSpec {
            quantity: self.scan.quantity,
            axis: self.scan.axis,
            params: self.params,
            drive: self.drive,
            kind: self.scan.kind,
        }
    }

    /// Replaces the seed phase with a pseudo-random one drawn from `seed`.
    pub fn randomize_seed_phase(&mut self, seed: u64) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        self.solver.seed_phase = rng.random_range(0.0..std::f64::consts::TAU);
        self.random_seed = Some(seed);
    }

    /// Fully resolved configuration; parsing it yields `self` back (apart
    /// from `out_dir` and `random_seed`, which come from the command line).
    pub fn to_toml(&self) -> String {
        let f = |v: f64| fmt_f64(v);
        let p = &self.params;
        let mut s = String::new();
        s.push_str("# resolved configuration, units of omega1\n");
        if let Some(seed) = self.random_seed {
            let _ = writeln!(s, "# seed phase drawn with --seed {seed}");
        }
        s.push_str("\n[system]\n");
        for (k, v) in [
            ("omega1", p.omega1),
            ("omega2", p.omega2),
            ("omega_b", p.omega_b),
            ("gamma1", p.gamma1),
            ("gamma2", p.gamma2),
            ("gamma0", p.gamma0),
            ("coupling", p.coupling),
            ("drive_freq", p.drive_freq),
        ] {
            let _ = writeln!(s, "{k} = {}", f(v));
        }
        let d = &self.drive;
        s.push_str("\n[drive]\n");
        let _ = writeln!(s, "amp0 = {}", f(d.amp0));
        let _ = writeln!(s, "alpha = {}", f(d.alpha));
        let _ = writeln!(s, "mod_freq = {}", f(d.mod_freq));
        let _ = writeln!(s, "phase_mode = \"{}\"", phase_name(d.phase_mode));

        let o = &self.solver;
        s.push_str("\n[solver]\n");
        match o.method {
            Method::Rk45 { rtol, atol } => {
                let _ = writeln!(s, "method = \"rk45\"\nrtol = {}\natol = {}", f(rtol), f(atol));
            }
            Method::Rk4 { dt } => {
                let _ = writeln!(s, "method = \"rk4\"\ndt = {}", f(dt));
            }
        }
        let _ = writeln!(s, "t_end = {}", f(o.t_end));
        if let Some(iv) = o.output_interval {
            let _ = writeln!(s, "output_interval = {}", f(iv));
        }
        let _ = writeln!(s, "sample_stride = {}", o.sample_stride);
        match self.seed_eps {
            Some(e) => {
                let _ = writeln!(s, "seed_eps = {}", f(e));
            }
            None => {
                let _ = writeln!(s, "# seed_eps = {} (derived: 1e-6 amp / gamma1)", f(o.seed_eps));
            }
        }
        let _ = writeln!(s, "seed_phase = {}", f(o.seed_phase));
        let _ = writeln!(s, "overflow_guard = {}", f(o.overflow_guard));
        let _ = writeln!(s, "max_steps = {}", o.max_steps);
        let _ = writeln!(s, "windows = {}", self.windows);
        let _ = writeln!(s, "samples_per_window = {}", self.samples_per_window);
        let _ = writeln!(s, "drift_tol = {}", f(self.drift_tol));
        let _ = writeln!(s, "floquet_rtol = {}", f(self.floquet.rtol));
        let _ = writeln!(s, "floquet_atol = {}", f(self.floquet.atol));
        let _ = writeln!(s, "pump = \"{}\"", pump_name(self.floquet.pump));

        let c = &self.scan;
        s.push_str("\n[scan]\n");
        let _ = writeln!(s, "quantity = \"{}\"", quantity_name(c.quantity));
        let _ = writeln!(s, "min = {}\nmax = {}\ncount = {}", f(c.axis.min), f(c.axis.max), c.axis.count);
        let _ = writeln!(s, "spacing = \"{}\"", spacing_name(c.axis.spacing));
        let _ = writeln!(s, "kind = \"{}\"", c.kind.as_str());
        let _ = writeln!(
            s,
            "mod_freq_min = {}\nmod_freq_max = {}\nmod_freq_count = {}",
            f(c.mod_freq_axis.min),
            f(c.mod_freq_axis.max),
            c.mod_freq_axis.count
        );
        let _ = writeln!(
            s,
            "alpha_min = {}\nalpha_max = {}\nalpha_count = {}",
            f(c.alpha_axis.min),
            f(c.alpha_axis.max),
            c.alpha_axis.count
        );
        let _ = writeln!(s, "bracket_lo = {}\nbracket_hi = {}", f(c.bracket.0), f(c.bracket.1));
        let _ = writeln!(s, "bisect_tol = {}", f(c.bisect_tol));
        s
    }
}

fn phase_name(m: PhaseMode) -> &'static str {
    match m {
        PhaseMode::Sin => "sin",
        PhaseMode::Cos => "cos",
    }
}

fn pump_name(p: PumpResponse) -> &'static str {
    match p {
        PumpResponse::Adiabatic => "adiabatic",
        PumpResponse::Lagged => "lagged",
    }
}

fn quantity_name(q: ScanQuantity) -> &'static str {
    match q {
        ScanQuantity::Amp => "amp",
        ScanQuantity::AmpRatio => "amp_ratio",
    }
}

fn spacing_name(s: Spacing) -> &'static str {
    match s {
        Spacing::Linear => "linear",
        Spacing::Log => "log",
    }
}

/// Line numbers of the keys seen while resolving, for error reporting.
struct Ctx<'a> {
    text: &'a str,
    lines: HashMap<String, usize>,
}

impl<'a> Ctx<'a> {
    fn line(&self, offset: usize) -> usize {
        line_of(self.text, offset)
    }

    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            key: key.to_string(),
            line: self.lines.get(key).copied(),
            message: message.into(),
        }
    }

    fn num(&mut self, key: &str, v: &F) -> Result<Option<f64>, ConfigError> {
        match v {
            None => Ok(None),
            Some(sp) => {
                self.lines.insert(key.to_string(), self.line(sp.span().start));
                let x = *sp.get_ref();
                if !x.is_finite() {
                    return Err(self.err(key, format!("{x} is not finite")));
                }
                Ok(Some(x))
            }
        }
    }

    fn int(&mut self, key: &str, v: &I, min: i64) -> Result<Option<usize>, ConfigError> {
        match v {
            None => Ok(None),
            Some(sp) => {
                self.lines.insert(key.to_string(), self.line(sp.span().start));
                let x = *sp.get_ref();
                if x < min {
                    return Err(self.err(key, format!("{x} must be >= {min}")));
                }
                Ok(Some(x as usize))
            }
        }
    }

    fn word<T: Copy>(&mut self, key: &str, v: &S, choices: &[(&str, T)]) -> Result<Option<T>, ConfigError> {
        match v {
            None => Ok(None),
            Some(sp) => {
                self.lines.insert(key.to_string(), self.line(sp.span().start));
                let w = sp.get_ref().as_str();
                choices
                    .iter()
                    .find(|(name, _)| *name == w)
                    .map(|(_, t)| Some(*t))
                    .ok_or_else(|| {
                        let names: Vec<String> = choices.iter().map(|(n, _)| format!("\"{n}\"")).collect();
                        self.err(key, format!("\"{w}\" is not one of {}", names.join(", ")))
                    })
            }
        }
    }

    fn required(&self, key: &str, v: Option<f64>, section_line: Option<usize>) -> Result<f64, ConfigError> {
        v.ok_or_else(|| ConfigError {
            key: key.to_string(),
            line: section_line,
            message: "missing required key".into(),
        })
    }

    fn check(&self, key: &str, v: f64, ok: bool, rule: &str) -> Result<f64, ConfigError> {
        if ok {
            Ok(v)
        } else {
            Err(self.err(key, format!("{v} is out of range: {rule}")))
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Section header in effect at `offset`.
fn section_at(text: &str, offset: usize) -> Option<String> {
    text[..offset.min(text.len())]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('[') && l.ends_with(']'))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim().to_string())
}

fn syntax_error(text: &str, e: toml::de::Error) -> ConfigError {
    let msg = e.message().trim().to_string();
    let offset = e.span().map(|s| s.start);
    // serde names the offending field in backticks
    let field = msg.split('`').nth(1).map(str::to_string);
    let key = match (field, offset) {
        (Some(f), Some(o)) => match section_at(text, o) {
            Some(sec) if sec != f => format!("{sec}.{f}"),
            _ => f,
        },
        (Some(f), None) => f,
        (None, Some(o)) => section_at(text, o).unwrap_or_else(|| "<document>".into()),
        (None, None) => "<document>".into(),
    };
    ConfigError {
        key,
        line: offset.map(|o| line_of(text, o)),
        message: msg,
    }
}

/// Parses and validates a configuration document, applying defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| syntax_error(text, e))?;
    let mut cx = Ctx {
        text,
        lines: HashMap::new(),
    };

    let sys = raw.system.ok_or_else(|| ConfigError {
        key: "system".into(),
        line: None,
        message: "missing required section [system]".into(),
    })?;
    let sys_line = Some(line_of(text, sys.span().start));
    let sys = sys.into_inner();
    let omega1 = cx.num("system.omega1", &sys.omega1)?.unwrap_or(1.0);
    let omega1 = cx.check("system.omega1", omega1, omega1 > 0.0, "must be > 0")?;
    let get = |cx: &mut Ctx, key: &str, v: &F| -> Result<f64, ConfigError> {
        let x = cx.num(key, v)?;
        cx.required(key, x, sys_line)
    };
    let omega2 = get(&mut cx, "system.omega2", &sys.omega2)?;
    let omega_b = get(&mut cx, "system.omega_b", &sys.omega_b)?;
    let gamma1 = get(&mut cx, "system.gamma1", &sys.gamma1)?;
    let gamma2 = get(&mut cx, "system.gamma2", &sys.gamma2)?;
    let gamma0 = get(&mut cx, "system.gamma0", &sys.gamma0)?;
    let coupling = get(&mut cx, "system.coupling", &sys.coupling)?;
    let drive_freq = cx.num("system.drive_freq", &sys.drive_freq)?.unwrap_or(omega1);
    for (k, v) in [("system.omega2", omega2), ("system.omega_b", omega_b), ("system.drive_freq", drive_freq)] {
        cx.check(k, v, v > 0.0, "must be > 0")?;
    }
    for (k, v) in [("system.gamma1", gamma1), ("system.gamma2", gamma2), ("system.gamma0", gamma0)] {
        cx.check(k, v, v >= 0.0, "must be >= 0")?;
    }
    let params = SystemParams {
        omega1,
        omega2,
        omega_b,
        gamma1,
        gamma2,
        gamma0,
        coupling,
        drive_freq,
    }
    .normalized();
    params
        .validate()
        .map_err(|e| cx.err("system", e.to_string()))?;

    let drive = resolve_drive(&mut cx, raw.drive.as_ref(), &params, omega1)?;
    let (solver, seed_eps, windows, samples_per_window, drift_tol, floquet) =
        resolve_solver(&mut cx, raw.solver.as_ref(), &params, &drive, omega1)?;
    let scan = resolve_scan(&mut cx, raw.scan.as_ref())?;

    Ok(RunConfig {
        params,
        drive,
        solver,
        seed_eps,
        windows,
        samples_per_window,
        drift_tol,
        floquet,
        scan,
        out_dir: PathBuf::from("out"),
        random_seed: None,
    })
}

fn resolve_drive(
    cx: &mut Ctx,
    raw: Option<&RawDrive>,
    params: &SystemParams,
    omega1: f64,
) -> Result<DriveModulation, ConfigError> {
    let empty = RawDrive {
        amp0: None,
        amp0_ratio: None,
        alpha: None,
        mod_freq: None,
        mod_freq_ratio: None,
        phase_mode: None,
    };
    let d = raw.unwrap_or(&empty);
    let amp0 = cx.num("drive.amp0", &d.amp0)?;
    let amp0_ratio = cx.num("drive.amp0_ratio", &d.amp0_ratio)?;
    let amp0 = match (amp0, amp0_ratio) {
        (Some(_), Some(_)) => return Err(cx.err("drive.amp0_ratio", "give either amp0 or amp0_ratio, not both")),
        (Some(a), None) => cx.check("drive.amp0", a, a >= 0.0, "must be >= 0")? / omega1,
        (None, r) => {
            let key = "drive.amp0_ratio";
            let r = r.unwrap_or(0.9);
            cx.check(key, r, r >= 0.0, "must be >= 0")?;
            let th = model::threshold_amplitude(params)
                .map_err(|e| cx.err(key, format!("threshold needed to resolve the ratio: {e}")))?;
            r * th
        }
    };
    let alpha = cx.num("drive.alpha", &d.alpha)?.unwrap_or(0.0);
    cx.check("drive.alpha", alpha, (0.0..1.0).contains(&alpha), "must lie in [0, 1)")?;
    let mod_freq = cx.num("drive.mod_freq", &d.mod_freq)?;
    let mod_ratio = cx.num("drive.mod_freq_ratio", &d.mod_freq_ratio)?;
    let mod_freq = match (mod_freq, mod_ratio) {
        (Some(_), Some(_)) => {
            return Err(cx.err("drive.mod_freq_ratio", "give either mod_freq or mod_freq_ratio, not both"))
        }
        (Some(w), None) => cx.check("drive.mod_freq", w, w > 0.0, "must be > 0")? / omega1,
        (None, Some(r)) => {
            let key = "drive.mod_freq_ratio";
            cx.check(key, r, r > 0.0, "must be > 0")?;
            let wp = model::parametric_frequency(params, amp0)
                .map_err(|e| cx.err(key, format!("omega_p undefined at amp0 = {amp0:e}: {e}")))?;
            r * wp
        }
        (None, None) if alpha > 0.0 => {
            return Err(ConfigError {
                key: "drive.mod_freq".into(),
                line: cx.lines.get("drive.alpha").copied(),
                message: "missing: alpha > 0 needs mod_freq or mod_freq_ratio".into(),
            })
        }
        (None, None) => 0.0,
    };
    let phase_mode = cx
        .word("drive.phase_mode", &d.phase_mode, &[("sin", PhaseMode::Sin), ("cos", PhaseMode::Cos)])?
        .unwrap_or_default();
    Ok(DriveModulation::modulated(amp0, alpha, mod_freq, phase_mode))
}

type SolverParts = (SolverOptions, Option<f64>, usize, usize, f64, FloquetOptions);

fn resolve_solver(
    cx: &mut Ctx,
    raw: Option<&RawSolver>,
    params: &SystemParams,
    drive: &DriveModulation,
    omega1: f64,
) -> Result<SolverParts, ConfigError> {
    let d = SolverOptions::default();
    let fd = FloquetOptions::default();
    let sd = SteadySettings::default();
    let Some(r) = raw else {
        let t_end = integrator::default_horizon(params);
        let solver = SolverOptions {
            t_end,
            output_interval: Some(t_end / 2000.0),
            seed_eps: integrator::default_seed(params, drive.amp0),
            ..d
        };
        return Ok((solver, None, sd.windows, sd.samples_per_window, sd.drift_tol, fd));
    };
    let positive = |cx: &mut Ctx, key: &str, v: &F| -> Result<Option<f64>, ConfigError> {
        match cx.num(key, v)? {
            Some(x) => cx.check(key, x, x > 0.0, "must be > 0").map(Some),
            None => Ok(None),
        }
    };
    let kind = cx.word("solver.method", &r.method, &[("rk45", 0u8), ("rk4", 1u8)])?.unwrap_or(0);
    let rtol = positive(cx, "solver.rtol", &r.rtol)?.unwrap_or(1e-9);
    let atol = positive(cx, "solver.atol", &r.atol)?.unwrap_or(1e-15);
    let dt = positive(cx, "solver.dt", &r.dt)?;
    let method = if kind == 0 {
        Method::Rk45 { rtol, atol }
    } else {
        let dt = dt.ok_or_else(|| cx.err("solver.dt", "missing: method \"rk4\" needs dt"))?;
        Method::Rk4 { dt: dt * omega1 }
    };
    let t_end = positive(cx, "solver.t_end", &r.t_end)?
        .map(|t| t * omega1)
        .unwrap_or_else(|| integrator::default_horizon(params));
    let output_interval = positive(cx, "solver.output_interval", &r.output_interval)?
        .map(|t| t * omega1)
        .unwrap_or(t_end / 2000.0);
    let sample_stride = cx.int("solver.sample_stride", &r.sample_stride, 1)?.unwrap_or(1);
    let seed_eps = match cx.num("solver.seed_eps", &r.seed_eps)? {
        Some(e) => Some(cx.check("solver.seed_eps", e, e >= 0.0, "must be >= 0")?),
        None => None,
    };
    let seed_phase = cx.num("solver.seed_phase", &r.seed_phase)?.unwrap_or(FRAC_PI_4);
    let overflow_guard = positive(cx, "solver.overflow_guard", &r.overflow_guard)?.unwrap_or(DEFAULT_OVERFLOW_GUARD);
    let max_steps = cx.int("solver.max_steps", &r.max_steps, 1)?.unwrap_or(d.max_steps);
    let windows = cx.int("solver.windows", &r.windows, 3)?.unwrap_or(sd.windows);
    let samples_per_window = cx.int("solver.samples_per_window", &r.samples_per_window, 2)?.unwrap_or(sd.samples_per_window);
    let drift_tol = positive(cx, "solver.drift_tol", &r.drift_tol)?.unwrap_or(sd.drift_tol);
    let floquet = FloquetOptions {
        rtol: positive(cx, "solver.floquet_rtol", &r.floquet_rtol)?.unwrap_or(fd.rtol),
        atol: positive(cx, "solver.floquet_atol", &r.floquet_atol)?.unwrap_or(fd.atol),
        reference_period: None,
        pump: cx
            .word(
                "solver.pump",
                &r.pump,
                &[("adiabatic", PumpResponse::Adiabatic), ("lagged", PumpResponse::Lagged)],
            )?
            .unwrap_or_default(),
    };
    let solver = SolverOptions {
        method,
        t_end,
        sample_stride,
        output_interval: Some(output_interval),
        seed_eps: seed_eps.unwrap_or_else(|| integrator::default_seed(params, drive.amp0)),
        seed_phase,
        overflow_guard,
        max_steps,
    };
    Ok((solver, seed_eps, windows, samples_per_window, drift_tol, floquet))
}

fn resolve_scan(cx: &mut Ctx, raw: Option<&RawScan>) -> Result<ScanConfig, ConfigError> {
    let empty = RawScan {
        quantity: None,
        min: None,
        max: None,
        count: None,
        spacing: None,
        kind: None,
        mod_freq_min: None,
        mod_freq_max: None,
        mod_freq_count: None,
        alpha_min: None,
        alpha_max: None,
        alpha_count: None,
        bracket_lo: None,
        bracket_hi: None,
        bisect_tol: None,
    };
    let r = raw.unwrap_or(&empty);
    let quantity = cx
        .word(
            "scan.quantity",
            &r.quantity,
            &[("amp", ScanQuantity::Amp), ("amp_ratio", ScanQuantity::AmpRatio)],
        )?
        .unwrap_or(ScanQuantity::AmpRatio);
    let spacing = cx
        .word("scan.spacing", &r.spacing, &[("linear", Spacing::Linear), ("log", Spacing::Log)])?
        .unwrap_or_default();
    let kind = cx
        .word(
            "scan.kind",
            &r.kind,
            &[
                ("steady_intensities", ScanKind::SteadyIntensities),
                ("eigenvalues", ScanKind::Eigenvalues),
                ("floquet_rate", ScanKind::FloquetRate),
            ],
        )?
        .unwrap_or_default();
    let axis = Axis {
        min: cx.num("scan.min", &r.min)?.unwrap_or(0.0),
        max: cx.num("scan.max", &r.max)?.unwrap_or(2.0),
        count: cx.int("scan.count", &r.count, 2)?.unwrap_or(200),
        spacing,
    };
    if axis.min < 0.0 {
        return Err(cx.err("scan.min", format!("{} must be >= 0", axis.min)));
    }
    axis.validate().map_err(|e| cx.err("scan.max", e.to_string()))?;
    let mf = optomech::sweep::default_mod_freq_axis();
    let mod_freq_axis = Axis {
        min: cx.num("scan.mod_freq_min", &r.mod_freq_min)?.unwrap_or(mf.min),
        max: cx.num("scan.mod_freq_max", &r.mod_freq_max)?.unwrap_or(mf.max),
        count: cx.int("scan.mod_freq_count", &r.mod_freq_count, 2)?.unwrap_or(mf.count),
        spacing: Spacing::Linear,
    };
    if mod_freq_axis.min <= 0.0 {
        return Err(cx.err("scan.mod_freq_min", format!("{} must be > 0", mod_freq_axis.min)));
    }
    mod_freq_axis
        .validate()
        .map_err(|e| cx.err("scan.mod_freq_max", e.to_string()))?;
    let al = optomech::sweep::default_alpha_axis();
    let alpha_axis = Axis {
        min: cx.num("scan.alpha_min", &r.alpha_min)?.unwrap_or(al.min),
        max: cx.num("scan.alpha_max", &r.alpha_max)?.unwrap_or(al.max),
        count: cx.int("scan.alpha_count", &r.alpha_count, 2)?.unwrap_or(al.count),
        spacing: Spacing::Linear,
    };
    if alpha_axis.min < 0.0 {
        return Err(cx.err("scan.alpha_min", format!("{} must be >= 0", alpha_axis.min)));
    }
    if alpha_axis.max >= 1.0 {
        return Err(cx.err("scan.alpha_max", format!("{} must be < 1", alpha_axis.max)));
    }
    alpha_axis
        .validate()
        .map_err(|e| cx.err("scan.alpha_max", e.to_string()))?;
    let lo = cx.num("scan.bracket_lo", &r.bracket_lo)?.unwrap_or(0.9);
    let hi = cx.num("scan.bracket_hi", &r.bracket_hi)?.unwrap_or(1.1);
    cx.check("scan.bracket_lo", lo, lo >= 0.0, "must be >= 0")?;
    cx.check("scan.bracket_hi", hi, hi > lo, "must exceed bracket_lo")?;
    let bisect_tol = cx.num("scan.bisect_tol", &r.bisect_tol)?.unwrap_or(1e-3);
    cx.check("scan.bisect_tol", bisect_tol, bisect_tol > 0.0, "must be > 0")?;
    Ok(ScanConfig {
        quantity,
        axis,
        kind,
        mod_freq_axis,
        alpha_axis,
        bracket: (lo, hi),
        bisect_tol,
    })
}
