//! Mean-field model of two optical modes coupled through a phonon mode.
//!
//! All quantities are dimensionless, in units of the first optical mode
//! frequency `omega1`. The optical amplitudes live in the frame rotating at
//! the drive frequency; the phonon amplitude is left in the lab frame.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::roots;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative tolerance under which `gamma0` and `gamma2` count as equal.
pub const DAMPING_MATCH_RTOL: f64 = 1e-9;

/// Relative tolerance on the drive amplitude for the exceptional-point label.
pub const REGIME_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega1: f64,
    pub omega2: f64,
    /// phonon frequency
    pub omega_b: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma0: f64,
    /// optomechanical coupling strength
    pub coupling: f64,
    /// frequency of the external wave driving mode 1
    pub drive_freq: f64,
}

impl SystemParams {
    /// The standard parameter set: resonant drive of mode 1, `omega2 =
    /// omega1 + omega_b`, `gamma1 = 1e-2`, `gamma2 = gamma0 = 1e-3`,
    /// coupling `0.2`, `omega_b = 1e-2`.
    pub fn reference() -> Self {
        SystemParams {
            omega1: 1.0,
            omega2: 1.01,
            omega_b: 1e-2,
            gamma1: 1e-2,
            gamma2: 1e-3,
            gamma0: 1e-3,
            coupling: 0.2,
            drive_freq: 1.0,
        }
    }

    /// Detuning of mode 1 from the drive.
    pub fn detuning1(&self) -> f64 {
        self.omega1 - self.drive_freq
    }

    /// Detuning of mode 2 from the drive.
    pub fn detuning2(&self) -> f64 {
        self.omega2 - self.drive_freq
    }

    /// Checks finiteness and sign constraints needed by the dynamics.
    ///
    /// Zero damping and zero coupling are accepted here (lossless and
    /// uncoupled limits); the closed-form analysis adds its own checks.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("omega1", self.omega1),
            ("omega2", self.omega2),
            ("omega_b", self.omega_b),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma0", self.gamma0),
            ("coupling", self.coupling),
            ("drive_freq", self.drive_freq),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(invalid(name, format!("{v} is not finite")));
            }
        }
        for (name, v) in [
            ("omega1", self.omega1),
            ("omega2", self.omega2),
            ("omega_b", self.omega_b),
            ("drive_freq", self.drive_freq),
        ] {
            if v <= 0.0 {
                return Err(invalid(name, format!("{v} must be > 0")));
            }
        }
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma0", self.gamma0),
        ] {
            if v < 0.0 {
                return Err(invalid(name, format!("{v} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Validation for the linear-stability analysis: coupled modes, damped
    /// fluctuations and a non-singular pump response.
    fn validate_analysis(&self) -> Result<(), ModelError> {
        self.validate()?;
        if self.coupling == 0.0 {
            return Err(ModelError::Uncoupled);
        }
        if self.gamma1 == 0.0 && self.detuning1() == 0.0 {
            return Err(invalid(
                "gamma1",
                "zero damping on a resonantly driven mode 1 has no stationary state".into(),
            ));
        }
        Ok(())
    }

    /// Rescales every frequency and rate so that `omega1 == 1`.
    pub fn normalized(&self) -> Self {
        self.scaled(1.0 / self.omega1)
    }

    /// Multiplies every frequency and rate by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        SystemParams {
            omega1: self.omega1 * factor,
            omega2: self.omega2 * factor,
            omega_b: self.omega_b * factor,
            gamma1: self.gamma1 * factor,
            gamma2: self.gamma2 * factor,
            gamma0: self.gamma0 * factor,
            coupling: self.coupling * factor,
            drive_freq: self.drive_freq * factor,
        }
    }

    /// `|coupling|^2 / (detuning1^2 + gamma1^2)`: squared drive-to-gain factor.
    fn pump_factor(&self) -> f64 {
        let d1 = self.detuning1();
        self.coupling * self.coupling / (d1 * d1 + self.gamma1 * self.gamma1)
    }

    fn damping_matched(&self) -> bool {
        let scale = self.gamma0.abs().max(self.gamma2.abs());
        (self.gamma0 - self.gamma2).abs() <= DAMPING_MATCH_RTOL * scale
    }

    fn require_matched_damping(&self) -> Result<(), ModelError> {
        if self.damping_matched() {
            Ok(())
        } else {
            Err(ModelError::NoExceptionalPoint {
                gamma0: self.gamma0,
                gamma2: self.gamma2,
            })
        }
    }
}

fn invalid(name: &'static str, reason: String) -> ModelError {
    ModelError::InvalidParameter { name, reason }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    /// `1 + alpha sin(mod_freq t)`
    #[default]
    Sin,
    /// `1 + alpha cos(mod_freq t)`
    Cos,
}

/// Drive amplitude `amp0 (1 + alpha f(mod_freq t))` with `f` = sin or cos.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveModulation {
    pub amp0: f64,
    pub alpha: f64,
    pub mod_freq: f64,
    pub phase_mode: PhaseMode,
}

impl DriveModulation {
    pub fn constant(amp0: f64) -> Self {
        DriveModulation {
            amp0,
            alpha: 0.0,
            mod_freq: 0.0,
            phase_mode: PhaseMode::Sin,
        }
    }

    pub fn modulated(amp0: f64, alpha: f64, mod_freq: f64, phase_mode: PhaseMode) -> Self {
        DriveModulation {
            amp0,
            alpha,
            mod_freq,
            phase_mode,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.amp0.is_finite() && self.amp0 >= 0.0) {
            return Err(invalid("amp0", format!("{} must be finite and >= 0", self.amp0)));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(invalid("alpha", format!("{} must be finite and >= 0", self.alpha)));
        }
        if !self.mod_freq.is_finite() || self.mod_freq < 0.0 {
            return Err(invalid("mod_freq", format!("{} must be finite and >= 0", self.mod_freq)));
        }
        if self.alpha > 0.0 && self.mod_freq <= 0.0 {
            return Err(invalid("mod_freq", "must be > 0 when alpha > 0".into()));
        }
        Ok(())
    }

    pub fn is_modulated(&self) -> bool {
        self.alpha > 0.0
    }

    /// Modulation period, infinite for an unmodulated drive.
    pub fn period(&self) -> f64 {
        if self.is_modulated() {
            2.0 * PI / self.mod_freq
        } else {
            f64::INFINITY
        }
    }

    /// Real envelope `amp0 (1 + alpha f(mod_freq t))`.
    pub fn envelope(&self, t: f64) -> f64 {
        if self.alpha == 0.0 {
            return self.amp0;
        }
        let phase = self.mod_freq * t;
        let wave = match self.phase_mode {
            PhaseMode::Sin => phase.sin(),
            PhaseMode::Cos => phase.cos(),
        };
        self.amp0 * (1.0 + self.alpha * wave)
    }
}

/// Drive amplitude at time `t` as a (real-valued) complex number.
pub fn drive_amplitude(drive: &DriveModulation, t: f64) -> Complex64 {
    Complex64::new(drive.envelope(t), 0.0)
}

/// One monochromatic lab-frame wave `amplitude * exp(-i frequency t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub amplitude: Complex64,
    pub frequency: f64,
}

impl Wave {
    pub fn field(&self, t: f64) -> Complex64 {
        self.amplitude * Complex64::from_polar(1.0, -self.frequency * t)
    }

    pub fn intensity(&self) -> f64 {
        self.amplitude.norm_sqr()
    }
}

/// A carrier and two sidebands whose interference is a cosine-modulated drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeWaveDrive {
    pub carrier_freq: f64,
    /// carrier, lower sideband, upper sideband
    pub waves: [Wave; 3],
    pub modulation: DriveModulation,
}

impl ThreeWaveDrive {
    /// Sum of the three lab-frame fields.
    pub fn field(&self, t: f64) -> Complex64 {
        self.waves.iter().map(|w| w.field(t)).sum()
    }

    /// Field with the carrier rotation `exp(-i carrier t)` divided out.
    pub fn envelope(&self, t: f64) -> Complex64 {
        self.waves
            .iter()
            .map(|w| w.amplitude * Complex64::from_polar(1.0, (self.carrier_freq - w.frequency) * t))
            .sum()
    }

    /// Sideband intensity relative to the carrier, `alpha^2 / 4`.
    pub fn sideband_ratio(&self) -> f64 {
        if self.waves[0].intensity() == 0.0 {
            return 0.0;
        }
        self.waves[1].intensity() / self.waves[0].intensity()
    }
}

/// Builds the carrier `amp0 e^{-iωt}` and two in-phase sidebands
/// `amp0 alpha/2 e^{-i(ω∓Δω)t}`, whose sum is `amp0 (1 + alpha cos(Δω t))
/// e^{-iωt}`.
///
/// Sidebands in quadrature (`+i` on the lower, `-i` on the upper) would
/// instead give `1 - alpha sin(Δω t)`.
pub fn three_wave_drive(amp0: f64, alpha: f64, mod_freq: f64, carrier: f64) -> ThreeWaveDrive {
    let side = amp0 * alpha / 2.0;
    ThreeWaveDrive {
        carrier_freq: carrier,
        waves: [
            Wave {
                amplitude: Complex64::new(amp0, 0.0),
                frequency: carrier,
            },
            Wave {
                amplitude: Complex64::new(side, 0.0),
                frequency: carrier - mod_freq,
            },
            Wave {
                amplitude: Complex64::new(side, 0.0),
                frequency: carrier + mod_freq,
            },
        ],
        modulation: DriveModulation::modulated(amp0, alpha, mod_freq, PhaseMode::Cos),
    }
}

/// Complex mode amplitudes `(a1, a2, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeState {
    pub a1: Complex64,
    pub a2: Complex64,
    pub b: Complex64,
}

impl ModeState {
    pub const ZERO: ModeState = ModeState {
        a1: Complex64 { re: 0.0, im: 0.0 },
        a2: Complex64 { re: 0.0, im: 0.0 },
        b: Complex64 { re: 0.0, im: 0.0 },
    };

    pub fn new(a1: Complex64, a2: Complex64, b: Complex64) -> Self {
        ModeState { a1, a2, b }
    }

    /// `(|a1|^2, |a2|^2, |b|^2)`
    pub fn intensities(&self) -> [f64; 3] {
        [self.a1.norm_sqr(), self.a2.norm_sqr(), self.b.norm_sqr()]
    }

    pub fn is_finite(&self) -> bool {
        self.a1.is_finite() && self.a2.is_finite() && self.b.is_finite()
    }

    pub fn check_finite(&self) -> Result<(), ModelError> {
        if !self.a1.is_finite() {
            Err(ModelError::NonFiniteState("a1"))
        } else if !self.a2.is_finite() {
            Err(ModelError::NonFiniteState("a2"))
        } else if !self.b.is_finite() {
            Err(ModelError::NonFiniteState("b"))
        } else {
            Ok(())
        }
    }

    pub fn norm(&self) -> f64 {
        self.intensities().iter().sum::<f64>().sqrt()
    }

    pub fn to_array(self) -> [Complex64; 3] {
        [self.a1, self.a2, self.b]
    }

    pub fn from_array(v: [Complex64; 3]) -> Self {
        ModeState {
            a1: v[0],
            a2: v[1],
            b: v[2],
        }
    }
}

impl Add for ModeState {
    type Output = ModeState;
    fn add(self, rhs: ModeState) -> ModeState {
        ModeState::new(self.a1 + rhs.a1, self.a2 + rhs.a2, self.b + rhs.b)
    }
}

impl Sub for ModeState {
    type Output = ModeState;
    fn sub(self, rhs: ModeState) -> ModeState {
        ModeState::new(self.a1 - rhs.a1, self.a2 - rhs.a2, self.b - rhs.b)
    }
}

impl Mul<f64> for ModeState {
    type Output = ModeState;
    fn mul(self, rhs: f64) -> ModeState {
        ModeState::new(self.a1 * rhs, self.a2 * rhs, self.b * rhs)
    }
}

/// Time derivative in the rotating frame, no input checks.
#[inline]
pub(crate) fn rhs_unchecked(
    y: &[Complex64; 3],
    t: f64,
    params: &SystemParams,
    drive: &DriveModulation,
) -> [Complex64; 3] {
    let [a1, a2, b] = *y;
    let g = params.coupling;
    let d1 = params.detuning1();
    let d2 = params.detuning2();
    [
        -Complex64::new(params.gamma1, d1) * a1 - I * g * a2 * b - I * drive.envelope(t),
        -Complex64::new(params.gamma2, d2) * a2 - I * g * a1 * b.conj(),
        -Complex64::new(params.gamma0, params.omega_b) * b - I * g * a1 * a2.conj(),
    ]
}

/// `(da1/dt, da2/dt, db/dt)` of the mean-field equations in the frame
/// rotating at the drive frequency.
pub fn rhs_rotating_frame(
    state: &ModeState,
    t: f64,
    params: &SystemParams,
    drive: &DriveModulation,
) -> Result<ModeState, ModelError> {
    state.check_finite()?;
    Ok(ModeState::from_array(rhs_unchecked(&state.to_array(), t, params, drive)))
}

/// Lab-frame derivative: the drive carries its `exp(-i drive_freq t)`
/// rotation and the optical modes oscillate at their bare frequencies.
pub fn rhs_lab_frame(
    state: &ModeState,
    t: f64,
    params: &SystemParams,
    drive: &DriveModulation,
) -> Result<ModeState, ModelError> {
    state.check_finite()?;
    let ModeState { a1, a2, b } = *state;
    let g = params.coupling;
    let pump = drive.envelope(t) * Complex64::from_polar(1.0, -params.drive_freq * t);
    Ok(ModeState::new(
        -Complex64::new(params.gamma1, params.omega1) * a1 - I * g * a2 * b - I * pump,
        -Complex64::new(params.gamma2, params.omega2) * a2 - I * g * a1 * b.conj(),
        -Complex64::new(params.gamma0, params.omega_b) * b - I * g * a1 * a2.conj(),
    ))
}

/// Stationary mode-1 amplitude for a constant drive, with modes 2 and b empty.
pub(crate) fn pump_amplitude(params: &SystemParams, amp: Complex64) -> Complex64 {
    -amp / Complex64::new(params.detuning1(), -params.gamma1)
}

/// Subthreshold fixed point `(-amp / (detuning1 - i gamma1), 0, 0)`.
///
/// Fails with [`ModelError::UnstableFixedPoint`] when `amp` is at or above the
/// instability threshold unless `force` is set.
pub fn stationary_below_threshold(
    params: &SystemParams,
    amp: f64,
    force: bool,
) -> Result<ModeState, ModelError> {
    params.validate()?;
    check_amp(amp)?;
    if params.gamma1 == 0.0 && params.detuning1() == 0.0 {
        return Err(invalid("gamma1", "no stationary state for a lossless resonant mode 1".into()));
    }
    if !force && amp > 0.0 {
        let threshold = threshold_amplitude(params)?;
        if amp >= threshold {
            return Err(ModelError::UnstableFixedPoint { amp, threshold });
        }
    }
    Ok(ModeState::new(
        pump_amplitude(params, Complex64::new(amp, 0.0)),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    ))
}

fn check_amp(amp: f64) -> Result<(), ModelError> {
    if amp.is_finite() && amp >= 0.0 {
        Ok(())
    } else {
        Err(invalid("amp", format!("{amp} must be finite and >= 0")))
    }
}

/// Coefficient matrix of the linearized fluctuation equations acting on
/// `(conj(δa2), δb)` for a given mode-1 pump amplitude `a1`.
pub(crate) fn fluctuation_matrix(params: &SystemParams, a1: Complex64) -> Matrix2<Complex64> {
    let g = params.coupling;
    Matrix2::new(
        Complex64::new(-params.gamma2, params.detuning2()),
        I * g * a1.conj(),
        -I * g * a1,
        Complex64::new(-params.gamma0, -params.omega_b),
    )
}

/// Linearized coefficient matrix about the subthreshold fixed point at
/// (possibly complex) drive amplitude `amp`, acting on `(conj(δa2), δb)`.
pub fn linearized_matrix(params: &SystemParams, amp: Complex64) -> Matrix2<Complex64> {
    fluctuation_matrix(params, pump_amplitude(params, amp))
}

/// Eigenvalues of the linearized fluctuation dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    /// the branch with the larger real part (ties: larger imaginary part)
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    /// value under the square root
    pub discriminant: Complex64,
}

impl EigenPair {
    pub fn gap(&self) -> f64 {
        (self.lambda1 - self.lambda2).norm()
    }

    pub fn max_real(&self) -> f64 {
        self.lambda1.re
    }

    pub fn trace(&self) -> Complex64 {
        self.lambda1 + self.lambda2
    }
}

fn diagonal_terms(params: &SystemParams) -> (Complex64, Complex64) {
    (
        Complex64::new(-params.gamma2, params.detuning2()),
        Complex64::new(-params.gamma0, -params.omega_b),
    )
}

/// Trace of the linearized coefficient matrix; independent of the drive.
pub fn linearized_trace(params: &SystemParams) -> Complex64 {
    let (p, q) = diagonal_terms(params);
    p + q
}

/// Discriminant `[(iΔ2 - γ2) + (iω_b + γ0)]^2 + 4 |Ω amp|^2 / (Δ1^2 + γ1^2)`.
pub fn discriminant(params: &SystemParams, amp: f64) -> Complex64 {
    let (p, q) = diagonal_terms(params);
    let s = p - q;
    s * s + 4.0 * params.pump_factor() * amp * amp
}

/// Closed-form eigenvalues of the linearized fluctuation equations.
pub fn eigenvalues_linearized(params: &SystemParams, amp: f64) -> Result<EigenPair, ModelError> {
    params.validate()?;
    check_amp(amp)?;
    if params.gamma1 == 0.0 && params.detuning1() == 0.0 {
        return Err(invalid("gamma1", "detuning1^2 + gamma1^2 must be > 0".into()));
    }
    Ok(eigenpair_unchecked(params, amp))
}

fn eigenpair_unchecked(params: &SystemParams, amp: f64) -> EigenPair {
    let (p, q) = diagonal_terms(params);
    let half_trace = (p + q) * 0.5;
    let disc = discriminant(params, amp);
    let half_root = disc.sqrt() * 0.5;
    let (l1, l2) = order_pair(half_trace + half_root, half_trace - half_root);
    EigenPair {
        lambda1: l1,
        lambda2: l2,
        discriminant: disc,
    }
}

/// Orders two complex numbers by real part, then imaginary part, descending.
pub(crate) fn order_pair(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    let a_first = a.re > b.re || (a.re == b.re && a.im >= b.im);
    if a_first {
        (a, b)
    } else {
        (b, a)
    }
}

/// Drive amplitude at which the two eigenvalues coalesce, by bracketed root
/// search on the (real) discriminant.
///
/// Only defined for `gamma0 == gamma2`; otherwise the discriminant keeps a
/// nonzero imaginary part and the eigenvalues never meet.
pub fn ep_amplitude(params: &SystemParams) -> Result<f64, ModelError> {
    params.validate_analysis()?;
    params.require_matched_damping()?;
    let f = |amp: f64| discriminant(params, amp).re;
    if f(0.0) >= 0.0 {
        return Ok(0.0);
    }
    let guess = ep_amplitude_closed_form(params)?.max(f64::MIN_POSITIVE);
    // start below the expected root so the doubling search is exercised
    let hi = roots::expand_upper(f, 0.0, 0.25 * guess, 64)?;
    Ok(roots::bisect(f, 0.0, hi, 0.0)?)
}

/// `sqrt(Δ1^2 + γ1^2) |Δ2 + ω_b| / (2 |Ω|)`: zero of the discriminant.
///
/// The factor 2 in the denominator follows from the eigenvalue expression;
/// the same formula without it does not make the discriminant vanish.
pub fn ep_amplitude_closed_form(params: &SystemParams) -> Result<f64, ModelError> {
    params.validate_analysis()?;
    params.require_matched_damping()?;
    let d1 = params.detuning1();
    let split = params.detuning2() + params.omega_b;
    Ok((d1 * d1 + params.gamma1 * params.gamma1).sqrt() * split.abs()
        / (2.0 * params.coupling.abs()))
}

/// Smallest drive amplitude at which `max Re λ` reaches zero (instability
/// threshold), found by bracketed root search. Works for unequal damping.
pub fn threshold_amplitude(params: &SystemParams) -> Result<f64, ModelError> {
    params.validate_analysis()?;
    require_damped_fluctuations(params)?;
    let f = |amp: f64| eigenpair_unchecked(params, amp).max_real();
    let d1 = params.detuning1();
    let scale = (d1 * d1 + params.gamma1 * params.gamma1).sqrt() / params.coupling.abs();
    let guess = scale
        * (params.detuning2().abs() + params.omega_b + params.gamma0 + params.gamma2)
        * 0.25;
    let hi = roots::expand_upper(f, 0.0, guess, 128)?;
    Ok(roots::bisect(f, 0.0, hi, 0.0)?)
}

/// Threshold search restricted to `[lo, hi]`; errors if `max Re λ` does not
/// change sign on the bracket.
pub fn threshold_amplitude_in(params: &SystemParams, lo: f64, hi: f64) -> Result<f64, ModelError> {
    params.validate_analysis()?;
    require_damped_fluctuations(params)?;
    check_amp(lo)?;
    check_amp(hi)?;
    let f = |amp: f64| eigenpair_unchecked(params, amp).max_real();
    Ok(roots::bisect(f, lo, hi, 0.0)?)
}

fn require_damped_fluctuations(params: &SystemParams) -> Result<(), ModelError> {
    if params.gamma2 <= 0.0 {
        return Err(invalid("gamma2", "threshold requires gamma2 > 0".into()));
    }
    if params.gamma0 <= 0.0 {
        return Err(invalid("gamma0", "threshold requires gamma0 > 0".into()));
    }
    Ok(())
}

/// `sqrt(Δ1^2 + γ1^2) sqrt((Δ2 + ω_b)^2 + (γ0 + γ2)^2) / (2 |Ω|)`, valid
/// for `gamma0 == gamma2`.
///
/// As with [`ep_amplitude_closed_form`], the factor 2 in the denominator is
/// required for `Re λ1 = 0`; without it the value is twice the threshold.
pub fn threshold_amplitude_closed_form(params: &SystemParams) -> Result<f64, ModelError> {
    params.validate_analysis()?;
    params.require_matched_damping()?;
    let d1 = params.detuning1();
    let split = params.detuning2() + params.omega_b;
    let damp = params.gamma0 + params.gamma2;
    Ok((d1 * d1 + params.gamma1 * params.gamma1).sqrt() * (split * split + damp * damp).sqrt()
        / (2.0 * params.coupling.abs()))
}

/// Squared frequency of the equivalent parametric oscillator,
/// `((ω_b + Δ2)/2)^2 - |Ω amp|^2 / (Δ1^2 + γ1^2)`.
pub fn parametric_frequency_sq(params: &SystemParams, amp: f64) -> Result<f64, ModelError> {
    params.validate_analysis()?;
    params.require_matched_damping()?;
    check_amp(amp)?;
    let half = 0.5 * (params.omega_b + params.detuning2());
    Ok(half * half - params.pump_factor() * amp * amp)
}

/// Parametric-oscillator frequency, real only in the strong-coupling regime.
pub fn parametric_frequency(params: &SystemParams, amp: f64) -> Result<f64, ModelError> {
    let wp_sq = parametric_frequency_sq(params, amp)?;
    if wp_sq >= 0.0 {
        return Ok(wp_sq.sqrt());
    }
    // round-off right at the exceptional point
    let half = 0.5 * (params.omega_b + params.detuning2());
    if wp_sq.abs() <= 4.0 * f64::EPSILON * half * half {
        return Ok(0.0);
    }
    Err(ModelError::WeakCoupling {
        amp,
        omega_p_sq: wp_sq,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// below the exceptional point: eigenfrequencies split
    StrongCoupling,
    ExceptionalPoint,
    /// between the exceptional point and the threshold: decay rates split
    WeakCoupling,
    /// at or above the instability threshold
    Unstable,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::StrongCoupling => "strong_coupling",
            Regime::ExceptionalPoint => "exceptional_point",
            Regime::WeakCoupling => "weak_coupling",
            Regime::Unstable => "unstable",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn coupling_regime(params: &SystemParams, amp: f64) -> Result<Regime, ModelError> {
    check_amp(amp)?;
    let ep = ep_amplitude(params)?;
    let th = threshold_amplitude(params)?;
    Ok(classify_regime(amp, ep, th))
}

/// Regime label given precomputed exceptional-point and threshold amplitudes.
pub fn classify_regime(amp: f64, ep: f64, threshold: f64) -> Regime {
    if (amp - ep).abs() <= REGIME_RTOL * ep {
        Regime::ExceptionalPoint
    } else if amp < ep {
        Regime::StrongCoupling
    } else if amp >= threshold {
        Regime::Unstable
    } else {
        Regime::WeakCoupling
    }
}
