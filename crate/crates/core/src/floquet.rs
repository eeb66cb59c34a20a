//! Floquet stability of the linearized fluctuation equations under a
//! periodically modulated drive.
//!
//! The fluctuations `(conj(δa2), δb)` obey `x' = M(t) x` with the drive
//! entering only the off-diagonal entries, so `tr M` is constant and the
//! monodromy determinant is `exp(T tr M)`.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ModelError;
use crate::integrator::Trajectory;
use crate::model::{self, DriveModulation, PhaseMode, SystemParams};
use crate::ode::{AdaptiveConfig, Dopri5, StepError};

/// How the mode-1 pump follows the modulated drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PumpResponse {
    /// `a1(t) = -drive(t) / (Δ1 - iγ1)`: the pump is slaved instantly to the
    /// drive envelope.
    #[default]
    Adiabatic,
    /// `a1(t)` is the exact periodic response of the damped mode 1 to the
    /// modulated drive (with `a2 = b = 0`), including its lag and reduced
    /// depth when `mod_freq` is comparable to `gamma1`.
    Lagged,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FloquetError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("invalid floquet options: {0}")]
    InvalidOptions(String),
}

/// Periodic linear system for the fluctuations around the pumped state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedSystem {
    pub params: SystemParams,
    pub drive: DriveModulation,
    pub pump: PumpResponse,
}

impl LinearizedSystem {
    pub fn new(params: &SystemParams, drive: &DriveModulation) -> Result<Self, FloquetError> {
        params.validate()?;
        drive.validate()?;
        if params.gamma1 == 0.0 && params.detuning1() == 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "gamma1",
                reason: "detuning1^2 + gamma1^2 must be > 0".into(),
            }
            .into());
        }
        Ok(LinearizedSystem {
            params: *params,
            drive: *drive,
            pump: PumpResponse::Adiabatic,
        })
    }

    pub fn with_pump(mut self, pump: PumpResponse) -> Self {
        self.pump = pump;
        self
    }

    /// Modulation period; infinite when the drive is constant.
    pub fn period(&self) -> f64 {
        self.drive.period()
    }

    /// Mode-1 amplitude seen by the fluctuations at time `t`.
    pub fn pump_amplitude(&self, t: f64) -> Complex64 {
        match self.pump {
            PumpResponse::Adiabatic => {
                model::pump_amplitude(&self.params, model::drive_amplitude(&self.drive, t))
            }
            PumpResponse::Lagged => lagged_pump(&self.params, &self.drive, t),
        }
    }

    pub fn matrix(&self, t: f64) -> Matrix2<Complex64> {
        model::fluctuation_matrix(&self.params, self.pump_amplitude(t))
    }

    #[inline]
    pub fn rhs(&self, dev: &[Complex64; 2], t: f64) -> [Complex64; 2] {
        let m = self.matrix(t);
        [
            m[(0, 0)] * dev[0] + m[(0, 1)] * dev[1],
            m[(1, 0)] * dev[0] + m[(1, 1)] * dev[1],
        ]
    }
}

fn lagged_pump(params: &SystemParams, drive: &DriveModulation, t: f64) -> Complex64 {
    let z = Complex64::new(params.gamma1, params.detuning1());
    let i = Complex64::new(0.0, 1.0);
    let a0 = drive.amp0;
    let mean = -i * a0 / z;
    if drive.alpha == 0.0 {
        return mean;
    }
    let w = drive.mod_freq;
    let half = 0.5 * a0 * drive.alpha;
    let (up, down) = match drive.phase_mode {
        PhaseMode::Sin => (Complex64::new(-half, 0.0), Complex64::new(half, 0.0)),
        PhaseMode::Cos => (-i * half, -i * half),
    };
    let rot = Complex64::from_polar(1.0, w * t);
    mean + up / (z + i * w) * rot + down / (z - i * w) * rot.conj()
}

/// `d/dt (conj(δa2), δb)` with the pump slaved to the instantaneous drive.
pub fn linearized_rhs(
    dev: &[Complex64; 2],
    t: f64,
    params: &SystemParams,
    drive: &DriveModulation,
) -> [Complex64; 2] {
    LinearizedSystem {
        params: *params,
        drive: *drive,
        pump: PumpResponse::Adiabatic,
    }
    .rhs(dev, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloquetOptions {
    pub rtol: f64,
    pub atol: f64,
    /// integration horizon used when the drive is unmodulated
    pub reference_period: Option<f64>,
    pub pump: PumpResponse,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        FloquetOptions {
            rtol: 1e-10,
            atol: 1e-14,
            reference_period: None,
            pump: PumpResponse::Adiabatic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloquetResult {
    /// integration horizon (the modulation period, or the reference period)
    pub period: f64,
    pub monodromy: Matrix2<Complex64>,
    /// larger modulus first
    pub multipliers: [Complex64; 2],
    /// `ln(mu) / T`, principal branch
    pub exponents: [Complex64; 2],
    /// largest real part of the exponents (amplitude growth rate)
    pub growth_rate: f64,
    /// `exp(T tr M)`
    pub liouville_det: Complex64,
}

impl FloquetResult {
    /// Growth rate of `|a2|^2`.
    pub fn decrement(&self) -> f64 {
        2.0 * self.growth_rate
    }

    pub fn determinant(&self) -> Complex64 {
        self.monodromy.determinant()
    }

    /// `|det Φ - exp(T tr M)|` relative to the magnitude of the products
    /// that make up the determinant.
    pub fn liouville_residual(&self) -> f64 {
        let m = &self.monodromy;
        let scale = (m[(0, 0)] * m[(1, 1)]).norm() + (m[(0, 1)] * m[(1, 0)]).norm();
        (self.determinant() - self.liouville_det).norm() / scale.max(1.0)
    }
}

/// Eigenvalues of a 2x2 complex matrix, larger modulus first. The smaller one
/// comes from `det / mu1` to avoid cancellation.
pub fn eigenvalues_2x2(m: &Matrix2<Complex64>) -> [Complex64; 2] {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let mut root = (tr * tr - det * 4.0).sqrt();
    if (tr.conj() * root).re < 0.0 {
        root = -root;
    }
    let mu1 = (tr + root) * 0.5;
    let mu2 = if mu1.norm() > 0.0 { det / mu1 } else { Complex64::new(0.0, 0.0) };
    [mu1, mu2]
}

/// One-period flow map of the linearized system and its Floquet spectrum.
pub fn monodromy(
    params: &SystemParams,
    drive: &DriveModulation,
    opts: &FloquetOptions,
) -> Result<FloquetResult, FloquetError> {
    let sys = LinearizedSystem::new(params, drive)?.with_pump(opts.pump);
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(FloquetError::InvalidOptions("rtol and atol must be > 0".into()));
    }
    let period = if sys.period().is_finite() {
        sys.period()
    } else if let Some(t) = opts.reference_period {
        t
    } else if drive.mod_freq > 0.0 {
        2.0 * PI / drive.mod_freq
    } else {
        2.0 * PI / (params.detuning2().abs() + params.omega_b)
    };
    if !(period > 0.0 && period.is_finite()) {
        return Err(FloquetError::InvalidOptions(format!("period {period} must be finite and > 0")));
    }

    // columns of the fundamental matrix, stacked
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut f = |t: f64, y: &[Complex64; 4]| {
        let m = sys.matrix(t);
        [
            m[(0, 0)] * y[0] + m[(0, 1)] * y[1],
            m[(1, 0)] * y[0] + m[(1, 1)] * y[1],
            m[(0, 0)] * y[2] + m[(0, 1)] * y[3],
            m[(1, 0)] * y[2] + m[(1, 1)] * y[3],
        ]
    };
    let mut stepper = Dopri5::new(0.0, [one, zero, zero, one], AdaptiveConfig::new(opts.rtol, opts.atol));
    stepper.advance::<_, _, StepError>(&mut f, period, |_, _| Ok(()))?;
    let y = stepper.y;
    let phi = Matrix2::new(y[0], y[2], y[1], y[3]);

    let multipliers = eigenvalues_2x2(&phi);
    let exponents = multipliers.map(|mu| mu.ln() / period);
    let growth_rate = exponents[0].re.max(exponents[1].re);
    Ok(FloquetResult {
        period,
        monodromy: phi,
        multipliers,
        exponents,
        growth_rate,
        liouville_det: (model::linearized_trace(params) * period).exp(),
    })
}

/// Signed log display transform `sign(r) ln(1 + |r| / r0)`.
pub fn log_decrement(rate: f64, rate0: f64) -> f64 {
    rate.signum() * (rate.abs() / rate0).ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// `|a2|^2`
    A2Sq,
    /// `|b|^2`
    BSq,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("fit window [{lo:e}, {hi:e}] holds {count} samples, need at least 2")]
    TooFewSamples { lo: f64, hi: f64, count: usize },
    #[error("observable {value:e} at t = {t:e} is below the floor {floor:e}")]
    Underflow { t: f64, value: f64, floor: f64 },
}

/// Amplitude growth rate from a least-squares fit of `ln(observable)` on
/// `[window.0, window.1]`, halved to convert from intensity.
pub fn fit_envelope_rate(
    traj: &Trajectory,
    observable: Observable,
    window: (f64, f64),
    floor: f64,
) -> Result<f64, FitError> {
    let idx = match observable {
        Observable::A2Sq => 1,
        Observable::BSq => 2,
    };
    let mut pts = Vec::new();
    for (t, s) in traj.times.iter().zip(&traj.states) {
        if *t < window.0 || *t > window.1 {
            continue;
        }
        let v = s.intensities()[idx];
        if !(v > floor) {
            return Err(FitError::Underflow { t: *t, value: v, floor });
        }
        pts.push((*t, v.ln()));
    }
    if pts.len() < 2 {
        return Err(FitError::TooFewSamples {
            lo: window.0,
            hi: window.1,
            count: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    Ok(0.5 * sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModeState;
    use approx::assert_relative_eq;

    fn p_star() -> SystemParams {
        SystemParams::reference()
    }

    #[test]
    fn undriven_fluctuations_decouple() {
        let p = p_star();
        let r = monodromy(
            &p,
            &DriveModulation::constant(0.0),
            &FloquetOptions {
                reference_period: Some(500.0),
                ..FloquetOptions::default()
            },
        )
        .unwrap();
        let lam = [
            Complex64::new(-p.gamma2, p.detuning2()),
            Complex64::new(-p.gamma0, -p.omega_b),
        ];
        for l in lam {
            let mu = (l * 500.0).exp();
            assert!(r.multipliers.iter().any(|m| (m - mu).norm() < 1e-9));
        }
        assert!(r.monodromy[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn frozen_drive_matrix_matches_closed_form() {
        let p = p_star();
        let d = DriveModulation::modulated(4.5e-4, 0.3, 2e-3, PhaseMode::Sin);
        let sys = LinearizedSystem::new(&p, &d).unwrap();
        for k in 0..20 {
            let t = k as f64 * 173.0;
            let ev = eigenvalues_2x2(&sys.matrix(t));
            let amp = d.envelope(t).abs();
            let e = model::eigenvalues_linearized(&p, amp).unwrap();
            // real parts can tie to rounding, so match as unordered pairs
            let direct = (ev[0] - e.lambda1).norm().max((ev[1] - e.lambda2).norm());
            let swapped = (ev[1] - e.lambda1).norm().max((ev[0] - e.lambda2).norm());
            assert!(direct.min(swapped) < 1e-12, "t={t} amp={amp}");
        }
    }

    #[test]
    fn lagged_pump_solves_mode_one() {
        let p = p_star();
        for mode in [PhaseMode::Sin, PhaseMode::Cos] {
            let d = DriveModulation::modulated(4.5e-4, 0.3, 4.6e-3, mode);
            let sys = LinearizedSystem::new(&p, &d).unwrap().with_pump(PumpResponse::Lagged);
            for k in 0..10 {
                let t = k as f64 * 91.0;
                let h = 1e-3;
                let da = (sys.pump_amplitude(t + h) - sys.pump_amplitude(t - h)) / (2.0 * h);
                let s = ModeState::new(sys.pump_amplitude(t), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                let rhs = model::rhs_rotating_frame(&s, t, &p, &d).unwrap();
                assert!((da - rhs.a1).norm() < 1e-10);
            }
        }
        // and reduces to the adiabatic pump for a constant drive
        let d = DriveModulation::constant(4.5e-4);
        let a = LinearizedSystem::new(&p, &d).unwrap();
        let b = a.with_pump(PumpResponse::Lagged);
        assert!((a.pump_amplitude(3.0) - b.pump_amplitude(3.0)).norm() < 1e-18);
    }

    #[test]
    fn liouville_identity_holds() {
        let p = p_star();
        let d = DriveModulation::modulated(4.5e-4, 0.25, 2.0 * 4.265e-3, PhaseMode::Sin);
        let r = monodromy(&p, &d, &FloquetOptions::default()).unwrap();
        assert!(r.liouville_residual() < 1e-8);
        assert!(r.growth_rate > 0.0);
        assert_relative_eq!(r.decrement(), 2.0 * r.growth_rate);
    }

    #[test]
    fn exponent_imaginary_parts_are_principal() {
        let p = p_star();
        let d = DriveModulation::modulated(4.5e-4, 0.1, 1e-3, PhaseMode::Sin);
        let r = monodromy(&p, &d, &FloquetOptions::default()).unwrap();
        for e in r.exponents {
            assert!(e.im > -PI / r.period && e.im <= PI / r.period);
        }
    }

    #[test]
    fn eigenvalues_2x2_small_root() {
        let m = Matrix2::new(
            Complex64::new(1e8, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1e-9, 0.0),
        );
        let ev = eigenvalues_2x2(&m);
        assert_relative_eq!(ev[0].re, 1e8);
        assert_relative_eq!(ev[1].re, 1e-9, max_relative = 1e-12);
    }

    #[test]
    fn log_decrement_transform() {
        assert_eq!(log_decrement(0.0, 1e-3), 0.0);
        assert_relative_eq!(log_decrement(1e-3, 1e-3), 2f64.ln());
        assert_relative_eq!(log_decrement(-1e-3, 1e-3), -(2f64.ln()));
    }

    #[test]
    fn fit_exact_exponential() {
        let sigma = 3.7e-4;
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 50.0).collect();
        let states = times
            .iter()
            .map(|t| {
                ModeState::new(
                    Complex64::new(0.0, 0.0),
                    Complex64::from_polar((sigma * t).exp(), 0.3 * t),
                    Complex64::new(0.0, 0.0),
                )
            })
            .collect();
        let tr = Trajectory {
            times,
            states,
            params_digest: String::new(),
        };
        let r = fit_envelope_rate(&tr, Observable::A2Sq, (0.0, 1e4), 1e-300).unwrap();
        assert!((r - sigma).abs() < 1e-6 * sigma.abs().max(1.0));
        assert!(matches!(
            fit_envelope_rate(&tr, Observable::BSq, (0.0, 1e4), 1e-300),
            Err(FitError::Underflow { .. })
        ));
        assert!(matches!(
            fit_envelope_rate(&tr, Observable::A2Sq, (1.0, 2.0), 0.0),
            Err(FitError::TooFewSamples { .. })
        ));
    }
}
