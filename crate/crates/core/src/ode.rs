//! Explicit Runge-Kutta steppers for complex state vectors `[Complex64; N]`.
//!
//! Classic RK4 for fixed steps and Dormand-Prince 5(4) with standard
//! step-size control for adaptive integration.

use num_complex::Complex64;
use thiserror::Error;

pub type State<const N: usize> = [Complex64; N];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("exceeded {max_steps} steps at t = {t:e}")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("non-finite state at t = {t:e}")]
    NonFinite { t: f64 },
}

#[inline]
fn axpy<const N: usize>(y: &State<N>, h: f64, terms: &[(f64, &State<N>)]) -> State<N> {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        *o += acc * h;
    }
    out
}

/// One classic fourth-order Runge-Kutta step.
pub fn rk4_step<const N: usize, F>(f: &mut F, t: f64, y: &State<N>, h: f64) -> State<N>
where
    F: FnMut(f64, &State<N>) -> State<N>,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, h, &[(0.5, &k1)]));
    let k3 = f(t + 0.5 * h, &axpy(y, h, &[(0.5, &k2)]));
    let k4 = f(t + h, &axpy(y, h, &[(1.0, &k3)]));
    axpy(y, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)])
}

/// Integrates with fixed RK4 steps of size `dt` from `t0` to `t1`; the last
/// step is shortened to land on `t1`.
pub fn rk4_integrate<const N: usize, F>(
    f: &mut F,
    t0: f64,
    y0: State<N>,
    t1: f64,
    dt: f64,
) -> Result<State<N>, StepError>
where
    F: FnMut(f64, &State<N>) -> State<N>,
{
    let n = ((t1 - t0) / dt).ceil().max(0.0) as usize;
    let mut y = y0;
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        let h = if k + 1 == n { t1 - t } else { dt };
        y = rk4_step(f, t, &y, h);
    }
    if y.iter().all(|z| z.is_finite()) {
        Ok(y)
    } else {
        Err(StepError::NonFinite { t: t1 })
    }
}

// Dormand-Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b_hat
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl AdaptiveConfig {
    pub fn new(rtol: f64, atol: f64) -> Self {
        AdaptiveConfig {
            rtol,
            atol,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

/// Adaptive Dormand-Prince integrator state. Keeps the step-size proposal and
/// the first-same-as-last derivative between calls to [`Dopri5::advance`].
pub struct Dopri5<const N: usize> {
    pub t: f64,
    pub y: State<N>,
    cfg: AdaptiveConfig,
    h: f64,
    k1: Option<State<N>>,
    steps: usize,
}

impl<const N: usize> Dopri5<N> {
    pub fn new(t0: f64, y0: State<N>, cfg: AdaptiveConfig) -> Self {
        Dopri5 {
            t: t0,
            y: y0,
            cfg,
            h: 0.0,
            k1: None,
            steps: 0,
        }
    }

    pub fn accepted_steps(&self) -> usize {
        self.steps
    }

    fn error_norm(&self, y0: &State<N>, y1: &State<N>, err: &State<N>) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let sc = self.cfg.atol + self.cfg.rtol * y0[i].norm().max(y1[i].norm());
            acc += (err[i].norm() / sc).powi(2);
        }
        (acc / N as f64).sqrt()
    }

    fn initial_step<F>(&self, f: &mut F, k1: &State<N>, span: f64) -> f64
    where
        F: FnMut(f64, &State<N>) -> State<N>,
    {
        let scale = |v: &State<N>| -> f64 {
            let mut acc = 0.0;
            for i in 0..N {
                let sc = self.cfg.atol + self.cfg.rtol * self.y[i].norm();
                acc += (v[i].norm() / sc).powi(2);
            }
            (acc / N as f64).sqrt()
        };
        let d0 = scale(&self.y);
        let d1 = scale(k1);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span.abs());
        let y1 = axpy(&self.y, h0, &[(1.0, k1)]);
        let k2 = f(self.t + h0, &y1);
        let mut diff = [Complex64::new(0.0, 0.0); N];
        for i in 0..N {
            diff[i] = k2[i] - k1[i];
        }
        let d2 = scale(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        (100.0 * h0).min(h1).min(self.cfg.h_max).min(span.abs())
    }

    /// Integrates up to exactly `t_end`, calling `on_step(t, y)` after every
    /// accepted step. `on_step` may abort by returning `Err`.
    pub fn advance<F, G, E>(&mut self, f: &mut F, t_end: f64, mut on_step: G) -> Result<(), E>
    where
        F: FnMut(f64, &State<N>) -> State<N>,
        G: FnMut(f64, &State<N>) -> Result<(), E>,
        E: From<StepError>,
    {
        if t_end <= self.t {
            return Ok(());
        }
        let mut k1 = match self.k1 {
            Some(k) => k,
            None => f(self.t, &self.y),
        };
        if self.h <= 0.0 {
            self.h = self.initial_step(f, &k1, t_end - self.t);
        }
        while self.t < t_end {
            if self.steps >= self.cfg.max_steps {
                return Err(StepError::TooManySteps {
                    t: self.t,
                    max_steps: self.cfg.max_steps,
                }
                .into());
            }
            let remaining = t_end - self.t;
            let clipped = self.h.min(self.cfg.h_max) >= remaining;
            let h = if clipped { remaining } else { self.h.min(self.cfg.h_max) };
            if h <= f64::EPSILON * self.t.abs().max(1.0) * 0.5 {
                return Err(StepError::StepSizeUnderflow { t: self.t, h }.into());
            }

            let t = self.t;
            let y = &self.y;
            let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, &k1)]));
            let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(
                t + C5 * h,
                &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                t + h,
                &axpy(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y_new = axpy(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let k7 = f(t + h, &y_new);
            let mut err = [Complex64::new(0.0, 0.0); N];
            for i in 0..N {
                err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6
                    + k7[i] * E7)
                    * h;
            }
            let en = self.error_norm(y, &y_new, &err);
            if !en.is_finite() {
                if y_new.iter().all(|z| z.is_finite()) {
                    self.h = 0.1 * h;
                    continue;
                }
                return Err(StepError::NonFinite { t }.into());
            }
            let factor = if en == 0.0 {
                5.0
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
            };
            if en <= 1.0 {
                self.t = if clipped { t_end } else { t + h };
                self.y = y_new;
                k1 = k7;
                self.steps += 1;
                // a step shortened to hit t_end says nothing about the next one
                if !clipped || factor < 1.0 {
                    self.h = h * factor;
                }
                on_step(self.t, &self.y)?;
            } else {
                self.h = h * factor.min(1.0);
            }
        }
        self.k1 = Some(k1);
        Ok(())
    }
}
