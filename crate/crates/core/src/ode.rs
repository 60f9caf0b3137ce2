//! Adaptive Dormand–Prince 5(4) integrator over fixed-size states.
//!
//! Steps never overshoot the requested end time, so callers that need
//! samples on a grid simply advance grid point by grid point. Event times are
//! refined by re-stepping from the last accepted state (see [`locate_event`]),
//! which keeps the located state at full fifth-order accuracy instead of
//! relying on a dense-output polynomial.

use thiserror::Error;

use crate::numerics::brent;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerance {
    pub const fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol }
    }

    /// Same relative and absolute tolerance.
    pub const fn uniform(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-11, 1e-13)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

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

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combo<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        let hc = h * c;
        for i in 0..N {
            out[i] += hc * k[i];
        }
    }
    out
}

/// One Dormand–Prince step; returns the fifth-order solution, the embedded
/// error estimate and the derivative at the new point.
fn dp_step<const N: usize, F>(
    f: &mut F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
) -> ([f64; N], [f64; N], [f64; N])
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k2 = f(t + C2 * h, &combo(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &combo(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &combo(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(
        t + C5 * h,
        &combo(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = f(
        t + h,
        &combo(
            y,
            h,
            &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ),
    );
    let y5 = combo(
        y,
        h,
        &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
    );
    let k7 = f(t + h, &y5);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y5, err, k7)
}

/// A single untimed fifth-order step of length `h` from `(t, y)`.
pub fn jump<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    if h == 0.0 {
        return *y;
    }
    let k1 = f(t, y);
    dp_step(f, t, y, &k1, h).0
}

#[derive(Debug, Clone)]
pub struct Dopri5<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub tol: Tolerance,
    pub h_max: f64,
    pub max_steps: usize,
    pub stats: Stats,
    h: f64,
    /// Start of the last accepted step, kept for event refinement.
    pub t_prev: f64,
    pub y_prev: [f64; N],
}

impl<const N: usize> Dopri5<N> {
    pub fn new(t0: f64, y0: [f64; N], tol: Tolerance) -> Self {
        Self {
            t: t0,
            y: y0,
            tol,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
            stats: Stats::default(),
            h: 0.0,
            t_prev: t0,
            y_prev: y0,
        }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    /// Replace the state, e.g. after projecting back onto a constraint.
    pub fn set_state(&mut self, y: [f64; N]) {
        self.y = y;
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.tol.atol + self.tol.rtol * a.abs().max(b.abs())
    }

    fn initial_step<F>(&mut self, f: &mut F, f0: &[f64; N], dir: f64) -> f64
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let rms = |v: &[f64; N], s: &dyn Fn(usize) -> f64| -> f64 {
            (v.iter()
                .enumerate()
                .map(|(i, x)| (x / s(i)).powi(2))
                .sum::<f64>()
                / N as f64)
                .sqrt()
        };
        let (tol, y0) = (self.tol, self.y);
        let sc = |i: usize| tol.atol + tol.rtol * y0[i].abs();
        let d0 = rms(&self.y, &sc);
        let d1 = rms(f0, &sc);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(self.h_max);
        let y1 = combo(&self.y, dir * h0, &[(1.0, f0)]);
        let f1 = f(self.t + dir * h0, &y1);
        self.stats.rhs_evals += 1;
        let mut diff = [0.0; N];
        for i in 0..N {
            diff[i] = f1[i] - f0[i];
        }
        let d2 = rms(&diff, &sc) / h0;
        let m = d1.max(d2);
        let h1 = if m <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / m).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.h_max)
    }

    /// Take one accepted step towards `t_end` without passing it.
    pub fn step<F>(&mut self, f: &mut F, t_end: f64) -> Result<(), OdeError>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let span = t_end - self.t;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        let k1 = f(self.t, &self.y);
        self.stats.rhs_evals += 1;
        if self.h == 0.0 {
            self.h = self.initial_step(f, &k1, dir);
        }
        let mut first_try = true;
        loop {
            if self.stats.accepted + self.stats.rejected >= self.max_steps {
                return Err(OdeError::TooManySteps {
                    t: self.t,
                    max_steps: self.max_steps,
                });
            }
            let mut h = self.h.min(self.h_max);
            let mut last = false;
            if h >= span.abs() * (1.0 - 1e-12) {
                h = span.abs();
                last = true;
            }
            if h < 1e-14 * self.t.abs().max(1.0) {
                return Err(OdeError::StepUnderflow { t: self.t, h });
            }
            let (y5, err, _) = dp_step(f, self.t, &self.y, &k1, dir * h);
            self.stats.rhs_evals += 6;
            let mut acc = 0.0;
            for i in 0..N {
                let e = err[i] / self.scale(self.y[i], y5[i]);
                acc += e * e;
            }
            let en = (acc / N as f64).sqrt();
            if !en.is_finite() || y5.iter().any(|v| !v.is_finite()) {
                self.stats.rejected += 1;
                self.h = 0.2 * h;
                first_try = false;
                if self.h < 1e-14 * self.t.abs().max(1.0) {
                    return Err(OdeError::NonFinite { t: self.t });
                }
                continue;
            }
            if en <= 1.0 {
                let mut fac = if en == 0.0 { 5.0 } else { 0.9 * en.powf(-0.2) };
                fac = fac.clamp(0.2, 5.0);
                if !first_try {
                    fac = fac.min(1.0);
                }
                self.t_prev = self.t;
                self.y_prev = self.y;
                self.t = if last { t_end } else { self.t + dir * h };
                self.y = y5;
                self.stats.accepted += 1;
                // Keep the controller's proposal even when the step was clipped.
                if !last || fac < 1.0 {
                    self.h = h * fac;
                }
                return Ok(());
            }
            self.stats.rejected += 1;
            first_try = false;
            self.h = h * (0.9 * en.powf(-0.2)).clamp(0.2, 1.0);
        }
    }

    /// Advance exactly to `t_end`.
    pub fn advance_to<F>(&mut self, f: &mut F, t_end: f64) -> Result<(), OdeError>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        while self.t != t_end {
            self.step(f, t_end)?;
        }
        Ok(())
    }
}

/// Refine a sign change of `g` inside the last accepted step of `ode`.
///
/// Returns the event time and the state there; `tol_t` bounds the error in
/// time. The state is obtained by a single fifth-order step from the start of
/// the accepted step.
pub fn locate_event<const N: usize, F, G>(
    f: &mut F,
    ode: &Dopri5<N>,
    g: G,
    tol_t: f64,
) -> (f64, [f64; N])
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    G: Fn(f64, &[f64; N]) -> f64,
{
    let t0 = ode.t_prev;
    let y0 = ode.y_prev;
    let h = ode.t - t0;
    let g0 = g(t0, &y0);
    let g1 = g(ode.t, &ode.y);
    if g0 == 0.0 {
        return (t0, y0);
    }
    if g1 == 0.0 {
        return (ode.t, ode.y);
    }
    let mut eval = |tau: f64| {
        let y = jump(f, t0, &y0, tau);
        g(t0 + tau, &y)
    };
    let tau = brent(&mut eval, 0.0, h, g0, g1, tol_t, 100).unwrap_or(h);
    let y = jump(f, t0, &y0, tau);
    (t0 + tau, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_full_period() {
        let mut f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut ode = Dopri5::new(0.0, [1.0, 0.0], Tolerance::new(1e-12, 1e-14));
        ode.advance_to(&mut f, 2.0 * std::f64::consts::PI).unwrap();
        assert!((ode.y[0] - 1.0).abs() < 1e-10, "{:?}", ode.y);
        assert!(ode.y[1].abs() < 1e-10);
    }

    #[test]
    fn exponential_growth_and_backwards() {
        let mut f = |_t: f64, y: &[f64; 1]| [y[0]];
        let mut ode = Dopri5::new(0.0, [1.0], Tolerance::new(1e-12, 1e-14));
        ode.advance_to(&mut f, 3.0).unwrap();
        assert!((ode.y[0] - 3f64.exp()).abs() < 1e-10 * 3f64.exp());
        ode.advance_to(&mut f, 0.0).unwrap();
        assert!((ode.y[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn event_located_at_quarter_period() {
        let mut f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut ode = Dopri5::new(0.0, [1.0, 0.0], Tolerance::new(1e-12, 1e-14));
        loop {
            ode.step(&mut f, 10.0).unwrap();
            if ode.y[0] < 0.0 {
                break;
            }
        }
        let (t, y) = locate_event(&mut f, &ode, |_, y| y[0], 1e-13);
        assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
        assert!(y[0].abs() < 1e-10);
    }

    #[test]
    fn step_budget_is_enforced() {
        let mut f = |_t: f64, y: &[f64; 1]| [y[0]];
        let mut ode = Dopri5::new(0.0, [1.0], Tolerance::default()).with_max_steps(3);
        assert!(matches!(
            ode.advance_to(&mut f, 100.0),
            Err(OdeError::TooManySteps { .. })
        ));
    }
}
