//! Pinched surfaces of revolution.
//!
//! A profile is encoded by a function `g` on `[0, R²]` with `ρ̇² = g(ρ²)`.
//! The pinch function interpolates the slopes `-K_max` near the pole and `-1`
//! near the equator, so the Gaussian curvature `K = -g'(ρ²)` is pinched in
//! `[1, K_max]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cubic_hermite, quintic_hermite, simpson};
use crate::ode::{locate_event, Dopri5, Tolerance};

/// Smoothed version of `h(x) = max(1 - K_max x, R² - x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinchFunction {
    radius: f64,
    k_max: f64,
    smoothing: f64,
    x_star: f64,
    degenerate_cap: bool,
}

fn smoothstep(t: f64) -> f64 {
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

fn smoothstep_integral(t: f64) -> f64 {
    t * t * t * t * (2.5 + t * (-3.0 + t))
}

fn smoothstep_derivative(t: f64) -> f64 {
    30.0 * t * t * (1.0 - t) * (1.0 - t)
}

impl PinchFunction {
    /// Build the pinch function; `smoothing` is the full width of the blend
    /// window centred on the corner `x* = (1 - R²)/(K_max - 1)`.
    pub fn new(radius: f64, k_max: f64, smoothing: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0 && radius <= 1.0) {
            return Err(Error::Range {
                what: "R",
                value: radius,
                lo: 0.0,
                hi: 1.0,
            });
        }
        if !(k_max.is_finite() && smoothing.is_finite() && smoothing >= 0.0) {
            return Err(Error::Config(format!(
                "K_max = {k_max} and smoothing = {smoothing} must be finite, smoothing >= 0"
            )));
        }
        if radius == 1.0 && k_max == 1.0 {
            return Ok(Self {
                radius,
                k_max,
                smoothing: 0.0,
                x_star: 0.0,
                degenerate_cap: true,
            });
        }
        let bound = 1.0 / (radius * radius);
        if k_max <= bound {
            return Err(Error::InfeasiblePinch { k_max, bound });
        }
        if radius == 1.0 {
            return Err(Error::Range {
                what: "R",
                value: radius,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let x_star = (1.0 - radius * radius) / (k_max - 1.0);
        let w = 0.5 * smoothing;
        if x_star - w <= 0.0 || x_star + w >= radius * radius {
            return Err(Error::Config(format!(
                "smoothing width {smoothing} does not fit around the corner x* = {x_star} inside (0, {})",
                radius * radius
            )));
        }
        Ok(Self {
            radius,
            k_max,
            smoothing,
            x_star,
            degenerate_cap: false,
        })
    }

    /// Blend width equal to the shorter of the two linear pieces.
    pub fn auto_smoothing(radius: f64, k_max: f64) -> f64 {
        let x_star = (1.0 - radius * radius) / (k_max - 1.0);
        x_star.min(radius * radius - x_star)
    }

    pub fn with_auto_smoothing(radius: f64, k_max: f64) -> Result<Self> {
        if radius == 1.0 && k_max == 1.0 {
            return Self::new(1.0, 1.0, 0.0);
        }
        if k_max <= 1.0 / (radius * radius) {
            return Err(Error::InfeasiblePinch {
                k_max,
                bound: 1.0 / (radius * radius),
            });
        }
        Self::new(radius, k_max, Self::auto_smoothing(radius, k_max))
    }

    /// The unit round sphere, `g(x) = 1 - x`.
    pub fn round() -> Self {
        Self::new(1.0, 1.0, 0.0).expect("round sphere is valid")
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// Corner of the piecewise linear model.
    pub fn corner(&self) -> f64 {
        self.x_star
    }

    pub fn is_degenerate_cap(&self) -> bool {
        self.degenerate_cap
    }

    /// Domain end `R²`.
    pub fn x_max(&self) -> f64 {
        self.radius * self.radius
    }

    /// The unsmoothed model `h(x)`.
    pub fn piecewise_linear(&self, x: f64) -> f64 {
        if self.degenerate_cap {
            return 1.0 - x;
        }
        (1.0 - self.k_max * x).max(self.x_max() - x)
    }

    fn blend_coordinate(&self, x: f64) -> Option<f64> {
        let w = 0.5 * self.smoothing;
        if self.degenerate_cap || w == 0.0 {
            return None;
        }
        let lo = self.x_star - w;
        if x <= lo || x >= self.x_star + w {
            None
        } else {
            Some((x - lo) / (2.0 * w))
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.blend_coordinate(x) {
            None => self.piecewise_linear(x),
            Some(t) => {
                let w = 0.5 * self.smoothing;
                let k = self.k_max;
                let lo = self.x_star - w;
                1.0 - k * lo + 2.0 * w * (-k * t + (k - 1.0) * smoothstep_integral(t))
            }
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        if self.degenerate_cap {
            return -1.0;
        }
        match self.blend_coordinate(x) {
            Some(t) => -self.k_max + (self.k_max - 1.0) * smoothstep(t),
            None if x < self.x_star => -self.k_max,
            None => -1.0,
        }
    }

    pub fn slope_derivative(&self, x: f64) -> f64 {
        match self.blend_coordinate(x) {
            Some(t) => (self.k_max - 1.0) * smoothstep_derivative(t) / self.smoothing,
            None => 0.0,
        }
    }
}

/// Sampled solution of `ρ̈ = g'(ρ²) ρ`, `ρ(0) = R`, `ρ̇(0) = 0`, on `[0, L]`.
#[derive(Debug, Clone)]
pub struct ProfileSurface {
    pinch: PinchFunction,
    half_length: f64,
    step: f64,
    rho: Vec<f64>,
    rho_dot: Vec<f64>,
    height: Vec<f64>,
    tol: f64,
    first_integral_residual: f64,
}

/// Nodes on `[0, L]` used for the stored profile.
pub const PROFILE_INTERVALS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub s: f64,
    pub rho: f64,
    pub rhodot: f64,
    #[serde(rename = "K")]
    pub k: f64,
}

impl ProfileSurface {
    /// Integrate the profile and sample it. `tol` is the integrator tolerance.
    pub fn solve(pinch: PinchFunction, tol: f64) -> Result<Self> {
        if !(tol.is_finite() && tol > 0.0 && tol < 1e-3) {
            return Err(Error::Range {
                what: "tol",
                value: tol,
                lo: 0.0,
                hi: 1e-3,
            });
        }
        let x_max = pinch.x_max();
        let mut rhs = |_s: f64, y: &[f64; 3]| {
            let x = (y[0] * y[0]).clamp(0.0, x_max);
            let lift = (1.0 - pinch.value(x)).max(0.0).sqrt();
            [y[1], pinch.slope(x) * y[0], lift]
        };
        let ode_tol = Tolerance::new(tol, tol * 1e-2);
        let y0 = [pinch.radius(), 0.0, 0.0];

        // First pass: locate the pole.
        let mut ode = Dopri5::new(0.0, y0, ode_tol).with_h_max(0.02);
        let limit = 4.0 * std::f64::consts::PI;
        while ode.y[0] > 0.0 {
            ode.step(&mut rhs, limit)?;
            if ode.t >= limit {
                return Err(Error::Consistency(
                    "profile never reaches the pole".into(),
                ));
            }
        }
        let (half_length, _) = locate_event(&mut rhs, &ode, |_, y| y[0], 1e-15);

        // Second pass: sample on the uniform grid.
        let n = PROFILE_INTERVALS;
        let step = half_length / n as f64;
        let mut rho = Vec::with_capacity(n + 1);
        let mut rho_dot = Vec::with_capacity(n + 1);
        let mut height = Vec::with_capacity(n + 1);
        let mut ode = Dopri5::new(0.0, y0, ode_tol).with_h_max(0.02);
        for i in 0..=n {
            let s = if i == n { half_length } else { i as f64 * step };
            ode.advance_to(&mut rhs, s)?;
            rho.push(if i == n { 0.0 } else { ode.y[0] });
            rho_dot.push(ode.y[1]);
            height.push(ode.y[2]);
        }
        let first_integral_residual = rho
            .iter()
            .zip(&rho_dot)
            .map(|(r, d)| (d * d - pinch.value(r * r)).abs())
            .fold(0.0, f64::max);
        Ok(Self {
            pinch,
            half_length,
            step,
            rho,
            rho_dot,
            height,
            tol,
            first_integral_residual,
        })
    }

    /// The unit round sphere.
    pub fn round(tol: f64) -> Result<Self> {
        Self::solve(PinchFunction::round(), tol)
    }

    pub fn pinch(&self) -> &PinchFunction {
        &self.pinch
    }

    /// Meridian half-length `L`: the distance from the equator to a pole.
    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn radius(&self) -> f64 {
        self.pinch.radius()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Largest deviation of `ρ̇² - g(ρ²)` over the stored nodes.
    pub fn first_integral_residual(&self) -> f64 {
        self.first_integral_residual
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let a = s.abs().min(self.half_length);
        let n = self.rho.len() - 1;
        let i = ((a / self.step) as usize).min(n - 1);
        (i, (a - i as f64 * self.step) / self.step)
    }

    fn node(&self, i: usize) -> [f64; 3] {
        let r = self.rho[i];
        [r, self.rho_dot[i], self.pinch.slope(r * r) * r]
    }

    /// `(ρ, ρ̇, ρ̈)` at `s`; `|s|` is clamped to `L`.
    pub fn eval(&self, s: f64) -> [f64; 3] {
        let (i, u) = self.locate(s);
        let v = quintic_hermite(self.step, self.node(i), self.node(i + 1), u);
        if s < 0.0 {
            [v[0], -v[1], v[2]]
        } else {
            v
        }
    }

    pub fn rho(&self, s: f64) -> f64 {
        self.eval(s)[0]
    }

    pub fn rho_dot(&self, s: f64) -> f64 {
        self.eval(s)[1]
    }

    /// Height of the embedded profile above the equatorial plane.
    pub fn height(&self, s: f64) -> f64 {
        let (i, u) = self.locate(s);
        let lift = |j: usize| {
            let r = self.rho[j];
            (1.0 - self.pinch.value(r * r)).max(0.0).sqrt()
        };
        let v = cubic_hermite(
            self.step,
            [self.height[i], lift(i)],
            [self.height[i + 1], lift(i + 1)],
            u,
        )[0];
        if s < 0.0 {
            -v
        } else {
            v
        }
    }

    /// `dz/ds`.
    pub fn height_dot(&self, s: f64) -> f64 {
        let r = self.rho(s);
        (1.0 - self.pinch.value(r * r)).max(0.0).sqrt()
    }

    fn check_range(&self, s: f64) -> Result<()> {
        if !s.is_finite() || s.abs() > self.half_length * (1.0 + 1e-12) {
            return Err(Error::Range {
                what: "s",
                value: s,
                lo: -self.half_length,
                hi: self.half_length,
            });
        }
        Ok(())
    }

    /// Gaussian curvature `K(s) = -g'(ρ(s)²)`.
    pub fn gaussian_curvature(&self, s: f64) -> Result<f64> {
        self.check_range(s)?;
        Ok(self.curvature_unchecked(s))
    }

    pub(crate) fn curvature_unchecked(&self, s: f64) -> f64 {
        let r = self.rho(s);
        -self.pinch.slope(r * r)
    }

    /// Point in `R³` for surface coordinates `(s, θ)`.
    pub fn embed(&self, s: f64, theta: f64) -> [f64; 3] {
        let r = self.rho(s);
        [r * theta.cos(), r * theta.sin(), self.height(s)]
    }

    /// Ambient velocity of a curve with state `(s, θ, ṡ, θ̇)`.
    pub fn embed_velocity(&self, s: f64, theta: f64, sdot: f64, thetadot: f64) -> [f64; 3] {
        let [r, rd, _] = self.eval(s);
        let (sn, cs) = theta.sin_cos();
        [
            rd * sdot * cs - r * thetadot * sn,
            rd * sdot * sn + r * thetadot * cs,
            self.height_dot(s) * sdot,
        ]
    }

    /// Stored nodes mirrored to `[-L, L]`.
    pub fn samples(&self) -> Vec<SurfaceSample> {
        let n = self.rho.len() - 1;
        let mut out = Vec::with_capacity(2 * n + 1);
        for i in (1..=n).rev() {
            let r = self.rho[i];
            out.push(SurfaceSample {
                s: -(self.node_s(i)),
                rho: r,
                rhodot: -self.rho_dot[i],
                k: -self.pinch.slope(r * r),
            });
        }
        for i in 0..=n {
            let r = self.rho[i];
            out.push(SurfaceSample {
                s: self.node_s(i),
                rho: r,
                rhodot: self.rho_dot[i],
                k: -self.pinch.slope(r * r),
            });
        }
        out
    }

    fn node_s(&self, i: usize) -> f64 {
        if i == self.rho.len() - 1 {
            self.half_length
        } else {
            i as f64 * self.step
        }
    }

    /// Left side minus right side of `1 - R² = ∫₀ᴸ (K - 1)(-2ρρ̇) ds`.
    pub fn quadrature_identity_residual(&self) -> f64 {
        let ys: Vec<f64> = (0..self.rho.len())
            .map(|i| {
                let r = self.rho[i];
                (-self.pinch.slope(r * r) - 1.0) * (-2.0 * r * self.rho_dot[i])
            })
            .collect();
        let r2 = self.radius() * self.radius();
        1.0 - r2 - simpson(&ys, self.step)
    }

    /// Smallest and largest curvature over the stored nodes.
    pub fn curvature_range(&self) -> (f64, f64) {
        self.rho.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            let k = -self.pinch.slope(r * r);
            (lo.min(k), hi.max(k))
        })
    }
}

/// Whether the meridian length satisfies `2L < b π R`.
///
/// The comparison keeps a margin of `1e-9` so that equality within rounding
/// counts as a failure.
pub fn meridian_return_bound(radius: f64, k_max: f64, b: f64) -> Result<bool> {
    let surface = ProfileSurface::solve(PinchFunction::with_auto_smoothing(radius, k_max)?, 1e-11)?;
    Ok(2.0 * surface.half_length() < b * std::f64::consts::PI * radius - 1e-9)
}
