//! Randers metrics from Zermelo navigation on a profile surface.
//!
//! The background metric is `h = ds² + ρ(s)² dθ²` and the wind is the
//! rotational Killing field `X = η ∂θ`. A tangent vector `v` has `F(v) = 1`
//! exactly when `|v - X|_h = 1`. In coordinates `F = α + β` with
//! `ε = 1 - η²ρ²`, `a_ss = 1/ε`, `a_θθ = ρ²/ε²`, `b_θ = -ηρ²/ε`.
//!
//! Vectors are `[v_s, v_θ]` in coordinate components.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::golden_max;
use crate::profile::ProfileSurface;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

#[derive(Debug, Clone)]
pub struct RandersMetric {
    surface: Arc<ProfileSurface>,
    eta: f64,
    r_target: f64,
}

/// Output of the reversibility search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reversibility {
    /// `sup F(-v)` over `F(v) = 1`.
    pub value: f64,
    /// `(1 + ηR)/(1 - ηR)`.
    pub predicted: f64,
    /// Meridian coordinate of the maximiser.
    pub s: f64,
    /// Maximising unit vector `v` (so `F(-v)` is the reported value).
    pub direction: Vec2,
}

/// Wind strength reaching reversibility `r` on a surface with equator radius `R`.
pub fn eta_for_reversibility(r: f64, radius: f64) -> f64 {
    (r - 1.0) / ((r + 1.0) * radius)
}

/// Build the navigation metric with reversibility `r`.
pub fn make_randers(surface: Arc<ProfileSurface>, r: f64) -> Result<RandersMetric> {
    if !(r.is_finite() && r >= 1.0) {
        return Err(Error::Range {
            what: "r",
            value: r,
            lo: 1.0,
            hi: f64::INFINITY,
        });
    }
    let eta = eta_for_reversibility(r, surface.radius());
    Ok(RandersMetric {
        surface,
        eta,
        r_target: r,
    })
}

impl RandersMetric {
    /// Metric with an explicit wind strength; requires `|η| R < 1`.
    pub fn with_eta(surface: Arc<ProfileSurface>, eta: f64) -> Result<Self> {
        let a = eta.abs() * surface.radius();
        if !(eta.is_finite() && a < 1.0) {
            return Err(Error::Range {
                what: "eta * R",
                value: a,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(Self {
            surface,
            eta,
            r_target: (1.0 + a) / (1.0 - a),
        })
    }

    pub fn surface(&self) -> &Arc<ProfileSurface> {
        &self.surface
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Reversibility the metric was built for.
    pub fn r_target(&self) -> f64 {
        self.r_target
    }

    /// Wind speed at the equator, `ηR`.
    pub fn equator_wind(&self) -> f64 {
        self.eta * self.surface.radius()
    }

    pub fn wind(&self) -> Vec2 {
        [0.0, self.eta]
    }

    /// `(a_ss, a_θθ, b_θ)` at `s`.
    pub fn coefficients(&self, s: f64) -> (f64, f64, f64) {
        let rho = self.surface.rho(s);
        coefficients_at(rho, self.eta)
    }

    /// `F(v)` at meridian coordinate `s`.
    pub fn norm(&self, s: f64, v: Vec2) -> f64 {
        norm_at(self.surface.rho(s), self.eta, v)
    }

    /// `F(v)` from the navigation equation `ε F² + B F + C = 0`.
    pub fn norm_dual(&self, s: f64, v: Vec2) -> f64 {
        let rho = self.surface.rho(s);
        let eps = 1.0 - self.eta * self.eta * rho * rho;
        let b = 2.0 * self.eta * rho * rho * v[1];
        let c = -(v[0] * v[0] + rho * rho * v[1] * v[1]);
        let disc = (b * b - 4.0 * eps * c).max(0.0);
        // Stable positive root.
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        if q == 0.0 {
            return 0.0;
        }
        let r1 = q / eps;
        let r2 = c / q;
        r1.max(r2)
    }

    /// Half Hessian of `F²` in `v` by central differences.
    pub fn fundamental_tensor(&self, s: f64, v: Vec2) -> Result<Mat2> {
        let rho = self.surface.rho(s);
        let scale = (v[0] * v[0] + rho * rho * v[1] * v[1]).sqrt();
        if scale == 0.0 {
            return Err(Error::Degenerate("fundamental tensor at the zero vector".into()));
        }
        let f2 = |w: Vec2| norm_at(rho, self.eta, w).powi(2);
        let d = [1e-4 * scale, 1e-4 * scale / rho.max(1e-12)];
        let mut g = [[0.0; 2]; 2];
        for i in 0..2 {
            let mut p = v;
            let mut m = v;
            p[i] += d[i];
            m[i] -= d[i];
            g[i][i] = 0.5 * (f2(p) - 2.0 * f2(v) + f2(m)) / (d[i] * d[i]);
        }
        let at = |a: f64, b: f64| f2([v[0] + a * d[0], v[1] + b * d[1]]);
        let off = 0.5 * (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0))
            / (4.0 * d[0] * d[1]);
        g[0][1] = off;
        g[1][0] = off;
        check_positive(&g)?;
        Ok(g)
    }

    /// Closed-form fundamental tensor of the Randers norm.
    pub fn fundamental_tensor_exact(&self, s: f64, v: Vec2) -> Mat2 {
        tensor_at(self.surface.rho(s), self.eta, v)
    }

    /// `g_v(a, b)`.
    pub fn inner(&self, s: f64, v: Vec2, a: Vec2, b: Vec2) -> f64 {
        let g = self.fundamental_tensor_exact(s, v);
        quad(&g, a, b)
    }

    /// Positively oriented `g_v`-unit vector `g_v`-orthogonal to `v`.
    ///
    /// The orientation is the one for which `(∂θ, ∂s)` is positive, i.e.
    /// outward normal on the embedded surface.
    pub fn perp(&self, s: f64, v: Vec2) -> Vec2 {
        let g = self.fundamental_tensor_exact(s, v);
        let u = [g[0][0] * v[0] + g[0][1] * v[1], g[1][0] * v[0] + g[1][1] * v[1]];
        let mut w = [u[1], -u[0]];
        let n = quad(&g, w, w).sqrt();
        w = [w[0] / n, w[1] / n];
        if v[1] * w[0] - v[0] * w[1] < 0.0 {
            w = [-w[0], -w[1]];
        }
        w
    }

    /// Rescale `v` to unit `F`-length.
    pub fn normalize(&self, s: f64, v: Vec2) -> Vec2 {
        let f = self.norm(s, v);
        [v[0] / f, v[1] / f]
    }

    /// Unit vector at the equator making angle `φ` with `∂θ` (towards `∂s`).
    pub fn unit_vector_at_angle(&self, phi: f64) -> Vec2 {
        let a = self.equator_wind();
        let radius = self.surface.radius();
        let (sn, cs) = phi.sin_cos();
        let lambda = a * cs + (a * a * cs * cs + 1.0 - a * a).sqrt();
        [lambda * sn, lambda * cs / radius]
    }

    /// Angle at which `v_φ - X` points along the meridian.
    pub fn critical_angle(&self) -> f64 {
        let a = self.equator_wind();
        if a == 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            (1.0 / a).atan()
        }
    }

    /// Predicted reversibility `(1 + ηR)/(1 - ηR)`.
    pub fn predicted_reversibility(&self) -> f64 {
        let a = self.equator_wind().abs();
        (1.0 + a) / (1.0 - a)
    }

    /// `sup { F(-v) : F(v) = 1 }` by grid search followed by golden-section
    /// refinement in direction and position.
    pub fn reversibility(&self) -> Reversibility {
        let l = self.surface.half_length();
        let n_s = 257;
        let n_dir = 256;
        let s_max = 0.999 * l;
        let ratio = |s: f64, psi: f64| {
            let rho = self.surface.rho(s);
            let u = [psi.cos(), psi.sin() / rho];
            norm_at(rho, self.eta, [-u[0], -u[1]]) / norm_at(rho, self.eta, u)
        };
        let ds = 2.0 * s_max / (n_s - 1) as f64;
        let dpsi = std::f64::consts::TAU / n_dir as f64;
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..n_s {
            let s = -s_max + i as f64 * ds;
            for j in 0..n_dir {
                let psi = j as f64 * dpsi;
                let r = ratio(s, psi);
                if r > best.0 {
                    best = (r, s, psi);
                }
            }
        }
        let (_, mut s, mut psi) = best;
        for _ in 0..3 {
            psi = golden_max(&mut |p| ratio(s, p), psi - dpsi, psi + dpsi, 1e-12).0;
            let lo = (s - ds).max(-s_max);
            let hi = (s + ds).min(s_max);
            s = golden_max(&mut |x| ratio(x, psi), lo, hi, 1e-12).0;
        }
        let value = ratio(s, psi);
        let rho = self.surface.rho(s);
        let u = [psi.cos(), psi.sin() / rho];
        let f = norm_at(rho, self.eta, u);
        Reversibility {
            value,
            predicted: self.predicted_reversibility(),
            s,
            direction: [u[0] / f, u[1] / f],
        }
    }
}

pub(crate) fn coefficients_at(rho: f64, eta: f64) -> (f64, f64, f64) {
    let r2 = rho * rho;
    let eps = 1.0 - eta * eta * r2;
    (1.0 / eps, r2 / (eps * eps), -eta * r2 / eps)
}

pub(crate) fn norm_at(rho: f64, eta: f64, v: Vec2) -> f64 {
    let (ass, att, bt) = coefficients_at(rho, eta);
    (ass * v[0] * v[0] + att * v[1] * v[1]).sqrt() + bt * v[1]
}

pub(crate) fn tensor_at(rho: f64, eta: f64, v: Vec2) -> Mat2 {
    let (ass, att, bt) = coefficients_at(rho, eta);
    let alpha = (ass * v[0] * v[0] + att * v[1] * v[1]).sqrt();
    let f = alpha + bt * v[1];
    let l = [ass * v[0] / alpha, att * v[1] / alpha];
    let fy = [l[0], l[1] + bt];
    let a = [[ass, 0.0], [0.0, att]];
    let mut g = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            g[i][j] = fy[i] * fy[j] + f / alpha * (a[i][j] - l[i] * l[j]);
        }
    }
    g
}

pub(crate) fn quad(g: &Mat2, a: Vec2, b: Vec2) -> f64 {
    a[0] * (g[0][0] * b[0] + g[0][1] * b[1]) + a[1] * (g[1][0] * b[0] + g[1][1] * b[1])
}

pub(crate) fn inverse(g: &Mat2) -> Mat2 {
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    [
        [g[1][1] / det, -g[0][1] / det],
        [-g[1][0] / det, g[0][0] / det],
    ]
}

fn check_positive(g: &Mat2) -> Result<()> {
    let tr = g[0][0] + g[1][1];
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    let min_eig = 0.5 * tr - disc;
    if min_eig <= 1e-10 * tr.abs().max(1.0) {
        return Err(Error::ConvexityViolation { min_eig });
    }
    Ok(())
}
