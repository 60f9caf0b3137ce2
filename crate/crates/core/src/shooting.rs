//! Shooting for the figure-eight closed geodesic.
//!
//! Geodesics launched from the equator at angle `φ ∈ (0, φ₀)` return to the
//! equator after time `T_φ` having advanced by `θ_adv(φ)`. The advance tends to
//! `π/R + ηπ > 2π` as `φ → 0` and to `π + 2Lη < 2π` as `φ → φ₀`, so some `φ*`
//! returns after exactly one turn; reflecting that arc through the equator
//! closes it into a figure eight.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{self_intersections, CrossingClass, SelfIntersection};
use crate::error::{Error, Result};
use crate::geodesics::{
    first_equator_return, integrate_finsler_geodesic, GeodesicOptions, GeodesicState, Trajectory, TrajectoryKind,
};
use crate::linearized::ClosedOrbit;
use crate::numerics::{brent, extrapolate_to_zero};
use crate::profile::{PinchFunction, ProfileSurface};
use crate::randers::{make_randers, RandersMetric, Reversibility};

pub use crate::curves::self_intersections as count_self_intersections;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnRow {
    pub phi: f64,
    #[serde(rename = "T_phi")]
    pub t_phi: f64,
    pub theta_adv: f64,
}

/// Surface parameters for a given reversibility and pinching constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingWindow {
    pub r: f64,
    pub delta: f64,
    pub radius: f64,
    pub k_max: f64,
    /// Relative offset from the window edges, `R = q(1 - κ)`, `K_max = (1 + κ)/R²`.
    pub kappa: f64,
}

/// Default relative offset from the window edges.
pub const WINDOW_OFFSET: f64 = 1e-2;

fn check_r_delta(r: f64, delta: f64) -> Result<f64> {
    if !(r.is_finite() && r >= 1.0) {
        return Err(Error::Range {
            what: "r",
            value: r,
            lo: 1.0,
            hi: f64::INFINITY,
        });
    }
    let q = r / (r + 1.0);
    if !(delta > 0.0 && delta < q * q) {
        return Err(Error::Range {
            what: "delta",
            value: delta,
            lo: 0.0,
            hi: q * q,
        });
    }
    Ok(q)
}

impl ShootingWindow {
    /// `R = q(1 - κ)`, `K_max = (1 + κ)/R²` with `q = r/(r + 1)`; `κ` starts
    /// at [`WINDOW_OFFSET`] and is halved until `1/K_max > δ`.
    pub fn select(r: f64, delta: f64) -> Result<Self> {
        let q = check_r_delta(r, delta)?;
        let mut kappa = WINDOW_OFFSET;
        loop {
            let radius = q * (1.0 - kappa);
            let k_max = (1.0 + kappa) / (radius * radius);
            if 1.0 / k_max > delta {
                return Ok(Self {
                    r,
                    delta,
                    radius,
                    k_max,
                    kappa,
                });
            }
            kappa *= 0.5;
            if kappa < 1e-8 {
                return Err(Error::Config(format!(
                    "no pinched surface with 1/K_max > {delta} for r = {r}"
                )));
            }
        }
    }

    /// Explicit surface parameters, validated against the window.
    pub fn with_parameters(r: f64, delta: f64, radius: f64, k_max: f64) -> Result<Self> {
        let q = check_r_delta(r, delta)?;
        if !(radius > 0.0 && radius < q) {
            return Err(Error::Range {
                what: "R",
                value: radius,
                lo: 0.0,
                hi: q,
            });
        }
        if !(k_max * radius * radius > 1.0 && 1.0 / k_max > delta) {
            return Err(Error::Range {
                what: "K_max",
                value: k_max,
                lo: 1.0 / (radius * radius),
                hi: 1.0 / delta,
            });
        }
        Ok(Self {
            r,
            delta,
            radius,
            k_max,
            kappa: 1.0 - radius / q,
        })
    }

    pub fn build(&self, tol: f64) -> Result<RandersMetric> {
        let pinch = PinchFunction::with_auto_smoothing(self.radius, self.k_max)?;
        let surface = Arc::new(ProfileSurface::solve(pinch, tol)?);
        make_randers(surface, self.r)
    }
}

/// Smallest Clairaut constant admitted on the sweep grid near `φ₀`.
pub const MIN_CLAIRAUT: f64 = 5e-3;

fn clairaut_at(metric: &RandersMetric, phi: f64) -> f64 {
    let v = metric.unit_vector_at_angle(phi);
    let radius = metric.surface().radius();
    radius * radius * (v[1] - metric.eta())
}

/// Launch angles accumulating at both ends of `(0, φ₀)`.
pub fn return_grid(metric: &RandersMetric, per_end: usize) -> Vec<f64> {
    let phi0 = metric.critical_angle();
    let per_end = per_end.max(4);
    let logspace = |lo: f64, hi: f64, k: usize| {
        let (a, b) = (lo.ln(), hi.ln());
        a + (b - a) * k as f64 / (per_end - 1) as f64
    };
    let mut grid: Vec<f64> = (0..per_end).map(|k| phi0 * logspace(1e-4, 0.5, k).exp()).collect();
    // Offset from φ₀ at which the Clairaut constant drops to MIN_CLAIRAUT.
    let mut f = |d: f64| clairaut_at(metric, phi0 - d) - MIN_CLAIRAUT;
    let hi = 0.5 * phi0;
    let (f0, f1) = (f(0.0), f(hi));
    let d_min = brent(&mut f, 0.0, hi, f0, f1, 1e-14, 200).unwrap_or(1e-2);
    let d_min = d_min.min(0.25 * phi0);
    grid.extend((0..per_end).map(|k| phi0 - phi0 * logspace(d_min / phi0, 0.5, k).exp()));
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    grid
}

/// Return time and angle for each launch angle.
pub fn sweep_returns(metric: &RandersMetric, grid: &[f64], opts: &GeodesicOptions) -> Result<Vec<ReturnRow>> {
    grid.par_iter()
        .map(|&phi| {
            let r = first_equator_return(metric, phi, opts)?;
            Ok(ReturnRow {
                phi,
                t_phi: r.t_return,
                theta_adv: r.theta_adv,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointLimits {
    pub theta_at_zero: f64,
    pub theta_at_zero_predicted: f64,
    pub time_at_zero: f64,
    pub theta_at_critical: f64,
    pub theta_at_critical_predicted: f64,
    pub time_at_critical: f64,
    pub time_at_critical_predicted: f64,
}

/// Richardson-type extrapolation of the sweep to both ends (in `φ²` near 0,
/// linearly in `φ₀ - φ` near `φ₀`).
pub fn endpoint_limits(metric: &RandersMetric, table: &[ReturnRow]) -> Result<EndpointLimits> {
    if table.len() < 6 {
        return Err(Error::Config("sweep table too short to extrapolate".into()));
    }
    let phi0 = metric.critical_angle();
    let lo = &table[..3];
    let hi = &table[table.len() - 3..];
    let x_lo: Vec<f64> = lo.iter().map(|r| r.phi * r.phi).collect();
    let x_hi: Vec<f64> = hi.iter().map(|r| phi0 - r.phi).collect();
    let pick = |rows: &[ReturnRow], f: fn(&ReturnRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let radius = metric.surface().radius();
    let l = metric.surface().half_length();
    let eta = metric.eta();
    Ok(EndpointLimits {
        theta_at_zero: extrapolate_to_zero(&x_lo, &pick(lo, |r| r.theta_adv)),
        theta_at_zero_predicted: std::f64::consts::PI / radius + eta * std::f64::consts::PI,
        time_at_zero: extrapolate_to_zero(&x_lo, &pick(lo, |r| r.t_phi)),
        theta_at_critical: extrapolate_to_zero(&x_hi, &pick(hi, |r| r.theta_adv)),
        theta_at_critical_predicted: std::f64::consts::PI + 2.0 * l * eta,
        time_at_critical: extrapolate_to_zero(&x_hi, &pick(hi, |r| r.t_phi)),
        time_at_critical_predicted: 2.0 * l,
    })
}

/// Tolerance on `|θ_adv(φ*) - 2π|`.
pub const PHI_STAR_TOL: f64 = 1e-9;

/// Root of `θ_adv(φ) = 2π` inside the first sign change of the table.
pub fn find_phi_star(metric: &RandersMetric, table: &[ReturnRow], opts: &GeodesicOptions) -> Result<(f64, f64)> {
    let tau = std::f64::consts::TAU;
    let (lo, hi) = match (table.first(), table.last()) {
        (Some(a), Some(b)) => (a.phi, b.phi),
        _ => return Err(Error::NoBracket { lo: 0.0, hi: 0.0 }),
    };
    let pair = table
        .windows(2)
        .find(|w| (w[0].theta_adv - tau).signum() != (w[1].theta_adv - tau).signum())
        .ok_or(Error::NoBracket { lo, hi })?;
    let mut f = |phi: f64| {
        first_equator_return(metric, phi, opts)
            .map(|r| r.theta_adv - tau)
            .unwrap_or(f64::NAN)
    };
    let phi = brent(
        &mut f,
        pair[0].phi,
        pair[1].phi,
        pair[0].theta_adv - tau,
        pair[1].theta_adv - tau,
        1e-15,
        200,
    )
    .ok_or(Error::NoBracket { lo, hi })?;
    let ret = first_equator_return(metric, phi, opts)?;
    let residual = ret.theta_adv - tau;
    if residual.abs() >= PHI_STAR_TOL {
        return Err(Error::Consistency(format!(
            "theta_adv(phi*) - 2pi = {residual:e} after root finding"
        )));
    }
    Ok((phi, ret.t_return))
}

/// The figure-eight geodesic and its closure diagnostics.
#[derive(Debug, Clone)]
pub struct ClosedGeodesic {
    /// One period built from the first arc and its reflection.
    pub orbit: ClosedOrbit,
    /// Direct integration over the full period.
    pub direct: Trajectory,
    /// Ambient distance between initial and final position and velocity of
    /// the direct integration.
    pub closure_residual: f64,
    /// Largest coordinate deviation between the reflected and the directly
    /// integrated second arc.
    pub symmetry_residual: f64,
    pub phi_star: f64,
    pub half_period: f64,
}

pub const CLOSURE_TOL: f64 = 1e-6;

/// Extend the arc `c_{φ*}|[0, T*]` by `c(T* + t) = Q c(t)` with
/// `Q(s, θ) = (-s, θ + θ_adv)`, and cross-check against direct integration.
pub fn close_up_figure_eight(metric: &RandersMetric, phi_star: f64, half_period: f64) -> Result<ClosedGeodesic> {
    let n_half = (half_period / 0.004).ceil() as usize;
    let opts = GeodesicOptions {
        // Slightly above the exact spacing so the grid has exactly 2 n_half steps.
        dt: half_period / n_half as f64 * (1.0 + 1e-12),
        ..GeodesicOptions::default()
    };
    let v = metric.unit_vector_at_angle(phi_star);
    let direct = integrate_finsler_geodesic(metric, 0.0, 0.0, v, 2.0 * half_period, &opts)?;
    if direct.pole_truncated || direct.samples.len() != 2 * n_half + 1 {
        return Err(Error::Consistency("figure-eight integration stopped early".into()));
    }
    let first = &direct.samples[..=n_half];
    let shift = first[n_half].theta - first[0].theta;
    let mut samples: Vec<GeodesicState> = first.to_vec();
    let mut accel = direct.accel[..=n_half].to_vec();
    for k in 1..=n_half {
        let st = &first[k];
        samples.push(GeodesicState {
            t: st.t + half_period,
            s: -st.s,
            theta: st.theta + shift,
            sdot: -st.sdot,
            thetadot: st.thetadot,
            clairaut: st.clairaut,
        });
        accel.push([-direct.accel[k][0], direct.accel[k][1]]);
    }
    let mut symmetry_residual: f64 = 0.0;
    for (a, b) in samples.iter().zip(&direct.samples) {
        symmetry_residual = symmetry_residual.max((a.s - b.s).abs()).max((a.theta - b.theta).abs());
    }
    let reflected = Trajectory::new(samples, accel, TrajectoryKind::Reflected, metric.surface().clone());
    let (a, b) = (&direct.samples[0], direct.samples.last().expect("samples"));
    let (pa, pb) = (direct.ambient_point(a), direct.ambient_point(b));
    let (va, vb) = (direct.ambient_velocity(a), direct.ambient_velocity(b));
    let closure_residual = (0..3)
        .map(|i| (pa[i] - pb[i]).powi(2) + (va[i] - vb[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    if closure_residual > CLOSURE_TOL {
        return Err(Error::Closure {
            residual: closure_residual,
            tol: CLOSURE_TOL,
        });
    }
    let orbit = ClosedOrbit::new("figure8", reflected, CLOSURE_TOL)?;
    Ok(ClosedGeodesic {
        orbit,
        direct,
        closure_residual,
        symmetry_residual,
        phi_star,
        half_period,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingReport {
    pub window: ShootingWindow,
    pub smoothing: f64,
    pub eta: f64,
    pub half_length: f64,
    pub phi_critical: f64,
    pub table: Vec<ReturnRow>,
    pub limits: EndpointLimits,
    pub phi_star: f64,
    pub half_period: f64,
    pub closure_residual: f64,
    pub symmetry_residual: f64,
    pub intersections: Vec<SelfIntersection>,
    pub transverse_count: usize,
    /// Curvature range after rescaling by `1/K_max`, over the surface and
    /// along the geodesic.
    pub curvature_scaled: [f64; 2],
    pub reversibility: Reversibility,
    /// `F`-length before normalisation.
    pub length: f64,
    /// `2π(1 + 1/r)/√K_max`.
    pub length_bound: f64,
    pub failures: Vec<String>,
}

impl ShootingReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ShootingOutcome {
    pub report: ShootingReport,
    pub metric: RandersMetric,
    pub geodesic: ClosedGeodesic,
}

/// End-to-end construction and verification for `(r, δ)`.
pub fn verify_figure_eight(window: ShootingWindow, tol: f64) -> Result<ShootingOutcome> {
    let metric = window.build(tol).map_err(|e| e.at("surface"))?;
    let opts = GeodesicOptions::default();
    let grid = return_grid(&metric, 32);
    let table = sweep_returns(&metric, &grid, &opts).map_err(|e| e.at("sweep"))?;
    let limits = endpoint_limits(&metric, &table).map_err(|e| e.at("sweep"))?;
    let (phi_star, half_period) = find_phi_star(&metric, &table, &opts).map_err(|e| e.at("shoot"))?;
    let geodesic = close_up_figure_eight(&metric, phi_star, half_period).map_err(|e| e.at("close"))?;
    let intersections = self_intersections(&geodesic.orbit, 3000);

    let surface = metric.surface();
    let k_max = window.k_max;
    let (k_lo, k_hi) = surface.curvature_range();
    let (mut g_lo, mut g_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for st in &geodesic.orbit.trajectory.samples {
        let k = surface.curvature_unchecked(st.s);
        g_lo = g_lo.min(k);
        g_hi = g_hi.max(k);
    }
    let curvature_scaled = [k_lo.min(g_lo) / k_max, k_hi.max(g_hi) / k_max];
    let reversibility = metric.reversibility();
    let length = geodesic.orbit.length();
    let length_bound = std::f64::consts::TAU * (1.0 + 1.0 / window.r) / k_max.sqrt();
    let transverse_count = intersections
        .iter()
        .filter(|x| x.class == CrossingClass::Transverse)
        .count();

    let mut failures = Vec::new();
    if transverse_count != 1 || intersections.len() != 1 {
        failures.push(format!(
            "expected one transverse double point, found {} ({} transverse)",
            intersections.len(),
            transverse_count
        ));
    }
    if !(curvature_scaled[0] > window.delta && curvature_scaled[1] <= 1.0 + 1e-12) {
        failures.push(format!(
            "scaled curvature range [{}, {}] not inside ({}, 1]",
            curvature_scaled[0], curvature_scaled[1], window.delta
        ));
    }
    if (reversibility.value - window.r).abs() > 1e-6 {
        failures.push(format!("reversibility {} differs from {}", reversibility.value, window.r));
    }
    if length < length_bound {
        failures.push(format!("length {length} below bound {length_bound}"));
    }

    let report = ShootingReport {
        window,
        smoothing: surface.pinch().smoothing(),
        eta: metric.eta(),
        half_length: surface.half_length(),
        phi_critical: metric.critical_angle(),
        table,
        limits,
        phi_star,
        half_period,
        closure_residual: geodesic.closure_residual,
        symmetry_residual: geodesic.symmetry_residual,
        intersections,
        transverse_count,
        curvature_scaled,
        reversibility,
        length,
        length_bound,
        failures,
    };
    Ok(ShootingOutcome {
        report,
        metric,
        geodesic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_selection() {
        let w = ShootingWindow::select(1.0, 0.24).unwrap();
        assert!((w.radius - 0.495).abs() < 1e-15);
        assert!(1.0 / w.k_max > 0.24);
        let tight = ShootingWindow::select(1.0, 0.249).unwrap();
        assert!(tight.kappa < WINDOW_OFFSET && 1.0 / tight.k_max > 0.249);
        assert!(ShootingWindow::select(1.0, 0.25).is_err());
        assert!(ShootingWindow::with_parameters(1.0, 0.24, 0.6, 4.0).is_err());
    }

    #[test]
    fn round_sphere_has_no_bracket() {
        let m = make_randers(Arc::new(ProfileSurface::round(1e-11).unwrap()), 1.0).unwrap();
        let opts = GeodesicOptions::default();
        let grid = return_grid(&m, 8);
        let table = sweep_returns(&m, &grid, &opts).unwrap();
        for row in &table {
            assert!((row.theta_adv - std::f64::consts::PI).abs() < 1e-8);
        }
        assert!(matches!(find_phi_star(&m, &table, &opts), Err(Error::NoBracket { .. })));
    }

    #[test]
    fn return_grid_respects_clairaut_floor() {
        let w = ShootingWindow::select(2.0, 0.43).unwrap();
        let m = w.build(1e-11).unwrap();
        let grid = return_grid(&m, 32);
        assert!(grid.windows(2).all(|p| p[0] < p[1]));
        let last = *grid.last().unwrap();
        assert!(clairaut_at(&m, last) >= MIN_CLAIRAUT * (1.0 - 1e-6));
        assert!(*grid.first().unwrap() > 0.0);
    }
}
