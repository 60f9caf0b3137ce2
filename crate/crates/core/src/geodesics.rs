//! Geodesics of the background metric and of the navigation metric.
//!
//! Because the wind is a Killing field, the Finsler geodesic with initial
//! velocity `v` is `c(t) = R_t γ₀(t)` where `R_t` rotates by `ηt` and `γ₀` is
//! the `h`-geodesic with initial velocity `v - X`. The direct spray integration
//! is kept as an independent oracle.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{differentiate_uniform, quintic_hermite};
use crate::ode::{locate_event, Dopri5, Stats, Tolerance};
use crate::profile::ProfileSurface;
use crate::randers::{inverse, tensor_at, RandersMetric, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub t: f64,
    pub s: f64,
    pub theta: f64,
    pub sdot: f64,
    pub thetadot: f64,
    /// `ρ² θ̇` of the underlying `h`-geodesic.
    pub clairaut: f64,
}

impl GeodesicState {
    pub fn position(&self) -> Vec2 {
        [self.s, self.theta]
    }

    pub fn velocity(&self) -> Vec2 {
        [self.sdot, self.thetadot]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryKind {
    Riemannian,
    Finsler,
    SprayOracle,
    Reflected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicOptions {
    pub tol: Tolerance,
    /// Nominal sample spacing; the actual spacing divides the horizon evenly.
    pub dt: f64,
    /// Integration halts once `|s| > L - pole_margin`.
    pub pole_margin: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            tol: Tolerance::new(1e-12, 1e-14),
            dt: 0.01,
            pole_margin: 1e-3,
        }
    }
}

/// Uniformly sampled geodesic with accelerations for Hermite interpolation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<GeodesicState>,
    pub accel: Vec<Vec2>,
    pub kind: TrajectoryKind,
    pub pole_truncated: bool,
    pub stats: Stats,
    surface: Arc<ProfileSurface>,
}

impl Trajectory {
    pub(crate) fn new(
        samples: Vec<GeodesicState>,
        accel: Vec<Vec2>,
        kind: TrajectoryKind,
        surface: Arc<ProfileSurface>,
    ) -> Self {
        Self {
            samples,
            accel,
            kind,
            pole_truncated: false,
            stats: Stats::default(),
            surface,
        }
    }

    pub fn surface(&self) -> &Arc<ProfileSurface> {
        &self.surface
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t) - self.samples.first().map_or(0.0, |s| s.t)
    }

    pub fn sample_spacing(&self) -> f64 {
        self.samples[1].t - self.samples[0].t
    }

    /// Interpolated state at time `t` inside the sampled range.
    pub fn state_at(&self, t: f64) -> GeodesicState {
        let n = self.samples.len();
        let t0 = self.samples[0].t;
        let dt = self.sample_spacing();
        let i = (((t - t0) / dt).floor().max(0.0) as usize).min(n - 2);
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let h = b.t - a.t;
        let u = (t - a.t) / h;
        let s = quintic_hermite(h, [a.s, a.sdot, self.accel[i][0]], [b.s, b.sdot, self.accel[i + 1][0]], u);
        let th = quintic_hermite(
            h,
            [a.theta, a.thetadot, self.accel[i][1]],
            [b.theta, b.thetadot, self.accel[i + 1][1]],
            u,
        );
        GeodesicState {
            t,
            s: s[0],
            theta: th[0],
            sdot: s[1],
            thetadot: th[1],
            clairaut: a.clairaut + u * (b.clairaut - a.clairaut),
        }
    }

    pub fn ambient_point(&self, st: &GeodesicState) -> [f64; 3] {
        self.surface.embed(st.s, st.theta)
    }

    pub fn ambient_velocity(&self, st: &GeodesicState) -> [f64; 3] {
        self.surface.embed_velocity(st.s, st.theta, st.sdot, st.thetadot)
    }

    /// Rows `t,s,theta,sdot,thetadot,x,y,z`.
    pub fn rows(&self) -> Vec<[f64; 8]> {
        self.samples
            .iter()
            .map(|st| {
                let p = self.ambient_point(st);
                [st.t, st.s, st.theta, st.sdot, st.thetadot, p[0], p[1], p[2]]
            })
            .collect()
    }
}

pub(crate) fn h_rhs(surface: &ProfileSurface, y: &[f64; 4]) -> [f64; 4] {
    let [rho, rho_dot, _] = surface.eval(y[0]);
    [
        y[2],
        y[3],
        rho * rho_dot * y[3] * y[3],
        -2.0 * rho_dot / rho * y[2] * y[3],
    ]
}

struct RawRun {
    times: Vec<f64>,
    states: Vec<[f64; 4]>,
    truncated: bool,
    stats: Stats,
}

fn uniform_grid(horizon: f64, dt: f64) -> (usize, f64) {
    let n = ((horizon / dt).ceil() as usize).max(4);
    (n, horizon / n as f64)
}

fn run_uniform<F>(
    mut rhs: F,
    y0: [f64; 4],
    horizon: f64,
    opts: &GeodesicOptions,
    pole_limit: f64,
) -> Result<RawRun>
where
    F: FnMut(f64, &[f64; 4]) -> [f64; 4],
{
    let (n, dt) = uniform_grid(horizon, opts.dt);
    let mut ode = Dopri5::new(0.0, y0, opts.tol).with_h_max(0.05);
    let mut times = vec![0.0];
    let mut states = vec![y0];
    let mut truncated = false;
    'outer: for k in 1..=n {
        let tk = if k == n { horizon } else { k as f64 * dt };
        while ode.t < tk {
            ode.step(&mut rhs, tk)?;
            if ode.y[0].abs() > pole_limit {
                truncated = true;
                break 'outer;
            }
        }
        times.push(tk);
        states.push(ode.y);
    }
    Ok(RawRun {
        times,
        states,
        truncated,
        stats: ode.stats,
    })
}

fn check_base(surface: &ProfileSurface, s0: f64, margin: f64) -> Result<()> {
    let lim = surface.half_length() - margin;
    if !(s0.is_finite() && s0.abs() < lim) {
        return Err(Error::Range {
            what: "s0",
            value: s0,
            lo: -lim,
            hi: lim,
        });
    }
    Ok(())
}

/// `h`-geodesic from `(s0, θ0)` with velocity `v0` over `[0, horizon]`.
pub fn integrate_h_geodesic(
    surface: &Arc<ProfileSurface>,
    s0: f64,
    theta0: f64,
    v0: Vec2,
    horizon: f64,
    opts: &GeodesicOptions,
) -> Result<Trajectory> {
    check_base(surface, s0, opts.pole_margin)?;
    let limit = surface.half_length() - opts.pole_margin;
    let surf = surface.clone();
    let raw = run_uniform(
        |_, y| h_rhs(&surf, y),
        [s0, theta0, v0[0], v0[1]],
        horizon,
        opts,
        limit,
    )?;
    let mut samples = Vec::with_capacity(raw.times.len());
    let mut accel = Vec::with_capacity(raw.times.len());
    for (t, y) in raw.times.iter().zip(&raw.states) {
        let rho = surface.rho(y[0]);
        let d = h_rhs(surface, y);
        samples.push(GeodesicState {
            t: *t,
            s: y[0],
            theta: y[1],
            sdot: y[2],
            thetadot: y[3],
            clairaut: rho * rho * y[3],
        });
        accel.push([d[2], d[3]]);
    }
    let mut traj = Trajectory::new(samples, accel, TrajectoryKind::Riemannian, surface.clone());
    traj.pole_truncated = raw.truncated;
    traj.stats = raw.stats;
    Ok(traj)
}

fn check_unit(metric: &RandersMetric, s0: f64, v0: Vec2) -> Result<()> {
    let f = metric.norm(s0, v0);
    if (f - 1.0).abs() > 1e-8 {
        return Err(Error::Contract(format!("initial vector has F = {f}, expected 1")));
    }
    Ok(())
}

/// Finsler geodesic of the navigation metric via commuting flows.
pub fn integrate_finsler_geodesic(
    metric: &RandersMetric,
    s0: f64,
    theta0: f64,
    v0: Vec2,
    horizon: f64,
    opts: &GeodesicOptions,
) -> Result<Trajectory> {
    check_unit(metric, s0, v0)?;
    let eta = metric.eta();
    let base = integrate_h_geodesic(
        metric.surface(),
        s0,
        theta0,
        [v0[0], v0[1] - eta],
        horizon,
        opts,
    )?;
    Ok(rotate_with_wind(base, eta))
}

fn rotate_with_wind(mut traj: Trajectory, eta: f64) -> Trajectory {
    for st in traj.samples.iter_mut() {
        st.theta += eta * st.t;
        st.thetadot += eta;
    }
    traj.kind = TrajectoryKind::Finsler;
    traj
}

/// Spray coefficients `G^i(x, y)` with `x`-derivatives of the fundamental
/// tensor taken by central differences with step `1e-5`.
pub fn spray_coefficients(metric: &RandersMetric, x: Vec2, y: Vec2) -> Vec2 {
    spray_with_stencil(metric, x, y, &[(1.0, 0.5), (-1.0, -0.5)], 1e-5)
}

/// Same as [`spray_coefficients`] with a fourth-order stencil; used where the
/// spray is differentiated again.
fn spray_coefficients_fine(metric: &RandersMetric, x: Vec2, y: Vec2) -> Vec2 {
    let w = 1.0 / 12.0;
    spray_with_stencil(
        metric,
        x,
        y,
        &[(2.0, -w), (1.0, 8.0 * w), (-1.0, -8.0 * w), (-2.0, w)],
        1e-3,
    )
}

fn spray_with_stencil(metric: &RandersMetric, x: Vec2, y: Vec2, stencil: &[(f64, f64)], delta: f64) -> Vec2 {
    let surface = metric.surface();
    let eta = metric.eta();
    let g_at = |p: Vec2| tensor_at(surface.rho(p[0]), eta, y);
    let g = g_at(x);
    let ginv = inverse(&g);
    let mut dg = [[[0.0; 2]; 2]; 2];
    for (k, dgk) in dg.iter_mut().enumerate() {
        for &(offset, weight) in stencil {
            let mut p = x;
            p[k] += offset * delta;
            let gp = g_at(p);
            for i in 0..2 {
                for j in 0..2 {
                    dgk[i][j] += weight * gp[i][j] / delta;
                }
            }
        }
    }
    // w_l = (2 ∂_k g_jl - ∂_l g_jk) y^j y^k
    let mut w = [0.0; 2];
    for (l, wl) in w.iter_mut().enumerate() {
        for j in 0..2 {
            for k in 0..2 {
                *wl += (2.0 * dg[k][j][l] - dg[l][j][k]) * y[j] * y[k];
            }
        }
    }
    [
        0.25 * (ginv[0][0] * w[0] + ginv[0][1] * w[1]),
        0.25 * (ginv[1][0] * w[0] + ginv[1][1] * w[1]),
    ]
}

/// Nonlinear connection `N^i_k = ∂G^i/∂y^k` by a fourth-order stencil.
pub fn connection(metric: &RandersMetric, x: Vec2, y: Vec2) -> [[f64; 2]; 2] {
    let scale = y[0].abs().max(y[1].abs()).max(1e-3);
    let d = 1e-2 * scale;
    let mut n = [[0.0; 2]; 2];
    for k in 0..2 {
        let at = |c: f64| {
            let mut z = y;
            z[k] += c * d;
            spray_coefficients_fine(metric, x, z)
        };
        let (p2, p1, m1, m2) = (at(2.0), at(1.0), at(-1.0), at(-2.0));
        for i in 0..2 {
            n[i][k] = (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * d);
        }
    }
    n
}

/// Direct integration of `ẍ = -2G(x, ẋ)`.
pub fn spray_oracle(
    metric: &RandersMetric,
    s0: f64,
    theta0: f64,
    v0: Vec2,
    horizon: f64,
    opts: &GeodesicOptions,
) -> Result<Trajectory> {
    check_unit(metric, s0, v0)?;
    check_base(metric.surface(), s0, opts.pole_margin)?;
    let rhs = |y: &[f64; 4]| {
        let g = spray_coefficients(metric, [y[0], y[1]], [y[2], y[3]]);
        [y[2], y[3], -2.0 * g[0], -2.0 * g[1]]
    };
    let limit = metric.surface().half_length() - opts.pole_margin;
    let raw = run_uniform(|_, y| rhs(y), [s0, theta0, v0[0], v0[1]], horizon, opts, limit)?;
    let eta = metric.eta();
    let mut samples = Vec::new();
    let mut accel = Vec::new();
    for (t, y) in raw.times.iter().zip(&raw.states) {
        let rho = metric.surface().rho(y[0]);
        let d = rhs(y);
        samples.push(GeodesicState {
            t: *t,
            s: y[0],
            theta: y[1],
            sdot: y[2],
            thetadot: y[3],
            clairaut: rho * rho * (y[3] - eta),
        });
        accel.push([d[2], d[3]]);
    }
    let mut traj = Trajectory::new(samples, accel, TrajectoryKind::SprayOracle, metric.surface().clone());
    traj.pole_truncated = raw.truncated;
    traj.stats = raw.stats;
    Ok(traj)
}

#[derive(Debug, Clone)]
pub struct CovariantDerivative {
    pub values: Vec<Vec2>,
    /// False when the curve is not a geodesic of `metric`, in which case the
    /// reference vector `ċ` gives no guarantee of tensoriality.
    pub guaranteed: bool,
}

/// `D_ċ V = V̇ + N(c, ċ) V` along a sampled trajectory.
pub fn covariant_derivative(
    metric: &RandersMetric,
    traj: &Trajectory,
    field: &[Vec2],
) -> Result<CovariantDerivative> {
    if field.len() != traj.samples.len() {
        return Err(Error::Config(format!(
            "vector field has {} samples, trajectory has {}",
            field.len(),
            traj.samples.len()
        )));
    }
    let dt = traj.sample_spacing();
    let comp = |i: usize| field.iter().map(|v| v[i]).collect::<Vec<_>>();
    let d0 = differentiate_uniform(&comp(0), dt);
    let d1 = differentiate_uniform(&comp(1), dt);
    let values = traj
        .samples
        .iter()
        .zip(field)
        .enumerate()
        .map(|(k, (st, v))| {
            let n = connection(metric, st.position(), st.velocity());
            [
                d0[k] + n[0][0] * v[0] + n[0][1] * v[1],
                d1[k] + n[1][0] * v[0] + n[1][1] * v[1],
            ]
        })
        .collect();
    let guaranteed = matches!(traj.kind, TrajectoryKind::Finsler | TrajectoryKind::SprayOracle | TrajectoryKind::Reflected)
        || metric.eta() == 0.0;
    Ok(CovariantDerivative { values, guaranteed })
}

/// Parallel transport of `v0` along a geodesic trajectory, sampled at the
/// trajectory's times.
pub fn parallel_transport(metric: &RandersMetric, traj: &Trajectory, v0: Vec2) -> Result<Vec<Vec2>> {
    let mut rhs = |t: f64, v: &[f64; 2]| {
        let st = traj.state_at(t);
        let n = connection(metric, st.position(), st.velocity());
        [
            -(n[0][0] * v[0] + n[0][1] * v[1]),
            -(n[1][0] * v[0] + n[1][1] * v[1]),
        ]
    };
    let t0 = traj.samples[0].t;
    let mut ode = Dopri5::new(t0, v0, Tolerance::new(1e-11, 1e-13));
    let mut out = vec![v0];
    for st in &traj.samples[1..] {
        ode.advance_to(&mut rhs, st.t)?;
        out.push(ode.y);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquatorReturn {
    pub phi: f64,
    /// First return time `T_φ`.
    pub t_return: f64,
    /// `θ`-advance of the Finsler geodesic at the return.
    pub theta_adv: f64,
    /// Clairaut constant of the underlying `h`-geodesic.
    pub clairaut: f64,
    /// Smallest `θ̇` of the Finsler geodesic observed before the return.
    pub min_thetadot: f64,
}

/// First return to the equator, crossing southwards, of the Finsler geodesic
/// launched from `(0, 0)` with angle `φ`.
pub fn first_equator_return(metric: &RandersMetric, phi: f64, opts: &GeodesicOptions) -> Result<EquatorReturn> {
    let surface = metric.surface().clone();
    let eta = metric.eta();
    let v = metric.unit_vector_at_angle(phi);
    let y0 = [0.0, 0.0, v[0], v[1] - eta];
    let radius = surface.radius();
    let clairaut = radius * radius * y0[3];
    let limit = surface.half_length() - opts.pole_margin;
    let t_min = 1e-3;
    let t_max = 12.0;
    let mut rhs = |_t: f64, y: &[f64; 4]| h_rhs(&surface, y);
    let mut ode = Dopri5::new(0.0, y0, opts.tol).with_h_max(0.05);
    let mut min_thetadot = y0[3] + eta;
    loop {
        let prev_s = ode.y[0];
        ode.step(&mut rhs, t_max)?;
        min_thetadot = min_thetadot.min(ode.y[3] + eta);
        if ode.y[0].abs() > limit {
            return Err(Error::ReturnNotFound { phi, t_stop: ode.t });
        }
        if ode.t > t_min && prev_s > 0.0 && ode.y[0] <= 0.0 {
            let (t, y) = locate_event(&mut rhs, &ode, |_, y| y[0], 1e-13);
            if y[2] < 0.0 {
                return Ok(EquatorReturn {
                    phi,
                    t_return: t,
                    theta_adv: y[1] + eta * t,
                    clairaut,
                    min_thetadot,
                });
            }
        }
        if ode.t >= t_max {
            return Err(Error::ReturnNotFound { phi, t_stop: ode.t });
        }
    }
}

/// Finsler geodesic running along the equator in the direction of the wind,
/// traversed `cover` times.
pub fn equator_geodesic(metric: &RandersMetric, cover: usize, opts: &GeodesicOptions) -> Result<Trajectory> {
    let v = metric.unit_vector_at_angle(0.0);
    let period = std::f64::consts::TAU / v[1];
    integrate_finsler_geodesic(metric, 0.0, 0.0, v, cover as f64 * period, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::PinchFunction;
    use crate::randers::make_randers;
    use std::f64::consts::PI;

    fn window_metric(r: f64) -> RandersMetric {
        let radius = r / (r + 1.0) * 0.99;
        let pinch = PinchFunction::with_auto_smoothing(radius, 1.01 / (radius * radius)).unwrap();
        make_randers(Arc::new(ProfileSurface::solve(pinch, 1e-11).unwrap()), r).unwrap()
    }

    #[test]
    fn round_sphere_great_circle_returns_after_pi() {
        let m = make_randers(Arc::new(ProfileSurface::round(1e-11).unwrap()), 1.0).unwrap();
        let ret = first_equator_return(&m, 0.3, &GeodesicOptions::default()).unwrap();
        assert!((ret.t_return - PI).abs() < 1e-9);
        assert!((ret.theta_adv - PI).abs() < 1e-9);
    }

    #[test]
    fn clairaut_and_energy_are_conserved() {
        let m = window_metric(2.0);
        let traj = integrate_h_geodesic(m.surface(), 0.1, 0.0, [0.6, 0.8 / 0.6], 5.0, &GeodesicOptions::default()).unwrap();
        let c0 = traj.samples[0].clairaut;
        for st in &traj.samples {
            let rho = m.surface().rho(st.s);
            assert!((st.clairaut - c0).abs() < 1e-10);
            let e = st.sdot * st.sdot + rho * rho * st.thetadot * st.thetadot;
            let e0 = 0.36 + m.surface().rho(0.1).powi(2) * (0.8f64 / 0.6).powi(2);
            assert!((e - e0).abs() < 1e-10);
        }
    }

    #[test]
    fn finsler_speed_is_constant() {
        let m = window_metric(2.0);
        let v = m.normalize(0.2, [0.4, -1.0]);
        let traj = integrate_finsler_geodesic(&m, 0.2, 1.0, v, 4.0, &GeodesicOptions::default()).unwrap();
        for st in &traj.samples {
            assert!((m.norm(st.s, st.velocity()) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn spray_oracle_agrees_with_commuting_flows() {
        let m = window_metric(2.0);
        let v = m.normalize(-0.3, [0.9, 0.8]);
        let opts = GeodesicOptions::default();
        let a = integrate_finsler_geodesic(&m, -0.3, 0.5, v, 3.0, &opts).unwrap();
        let b = spray_oracle(&m, -0.3, 0.5, v, 3.0, &opts).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!((x.s - y.s).abs() < 1e-7 && (x.theta - y.theta).abs() < 1e-7, "t = {}", x.t);
        }
    }

    #[test]
    fn velocity_field_is_parallel_and_perp_is_parallel() {
        let m = window_metric(2.0);
        let v = m.normalize(0.1, [0.5, 1.0]);
        // The geodesic crosses the narrow blend band, so sample finely.
        let opts = GeodesicOptions {
            dt: 1e-3,
            ..GeodesicOptions::default()
        };
        let traj = integrate_finsler_geodesic(&m, 0.1, 0.0, v, 2.0, &opts).unwrap();
        let vel: Vec<Vec2> = traj.samples.iter().map(|s| s.velocity()).collect();
        let dv = covariant_derivative(&m, &traj, &vel).unwrap();
        assert!(dv.guaranteed);
        for d in &dv.values {
            assert!(d[0].abs() < 1e-6 && d[1].abs() < 1e-6, "{d:?}");
        }
        let perp: Vec<Vec2> = traj.samples.iter().map(|s| m.perp(s.s, s.velocity())).collect();
        let dp = covariant_derivative(&m, &traj, &perp).unwrap();
        for d in &dp.values {
            assert!(d[0].abs() < 1e-6 && d[1].abs() < 1e-6, "{d:?}");
        }
    }

    #[test]
    fn parallel_transport_preserves_inner_products() {
        let m = window_metric(3.0);
        let v = m.normalize(0.0, [0.3, 1.0]);
        let traj = integrate_finsler_geodesic(&m, 0.0, 0.0, v, 2.0, &GeodesicOptions::default()).unwrap();
        let a = parallel_transport(&m, &traj, [1.0, 0.0]).unwrap();
        let b = parallel_transport(&m, &traj, [0.2, 1.5]).unwrap();
        let ip = |k: usize| {
            let st = &traj.samples[k];
            m.inner(st.s, st.velocity(), a[k], b[k])
        };
        let i0 = ip(0);
        for k in 0..traj.samples.len() {
            assert!((ip(k) - i0).abs() < 1e-7, "{k}");
        }
    }

    #[test]
    fn endpoint_limits_of_return_angle() {
        let m = window_metric(1.0);
        let opts = GeodesicOptions::default();
        let small = first_equator_return(&m, 1e-4, &opts).unwrap();
        assert!((small.theta_adv - PI / m.surface().radius()).abs() < 1e-5);
        assert!((small.t_return - PI).abs() < 1e-5);
        assert!(first_equator_return(&m, m.critical_angle(), &opts).is_err());
    }

    #[test]
    fn pole_start_is_rejected() {
        let m = window_metric(1.0);
        let l = m.surface().half_length();
        assert!(integrate_h_geodesic(m.surface(), l, 0.0, [1.0, 0.0], 1.0, &GeodesicOptions::default()).is_err());
    }
}
