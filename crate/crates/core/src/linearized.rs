//! Linearized flow along closed geodesics: rotation intervals, the
//! Conley–Zehnder index of the geodesic flow, and a Jacobi-field oracle.
//!
//! With `u = (f', f)` and `f'' = -K f` the polar angle of `u` obeys
//! `ϑ̇ = cos²ϑ + K sin²ϑ`. The rotation of a start vector `w` over the orbit is
//! `Δ(w) = (ϑ(T) - ϑ(0)) / 2π` and the rotation interval is the range of `Δ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::{integrate_finsler_geodesic, GeodesicOptions, Trajectory};
use crate::numerics::golden_max;
use crate::ode::{Dopri5, Tolerance};
use crate::randers::{RandersMetric, Vec2};

/// Endpoints closer than this to an integer are treated as that integer.
pub const INTEGER_SNAP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationRun {
    /// Total rotation `Δ(w)` in turns.
    pub delta: f64,
    pub min_rate: f64,
}

/// Rotation of the start angle `alpha` under `ϑ̇ = cos²ϑ + K(t) sin²ϑ` over
/// `[0, span]`.
pub fn rotation_angle<K>(curvature: K, alpha: f64, span: f64) -> Result<RotationRun>
where
    K: Fn(f64) -> f64,
{
    let mut min_rate = f64::INFINITY;
    let mut rhs = |t: f64, y: &[f64; 1]| {
        let (s, c) = y[0].sin_cos();
        [c * c + curvature(t) * s * s]
    };
    let mut ode = Dopri5::new(0.0, [alpha], Tolerance::new(1e-12, 1e-13)).with_h_max(0.05);
    while ode.t < span {
        ode.step(&mut rhs, span)?;
        min_rate = min_rate.min(rhs(ode.t, &ode.y)[0]);
    }
    min_rate = min_rate.min(rhs(0.0, &[alpha])[0]);
    Ok(RotationRun {
        delta: (ode.y[0] - alpha) / std::f64::consts::TAU,
        min_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationInterval {
    pub lo: f64,
    pub hi: f64,
    pub min_rate: f64,
}

/// Rotation interval from a fan of start angles refined near the extremes.
pub fn rotation_interval<K>(curvature: K, span: f64, fan: usize) -> Result<RotationInterval>
where
    K: Fn(f64) -> f64,
{
    let fan = fan.max(8);
    let step = std::f64::consts::PI / fan as f64;
    let mut runs = Vec::with_capacity(fan);
    let mut min_rate = f64::INFINITY;
    for i in 0..fan {
        let run = rotation_angle(&curvature, i as f64 * step, span)?;
        min_rate = min_rate.min(run.min_rate);
        runs.push(run.delta);
    }
    let (imax, _) = runs
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
    let (imin, _) = runs
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &d)| if d < acc.1 { (i, d) } else { acc });
    let eval = |a: f64, sign: f64| {
        rotation_angle(&curvature, a, span)
            .map(|r| sign * r.delta)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let c = imax as f64 * step;
    let (_, hi) = golden_max(&mut |a| eval(a, 1.0), c - step, c + step, 1e-9);
    let c = imin as f64 * step;
    let (_, neg_lo) = golden_max(&mut |a| eval(a, -1.0), c - step, c + step, 1e-9);
    let hi = hi.max(runs[imax]);
    let lo = (-neg_lo).min(runs[imin]);
    Ok(RotationInterval { lo, hi, min_rate })
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < INTEGER_SNAP {
        r
    } else {
        x
    }
}

/// Index of a rotation interval `[a, b]`.
///
/// An interval containing an integer `k` in `[a, b)` gets `2k`, an interval
/// strictly between `k` and `k + 1` gets `2k + 1`. A degenerate interval
/// sitting on an integer `k` gets `2k`.
pub fn mu_hat(a: f64, b: f64) -> i64 {
    let (a, b) = (snap(a.min(b)), snap(a.max(b)));
    if a == b && a.fract() == 0.0 {
        return 2 * a as i64;
    }
    let k = a.ceil();
    if k < b {
        return 2 * k as i64;
    }
    2 * (b.ceil() as i64 - 1) + 1
}

/// A closed geodesic with its period.
#[derive(Debug, Clone)]
pub struct ClosedOrbit {
    pub id: String,
    pub trajectory: Trajectory,
    pub period: f64,
}

impl ClosedOrbit {
    /// Wrap a trajectory covering one period and check closure in `R³`.
    pub fn new(id: impl Into<String>, trajectory: Trajectory, tol: f64) -> Result<Self> {
        let period = trajectory.duration();
        let a = &trajectory.samples[0];
        let b = trajectory.samples.last().expect("non-empty trajectory");
        let (pa, pb) = (trajectory.ambient_point(a), trajectory.ambient_point(b));
        let (va, vb) = (trajectory.ambient_velocity(a), trajectory.ambient_velocity(b));
        let residual = (0..3)
            .map(|i| (pa[i] - pb[i]).powi(2) + (va[i] - vb[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual > tol {
            return Err(Error::Closure { residual, tol });
        }
        Ok(Self {
            id: id.into(),
            trajectory,
            period,
        })
    }

    /// Gaussian curvature along the orbit, extended periodically.
    pub fn curvature(&self, t: f64) -> f64 {
        let tt = t.rem_euclid(self.period);
        let st = self.trajectory.state_at(tt);
        self.trajectory.surface().curvature_unchecked(st.s)
    }

    /// `F`-length of a unit-speed orbit.
    pub fn length(&self) -> f64 {
        self.period
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationRecord {
    pub orbit: String,
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "I")]
    pub interval: [f64; 2],
    pub cz: i64,
    pub min_rate: f64,
}

/// Rotation interval and index of the orbit traversed `cover` times.
pub fn cz_index(orbit: &ClosedOrbit, cover: usize) -> Result<RotationRecord> {
    let span = cover as f64 * orbit.period;
    let iv = rotation_interval(|t| orbit.curvature(t), span, 64)?;
    if iv.hi - iv.lo >= 0.5 {
        return Err(Error::Consistency(format!(
            "rotation interval [{}, {}] is wider than 1/2",
            iv.lo, iv.hi
        )));
    }
    let id = if cover == 1 {
        orbit.id.clone()
    } else {
        format!("{}^{cover}", orbit.id)
    };
    Ok(RotationRecord {
        orbit: id,
        period: span,
        interval: [iv.lo, iv.hi],
        cz: mu_hat(iv.lo, iv.hi),
        min_rate: iv.min_rate,
    })
}

/// Samples `(t, f, f')` of `f'' = -K f`.
pub fn jacobi_scalar<K>(curvature: K, f0: f64, fdot0: f64, span: f64, samples: usize) -> Result<Vec<[f64; 3]>>
where
    K: Fn(f64) -> f64,
{
    let mut rhs = |t: f64, y: &[f64; 2]| [y[1], -curvature(t) * y[0]];
    let mut ode = Dopri5::new(0.0, [f0, fdot0], Tolerance::new(1e-12, 1e-14)).with_h_max(0.05);
    let n = samples.max(2) - 1;
    let mut out = vec![[0.0, f0, fdot0]];
    for k in 1..=n {
        let t = span * k as f64 / n as f64;
        ode.advance_to(&mut rhs, t)?;
        out.push([t, ode.y[0], ode.y[1]]);
    }
    Ok(out)
}

/// First zero of the Jacobi solution with `f(0) = 0`, `f'(0) = 1`.
pub fn first_conjugate_time<K>(curvature: K, horizon: f64) -> Result<Option<f64>>
where
    K: Fn(f64) -> f64,
{
    let mut rhs = |t: f64, y: &[f64; 2]| [y[1], -curvature(t) * y[0]];
    let mut ode = Dopri5::new(0.0, [0.0, 1.0], Tolerance::new(1e-12, 1e-14)).with_h_max(0.05);
    while ode.t < horizon {
        ode.step(&mut rhs, horizon)?;
        if ode.t > 1e-6 && ode.y[0] <= 0.0 {
            let (t, _) = crate::ode::locate_event(&mut rhs, &ode, |_, y| y[0], 1e-13);
            return Ok(Some(t));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiComparison {
    /// Largest deviation, in `h`-norm, between the predicted field and the
    /// forward difference at `dφ`.
    pub deviation: f64,
    /// Same at `dφ/2`.
    pub deviation_half: f64,
    pub ratio: f64,
    /// Largest `|g_ċ(J, ċ)|` for the central-difference field.
    pub orthogonality: f64,
}

/// Compare `f ċ^⊥` with finite differences of the equator-launched family
/// `φ ↦ c_φ` over `[0, span]`.
pub fn jacobi_oracle(metric: &RandersMetric, phi: f64, dphi: f64, span: f64) -> Result<JacobiComparison> {
    let opts = GeodesicOptions {
        dt: 0.005,
        ..GeodesicOptions::default()
    };
    let launch = |p: f64| integrate_finsler_geodesic(metric, 0.0, 0.0, metric.unit_vector_at_angle(p), span, &opts);
    let base = launch(phi)?;
    let v = metric.unit_vector_at_angle(phi);
    let h = 1e-6;
    let vp = metric.unit_vector_at_angle(phi + h);
    let vm = metric.unit_vector_at_angle(phi - h);
    let dv = [(vp[0] - vm[0]) / (2.0 * h), (vp[1] - vm[1]) / (2.0 * h)];
    let fdot0 = metric.inner(0.0, v, dv, metric.perp(0.0, v));
    let surface = metric.surface().clone();
    let f = jacobi_scalar(
        |t| surface.curvature_unchecked(base.state_at(t).s),
        0.0,
        fdot0,
        span,
        base.samples.len(),
    )?;
    let predicted: Vec<Vec2> = base
        .samples
        .iter()
        .zip(&f)
        .map(|(st, fk)| {
            let w = metric.perp(st.s, st.velocity());
            [fk[1] * w[0], fk[1] * w[1]]
        })
        .collect();
    let deviation_for = |d: f64| -> Result<f64> {
        let other = launch(phi + d)?;
        let mut worst: f64 = 0.0;
        for ((a, b), p) in base.samples.iter().zip(&other.samples).zip(&predicted) {
            let j = [(b.s - a.s) / d, (b.theta - a.theta) / d];
            let rho = surface.rho(a.s);
            let e = ((j[0] - p[0]).powi(2) + rho * rho * (j[1] - p[1]).powi(2)).sqrt();
            worst = worst.max(e);
        }
        Ok(worst)
    };
    let deviation = deviation_for(dphi)?;
    let deviation_half = deviation_for(0.5 * dphi)?;
    let plus = launch(phi + dphi)?;
    let minus = launch(phi - dphi)?;
    let mut orthogonality: f64 = 0.0;
    for ((a, p), m) in base.samples.iter().zip(&plus.samples).zip(&minus.samples) {
        let j = [(p.s - m.s) / (2.0 * dphi), (p.theta - m.theta) / (2.0 * dphi)];
        orthogonality = orthogonality.max(metric.inner(a.s, a.velocity(), j, a.velocity()).abs());
    }
    Ok(JacobiComparison {
        deviation,
        deviation_half,
        ratio: deviation / deviation_half,
        orthogonality,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityVerdict {
    pub orbit: String,
    pub contractible: bool,
    pub interval: [f64; 2],
    pub cz: i64,
    pub length: f64,
    /// Contractible orbits must have index at least 3.
    pub satisfies_bound: bool,
}

/// Check the index bound `cz ≥ 3` on the given orbits; the flag marks which
/// orbits have contractible lifts.
pub fn dynamical_convexity_report(orbits: &[(ClosedOrbit, bool)]) -> Result<Vec<ConvexityVerdict>> {
    orbits
        .iter()
        .map(|(orbit, contractible)| {
            let rec = cz_index(orbit, 1)?;
            Ok(ConvexityVerdict {
                orbit: orbit.id.clone(),
                contractible: *contractible,
                interval: rec.interval,
                cz: rec.cz,
                length: orbit.length(),
                satisfies_bound: !contractible || rec.cz >= 3,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesics::equator_geodesic;
    use crate::profile::{PinchFunction, ProfileSurface};
    use crate::randers::make_randers;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn mu_hat_examples() {
        assert_eq!(mu_hat(0.6, 0.9), 1);
        assert_eq!(mu_hat(1.9, 2.2), 4);
        assert_eq!(mu_hat(2.0, 2.0), 4);
        assert_eq!(mu_hat(1.2, 1.5), 3);
        assert_eq!(mu_hat(2.0 - 1e-10, 2.0 + 1e-10), 4);
        assert_eq!(mu_hat(1.5, 2.0), 3);
    }

    #[test]
    fn constant_curvature_rotation() {
        let run = rotation_angle(|_| 1.0, 0.3, 2.0 * PI).unwrap();
        assert!((run.delta - 1.0).abs() < 1e-10);
        let iv = rotation_interval(|_| 4.0, PI, 32).unwrap();
        // f'' = -4f turns u twice as often in the f-direction on average.
        assert!(iv.lo <= iv.hi && (iv.lo - 1.0).abs() < 1e-8 && (iv.hi - 1.0).abs() < 1e-8);
    }

    #[test]
    fn round_double_great_circle_has_index_four() {
        let m = make_randers(Arc::new(ProfileSurface::round(1e-11).unwrap()), 1.0).unwrap();
        let traj = equator_geodesic(&m, 2, &GeodesicOptions::default()).unwrap();
        let orbit = ClosedOrbit::new("equator2", traj, 1e-8).unwrap();
        let rec = cz_index(&orbit, 1).unwrap();
        assert_eq!(rec.cz, 4);
        assert!((rec.interval[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn pinched_equator_double_cover_has_index_one() {
        let radius = 0.5 * 0.99;
        let pinch = PinchFunction::with_auto_smoothing(radius, 1.01 / (radius * radius)).unwrap();
        let m = make_randers(Arc::new(ProfileSurface::solve(pinch, 1e-11).unwrap()), 1.0).unwrap();
        let traj = equator_geodesic(&m, 2, &GeodesicOptions::default()).unwrap();
        let orbit = ClosedOrbit::new("equator2", traj, 1e-8).unwrap();
        let rec = cz_index(&orbit, 1).unwrap();
        assert!((rec.interval[0] - 2.0 * radius).abs() < 1e-8);
        assert_eq!(rec.cz, 1);
        assert!(rec.min_rate >= 1.0 - 1e-12);
    }

    #[test]
    fn conjugate_time_on_round_sphere() {
        let t = first_conjugate_time(|_| 1.0, 5.0).unwrap().unwrap();
        assert!((t - PI).abs() < 1e-10);
    }

    #[test]
    fn jacobi_oracle_on_round_equator() {
        let m = make_randers(Arc::new(ProfileSurface::round(1e-11).unwrap()), 1.0).unwrap();
        let cmp = jacobi_oracle(&m, 0.0, 1e-4, 3.0).unwrap();
        assert!(cmp.deviation < 1e-3, "{cmp:?}");
        assert!((1.5..=2.5).contains(&cmp.ratio), "{cmp:?}");
        assert!(cmp.orthogonality < 1e-6);
    }

    #[test]
    fn jacobi_oracle_on_randers_metric() {
        let radius = 2.0 / 3.0 * 0.99;
        let pinch = PinchFunction::with_auto_smoothing(radius, 1.01 / (radius * radius)).unwrap();
        let m = make_randers(Arc::new(ProfileSurface::solve(pinch, 1e-11).unwrap()), 2.0).unwrap();
        let cmp = jacobi_oracle(&m, 0.4, 1e-4, 3.0).unwrap();
        assert!(cmp.deviation < 1e-3, "{cmp:?}");
        assert!((1.5..=2.5).contains(&cmp.ratio), "{cmp:?}");
        assert!(cmp.orthogonality < 1e-6, "{cmp:?}");
    }
}
