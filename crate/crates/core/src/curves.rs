//! Closed curves in `R³` and their double points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linearized::ClosedOrbit;

pub type Vec3 = [f64; 3];

/// A periodic curve with velocity.
pub trait ClosedCurve: Sync {
    fn period(&self) -> f64;
    /// Position and velocity at parameter `t` (taken modulo the period).
    fn eval(&self, t: f64) -> (Vec3, Vec3);
}

/// Curve given by a closure.
pub struct FnCurve<F> {
    period: f64,
    f: F,
}

impl<F> FnCurve<F>
where
    F: Fn(f64) -> (Vec3, Vec3) + Sync,
{
    pub fn new(period: f64, f: F) -> Self {
        Self { period, f }
    }
}

impl<F> ClosedCurve for FnCurve<F>
where
    F: Fn(f64) -> (Vec3, Vec3) + Sync,
{
    fn period(&self) -> f64 {
        self.period
    }

    fn eval(&self, t: f64) -> (Vec3, Vec3) {
        (self.f)(t.rem_euclid(self.period))
    }
}

impl ClosedCurve for ClosedOrbit {
    fn period(&self) -> f64 {
        self.period
    }

    fn eval(&self, t: f64) -> (Vec3, Vec3) {
        let st = self.trajectory.state_at(t.rem_euclid(self.period));
        (
            self.trajectory.ambient_point(&st),
            self.trajectory.ambient_velocity(&st),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingClass {
    Transverse,
    /// Tangent directions agree.
    PositiveTangency,
    /// Tangent directions are opposite.
    NegativeTangency,
    /// The branches come close but do not meet within the acceptance
    /// threshold while being nearly tangent.
    Ambiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfIntersection {
    pub t_a: f64,
    pub t_b: f64,
    pub distance: f64,
    /// Angle between the tangent directions, in `[0, π]`.
    pub angle: f64,
    pub class: CrossingClass,
}

/// Chordal distance below which a refined pair counts as a double point.
pub const PROXIMITY_ACCEPT: f64 = 1e-7;
/// Tangent angle below which a crossing counts as a tangency.
pub const TANGENCY_ANGLE: f64 = 1e-3;
const AMBIGUOUS_DISTANCE: f64 = 1e-4;

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Closest points of two segments, as parameters in `[0, 1]`.
fn segment_params(p0: Vec3, p1: Vec3, q0: Vec3, q1: Vec3) -> (f64, f64, f64) {
    let d1 = sub(p1, p0);
    let d2 = sub(q1, q0);
    let r = sub(p0, q0);
    let a = dot(d1, d1);
    let e = dot(d2, d2);
    let f = dot(d2, r);
    let (mut s, mut t);
    if a <= 1e-300 && e <= 1e-300 {
        return (0.0, 0.0, norm(r));
    }
    if a <= 1e-300 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(d1, r);
        if e <= 1e-300 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(d1, d2);
            let denom = a * e - b * b;
            s = if denom > 1e-300 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
        }
    }
    let pa = [p0[0] + s * d1[0], p0[1] + s * d1[1], p0[2] + s * d1[2]];
    let pb = [q0[0] + t * d2[0], q0[1] + t * d2[1], q0[2] + t * d2[2]];
    (s, t, norm(sub(pa, pb)))
}

/// Minimum distance between segments `[p0, p1]` and `[q0, q1]` in any dimension.
pub fn segment_distance<const N: usize>(p0: &[f64; N], p1: &[f64; N], q0: &[f64; N], q1: &[f64; N]) -> f64 {
    let d1: Vec<f64> = (0..N).map(|i| p1[i] - p0[i]).collect();
    let d2: Vec<f64> = (0..N).map(|i| q1[i] - q0[i]).collect();
    let r: Vec<f64> = (0..N).map(|i| p0[i] - q0[i]).collect();
    let dt = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let a = dt(&d1, &d1);
    let e = dt(&d2, &d2);
    let f = dt(&d2, &r);
    let c = dt(&d1, &r);
    let b = dt(&d1, &d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-300 {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = if e > 1e-300 { (b * s + f) / e } else { 0.0 };
    if t < 0.0 {
        t = 0.0;
        s = if a > 1e-300 { (-c / a).clamp(0.0, 1.0) } else { 0.0 };
    } else if t > 1.0 {
        t = 1.0;
        s = if a > 1e-300 { ((b - c) / a).clamp(0.0, 1.0) } else { 0.0 };
    }
    (0..N)
        .map(|i| (r[i] + s * d1[i] - t * d2[i]).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn cyclic_gap(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

/// Gauss–Newton on `|c(a) - c(b)|²` with a little damping for tangencies.
fn refine_pair<C: ClosedCurve + ?Sized>(curve: &C, mut a: f64, mut b: f64) -> (f64, f64, f64) {
    for _ in 0..60 {
        let (pa, va) = curve.eval(a);
        let (pb, vb) = curve.eval(b);
        let r = sub(pa, pb);
        let m11 = dot(va, va);
        let m22 = dot(vb, vb);
        let m12 = -dot(va, vb);
        let g1 = dot(va, r);
        let g2 = -dot(vb, r);
        let mu = 1e-12 * (m11 + m22);
        let det = (m11 + mu) * (m22 + mu) - m12 * m12;
        if det <= 0.0 {
            break;
        }
        let da = -((m22 + mu) * g1 - m12 * g2) / det;
        let db = -((m11 + mu) * g2 - m12 * g1) / det;
        a += da;
        b += db;
        if da.abs().max(db.abs()) < 1e-15 * curve.period().max(1.0) {
            break;
        }
    }
    let p = curve.period();
    let (a, b) = (a.rem_euclid(p), b.rem_euclid(p));
    let dist = norm(sub(curve.eval(a).0, curve.eval(b).0));
    (a, b, dist)
}

/// Double points of a closed curve: segment-pair proximity search on
/// `samples` points, local refinement, classification and deduplication.
pub fn self_intersections<C: ClosedCurve + ?Sized>(curve: &C, samples: usize) -> Vec<SelfIntersection> {
    let n = samples.max(16);
    let period = curve.period();
    let dt = period / n as f64;
    let pts: Vec<Vec3> = (0..n).map(|i| curve.eval(i as f64 * dt).0).collect();
    let lens: Vec<f64> = (0..n).map(|i| norm(sub(pts[(i + 1) % n], pts[i]))).collect();
    let min_sep = 4.0 * dt;
    let candidates: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let pts = &pts;
            let lens = &lens;
            (i + 3..n).filter_map(move |j| {
                if i + n - j < 3 {
                    return None;
                }
                let (s, t, d) = segment_params(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]);
                if d < lens[i] + lens[j] {
                    Some(((i as f64 + s) * dt, (j as f64 + t) * dt))
                } else {
                    None
                }
            })
        })
        .collect();
    let mut found: Vec<SelfIntersection> = Vec::new();
    for (a0, b0) in candidates {
        let (a, b, distance) = refine_pair(curve, a0, b0);
        if cyclic_gap(a, b, period) < min_sep || distance > AMBIGUOUS_DISTANCE {
            continue;
        }
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let dup = found.iter().any(|x| {
            cyclic_gap(x.t_a, a, period) < 1e-6 && cyclic_gap(x.t_b, b, period) < 1e-6
        });
        if dup {
            continue;
        }
        let va = curve.eval(a).1;
        let vb = curve.eval(b).1;
        let cosang = (dot(va, vb) / (norm(va) * norm(vb))).clamp(-1.0, 1.0);
        let angle = cosang.acos();
        let class = if angle < TANGENCY_ANGLE {
            CrossingClass::PositiveTangency
        } else if std::f64::consts::PI - angle < TANGENCY_ANGLE {
            CrossingClass::NegativeTangency
        } else {
            CrossingClass::Transverse
        };
        let class = if distance > PROXIMITY_ACCEPT {
            if class == CrossingClass::Transverse {
                continue;
            }
            CrossingClass::Ambiguous
        } else {
            class
        };
        found.push(SelfIntersection {
            t_a: a,
            t_b: b,
            distance,
            angle,
            class,
        });
    }
    found.sort_by(|x, y| x.t_a.total_cmp(&y.t_a).then(x.t_b.total_cmp(&y.t_b)));
    found
}
