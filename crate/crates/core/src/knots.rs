//! Closed polygonal curves in `S³ ⊂ C²`, Gauss linking numbers, self-linking
//! with respect to a trivialisation of the standard contact structure, and
//! the double cover `S³ → T¹S²`.
//!
//! Points are `[x0, x1, x2, x3]` with `z = x0 + i x1`, `w = x2 + i x3`; the
//! same four numbers are the quaternion `x0 + x1 i + x2 j + x3 k`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{segment_distance, Vec3};
use crate::error::{Error, Result};
use crate::numerics::{pairwise_sum, unwrap_angles};

pub type Vec4 = [f64; 4];

/// Closed polygon on the unit sphere; the closing edge is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolylineKnot {
    pub points: Vec<Vec4>,
}

/// Distance below which two curves are considered to touch.
pub const PROXIMITY_TOL: f64 = 1e-3;
/// Largest admissible distance of a linking value from an integer.
pub const INTEGRALITY_TOL: f64 = 0.05;
/// Longest admissible edge.
pub const MAX_CHORD: f64 = 0.1;

impl PolylineKnot {
    /// Vertices in order; a final vertex equal to the first is dropped.
    pub fn new(mut points: Vec<Vec4>) -> Result<Self> {
        if points.len() > 1 && points.first() == points.last() {
            points.pop();
        }
        if points.len() < 3 {
            return Err(Error::Config("a knot needs at least three vertices".into()));
        }
        for p in &points {
            let n = norm4(p);
            if !n.is_finite() || (n - 1.0).abs() > 1e-6 {
                return Err(Error::Config(format!("vertex {p:?} is not on the unit sphere")));
            }
        }
        let knot = Self { points };
        for i in 0..knot.len() {
            let (a, b) = knot.edge(i);
            let chord = (0..4).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt();
            if chord == 0.0 {
                return Err(Error::Config(format!("repeated vertex at index {i}")));
            }
            if chord >= MAX_CHORD {
                return Err(Error::Config(format!(
                    "edge {i} has length {chord:.4}; resample below {MAX_CHORD}"
                )));
            }
        }
        Ok(knot)
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { points }
    }

    /// Sample `f` on `[0, 2π)` at `n` points and project to the sphere.
    pub fn from_fn<F: Fn(f64) -> Vec4>(n: usize, f: F) -> Result<Self> {
        let pts = (0..n)
            .map(|k| normalize4(f(std::f64::consts::TAU * k as f64 / n as f64)))
            .collect();
        Self::new(pts)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn edge(&self, i: usize) -> (&Vec4, &Vec4) {
        (&self.points[i], &self.points[(i + 1) % self.points.len()])
    }
}

pub fn norm4(p: &Vec4) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn normalize4(p: Vec4) -> Vec4 {
    let n = norm4(&p);
    [p[0] / n, p[1] / n, p[2] / n, p[3] / n]
}

pub fn dot4(a: &Vec4, b: &Vec4) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quaternion product.
pub fn qmul(a: &Vec4, b: &Vec4) -> Vec4 {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

pub fn qconj(a: &Vec4) -> Vec4 {
    [a[0], -a[1], -a[2], -a[3]]
}

/// `i p`: the Hopf direction.
pub fn i_dir(p: &Vec4) -> Vec4 {
    [-p[1], p[0], -p[3], p[2]]
}

/// `(-w̄, z̄)`: first vector of the standard contact frame.
pub fn j_dir(p: &Vec4) -> Vec4 {
    [-p[2], p[3], p[0], -p[1]]
}

/// `i (-w̄, z̄)`: second vector of the standard contact frame.
pub fn k_dir(p: &Vec4) -> Vec4 {
    [-p[3], -p[2], p[1], p[0]]
}

/// `λ₀(v) = ½⟨ip, v⟩`.
pub fn standard_contact_form(p: &Vec4, v: &Vec4) -> f64 {
    0.5 * dot4(&i_dir(p), v)
}

/// Reeb field of `λ₀`, `2ip`; its orbits are Hopf fibres of period `π`.
pub fn standard_reeb(p: &Vec4) -> Vec4 {
    let d = i_dir(p);
    [2.0 * d[0], 2.0 * d[1], 2.0 * d[2], 2.0 * d[3]]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn unit3(a: Vec3) -> Option<Vec3> {
    let n = dot3(a, a).sqrt();
    if n < 1e-300 {
        None
    } else {
        Some([a[0] / n, a[1] / n, a[2] / n])
    }
}

/// Signed solid angle contribution of two segments, divided by `4π`.
fn segment_pair_linking(p1: Vec3, p2: Vec3, p3: Vec3, p4: Vec3) -> f64 {
    let r13 = sub3(p3, p1);
    let r14 = sub3(p4, p1);
    let r23 = sub3(p3, p2);
    let r24 = sub3(p4, p2);
    let (n1, n2, n3, n4) = match (
        unit3(cross(r13, r14)),
        unit3(cross(r14, r24)),
        unit3(cross(r24, r23)),
        unit3(cross(r23, r13)),
    ) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => return 0.0,
    };
    let asin = |x: f64| x.clamp(-1.0, 1.0).asin();
    let omega = asin(dot3(n1, n2)) + asin(dot3(n2, n3)) + asin(dot3(n3, n4)) + asin(dot3(n4, n1));
    let r12 = sub3(p2, p1);
    let r34 = sub3(p4, p3);
    let s = dot3(cross(r34, r12), r13);
    if s == 0.0 {
        return 0.0;
    }
    omega * s.signum() / (4.0 * std::f64::consts::PI)
}

/// Chooses a projection pole far from every vertex.
fn projection_pole(curves: &[&PolylineKnot]) -> Vec4 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best = ([1.0, 0.0, 0.0, 0.0], f64::NEG_INFINITY);
    for _ in 0..256 {
        let mut p = [0.0; 4];
        for x in p.iter_mut() {
            // Box–Muller gives an isotropic direction.
            let u: f64 = rng.random::<f64>().max(1e-300);
            let v: f64 = rng.random();
            *x = (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos();
        }
        let p = normalize4(p);
        let worst = curves
            .iter()
            .flat_map(|c| c.points.iter())
            .map(|q| dot4(&p, q))
            .fold(f64::NEG_INFINITY, f64::max);
        let clearance = 1.0 - worst;
        if clearance > best.1 {
            best = (p, clearance);
        }
    }
    best.0
}

/// Stereographic projection from `pole`, after rotating the pole to `1`.
fn project(pole: &Vec4, q: &Vec4) -> Vec3 {
    let x = qmul(&qconj(pole), q);
    let d = 1.0 - x[0];
    [x[1] / d, x[2] / d, x[3] / d]
}

// Sign making the positive Hopf fibres link +1.
const ORIENTATION: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linking {
    pub value: f64,
    pub integer: i64,
    pub residual: f64,
    pub min_distance: f64,
}

/// Smallest distance in `R⁴` between the two polygons.
pub fn curve_distance(a: &PolylineKnot, b: &PolylineKnot) -> f64 {
    (0..a.len())
        .into_par_iter()
        .map(|i| {
            let (p0, p1) = a.edge(i);
            (0..b.len())
                .map(|j| {
                    let (q0, q1) = b.edge(j);
                    segment_distance(p0, p1, q0, q1)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Gauss linking number of two disjoint polygons in `S³`.
pub fn gauss_link(a: &PolylineKnot, b: &PolylineKnot) -> Result<Linking> {
    gauss_link_with_pole(a, b, &projection_pole(&[a, b]))
}

/// [`gauss_link`] with an explicit projection pole.
pub fn gauss_link_with_pole(a: &PolylineKnot, b: &PolylineKnot, pole: &Vec4) -> Result<Linking> {
    let min_distance = curve_distance(a, b);
    if min_distance < PROXIMITY_TOL {
        return Err(Error::Proximity {
            distance: min_distance,
        });
    }
    let pole = normalize4(*pole);
    let clearance = a
        .points
        .iter()
        .chain(&b.points)
        .map(|q| 1.0 - dot4(&pole, q))
        .fold(f64::INFINITY, f64::min);
    if clearance < 1e-6 {
        return Err(Error::Chart("projection pole lies on a curve".into()));
    }
    let pa: Vec<Vec3> = a.points.iter().map(|q| project(&pole, q)).collect();
    let pb: Vec<Vec3> = b.points.iter().map(|q| project(&pole, q)).collect();
    let (na, nb) = (pa.len(), pb.len());
    let rows: Vec<f64> = (0..na)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = (0..nb)
                .map(|j| segment_pair_linking(pa[i], pa[(i + 1) % na], pb[j], pb[(j + 1) % nb]))
                .collect();
            pairwise_sum(&row)
        })
        .collect();
    let value = ORIENTATION * pairwise_sum(&rows);
    let integer = value.round() as i64;
    let residual = (value - integer as f64).abs();
    if residual >= INTEGRALITY_TOL {
        return Err(Error::Quadrature { value, residual });
    }
    Ok(Linking {
        value,
        integer,
        residual,
        min_distance,
    })
}

/// `lk(K, K_ε)` where `K_ε` is pushed off along `frame`, checked at `ε`,
/// `ε/2` and `ε/4`.
pub fn self_linking<F>(knot: &PolylineKnot, frame: F, eps: f64) -> Result<i64>
where
    F: Fn(&Vec4) -> Vec4,
{
    let mut values = Vec::new();
    for k in 0..3 {
        let e = eps / f64::from(1 << k);
        let pushed = PolylineKnot::new(
            knot.points
                .iter()
                .map(|p| {
                    let z = frame(p);
                    normalize4([p[0] + e * z[0], p[1] + e * z[1], p[2] + e * z[2], p[3] + e * z[3]])
                })
                .collect(),
        )?;
        values.push(gauss_link(knot, &pushed)?.integer);
    }
    if values.iter().any(|v| *v != values[0]) {
        return Err(Error::Framing { values });
    }
    Ok(values[0])
}

/// Self-linking with respect to the frame `Z(p) = (-w̄, z̄)`.
pub fn standard_self_linking(knot: &PolylineKnot, eps: f64) -> Result<i64> {
    self_linking(knot, j_dir, eps)
}

type C2x2 = [[Complex64; 2]; 2];

fn su2(p: &Vec4) -> C2x2 {
    let z = Complex64::new(p[0], p[1]);
    let w = Complex64::new(p[2], p[3]);
    [[z, w], [-w.conj(), z.conj()]]
}

fn mat_mul(a: &C2x2, b: &C2x2) -> C2x2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn adjoint(a: &C2x2) -> C2x2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// `(x, y, t) ↔ [[it, x + iy], [-(x - iy), -it]]`.
fn vector_of(m: &C2x2) -> Vec3 {
    [m[0][1].re, m[0][1].im, m[0][0].im]
}

fn matrix_of(v: Vec3) -> C2x2 {
    let u = Complex64::new(v[0], v[1]);
    let it = Complex64::new(0.0, v[2]);
    [[it, u], [-u.conj(), -it]]
}

/// The double cover `A ↦ (A⁻¹ j A, -A⁻¹ k A)` onto the unit tangent bundle
/// of the round sphere.
pub fn double_cover(p: &Vec4) -> Result<(Vec3, Vec3)> {
    let n = norm4(p);
    if !((n - 1.0).abs() <= 1e-10) {
        return Err(Error::Contract(format!("|p| = {n} is not 1")));
    }
    Ok(cover(p))
}

fn cover(p: &Vec4) -> (Vec3, Vec3) {
    let a = su2(p);
    let ai = adjoint(&a);
    let conj = |v: Vec3| vector_of(&mat_mul(&mat_mul(&ai, &matrix_of(v)), &a));
    let x = conj([1.0, 0.0, 0.0]);
    let y = conj([0.0, 1.0, 0.0]);
    (x, [-y[0], -y[1], -y[2]])
}

/// Point of `S³` near `guess` covering the unit tangent vector `(x, v)`.
pub fn lift_to_sphere(x: Vec3, v: Vec3, guess: &Vec4) -> Result<Vec4> {
    let residual = |p: &Vec4| {
        let (a, b) = cover(p);
        [a[0] - x[0], a[1] - x[1], a[2] - x[2], b[0] - v[0], b[1] - v[1], b[2] - v[2]]
    };
    let mut p = *guess;
    for _ in 0..50 {
        let r = residual(&p);
        let rn = r.iter().map(|e| e * e).sum::<f64>().sqrt();
        if rn < 1e-13 {
            return Ok(p);
        }
        let basis = [i_dir(&p), j_dir(&p), k_dir(&p)];
        let h = 1e-7;
        let mut jac = nalgebra::SMatrix::<f64, 6, 3>::zeros();
        for (c, e) in basis.iter().enumerate() {
            let q = normalize4([p[0] + h * e[0], p[1] + h * e[1], p[2] + h * e[2], p[3] + h * e[3]]);
            let rq = residual(&q);
            for row in 0..6 {
                jac[(row, c)] = (rq[row] - r[row]) / h;
            }
        }
        let rv = nalgebra::SVector::<f64, 6>::from_row_slice(&r);
        let jt = jac.transpose();
        let step = (jt * jac)
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular Jacobian in the double-cover lift".into()))?
            * (jt * rv);
        p = normalize4([
            p[0] - step[0] * basis[0][0] - step[1] * basis[1][0] - step[2] * basis[2][0],
            p[1] - step[0] * basis[0][1] - step[1] * basis[1][1] - step[2] * basis[2][1],
            p[2] - step[0] * basis[0][2] - step[1] * basis[1][2] - step[2] * basis[2][2],
            p[3] - step[0] * basis[0][3] - step[1] * basis[1][3] - step[2] * basis[2][3],
        ]);
    }
    let r = residual(&p);
    if r.iter().map(|e| e * e).sum::<f64>().sqrt() < 1e-9 {
        Ok(p)
    } else {
        Err(Error::Consistency("double-cover lift did not converge".into()))
    }
}

/// Self-linking of a unit-tangent-bundle knot with a closed lift.
///
/// The knot `(x(θ), v(θ))` is pushed off along the horizontal direction
/// `x × v` by the angle `2ε` (a displacement of about `ε` upstairs), the
/// push-off is lifted next to `lift`, and the linking of the two lifts is
/// returned. Checked at `ε`, `ε/2`, `ε/4`.
pub fn utb_self_linking(base: &[Vec3], tangent: &[Vec3], lift: &PolylineKnot, eps: f64) -> Result<i64> {
    if base.len() != lift.len() || tangent.len() != lift.len() {
        return Err(Error::Config("unit tangent knot and lift have different lengths".into()));
    }
    let mut values = Vec::new();
    for k in 0..3 {
        let e = 2.0 * eps / f64::from(1 << k);
        let (s, c) = e.sin_cos();
        let pushed: Result<Vec<Vec4>> = base
            .iter()
            .zip(tangent)
            .zip(&lift.points)
            .map(|((x, v), g)| {
                let n = cross(*x, *v);
                let xp = [c * x[0] + s * n[0], c * x[1] + s * n[1], c * x[2] + s * n[2]];
                lift_to_sphere(xp, *v, g)
            })
            .collect();
        values.push(gauss_link(lift, &PolylineKnot::new(pushed?)?)?.integer);
    }
    if values.iter().any(|v| *v != values[0]) {
        return Err(Error::Framing { values });
    }
    Ok(values[0])
}

/// The figure-eight curve on the round sphere with its tangent framing and lift.
#[derive(Debug, Clone)]
pub struct K8Curves {
    /// `c(θ) = ½(1 + cos 2θ, sin 2θ, 2 sin θ)`.
    pub base: Vec<Vec3>,
    /// Unit tangent field `Γ₁(θ) = (-½ sin 2θ, ½(cos 2θ - 1), cos θ)`.
    pub tangent: Vec<Vec3>,
    /// `γ₁(θ) = (1, e^{iθ})/√2`, covering `(c, Γ₁)`.
    pub lift: PolylineKnot,
}

pub fn k8_curves(n: usize) -> Result<K8Curves> {
    let thetas: Vec<f64> = (0..n).map(|k| std::f64::consts::TAU * k as f64 / n as f64).collect();
    let base = thetas
        .iter()
        .map(|&t| [0.5 * (1.0 + (2.0 * t).cos()), 0.5 * (2.0 * t).sin(), t.sin()])
        .collect();
    let tangent = thetas
        .iter()
        .map(|&t| [-0.5 * (2.0 * t).sin(), 0.5 * ((2.0 * t).cos() - 1.0), t.cos()])
        .collect();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let lift = PolylineKnot::new(thetas.iter().map(|&t| [r, 0.0, r * t.cos(), r * t.sin()]).collect())?;
    Ok(K8Curves { base, tangent, lift })
}

/// Tangent turning number of a closed curve on the unit sphere, measured in a
/// stereographic chart whose pole avoids the curve.
pub fn turning_number(points: &[Vec3], velocities: &[Vec3]) -> Result<i64> {
    let pole = [
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.577_350_269_189_625_8, 0.577_350_269_189_625_8, 0.577_350_269_189_625_8],
    ]
    .into_iter()
    .map(|p: Vec3| {
        let worst = points.iter().map(|x| dot3(*x, p)).fold(f64::NEG_INFINITY, f64::max);
        (p, 1.0 - worst)
    })
    .max_by(|a, b| a.1.total_cmp(&b.1))
    .map(|(p, _)| p)
    .expect("non-empty pole list");
    let clearance = 1.0 - points.iter().map(|x| dot3(*x, pole)).fold(f64::NEG_INFINITY, f64::max);
    if clearance < 1e-6 {
        return Err(Error::Chart("every candidate pole lies on the curve".into()));
    }
    let helper = if pole[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = unit3(cross(pole, helper)).expect("independent");
    let e2 = cross(pole, e1);
    let angles: Vec<f64> = points
        .iter()
        .zip(velocities)
        .map(|(x, v)| {
            let d = 1.0 - dot3(*x, pole);
            let vp = dot3(*v, pole);
            let tx = dot3(*v, e1) / d + dot3(*x, e1) * vp / (d * d);
            let ty = dot3(*v, e2) / d + dot3(*x, e2) * vp / (d * d);
            ty.atan2(tx)
        })
        .collect();
    let mut un = unwrap_angles(&angles);
    let first = un[0];
    // Close the loop: the final step returns to the first sample.
    let last = *un.last().expect("samples");
    let mut step = first - last;
    step -= std::f64::consts::TAU * (step / std::f64::consts::TAU).round();
    un.push(last + step);
    let total = un.last().expect("samples") - first;
    Ok((total / std::f64::consts::TAU).round() as i64)
}

/// Whether the lift of a closed curve on the round sphere to the unit
/// tangent bundle is null-homotopic (even tangent turning number).
pub fn lift_contractibility_tag(points: &[Vec3], velocities: &[Vec3]) -> Result<bool> {
    Ok(turning_number(points, velocities)?.rem_euclid(2) == 0)
}
