//! Reeb flows of `f λ₀` on `S³`, short closed orbits, and linking in the
//! open-book chart `Ψ(z, w) = (arg z / 2, w / |z|)`.
//!
//! The flow is integrated extrinsically in `R⁴` and projected back onto the
//! sphere after every step. Section returns are counted in one of two charts:
//! [`Chart::Z`] (section `arg z = 0`, binding `w = 0`) or [`Chart::W`], the
//! same chart with `z` and `w` exchanged.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knots::{dot4, i_dir, j_dir, k_dir, normalize4, Linking, Vec4, INTEGRALITY_TOL};
use crate::numerics::{cubic_hermite, wrap_pi};
use crate::ode::{locate_event, Dopri5, Tolerance};

/// Perturbation shape `Y` in `f = c + amp·Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Harmonic {
    /// `|z|² − |w|² + Re(zw)`, a degree-two harmonic with a non-invariant part.
    Quadratic,
    /// `Re z`.
    Linear,
}

impl Harmonic {
    pub fn value(self, p: &Vec4) -> f64 {
        match self {
            Harmonic::Quadratic => {
                p[0] * p[0] + p[1] * p[1] - p[2] * p[2] - p[3] * p[3] + p[0] * p[2] - p[1] * p[3]
            }
            Harmonic::Linear => p[0],
        }
    }

    pub fn gradient(self, p: &Vec4) -> Vec4 {
        match self {
            Harmonic::Quadratic => [
                2.0 * p[0] + p[2],
                2.0 * p[1] - p[3],
                -2.0 * p[2] + p[0],
                -2.0 * p[3] - p[1],
            ],
            Harmonic::Linear => [1.0, 0.0, 0.0, 0.0],
        }
    }

    /// `max |Y|` on the unit sphere.
    pub fn sup(self) -> f64 {
        match self {
            Harmonic::Quadratic => 1.25f64.sqrt(),
            Harmonic::Linear => 1.0,
        }
    }
}

/// The contact form `f λ₀` with `f = constant + amp·Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbedContactForm {
    pub constant: f64,
    pub amp: f64,
    pub harmonic: Harmonic,
}

/// Default admissible size of `f − 1` in the C² surrogate norm.
pub const PERTURBATION_THRESHOLD: f64 = 0.05;

impl PerturbedContactForm {
    pub fn new(constant: f64, amp: f64, harmonic: Harmonic) -> Result<Self> {
        if !(constant.is_finite() && amp.is_finite()) {
            return Err(Error::Config("non-finite contact form parameters".into()));
        }
        if constant - amp.abs() * harmonic.sup() <= 0.0 {
            return Err(Error::Config(format!(
                "f = {constant} + {amp}·Y is not positive on the sphere"
            )));
        }
        Ok(Self {
            constant,
            amp,
            harmonic,
        })
    }

    pub fn round() -> Self {
        Self {
            constant: 1.0,
            amp: 0.0,
            harmonic: Harmonic::Quadratic,
        }
    }

    pub fn f(&self, p: &Vec4) -> f64 {
        self.constant + self.amp * self.harmonic.value(p)
    }

    pub fn gradient(&self, p: &Vec4) -> Vec4 {
        let g = self.harmonic.gradient(p);
        [self.amp * g[0], self.amp * g[1], self.amp * g[2], self.amp * g[3]]
    }

    /// `λ(v) = f(p)·½⟨ip, v⟩`.
    pub fn eval(&self, p: &Vec4, v: &Vec4) -> f64 {
        self.f(p) * 0.5 * dot4(&i_dir(p), v)
    }

    /// Surrogate C² size of `f − 1`: the largest of `|f − 1|` and the first and
    /// second finite differences of `f` along great circles in the directions
    /// `ip`, `jp`, `kp`, over a fixed pseudo-random grid.
    pub fn c2_norm(&self) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let along = |p: &Vec4, e: &Vec4, s: f64| {
            let (sn, cs) = s.sin_cos();
            self.f(&[
                cs * p[0] + sn * e[0],
                cs * p[1] + sn * e[1],
                cs * p[2] + sn * e[2],
                cs * p[3] + sn * e[3],
            ])
        };
        let mut worst: f64 = 0.0;
        for _ in 0..2048 {
            let p = random_point(&mut rng);
            let f0 = self.f(&p);
            worst = worst.max((f0 - 1.0).abs());
            for e in [i_dir(&p), j_dir(&p), k_dir(&p)] {
                let h = 1e-3;
                let (fp, fm) = (along(&p, &e, h), along(&p, &e, -h));
                worst = worst.max(((fp - fm) / (2.0 * h)).abs());
                worst = worst.max(((fp - 2.0 * f0 + fm) / (h * h)).abs());
            }
        }
        worst
    }
}

fn random_point(rng: &mut ChaCha8Rng) -> Vec4 {
    let mut p = [0.0; 4];
    for x in p.iter_mut() {
        let u: f64 = rng.random::<f64>().max(1e-300);
        let v: f64 = rng.random();
        *x = (-2.0 * u.ln()).sqrt() * (TAU * v).cos();
    }
    normalize4(p)
}

/// Reeb vector field of `f λ₀` at `p`, from the pairing condition and the two
/// kernel conditions of `d(f λ₀)` on the contact plane.
pub fn reeb_field(form: &PerturbedContactForm, p: &Vec4) -> Result<Vec4> {
    let basis = [i_dir(p), j_dir(p), k_dir(p)];
    let f = form.f(p);
    let grad = form.gradient(p);
    let lam0 = |v: &Vec4| 0.5 * dot4(&i_dir(p), v);
    let omega0 = |u: &Vec4, v: &Vec4| dot4(&i_dir(u), v);
    let dlam = |u: &Vec4, v: &Vec4| dot4(&grad, u) * lam0(v) - dot4(&grad, v) * lam0(u) + f * omega0(u, v);
    let mut m = Matrix3::zeros();
    for (c, e) in basis.iter().enumerate() {
        m[(0, c)] = f * lam0(e);
        m[(1, c)] = dlam(e, &basis[1]);
        m[(2, c)] = dlam(e, &basis[2]);
    }
    if m.determinant().abs() < 1e-12 {
        return Err(Error::Degenerate(format!("Reeb system is singular at {p:?}")));
    }
    let c = m
        .lu()
        .solve(&Vector3::new(1.0, 0.0, 0.0))
        .ok_or_else(|| Error::Degenerate("Reeb system could not be solved".into()))?;
    let mut r = [0.0; 4];
    for (k, e) in basis.iter().enumerate() {
        for i in 0..4 {
            r[i] += c[k] * e[i];
        }
    }
    Ok(r)
}

/// Chart used for section returns and linking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    /// `(arg z / 2, w / |z|)`; undefined on `z = 0`.
    Z,
    /// `(arg w / 2, z / |w|)`; undefined on `w = 0`.
    W,
}

/// `τ ∈ [0, π)` and the page coordinate `ζ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    pub tau: f64,
    pub zeta: Complex64,
}

const CHART_MIN_MODULUS: f64 = 1e-6;

impl Chart {
    fn split(self, p: &Vec4) -> (Complex64, Complex64) {
        let z = Complex64::new(p[0], p[1]);
        let w = Complex64::new(p[2], p[3]);
        match self {
            Chart::Z => (z, w),
            Chart::W => (w, z),
        }
    }

    fn join(self, a: Complex64, b: Complex64) -> Vec4 {
        match self {
            Chart::Z => [a.re, a.im, b.re, b.im],
            Chart::W => [b.re, b.im, a.re, a.im],
        }
    }

    pub fn coords(self, p: &Vec4) -> Result<ChartPoint> {
        let (a, b) = self.split(p);
        let r = a.norm();
        if r <= CHART_MIN_MODULUS {
            return Err(Error::Chart(format!("{p:?} lies on the excluded fibre")));
        }
        Ok(ChartPoint {
            tau: (a.arg() / 2.0).rem_euclid(PI),
            zeta: b / r,
        })
    }

    pub fn point(self, cp: &ChartPoint) -> Vec4 {
        let r = 1.0 / (1.0 + cp.zeta.norm_sqr()).sqrt();
        let a = Complex64::from_polar(r, 2.0 * cp.tau);
        self.join(a, cp.zeta * r)
    }

    /// `2τ` as an angle in `(−π, π]`.
    pub fn phase(self, p: &Vec4) -> f64 {
        self.split(p).0.arg()
    }

    /// `(τ̇, ζ̇)` for a velocity `v` at `p`.
    pub fn velocity(self, p: &Vec4, v: &Vec4) -> (f64, Complex64) {
        let (a, b) = self.split(p);
        let (da, db) = self.split(v);
        let r = a.norm();
        let dr = (a.conj() * da).re / r;
        ((da / a).im / 2.0, db / r - b * dr / (r * r))
    }
}

/// `Ψ` in the standard chart.
pub fn psi(p: &Vec4) -> Result<ChartPoint> {
    Chart::Z.coords(p)
}

pub fn psi_inverse(cp: &ChartPoint) -> Vec4 {
    Chart::Z.point(cp)
}

/// Options for Reeb flow integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub tol: Tolerance,
    pub h_max: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            tol: Tolerance::new(1e-12, 1e-14),
            h_max: 0.05,
        }
    }
}

fn flow_rhs(form: &PerturbedContactForm) -> impl FnMut(f64, &Vec4) -> Vec4 + '_ {
    move |_t, y| reeb_field(form, &normalize4(*y)).unwrap_or([f64::NAN; 4])
}

/// Uniform-time samples `(t, x)` of the flow over `[0, horizon]`.
pub fn integrate_reeb(
    form: &PerturbedContactForm,
    p0: &Vec4,
    horizon: f64,
    dt: f64,
    opts: &FlowOptions,
) -> Result<Vec<(f64, Vec4)>> {
    let n = (horizon / dt).round().max(1.0) as usize;
    let dt = horizon / n as f64;
    let mut rhs = flow_rhs(form);
    let mut ode = Dopri5::new(0.0, normalize4(*p0), opts.tol).with_h_max(opts.h_max);
    let mut out = Vec::with_capacity(n + 1);
    out.push((0.0, ode.y));
    for k in 1..=n {
        let target = if k == n { horizon } else { k as f64 * dt };
        while ode.t != target {
            ode.step(&mut rhs, target)?;
            ode.set_state(normalize4(ode.y));
        }
        out.push((ode.t, ode.y));
    }
    Ok(out)
}

/// Point reached after flowing for time `t`.
pub fn flow(form: &PerturbedContactForm, p0: &Vec4, t: f64, opts: &FlowOptions) -> Result<Vec4> {
    let mut rhs = flow_rhs(form);
    let mut ode = Dopri5::new(0.0, normalize4(*p0), opts.tol).with_h_max(opts.h_max);
    while ode.t != t {
        ode.step(&mut rhs, t)?;
        ode.set_state(normalize4(ode.y));
    }
    Ok(ode.y)
}

/// Successive returns to the section `τ = 0` of `chart`.
#[derive(Debug, Clone)]
pub struct Returns {
    /// `(time, ζ)` of returns `1..=k`.
    pub hits: Vec<(f64, Complex64)>,
}

/// Flow from the section point `ζ` through `k` returns to the section.
pub fn section_returns(
    form: &PerturbedContactForm,
    chart: Chart,
    zeta: Complex64,
    k: usize,
    opts: &FlowOptions,
) -> Result<Returns> {
    let p0 = chart.point(&ChartPoint { tau: 0.0, zeta });
    let mut rhs = flow_rhs(form);
    let mut ode = Dopri5::new(0.0, p0, opts.tol).with_h_max(opts.h_max);
    let horizon = 3.0 * PI * k as f64 / form.constant.max(1e-3) + 10.0;
    let mut unwrapped = 0.0;
    let mut hits = Vec::with_capacity(k);
    while hits.len() < k {
        if ode.t >= horizon {
            return Err(Error::Chart(format!(
                "no return to the section within t = {horizon:.3} from zeta = {zeta}"
            )));
        }
        let before = chart.phase(&ode.y);
        ode.step(&mut rhs, horizon)?;
        ode.set_state(normalize4(ode.y));
        let after = chart.phase(&ode.y);
        let prev = unwrapped;
        unwrapped += wrap_pi(after - before);
        let target = TAU * (hits.len() + 1) as f64;
        if prev < target && unwrapped >= target {
            let (t, y) = locate_event(&mut rhs, &ode, |_t, y| wrap_pi(chart.phase(y)), 1e-13);
            let cp = chart.coords(&normalize4(y))?;
            hits.push((t, cp.zeta));
        }
    }
    Ok(Returns { hits })
}

/// A closed Reeb orbit found on the section of `chart`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReebOrbit {
    pub chart: Chart,
    /// Section point `[Re ζ, Im ζ]`.
    pub zeta: [f64; 2],
    /// Prime period.
    pub period: f64,
    /// Section returns in one prime period.
    pub returns: usize,
    /// `∫ f λ₀` over one prime period, by quadrature.
    pub action: f64,
    /// Eigenvalues `[re, im]` of the linearised return map.
    pub multipliers: [[f64; 2]; 2],
    /// Further section points of the same orbit.
    #[serde(skip)]
    pub section_hits: Vec<Complex64>,
}

impl ReebOrbit {
    pub fn start(&self) -> Vec4 {
        self.chart.point(&ChartPoint {
            tau: 0.0,
            zeta: Complex64::new(self.zeta[0], self.zeta[1]),
        })
    }

    /// `n` uniform-time samples over `covers` prime periods, without the
    /// repeated endpoint.
    pub fn samples(&self, form: &PerturbedContactForm, n: usize, covers: usize, opts: &FlowOptions) -> Result<Vec<(f64, Vec4)>> {
        let horizon = self.period * covers as f64;
        let mut pts = integrate_reeb(form, &self.start(), horizon, horizon / n as f64, opts)?;
        pts.pop();
        Ok(pts)
    }
}

/// `∫ f λ₀` around a closed loop sampled at uniform steps of any smooth
/// periodic parameter (the last point is not repeated).
pub fn loop_action(form: &PerturbedContactForm, points: &[Vec4]) -> f64 {
    let n = points.len();
    // Eighth-order central differences in the sample index.
    const C: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    (0..n)
        .map(|i| {
            let mut d = [0.0; 4];
            for (m, c) in C.iter().enumerate() {
                let a = &points[(i + m + 1) % n];
                let b = &points[(i + n * 4 - m - 1) % n];
                for k in 0..4 {
                    d[k] += c * (a[k] - b[k]);
                }
            }
            form.eval(&points[i], &d)
        })
        .sum()
}

fn complex_eigenvalues(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    let tr = m.trace();
    let det = m.determinant();
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [[tr / 2.0 + s, 0.0], [tr / 2.0 - s, 0.0]]
    } else {
        let s = (-disc).sqrt();
        [[tr / 2.0, s], [tr / 2.0, -s]]
    }
}

fn return_jacobian(form: &PerturbedContactForm, chart: Chart, zeta: Complex64, k: usize, opts: &FlowOptions) -> Result<(Complex64, Matrix2<f64>)> {
    let h = 1e-6;
    let g = |z: Complex64| -> Result<Complex64> {
        Ok(section_returns(form, chart, z, k, opts)?.hits[k - 1].1)
    };
    let base = g(zeta)?;
    let dx = (g(zeta + h)? - g(zeta - h)?) / (2.0 * h);
    let dy = (g(zeta + Complex64::new(0.0, h))? - g(zeta - Complex64::new(0.0, h))?) / (2.0 * h);
    Ok((base, Matrix2::new(dx.re, dy.re, dx.im, dy.im)))
}

/// Residual below which a section point counts as periodic.
pub const FIXED_POINT_TOL: f64 = 1e-10;
const PRIME_TOL: f64 = 1e-6;
const SEED_RADIUS: f64 = 1.0;

/// Damped Newton for a fixed point of the `k`-th return map.
fn newton_fixed_point(form: &PerturbedContactForm, chart: Chart, seed: Complex64, k: usize, opts: &FlowOptions) -> Option<Complex64> {
    let mut z = seed;
    let res = |z: Complex64| -> Option<Complex64> {
        section_returns(form, chart, z, k, opts).ok().map(|r| r.hits[k - 1].1 - z)
    };
    let mut g = res(z)?;
    for _ in 0..40 {
        if g.norm() < FIXED_POINT_TOL {
            return Some(z);
        }
        let (_, jac) = return_jacobian(form, chart, z, k, opts).ok()?;
        let a = jac - Matrix2::identity();
        let step = a.try_inverse()? * nalgebra::Vector2::new(g.re, g.im);
        let mut step = Complex64::new(step[0], step[1]);
        if step.norm() > 0.2 {
            step *= 0.2 / step.norm();
        }
        let mut lambda = 1.0;
        loop {
            let trial = z - step * lambda;
            if trial.norm() <= 1.5 * SEED_RADIUS {
                if let Some(gt) = res(trial) {
                    if gt.norm() < g.norm() {
                        z = trial;
                        g = gt;
                        break;
                    }
                }
            }
            lambda *= 0.5;
            if lambda < 1e-4 {
                return None;
            }
        }
    }
    (g.norm() < FIXED_POINT_TOL).then_some(z)
}

/// Turn a fixed point of `P^k` into its prime orbit.
fn classify(form: &PerturbedContactForm, chart: Chart, zeta: Complex64, k: usize, opts: &FlowOptions) -> Result<ReebOrbit> {
    let ret = section_returns(form, chart, zeta, k, opts)?;
    let j = ret
        .hits
        .iter()
        .position(|(_, z)| (z - zeta).norm() < PRIME_TOL)
        .map_or(k, |i| i + 1);
    let period = ret.hits[j - 1].0;
    let section_hits = std::iter::once(zeta)
        .chain(ret.hits[..j - 1].iter().map(|h| h.1))
        .collect();
    let (_, jac) = return_jacobian(form, chart, zeta, j, opts)?;
    let mut orbit = ReebOrbit {
        chart,
        zeta: [zeta.re, zeta.im],
        period,
        returns: j,
        action: 0.0,
        multipliers: complex_eigenvalues(&jac),
        section_hits,
    };
    let pts: Vec<Vec4> = orbit.samples(form, 512, 1, opts)?.into_iter().map(|s| s.1).collect();
    orbit.action = loop_action(form, &pts);
    Ok(orbit)
}

/// Seeds: a polar grid in the unit disc of each chart plus random points.
pub fn seed_points(grid: usize, random: usize, seed: u64) -> Vec<(Chart, Complex64)> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for chart in [Chart::Z, Chart::W] {
        out.push((chart, Complex64::new(0.0, 0.0)));
        let rings = ((grid as f64).sqrt().ceil() as usize).max(1);
        let per = grid.div_ceil(rings);
        for i in 0..rings {
            let r = SEED_RADIUS * (i as f64 + 1.0) / rings as f64 * 0.9;
            for m in 0..per {
                out.push((chart, Complex64::from_polar(r, TAU * (m as f64 + 0.5 * i as f64) / per as f64)));
            }
        }
        for _ in 0..random {
            let r = SEED_RADIUS * rng.random::<f64>().sqrt();
            out.push((chart, Complex64::from_polar(r, TAU * rng.random::<f64>())));
        }
    }
    out
}

fn same_orbit(form: &PerturbedContactForm, a: &ReebOrbit, b: &ReebOrbit, opts: &FlowOptions) -> bool {
    if (a.period - b.period).abs() > 1e-6 {
        return false;
    }
    if a.chart == b.chart {
        let zb = Complex64::new(b.zeta[0], b.zeta[1]);
        return a.section_hits.iter().any(|z| (z - zb).norm() < 1e-6);
    }
    // Different charts: compare b's start with points along a.
    let pb = b.start();
    match a.samples(form, 2048, 1, opts) {
        Ok(pts) => pts.iter().any(|(_, p)| {
            let d: f64 = (0..4).map(|i| (p[i] - pb[i]).powi(2)).sum::<f64>().sqrt();
            d < 1e-2
        }),
        Err(_) => false,
    }
}

/// Result of a search for closed orbits with period up to a cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodScan {
    pub cap: f64,
    pub band: f64,
    pub orbits: Vec<ReebOrbit>,
    /// `(period, count)` after clustering periods within `1e-6`.
    pub histogram: Vec<(f64, usize)>,
    /// Largest `|period − π|` among the short orbits found.
    pub epsilon_tilde: f64,
    /// Prime periods in `(π + band, cap]` or below `π − band`.
    pub gap_violations: Vec<f64>,
    pub converged: usize,
    pub discarded: usize,
    pub c2_norm: f64,
}

impl PeriodScan {
    pub fn gap_is_empty(&self) -> bool {
        self.gap_violations.is_empty()
    }
}

/// Fixed points of `P^k` for all `k·π ≤ cap` from every seed, reduced to
/// distinct prime orbits.
pub fn period_dichotomy_scan(
    form: &PerturbedContactForm,
    cap: f64,
    band: f64,
    seeds: &[(Chart, Complex64)],
    opts: &FlowOptions,
) -> Result<PeriodScan> {
    let k_max = ((cap / (PI * (form.constant - form.amp.abs() * form.harmonic.sup()))).floor() as usize).max(1);
    let jobs: Vec<(Chart, Complex64, usize)> = seeds
        .iter()
        .flat_map(|&(c, z)| (1..=k_max).map(move |k| (c, z, k)))
        .collect();
    let found: Vec<Option<ReebOrbit>> = jobs
        .par_iter()
        .map(|&(chart, seed, k)| {
            newton_fixed_point(form, chart, seed, k, opts).and_then(|z| classify(form, chart, z, k, opts).ok())
        })
        .collect();
    let discarded = found.iter().filter(|o| o.is_none()).count();
    let converged = found.len() - discarded;
    let mut orbits: Vec<ReebOrbit> = Vec::new();
    for o in found.into_iter().flatten() {
        if !orbits.iter().any(|x| same_orbit(form, x, &o, opts)) {
            orbits.push(o);
        }
    }
    orbits.sort_by(|a, b| a.period.total_cmp(&b.period).then(a.zeta[0].total_cmp(&b.zeta[0])));
    let mut histogram: Vec<(f64, usize)> = Vec::new();
    for o in &orbits {
        match histogram.last_mut() {
            Some((p, c)) if (o.period - *p).abs() < 1e-6 => *c += 1,
            _ => histogram.push((o.period, 1)),
        }
    }
    let epsilon_tilde = orbits
        .iter()
        .filter(|o| (o.period - PI).abs() <= band)
        .map(|o| (o.period - PI).abs())
        .fold(0.0, f64::max);
    let gap_violations = orbits
        .iter()
        .map(|o| o.period)
        .filter(|&t| t <= cap && (t - PI).abs() > band)
        .collect();
    Ok(PeriodScan {
        cap,
        band,
        orbits,
        histogram,
        epsilon_tilde,
        gap_violations,
        converged,
        discarded,
        c2_norm: form.c2_norm(),
    })
}

/// Short orbits (period within `band` of `π`), after checking the
/// perturbation size.
pub fn find_short_orbits(
    form: &PerturbedContactForm,
    seeds: &[(Chart, Complex64)],
    band: f64,
    threshold: f64,
    opts: &FlowOptions,
) -> Result<Vec<ReebOrbit>> {
    let norm = form.c2_norm();
    if norm > threshold {
        return Err(Error::Contract(format!(
            "perturbation size {norm:.4} exceeds the threshold {threshold}"
        )));
    }
    let scan = period_dichotomy_scan(form, PI + band, band, seeds, opts)?;
    Ok(scan
        .orbits
        .into_iter()
        .filter(|o| (o.period - PI).abs() <= band)
        .collect())
}

/// Trace `τ ↦ ζ_P(τ)` of a closed orbit making one section return, used to
/// recentre the page coordinate on that orbit. Empty means the binding.
#[derive(Debug, Clone)]
pub struct ChartTrace {
    pub chart: Chart,
    taus: Vec<f64>,
    zetas: Vec<Complex64>,
    slopes: Vec<Complex64>,
}

impl ChartTrace {
    /// The binding `{ζ = 0}` of `chart`.
    pub fn binding(chart: Chart) -> Self {
        Self {
            chart,
            taus: Vec::new(),
            zetas: Vec::new(),
            slopes: Vec::new(),
        }
    }

    pub fn from_orbit(form: &PerturbedContactForm, orbit: &ReebOrbit, n: usize, opts: &FlowOptions) -> Result<Self> {
        if orbit.returns != 1 {
            return Err(Error::Contract("the reference orbit must meet the section once".into()));
        }
        let chart = orbit.chart;
        let samples = integrate_reeb(form, &orbit.start(), orbit.period, orbit.period / n as f64, opts)?;
        let mut taus = Vec::with_capacity(n + 1);
        let mut zetas = Vec::with_capacity(n + 1);
        let mut slopes = Vec::with_capacity(n + 1);
        let mut unwrapped = 0.0;
        let mut last_phase = chart.phase(&samples[0].1);
        for (i, (_, p)) in samples.iter().enumerate() {
            let ph = chart.phase(p);
            if i > 0 {
                unwrapped += wrap_pi(ph - last_phase) / 2.0;
            }
            last_phase = ph;
            let v = reeb_field(form, p)?;
            let cp = chart.coords(p)?;
            let (tdot, zdot) = chart.velocity(p, &v);
            taus.push(unwrapped);
            zetas.push(cp.zeta);
            slopes.push(zdot / tdot);
        }
        // Close the table exactly at τ = π.
        let last = taus.len() - 1;
        taus[last] = PI;
        zetas[last] = zetas[0];
        slopes[last] = slopes[0];
        Ok(Self {
            chart,
            taus,
            zetas,
            slopes,
        })
    }

    /// `(ζ_P(τ), dζ_P/dτ)`.
    pub fn at(&self, tau: f64) -> (Complex64, Complex64) {
        if self.taus.is_empty() {
            return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        }
        let t = tau.rem_euclid(PI);
        let i = match self.taus.partition_point(|&x| x <= t) {
            0 => 0,
            k => (k - 1).min(self.taus.len() - 2),
        };
        let h = self.taus[i + 1] - self.taus[i];
        let u = (t - self.taus[i]) / h;
        let re = cubic_hermite(h, [self.zetas[i].re, self.slopes[i].re], [self.zetas[i + 1].re, self.slopes[i + 1].re], u);
        let im = cubic_hermite(h, [self.zetas[i].im, self.slopes[i].im], [self.zetas[i + 1].im, self.slopes[i + 1].im], u);
        (Complex64::new(re[0], im[0]), Complex64::new(re[1], im[1]))
    }

    /// Recentred page coordinate `ζ − ζ_P(τ)` of a point.
    pub fn relative(&self, p: &Vec4) -> Result<Complex64> {
        let cp = self.chart.coords(p)?;
        Ok(cp.zeta - self.at(cp.tau).0)
    }
}

/// Smallest admissible `|ζ − ζ_P|` along a loop in [`winding_link`].
pub const WINDING_PROXIMITY: f64 = 1e-3;

/// Linking of a closed loop with the reference orbit of `trace`, as the total
/// turning of `ζ − ζ_P(τ)` divided by `2π`.
pub fn winding_link(points: &[Vec4], trace: &ChartTrace) -> Result<Linking> {
    if points.len() < 3 {
        return Err(Error::Config("a loop needs at least three points".into()));
    }
    let rel: Vec<Complex64> = points.iter().map(|p| trace.relative(p)).collect::<Result<_>>()?;
    let min_distance = rel.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if min_distance < WINDING_PROXIMITY {
        return Err(Error::Proximity {
            distance: min_distance,
        });
    }
    let n = rel.len();
    let value = (0..n)
        .map(|i| (rel[(i + 1) % n] / rel[i]).arg())
        .sum::<f64>()
        / TAU;
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

/// Winding statistics of a trajectory around a short orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// Smallest `ϑ̇` inside the tube.
    pub min_rate: f64,
    pub max_rate: f64,
    /// Total turning of `ζ − ζ_P` in revolutions.
    pub revolutions: f64,
    /// Section traversals (`τ` advance over `π`).
    pub traversals: f64,
    pub max_radius: f64,
    /// `false` if the trajectory left the tube (partial report).
    pub inside_tube: bool,
    /// Linearisation of `ζ̇` at the orbit, `[[a, b], [c, d]]`.
    pub derivative_matrix: [[f64; 2]; 2],
}

impl GrowthReport {
    pub fn rate_bound_holds(&self, bound: f64) -> bool {
        self.inside_tube && self.min_rate >= bound
    }
}

/// `τ̇`, `ζ̇ − ζ_P′(τ) τ̇` and `ζ − ζ_P(τ)` at `p`.
fn relative_motion(form: &PerturbedContactForm, trace: &ChartTrace, p: &Vec4) -> Result<(Complex64, Complex64)> {
    let v = reeb_field(form, p)?;
    let cp = trace.chart.coords(p)?;
    let (tdot, zdot) = trace.chart.velocity(p, &v);
    let (zp, dzp) = trace.at(cp.tau);
    Ok((cp.zeta - zp, zdot - dzp * tdot))
}

/// Follow the trajectory starting at page offset `offset` from the orbit for
/// `periods` of its period and record `ϑ̇` inside the tube `|ζ − ζ_P| < tube`.
pub fn linking_growth_check(
    form: &PerturbedContactForm,
    trace: &ChartTrace,
    period: f64,
    offset: Complex64,
    periods: usize,
    tube: f64,
    opts: &FlowOptions,
) -> Result<GrowthReport> {
    let (zp0, _) = trace.at(0.0);
    let start = trace.chart.point(&ChartPoint { tau: 0.0, zeta: zp0 + offset });
    let horizon = period * periods as f64;
    let samples = integrate_reeb(form, &start, horizon, 0.01, opts)?;
    let mut min_rate = f64::INFINITY;
    let mut max_rate = f64::NEG_INFINITY;
    let mut max_radius: f64 = 0.0;
    let mut inside = true;
    let mut turning = 0.0;
    let mut tau_adv = 0.0;
    let mut prev: Option<(Complex64, f64)> = None;
    for (_, p) in &samples {
        let (rel, rdot) = relative_motion(form, trace, p)?;
        let r = rel.norm();
        max_radius = max_radius.max(r);
        if r >= tube {
            inside = false;
            break;
        }
        let rate = (rdot / rel).im;
        min_rate = min_rate.min(rate);
        max_rate = max_rate.max(rate);
        let ph = trace.chart.phase(p);
        if let Some((z0, ph0)) = prev {
            turning += (rel / z0).arg();
            tau_adv += wrap_pi(ph - ph0) / 2.0;
        }
        prev = Some((rel, ph));
    }
    // Linearisation at the orbit on the section τ = 0.
    let h = 1e-6;
    let col = |d: Complex64| -> Result<Complex64> {
        let pp = trace.chart.point(&ChartPoint { tau: 0.0, zeta: zp0 + d });
        let pm = trace.chart.point(&ChartPoint { tau: 0.0, zeta: zp0 - d });
        Ok((relative_motion(form, trace, &pp)?.1 - relative_motion(form, trace, &pm)?.1) / (2.0 * h))
    };
    let cx = col(Complex64::new(h, 0.0))?;
    let cy = col(Complex64::new(0.0, h))?;
    Ok(GrowthReport {
        min_rate,
        max_rate,
        revolutions: turning / TAU,
        traversals: tau_adv / PI,
        max_radius,
        inside_tube: inside,
        derivative_matrix: [[cx.re, cy.re], [cx.im, cy.im]],
    })
}

/// A random closed loop `(z(s), w(s))/|·|` whose `w` winds a random number
/// of times in `[-3, 3]` and whose `z` stays away from zero; the winding of
/// `w` is its linking with the fibre `{w = 0}`.
pub fn random_loop(seed: u64, samples: usize) -> (Vec<Vec4>, i64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coef = |r: f64| Complex64::from_polar(r, TAU * rng.random::<f64>());
    let z0 = coef(1.0);
    let z1 = coef(0.5);
    let w0 = coef(0.6);
    let w1 = coef(0.25);
    let mz = rng.random_range(-3i64..=3);
    let mw = rng.random_range(-3i64..=3);
    let mw2 = rng.random_range(-3i64..=3);
    let pts = (0..samples)
        .map(|i| {
            let s = TAU * i as f64 / samples as f64;
            let e = |m: i64| Complex64::from_polar(1.0, m as f64 * s);
            let z = z0 + z1 * e(mz);
            let w = w0 * e(mw) + w1 * e(mw2);
            normalize4([z.re, z.im, w.re, w.im])
        })
        .collect();
    (pts, mw)
}
