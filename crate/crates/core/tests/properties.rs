use std::f64::consts::{PI, TAU};
use std::sync::{Arc, OnceLock};

use finsler_core::hopf::{
    psi, psi_inverse, reeb_field, winding_link, Chart, ChartPoint, ChartTrace, Harmonic, PerturbedContactForm,
};
use finsler_core::knots::{double_cover, gauss_link, gauss_link_with_pole, normalize4, PolylineKnot, Vec4};
use finsler_core::linearized::{mu_hat, rotation_angle};
use finsler_core::profile::{PinchFunction, ProfileSurface};
use finsler_core::randers::{make_randers, RandersMetric};
use num_complex::Complex64;
use proptest::prelude::*;

fn window_metric() -> &'static RandersMetric {
    static M: OnceLock<RandersMetric> = OnceLock::new();
    M.get_or_init(|| {
        let radius = 2.0 / 3.0 * 0.99;
        let pinch = PinchFunction::with_auto_smoothing(radius, 1.01 / (radius * radius)).unwrap();
        make_randers(Arc::new(ProfileSurface::solve(pinch, 1e-11).unwrap()), 2.0).unwrap()
    })
}

fn h_norm(rho: f64, v: [f64; 2]) -> f64 {
    (v[0] * v[0] + rho * rho * v[1] * v[1]).sqrt()
}

fn fibre(z: Complex64, w: Complex64, n: usize, reverse: bool) -> PolylineKnot {
    let sign = if reverse { -1.0 } else { 1.0 };
    PolylineKnot::from_fn(n, |t| {
        let e = Complex64::from_polar(1.0, sign * t);
        let (a, b) = (e * z, e * w);
        [a.re, a.im, b.re, b.im]
    })
    .unwrap()
}

fn unit_c2(a: f64, b: f64, c: f64) -> (Complex64, Complex64) {
    // Hopf coordinates: |z| = cos a, |w| = sin a.
    (Complex64::from_polar(a.cos(), b), Complex64::from_polar(a.sin(), c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pinch_function_invariants(radius in 0.2f64..0.95, excess in 0.05f64..4.0, x in 0.0f64..1.0) {
        let k_max = (1.0 + excess) / (radius * radius);
        let g = PinchFunction::with_auto_smoothing(radius, k_max).unwrap();
        let x = x * radius * radius;
        prop_assert!(g.value(x) >= g.piecewise_linear(x) - 1e-15);
        prop_assert!(g.slope(x) <= -1.0 + 1e-12 && g.slope(x) >= -k_max - 1e-12);
        prop_assert!(g.slope_derivative(x) >= -1e-12);
        prop_assert!((g.value(radius * radius)).abs() < 1e-12);
    }

    #[test]
    fn mu_hat_translation(a in -5.0f64..5.0, w in 0.0f64..0.49, n in -4i64..4) {
        let b = a + w;
        prop_assert_eq!(mu_hat(a + n as f64, b + n as f64), mu_hat(a, b) + 2 * n);
    }

    #[test]
    fn rotation_is_scale_invariant(alpha in 0.0f64..PI, k in 0.2f64..3.0) {
        let a = rotation_angle(|_| k, alpha, 2.0).unwrap();
        let b = rotation_angle(|_| k, alpha + PI, 2.0).unwrap();
        prop_assert!((a.delta - b.delta).abs() < 1e-9);
        prop_assert!(a.min_rate > 0.0);
    }

    #[test]
    fn randers_norm_invariants(s in -0.9f64..0.9, ang in 0.0f64..TAU, t in 0.1f64..10.0, ang2 in 0.0f64..TAU) {
        let m = window_metric();
        let rho = m.surface().rho(s);
        let v = [ang.cos(), ang.sin() / rho];
        let w = [ang2.cos(), ang2.sin() / rho];
        let f = m.norm(s, v);
        prop_assert!(f > 0.0);
        prop_assert!((m.norm(s, [t * v[0], t * v[1]]) - t * f).abs() < 1e-12 * t);
        prop_assert!(m.norm(s, [v[0] + w[0], v[1] + w[1]]) <= f + m.norm(s, w) + 1e-12);
        prop_assert!((m.norm_dual(s, v) - f).abs() < 1e-12);
        // Navigation identity |v - F(v) X|_h = F(v).
        let x = m.wind();
        prop_assert!((h_norm(rho, [v[0] - f * x[0], v[1] - f * x[1]]) - f).abs() < 1e-9);
        // Zero-homogeneity and F² = g_v(v, v).
        let g1 = m.fundamental_tensor_exact(s, v);
        let g2 = m.fundamental_tensor_exact(s, [t * v[0], t * v[1]]);
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((g1[i][j] - g2[i][j]).abs() < 1e-10 * g1[i][j].abs().max(1.0));
            }
        }
        prop_assert!((m.inner(s, v, v, v) - f * f).abs() < 1e-10);
    }

    #[test]
    fn double_cover_properties(a in 0.0f64..1.5, b in 0.0f64..TAU, c in 0.0f64..TAU) {
        let (z, w) = unit_c2(a, b, c);
        let p = [z.re, z.im, w.re, w.im];
        let (x, v) = double_cover(&p).unwrap();
        let (x2, v2) = double_cover(&[-p[0], -p[1], -p[2], -p[3]]).unwrap();
        let d = |a: [f64; 3], b: [f64; 3]| (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max);
        prop_assert!(d(x, x2) < 1e-14 && d(v, v2) < 1e-14);
        let n = |a: [f64; 3]| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        prop_assert!((n(x) - 1.0).abs() < 1e-14 && (n(v) - 1.0).abs() < 1e-14);
        prop_assert!((x[0] * v[0] + x[1] * v[1] + x[2] * v[2]).abs() < 1e-14);
    }

    #[test]
    fn chart_round_trip(tau in 0.0f64..PI, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let cp = ChartPoint { tau, zeta: Complex64::new(re, im) };
        let back = psi(&psi_inverse(&cp)).unwrap();
        prop_assert!((back.zeta - cp.zeta).norm() < 1e-10);
        prop_assert!((back.tau - tau).abs() < 1e-10 || (PI - (back.tau - tau).abs()) < 1e-10);
    }

    #[test]
    fn reeb_pairing(amp in -0.2f64..0.2, c in 0.5f64..2.0, p in proptest::array::uniform4(-1.0f64..1.0)) {
        prop_assume!(p.iter().map(|x| x * x).sum::<f64>() > 1e-3);
        let p = normalize4(p);
        for h in [Harmonic::Quadratic, Harmonic::Linear] {
            let form = PerturbedContactForm::new(c, amp, h).unwrap();
            let r = reeb_field(&form, &p).unwrap();
            prop_assert!((form.eval(&p, &r) - 1.0).abs() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gauss_link_symmetry_and_pole_invariance(
        a1 in 0.2f64..1.3, b1 in 0.0f64..TAU, c1 in 0.0f64..TAU,
        a2 in 0.2f64..1.3, b2 in 0.0f64..TAU, c2 in 0.0f64..TAU,
        pole in proptest::array::uniform4(-1.0f64..1.0),
    ) {
        let (z1, w1) = unit_c2(a1, b1, c1);
        let (z2, w2) = unit_c2(a2, b2, c2);
        // Distinct fibres: the base points on S² differ.
        let base = |z: Complex64, w: Complex64| (z.norm_sqr() - w.norm_sqr(), z * w.conj());
        let (h1, k1) = base(z1, w1);
        let (h2, k2) = base(z2, w2);
        prop_assume!((h1 - h2).abs() + (k1 - k2).norm() > 0.05);
        let a = fibre(z1, w1, 300, false);
        let b = fibre(z2, w2, 300, false);
        let ab = gauss_link(&a, &b).unwrap();
        let ba = gauss_link(&b, &a).unwrap();
        prop_assert_eq!(ab.integer, 1);
        prop_assert_eq!(ba.integer, 1);
        let rev = gauss_link(&a.reversed(), &b.reversed()).unwrap();
        prop_assert_eq!(rev.integer, 1);
        let one = gauss_link(&a.reversed(), &b).unwrap();
        prop_assert_eq!(one.integer, -1);
        prop_assume!(pole.iter().map(|x| x * x).sum::<f64>() > 1e-2);
        let pole: Vec4 = normalize4(pole);
        let clearance = a.points.iter().chain(&b.points)
            .map(|q| 1.0 - q.iter().zip(&pole).map(|(x, y)| x * y).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        prop_assume!(clearance > 0.02);
        prop_assert_eq!(gauss_link_with_pole(&a, &b, &pole).unwrap().integer, 1);
    }

    #[test]
    fn winding_link_is_additive(n1 in -3i64..=3, n2 in -3i64..=3, r in 0.2f64..2.0) {
        let binding = ChartTrace::binding(Chart::Z);
        let mk = |n: i64| -> Vec<Vec4> {
            (0..200)
                .map(|i| {
                    let s = TAU * i as f64 / 200.0;
                    psi_inverse(&ChartPoint { tau: 0.3 * s.sin().abs(), zeta: Complex64::from_polar(r, n as f64 * s) })
                })
                .collect()
        };
        let (a, b) = (mk(n1), mk(n2));
        let mut ab = a.clone();
        ab.extend(b.iter().copied());
        let la = winding_link(&a, &binding).unwrap().integer;
        let lb = winding_link(&b, &binding).unwrap().integer;
        prop_assert_eq!(la, n1);
        prop_assert_eq!(winding_link(&ab, &binding).unwrap().integer, la + lb);
    }
}
