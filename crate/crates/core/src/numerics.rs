//! Small numerical helpers shared across modules.

/// Brent's method on a bracket `[a, b]` with known end values.
///
/// Returns `None` when the end values do not bracket a root.
pub fn brent<F>(f: &mut F, a: f64, b: f64, fa: f64, fb: f64, xtol: f64, max_iter: usize) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let (mut a, mut b, mut c) = (a, b, b);
    let (mut fa, mut fb, mut fc) = (fa, fb, fb);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let q0 = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * q0 * (q0 - r) - (b - a) * (r - 1.0));
                q = (q0 - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Some(b)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of a unimodal function on `[a, b]`.
pub fn golden_max<F>(f: &mut F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > xtol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    let best = [(x, fx), (x1, f1), (x2, f2)]
        .into_iter()
        .fold((x, fx), |acc, p| if p.1 > acc.1 { p } else { acc });
    best
}

/// Quintic Hermite interpolation on an interval of length `h`.
///
/// `left` and `right` hold `(value, first derivative, second derivative)` at
/// the ends; `u` is the local coordinate in `[0, 1]`. Returns value and the
/// first two derivatives with respect to the global variable.
pub fn quintic_hermite(h: f64, left: [f64; 3], right: [f64; 3], u: f64) -> [f64; 3] {
    let u2 = u * u;
    let u3 = u2 * u;
    let u4 = u3 * u;
    let u5 = u4 * u;
    let b = [
        1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5,
        u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5,
        0.5 * u2 - 1.5 * u3 + 1.5 * u4 - 0.5 * u5,
        0.5 * u3 - u4 + 0.5 * u5,
        -4.0 * u3 + 7.0 * u4 - 3.0 * u5,
        10.0 * u3 - 15.0 * u4 + 6.0 * u5,
    ];
    let db = [
        -30.0 * u2 + 60.0 * u3 - 30.0 * u4,
        1.0 - 18.0 * u2 + 32.0 * u3 - 15.0 * u4,
        u - 4.5 * u2 + 6.0 * u3 - 2.5 * u4,
        1.5 * u2 - 4.0 * u3 + 2.5 * u4,
        -12.0 * u2 + 28.0 * u3 - 15.0 * u4,
        30.0 * u2 - 60.0 * u3 + 30.0 * u4,
    ];
    let ddb = [
        -60.0 * u + 180.0 * u2 - 120.0 * u3,
        -36.0 * u + 96.0 * u2 - 60.0 * u3,
        1.0 - 9.0 * u + 18.0 * u2 - 10.0 * u3,
        3.0 * u - 12.0 * u2 + 10.0 * u3,
        -24.0 * u + 84.0 * u2 - 60.0 * u3,
        60.0 * u - 180.0 * u2 + 120.0 * u3,
    ];
    let w = [
        left[0],
        h * left[1],
        h * h * left[2],
        h * h * right[2],
        h * right[1],
        right[0],
    ];
    let dot = |c: &[f64; 6]| c.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>();
    [dot(&b), dot(&db) / h, dot(&ddb) / (h * h)]
}

/// Cubic Hermite interpolation; returns value and derivative.
pub fn cubic_hermite(h: f64, left: [f64; 2], right: [f64; 2], u: f64) -> [f64; 2] {
    let u2 = u * u;
    let u3 = u2 * u;
    let v = (2.0 * u3 - 3.0 * u2 + 1.0) * left[0]
        + (u3 - 2.0 * u2 + u) * h * left[1]
        + (-2.0 * u3 + 3.0 * u2) * right[0]
        + (u3 - u2) * h * right[1];
    let d = (6.0 * u2 - 6.0 * u) * left[0] / h
        + (3.0 * u2 - 4.0 * u + 1.0) * left[1]
        + (-6.0 * u2 + 6.0 * u) * right[0] / h
        + (3.0 * u2 - 2.0 * u) * right[1];
    [v, d]
}

/// Value at `x = 0` of the interpolating polynomial through `(xs, ys)`.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let mut p = ys.to_vec();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (xs[i + k] * p[i] - xs[i] * p[i + 1]) / (xs[i + k] - xs[i]);
        }
    }
    p[0]
}

/// Composite Simpson rule on uniformly spaced samples (trapezoid on a
/// trailing odd interval).
pub fn simpson(ys: &[f64], h: f64) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let m = if (n - 1) % 2 == 0 { n } else { n - 1 };
    let mut acc = 0.0;
    if m >= 3 {
        acc += ys[0] + ys[m - 1];
        for (i, y) in ys.iter().enumerate().take(m - 1).skip(1) {
            acc += if i % 2 == 1 { 4.0 * y } else { 2.0 * y };
        }
        acc *= h / 3.0;
    }
    if m != n {
        acc += 0.5 * h * (ys[n - 2] + ys[n - 1]);
    }
    acc
}

/// Remove `2π` jumps from a sequence of angles.
pub fn unwrap_angles(angles: &[f64]) -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    let mut out = Vec::with_capacity(angles.len());
    let mut offset = 0.0;
    for (i, &a) in angles.iter().enumerate() {
        if i > 0 {
            let prev = angles[i - 1];
            let mut d = a - prev;
            while d > std::f64::consts::PI {
                d -= tau;
                offset -= tau;
            }
            while d < -std::f64::consts::PI {
                d += tau;
                offset += tau;
            }
        }
        out.push(a + offset);
    }
    out
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_pi(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut r = a.rem_euclid(tau);
    if r > std::f64::consts::PI {
        r -= tau;
    }
    r
}

/// Pairwise (tree) summation; the result is independent of thread count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (l, r) = xs.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

/// First derivative of uniformly spaced samples: five-point central stencil
/// in the interior, one-sided stencils of matching order near the ends.
pub fn differentiate_uniform(ys: &[f64], h: f64) -> Vec<f64> {
    let n = ys.len();
    assert!(n >= 5, "need at least five samples");
    let mut d = vec![0.0; n];
    for i in 0..n {
        d[i] = if i >= 2 && i + 2 < n {
            (ys[i - 2] - 8.0 * ys[i - 1] + 8.0 * ys[i + 1] - ys[i + 2]) / (12.0 * h)
        } else if i < 2 {
            let y = &ys[i..i + 5];
            (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / (12.0 * h)
        } else {
            let y = &ys[i - 4..=i];
            (25.0 * y[4] - 48.0 * y[3] + 36.0 * y[2] - 16.0 * y[1] + 3.0 * y[0]) / (12.0 * h)
        };
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cosine_root() {
        let mut f = |x: f64| x.cos();
        let r = brent(&mut f, 1.0, 2.0, 1f64.cos(), 2f64.cos(), 1e-15, 100).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }

    #[test]
    fn brent_rejects_non_bracket() {
        let mut f = |x: f64| x * x + 1.0;
        assert!(brent(&mut f, -1.0, 1.0, 2.0, 2.0, 1e-12, 10).is_none());
    }

    #[test]
    fn golden_section_locates_maximum() {
        let mut f = |x: f64| -(x - 0.3).powi(2);
        let (x, _) = golden_max(&mut f, 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn quintic_hermite_reproduces_quintic() {
        let p = |x: f64| [x.powi(5) - 2.0 * x.powi(3) + x, 5.0 * x.powi(4) - 6.0 * x * x + 1.0, 20.0 * x.powi(3) - 12.0 * x];
        let (a, b) = (0.2, 0.7);
        for k in 0..=10 {
            let x = a + (b - a) * k as f64 / 10.0;
            let v = quintic_hermite(b - a, p(a), p(b), (x - a) / (b - a));
            let e = p(x);
            for i in 0..3 {
                assert!((v[i] - e[i]).abs() < 1e-12, "{i}: {} vs {}", v[i], e[i]);
            }
        }
    }

    #[test]
    fn cubic_hermite_reproduces_cubic() {
        let p = |x: f64| [x.powi(3) - x, 3.0 * x * x - 1.0];
        let v = cubic_hermite(0.5, p(1.0), p(1.5), 0.4);
        let e = p(1.2);
        assert!((v[0] - e[0]).abs() < 1e-13 && (v[1] - e[1]).abs() < 1e-12);
    }

    #[test]
    fn extrapolation_of_quadratic_is_exact() {
        let xs = [0.1, 0.2, 0.4];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + 2.0 * x - x * x).collect();
        assert!((extrapolate_to_zero(&xs, &ys) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn simpson_integrates_sine() {
        let n = 201;
        let h = std::f64::consts::PI / (n - 1) as f64;
        let ys: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin()).collect();
        assert!((simpson(&ys, h) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn unwrap_follows_winding() {
        let raw: Vec<f64> = (0..100).map(|i| wrap_pi(i as f64 * 0.2)).collect();
        let un = unwrap_angles(&raw);
        assert!((un[99] - 99.0 * 0.2).abs() < 1e-12);
    }

    #[test]
    fn five_point_derivative() {
        let h = 0.01;
        let ys: Vec<f64> = (0..50).map(|i| (i as f64 * h).exp()).collect();
        let d = differentiate_uniform(&ys, h);
        for (i, di) in d.iter().enumerate() {
            assert!((di - (i as f64 * h).exp()).abs() < 1e-7, "{i}");
        }
    }
}
