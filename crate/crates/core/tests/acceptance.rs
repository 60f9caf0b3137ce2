//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;
use std::time::{Duration, Instant};

use finsler_core::geodesics::{
    equator_geodesic, first_equator_return, integrate_finsler_geodesic, integrate_h_geodesic, spray_oracle,
    GeodesicOptions,
};
use finsler_core::hopf::{
    linking_growth_check, period_dichotomy_scan, random_loop, seed_points, winding_link, Chart, ChartTrace,
    FlowOptions, Harmonic, PerturbedContactForm,
};
use finsler_core::knots::{
    gauss_link, k8_curves, standard_self_linking, utb_self_linking, PolylineKnot,
};
use finsler_core::linearized::{cz_index, first_conjugate_time, jacobi_oracle, jacobi_scalar, ClosedOrbit};
use finsler_core::profile::{meridian_return_bound, PinchFunction, ProfileSurface};
use finsler_core::randers::make_randers;
use finsler_core::shooting::{endpoint_limits, return_grid, sweep_returns, verify_figure_eight, ShootingWindow};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(bool, String), String>;

const PROFILE_TOL: f64 = 1e-11;

fn round_sphere() -> Check {
    let surface = Arc::new(ProfileSurface::round(PROFILE_TOL).map_err(|e| e.to_string())?);
    let (kmin, kmax) = surface.curvature_range();
    let k_err = (kmin - 1.0).abs().max((kmax - 1.0).abs());
    let metric = make_randers(surface.clone(), 1.0).map_err(|e| e.to_string())?;
    let opts = GeodesicOptions::default();
    let mut t_err: f64 = 0.0;
    for phi in [0.3, 0.7, 1.2] {
        let ret = first_equator_return(&metric, phi, &opts).map_err(|e| e.to_string())?;
        t_err = t_err.max((ret.t_return - PI).abs());
    }
    let h = integrate_h_geodesic(&surface, 0.0, 0.0, [0.6, 0.8], PI, &opts).map_err(|e| e.to_string())?;
    let end = h.samples.last().expect("samples");
    let great_circle = end.s.abs().max((end.theta - PI).abs());
    let conj = first_conjugate_time(|_| 1.0, 5.0).map_err(|e| e.to_string())?.unwrap_or(f64::NAN);
    let jac = jacobi_scalar(|_| 1.0, 0.0, 1.0, PI, 201).map_err(|e| e.to_string())?;
    let sin_err = jac.iter().map(|r| (r[1] - r[0].sin()).abs()).fold(0.0, f64::max);
    let ok = k_err < 1e-6 && t_err < 1e-6 && great_circle < 1e-6 && (conj - PI).abs() < 1e-6 && sin_err < 1e-6;
    Ok((
        ok,
        format!(
            "|K-1| = {k_err:.1e}, |T-pi| = {t_err:.1e}, great circle closes to {great_circle:.1e}, \
             first zero {conj:.10}, |f - sin t| = {sin_err:.1e}"
        ),
    ))
}

fn construction_fidelity() -> Check {
    let (radius, k_max) = (0.49, 4.25);
    let pinch = PinchFunction::with_auto_smoothing(radius, k_max).map_err(|e| e.to_string())?;
    let surface = ProfileSurface::solve(pinch, PROFILE_TOL).map_err(|e| e.to_string())?;
    let (kmin, kmax) = surface.curvature_range();
    let lo = pinch.corner() - 0.5 * pinch.smoothing();
    let hi = pinch.corner() + 0.5 * pinch.smoothing();
    let mut equator_err: f64 = 0.0;
    let mut polar_err: f64 = 0.0;
    let mut above: f64 = f64::NEG_INFINITY;
    let (mut n_eq, mut n_pole) = (0, 0);
    for smp in surface.samples() {
        let x = smp.rho * smp.rho;
        if x >= hi {
            equator_err = equator_err.max((smp.k - 1.0).abs());
            n_eq += 1;
        } else if x <= lo {
            polar_err = polar_err.max((smp.k - k_max).abs());
            n_pole += 1;
        }
        above = above.max(smp.rho - radius * smp.s.cos());
    }
    let ok = kmin >= 1.0 - 1e-3
        && kmax <= k_max + 1e-3
        && n_eq > 0
        && n_pole > 0
        && equator_err < 1e-6
        && polar_err < 1e-6
        && above <= 1e-12;
    Ok((
        ok,
        format!(
            "K in [{kmin:.6}, {kmax:.6}], |K-1| = {equator_err:.1e} on {n_eq} equatorial samples, \
             |K-K_max| = {polar_err:.1e} on {n_pole} polar samples, max(rho - R cos s) = {above:.1e}"
        ),
    ))
}

fn return_time_bound() -> Check {
    let radius = 0.49;
    let k_max = 1.01 / (radius * radius);
    let pinch = PinchFunction::with_auto_smoothing(radius, k_max).map_err(|e| e.to_string())?;
    let surface = ProfileSurface::solve(pinch, PROFILE_TOL).map_err(|e| e.to_string())?;
    let two_l = 2.0 * surface.half_length();
    let bound = 1.05 * PI * radius;
    let flag = meridian_return_bound(radius, k_max, 1.05).map_err(|e| e.to_string())?;
    Ok((
        two_l < bound && flag,
        format!("R = {radius}, K_max = 1.01/R^2: 2L = {two_l:.6}, 1.05 pi R = {bound:.6}, 2L/(pi R) = {:.4}", two_l / (PI * radius)),
    ))
}

fn reversibility() -> Check {
    let pinch = PinchFunction::with_auto_smoothing(0.49, 4.25).map_err(|e| e.to_string())?;
    let surface = Arc::new(ProfileSurface::solve(pinch, PROFILE_TOL).map_err(|e| e.to_string())?);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for r in [1.0, 2.0, 3.0] {
        let m = make_randers(surface.clone(), r).map_err(|e| e.to_string())?;
        let rev = m.reversibility();
        let err = (rev.value - rev.predicted).abs().max((rev.predicted - r).abs());
        worst = worst.max(err);
        parts.push(format!("r={r}: {:.9}", rev.value));
    }
    Ok((worst < 1e-6, format!("{} (max error {worst:.1e})", parts.join(", "))))
}

fn geodesic_oracles() -> Check {
    let metric = ShootingWindow::select(2.0, 0.43)
        .and_then(|w| w.build(PROFILE_TOL))
        .map_err(|e| e.to_string())?;
    let l = metric.surface().half_length();
    let opts = GeodesicOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut dev: f64 = 0.0;
    let mut drift: f64 = 0.0;
    let mut truncated = 0;
    for _ in 0..20 {
        let s0 = rng.random_range(-0.6 * l..0.6 * l);
        let th0 = rng.random_range(0.0..TAU);
        let a = rng.random_range(0.0..TAU);
        let rho = metric.surface().rho(s0);
        let v = metric.normalize(s0, [a.cos(), a.sin() / rho]);
        let x = integrate_finsler_geodesic(&metric, s0, th0, v, 3.0, &opts).map_err(|e| e.to_string())?;
        let y = spray_oracle(&metric, s0, th0, v, 3.0, &opts).map_err(|e| e.to_string())?;
        if x.pole_truncated || y.pole_truncated {
            truncated += 1;
        }
        // Velocities are compared in R³: near a pole the coordinate θ̇ is
        // ill-conditioned.
        for (p, q) in x.samples.iter().zip(&y.samples) {
            let (xp, yp) = (x.ambient_point(p), y.ambient_point(q));
            let (xv, yv) = (x.ambient_velocity(p), y.ambient_velocity(q));
            dev = dev.max((p.s - q.s).abs()).max((p.theta - q.theta).abs());
            for i in 0..3 {
                dev = dev.max((xp[i] - yp[i]).abs()).max((xv[i] - yv[i]).abs());
            }
            drift = drift.max((metric.norm(q.s, q.velocity()) - 1.0).abs());
            drift = drift.max((metric.norm(p.s, p.velocity()) - 1.0).abs());
        }
    }
    Ok((
        dev < 1e-6 && drift < 1e-7,
        format!("20 initial conditions: max deviation {dev:.1e}, F drift {drift:.1e}, pole-truncated {truncated}"),
    ))
}

fn jacobi() -> Check {
    let metric = ShootingWindow::select(2.0, 0.43)
        .and_then(|w| w.build(PROFILE_TOL))
        .map_err(|e| e.to_string())?;
    let cmp = jacobi_oracle(&metric, 0.4, 1e-4, 3.0).map_err(|e| e.to_string())?;
    Ok((
        cmp.deviation < 1e-3 && (1.5..=2.5).contains(&cmp.ratio),
        format!(
            "deviation {:.2e} at dphi = 1e-4, {:.2e} at 5e-5, ratio {:.3}",
            cmp.deviation, cmp.deviation_half, cmp.ratio
        ),
    ))
}

fn shooting_endpoints() -> Check {
    let opts = GeodesicOptions::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (r, delta) in [(1.0, 0.24), (2.0, 0.43)] {
        let metric = ShootingWindow::select(r, delta)
            .and_then(|w| w.build(PROFILE_TOL))
            .map_err(|e| e.to_string())?;
        let table = sweep_returns(&metric, &return_grid(&metric, 32), &opts).map_err(|e| e.to_string())?;
        let lim = endpoint_limits(&metric, &table).map_err(|e| e.to_string())?;
        let e0 = (lim.theta_at_zero - lim.theta_at_zero_predicted).abs();
        let e1 = (lim.theta_at_critical - lim.theta_at_critical_predicted).abs();
        ok &= e0 < 1e-2 && e1 < 1e-2;
        parts.push(format!("r={r}: errors {e0:.1e}, {e1:.1e}"));
    }
    // The profile fixture R = 0.49 with r = 1.
    let pinch = PinchFunction::with_auto_smoothing(0.49, 4.25).map_err(|e| e.to_string())?;
    let surface = Arc::new(ProfileSurface::solve(pinch, PROFILE_TOL).map_err(|e| e.to_string())?);
    let metric = make_randers(surface, 1.0).map_err(|e| e.to_string())?;
    let table = sweep_returns(&metric, &return_grid(&metric, 32), &opts).map_err(|e| e.to_string())?;
    let lim = endpoint_limits(&metric, &table).map_err(|e| e.to_string())?;
    let e0 = (lim.theta_at_zero - PI / 0.49).abs();
    let e1 = (lim.theta_at_critical - PI).abs();
    ok &= e0 < 1e-2 && e1 < 1e-2 && lim.theta_at_zero > TAU;
    parts.push(format!("R=0.49, r=1: limit {:.4} (pi/0.49 = {:.4}), {:.4}", lim.theta_at_zero, PI / 0.49, lim.theta_at_critical));
    Ok((ok, parts.join("; ")))
}

fn end_to_end() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (r, delta) in [(1.0, 0.24), (2.0, 0.43)] {
        let window = ShootingWindow::select(r, delta).map_err(|e| e.to_string())?;
        let out = verify_figure_eight(window, PROFILE_TOL).map_err(|e| e.to_string())?;
        let rep = &out.report;
        let good = rep.passed()
            && rep.closure_residual < 1e-6
            && rep.intersections.len() == 1
            && rep.transverse_count == 1
            && rep.curvature_scaled[0] > delta
            && rep.curvature_scaled[1] <= 1.0 + 1e-9
            && (rep.reversibility.value - r).abs() < 1e-6
            && rep.length >= rep.length_bound;
        ok &= good;
        parts.push(format!(
            "r={r}: closure {:.1e}, {} transverse, K/K_max in [{:.4}, {:.4}], rev {:.8}, length {:.4} >= {:.4}",
            rep.closure_residual,
            rep.transverse_count,
            rep.curvature_scaled[0],
            rep.curvature_scaled[1],
            rep.reversibility.value,
            rep.length,
            rep.length_bound
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn cz_sharpness() -> Check {
    let opts = GeodesicOptions::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (r, delta) in [(1.0, 0.24), (2.0, 0.43)] {
        let metric = ShootingWindow::select(r, delta)
            .and_then(|w| w.build(PROFILE_TOL))
            .map_err(|e| e.to_string())?;
        let traj = equator_geodesic(&metric, 2, &opts).map_err(|e| e.to_string())?;
        let orbit = ClosedOrbit::new("equator2", traj, 1e-8).map_err(|e| e.to_string())?;
        let rec = cz_index(&orbit, 1).map_err(|e| e.to_string())?;
        ok &= rec.interval[0] > 0.0 && rec.interval[1] < 1.0 && rec.cz == 1;
        parts.push(format!("r={r}: I = [{:.6}, {:.6}], cz = {}", rec.interval[0], rec.interval[1], rec.cz));
    }
    let round = make_randers(Arc::new(ProfileSurface::round(PROFILE_TOL).map_err(|e| e.to_string())?), 1.0)
        .map_err(|e| e.to_string())?;
    let traj = equator_geodesic(&round, 2, &opts).map_err(|e| e.to_string())?;
    let orbit = ClosedOrbit::new("equator2", traj, 1e-8).map_err(|e| e.to_string())?;
    let rec = cz_index(&orbit, 1).map_err(|e| e.to_string())?;
    ok &= rec.cz == 4;
    parts.push(format!("round: I = [{:.6}, {:.6}], cz = {}", rec.interval[0], rec.interval[1], rec.cz));
    Ok((ok, parts.join("; ")))
}

fn knot_invariants() -> Check {
    let e = |e: finsler_core::Error| e.to_string();
    let a = PolylineKnot::from_fn(400, |t| [t.cos(), t.sin(), 0.0, 0.0]).map_err(e)?;
    let b = PolylineKnot::from_fn(400, |t| [0.0, 0.0, t.cos(), t.sin()]).map_err(e)?;
    let hopf = gauss_link(&a, &b).map_err(e)?;
    let sl_p0 = standard_self_linking(&a, 1e-2).map_err(e)?;
    let k8 = k8_curves(512).map_err(e)?;
    let sl_gamma = standard_self_linking(&k8.lift, 1e-2).map_err(e)?;
    let sl_utb = utb_self_linking(&k8.base, &k8.tangent, &k8.lift, 1e-2).map_err(e)?;
    let ok = hopf.integer == 1 && hopf.residual < 0.05 && sl_p0 == -1 && sl_gamma == -1 && sl_utb == -1;
    Ok((
        ok,
        format!(
            "lk(fibres) = {} (residual {:.1e}), sl(P0) = {sl_p0}, sl(gamma_1) = {sl_gamma}, sl(Gamma_1) = {sl_utb}",
            hopf.integer, hopf.residual
        ),
    ))
}

fn perturbed_hopf() -> Check {
    let e = |e: finsler_core::Error| e.to_string();
    let form = PerturbedContactForm::new(1.0, 0.01, Harmonic::Quadratic).map_err(e)?;
    let opts = FlowOptions::default();
    let scan = period_dichotomy_scan(&form, 20.0, 0.05, &seed_points(16, 8, 7), &opts).map_err(e)?;
    let short = scan
        .orbits
        .iter()
        .find(|o| o.chart == Chart::Z && o.returns == 1)
        .ok_or("no short orbit in the standard chart")?;
    let trace = ChartTrace::from_orbit(&form, short, 2048, &opts).map_err(e)?;
    let growth = linking_growth_check(&form, &trace, short.period, Complex64::new(0.1, 0.0), 50, 0.5, &opts).map_err(e)?;
    let fibre = PolylineKnot::from_fn(400, |t| [t.cos(), t.sin(), 0.0, 0.0]).map_err(e)?;
    let binding = ChartTrace::binding(Chart::Z);
    let mut agree = 0;
    for seed in 0..10 {
        let (pts, _) = random_loop(seed, 600);
        let w = winding_link(&pts, &binding).map_err(e)?;
        let g = gauss_link(&PolylineKnot::new(pts).map_err(e)?, &fibre).map_err(e)?;
        agree += usize::from(w.integer == g.integer);
    }
    let periods: Vec<String> = scan.histogram.iter().map(|(p, c)| format!("{p:.5}x{c}")).collect();
    let ok = !scan.orbits.is_empty()
        && scan.gap_is_empty()
        && scan.orbits.iter().all(|o| (o.period - PI).abs() <= 0.05 || o.period > 20.0)
        && growth.rate_bound_holds(1.5)
        && growth.revolutions >= 0.75 * growth.traversals
        && agree == 10;
    Ok((
        ok,
        format!(
            "periods [{}], eps~ = {:.4}, gap violations {}, inf rate {:.4} over {:.1} traversals, \
             winding = gauss on {agree}/10 loops",
            periods.join(", "),
            scan.epsilon_tilde,
            scan.gap_violations.len(),
            growth.min_rate,
            growth.traversals
        ),
    ))
}

fn main() {
    let criteria: Vec<(&str, u64, fn() -> Check)> = vec![
        ("round-sphere regression", 1, round_sphere),
        ("construction fidelity", 5, construction_fidelity),
        ("return-time bound", 5, return_time_bound),
        ("reversibility", 10, reversibility),
        ("geodesic oracle equivalence", 30, geodesic_oracles),
        ("Jacobi oracle", 10, jacobi),
        ("shooting endpoints", 60, shooting_endpoints),
        ("closed figure-eight end to end", 300, end_to_end),
        ("index sharpness", 10, cz_sharpness),
        ("knot invariants", 60, knot_invariants),
        ("perturbed Hopf flow", 300, perturbed_hopf),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let (pass, detail) = match result {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(err) => (false, format!("error: {err}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2} {name}: {detail} ({:.2} s, budget {budget} s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
