use std::path::Path;

use finsler_core::geodesics::{equator_geodesic, integrate_finsler_geodesic, integrate_h_geodesic, GeodesicOptions};
use finsler_core::hopf::{period_dichotomy_scan, seed_points, FlowOptions, PerturbedContactForm, PERTURBATION_THRESHOLD};
use finsler_core::knots::{
    gauss_link, k8_curves, lift_contractibility_tag, standard_self_linking, turning_number, utb_self_linking,
    PolylineKnot, Vec4,
};
use finsler_core::linearized::{cz_index, ClosedOrbit};
use finsler_core::ode::Tolerance;
use finsler_core::profile::{PinchFunction, ProfileSurface};
use finsler_core::shooting::{verify_figure_eight, ShootingWindow};
use serde_json::json;

use crate::config::{
    parse_form, CzParams, FixtureParams, GeodesicParams, HopfParams, KnotParams, LinkParams, OrbitName,
    SurfaceParams, WindowParams,
};
use crate::{fixtures, Artifacts, ExperimentConfig, Failure, Kind};

const TRAJECTORY_HEADER: [&str; 8] = ["t", "s", "theta", "sdot", "thetadot", "x", "y", "z"];
const ORBIT_HEADER: [&str; 5] = ["t", "x1", "x2", "x3", "x4"];

/// A validated experiment, ready to run.
pub enum Plan {
    Surface(PinchFunction, Option<f64>),
    Geodesic(GeodesicParams),
    Shoot(ShootingWindow),
    Cz(CzParams, Option<WindowParams>),
    Knots(KnotParams),
    Link(PolylineKnot, PolylineKnot),
    Hopf(HopfParams, PerturbedContactForm),
    Fixtures(FixtureParams),
}

pub fn plan(config: &ExperimentConfig) -> Result<Plan, Failure> {
    let schema = |e: finsler_core::Error| Failure::Schema(e.to_string());
    Ok(match config.kind {
        Kind::Surface => {
            let p: SurfaceParams = config.params()?;
            let pinch = match p.smoothing {
                Some(w) => PinchFunction::new(p.radius, p.k_max, w),
                None => PinchFunction::with_auto_smoothing(p.radius, p.k_max),
            }
            .map_err(schema)?;
            if let Some(t) = p.tol {
                if !(t.is_finite() && t > 0.0) {
                    return Err(Failure::Schema(format!("tol must be positive, got {t}")));
                }
            }
            Plan::Surface(pinch, p.tol)
        }
        Kind::Geodesic => {
            let p: GeodesicParams = config.params()?;
            p.metric.resolve()?;
            if !(p.horizon.is_finite() && p.horizon > 0.0 && p.phi.is_finite()) {
                return Err(Failure::Schema("phi must be finite and horizon positive".into()));
            }
            if p.dt.is_some_and(|dt| !(dt > 0.0)) {
                return Err(Failure::Schema("dt must be positive".into()));
            }
            Plan::Geodesic(p)
        }
        Kind::Shoot => {
            let p: WindowParams = config.params()?;
            Plan::Shoot(p.window()?)
        }
        Kind::Cz => {
            let p: CzParams = config.params()?;
            let window = p.metric.resolve()?;
            if let Some(w) = &window {
                w.window()?;
            }
            if p.orbit == OrbitName::Figure8 && window.is_none() {
                return Err(Failure::Schema("the round sphere has no figure-eight orbit".into()));
            }
            if p.cover == 0 {
                return Err(Failure::Schema("cover must be at least 1".into()));
            }
            Plan::Cz(p, window)
        }
        Kind::Knots => {
            let p: KnotParams = config.params()?;
            if p.samples < 64 || !(p.eps > 0.0 && p.eps < 0.1) {
                return Err(Failure::Schema("knots need samples >= 64 and 0 < eps < 0.1".into()));
            }
            Plan::Knots(p)
        }
        Kind::Link => {
            let p: LinkParams = config.params()?;
            Plan::Link(read_knot(&p.a)?, read_knot(&p.b)?)
        }
        Kind::Hopf => {
            let p: HopfParams = config.params()?;
            let form = parse_form(&p.f)?;
            if !(p.cap > std::f64::consts::PI && p.band > 0.0 && p.samples >= 16) {
                return Err(Failure::Schema("hopf needs cap > pi, band > 0 and samples >= 16".into()));
            }
            Plan::Hopf(p, form)
        }
        Kind::Fixtures => Plan::Fixtures(config.params()?),
    })
}

impl Plan {
    pub fn name(&self) -> &'static str {
        match self {
            Plan::Surface(..) => "surface",
            Plan::Geodesic(_) => "geodesic",
            Plan::Shoot(_) => "shoot",
            Plan::Cz(..) => "cz",
            Plan::Knots(_) => "knots",
            Plan::Link(..) => "link",
            Plan::Hopf(..) => "hopf",
            Plan::Fixtures(_) => "fixtures",
        }
    }

    /// Run the experiment, filling `art`; returns the failed checks.
    pub fn execute(&self, config: &ExperimentConfig, art: &mut Artifacts) -> Result<Vec<String>, Failure> {
        let tol = config.tol.profile();
        match self {
            Plan::Surface(pinch, t) => surface(pinch, t.unwrap_or(tol), art),
            Plan::Geodesic(p) => geodesic(p, tol, geodesic_options(config), art),
            Plan::Shoot(w) => shoot(*w, tol, art),
            Plan::Cz(p, w) => cz(p, w.as_ref(), tol, art),
            Plan::Knots(p) => knots(p, art),
            Plan::Link(a, b) => {
                let l = gauss_link(a, b)?;
                art.json("link.json", &l)?;
                Ok(Vec::new())
            }
            Plan::Hopf(p, form) => hopf(p, form, config, art),
            Plan::Fixtures(p) => fixtures::regenerate(p, tol, art),
        }
    }
}

fn geodesic_options(config: &ExperimentConfig) -> GeodesicOptions {
    let mut opts = GeodesicOptions::default();
    if let Some(rtol) = config.tol.ode {
        opts.tol = Tolerance::new(rtol, rtol * 1e-2);
    }
    opts
}

fn flow_options(config: &ExperimentConfig) -> FlowOptions {
    let mut opts = FlowOptions::default();
    if let Some(rtol) = config.tol.ode {
        opts.tol = Tolerance::new(rtol, rtol * 1e-2);
    }
    opts
}

fn surface(pinch: &PinchFunction, tol: f64, art: &mut Artifacts) -> Result<Vec<String>, Failure> {
    let surface = ProfileSurface::solve(*pinch, tol)?;
    let rows: Vec<[f64; 4]> = surface.samples().iter().map(|r| [r.s, r.rho, r.rhodot, r.k]).collect();
    let (k_lo, k_hi) = surface.curvature_range();
    art.csv("surface.csv", ["s", "rho", "rhodot", "K"], &rows)?;
    art.json(
        "surface.json",
        &json!({
            "R": pinch.radius(),
            "Kmax": pinch.k_max(),
            "smoothing": pinch.smoothing(),
            "tol": tol,
            "half_length": surface.half_length(),
            "curvature_range": [k_lo, k_hi],
            "first_integral_residual": surface.first_integral_residual(),
            "quadrature_identity_residual": surface.quadrature_identity_residual(),
            "rows": rows.len(),
        }),
    )?;
    Ok(Vec::new())
}

fn geodesic(p: &GeodesicParams, tol: f64, mut opts: GeodesicOptions, art: &mut Artifacts) -> Result<Vec<String>, Failure> {
    let metric = p.metric.build(tol)?;
    if let Some(dt) = p.dt {
        opts.dt = dt;
    }
    let traj = if p.riemannian {
        let rho = metric.surface().radius();
        let v = [p.phi.cos(), p.phi.sin() / rho];
        integrate_h_geodesic(metric.surface(), 0.0, 0.0, v, p.horizon, &opts)?
    } else {
        integrate_finsler_geodesic(&metric, 0.0, 0.0, metric.unit_vector_at_angle(p.phi), p.horizon, &opts)?
    };
    let speed_drift = traj
        .samples
        .iter()
        .map(|st| {
            let speed = if p.riemannian {
                let rho = metric.surface().rho(st.s);
                (st.sdot * st.sdot + rho * rho * st.thetadot * st.thetadot).sqrt()
            } else {
                metric.norm(st.s, st.velocity())
            };
            (speed - 1.0).abs()
        })
        .fold(0.0, f64::max);
    art.csv("trajectory.csv", TRAJECTORY_HEADER, &traj.rows())?;
    art.json(
        "geodesic.json",
        &json!({
            "kind": traj.kind,
            "phi": p.phi,
            "duration": traj.duration(),
            "pole_truncated": traj.pole_truncated,
            "samples": traj.samples.len(),
            "final": traj.samples.last(),
            "speed_drift": speed_drift,
        }),
    )?;
    Ok(Vec::new())
}

fn shoot(window: ShootingWindow, tol: f64, art: &mut Artifacts) -> Result<Vec<String>, Failure> {
    let out = verify_figure_eight(window, tol)?;
    let table: Vec<[f64; 3]> = out.report.table.iter().map(|r| [r.phi, r.t_phi, r.theta_adv]).collect();
    art.json("report.json", &out.report)?;
    art.csv("sweep.csv", ["phi", "T_phi", "theta_adv"], &table)?;
    art.csv("figure8.csv", TRAJECTORY_HEADER, &out.geodesic.orbit.trajectory.rows())?;
    Ok(out.report.failures.clone())
}

fn cz(p: &CzParams, window: Option<&WindowParams>, tol: f64, art: &mut Artifacts) -> Result<Vec<String>, Failure> {
    let opts = GeodesicOptions::default();
    let orbit = match (p.orbit, window) {
        (OrbitName::Figure8, Some(w)) => verify_figure_eight(w.window()?, tol)?.geodesic.orbit,
        (OrbitName::Figure8, None) => unreachable!("rejected while planning"),
        (name, _) => {
            let metric = p.metric.build(tol)?;
            let (cover, id) = if name == OrbitName::Equator1 { (1, "equator1") } else { (2, "equator2") };
            ClosedOrbit::new(id, equator_geodesic(&metric, cover, &opts)?, 1e-8)?
        }
    };
    let rec = cz_index(&orbit, p.cover)?;
    art.json("cz.json", &rec)?;
    Ok(Vec::new())
}

fn knots(p: &KnotParams, art: &mut Artifacts) -> Result<Vec<String>, Failure> {
    let fibre_a = PolylineKnot::from_fn(400, |t| [t.cos(), t.sin(), 0.0, 0.0])?;
    let fibre_b = PolylineKnot::from_fn(400, |t| [0.0, 0.0, t.cos(), t.sin()])?;
    let hopf = gauss_link(&fibre_a, &fibre_b)?;
    let sl_fibre = standard_self_linking(&fibre_a, p.eps)?;
    let k8 = k8_curves(p.samples)?;
    let sl_lift = standard_self_linking(&k8.lift, p.eps)?;
    let sl_utb = utb_self_linking(&k8.base, &k8.tangent, &k8.lift, p.eps)?;
    let turning = turning_number(&k8.base, &k8.tangent)?;
    let contractible = lift_contractibility_tag(&k8.base, &k8.tangent)?;
    let base: Vec<[f64; 6]> = k8
        .base
        .iter()
        .zip(&k8.tangent)
        .map(|(x, v)| [x[0], x[1], x[2], v[0], v[1], v[2]])
        .collect();
    art.csv("k8_base.csv", ["x", "y", "z", "vx", "vy", "vz"], &base)?;
    art.csv("k8_lift.csv", ["x1", "x2", "x3", "x4"], &k8.lift.points)?;
    art.json(
        "knots.json",
        &json!({
            "hopf_fibres": hopf,
            "sl_fibre": sl_fibre,
            "sl_lift": sl_lift,
            "sl_unit_tangent": sl_utb,
            "turning_number": turning,
            "lift_contractible": contractible,
            "eps": p.eps,
            "samples": p.samples,
        }),
    )?;
    let mut failures = Vec::new();
    if hopf.integer != 1 {
        failures.push(format!("Hopf fibres link {} times", hopf.integer));
    }
    for (name, v) in [("fibre", sl_fibre), ("lift", sl_lift), ("unit tangent", sl_utb)] {
        if v != -1 {
            failures.push(format!("self-linking of the {name} is {v}"));
        }
    }
    Ok(failures)
}

fn hopf(p: &HopfParams, form: &PerturbedContactForm, config: &ExperimentConfig, art: &mut Artifacts) -> Result<Vec<String>, Failure> {
    let opts = flow_options(config);
    let seeds = seed_points(p.grid, p.seeds, config.seed);
    let scan = period_dichotomy_scan(form, p.cap, p.band, &seeds, &opts)?;
    art.json("scan.json", &scan)?;
    for (i, orbit) in scan.orbits.iter().enumerate() {
        let rows: Vec<[f64; 5]> = orbit
            .samples(form, p.samples, 1, &opts)?
            .into_iter()
            .map(|(t, x)| [t, x[0], x[1], x[2], x[3]])
            .collect();
        art.csv(&format!("orbit_{i:03}.csv"), ORBIT_HEADER, &rows)?;
    }
    let mut failures = Vec::new();
    if scan.c2_norm < PERTURBATION_THRESHOLD && !scan.gap_is_empty() {
        failures.push(format!(
            "{} orbits with period outside the band below the cap",
            scan.gap_violations.len()
        ));
    }
    Ok(failures)
}

/// Vertices from a CSV file with columns `x1..x4` (other columns ignored),
/// or exactly four unnamed columns.
pub fn read_knot(path: &Path) -> Result<PolylineKnot, Failure> {
    let bad = |m: String| Failure::Schema(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let named: Option<Vec<usize>> = ["x1", "x2", "x3", "x4"]
        .iter()
        .map(|h| headers.iter().position(|c| c.trim() == *h))
        .collect();
    let (cols, mut points) = match named {
        Some(cols) => (cols, Vec::new()),
        None if headers.len() == 4 => {
            // No recognised header: treat the first line as data.
            let first = parse_row(&headers, &[0, 1, 2, 3]).map_err(bad)?;
            (vec![0, 1, 2, 3], vec![first])
        }
        None => return Err(bad("expected columns x1,x2,x3,x4".into())),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        points.push(parse_row(&rec, &cols).map_err(bad)?);
    }
    PolylineKnot::new(points).map_err(|e| bad(e.to_string()))
}

fn parse_row(rec: &csv::StringRecord, cols: &[usize]) -> Result<Vec4, String> {
    let mut p = [0.0; 4];
    for (k, &c) in cols.iter().enumerate() {
        let field = rec.get(c).ok_or("short row")?;
        p[k] = field.trim().parse().map_err(|_| format!("not a number: {field:?}"))?;
    }
    Ok(p)
}
