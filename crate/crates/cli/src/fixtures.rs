//! Regression fixtures. Each file carries a provenance tag and the oracle
//! pairs that were cross-checked while producing it.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use finsler_core::geodesics::{equator_geodesic, first_equator_return, GeodesicOptions};
use finsler_core::hopf::{period_dichotomy_scan, seed_points, winding_link, Chart, ChartTrace, FlowOptions, Harmonic, PerturbedContactForm};
use finsler_core::knots::{gauss_link, k8_curves, standard_self_linking, utb_self_linking, PolylineKnot};
use finsler_core::linearized::{cz_index, ClosedOrbit};
use finsler_core::profile::ProfileSurface;
use finsler_core::randers::{make_randers, RandersMetric};
use finsler_core::shooting::{verify_figure_eight, ShootingWindow};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::FixtureParams;
use crate::{Artifacts, Failure};

/// Relative tolerance for comparing regenerated floats with committed ones.
pub const COMPARE_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePair {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub tol: f64,
}

impl OraclePair {
    fn new(name: &str, a: f64, b: f64, tol: f64) -> Self {
        Self {
            name: name.to_owned(),
            a,
            b,
            tol,
        }
    }

    pub fn agrees(&self) -> bool {
        (self.a - self.b).abs() <= self.tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    /// `paper`, `trivial` or `derived:<oracle>`.
    pub provenance: String,
    pub values: Value,
    pub oracles: Vec<OraclePair>,
}

fn fixture(name: &str, provenance: &str, values: Value, oracles: Vec<OraclePair>) -> Fixture {
    Fixture {
        name: name.to_owned(),
        provenance: provenance.to_owned(),
        values,
        oracles,
    }
}

fn round_metric(tol: f64) -> finsler_core::Result<RandersMetric> {
    make_randers(Arc::new(ProfileSurface::round(tol)?), 1.0)
}

fn round_sphere(tol: f64) -> finsler_core::Result<Fixture> {
    let metric = round_metric(tol)?;
    let ret = first_equator_return(&metric, 0.7, &GeodesicOptions::default())?;
    let (k_lo, k_hi) = metric.surface().curvature_range();
    let k_dev = (k_lo - 1.0).abs().max((k_hi - 1.0).abs());
    Ok(fixture(
        "round_sphere",
        "trivial",
        json!({
            "t_return": ret.t_return,
            "theta_adv": ret.theta_adv,
            "curvature": [k_lo, k_hi],
            "eta": metric.eta(),
        }),
        vec![
            OraclePair::new("return time vs pi", ret.t_return, PI, 1e-8),
            OraclePair::new("return angle vs pi", ret.theta_adv, PI, 1e-8),
            OraclePair::new("curvature vs 1", k_dev, 0.0, 1e-6),
            OraclePair::new("wind vs 0", metric.eta(), 0.0, 0.0),
        ],
    ))
}

fn figure_eight(name: &str, r: f64, delta: f64, tol: f64) -> finsler_core::Result<Fixture> {
    let window = ShootingWindow::select(r, delta)?;
    let rep = verify_figure_eight(window, tol)?.report;
    Ok(fixture(
        name,
        "derived:reflection-vs-direct",
        json!({
            "r": r,
            "delta": delta,
            "R": window.radius,
            "Kmax": window.k_max,
            "phi_star": rep.phi_star,
            "half_period": rep.half_period,
            "length": rep.length,
            "length_bound": rep.length_bound,
            "transverse_count": rep.transverse_count,
            "theta_adv_at_zero": rep.limits.theta_at_zero,
            "theta_adv_at_critical": rep.limits.theta_at_critical,
        }),
        vec![
            OraclePair::new("reflected vs direct arc", rep.symmetry_residual, 0.0, 1e-6),
            OraclePair::new("closure of direct integration", rep.closure_residual, 0.0, 1e-6),
            OraclePair::new(
                "extrapolated vs predicted angle at 0",
                rep.limits.theta_at_zero,
                rep.limits.theta_at_zero_predicted,
                1e-2,
            ),
            OraclePair::new(
                "extrapolated vs predicted angle at critical",
                rep.limits.theta_at_critical,
                rep.limits.theta_at_critical_predicted,
                1e-2,
            ),
        ],
    ))
}

fn rotation(tol: f64) -> finsler_core::Result<Fixture> {
    let opts = GeodesicOptions::default();
    let mut values = serde_json::Map::new();
    let mut oracles = Vec::new();
    let metrics = [
        ("window-r1", ShootingWindow::select(1.0, 0.24)?.build(tol)?),
        ("window-r2", ShootingWindow::select(2.0, 0.43)?.build(tol)?),
        ("round", round_metric(tol)?),
    ];
    for (name, metric) in &metrics {
        let once = ClosedOrbit::new("equator1", equator_geodesic(metric, 1, &opts)?, 1e-8)?;
        let twice = ClosedOrbit::new("equator2", equator_geodesic(metric, 2, &opts)?, 1e-8)?;
        let a = cz_index(&once, 2)?;
        let b = cz_index(&twice, 1)?;
        values.insert(
            (*name).into(),
            json!({ "I": b.interval, "cz": b.cz, "T": b.period }),
        );
        oracles.push(OraclePair::new(&format!("{name}: lower end, cover 2 vs doubled orbit"), a.interval[0], b.interval[0], 1e-6));
        oracles.push(OraclePair::new(&format!("{name}: upper end, cover 2 vs doubled orbit"), a.interval[1], b.interval[1], 1e-6));
    }
    Ok(fixture("rotation", "derived:cover-additivity", Value::Object(values), oracles))
}

fn linking() -> finsler_core::Result<Fixture> {
    let a = PolylineKnot::from_fn(400, |t| [t.cos(), t.sin(), 0.0, 0.0])?;
    let b = PolylineKnot::from_fn(400, |t| [0.0, 0.0, t.cos(), t.sin()])?;
    // A generic fibre avoids the excluded fibre of the chart.
    let c = PolylineKnot::from_fn(400, |t| {
        let (u, v) = (0.6f64.cos(), 0.6f64.sin());
        [u * t.cos(), u * t.sin(), v * (t + 1.0).cos(), v * (t + 1.0).sin()]
    })?;
    let gauss = gauss_link(&c, &a)?;
    let winding = winding_link(&c.points, &ChartTrace::binding(Chart::Z))?;
    let k8 = k8_curves(512)?;
    let sl_lift = standard_self_linking(&k8.lift, 1e-2)?;
    let sl_utb = utb_self_linking(&k8.base, &k8.tangent, &k8.lift, 1e-2)?;
    Ok(fixture(
        "linking",
        "paper",
        json!({
            "hopf_fibres": gauss_link(&a, &b)?.integer,
            "generic_fibre": gauss.integer,
            "sl_fibre": standard_self_linking(&a, 1e-2)?,
            "sl_lift": sl_lift,
            "sl_unit_tangent": sl_utb,
        }),
        vec![
            OraclePair::new("Gauss integral vs chart winding", gauss.value, winding.value, 0.05),
            OraclePair::new("contact framing vs unit tangent push-off", sl_lift as f64, sl_utb as f64, 0.0),
        ],
    ))
}

fn perturbed_hopf(seed: u64) -> finsler_core::Result<Fixture> {
    let form = PerturbedContactForm::new(1.0, 0.01, Harmonic::Quadratic)?;
    let scan = period_dichotomy_scan(&form, 10.0, 0.05, &seed_points(4, 2, seed), &FlowOptions::default())?;
    let oracles = scan
        .orbits
        .iter()
        .enumerate()
        .map(|(i, o)| OraclePair::new(&format!("orbit {i}: action vs period"), o.action, o.period, 1e-8))
        .collect();
    let periods: Vec<f64> = scan.histogram.iter().map(|(p, _)| *p).collect();
    Ok(fixture(
        "hopf_perturbed",
        "derived:action-vs-period",
        json!({
            "periods": periods,
            "epsilon_tilde": scan.epsilon_tilde,
            "c2_norm": scan.c2_norm,
            "gap_violations": scan.gap_violations.len(),
        }),
        oracles,
    ))
}

/// Recompute every fixture. Oracle disagreement is a hard error; mismatches
/// against `params.check` are reported as failures.
pub fn regenerate(params: &FixtureParams, tol: f64, art: &mut Artifacts) -> Result<Vec<String>, Failure> {
    let all = vec![
        round_sphere(tol)?,
        figure_eight("figure_eight_r1", 1.0, 0.24, tol)?,
        figure_eight("figure_eight_r2", 2.0, 0.43, tol)?,
        rotation(tol)?,
        linking()?,
        perturbed_hopf(7)?,
    ];
    let disagreements: Vec<String> = all
        .iter()
        .flat_map(|f| {
            f.oracles
                .iter()
                .filter(|o| !o.agrees())
                .map(move |o| format!("{}: {} ({} vs {}, tol {})", f.name, o.name, o.a, o.b, o.tol))
        })
        .collect();
    if !disagreements.is_empty() {
        return Err(Failure::Experiment(format!("oracle disagreement: {}", disagreements.join("; "))));
    }
    let mut failures = Vec::new();
    for f in &all {
        art.json(&format!("{}.json", f.name), f)?;
        if let Some(dir) = &params.check {
            failures.extend(compare_with(dir, f));
        }
    }
    Ok(failures)
}

fn compare_with(dir: &Path, f: &Fixture) -> Vec<String> {
    let path = dir.join(format!("{}.json", f.name));
    let committed: Fixture = match std::fs::read_to_string(&path)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(c) => c,
        Err(e) => return vec![format!("{}: {e}", path.display())],
    };
    let mut out = Vec::new();
    if committed.provenance != f.provenance {
        out.push(format!("{}: provenance {} vs {}", f.name, committed.provenance, f.provenance));
    }
    compare_values(&format!("{}.values", f.name), &committed.values, &f.values, &mut out);
    out
}

/// Integers must match exactly, floats to [`COMPARE_RTOL`].
pub fn compare_values(path: &str, a: &Value, b: &Value, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            if let (Some(i), Some(j)) = (x.as_i64(), y.as_i64()) {
                if i != j {
                    out.push(format!("{path}: {i} vs {j}"));
                }
            } else {
                let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
                if !((x - y).abs() <= COMPARE_RTOL * x.abs().max(y.abs()).max(1.0)) {
                    out.push(format!("{path}: {x} vs {y}"));
                }
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                compare_values(&format!("{path}[{i}]"), u, v, out);
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            for key in x.keys().chain(y.keys().filter(|k| !x.contains_key(*k))) {
                match (x.get(key), y.get(key)) {
                    (Some(u), Some(v)) => compare_values(&format!("{path}.{key}"), u, v, out),
                    _ => out.push(format!("{path}.{key}: present on one side only")),
                }
            }
        }
        _ if a == b => {}
        _ => out.push(format!("{path}: {a} vs {b}")),
    }
}
