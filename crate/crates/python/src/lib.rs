//! Python bindings: surfaces, Randers metrics, shooting, knots and Reeb flows.

use std::sync::Arc;

use finsler_core::geodesics::{equator_geodesic, first_equator_return, integrate_finsler_geodesic, GeodesicOptions};
use finsler_core::hopf::{self, FlowOptions, Harmonic, PerturbedContactForm};
use finsler_core::knots::{self, PolylineKnot, Vec4};
use finsler_core::linearized::{cz_index, mu_hat, ClosedOrbit};
use finsler_core::profile::{PinchFunction, ProfileSurface};
use finsler_core::randers::{make_randers, RandersMetric};
use finsler_core::shooting::{verify_figure_eight, ShootingWindow};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

const PROFILE_TOL: f64 = 1e-11;

fn err(e: finsler_core::Error) -> PyErr {
    match e {
        finsler_core::Error::Config(_) | finsler_core::Error::Range { .. } | finsler_core::Error::Contract(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Serialise through JSON into plain Python containers.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Pinched surface of revolution with equator radius `R` and curvature in `[1, Kmax]`.
#[pyclass(name = "Surface", frozen)]
struct PySurface {
    inner: Arc<ProfileSurface>,
}

#[pymethods]
impl PySurface {
    #[new]
    #[pyo3(signature = (radius, k_max, smoothing=None, tol=PROFILE_TOL))]
    fn new(radius: f64, k_max: f64, smoothing: Option<f64>, tol: f64) -> PyResult<Self> {
        let pinch = match smoothing {
            Some(w) => PinchFunction::new(radius, k_max, w),
            None => PinchFunction::with_auto_smoothing(radius, k_max),
        }
        .map_err(err)?;
        let inner = ProfileSurface::solve(pinch, tol).map_err(err)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[staticmethod]
    fn round() -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(ProfileSurface::round(PROFILE_TOL).map_err(err)?),
        })
    }

    #[getter]
    fn half_length(&self) -> f64 {
        self.inner.half_length()
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius()
    }

    fn rho(&self, s: f64) -> f64 {
        self.inner.rho(s)
    }

    fn curvature(&self, s: f64) -> PyResult<f64> {
        self.inner.gaussian_curvature(s).map_err(err)
    }

    fn curvature_range(&self) -> (f64, f64) {
        self.inner.curvature_range()
    }

    /// Rows `(s, rho, rhodot, K)` on the stored grid.
    fn samples(&self) -> Vec<(f64, f64, f64, f64)> {
        self.inner.samples().iter().map(|r| (r.s, r.rho, r.rhodot, r.k)).collect()
    }

    fn __repr__(&self) -> String {
        let p = self.inner.pinch();
        format!("Surface(R={}, Kmax={}, smoothing={})", p.radius(), p.k_max(), p.smoothing())
    }
}

/// Randers metric obtained by rotating the surface with constant angular wind.
#[pyclass(name = "Metric", frozen)]
struct PyMetric {
    inner: RandersMetric,
}

#[pymethods]
impl PyMetric {
    #[new]
    fn new(surface: &PySurface, r: f64) -> PyResult<Self> {
        Ok(Self {
            inner: make_randers(surface.inner.clone(), r).map_err(err)?,
        })
    }

    /// Metric on the surface selected for reversibility `r` and pinching `delta`.
    #[staticmethod]
    #[pyo3(signature = (r, delta, tol=PROFILE_TOL))]
    fn window(r: f64, delta: f64, tol: f64) -> PyResult<Self> {
        let inner = ShootingWindow::select(r, delta).and_then(|w| w.build(tol)).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta()
    }

    #[getter]
    fn critical_angle(&self) -> f64 {
        self.inner.critical_angle()
    }

    fn surface(&self) -> PySurface {
        PySurface {
            inner: self.inner.surface().clone(),
        }
    }

    /// `F` at `(s, ·)` of the coordinate vector `(v_s, v_theta)`.
    fn norm(&self, s: f64, v: [f64; 2]) -> f64 {
        self.inner.norm(s, v)
    }

    fn reversibility<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.reversibility())
    }

    fn first_return<'py>(&self, py: Python<'py>, phi: f64) -> PyResult<Bound<'py, PyAny>> {
        let r = py.detach(|| first_equator_return(&self.inner, phi, &GeodesicOptions::default()));
        to_py(py, &r.map_err(err)?)
    }

    /// Unit-speed geodesic from the equator at angle `phi`; rows
    /// `(t, s, theta, sdot, thetadot, x, y, z)`.
    #[pyo3(signature = (phi, horizon, dt=0.01))]
    fn geodesic(&self, py: Python<'_>, phi: f64, horizon: f64, dt: f64) -> PyResult<Vec<[f64; 8]>> {
        let opts = GeodesicOptions {
            dt,
            ..GeodesicOptions::default()
        };
        let v = self.inner.unit_vector_at_angle(phi);
        let traj = py.detach(|| integrate_finsler_geodesic(&self.inner, 0.0, 0.0, v, horizon, &opts));
        Ok(traj.map_err(err)?.rows())
    }

    /// Rotation interval and index of the equator traversed `cover` times.
    #[pyo3(signature = (cover=2))]
    fn equator_cz<'py>(&self, py: Python<'py>, cover: usize) -> PyResult<Bound<'py, PyAny>> {
        let rec = py.detach(|| {
            let traj = equator_geodesic(&self.inner, cover, &GeodesicOptions::default())?;
            cz_index(&ClosedOrbit::new(format!("equator{cover}"), traj, 1e-8)?, 1)
        });
        to_py(py, &rec.map_err(err)?)
    }
}

/// Shoot for the figure-eight closed geodesic; returns the full report.
#[pyfunction]
#[pyo3(signature = (r, delta, tol=PROFILE_TOL))]
fn shoot<'py>(py: Python<'py>, r: f64, delta: f64, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let window = ShootingWindow::select(r, delta).map_err(err)?;
    let out = py.detach(|| verify_figure_eight(window, tol)).map_err(err)?;
    to_py(py, &out.report)
}

#[pyfunction(name = "mu_hat")]
fn py_mu_hat(a: f64, b: f64) -> i64 {
    mu_hat(a, b)
}

/// Closed polygon on the unit three-sphere.
#[pyclass(name = "Knot", frozen)]
struct PyKnot {
    inner: PolylineKnot,
}

#[pymethods]
impl PyKnot {
    #[new]
    fn new(points: Vec<Vec4>) -> PyResult<Self> {
        Ok(Self {
            inner: PolylineKnot::new(points).map_err(err)?,
        })
    }

    /// Great circle `t -> cos t p + sin t q` sampled at `n` points.
    #[staticmethod]
    #[pyo3(signature = (p, q, n=400))]
    fn circle(p: Vec4, q: Vec4, n: usize) -> PyResult<Self> {
        let inner = PolylineKnot::from_fn(n, |t| std::array::from_fn(|i| t.cos() * p[i] + t.sin() * q[i])).map_err(err)?;
        Ok(Self { inner })
    }

    fn points(&self) -> Vec<Vec4> {
        self.inner.points.clone()
    }

    fn reversed(&self) -> Self {
        Self {
            inner: self.inner.reversed(),
        }
    }

    /// Self-linking with respect to the standard contact structure.
    #[pyo3(signature = (eps=1e-2))]
    fn self_linking(&self, eps: f64) -> PyResult<i64> {
        knots::standard_self_linking(&self.inner, eps).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
fn gauss_link<'py>(py: Python<'py>, a: &PyKnot, b: &PyKnot) -> PyResult<Bound<'py, PyAny>> {
    let l = py.detach(|| knots::gauss_link(&a.inner, &b.inner)).map_err(err)?;
    to_py(py, &l)
}

/// Base point and unit tangent on S² of a unit quaternion.
#[pyfunction]
fn double_cover(p: Vec4) -> PyResult<([f64; 3], [f64; 3])> {
    knots::double_cover(&p).map_err(err)
}

/// Contact form `(c + amp Y) λ₀` on the three-sphere.
#[pyclass(name = "ContactForm", frozen)]
struct PyContactForm {
    inner: PerturbedContactForm,
}

#[pymethods]
impl PyContactForm {
    #[new]
    #[pyo3(signature = (constant=1.0, amp=0.0, harmonic="quadratic"))]
    fn new(constant: f64, amp: f64, harmonic: &str) -> PyResult<Self> {
        let h = match harmonic {
            "quadratic" => Harmonic::Quadratic,
            "linear" => Harmonic::Linear,
            _ => return Err(PyValueError::new_err(format!("unknown harmonic {harmonic:?}"))),
        };
        Ok(Self {
            inner: PerturbedContactForm::new(constant, amp, h).map_err(err)?,
        })
    }

    fn f(&self, p: Vec4) -> f64 {
        self.inner.f(&p)
    }

    fn reeb(&self, p: Vec4) -> PyResult<Vec4> {
        hopf::reeb_field(&self.inner, &p).map_err(err)
    }

    fn c2_norm(&self) -> f64 {
        self.inner.c2_norm()
    }

    /// Closed orbits with period up to `cap`, started from seeded section points.
    #[pyo3(signature = (cap=20.0, grid=16, seeds=8, band=0.05, seed=0))]
    fn scan<'py>(
        &self,
        py: Python<'py>,
        cap: f64,
        grid: usize,
        seeds: usize,
        band: f64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let points = hopf::seed_points(grid, seeds, seed);
        let scan = py
            .detach(|| hopf::period_dichotomy_scan(&self.inner, cap, band, &points, &FlowOptions::default()))
            .map_err(err)?;
        to_py(py, &scan)
    }

    /// Reeb trajectory sampled every `dt` up to `horizon`: `(t, x)` pairs.
    #[pyo3(signature = (p, horizon, dt=0.01))]
    fn flow(&self, py: Python<'_>, p: Vec4, horizon: f64, dt: f64) -> PyResult<Vec<(f64, Vec4)>> {
        py.detach(|| hopf::integrate_reeb(&self.inner, &p, horizon, dt, &FlowOptions::default()))
            .map_err(err)
    }
}

#[pymodule]
fn finsler_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySurface>()?;
    m.add_class::<PyMetric>()?;
    m.add_class::<PyKnot>()?;
    m.add_class::<PyContactForm>()?;
    m.add_function(wrap_pyfunction!(shoot, m)?)?;
    m.add_function(wrap_pyfunction!(py_mu_hat, m)?)?;
    m.add_function(wrap_pyfunction!(gauss_link, m)?)?;
    m.add_function(wrap_pyfunction!(double_cover, m)?)?;
    Ok(())
}
