use std::path::{Path, PathBuf};

use finsler_core::hopf::{Harmonic, PerturbedContactForm};
use finsler_core::profile::ProfileSurface;
use finsler_core::randers::{make_randers, RandersMetric};
use finsler_core::shooting::ShootingWindow;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::Failure;

pub const DEFAULT_PROFILE_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Surface,
    Geodesic,
    Shoot,
    Cz,
    Knots,
    Link,
    Hopf,
    Fixtures,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Profile ODE tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<f64>,
    /// Relative tolerance of the geodesic and Reeb integrators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ode: Option<f64>,
}

impl Tolerances {
    pub fn profile(&self) -> f64 {
        self.profile.unwrap_or(DEFAULT_PROFILE_TOL)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub params: Value,
    /// Empty means "use the command-line default".
    #[serde(default)]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tol: Tolerances,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::Schema(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Schema(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        for (name, v) in [("tol.profile", self.tol.profile), ("tol.ode", self.tol.ode)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Failure::Schema(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn params<T: DeserializeOwned>(&self) -> Result<T, Failure> {
        let v = match &self.params {
            Value::Null => Value::Object(Default::default()),
            v => v.clone(),
        };
        serde_json::from_value(v).map_err(|e| Failure::Schema(format!("params for {:?}: {e}", self.kind)))
    }

    /// SHA-256 of the canonical JSON of everything except the output directory.
    pub fn hash(&self) -> String {
        let canonical = serde_json::json!({
            "kind": self.kind,
            "params": self.params,
            "seed": self.seed,
            "tol": self.tol,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceParams {
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "Kmax")]
    pub k_max: f64,
    #[serde(default)]
    pub smoothing: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowParams {
    pub r: f64,
    pub delta: f64,
    #[serde(rename = "R", default)]
    pub radius: Option<f64>,
    #[serde(rename = "Kmax", default)]
    pub k_max: Option<f64>,
}

impl WindowParams {
    pub fn window(&self) -> Result<ShootingWindow, Failure> {
        let w = match (self.radius, self.k_max) {
            (Some(radius), Some(k_max)) => ShootingWindow::with_parameters(self.r, self.delta, radius, k_max),
            (None, None) => ShootingWindow::select(self.r, self.delta),
            _ => return Err(Failure::Schema("R and Kmax must be given together".into())),
        };
        w.map_err(|e| Failure::Schema(e.to_string()))
    }
}

/// A named metric fixture, a path to a JSON file holding [`WindowParams`], or
/// the parameters themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Named(String),
    Window(WindowParams),
}

impl MetricSpec {
    pub fn resolve(&self) -> Result<Option<WindowParams>, Failure> {
        let named = |r, delta| {
            Ok(Some(WindowParams {
                r,
                delta,
                radius: None,
                k_max: None,
            }))
        };
        match self {
            MetricSpec::Window(w) => Ok(Some(w.clone())),
            MetricSpec::Named(n) if n == "round" => Ok(None),
            MetricSpec::Named(n) if n == "window-r1" => named(1.0, 0.24),
            MetricSpec::Named(n) if n == "window-r2" => named(2.0, 0.43),
            MetricSpec::Named(n) if n.ends_with(".json") => {
                let text = std::fs::read_to_string(n).map_err(|e| Failure::Schema(format!("{n}: {e}")))?;
                let w: WindowParams = serde_json::from_str(&text).map_err(|e| Failure::Schema(format!("{n}: {e}")))?;
                Ok(Some(w))
            }
            MetricSpec::Named(n) => Err(Failure::Schema(format!(
                "unknown metric {n:?}; expected round, window-r1, window-r2 or a .json file"
            ))),
        }
    }

    pub fn build(&self, tol: f64) -> Result<RandersMetric, Failure> {
        let built = match self.resolve()? {
            None => ProfileSurface::round(tol).and_then(|s| make_randers(std::sync::Arc::new(s), 1.0)),
            Some(w) => w.window()?.build(tol),
        };
        built.map_err(|e| Failure::Experiment(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicParams {
    pub metric: MetricSpec,
    /// Launch angle at the origin of the equator.
    pub phi: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    /// Integrate the underlying `h`-geodesic instead of the Finsler one.
    #[serde(default)]
    pub riemannian: bool,
}

fn default_horizon() -> f64 {
    std::f64::consts::TAU
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitName {
    Equator1,
    Equator2,
    Figure8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CzParams {
    pub metric: MetricSpec,
    pub orbit: OrbitName,
    #[serde(default = "one")]
    pub cover: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnotParams {
    #[serde(default = "default_knot_samples")]
    pub samples: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_knot_samples() -> usize {
    512
}

fn default_eps() -> f64 {
    1e-2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    pub a: PathBuf,
    pub b: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopfParams {
    /// Contact form `f λ₀`, written `round` or `c+a*quadratic`, `c-a*linear`.
    pub f: String,
    #[serde(default = "default_cap")]
    pub cap: f64,
    /// Random seed points per chart.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    /// Polar seed rings per chart.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_band")]
    pub band: f64,
    /// Samples per exported orbit.
    #[serde(default = "default_orbit_samples")]
    pub samples: usize,
}

fn default_cap() -> f64 {
    20.0
}

fn default_seeds() -> usize {
    8
}

fn default_grid() -> usize {
    16
}

fn default_band() -> f64 {
    0.05
}

fn default_orbit_samples() -> usize {
    1024
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureParams {
    /// Directory of committed fixtures to compare the regenerated ones against.
    #[serde(default)]
    pub check: Option<PathBuf>,
}

pub fn parse_form(text: &str) -> Result<PerturbedContactForm, Failure> {
    let bad = || Failure::Schema(format!("cannot parse contact form {text:?}; expected e.g. 1+0.01*quadratic"));
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if t == "round" {
        return Ok(PerturbedContactForm::round());
    }
    let (head, harmonic) = if let Some(h) = t.strip_suffix("*quadratic") {
        (h, Harmonic::Quadratic)
    } else if let Some(h) = t.strip_suffix("*linear") {
        (h, Harmonic::Linear)
    } else {
        return Err(bad());
    };
    // Split at the sign that separates the constant from the amplitude.
    let split = head
        .char_indices()
        .skip(1)
        .filter(|&(i, c)| (c == '+' || c == '-') && !matches!(head.as_bytes()[i - 1], b'e' | b'E'))
        .map(|(i, _)| i)
        .last()
        .ok_or_else(bad)?;
    let constant: f64 = head[..split].parse().map_err(|_| bad())?;
    let amp: f64 = head[split..].trim_start_matches('+').parse().map_err(|_| bad())?;
    PerturbedContactForm::new(constant, amp, harmonic).map_err(|e| Failure::Schema(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn form_parsing() {
        let f = parse_form("1+0.01*quadratic").unwrap();
        assert_eq!((f.constant, f.amp, f.harmonic), (1.0, 0.01, Harmonic::Quadratic));
        let f = parse_form("2 - 1e-3 * linear").unwrap();
        assert_eq!((f.constant, f.amp, f.harmonic), (2.0, -1e-3, Harmonic::Linear));
        assert!(parse_form("1+0.01*cubic").is_err());
        assert!(parse_form("0.01*quadratic").is_err());
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = ExperimentConfig::from_json(r#"{"kind":"knots","out":"a"}"#).unwrap();
        let b = ExperimentConfig::from_json(r#"{"kind":"knots","out":"b"}"#).unwrap();
        let c = ExperimentConfig::from_json(r#"{"kind":"knots","out":"a","seed":1}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"kind":"knots","out":"a","extra":1}"#).is_err());
        let cfg = ExperimentConfig::from_json(r#"{"kind":"surface","out":"a","params":{"R":0.5}}"#).unwrap();
        assert!(cfg.params::<SurfaceParams>().is_err());
    }
}
