use thiserror::Error;

use crate::ode::OdeError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible pinch: K_max = {k_max} must exceed 1/R^2 = {bound}")]
    InfeasiblePinch { k_max: f64, bound: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{what} = {value} lies outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error(transparent)]
    Integrator(#[from] OdeError),

    #[error("strong convexity lost: smallest eigenvalue {min_eig:e}")]
    ConvexityViolation { min_eig: f64 },

    #[error("no equator return for phi = {phi} (integration stopped at t = {t_stop})")]
    ReturnNotFound { phi: f64, t_stop: f64 },

    #[error("no sign change of theta_adv - 2pi on the sweep grid (range [{lo}, {hi}])")]
    NoBracket { lo: f64, hi: f64 },

    #[error("closure residual {residual:e} exceeds {tol:e}")]
    Closure { residual: f64, tol: f64 },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("curves pass within {distance:e} of each other")]
    Proximity { distance: f64 },

    #[error("linking number {value} is not close to an integer (residual {residual:e})")]
    Quadrature { value: f64, residual: f64 },

    #[error("self-linking unstable under push-off refinement: {values:?}")]
    Framing { values: Vec<i64> },

    #[error("chart failure: {0}")]
    Chart(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
