use thiserror::Error;

pub type Result<T> = std::result::Result<T, FinslerError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FinslerError {
    #[error("index {index} out of range for dimension {dimension}")]
    IndexOutOfRange { index: i64, dimension: usize },

    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },

    #[error("invalid metric specification: {0}")]
    InvalidSpec(String),

    #[error("flag metric h is degenerate (condition estimate {cond:e})")]
    DegenerateFlagMetric { cond: f64 },

    #[error("F is undefined where T = {t:e} (order {order})")]
    NonPositiveT { t: f64, order: usize },

    #[error("usual Finsler metric g is degenerate (condition estimate {cond:e})")]
    DegenerateUsualMetric { cond: f64 },

    #[error("metric is degenerate at the requested point")]
    DegenerateMetric,

    #[error("conformal scale factor vanishes at the requested point")]
    SingularScale,

    #[error("geodesic left the chart box at t = {t}")]
    ChartExit { t: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudget { t: f64, max_steps: usize },

    #[error("finite-difference stencil failed: {0}")]
    StencilFailure(String),

    #[error("alpha is not parallel (normalized residual {residual:e} exceeds {tolerance:e})")]
    NotParallel { residual: f64, tolerance: f64 },
}

impl FinslerError {
    /// Errors that mark a sample as lying on (or too close to) the degeneracy cone.
    pub fn is_degeneracy(&self) -> bool {
        matches!(
            self,
            FinslerError::DegenerateFlagMetric { .. }
                | FinslerError::DegenerateUsualMetric { .. }
                | FinslerError::DegenerateMetric
                | FinslerError::SingularScale
                | FinslerError::NonPositiveT { .. }
        )
    }
}
