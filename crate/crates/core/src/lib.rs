//! Numeric tensor calculus for m-th root Finsler metrics
//! `F = (a_{i1..im}(x) y^{i1} ... y^{im})^{1/m}`.
//!
//! The geometry is expressed through the polynomial flag metric
//! `h_ij = a_{ij0..0}`, whose entries are polynomials in the direction `y`.
//! From it the crate evaluates the spray, the Kern nonlinear connection, the
//! Berwald connection and its hv-curvature, the Douglas tensor, and runs
//! sample-based classification (Berwald, Landsberg, Douglas, projectively
//! flat, projectively related, Riemann-projective).

pub mod classify;
pub mod connection;
pub mod corpus;
pub mod error;
pub mod geodesics;
pub mod linalg;
pub mod metric;
pub mod oracle;
pub mod polyfield;
pub mod sampling;
pub mod spec;

pub use error::{FinslerError, Result};
pub use metric::{metric_jet, MetricJet};
pub use polyfield::{MultiIndex, PolyScalar, SymCoeffTensor, SymNumTensor};
pub use sampling::{Sample, Sampler};
pub use spec::{ConformalScale, MetricSpec};
