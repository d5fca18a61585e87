//! Numerical toolkit for geodesically equivalent pseudo-Riemannian metrics
//! given on a single coordinate chart.

pub mod corpus;
pub mod error;
pub mod expr;
pub mod fit;
pub mod flow;
pub mod linalg;
pub mod mobility;
pub mod pair;
pub mod probe;
pub mod sampling;
pub mod tensor;

pub use error::{GeomError, Result};
