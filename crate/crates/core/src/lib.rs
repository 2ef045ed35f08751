//! Correlation-matrix toolkit: types and validation, uniform elliptope
//! sampling, return-panel ingestion and synthetic markets, hierarchical
//! canonical ordering, nearest-correlation repair and stylized-fact
//! statistics.

pub mod canonical;
pub mod error;
pub mod facts;
pub mod ingest;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod repair;
pub mod returns;
pub mod rng;
pub mod sampling;

pub use error::{CorrError, Result};
pub use matrix::{
    validate, CorrelationMatrix, ElliptopeVector, Permutation, RawMatrix, Tolerances,
    ValidationReport,
};
pub use returns::{estimate_correlation, ReturnKind, ReturnsPanel};
