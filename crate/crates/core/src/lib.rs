//! Exact inference after model selection in linear regression.
//!
//! Selection procedures (marginal screening, orthogonal matching pursuit,
//! non-negative least squares, screening followed by the Lasso) partition
//! response space into polyhedra {y : Ay <= b}. Conditional on landing in one
//! of them, any linear contrast eta'y follows a truncated Gaussian whose
//! truncation limits are computable from the polyhedron. This crate encodes
//! those events, computes the truncation intervals, and turns the resulting
//! pivot into exact tests and confidence intervals for the coefficients of
//! the selected model.
//!
//! Modules, bottom up:
//! - [`numerics`]: dense least squares and tail-stable normal CDF machinery.
//! - [`polytope`]: selection events and the one-dimensional truncation
//!   interval of a contrast.
//! - [`truncnorm`]: the truncated-Gaussian CDF pivot and its inversion.
//! - [`selectors`]: the four selection procedures and their event encodings.
//! - [`inference`]: per-coefficient pivots, tests, and intervals.
//! - [`oracle`]: independent validators (quadrature, rejection sampling,
//!   exhaustive enumeration) used by the test suite.
//! - [`harness`]: CSV ingestion, experiment drivers, and CLI plumbing.

pub mod error;
pub mod harness;
pub mod inference;
pub mod numerics;
pub mod oracle;
pub mod polytope;
pub mod selectors;
pub mod truncnorm;

pub use error::{Error, Result};
pub use inference::{Dataset, InferenceResult};
pub use polytope::{SelectionEvent, TruncationInterval};
pub use selectors::{Procedure, SelectedModel};
