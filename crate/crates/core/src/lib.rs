//! Adjusted-count quantification on graphs.
//!
//! Estimates the label distribution of a set of test vertices from a
//! classifier's predictions, correcting for misclassification with a
//! confusion matrix estimated on held-out labeled vertices. Two corrections
//! for graph data are provided: structural importance sampling, which
//! reweights the held-out vertices by a kernel density ratio between test and
//! train vertices, and neighborhood-aware confusion estimates, which use the
//! pair (own prediction, majority neighbor prediction) as the outcome.

// NaN-rejecting parameter checks read as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifiers;
pub mod error;
pub mod estimation;
pub mod graph;
pub mod harness;
pub mod kernels;
pub mod quantifiers;
pub mod shift;
pub mod solver;

pub use error::{Error, ErrorKind, Result};
pub use estimation::{PredictionMode, PredictionSet};
pub use graph::Graph;
pub use kernels::{KernelSpec, PprParams};
pub use quantifiers::{quantify, quantify_batch, BaseMethod, PrevalenceVector, QuantifierSpec};
