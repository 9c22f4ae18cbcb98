//! Subspace identification of linear state-space models from multiple
//! short, non-contiguous data records.
//!
//! Classical MOESP-style identification assembles one block-Hankel data
//! matrix from a single long run of input/output samples. When the data
//! instead arrive as an archive of disconnected records, each too short
//! to carry the estimation alone, the same algebra still applies if the
//! data-matrix columns are drawn as windows from several records. This
//! crate provides that pipeline:
//!
//! - [`archive`]: records, archives, window selections, and the assembly
//!   of multi-record data matrices along with their provenance.
//! - [`identifiability`]: the rank conditions deciding whether a window
//!   selection pins down a unique model of a given order, a greedy
//!   selection routine, and a persistency-of-excitation diagnostic.
//! - [`estimator`]: orthogonal projection of outputs against the input
//!   row space, shift-invariance extraction of `A` and `C`, and one joint
//!   regression for `B`, `D`, and an initial state per contiguous span of
//!   selected data.
//! - [`validation`]: basis alignment between models, impulse-response
//!   distances, and prediction-error scoring on held-out records.
//! - [`model`]: the state-space type and its derived matrices.
//! - [`synth`]: seeded generation of synthetic archives.
//!
//! The crate is `no_std` compatible (with `alloc`) when built without the
//! default `std` feature.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod archive;
pub mod error;
pub mod estimator;
pub mod identifiability;
mod linalg;
pub mod model;
pub mod synth;
pub mod validation;

pub use archive::{
    build_hankel, build_multirecord, data_pair_count, regression_windows, Archive,
    ColumnSelection, ColumnSource, MultiRecordMatrices, Record, RegressionWindow, SelectionEntry,
};
pub use error::{Error, Result};
pub use estimator::{
    build_regressor, extract_ac, fit, fit_unchecked, project_out_inputs, solve_bd_x0, AcEstimate,
    EstimationResult, InputMapSolution, ProjectionResult,
};
pub use identifiability::{
    check_identifiability, greedy_select, numerical_rank, willems_pe_diagnostic, GreedyStep,
    IdentifiabilityReport, RankConfig, RankMode,
};
pub use model::{StateSpaceModel, Trajectory};
pub use synth::{generate, GeneratorSpec, InitialStates, InputLaw};
pub use validation::{
    align_similarity, estimate_initial_state, markov_distance, markov_distance_relative,
    predict_validate, predict_validate_bounded, ValidationReport,
};
