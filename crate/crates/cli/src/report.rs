//! Machine-readable reports: identifiability and fit diagnostics JSON,
//! validation JSON, and the singular-value CSV used for plotting spectra.
//!
//! All writers are deterministic: fixed field order, ordered arrays, and
//! shortest round-trip float form. Identical inputs produce identical
//! bytes.

use std::fmt::Write as _;
use std::path::Path;

use msid_core::{EstimationResult, IdentifiabilityReport, ValidationReport};
use serde::Serialize;

use crate::modelio::InitialStateEntry;
use crate::FormatError;

/// JSON mirror of [`IdentifiabilityReport`].
#[derive(Debug, Clone, Serialize)]
pub struct IdentifiabilityJson {
    pub ell: usize,
    pub order: usize,
    pub columns: usize,
    pub required_columns: usize,
    pub column_feasible: bool,
    pub rank_u: usize,
    pub required_rank_u: usize,
    pub rank_w: usize,
    pub required_rank_w: usize,
    pub pass: bool,
    pub verdict: String,
    pub sv_u: Vec<f64>,
    pub sv_w: Vec<f64>,
}

impl From<&IdentifiabilityReport> for IdentifiabilityJson {
    fn from(r: &IdentifiabilityReport) -> Self {
        Self {
            ell: r.ell,
            order: r.state_dim,
            columns: r.columns,
            required_columns: r.required_rank_w,
            column_feasible: r.column_feasible,
            rank_u: r.rank_u,
            required_rank_u: r.required_rank_u,
            rank_w: r.rank_w,
            required_rank_w: r.required_rank_w,
            pass: r.pass,
            verdict: r.failure_summary(),
            sv_u: r.sv_u.clone(),
            sv_w: r.sv_w.clone(),
        }
    }
}

/// Fit diagnostics written alongside the model JSON.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsFile {
    pub identifiability: IdentifiabilityJson,
    pub projected_singular_values: Vec<f64>,
    pub regressor_rows: usize,
    pub regressor_cols: usize,
    pub regressor_singular_values: Vec<f64>,
    pub regressor_condition: f64,
    pub residual_norm: f64,
    pub spectral_radius: f64,
    pub stable: bool,
    pub initial_states: Vec<InitialStateEntry>,
}

impl From<&EstimationResult> for DiagnosticsFile {
    fn from(est: &EstimationResult) -> Self {
        Self {
            identifiability: (&est.identifiability).into(),
            projected_singular_values: est.sv_projected.clone(),
            regressor_rows: est.regressor_shape.0,
            regressor_cols: est.regressor_shape.1,
            regressor_singular_values: est.regressor_singular_values.clone(),
            regressor_condition: est.regressor_condition,
            residual_norm: est.residual_norm,
            spectral_radius: est.model.spectral_radius(),
            stable: est.stable,
            initial_states: est
                .initial_states
                .iter()
                .map(|(src, x)| InitialStateEntry {
                    record: src.record_id.clone(),
                    offset: src.offset,
                    x: x.iter().copied().collect(),
                })
                .collect(),
        }
    }
}

/// JSON mirror of [`ValidationReport`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationJson {
    pub record: String,
    pub horizon: usize,
    pub x0_samples: usize,
    pub per_channel_rms: Vec<f64>,
    pub estimated_initial_state: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub markov_distance: Option<f64>,
}

impl From<&ValidationReport> for ValidationJson {
    fn from(r: &ValidationReport) -> Self {
        Self {
            record: r.record_id.clone(),
            horizon: r.horizon,
            x0_samples: r.x0_samples,
            per_channel_rms: r.per_channel_rms.clone(),
            estimated_initial_state: r.estimated_initial_state.iter().copied().collect(),
            markov_distance: r.markov_distance,
        }
    }
}

/// Pretty-prints `value` to `path` with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let text = to_json_string(value);
    std::fs::write(path, text).map_err(|e| FormatError::io(path, e))
}

/// The exact bytes `write_json` would produce, for stdout use.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    text
}

/// Writes labeled spectra as `matrix,index,value` rows, one row per
/// singular value, indices 1-based (plot-ready long form).
pub fn write_singular_values_csv(
    path: &Path,
    sections: &[(&str, &[f64])],
) -> Result<(), FormatError> {
    let mut out = String::from("matrix,index,value\n");
    for (name, values) in sections {
        for (i, v) in values.iter().enumerate() {
            writeln!(out, "{},{},{}", name, i + 1, v).expect("string write");
        }
    }
    std::fs::write(path, out).map_err(|e| FormatError::io(path, e))
}
