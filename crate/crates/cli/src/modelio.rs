//! Model JSON format.
//!
//! Schema: integer fields `n`, `m`, `p`; row-major numeric arrays `A`
//! (n x n), `B` (n x m), `C` (p x n), `D` (p x m); optional array
//! `initial_states` of named per-window state vectors. Serialization is
//! deterministic: field order is fixed and floats use shortest
//! round-trip form.

use std::path::Path;

use msid_core::{ColumnSource, StateSpaceModel};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::FormatError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_states: Vec<InitialStateEntry>,
}

/// One estimated window-start state, named by where its window began.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialStateEntry {
    pub record: String,
    pub offset: usize,
    pub x: Vec<f64>,
}

impl ModelFile {
    pub fn from_model(
        model: &StateSpaceModel,
        initial_states: &[(ColumnSource, DVector<f64>)],
    ) -> Self {
        Self {
            n: model.state_dim(),
            m: model.input_dim(),
            p: model.output_dim(),
            a: row_major(model.a()),
            b: row_major(model.b()),
            c: row_major(model.c()),
            d: row_major(model.d()),
            initial_states: initial_states
                .iter()
                .map(|(src, x)| InitialStateEntry {
                    record: src.record_id.clone(),
                    offset: src.offset,
                    x: x.iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<StateSpaceModel, msid_core::Error> {
        let a = from_row_major(self.n, self.n, &self.a, "A")?;
        let b = from_row_major(self.n, self.m, &self.b, "B")?;
        let c = from_row_major(self.p, self.n, &self.c, "C")?;
        let d = from_row_major(self.p, self.m, &self.d, "D")?;
        StateSpaceModel::new(a, b, c, d)
    }

    pub fn initial_state_vectors(&self) -> Vec<(ColumnSource, DVector<f64>)> {
        self.initial_states
            .iter()
            .map(|e| {
                (
                    ColumnSource {
                        record_id: e.record.clone(),
                        offset: e.offset,
                    },
                    DVector::from_column_slice(&e.x),
                )
            })
            .collect()
    }
}

/// Flattens a matrix row by row.
pub fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

/// Rebuilds a matrix from its row-major flattening.
pub fn from_row_major(
    rows: usize,
    cols: usize,
    data: &[f64],
    context: &'static str,
) -> Result<DMatrix<f64>, msid_core::Error> {
    if data.len() != rows * cols {
        return Err(msid_core::Error::DimensionMismatch {
            context,
            expected: rows * cols,
            actual: data.len(),
        });
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

pub fn read_model(path: &Path) -> Result<ModelFile, FormatError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| FormatError::schema(path, e.to_string()))
}

pub fn write_model(path: &Path, model: &ModelFile) -> Result<(), FormatError> {
    crate::report::write_json(path, model)
}
