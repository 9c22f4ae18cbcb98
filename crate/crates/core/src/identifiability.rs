//! Rank tests that decide whether a window selection carries enough
//! excitation to pin down a state-space model of a given order, plus a
//! greedy routine that grows a selection until the tests pass.
//!
//! For input dimension `m`, state dimension `n`, and `ell` block rows, a
//! selection of `j` columns is accepted when the stacked input matrix has
//! full row rank `m*ell`, the stacked input-output matrix has rank exactly
//! `m*ell + n`, and `j` is at least `m*ell + n`. The block-row count must
//! exceed the system's maximal lag; when the lag is unknown the state
//! dimension is the usable upper bound.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::archive::{build_hankel, build_multirecord, Archive, ColumnSelection, MultiRecordMatrices, Record, SelectionEntry};
use crate::error::{Error, Result};
use crate::linalg;

/// How a numerical rank is read off a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankMode {
    /// Count singular values above `max(rel_tol * largest, abs_tol)`.
    /// The right choice for noise-free or lightly perturbed data.
    Threshold,
    /// Rank ends at the first adjacent ratio exceeding `ratio`, scanning
    /// from the largest singular value. Suited to noisy data, where the
    /// spectrum splits into a signal shelf and a noise floor.
    Gap { ratio: f64 },
}

impl RankMode {
    pub const DEFAULT_GAP_RATIO: f64 = 10.0;

    pub fn gap() -> Self {
        RankMode::Gap {
            ratio: Self::DEFAULT_GAP_RATIO,
        }
    }
}

/// Tolerances and mode for every rank decision in the pipeline. The same
/// relative tolerance also truncates the pseudo-inverses used downstream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Known maximal lag of the system, if any. `ell` must exceed it;
    /// without it, `ell` must exceed the state dimension.
    pub known_lag: Option<usize>,
    pub mode: RankMode,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 0.0,
            known_lag: None,
            mode: RankMode::Threshold,
        }
    }
}

impl RankConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidRankConfig {
                reason: "rel_tol must lie strictly between 0 and 1",
            });
        }
        if !(self.abs_tol >= 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::InvalidRankConfig {
                reason: "abs_tol must be finite and nonnegative",
            });
        }
        if let RankMode::Gap { ratio } = self.mode {
            if !(ratio > 1.0 && ratio.is_finite()) {
                return Err(Error::InvalidRankConfig {
                    reason: "gap ratio must be finite and exceed 1",
                });
            }
        }
        Ok(())
    }

    /// `ell` must exceed this bound for the rank tests to be conclusive.
    pub fn block_row_bound(&self, state_dim: usize) -> usize {
        self.known_lag.unwrap_or(state_dim)
    }

    /// Rank of a nonincreasing spectrum under this config.
    pub fn rank_of_spectrum(&self, sv: &[f64]) -> usize {
        let Some(&top) = sv.first() else { return 0 };
        let floor = f64::max(self.rel_tol * top, self.abs_tol);
        let significant = sv.iter().take_while(|&&s| s > floor).count();
        match self.mode {
            RankMode::Threshold => significant,
            RankMode::Gap { ratio } => {
                for r in 1..significant {
                    if sv[r - 1] / sv[r] > ratio {
                        return r;
                    }
                }
                significant
            }
        }
    }
}

/// Numerical rank and the spectrum it was read from.
pub fn numerical_rank(m: &DMatrix<f64>, cfg: &RankConfig) -> Result<(usize, Vec<f64>)> {
    cfg.validate()?;
    let sv = linalg::singular_values(m, "rank test")?;
    Ok((cfg.rank_of_spectrum(&sv), sv))
}

/// Outcome of the identifiability test on one set of data matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiabilityReport {
    pub ell: usize,
    pub state_dim: usize,
    pub columns: usize,
    /// Spectrum of the stacked input matrix.
    pub sv_u: Vec<f64>,
    /// Spectrum of the stacked input-output matrix.
    pub sv_w: Vec<f64>,
    pub rank_u: usize,
    pub rank_w: usize,
    /// Full row rank of the stacked inputs: `m * ell`.
    pub required_rank_u: usize,
    /// Exact joint rank for an order-`n` explanation: `m * ell + n`.
    pub required_rank_w: usize,
    /// Whether the column count reaches `m * ell + n`.
    pub column_feasible: bool,
    pub pass: bool,
}

impl IdentifiabilityReport {
    /// Names the first violated condition, or "all conditions hold".
    pub fn failure_summary(&self) -> String {
        use alloc::format;
        if !self.column_feasible {
            return format!(
                "only {} data-matrix columns, need at least {}",
                self.columns, self.required_rank_w
            );
        }
        if self.rank_u != self.required_rank_u {
            return format!(
                "stacked input matrix rank {} below required {}",
                self.rank_u, self.required_rank_u
            );
        }
        if self.rank_w != self.required_rank_w {
            return format!(
                "stacked input-output matrix rank {} differs from required {}",
                self.rank_w, self.required_rank_w
            );
        }
        String::from("all conditions hold")
    }
}

/// Tests whether the data matrices identify a unique order-`n` model.
///
/// Errors if `ell` does not exceed the block-row bound; rank shortfalls
/// are reported in the result, not as errors.
pub fn check_identifiability(
    data: &MultiRecordMatrices,
    state_dim: usize,
    cfg: &RankConfig,
) -> Result<IdentifiabilityReport> {
    cfg.validate()?;
    let bound = cfg.block_row_bound(state_dim);
    if data.ell() <= bound {
        return Err(Error::BlockRowsTooSmall {
            ell: data.ell(),
            bound,
        });
    }
    let m = data.input_dim();
    let required_rank_u = m * data.ell();
    let required_rank_w = required_rank_u + state_dim;
    let sv_u = linalg::singular_values(data.u(), "stacked input matrix")?;
    let sv_w = linalg::singular_values(&data.stacked(), "stacked input-output matrix")?;
    let rank_u = cfg.rank_of_spectrum(&sv_u);
    let rank_w = cfg.rank_of_spectrum(&sv_w);
    let columns = data.columns();
    let column_feasible = columns >= required_rank_w;
    let pass = column_feasible && rank_u == required_rank_u && rank_w == required_rank_w;
    Ok(IdentifiabilityReport {
        ell: data.ell(),
        state_dim,
        columns,
        sv_u,
        sv_w,
        rank_u,
        rank_w,
        required_rank_u,
        required_rank_w,
        column_feasible,
        pass,
    })
}

/// One record's evaluation during greedy selection.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyStep {
    pub record_id: String,
    /// Windows the record offered at this stride; zero means it was too
    /// short to window and was passed over.
    pub windows: usize,
    pub accepted: bool,
    /// Report for the accumulated selection plus this record's windows.
    /// Absent when the record offered no windows.
    pub report: Option<IdentifiabilityReport>,
}

/// Grows a selection record by record, in archive order, keeping a
/// record's windows only when they raise the rank of the stacked input or
/// input-output matrix. Stops as soon as the accumulated selection passes.
///
/// Windows are taken at offsets `0, stride, 2*stride, ...`. The returned
/// selection is empty when no record offered a usable window.
pub fn greedy_select(
    archive: &Archive,
    state_dim: usize,
    ell: usize,
    stride: usize,
    cfg: &RankConfig,
) -> Result<(ColumnSelection, Vec<GreedyStep>)> {
    assert!(ell >= 1, "block-row count must be at least 1");
    assert!(stride >= 1, "stride must be at least 1");
    cfg.validate()?;
    let bound = cfg.block_row_bound(state_dim);
    if ell <= bound {
        return Err(Error::BlockRowsTooSmall { ell, bound });
    }
    let mut selection = ColumnSelection::default();
    let mut best_u = 0usize;
    let mut best_w = 0usize;
    let mut history = Vec::new();
    for record in archive.records() {
        if record.len() < ell {
            history.push(GreedyStep {
                record_id: record.id().into(),
                windows: 0,
                accepted: false,
                report: None,
            });
            continue;
        }
        let windows = (record.len() - ell) / stride + 1;
        let mut tentative = selection.clone();
        if stride == 1 {
            tentative.entries.push(SelectionEntry {
                record_id: record.id().into(),
                offset: 0,
                count: windows,
            });
        } else {
            for k in 0..windows {
                tentative.entries.push(SelectionEntry {
                    record_id: record.id().into(),
                    offset: k * stride,
                    count: 1,
                });
            }
        }
        let data = build_multirecord(archive, &tentative, ell)?;
        let report = check_identifiability(&data, state_dim, cfg)?;
        let accepted = report.rank_u > best_u || report.rank_w > best_w;
        if accepted {
            selection = tentative;
            best_u = report.rank_u;
            best_w = report.rank_w;
        }
        let pass = accepted && report.pass;
        history.push(GreedyStep {
            record_id: record.id().into(),
            windows,
            accepted,
            report: Some(report),
        });
        if pass {
            break;
        }
    }
    Ok((selection, history))
}

/// Persistency-of-excitation check on a single record's input: full row
/// rank of the depth `ell + n` input Hankel matrix built from all
/// available windows. Diagnostic only; sufficiency for arbitrary initial
/// conditions, not necessity.
pub fn willems_pe_diagnostic(
    record: &Record,
    ell: usize,
    state_dim: usize,
    cfg: &RankConfig,
) -> Result<bool> {
    cfg.validate()?;
    let depth = ell + state_dim;
    let m = record.input_dim();
    let needed = depth + m * depth - 1;
    if record.len() < needed {
        return Err(Error::RecordTooShort {
            record_id: record.id().into(),
            required: needed,
            actual: record.len(),
        });
    }
    let j = record.len() - depth + 1;
    let data = build_hankel(record, depth, j)?;
    let (rank, _) = numerical_rank(data.u(), cfg)?;
    Ok(rank == m * depth)
}
