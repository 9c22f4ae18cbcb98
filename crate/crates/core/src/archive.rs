//! Records of contiguous input/output samples, archives of such records,
//! and the assembly of data matrices whose columns may come from different
//! records.
//!
//! A length-`ell` window starting at sample `offset` of a record contributes
//! one column: the window's inputs stacked over time, and likewise its
//! outputs. Columns drawn from a single record at successive offsets
//! reproduce the classical block-Hankel arrangement; columns drawn from
//! several records generalize it to non-contiguous data.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// One contiguous run of samples: inputs `m` by `N`, outputs `p` by `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    id: String,
    start_time: i64,
    inputs: DMatrix<f64>,
    outputs: DMatrix<f64>,
}

impl Record {
    pub fn new(
        id: String,
        start_time: i64,
        inputs: DMatrix<f64>,
        outputs: DMatrix<f64>,
    ) -> Result<Self> {
        if inputs.ncols() != outputs.ncols() {
            return Err(Error::DimensionMismatch {
                context: "record input and output sample counts",
                expected: inputs.ncols(),
                actual: outputs.ncols(),
            });
        }
        if inputs.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                context: "record must contain at least one sample",
                expected: 1,
                actual: 0,
            });
        }
        if inputs.nrows() == 0 || outputs.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                context: "record channel counts must be nonzero",
                expected: 1,
                actual: 0,
            });
        }
        if !linalg::is_finite_mat(&inputs) || !linalg::is_finite_mat(&outputs) {
            return Err(Error::NonFinite {
                context: "record samples",
            });
        }
        Ok(Self {
            id,
            start_time,
            inputs,
            outputs,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn start_time(&self) -> i64 {
        self.start_time
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn outputs(&self) -> &DMatrix<f64> {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.nrows()
    }
}

/// An ordered set of records sharing channel dimensions, with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    records: Vec<Record>,
    m: usize,
    p: usize,
}

impl Archive {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyArchive)?;
        let m = first.input_dim();
        let p = first.output_dim();
        for rec in &records {
            if rec.input_dim() != m {
                return Err(Error::DimensionMismatch {
                    context: "input channel count across records",
                    expected: m,
                    actual: rec.input_dim(),
                });
            }
            if rec.output_dim() != p {
                return Err(Error::DimensionMismatch {
                    context: "output channel count across records",
                    expected: p,
                    actual: rec.output_dim(),
                });
            }
        }
        for (i, rec) in records.iter().enumerate() {
            if records[..i].iter().any(|r| r.id == rec.id) {
                return Err(Error::DuplicateRecordId {
                    record_id: rec.id.clone(),
                });
            }
        }
        Ok(Self { records, m, p })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn output_dim(&self) -> usize {
        self.p
    }

    /// Total samples across all records.
    pub fn total_samples(&self) -> usize {
        self.records.iter().map(Record::len).sum()
    }

    /// Copy of the archive with the per-channel mean (taken over every
    /// sample of every record) removed from inputs and outputs.
    pub fn centered(&self) -> Archive {
        let total = self.total_samples() as f64;
        let mut u_mean = vec![0.0; self.m];
        let mut y_mean = vec![0.0; self.p];
        for rec in &self.records {
            for (c, acc) in u_mean.iter_mut().enumerate() {
                *acc += rec.inputs.row(c).sum();
            }
            for (c, acc) in y_mean.iter_mut().enumerate() {
                *acc += rec.outputs.row(c).sum();
            }
        }
        for v in &mut u_mean {
            *v /= total;
        }
        for v in &mut y_mean {
            *v /= total;
        }
        let records = self
            .records
            .iter()
            .map(|rec| {
                let mut inputs = rec.inputs.clone();
                let mut outputs = rec.outputs.clone();
                for (c, mean) in u_mean.iter().enumerate() {
                    inputs.row_mut(c).add_scalar_mut(-mean);
                }
                for (c, mean) in y_mean.iter().enumerate() {
                    outputs.row_mut(c).add_scalar_mut(-mean);
                }
                Record {
                    id: rec.id.clone(),
                    start_time: rec.start_time,
                    inputs,
                    outputs,
                }
            })
            .collect();
        Archive {
            records,
            m: self.m,
            p: self.p,
        }
    }
}

/// Where a data-matrix column came from: the window starts at sample
/// `offset` (0-based) of the named record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSource {
    pub record_id: String,
    pub offset: usize,
}

/// One selection entry: `count` windows at successive offsets
/// `offset, offset+1, ..., offset+count-1` of one record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionEntry {
    pub record_id: String,
    pub offset: usize,
    pub count: usize,
}

/// An ordered list of window groups across the archive. Entries with
/// `count = 0` are permitted and contribute nothing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnSelection {
    pub entries: Vec<SelectionEntry>,
}

impl ColumnSelection {
    pub fn new(entries: Vec<SelectionEntry>) -> Self {
        Self { entries }
    }

    /// Per-record window counts, all starting at offset 0, paired with the
    /// archive's records in order. Zero counts are skipped.
    pub fn from_counts(archive: &Archive, counts: &[usize]) -> Result<Self> {
        if counts.len() != archive.len() {
            return Err(Error::DimensionMismatch {
                context: "count vector length must equal record count",
                expected: archive.len(),
                actual: counts.len(),
            });
        }
        let entries = archive
            .records()
            .iter()
            .zip(counts)
            .filter(|(_, &count)| count > 0)
            .map(|(rec, &count)| SelectionEntry {
                record_id: rec.id().into(),
                offset: 0,
                count,
            })
            .collect();
        Ok(Self { entries })
    }

    pub fn total_columns(&self) -> usize {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_columns() == 0
    }
}

/// Stacked input and output data matrices whose columns are length-`ell`
/// windows, possibly drawn from different records.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRecordMatrices {
    u: DMatrix<f64>,
    y: DMatrix<f64>,
    ell: usize,
    provenance: Vec<ColumnSource>,
}

impl MultiRecordMatrices {
    /// Wraps raw stacked matrices. `provenance` may be empty when the
    /// column origins are unknown; otherwise it must name every column.
    pub fn from_parts(
        u: DMatrix<f64>,
        y: DMatrix<f64>,
        ell: usize,
        provenance: Vec<ColumnSource>,
    ) -> Result<Self> {
        assert!(ell >= 1, "block-row count must be at least 1");
        if u.ncols() != y.ncols() {
            return Err(Error::DimensionMismatch {
                context: "input and output column counts",
                expected: u.ncols(),
                actual: y.ncols(),
            });
        }
        if u.nrows() == 0 || !u.nrows().is_multiple_of(ell) {
            return Err(Error::DimensionMismatch {
                context: "input rows must be a nonzero multiple of ell",
                expected: ell,
                actual: u.nrows(),
            });
        }
        if y.nrows() == 0 || !y.nrows().is_multiple_of(ell) {
            return Err(Error::DimensionMismatch {
                context: "output rows must be a nonzero multiple of ell",
                expected: ell,
                actual: y.nrows(),
            });
        }
        if !provenance.is_empty() && provenance.len() != u.ncols() {
            return Err(Error::DimensionMismatch {
                context: "provenance length must equal column count",
                expected: u.ncols(),
                actual: provenance.len(),
            });
        }
        if !linalg::is_finite_mat(&u) || !linalg::is_finite_mat(&y) {
            return Err(Error::NonFinite {
                context: "data matrices",
            });
        }
        Ok(Self {
            u,
            y,
            ell,
            provenance,
        })
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn columns(&self) -> usize {
        self.u.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.u.nrows() / self.ell
    }

    pub fn output_dim(&self) -> usize {
        self.y.nrows() / self.ell
    }

    pub fn provenance(&self) -> &[ColumnSource] {
        &self.provenance
    }

    /// Inputs stacked over outputs, `ell*(m+p)` by `j`. Its rank measures
    /// how much of the joint input-output behavior the columns span.
    pub fn stacked(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.u.nrows() + self.y.nrows(), self.u.ncols());
        w.view_mut((0, 0), self.u.shape()).copy_from(&self.u);
        w.view_mut((self.u.nrows(), 0), self.y.shape())
            .copy_from(&self.y);
        w
    }
}

fn stack_window(dst: &mut DMatrix<f64>, col: usize, src: &DMatrix<f64>, offset: usize, ell: usize) {
    let ch = src.nrows();
    for k in 0..ell {
        dst.view_mut((k * ch, col), (ch, 1))
            .copy_from(&src.column(offset + k));
    }
}

/// Block-Hankel data matrices from the first `ell + j - 1` samples of one
/// record: column `k` is the window at offset `k`.
pub fn build_hankel(record: &Record, ell: usize, j: usize) -> Result<MultiRecordMatrices> {
    assert!(ell >= 1, "block-row count must be at least 1");
    assert!(j >= 1, "column count must be at least 1");
    let needed = ell + j - 1;
    if record.len() < needed {
        return Err(Error::RecordTooShort {
            record_id: record.id().into(),
            required: needed,
            actual: record.len(),
        });
    }
    let m = record.input_dim();
    let p = record.output_dim();
    let mut u = DMatrix::zeros(ell * m, j);
    let mut y = DMatrix::zeros(ell * p, j);
    let mut provenance = Vec::with_capacity(j);
    for k in 0..j {
        stack_window(&mut u, k, record.inputs(), k, ell);
        stack_window(&mut y, k, record.outputs(), k, ell);
        provenance.push(ColumnSource {
            record_id: record.id().into(),
            offset: k,
        });
    }
    MultiRecordMatrices::from_parts(u, y, ell, provenance)
}

/// Data matrices whose columns are the selected windows, in selection
/// order. A selection confined to one record at successive offsets from
/// zero reproduces [`build_hankel`] exactly.
pub fn build_multirecord(
    archive: &Archive,
    selection: &ColumnSelection,
    ell: usize,
) -> Result<MultiRecordMatrices> {
    assert!(ell >= 1, "block-row count must be at least 1");
    let j = selection.total_columns();
    if j == 0 {
        return Err(Error::EmptySelection);
    }
    let m = archive.input_dim();
    let p = archive.output_dim();
    let mut u = DMatrix::zeros(ell * m, j);
    let mut y = DMatrix::zeros(ell * p, j);
    let mut provenance = Vec::with_capacity(j);
    let mut col = 0;
    for entry in &selection.entries {
        if entry.count == 0 {
            continue;
        }
        let record = archive
            .get(&entry.record_id)
            .ok_or_else(|| Error::UnknownRecord {
                record_id: entry.record_id.clone(),
            })?;
        if entry.offset + entry.count + ell - 1 > record.len() {
            return Err(Error::WindowOutOfRange {
                record_id: entry.record_id.clone(),
                offset: entry.offset,
                count: entry.count,
                record_len: record.len(),
            });
        }
        for k in 0..entry.count {
            let offset = entry.offset + k;
            stack_window(&mut u, col, record.inputs(), offset, ell);
            stack_window(&mut y, col, record.outputs(), offset, ell);
            provenance.push(ColumnSource {
                record_id: entry.record_id.clone(),
                offset,
            });
            col += 1;
        }
    }
    MultiRecordMatrices::from_parts(u, y, ell, provenance)
}

/// Sample spans `[start, end)` merged per record, in order of each
/// record's first appearance in the selection.
fn merged_spans(selection: &ColumnSelection, ell: usize) -> Vec<(String, Vec<(usize, usize)>)> {
    let mut per_record: Vec<(String, Vec<(usize, usize)>)> = Vec::new();
    for entry in &selection.entries {
        if entry.count == 0 {
            continue;
        }
        let span = (entry.offset, entry.offset + entry.count + ell - 1);
        match per_record.iter_mut().find(|(id, _)| *id == entry.record_id) {
            Some((_, spans)) => spans.push(span),
            None => per_record.push((entry.record_id.clone(), vec![span])),
        }
    }
    for (_, spans) in &mut per_record {
        spans.sort_unstable();
        let mut merged: Vec<(usize, usize)> = Vec::with_capacity(spans.len());
        for &(start, end) in spans.iter() {
            match merged.last_mut() {
                Some(last) if start <= last.1 => last.1 = last.1.max(end),
                _ => merged.push((start, end)),
            }
        }
        *spans = merged;
    }
    per_record
}

/// Number of distinct `(u_t, y_t)` samples the selection consumes:
/// overlapping windows within a record are counted once.
pub fn data_pair_count(selection: &ColumnSelection, ell: usize) -> usize {
    assert!(ell >= 1, "block-row count must be at least 1");
    merged_spans(selection, ell)
        .iter()
        .flat_map(|(_, spans)| spans.iter().map(|(start, end)| end - start))
        .sum()
}

/// One maximal contiguous sample span covered by a selection, with its
/// data copied out. Every window of the selection lies inside exactly one
/// such span, so one initial state per span suffices for regression.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionWindow {
    pub record_id: String,
    pub offset: usize,
    pub inputs: DMatrix<f64>,
    pub outputs: DMatrix<f64>,
}

impl RegressionWindow {
    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.ncols() == 0
    }

    pub fn source(&self) -> ColumnSource {
        ColumnSource {
            record_id: self.record_id.clone(),
            offset: self.offset,
        }
    }
}

/// Merges the selection's windows into maximal contiguous spans per record
/// (overlapping or abutting spans become one) and extracts their samples.
pub fn regression_windows(
    archive: &Archive,
    selection: &ColumnSelection,
    ell: usize,
) -> Result<Vec<RegressionWindow>> {
    assert!(ell >= 1, "block-row count must be at least 1");
    if selection.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut windows = Vec::new();
    for (record_id, spans) in merged_spans(selection, ell) {
        let record = archive.get(&record_id).ok_or_else(|| Error::UnknownRecord {
            record_id: record_id.clone(),
        })?;
        for (start, end) in spans {
            if end > record.len() {
                return Err(Error::WindowOutOfRange {
                    record_id: record_id.clone(),
                    offset: start,
                    count: end - start,
                    record_len: record.len(),
                });
            }
            windows.push(RegressionWindow {
                record_id: record_id.clone(),
                offset: start,
                inputs: record.inputs().columns(start, end - start).into(),
                outputs: record.outputs().columns(start, end - start).into(),
            });
        }
    }
    Ok(windows)
}
