//! Subspace estimation from multi-record data matrices.
//!
//! The pipeline has four stages: project the output data onto the
//! orthogonal complement of the input row space, read the extended
//! observability range off the projected data's SVD, recover `A` and `C`
//! from its shift structure, then solve one linear regression for `B`, `D`,
//! and an initial state per contiguous data span.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::archive::{ColumnSource, MultiRecordMatrices, RegressionWindow};
use crate::error::{Error, Result};
use crate::identifiability::{check_identifiability, IdentifiabilityReport, RankConfig};
use crate::linalg;
use crate::model::StateSpaceModel;

/// Output data with the input row space projected out.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    /// `Y` times the orthogonal-complement projector of the input rows,
    /// same shape as `Y`.
    pub projected: DMatrix<f64>,
    /// Dimension of the complement: columns minus the input row rank.
    pub projector_rank: usize,
}

/// Multiplies the output data by the projector onto the orthogonal
/// complement of the input row space, without forming the j-by-j
/// projector. Input directions are truncated at the threshold
/// `max(rel_tol * largest, abs_tol)` regardless of the rank mode, since
/// this is a pseudo-inverse, not a rank decision.
pub fn project_out_inputs(
    data: &MultiRecordMatrices,
    cfg: &RankConfig,
) -> Result<ProjectionResult> {
    cfg.validate()?;
    let svd = linalg::thin_svd(data.u(), "stacked input matrix")?;
    let cutoff = f64::max(
        svd.sv.first().copied().unwrap_or(0.0) * cfg.rel_tol,
        cfg.abs_tol,
    );
    let rank = svd.sv.iter().take_while(|&&s| s > cutoff).count();
    let j = data.columns();
    let mut projected = data.y().clone();
    if rank > 0 {
        let basis_t = svd.v_t.rows(0, rank);
        projected -= (data.y() * basis_t.transpose()) * basis_t;
    }
    Ok(ProjectionResult {
        projected,
        projector_rank: j - rank,
    })
}

/// `A`, `C`, and the scaled observability-range basis they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct AcEstimate {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Left singular block scaled by root singular values; its top block
    /// is `c` and its shift relation yields `a`.
    pub gamma: DMatrix<f64>,
    /// Full spectrum of the projected data.
    pub singular_values: Vec<f64>,
}

/// Recovers `A` and `C` of an order-`state_dim` model from the projected
/// output data via the shift structure of its dominant left singular
/// block.
pub fn extract_ac(
    projected: &DMatrix<f64>,
    state_dim: usize,
    ell: usize,
    cfg: &RankConfig,
) -> Result<AcEstimate> {
    assert!(ell >= 1, "block-row count must be at least 1");
    cfg.validate()?;
    if projected.nrows() == 0 || !projected.nrows().is_multiple_of(ell) {
        return Err(Error::DimensionMismatch {
            context: "projected rows must be a nonzero multiple of ell",
            expected: ell,
            actual: projected.nrows(),
        });
    }
    let p = projected.nrows() / ell;
    if (ell - 1) * p < state_dim {
        return Err(Error::DimensionMismatch {
            context: "shift structure needs (ell-1)*p rows of at least the state dimension",
            expected: state_dim,
            actual: (ell - 1) * p,
        });
    }
    let svd = linalg::thin_svd(projected, "projected output data")?;
    let rank = cfg.rank_of_spectrum(&svd.sv);
    if rank < state_dim {
        return Err(Error::RankDeficient {
            context: "projected output data",
            rank,
            required: state_dim,
            singular_values: svd.sv.clone(),
        });
    }
    let mut gamma = DMatrix::zeros(projected.nrows(), state_dim);
    for k in 0..state_dim {
        let scale = linalg::sqrt(svd.sv[k]);
        gamma.column_mut(k).copy_from(&(svd.u.column(k) * scale));
    }
    let c = gamma.rows(0, p).into_owned();
    let upper = gamma.rows(0, (ell - 1) * p).into_owned();
    let lower = gamma.rows(p, (ell - 1) * p).into_owned();
    let sv_upper = linalg::singular_values(&upper, "observability shift block")?;
    if cfg.rank_of_spectrum(&sv_upper) < state_dim {
        return Err(Error::RankDeficient {
            context: "observability shift block",
            rank: cfg.rank_of_spectrum(&sv_upper),
            required: state_dim,
            singular_values: sv_upper,
        });
    }
    let a = linalg::lstsq(&upper, &lower, cfg.rel_tol, "observability shift block")?;
    Ok(AcEstimate {
        a,
        c,
        gamma,
        singular_values: svd.sv,
    })
}

/// Builds the regression relating every output sample in the windows to
/// the entries of `B` (column-stacked), `D` (column-stacked), and one
/// initial state per window.
///
/// For window sample `t` (1-based within the window), the output is
/// `sum_{tau<t} (u_tau^T kron C A^(t-1-tau)) vec(B)` plus
/// `(u_t^T kron I) vec(D)` plus `C A^(t-1) x_1`. Returns the stacked
/// coefficient matrix and output vector, ordered window by window,
/// sample by sample.
pub fn build_regressor(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    windows: &[RegressionWindow],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if windows.is_empty() {
        return Err(Error::EmptySelection);
    }
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "state matrix must be square",
            expected: n,
            actual: a.ncols(),
        });
    }
    if c.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "output matrix columns must equal state dimension",
            expected: n,
            actual: c.ncols(),
        });
    }
    let p = c.nrows();
    let m = windows[0].inputs.nrows();
    for w in windows {
        if w.inputs.nrows() != m {
            return Err(Error::DimensionMismatch {
                context: "window input channels",
                expected: m,
                actual: w.inputs.nrows(),
            });
        }
        if w.outputs.nrows() != p {
            return Err(Error::DimensionMismatch {
                context: "window output channels",
                expected: p,
                actual: w.outputs.nrows(),
            });
        }
    }
    let total_samples: usize = windows.iter().map(RegressionWindow::len).sum();
    let b_cols = n * m;
    let d_cols = m * p;
    let cols = b_cols + d_cols + n * windows.len();
    let mut regressor = DMatrix::zeros(p * total_samples, cols);
    let mut outputs = DVector::zeros(p * total_samples);
    let mut row = 0;
    for (w_idx, window) in windows.iter().enumerate() {
        let x0_col = b_cols + d_cols + w_idx * n;
        // running B coefficient: sum over past inputs of u^T kron C A^power,
        // advanced one step by right-multiplying each n-column block by A
        let mut b_coeff = DMatrix::<f64>::zeros(p, b_cols);
        // C A^(t-1), advanced by right-multiplying by A
        let mut ca_pow = c.clone();
        for t in 0..window.len() {
            let u_t = window.inputs.column(t);
            regressor
                .view_mut((row, 0), (p, b_cols))
                .copy_from(&b_coeff);
            for k in 0..m {
                let mut d_block = regressor.view_mut((row, b_cols + k * p), (p, p));
                for i in 0..p {
                    d_block[(i, i)] = u_t[k];
                }
            }
            regressor
                .view_mut((row, x0_col), (p, n))
                .copy_from(&ca_pow);
            outputs
                .rows_mut(row, p)
                .copy_from(&window.outputs.column(t));
            row += p;
            for k in 0..m {
                let advanced = b_coeff.view((0, k * n), (p, n)) * a + c * u_t[k];
                b_coeff.view_mut((0, k * n), (p, n)).copy_from(&advanced);
            }
            ca_pow = &ca_pow * a;
        }
    }
    if !linalg::is_finite_mat(&regressor) {
        return Err(Error::NonFinite {
            context: "input-response regressor (state powers overflowed)",
        });
    }
    Ok((regressor, outputs))
}

/// Solution of the input-map regression.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMapSolution {
    pub b: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// One state per regression window, in window order.
    pub initial_states: Vec<DVector<f64>>,
    pub singular_values: Vec<f64>,
    pub condition: f64,
    pub residual_norm: f64,
}

/// Minimum-norm least-squares solve of the regression built by
/// [`build_regressor`], unpacked into `B`, `D`, and the window states.
pub fn solve_bd_x0(
    regressor: &DMatrix<f64>,
    outputs: &DVector<f64>,
    state_dim: usize,
    input_dim: usize,
    output_dim: usize,
    cfg: &RankConfig,
) -> Result<InputMapSolution> {
    cfg.validate()?;
    let b_cols = state_dim * input_dim;
    let d_cols = input_dim * output_dim;
    if regressor.ncols() < b_cols + d_cols
        || !(regressor.ncols() - b_cols - d_cols).is_multiple_of(state_dim)
    {
        return Err(Error::DimensionMismatch {
            context: "regressor columns must hold B, D, and whole states",
            expected: b_cols + d_cols,
            actual: regressor.ncols(),
        });
    }
    let window_count = (regressor.ncols() - b_cols - d_cols) / state_dim;
    let sv = linalg::singular_values(regressor, "input-response regressor")?;
    let rhs = DMatrix::from_column_slice(outputs.len(), 1, outputs.as_slice());
    let theta = linalg::lstsq(regressor, &rhs, cfg.rel_tol, "input-response regressor")?;
    let residual_norm = (regressor * &theta - &rhs).norm();
    let theta = theta.column(0);
    let b = DMatrix::from_column_slice(state_dim, input_dim, theta.rows(0, b_cols).as_slice());
    let d = DMatrix::from_column_slice(
        output_dim,
        input_dim,
        theta.rows(b_cols, d_cols).as_slice(),
    );
    let initial_states = (0..window_count)
        .map(|i| {
            DVector::from_column_slice(
                theta
                    .rows(b_cols + d_cols + i * state_dim, state_dim)
                    .as_slice(),
            )
        })
        .collect();
    Ok(InputMapSolution {
        b,
        d,
        initial_states,
        condition: linalg::condition_from_spectrum(&sv),
        singular_values: sv,
        residual_norm,
    })
}

/// A fitted model with everything needed to audit the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub model: StateSpaceModel,
    /// Estimated state at the start of each regression window.
    pub initial_states: Vec<(ColumnSource, DVector<f64>)>,
    /// Spectrum of the projected output data the order was read from.
    pub sv_projected: Vec<f64>,
    pub regressor_shape: (usize, usize),
    pub regressor_singular_values: Vec<f64>,
    pub regressor_condition: f64,
    pub residual_norm: f64,
    pub stable: bool,
    pub identifiability: IdentifiabilityReport,
}

fn fit_inner(
    data: &MultiRecordMatrices,
    windows: &[RegressionWindow],
    state_dim: usize,
    cfg: &RankConfig,
    enforce_gate: bool,
) -> Result<EstimationResult> {
    let report = check_identifiability(data, state_dim, cfg)?;
    if enforce_gate && !report.pass {
        return Err(Error::NotIdentifiable {
            report: alloc::boxed::Box::new(report),
        });
    }
    let m = data.input_dim();
    let p = data.output_dim();
    for w in windows {
        if w.inputs.nrows() != m || w.outputs.nrows() != p {
            return Err(Error::DimensionMismatch {
                context: "window channels must match data matrices",
                expected: m,
                actual: w.inputs.nrows(),
            });
        }
    }
    let projection = project_out_inputs(data, cfg)?;
    let ac = extract_ac(&projection.projected, state_dim, data.ell(), cfg)?;
    let (regressor, outputs) = build_regressor(&ac.a, &ac.c, windows)?;
    let solution = solve_bd_x0(&regressor, &outputs, state_dim, m, p, cfg)?;
    let model = StateSpaceModel::new(ac.a, solution.b, ac.c, solution.d)?;
    let stable = model.is_stable();
    let initial_states = windows
        .iter()
        .map(RegressionWindow::source)
        .zip(solution.initial_states)
        .collect();
    Ok(EstimationResult {
        model,
        initial_states,
        sv_projected: ac.singular_values,
        regressor_shape: regressor.shape(),
        regressor_singular_values: solution.singular_values,
        regressor_condition: solution.condition,
        residual_norm: solution.residual_norm,
        stable,
        identifiability: report,
    })
}

/// Full estimation pipeline, refused when the identifiability test fails.
pub fn fit(
    data: &MultiRecordMatrices,
    windows: &[RegressionWindow],
    state_dim: usize,
    cfg: &RankConfig,
) -> Result<EstimationResult> {
    fit_inner(data, windows, state_dim, cfg, true)
}

/// Same pipeline with the identifiability gate disabled. The report is
/// still computed and carried in the result so the override is auditable.
pub fn fit_unchecked(
    data: &MultiRecordMatrices,
    windows: &[RegressionWindow],
    state_dim: usize,
    cfg: &RankConfig,
) -> Result<EstimationResult> {
    fit_inner(data, windows, state_dim, cfg, false)
}
