//! Thin wrappers around nalgebra's SVD used by the rest of the crate.
//!
//! Every pseudo-inverse and least-squares solve in this crate goes through
//! `lstsq`, which truncates singular values at a relative threshold. Rank
//! decisions are made elsewhere from the spectra these helpers return.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `sqrt` routed through `num_traits` so the crate builds without `std`.
#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    num_traits::Float::sqrt(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    num_traits::Float::sin(x)
}

#[inline]
pub(crate) fn hypot(re: f64, im: f64) -> f64 {
    sqrt(re * re + im * im)
}

pub(crate) fn is_finite_mat(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    /// Singular values, nonincreasing.
    pub sv: Vec<f64>,
    pub v_t: DMatrix<f64>,
}

/// Thin SVD with singular values sorted nonincreasing, matching the column
/// order of `u` and the row order of `v_t`.
///
/// The QR-iteration decomposition occasionally returns without having
/// converged (most often on exactly low-rank matrices, which this crate
/// produces constantly from noise-free data), leaving factors that are
/// orthogonal but point up to ~1e-5 away from the true singular
/// directions. Every result is therefore verified by reconstruction, and
/// a one-sided Jacobi decomposition — slower but accurate to working
/// precision — takes over whenever the verification fails.
pub(crate) fn thin_svd(m: &DMatrix<f64>, context: &'static str) -> Result<ThinSvd> {
    if !is_finite_mat(m) {
        return Err(Error::NonFinite { context });
    }
    let svd = m.clone().svd(true, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    debug_assert!(sv.windows(2).all(|w| w[0] >= w[1]));
    let thin = ThinSvd {
        u: svd.u.expect("svd requested u"),
        sv,
        v_t: svd.v_t.expect("svd requested v_t"),
    };
    if reconstructs(&thin, m) {
        Ok(thin)
    } else {
        Ok(jacobi_thin_svd(m))
    }
}

/// Whether `u diag(sv) v_t` reproduces `m` to near working precision.
fn reconstructs(svd: &ThinSvd, m: &DMatrix<f64>) -> bool {
    let mut scaled = svd.u.clone();
    for (i, &s) in svd.sv.iter().enumerate() {
        scaled.column_mut(i).scale_mut(s);
    }
    let residual = (&scaled * &svd.v_t - m).norm();
    residual <= 1e-10 * m.norm().max(f64::MIN_POSITIVE)
}

/// One-sided Jacobi SVD: orthogonalizes the columns of the tall
/// orientation by plane rotations. Converges unconditionally and keeps
/// high relative accuracy, at a few times the cost of the QR iteration.
/// Columns with zero singular value get zero vectors on the short side;
/// callers only consume directions above a positive rank cutoff.
fn jacobi_thin_svd(m: &DMatrix<f64>) -> ThinSvd {
    let transposed = m.nrows() < m.ncols();
    let mut a = if transposed { m.transpose() } else { m.clone() };
    let rows = a.nrows();
    let cols = a.ncols();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let aii = a.column(i).dot(&a.column(i));
                let ajj = a.column(j).dot(&a.column(j));
                let g = a.column(i).dot(&a.column(j));
                if g.abs() <= 1e-15 * sqrt(aii * ajj) {
                    continue;
                }
                rotated = true;
                let tau = (ajj - aii) / (2.0 * g);
                let t = if tau >= 0.0 {
                    1.0 / (tau + sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = c * t;
                for r in 0..rows {
                    let x = a[(r, i)];
                    let y = a[(r, j)];
                    a[(r, i)] = c * x - s * y;
                    a[(r, j)] = s * x + c * y;
                }
                for r in 0..cols {
                    let x = v[(r, i)];
                    let y = v[(r, j)];
                    v[(r, i)] = c * x - s * y;
                    v[(r, j)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..cols).map(|i| a.column(i).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut left = DMatrix::zeros(rows, cols);
    let mut right = DMatrix::zeros(cols, cols);
    let mut sv = Vec::with_capacity(cols);
    for (idx, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        sv.push(sigma);
        if sigma > 0.0 {
            left.column_mut(idx)
                .copy_from(&(a.column(src) / sigma));
        }
        right.column_mut(idx).copy_from(&v.column(src));
    }
    if transposed {
        // m = (left diag right^T)^T of the tall copy = right diag left^T.
        ThinSvd {
            u: right,
            sv,
            v_t: left.transpose(),
        }
    } else {
        ThinSvd {
            u: left,
            sv,
            v_t: right.transpose(),
        }
    }
}

/// Singular values only, nonincreasing. Empty matrices have an empty
/// spectrum. Routed through the verified decomposition so that rank
/// decisions never read an unconverged spectrum.
pub(crate) fn singular_values(m: &DMatrix<f64>, context: &'static str) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    Ok(thin_svd(m, context)?.sv)
}

/// Minimum-norm least-squares solution of `a x = b` via SVD, truncating
/// singular values at `rel_tol` times the largest.
pub(crate) fn lstsq(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    rel_tol: f64,
    context: &'static str,
) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            context,
            expected: a.nrows(),
            actual: b.nrows(),
        });
    }
    if !is_finite_mat(b) {
        return Err(Error::NonFinite { context });
    }
    let svd = thin_svd(a, context)?;
    let cutoff = svd.sv.first().copied().unwrap_or(0.0) * rel_tol;
    let rank = svd.sv.iter().take_while(|&&s| s > cutoff).count();
    let mut x = DMatrix::zeros(a.ncols(), b.ncols());
    if rank == 0 {
        return Ok(x);
    }
    // x = V_r diag(1/s_r) U_r^T b
    let mut coeffs = svd.u.columns(0, rank).transpose() * b;
    for i in 0..rank {
        coeffs.row_mut(i).scale_mut(1.0 / svd.sv[i]);
    }
    x += svd.v_t.rows(0, rank).transpose() * coeffs;
    Ok(x)
}

/// Moore-Penrose pseudo-inverse via SVD truncation at `rel_tol`.
pub(crate) fn pinv(a: &DMatrix<f64>, rel_tol: f64, context: &'static str) -> Result<DMatrix<f64>> {
    lstsq(a, &DMatrix::identity(a.nrows(), a.nrows()), rel_tol, context)
}

/// Largest eigenvalue magnitude of a square matrix.
pub(crate) fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|l| hypot(l.re, l.im))
        .fold(0.0, f64::max)
}

/// Two-norm condition number from a nonincreasing spectrum.
pub(crate) fn condition_from_spectrum(sv: &[f64]) -> f64 {
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(&hi), _) if hi > 0.0 => f64::INFINITY,
        _ => f64::NAN,
    }
}
