//! Discrete-time linear state-space models and the derived matrices the
//! identification pipeline needs from them.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Condition-number limit above which similarity transforms are rejected.
pub const SIMILARITY_COND_LIMIT: f64 = 1e12;

/// A minimal realization `x_{t+1} = A x_t + B u_t`, `y_t = C x_t + D u_t`.
///
/// Construction checks shapes and finiteness only; minimality is the
/// caller's concern.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl StateSpaceModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        let p = c.nrows();
        if a.ncols() != n || n == 0 {
            return Err(Error::DimensionMismatch {
                context: "state matrix must be square and nonempty",
                expected: n,
                actual: a.ncols(),
            });
        }
        if b.nrows() != n || m == 0 {
            return Err(Error::DimensionMismatch {
                context: "input matrix rows must equal state dimension",
                expected: n,
                actual: b.nrows(),
            });
        }
        if c.ncols() != n || p == 0 {
            return Err(Error::DimensionMismatch {
                context: "output matrix columns must equal state dimension",
                expected: n,
                actual: c.ncols(),
            });
        }
        if d.nrows() != p || d.ncols() != m {
            return Err(Error::DimensionMismatch {
                context: "feedthrough matrix must be p-by-m",
                expected: p * m,
                actual: d.nrows() * d.ncols(),
            });
        }
        for (mat, context) in [
            (&a, "state matrix"),
            (&b, "input matrix"),
            (&c, "output matrix"),
            (&d, "feedthrough matrix"),
        ] {
            if !linalg::is_finite_mat(mat) {
                return Err(Error::NonFinite { context });
            }
        }
        Ok(Self { a, b, c, d })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.a)
    }

    /// Strict Schur stability: every eigenvalue magnitude below one.
    pub fn is_stable(&self) -> bool {
        self.spectral_radius() < 1.0
    }

    /// Runs the state recursion from `x1` over the given input columns.
    pub fn simulate(&self, x1: &DVector<f64>, inputs: &DMatrix<f64>) -> Result<Trajectory> {
        let n = self.state_dim();
        let m = self.input_dim();
        let p = self.output_dim();
        if x1.len() != n {
            return Err(Error::DimensionMismatch {
                context: "initial state length",
                expected: n,
                actual: x1.len(),
            });
        }
        if inputs.nrows() != m {
            return Err(Error::DimensionMismatch {
                context: "input rows must equal input dimension",
                expected: m,
                actual: inputs.nrows(),
            });
        }
        let steps = inputs.ncols();
        let mut outputs = DMatrix::zeros(p, steps);
        let mut x = x1.clone();
        for t in 0..steps {
            let u = inputs.column(t);
            outputs.set_column(t, &(&self.c * &x + &self.d * u));
            x = &self.a * &x + &self.b * u;
        }
        Ok(Trajectory {
            initial_state: x1.clone(),
            inputs: inputs.clone(),
            outputs,
        })
    }

    /// Stacked maps from state to the next `ell` outputs:
    /// rows `[C; CA; ...; CA^(ell-1)]`, shape `ell*p` by `n`.
    pub fn observability_matrix(&self, ell: usize) -> DMatrix<f64> {
        assert!(ell >= 1, "block-row count must be at least 1");
        let n = self.state_dim();
        let p = self.output_dim();
        let mut out = DMatrix::zeros(ell * p, n);
        let mut block = self.c.clone();
        for i in 0..ell {
            out.view_mut((i * p, 0), (p, n)).copy_from(&block);
            if i + 1 < ell {
                block = &block * &self.a;
            }
        }
        out
    }

    /// Lower block-triangular map from `ell` stacked inputs to `ell` stacked
    /// outputs: block `(i, j)` is `D` on the diagonal and `C A^(i-j-1) B`
    /// below it, shape `ell*p` by `ell*m`.
    pub fn toeplitz_matrix(&self, ell: usize) -> DMatrix<f64> {
        assert!(ell >= 1, "block-row count must be at least 1");
        let m = self.input_dim();
        let p = self.output_dim();
        let params = self.markov_parameters(ell);
        let mut out = DMatrix::zeros(ell * p, ell * m);
        for i in 0..ell {
            for j in 0..=i {
                out.view_mut((i * p, j * m), (p, m)).copy_from(&params[i - j]);
            }
        }
        out
    }

    /// Impulse-response sequence `D, CB, CAB, ...`, `count` terms of shape
    /// `p` by `m` each.
    pub fn markov_parameters(&self, count: usize) -> Vec<DMatrix<f64>> {
        assert!(count >= 1, "parameter count must be at least 1");
        let mut params = Vec::with_capacity(count);
        params.push(self.d.clone());
        let mut cak = self.c.clone();
        for _ in 1..count {
            params.push(&cak * &self.b);
            cak = &cak * &self.a;
        }
        params
    }

    /// Change of state basis `x -> T x`, producing
    /// `(T A T^-1, T B, C T^-1, D)`. Rejected when `cond(T)` exceeds
    /// [`SIMILARITY_COND_LIMIT`].
    pub fn apply_similarity(&self, t: &DMatrix<f64>) -> Result<Self> {
        let n = self.state_dim();
        if t.nrows() != n || t.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "similarity transform must be n-by-n",
                expected: n,
                actual: t.nrows(),
            });
        }
        let sv = linalg::singular_values(t, "similarity transform")?;
        let cond = linalg::condition_from_spectrum(&sv);
        // NaN must fail the gate too, hence the explicit check.
        if cond.is_nan() || cond > SIMILARITY_COND_LIMIT {
            return Err(Error::IllConditioned {
                context: "similarity transform",
                condition: cond,
                limit: SIMILARITY_COND_LIMIT,
            });
        }
        let t_inv = linalg::pinv(t, f64::EPSILON, "similarity transform")?;
        StateSpaceModel::new(
            t * &self.a * &t_inv,
            t * &self.b,
            &self.c * &t_inv,
            self.d.clone(),
        )
    }
}

/// One simulated or measured run: inputs and outputs column-per-sample,
/// plus the state the run started from.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial_state: DVector<f64>,
    pub inputs: DMatrix<f64>,
    pub outputs: DMatrix<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.ncols() == 0
    }
}
