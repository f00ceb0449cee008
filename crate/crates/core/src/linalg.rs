//! Sparse direct solves for Newton corrections.
//!
//! Factorization is delegated to faer's sparse LU with partial pivoting and a COLAMD column
//! ordering, run sequentially so repeated solves are bit-reproducible. The CSR arrays of `J`
//! are handed to faer as the CSC arrays of `J^T`; systems with `J` are then transpose solves.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, NumericLu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Condition number (1-norm estimate) above which a system is reported as singular.
pub const MAX_CONDITION: f64 = 1e14;

/// Backward error `|J x + r| / (|J| |x| + |r|)` a solve must reach.
pub const MAX_BACKWARD_ERROR: f64 = 1e-12;

const REFINEMENT_STEPS: usize = 3;

/// LU factors of one matrix.
pub struct Factorization {
    symbolic: SymbolicLu<usize>,
    numeric: NumericLu<usize, f64>,
    n: usize,
}

impl Factorization {
    fn solve_with(&self, rhs: &mut [f64], transpose_of_stored: bool) {
        let lu = unsafe {
            // SAFETY: `numeric` was produced from `symbolic` in `LinearSolver::factor`.
            faer::sparse::linalg::lu::LuRef::new_unchecked(&self.symbolic, &self.numeric)
        };
        let mat = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        if transpose_of_stored {
            let mut buf = MemBuffer::new(self.symbolic.solve_transpose_in_place_scratch::<f64>(1, Par::Seq));
            lu.solve_transpose_in_place_with_conj(Conj::No, mat, Par::Seq, MemStack::new(&mut buf));
        } else {
            let mut buf = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
            lu.solve_in_place_with_conj(Conj::No, mat, Par::Seq, MemStack::new(&mut buf));
        }
    }

    /// Overwrites `rhs` with `J^{-1} rhs`.
    pub fn solve(&self, rhs: &mut [f64]) {
        self.solve_with(rhs, true);
    }

    /// Overwrites `rhs` with `J^{-T} rhs`.
    pub fn solve_transpose(&self, rhs: &mut [f64]) {
        self.solve_with(rhs, false);
    }
}

/// Sparse LU solver that keeps the symbolic analysis while the sparsity pattern is unchanged.
#[derive(Default)]
pub struct LinearSolver {
    cached: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
}

impl LinearSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factor(&mut self, j: &SparseMatrix) -> Result<Factorization> {
        let n = j.n_rows();
        if n != j.n_cols() {
            return Err(Error::InvalidArgument("Jacobian is not square".into()));
        }
        if j.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix("matrix has non-finite entries".into()));
        }
        let pattern = SymbolicSparseColMatRef::new_checked(n, n, j.row_ptr(), None, j.col_idx());
        let reuse = matches!(&self.cached, Some((p, c, _)) if p == j.row_ptr() && c == j.col_idx());
        if !reuse {
            let symbolic = factorize_symbolic_lu(pattern, Default::default())
                .map_err(|e| Error::SingularMatrix(format!("symbolic analysis failed: {e:?}")))?;
            self.cached = Some((j.row_ptr().to_vec(), j.col_idx().to_vec(), symbolic));
        }
        let symbolic = self.cached.as_ref().expect("cached above").2.clone();
        let mut numeric = NumericLu::new();
        let mut buf = MemBuffer::new(symbolic.factorize_numeric_lu_scratch::<f64>(Par::Seq, Default::default()));
        // faer panics instead of returning an error on an exactly zero pivot.
        let factored = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            symbolic
                .factorize_numeric_lu(
                    &mut numeric,
                    SparseColMatRef::new(pattern, j.values()),
                    Par::Seq,
                    MemStack::new(&mut buf),
                    Default::default(),
                )
                .map(|_| ())
        }));
        match factored {
            Ok(Ok(())) => Ok(Factorization { symbolic, numeric, n }),
            Ok(Err(e)) => Err(Error::SingularMatrix(format!("numeric factorization failed: {e:?}"))),
            Err(_) => Err(Error::SingularMatrix("zero pivot in numeric factorization".into())),
        }
    }

    /// Solves `J delta = -r`, refining until the backward error is below
    /// [`MAX_BACKWARD_ERROR`], and rejects systems whose estimated condition number exceeds
    /// [`MAX_CONDITION`].
    pub fn solve(&mut self, j: &SparseMatrix, r: &[f64]) -> Result<Vec<f64>> {
        let lu = self.factor(j)?;
        let cond = condition_estimate(j, &lu);
        if !(cond.is_finite() && cond <= MAX_CONDITION) {
            return Err(Error::SingularMatrix(format!("condition estimate {cond:e} exceeds {MAX_CONDITION:e}")));
        }
        let mut delta: Vec<f64> = r.iter().map(|v| -v).collect();
        lu.solve(&mut delta);
        let norm_j = j.norm_inf();
        let norm_r = max_abs(r);
        for _ in 0..=REFINEMENT_STEPS {
            if delta.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularMatrix("solution is not finite".into()));
            }
            let jd = j.mul_vec(&delta);
            let mut defect: Vec<f64> = jd.iter().zip(r).map(|(a, b)| a + b).collect();
            let scale = norm_j * max_abs(&delta) + norm_r;
            if scale == 0.0 || max_abs(&defect) <= MAX_BACKWARD_ERROR * scale {
                return Ok(delta);
            }
            lu.solve(&mut defect);
            delta.iter_mut().zip(&defect).for_each(|(d, e)| *d -= e);
        }
        Err(Error::SingularMatrix("iterative refinement did not reach the backward error bound".into()))
    }
}

/// One-shot `J delta = -r`.
pub fn linear_solve(j: &SparseMatrix, r: &[f64]) -> Result<Vec<f64>> {
    LinearSolver::new().solve(j, r)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Hager's 1-norm estimate of `|J|_1 |J^{-1}|_1`.
pub fn condition_estimate(j: &SparseMatrix, lu: &Factorization) -> f64 {
    let n = j.n_rows();
    if n == 0 {
        return 1.0;
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut estimate = 0.0;
    for _ in 0..5 {
        let mut y = x.clone();
        lu.solve(&mut y);
        let y_norm: f64 = y.iter().map(|v| v.abs()).sum();
        if !y_norm.is_finite() {
            return f64::INFINITY;
        }
        estimate = f64::max(estimate, y_norm);
        let mut z: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
        lu.solve_transpose(&mut z);
        let (arg, zmax) = z.iter().enumerate().fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        if zmax <= zx {
            break;
        }
        x.iter_mut().for_each(|v| *v = 0.0);
        x[arg] = 1.0;
    }
    j.norm_one() * estimate
}
