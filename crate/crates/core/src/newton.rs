//! Damped Newton iteration for `Q[u] = Upsilon_t(e^u x)` in the cap, `u = phi` on its boundary.

use crate::error::{Error, Result};
use crate::linalg::LinearSolver;
use crate::operator::RadialGraphOperator;
use crate::rhs::RightHandSide;
use crate::sphere::{PolarGrid, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    /// Max-norm residual at which the iteration stops.
    pub residual_tol: f64,
    pub max_newton_iters: usize,
    /// Step reduction factor in the backtracking line search.
    pub backtrack: f64,
    /// Sufficient decrease: accept `|r(u + a d)| <= (1 - armijo a) |r(u)|`.
    pub armijo: f64,
    pub min_step: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { residual_tol: 1e-10, max_newton_iters: 50, backtrack: 0.5, armijo: 1e-4, min_step: 2f64.powi(-20) }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) || self.max_newton_iters < 1 {
            return Err(Error::InvalidArgument("residual_tol must be positive and max_newton_iters >= 1".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0 && self.min_step > 0.0 && self.min_step <= 1.0) {
            return Err(Error::InvalidArgument("line search parameters out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iter: usize,
    /// Max-norm residual before the step.
    pub residual: f64,
    /// Accepted step length.
    pub step: f64,
}

/// Ordering of a solution against the subsolution `u_bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderingDiagnostics {
    /// `min (u_bar - u)` over all nodes.
    pub min_gap: f64,
    /// `min (u_bar - u)` over interior nodes.
    pub min_interior_gap: f64,
    /// `max` over the boundary of the inward normal derivative of `u - u_bar`.
    pub max_boundary_normal_derivative: f64,
}

impl OrderingDiagnostics {
    pub fn compute(u: &ScalarField, ubar: &ScalarField) -> Self {
        let grid = u.grid();
        let gap: Vec<f64> = ubar.values().iter().zip(u.values()).map(|(b, a)| b - a).collect();
        let min_gap = gap.iter().copied().fold(f64::INFINITY, f64::min);
        let min_interior_gap = gap[..grid.num_interior()].iter().copied().fold(f64::INFINITY, f64::min);
        let max_boundary_normal_derivative = boundary_normal_derivative(grid, &gap)
            .into_iter()
            .map(|d| -d)
            .fold(f64::NEG_INFINITY, f64::max);
        Self { min_gap, min_interior_gap, max_boundary_normal_derivative }
    }
}

/// Inward normal derivative on the boundary ring by the second-order one-sided difference
/// `(-3 f_N + 4 f_{N-1} - f_{N-2}) / (2 dtheta)`; needs `n_theta >= 2`.
pub fn boundary_normal_derivative(grid: &PolarGrid, f: &[f64]) -> Vec<f64> {
    let n = grid.n_theta();
    let dt = grid.dtheta();
    (0..grid.n_phi() as isize)
        .map(|j| {
            let at = |i: usize| f[grid.index(i, j)];
            (-3.0 * at(n) + 4.0 * at(n - 1) - at(n - 2)) / (2.0 * dt)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub u: ScalarField,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub log: Vec<IterationLog>,
    pub diagnostics: OrderingDiagnostics,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton solver bound to one grid; keeps the operator stencils and the symbolic LU.
pub struct NewtonSolver {
    operator: RadialGraphOperator,
    linear: LinearSolver,
    config: SolveConfig,
}

impl NewtonSolver {
    pub fn new(grid: &PolarGrid, config: SolveConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { operator: RadialGraphOperator::new(grid)?, linear: LinearSolver::new(), config })
    }

    pub fn operator(&self) -> &RadialGraphOperator {
        &self.operator
    }

    pub fn config(&self) -> &SolveConfig {
        &self.config
    }

    /// Max-norm of `Q[u] - Upsilon` over the interior.
    pub fn residual_norm(&self, rhs: &RightHandSide, u: &ScalarField) -> Result<f64> {
        Ok(max_norm(&self.operator.residual(u, rhs)?))
    }

    /// `u0` must already carry the boundary values `phi`; they are never modified.
    pub fn solve(&mut self, rhs: &RightHandSide, phi: &[f64], u0: &ScalarField) -> Result<SolveOutcome> {
        let grid = *self.operator.grid();
        if u0.grid() != &grid {
            return Err(Error::InvalidArgument("initial guess lives on a different grid".into()));
        }
        if phi.len() != grid.n_phi() || u0.boundary_values().iter().zip(phi).any(|(a, b)| a.to_bits() != b.to_bits()) {
            return Err(Error::InvalidArgument("initial guess does not satisfy the boundary condition".into()));
        }
        let cfg = self.config;
        let n_int = grid.num_interior();
        let mut u = u0.clone();
        let mut norm = self.residual_norm(rhs, &u)?;
        let mut log = Vec::new();
        for iter in 0..cfg.max_newton_iters {
            if norm <= cfg.residual_tol {
                return Ok(self.outcome(u, iter, norm, log, rhs));
            }
            let lin = self.operator.linearize(&u, rhs)?;
            let delta = self.linear.solve(&lin.jacobian, &lin.residual)?;
            let mut step = 1.0;
            loop {
                let mut trial = u.clone();
                trial.values_mut()[..n_int].iter_mut().zip(&delta).for_each(|(v, d)| *v += step * d);
                if trial.values()[..n_int].iter().all(|v| v.is_finite()) {
                    let r = self.operator.residual(&trial, rhs)?;
                    let trial_norm = max_norm(&r);
                    if trial_norm.is_finite() && trial_norm <= (1.0 - cfg.armijo * step) * norm {
                        log::debug!("newton iter {iter} residual {norm:.3e} step {step}");
                        log.push(IterationLog { iter, residual: norm, step });
                        u = trial;
                        norm = trial_norm;
                        break;
                    }
                }
                step *= cfg.backtrack;
                if step < cfg.min_step {
                    return Err(Error::LineSearchFailed { iteration: iter, residual: norm, last_iterate: Box::new(u) });
                }
            }
        }
        if norm <= cfg.residual_tol {
            return Ok(self.outcome(u, cfg.max_newton_iters, norm, log, rhs));
        }
        Err(Error::MaxItersExceeded { iterations: cfg.max_newton_iters, residual: norm, last_iterate: Box::new(u) })
    }

    fn outcome(&self, u: ScalarField, iterations: usize, norm: f64, log: Vec<IterationLog>, rhs: &RightHandSide) -> SolveOutcome {
        let diagnostics = OrderingDiagnostics::compute(&u, rhs.subsolution().field());
        SolveOutcome { u, iterations, final_residual: norm, converged: true, log, diagnostics }
    }
}

/// One Dirichlet solve from `u0`.
pub fn newton_solve(rhs: &RightHandSide, phi: &[f64], u0: &ScalarField, cfg: SolveConfig) -> Result<SolveOutcome> {
    NewtonSolver::new(u0.grid(), cfg)?.solve(rhs, phi, u0)
}
