//! Two-stage continuation in `t`: the `Psi` family from the subsolution to the hand-off
//! problem, then the `Theta` family to constant mean curvature `H`.

use std::sync::Arc;

use crate::barriers::{
    certify_gradient_barrier, certify_height_barrier, check_solution_between_barriers, BarrierCertificate, BarrierReport,
    BarrierSearch,
};
use crate::boundary::BoundaryData;
use crate::error::{Error, Result};
use crate::newton::{NewtonSolver, SolveConfig};
use crate::rhs::{rho_checks, select_constants, Family, HomotopyConstants, RhoCheckReport, RightHandSide, Subsolution};
use crate::sphere::{PolarGrid, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    /// `Q[u] = Psi_t`
    Pd3,
    /// `Q[u] = Theta_t`
    Pd4,
}

impl Stage {
    pub fn family(self) -> Family {
        match self {
            Stage::Pd3 => Family::Psi,
            Stage::Pd4 => Family::Theta,
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Pd3 => "pd3",
            Stage::Pd4 => "pd4",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationPlan {
    pub t_step_init: f64,
    pub t_step_min: f64,
    pub t_step_max: f64,
    /// Consecutive accepted steps before the step grows.
    pub grow_after: usize,
    pub grow_factor: f64,
    pub solve: SolveConfig,
    /// Tolerance for the ordering diagnostics against the subsolution.
    pub ordering_slack: f64,
}

impl Default for ContinuationPlan {
    fn default() -> Self {
        Self {
            t_step_init: 0.1,
            t_step_min: 1e-4,
            t_step_max: 0.25,
            grow_after: 3,
            grow_factor: 1.5,
            solve: SolveConfig::default(),
            ordering_slack: 1e-8,
        }
    }
}

impl ContinuationPlan {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_step_min > 0.0
            && self.t_step_min <= self.t_step_init
            && self.t_step_init <= self.t_step_max
            && self.t_step_max <= 1.0
            && self.grow_factor >= 1.0
            && self.ordering_slack >= 0.0;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "need 0 < t_step_min <= t_step_init <= t_step_max <= 1, got {} / {} / {}",
                self.t_step_min, self.t_step_init, self.t_step_max
            )));
        }
        self.solve.validate()
    }
}

/// One accepted continuation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub stage: Stage,
    pub t: f64,
    /// Step that led to `t`; zero for the starting solve.
    pub step: f64,
    pub iterations: usize,
    pub residual: f64,
    /// `min (u_bar - u)` over all nodes.
    pub min_gap: f64,
    /// `min (u_bar - u)` over interior nodes.
    pub min_interior_gap: f64,
    /// `max` over the boundary of the inward normal derivative of `u - u_bar`.
    pub boundary_normal_derivative: f64,
}

impl TraceEntry {
    /// `u <= u_bar` inside and `d_nu (u - u_bar) <= 0` on the boundary, up to `slack`.
    pub fn ordering_holds(&self, slack: f64) -> bool {
        self.min_interior_gap > -slack && self.boundary_normal_derivative < slack
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContinuationTrace {
    pub entries: Vec<TraceEntry>,
    /// Solution at the last accepted step.
    pub final_u: Option<ScalarField>,
}

impl ContinuationTrace {
    pub fn stage_entries(&self, stage: Stage) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter().filter(move |e| e.stage == stage)
    }
}

struct Driver<'a> {
    solver: NewtonSolver,
    plan: &'a ContinuationPlan,
    phi: &'a [f64],
}

impl Driver<'_> {
    fn run(&mut self, stage: Stage, rhs: &RightHandSide, u_start: &ScalarField, trace: &mut ContinuationTrace) -> Result<ScalarField> {
        let plan = self.plan;
        let rhs = rhs.with_family(stage.family());
        let start = self.solver.solve(&rhs.at(0.0)?, self.phi, u_start)?;
        let mut u = start.u.clone();
        trace.entries.push(entry(stage, 0.0, 0.0, &start));
        trace.final_u = Some(u.clone());

        let (mut t, mut step, mut streak) = (0.0f64, plan.t_step_init, 0);
        while t < 1.0 {
            let mut t_next = (t + step).min(1.0);
            if 1.0 - t_next < 1e-12 {
                t_next = 1.0;
            }
            match self.solver.solve(&rhs.at(t_next)?, self.phi, &u) {
                Ok(out) => {
                    let e = entry(stage, t_next, t_next - t, &out);
                    if !e.ordering_holds(plan.ordering_slack) {
                        log::warn!(
                            "{stage} t = {t_next}: ordering diagnostic violated (interior gap {:e}, boundary derivative {:e})",
                            e.min_interior_gap,
                            e.boundary_normal_derivative
                        );
                    }
                    log::info!("{stage} t = {t_next:.6} in {} Newton iterations", out.iterations);
                    trace.entries.push(e);
                    u = out.u;
                    trace.final_u = Some(u.clone());
                    t = t_next;
                    streak += 1;
                    if streak >= plan.grow_after {
                        step = (step * plan.grow_factor).min(plan.t_step_max);
                        streak = 0;
                    }
                }
                Err(err) if err.is_solver_failure() => {
                    log::debug!("{stage} step {step:e} from t = {t} failed: {err}");
                    step *= 0.5;
                    streak = 0;
                    if step < plan.t_step_min {
                        return Err(Error::StepUnderflow { t, step, trace: Box::new(trace.clone()) });
                    }
                }
                Err(err) => return Err(err),
            }
        }
        Ok(u)
    }
}

fn entry(stage: Stage, t: f64, step: f64, out: &crate::newton::SolveOutcome) -> TraceEntry {
    TraceEntry {
        stage,
        t,
        step,
        iterations: out.iterations,
        residual: out.final_residual,
        min_gap: out.diagnostics.min_gap,
        min_interior_gap: out.diagnostics.min_interior_gap,
        boundary_normal_derivative: out.diagnostics.max_boundary_normal_derivative,
    }
}

/// Runs one stage from `t = 0` to `t = 1`; `rhs` supplies the constants and subsolution.
/// `u_start` must carry the boundary values `phi`.
pub fn run_stage(
    stage: Stage,
    rhs: &RightHandSide,
    phi: &[f64],
    u_start: &ScalarField,
    plan: &ContinuationPlan,
) -> Result<(ScalarField, ContinuationTrace)> {
    plan.validate()?;
    let mut driver = Driver { solver: NewtonSolver::new(u_start.grid(), plan.solve)?, plan, phi };
    let mut trace = ContinuationTrace::default();
    let u = driver.run(stage, rhs, u_start, &mut trace)?;
    Ok((u, trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmcConfig {
    pub plan: ContinuationPlan,
    /// Doublings of `C` tried by the constant selection, starting at 2.
    pub max_c_doublings: u32,
    pub barrier_search: BarrierSearch,
    /// Strip width for the gradient barrier; `theta_max / 5` when unset.
    pub eps_strip: Option<f64>,
    pub certify: bool,
    /// Largest mismatch allowed between `u_bar` and `phi` on the boundary.
    pub boundary_tolerance: f64,
}

impl Default for CmcConfig {
    fn default() -> Self {
        Self {
            plan: ContinuationPlan::default(),
            max_c_doublings: 12,
            barrier_search: BarrierSearch::default(),
            eps_strip: None,
            certify: true,
            boundary_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CmcSolution {
    pub u: ScalarField,
    pub trace: ContinuationTrace,
    pub constants: HomotopyConstants,
    pub rho_reports: Vec<RhoCheckReport>,
    pub certificates: Vec<BarrierCertificate>,
    /// `w <= u <= u_bar` margins against the height certificate, when there is one.
    pub barrier_report: Option<BarrierReport>,
    /// Residual of the first stage's endpoint under the second stage at `t = 0`.
    pub handoff_residual: f64,
    /// Max-norm of `Q[u] + n H`.
    pub final_residual: f64,
    pub warnings: Vec<String>,
}

/// Solves `Q[u] = -n H` in the cap with `u = phi` on the boundary by continuation from the
/// subsolution `u_bar`, which must match `phi` on the boundary and have discrete mean
/// curvature above `H` everywhere.
pub fn solve_cmc(
    grid: &PolarGrid,
    phi: &BoundaryData,
    ubar: &ScalarField,
    h_target: f64,
    config: &CmcConfig,
) -> Result<CmcSolution> {
    config.plan.validate()?;
    if ubar.grid() != grid {
        return Err(Error::InvalidArgument("subsolution lives on a different grid".into()));
    }
    if !(grid.domain().boundary_mean_curvature() > 0.0) {
        return Err(Error::HypothesisViolated("boundary mean curvature must be positive".into()));
    }
    let phi_values = phi.sample(grid);
    let mismatch = ubar.boundary_values().iter().zip(&phi_values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if mismatch > config.boundary_tolerance {
        return Err(Error::HypothesisViolated(format!("subsolution differs from phi on the boundary by {mismatch:e}")));
    }
    let u_start = phi.with_interior(grid, ubar.interior_values())?;
    let sub = Arc::new(Subsolution::new(u_start.clone())?);
    let constants = select_constants(&sub, h_target, config.max_c_doublings)?;
    log::info!("homotopy constants C = {}, eps = {:e}", constants.c, constants.eps);
    let rho_reports = rho_checks(&sub, h_target, constants.c, constants.eps)?;
    let mut warnings = Vec::new();

    let rhs = RightHandSide::new(Family::Psi, 0.0, constants.c, constants.eps, h_target, sub.clone())?;
    let mut driver = Driver { solver: NewtonSolver::new(grid, config.plan.solve)?, plan: &config.plan, phi: &phi_values };
    let mut trace = ContinuationTrace::default();
    let u_mid = driver.run(Stage::Pd3, &rhs, &u_start, &mut trace)?;
    let handoff_residual = driver.solver.residual_norm(&rhs.with_family(Family::Theta).at(0.0)?, &u_mid)?;
    let u = driver.run(Stage::Pd4, &rhs, &u_mid, &mut trace)?;
    let final_residual = driver.solver.residual_norm(&rhs.with_family(Family::Theta).at(1.0)?, &u)?;

    let slack = config.plan.ordering_slack;
    let violations = trace.entries.iter().filter(|e| !e.ordering_holds(slack)).count();
    if violations > 0 {
        warnings.push(format!("{violations} continuation steps violate the ordering diagnostics"));
    }

    let mut certificates = Vec::new();
    let mut barrier_report = None;
    if config.certify {
        match certify_height_barrier(grid, phi, &config.barrier_search) {
            Ok(cert) => {
                barrier_report = Some(check_solution_between_barriers(&u, &cert, sub.field())?);
                certificates.push(cert);
            }
            Err(e) => warnings.push(format!("height barrier: {e}")),
        }
        let strip = config.eps_strip.unwrap_or(grid.domain().theta_max() / 5.0);
        match certify_gradient_barrier(grid, phi, strip, &config.barrier_search) {
            Ok(cert) => certificates.push(cert),
            Err(e) => warnings.push(format!("gradient barrier: {e}")),
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(CmcSolution {
        u,
        trace,
        constants,
        rho_reports,
        certificates,
        barrier_report,
        handoff_residual,
        final_residual,
        warnings,
    })
}

/// Index and max-norm distance of the candidate closest to `u`.
pub fn nearest_branch(u: &ScalarField, candidates: &[&ScalarField]) -> Option<(usize, f64)> {
    candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.grid() == u.grid())
        .map(|(i, c)| (i, u.max_abs_diff(c)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}
