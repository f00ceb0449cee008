//! Constant mean curvature radial graphs over spherical caps.
//!
//! A radial graph over a cap `Omega` of the unit sphere is the surface `{e^{u(p)} p}`. This
//! crate discretizes its mean curvature operator on a polar grid, solves the Dirichlet
//! problem `H = const`, `u = phi` on the boundary by continuation from a subsolution, and
//! checks the result against barriers and closed-form sphere caps.
//!
//! ```no_run
//! use radial_cmc::{solve_cmc, BoundaryData, CapDomain, CmcConfig, PolarGrid, ScalarField};
//!
//! let domain = CapDomain::from_circle_radius([0.0, 0.0, 1.0], 0.8)?;
//! let grid = PolarGrid::new(domain, 32, 64)?;
//! let ubar = ScalarField::constant(grid, 0.0)?;
//! let sol = solve_cmc(&grid, &BoundaryData::constant(0.0), &ubar, 0.7, &CmcConfig::default())?;
//! println!("residual {:e}", sol.final_residual);
//! # Ok::<(), radial_cmc::Error>(())
//! ```

pub mod barriers;
pub mod boundary;
pub mod continuation;
pub mod error;
pub mod io;
pub mod linalg;
pub mod newton;
pub mod operator;
pub mod oracles;
pub mod rhs;
pub mod sparse;
pub mod sphere;

pub use barriers::{
    certify_gradient_barrier, certify_height_barrier, check_solution_between_barriers, Barrier, BarrierCertificate,
    BarrierReport, BarrierSearch, GradientBarrier, HeightBarrier,
};
pub use boundary::BoundaryData;
pub use continuation::{
    nearest_branch, run_stage, solve_cmc, CmcConfig, CmcSolution, ContinuationPlan, ContinuationTrace, Stage, TraceEntry,
};
pub use error::{Error, Result};
pub use linalg::{linear_solve, LinearSolver};
pub use newton::{newton_solve, NewtonSolver, OrderingDiagnostics, SolveConfig, SolveOutcome};
pub use operator::{apply_q, apply_q_tilde, covariant_hessian, graph_geometry, linearize, RadialGraphOperator};
pub use oracles::{axisymmetric_ode_residual, cap_solution, example1_pair, Branch, Example1, OffsetSphere};
pub use rhs::{eval_rhs, monotone_rho_check, select_constants, Family, HomotopyConstants, RightHandSide, Subsolution};
pub use sparse::SparseMatrix;
pub use sphere::{
    distance_to_boundary, embed, parallel_mean_curvature, CapDomain, PolarGrid, ScalarField, DIM,
};
