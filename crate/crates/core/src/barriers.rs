//! Lower barriers `w` with `Q~[w] > 0`, checked node by node on a grid.
//!
//! Height barrier: `w = f(d) + inf phi`, `f(d) = -(e^{CA} / C)(1 - e^{-Cd})`, over the whole cap.
//! Gradient barrier: `w = phi_ext + f(d)`, `f(d) = -mu ln(1 + K d)`, `mu = C / ln(1 + K)`,
//! over the strip `d < eps_strip`, where `phi_ext` is constant along meridians.
//!
//! A certificate is numerical evidence on the grid it was evaluated on, not a proof.

use crate::boundary::BoundaryData;
use crate::error::{Error, Result};
use crate::operator::RadialGraphOperator;
use crate::sphere::{distance_to_boundary, PolarGrid, ScalarField};

/// Doubling search policy for barrier constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSearch {
    /// First candidate for every doubled constant.
    pub start: f64,
    pub max_doublings: u32,
}

impl Default for BarrierSearch {
    fn default() -> Self {
        Self { start: 1.0, max_doublings: 40 }
    }
}

impl BarrierSearch {
    fn candidates(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.max_doublings).map(|p| self.start * 2f64.powi(p as i32))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightBarrier {
    pub c: f64,
    /// Must exceed the cap diameter `2 theta_max`.
    pub a: f64,
    pub base: f64,
}

impl HeightBarrier {
    /// `A = 1.01 * diam`.
    pub fn new(grid: &PolarGrid, c: f64, base: f64) -> Self {
        Self { c, a: 1.01 * grid.domain().diameter(), base }
    }

    pub fn f(&self, d: f64) -> f64 {
        // -(e^{CA}/C)(1 - e^{-Cd}) without forming e^{CA} and 1 - e^{-Cd} separately.
        -(self.c * self.a - self.c.ln()).exp() * (-(-self.c * d).exp_m1())
    }

    pub fn f_prime(&self, d: f64) -> f64 {
        -(self.c * (self.a - d)).exp()
    }

    pub fn field(&self, grid: &PolarGrid) -> Result<ScalarField> {
        distance_to_boundary(grid).map(|d| self.f(d) + self.base)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBarrier {
    pub k: f64,
    pub c: f64,
    pub phi: BoundaryData,
}

impl GradientBarrier {
    pub fn mu(&self) -> f64 {
        self.c / self.k.ln_1p()
    }

    pub fn f(&self, d: f64) -> f64 {
        -self.mu() * (self.k * d).ln_1p()
    }

    pub fn f_prime(&self, d: f64) -> f64 {
        -self.mu() * self.k / (1.0 + self.k * d)
    }

    pub fn field(&self, grid: &PolarGrid) -> Result<ScalarField> {
        let ext = self.phi.extend(grid)?;
        let theta_max = grid.domain().theta_max();
        let values = (0..grid.num_nodes()).map(|n| ext.get(n) + self.f(theta_max - grid.coords(n).0)).collect();
        ScalarField::new(*grid, values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Barrier {
    Height(HeightBarrier),
    Gradient { barrier: GradientBarrier, eps_strip: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierCertificate {
    pub barrier: Barrier,
    /// `min Q~[w]` over the certified region.
    pub min_q_tilde: f64,
    pub min_node: usize,
    /// Height bound `L` or boundary gradient bound.
    pub bound: f64,
    pub attempts: usize,
}

impl BarrierCertificate {
    pub fn kind(&self) -> &'static str {
        match self.barrier {
            Barrier::Height(_) => "height",
            Barrier::Gradient { .. } => "gradient",
        }
    }

    pub fn is_valid(&self) -> bool {
        self.min_q_tilde > 0.0
    }

    /// `(min Q~[w], node)` of the same barrier over the certified region of another grid on
    /// the same cap, e.g. `grid.refined()`.
    pub fn reevaluate(&self, grid: &PolarGrid) -> Result<(f64, usize)> {
        match &self.barrier {
            Barrier::Height(b) => min_q_tilde(grid, &b.field(grid)?, f64::INFINITY),
            Barrier::Gradient { barrier, eps_strip } => min_q_tilde(grid, &barrier.field(grid)?, *eps_strip),
        }
    }
}

/// Smallest `Q~[w]` over interior nodes with `d < strip`.
fn min_q_tilde(grid: &PolarGrid, w: &ScalarField, strip: f64) -> Result<(f64, usize)> {
    let q = RadialGraphOperator::new(grid)?.apply_q_tilde(w)?;
    let theta_max = grid.domain().theta_max();
    let mut best = (f64::INFINITY, 0);
    for (node, &v) in q.iter().enumerate() {
        if theta_max - grid.coords(node).0 >= strip {
            continue;
        }
        // NaN from overflowing gradients counts as a failure.
        let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
        if v < best.0 {
            best = (v, node);
        }
    }
    Ok(best)
}

fn require_convex_boundary(grid: &PolarGrid) -> Result<()> {
    if !(grid.domain().boundary_mean_curvature() > 0.0) {
        return Err(Error::DomainDegenerate { eps: 0.0, theta_max: grid.domain().theta_max() });
    }
    Ok(())
}

/// Smallest `C` in the doubling sequence with `Q~[w] > 0` at every interior node.
/// Height bound `L = |f(diam)| + |inf phi|`.
pub fn certify_height_barrier(grid: &PolarGrid, phi: &BoundaryData, search: &BarrierSearch) -> Result<BarrierCertificate> {
    require_convex_boundary(grid)?;
    let base = phi.min(grid);
    let mut worst = (f64::NEG_INFINITY, 0);
    let mut attempts = 0;
    for c in search.candidates() {
        let barrier = HeightBarrier::new(grid, c, base);
        let Ok(w) = barrier.field(grid) else { break };
        attempts += 1;
        let (min, node) = min_q_tilde(grid, &w, f64::INFINITY)?;
        log::debug!("height barrier C = {c}: min Q~ = {min:e} at node {node}");
        if min > 0.0 {
            let bound = barrier.f(grid.domain().diameter()).abs() + base.abs();
            return Ok(BarrierCertificate { barrier: Barrier::Height(barrier), min_q_tilde: min, min_node: node, bound, attempts });
        }
        if min > worst.0 {
            worst = (min, node);
        }
    }
    Err(Error::SearchExhausted { what: "height barrier constant C", attempts, worst_value: worst.0, worst_node: worst.1 })
}

/// Searches `C` in the doubling sequence and, for each, `K` in the doubling sequence until
/// `Q~[w] > 0` on the strip `d < eps_strip`. The bound is `sqrt(|grad phi|^2 + (mu K)^2)`.
pub fn certify_gradient_barrier(
    grid: &PolarGrid,
    phi: &BoundaryData,
    eps_strip: f64,
    search: &BarrierSearch,
) -> Result<BarrierCertificate> {
    require_convex_boundary(grid)?;
    let theta_max = grid.domain().theta_max();
    if !(eps_strip > 0.0 && eps_strip < theta_max) {
        return Err(Error::DomainDegenerate { eps: eps_strip, theta_max });
    }
    if eps_strip <= grid.dtheta() {
        return Err(Error::InvalidArgument(format!("strip width {eps_strip} holds no interior ring")));
    }
    let grad_phi = phi.max_tangential_gradient(grid);
    let mut worst = (f64::NEG_INFINITY, 0);
    let mut attempts = 0;
    for c in search.candidates() {
        for k in search.candidates() {
            let barrier = GradientBarrier { k, c, phi: phi.clone() };
            let Ok(w) = barrier.field(grid) else { continue };
            attempts += 1;
            let (min, node) = min_q_tilde(grid, &w, eps_strip)?;
            if min > 0.0 {
                log::debug!("gradient barrier C = {c}, K = {k}: min Q~ = {min:e}");
                let slope = barrier.mu() * k;
                return Ok(BarrierCertificate {
                    barrier: Barrier::Gradient { barrier, eps_strip },
                    min_q_tilde: min,
                    min_node: node,
                    bound: (grad_phi * grad_phi + slope * slope).sqrt(),
                    attempts,
                });
            }
            if min > worst.0 {
                worst = (min, node);
            }
        }
    }
    Err(Error::SearchExhausted { what: "gradient barrier constants (C, K)", attempts, worst_value: worst.0, worst_node: worst.1 })
}

/// Node-wise margins of `w <= u <= u_bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierReport {
    /// `min (u - w)`
    pub above_barrier: f64,
    /// `min (u_bar - u)`
    pub below_subsolution: f64,
}

impl BarrierReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.above_barrier >= -slack && self.below_subsolution >= -slack
    }
}

/// Margins of `u` against a height barrier and the subsolution; report only.
pub fn check_solution_between_barriers(u: &ScalarField, cert: &BarrierCertificate, ubar: &ScalarField) -> Result<BarrierReport> {
    let Barrier::Height(b) = &cert.barrier else {
        return Err(Error::InvalidArgument("a height certificate is required".into()));
    };
    if u.grid() != ubar.grid() {
        return Err(Error::InvalidArgument("solution and subsolution use different grids".into()));
    }
    let w = b.field(u.grid())?;
    let min_diff = |a: &ScalarField, b: &ScalarField| {
        a.values().iter().zip(b.values()).map(|(x, y)| x - y).fold(f64::INFINITY, f64::min)
    };
    Ok(BarrierReport { above_barrier: min_diff(u, &w), below_subsolution: min_diff(ubar, u) })
}
