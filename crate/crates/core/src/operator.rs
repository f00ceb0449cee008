//! Discrete mean curvature operator for radial graphs `X = e^u p` over a polar grid.
//!
//! Derivatives are taken in the orthonormal frame `(d/dtheta, d/dphi / sin(theta))`:
//!
//! ```text
//! grad u  = (u_t, u_p / s)
//! hess_11 = u_tt
//! hess_12 = (u_tp - cot * u_p) / s
//! hess_22 = u_pp / s^2 + cot * u_t
//! ```
//!
//! with second-order central differences on the rings. At the pole the sphere is charted
//! gnomonically, where the metric is the identity to second order, and the gradient and
//! Hessian come from a least-squares quadratic fit through the first ring.
//!
//! Every derivative is a fixed linear functional of the nodal values, stored once per grid
//! in [`Stencils`]. The residual and its Jacobian are both assembled from those functionals,
//! which keeps the analytic Jacobian consistent with the residual it differentiates.

use crate::error::{Error, Result};
use crate::rhs::RightHandSide;
use crate::sparse::SparseMatrix;
use crate::sphere::{dot, NodeLocation, PolarGrid, ScalarField, Vec3, DIM};

const N: f64 = DIM as f64;

/// Coarsest ring count the stencils accept.
pub const MIN_RINGS: usize = 4;

/// Indices into a stencil weight vector.
const D1: usize = 0;
const D2: usize = 1;
const H11: usize = 2;
const H12: usize = 3;
const H22: usize = 4;

/// Linear functionals for `(grad_1, grad_2, hess_11, hess_12, hess_22)` at one node,
/// as `(node, weights)` pairs sorted by node.
#[derive(Debug, Clone, Default)]
pub struct NodeStencil {
    center: usize,
    entries: Vec<(usize, [f64; 5])>,
}

impl NodeStencil {
    /// Every functional annihilates constants: the center weight is reset to minus the sum
    /// of the others, and [`apply`](Self::apply) works on differences to the center value,
    /// so constant fields give exactly zero derivatives.
    fn finish(mut self, center: usize) -> Self {
        self.add(center, 0, 0.0);
        let mut sums = [0.0; 5];
        for (node, w) in &self.entries {
            if *node != center {
                (0..5).for_each(|k| sums[k] += w[k]);
            }
        }
        let k = self.entries.binary_search_by_key(&center, |e| e.0).expect("center inserted above");
        self.entries[k].1 = sums.map(|s| -s);
        self.center = center;
        self
    }

    fn add(&mut self, node: usize, slot: usize, weight: f64) {
        match self.entries.binary_search_by_key(&node, |e| e.0) {
            Ok(k) => self.entries[k].1[slot] += weight,
            Err(k) => {
                let mut w = [0.0; 5];
                w[slot] = weight;
                self.entries.insert(k, (node, w));
            }
        }
    }

    pub fn entries(&self) -> &[(usize, [f64; 5])] {
        &self.entries
    }

    fn apply(&self, values: &[f64]) -> FrameDerivatives {
        let mut acc = [0.0; 5];
        let base = values[self.center];
        for (node, w) in &self.entries {
            let v = values[*node] - base;
            for k in 0..5 {
                acc[k] += w[k] * v;
            }
        }
        FrameDerivatives {
            grad: [acc[D1], acc[D2]],
            hess: [[acc[H11], acc[H12]], [acc[H12], acc[H22]]],
        }
    }
}

/// Gradient and covariant Hessian in the orthonormal frame at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameDerivatives {
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

/// Per-grid derivative stencils for every interior node (pole included).
#[derive(Debug, Clone)]
pub struct Stencils {
    grid: PolarGrid,
    rows: Vec<NodeStencil>,
}

impl Stencils {
    pub fn new(grid: &PolarGrid) -> Result<Self> {
        if grid.n_theta() < MIN_RINGS {
            return Err(Error::GridTooCoarse { n_theta: grid.n_theta(), min: MIN_RINGS });
        }
        let mut rows = Vec::with_capacity(grid.num_interior());
        rows.push(pole_stencil(grid).finish(0));
        for node in 1..grid.num_interior() {
            let NodeLocation::Ring { ring, slot } = grid.location(node) else { unreachable!() };
            rows.push(ring_stencil(grid, ring, slot as isize).finish(node));
        }
        Ok(Self { grid: *grid, rows })
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn row(&self, node: usize) -> &NodeStencil {
        &self.rows[node]
    }

    pub fn derivatives(&self, node: usize, values: &[f64]) -> FrameDerivatives {
        self.rows[node].apply(values)
    }
}

fn pole_stencil(grid: &PolarGrid) -> NodeStencil {
    let n = grid.n_phi();
    let nf = n as f64;
    // Gnomonic radius of ring 1.
    let r = grid.dtheta().tan();
    let r2 = r * r;
    let mut st = NodeStencil::default();
    // Quadratic fit u0 + g.x + x.Hx/2 through ring 1; the ring's Fourier modes 0, 1, 2 are
    // orthogonal for n >= 8, which decouples the normal equations.
    st.add(0, H11, -2.0 / r2);
    st.add(0, H22, -2.0 / r2);
    for j in 0..n {
        let phi = grid.phi(j);
        let (s1, c1) = phi.sin_cos();
        let (s2, c2) = (2.0 * phi).sin_cos();
        let node = grid.index(1, j as isize);
        st.add(node, D1, 2.0 * c1 / (nf * r));
        st.add(node, D2, 2.0 * s1 / (nf * r));
        st.add(node, H11, 2.0 * (1.0 + 2.0 * c2) / (nf * r2));
        st.add(node, H22, 2.0 * (1.0 - 2.0 * c2) / (nf * r2));
        st.add(node, H12, 4.0 * s2 / (nf * r2));
    }
    st
}

fn ring_stencil(grid: &PolarGrid, ring: usize, slot: isize) -> NodeStencil {
    let dt = grid.dtheta();
    let dp = grid.dphi();
    let (s, c) = grid.theta(ring).sin_cos();
    let cot = c / s;
    let at = |di: isize, dj: isize| grid.index((ring as isize + di) as usize, slot + dj);
    let mut st = NodeStencil::default();

    // u_t and u_p
    let ut = [(at(1, 0), 0.5 / dt), (at(-1, 0), -0.5 / dt)];
    let up = [(at(0, 1), 0.5 / dp), (at(0, -1), -0.5 / dp)];
    for &(k, w) in &ut {
        st.add(k, D1, w);
        st.add(k, H22, cot * w);
    }
    for &(k, w) in &up {
        st.add(k, D2, w / s);
        st.add(k, H12, -cot * w / s);
    }
    // u_tt
    for (k, w) in [(at(1, 0), 1.0), (at(0, 0), -2.0), (at(-1, 0), 1.0)] {
        st.add(k, H11, w / (dt * dt));
    }
    // u_pp
    for (k, w) in [(at(0, 1), 1.0), (at(0, 0), -2.0), (at(0, -1), 1.0)] {
        st.add(k, H22, w / (dp * dp * s * s));
    }
    // u_tp
    let m = 1.0 / (4.0 * dt * dp * s);
    for (k, w) in [(at(1, 1), m), (at(1, -1), -m), (at(-1, 1), -m), (at(-1, -1), m)] {
        st.add(k, H12, w);
    }
    st
}

/// Orthonormal tangent frame at a node, as vectors in R^3.
fn tangent_frame(grid: &PolarGrid, node: usize) -> (Vec3, Vec3) {
    let (e1, e2, a) = grid.domain().frame();
    match grid.location(node) {
        NodeLocation::Pole => (e1, e2),
        NodeLocation::Ring { ring, slot } => {
            let (st, ct) = grid.theta(ring).sin_cos();
            let (sp, cp) = grid.phi(slot).sin_cos();
            (
                std::array::from_fn(|k| ct * (cp * e1[k] + sp * e2[k]) - st * a[k]),
                std::array::from_fn(|k| -sp * e1[k] + cp * e2[k]),
            )
        }
    }
}

/// Pointwise quantities of the curvature operator and their partial derivatives.
#[derive(Debug, Clone, Copy)]
struct LocalTerms {
    /// `Q~ = ((delta - p p / W^2) : hess - n) / W`
    q_tilde: f64,
    /// Partials of `Q~` with respect to `(grad_1, grad_2, hess_11, hess_12, hess_22)`.
    partials: [f64; 5],
}

fn local_terms(d: &FrameDerivatives) -> LocalTerms {
    let [p1, p2] = d.grad;
    let [[h11, h12], [_, h22]] = d.hess;
    let w2 = 1.0 + p1 * p1 + p2 * p2;
    let w = w2.sqrt();
    let a11 = 1.0 - p1 * p1 / w2;
    let a12 = -p1 * p2 / w2;
    let a22 = 1.0 - p2 * p2 / w2;
    let contraction = a11 * h11 + 2.0 * a12 * h12 + a22 * h22;
    let q_tilde = (contraction - N) / w;

    let hp = [h11 * p1 + h12 * p2, h12 * p1 + h22 * p2];
    let php = p1 * hp[0] + p2 * hp[1];
    let dcontr = |pk: f64, hpk: f64| -2.0 * hpk / w2 + 2.0 * php * pk / (w2 * w2);
    let dp = |pk: f64, hpk: f64| dcontr(pk, hpk) / w - (contraction - N) * pk / (w2 * w);
    LocalTerms {
        q_tilde,
        partials: [dp(p1, hp[0]), dp(p2, hp[1]), a11 / w, 2.0 * a12 / w, a22 / w],
    }
}

/// Differential geometry of `Sigma(u)` at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointGeometry {
    pub position: Vec3,
    /// Induced metric in the orthonormal frame.
    pub metric: [[f64; 2]; 2],
    /// Unit normal with `<N, X> < 0`.
    pub normal: Vec3,
    pub second_form: [[f64; 2]; 2],
    pub mean_curvature: f64,
    /// `sqrt(1 + |grad u|^2)`
    pub w: f64,
}

impl PointGeometry {
    pub fn support(&self) -> f64 {
        dot(&self.normal, &self.position)
    }
}

/// Geometry at every interior node (index = node index).
#[derive(Debug, Clone)]
pub struct RadialGraphGeometry {
    pub points: Vec<PointGeometry>,
}

/// Residual and Jacobian of `Q[u] - Upsilon(e^u x)` over the interior nodes.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub residual: Vec<f64>,
    pub jacobian: SparseMatrix,
}

/// The curvature operator on a fixed grid.
#[derive(Debug, Clone)]
pub struct RadialGraphOperator {
    stencils: Stencils,
}

impl RadialGraphOperator {
    pub fn new(grid: &PolarGrid) -> Result<Self> {
        Ok(Self { stencils: Stencils::new(grid)? })
    }

    pub fn grid(&self) -> &PolarGrid {
        self.stencils.grid()
    }

    pub fn stencils(&self) -> &Stencils {
        &self.stencils
    }

    fn check(&self, u: &ScalarField) -> Result<()> {
        if u.grid() != self.grid() {
            return Err(Error::InvalidArgument("field and operator use different grids".into()));
        }
        Ok(())
    }

    pub fn derivatives(&self, u: &ScalarField) -> Result<Vec<FrameDerivatives>> {
        self.check(u)?;
        Ok((0..self.grid().num_interior()).map(|k| self.stencils.derivatives(k, u.values())).collect())
    }

    pub fn covariant_hessian(&self, u: &ScalarField) -> Result<Vec<[[f64; 2]; 2]>> {
        Ok(self.derivatives(u)?.into_iter().map(|d| d.hess).collect())
    }

    /// `Q~[u] = e^u Q[u]` at every interior node.
    pub fn apply_q_tilde(&self, u: &ScalarField) -> Result<Vec<f64>> {
        self.check(u)?;
        Ok((0..self.grid().num_interior())
            .map(|k| local_terms(&self.stencils.derivatives(k, u.values())).q_tilde)
            .collect())
    }

    /// `Q[u]` at every interior node; equals `-n H` of the radial graph.
    pub fn apply_q(&self, u: &ScalarField) -> Result<Vec<f64>> {
        self.check(u)?;
        let v = u.values();
        Ok((0..self.grid().num_interior())
            .map(|k| (-v[k]).exp() * local_terms(&self.stencils.derivatives(k, v)).q_tilde)
            .collect())
    }

    pub fn graph_geometry(&self, u: &ScalarField) -> Result<RadialGraphGeometry> {
        self.check(u)?;
        let grid = self.grid();
        let points = (0..grid.num_interior())
            .map(|k| {
                let d = self.stencils.derivatives(k, u.values());
                point_geometry(grid, k, u.get(k), &d)
            })
            .collect();
        Ok(RadialGraphGeometry { points })
    }

    /// Residual `Q[u] - Upsilon` and its Jacobian with respect to the interior values.
    /// Boundary columns are dropped (Dirichlet elimination).
    pub fn linearize(&self, u: &ScalarField, rhs: &RightHandSide) -> Result<DiscreteOperator> {
        self.check(u)?;
        let v = u.values();
        let n_int = self.grid().num_interior();
        let mut residual = Vec::with_capacity(n_int);
        let mut rows = Vec::with_capacity(n_int);
        for k in 0..n_int {
            let st = self.stencils.row(k);
            let terms = local_terms(&st.apply(v));
            let scale = (-v[k]).exp();
            let q = scale * terms.q_tilde;
            let (ups, dups) = rhs.value_and_derivative(k, v[k]);
            residual.push(q - ups);
            let mut row = Vec::with_capacity(st.entries().len());
            for (node, w) in st.entries() {
                if *node >= n_int {
                    continue;
                }
                let mut coef = scale * (0..5).map(|i| terms.partials[i] * w[i]).sum::<f64>();
                if *node == k {
                    coef += -q - dups;
                }
                row.push((*node, coef));
            }
            rows.push(row);
        }
        Ok(DiscreteOperator { residual, jacobian: SparseMatrix::from_rows(n_int, rows)? })
    }

    /// Residual `Q[u] - Upsilon` only.
    pub fn residual(&self, u: &ScalarField, rhs: &RightHandSide) -> Result<Vec<f64>> {
        let q = self.apply_q(u)?;
        Ok(q.into_iter().enumerate().map(|(k, q)| q - rhs.value_and_derivative(k, u.get(k)).0).collect())
    }
}

fn point_geometry(grid: &PolarGrid, node: usize, u: f64, d: &FrameDerivatives) -> PointGeometry {
    let p = grid.point(node);
    let (t1, t2) = tangent_frame(grid, node);
    let [p1, p2] = d.grad;
    let w = (1.0 + p1 * p1 + p2 * p2).sqrt();
    let rho = u.exp();
    let position = p.map(|c| rho * c);
    let normal: Vec3 = std::array::from_fn(|k| (p1 * t1[k] + p2 * t2[k] - p[k]) / w);
    let g = rho * rho;
    let metric = [[g * (1.0 + p1 * p1), g * p1 * p2], [g * p1 * p2, g * (1.0 + p2 * p2)]];
    // h_ij = <nabla_ij X, N> = (e^u / W) (delta_ij + u_i u_j - u_ij)
    let hs = rho / w;
    let second_form = [
        [hs * (1.0 + p1 * p1 - d.hess[0][0]), hs * (p1 * p2 - d.hess[0][1])],
        [hs * (p1 * p2 - d.hess[1][0]), hs * (1.0 + p2 * p2 - d.hess[1][1])],
    ];
    let det = metric[0][0] * metric[1][1] - metric[0][1] * metric[1][0];
    let trace = (metric[1][1] * second_form[0][0] - metric[0][1] * second_form[1][0]
        - metric[1][0] * second_form[0][1]
        + metric[0][0] * second_form[1][1])
        / det;
    PointGeometry { position, metric, normal, second_form, mean_curvature: trace / N, w }
}

/// Covariant Hessian of `u` in the orthonormal frame at every interior node.
pub fn covariant_hessian(u: &ScalarField) -> Result<Vec<[[f64; 2]; 2]>> {
    RadialGraphOperator::new(u.grid())?.covariant_hessian(u)
}

pub fn graph_geometry(u: &ScalarField) -> Result<RadialGraphGeometry> {
    RadialGraphOperator::new(u.grid())?.graph_geometry(u)
}

pub fn apply_q(u: &ScalarField) -> Result<Vec<f64>> {
    RadialGraphOperator::new(u.grid())?.apply_q(u)
}

pub fn apply_q_tilde(u: &ScalarField) -> Result<Vec<f64>> {
    RadialGraphOperator::new(u.grid())?.apply_q_tilde(u)
}

pub fn linearize(u: &ScalarField, rhs: &RightHandSide) -> Result<DiscreteOperator> {
    RadialGraphOperator::new(u.grid())?.linearize(u, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::CapDomain;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    fn grid(theta_max: f64, n_theta: usize, n_phi: usize) -> PolarGrid {
        PolarGrid::new(CapDomain::polar(theta_max).unwrap(), n_theta, n_phi).unwrap()
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let g = grid(0.9, 3, 8);
        let u = ScalarField::constant(g, 0.0).unwrap();
        assert!(matches!(covariant_hessian(&u), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn stencil_sizes_are_bounded() {
        let g = grid(0.9, 6, 16);
        let s = Stencils::new(&g).unwrap();
        assert_eq!(s.row(0).entries().len(), 1 + 16);
        for k in 1..g.num_interior() {
            assert!(s.row(k).entries().len() <= 9);
        }
    }

    #[test]
    fn constant_has_zero_hessian() {
        let g = grid(1.0, 8, 16);
        let u = ScalarField::constant(g, 0.7).unwrap();
        for h in covariant_hessian(&u).unwrap() {
            for v in h.iter().flatten() {
                assert!(v.abs() < 1e-9, "{v}");
            }
        }
    }

    #[test]
    fn sin_squared_hessian_vanishes_at_quarter_pi() {
        // theta = pi/4 is ring 16 of 24.
        let g = grid(FRAC_PI_4 * 1.5, 24, 16);
        let node = g.index(16, 3);
        assert_abs_diff_eq!(g.theta(16), FRAC_PI_4, epsilon = 1e-15);
        let u = ScalarField::from_fn(g, |t, _| t.sin().powi(2)).unwrap();
        let h = covariant_hessian(&u).unwrap()[node];
        // Exact: u_tt = 2 cos(2t) = 0; the central difference error is O(dtheta^2).
        assert!(h[0][0].abs() < 4.0 * g.dtheta().powi(2), "{}", h[0][0]);
    }

    fn bumpy(g: PolarGrid) -> ScalarField {
        ScalarField::from_fn(g, |t, p| 0.1 * t.powi(2) * (2.0 * p).cos() + 0.05 * t.sin() * p.sin() - 0.2).unwrap()
    }

    #[test]
    fn spheres_have_constant_curvature() {
        let g = grid(0.9, 8, 16);
        for c in [-0.5, 0.0, 0.3] {
            let u = ScalarField::constant(g, c).unwrap();
            for q in apply_q(&u).unwrap() {
                assert_abs_diff_eq!(q, -N * (-c as f64).exp(), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn geometry_agrees_with_operator() {
        let u = bumpy(grid(1.0, 12, 24));
        let q = apply_q(&u).unwrap();
        let geo = graph_geometry(&u).unwrap();
        for (q, pt) in q.iter().zip(&geo.points) {
            assert_abs_diff_eq!(*q, -N * pt.mean_curvature, epsilon = 1e-12);
            assert!(pt.support() < 0.0);
            assert_abs_diff_eq!(dot(&pt.normal, &pt.normal), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn rotation_by_one_slot_permutes_values() {
        let g = grid(1.0, 10, 20);
        let f = |t: f64, p: f64| 0.2 * t * t * (3.0 * p).sin() + 0.1 * t.powi(3) * p.cos();
        let u = ScalarField::from_fn(g, f).unwrap();
        let dp = g.dphi();
        let v = ScalarField::from_fn(g, |t, p| f(t, p + dp)).unwrap();
        let (qu, qv) = (apply_q(&u).unwrap(), apply_q(&v).unwrap());
        for i in 1..g.n_theta() {
            for j in 0..g.n_phi() as isize {
                assert_abs_diff_eq!(qv[g.index(i, j)], qu[g.index(i, j + 1)], epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        use crate::rhs::{Family, Subsolution};
        use std::sync::Arc;
        let g = grid(0.9, 6, 12);
        let sub = Arc::new(Subsolution::new(ScalarField::constant(g, 0.0).unwrap()).unwrap());
        let rhs = RightHandSide::new(Family::Psi, 0.6, 4.0, 0.3, 0.5, sub).unwrap();
        let op = RadialGraphOperator::new(&g).unwrap();
        let u = bumpy(g);
        let jac = op.linearize(&u, &rhs).unwrap().jacobian;
        let h = 1e-6;
        for col in [0, 3, g.index(3, 5), g.num_interior() - 1] {
            let shift = |s: f64| {
                let mut v = u.values().to_vec();
                v[col] += s;
                op.residual(&ScalarField::new(g, v).unwrap(), &rhs).unwrap()
            };
            let (plus, minus) = (shift(h), shift(-h));
            for row in 0..g.num_interior() {
                let fd = (plus[row] - minus[row]) / (2.0 * h);
                assert_abs_diff_eq!(jac.get(row, col), fd, epsilon = 1e-6 * (1.0 + fd.abs()));
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn lifting_rescales_curvature(c in -1.0f64..1.0) {
            let u = bumpy(grid(1.0, 8, 16));
            let lifted = u.map(|v| v + c).unwrap();
            let (q, ql) = (apply_q(&u).unwrap(), apply_q(&lifted).unwrap());
            for (a, b) in q.iter().zip(&ql) {
                proptest::prop_assert!((b - (-c).exp() * a).abs() < 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}
