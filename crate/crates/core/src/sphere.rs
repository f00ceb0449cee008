//! Geodesic caps of the unit sphere, their polar meshes, and the boundary distance function.
//!
//! Nodes are numbered pole first, then ring by ring: node `(i, j)` with `1 <= i <= n_theta`
//! sits at colatitude `i * dtheta` and azimuth `j * dphi` and has index
//! `1 + (i - 1) * n_phi + j`. The boundary ring `i = n_theta` therefore occupies the last
//! `n_phi` indices, and the unknowns of a Dirichlet problem are exactly the leading
//! [`PolarGrid::num_interior`] nodes.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Intrinsic dimension of the domain (the sphere is `S^2`).
pub const DIM: usize = 2;

pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// A geodesic cap `{p : angle(p, axis) < theta_max}` of the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapDomain {
    axis: Vec3,
    theta_max: f64,
}

impl CapDomain {
    /// Requires a unit axis and `0 < theta_max < pi/2`, i.e. a boundary circle of positive
    /// geodesic curvature `cot(theta_max)`.
    pub fn new(axis: Vec3, theta_max: f64) -> Result<Self> {
        if !axis.iter().all(|c| c.is_finite()) || (norm(&axis) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDomain(format!("axis {axis:?} is not a unit vector")));
        }
        if !(theta_max > 0.0 && theta_max < FRAC_PI_2) {
            return Err(Error::InvalidDomain(format!(
                "theta_max = {theta_max} must lie in (0, pi/2)"
            )));
        }
        Ok(Self { axis, theta_max })
    }

    /// Normalizes `axis` before validating.
    pub fn with_axis(axis: Vec3, theta_max: f64) -> Result<Self> {
        let len = norm(&axis);
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::InvalidDomain(format!("axis {axis:?} cannot be normalized")));
        }
        Self::new([axis[0] / len, axis[1] / len, axis[2] / len], theta_max)
    }

    /// Cap about the north pole.
    pub fn polar(theta_max: f64) -> Result<Self> {
        Self::new([0.0, 0.0, 1.0], theta_max)
    }

    /// Cap `{z > sqrt(1 - r^2)}` in axis-adapted coordinates: the boundary circle has
    /// Euclidean radius `r`, so `theta_max = asin(r)`.
    pub fn from_circle_radius(axis: Vec3, r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidDomain(format!("circle radius r = {r} must lie in (0, 1)")));
        }
        Self::with_axis(axis, r.asin())
    }

    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    /// Geodesic diameter of the cap.
    pub fn diameter(&self) -> f64 {
        2.0 * self.theta_max
    }

    /// Geodesic curvature of the boundary circle with respect to the inward normal.
    pub fn boundary_mean_curvature(&self) -> f64 {
        1.0 / self.theta_max.tan()
    }

    /// Orthonormal frame `(e1, e2, axis)`; azimuth is measured from `e1` towards `e2`.
    pub fn frame(&self) -> (Vec3, Vec3, Vec3) {
        let a = self.axis;
        let helper = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let proj = dot(&helper, &a);
        let mut e1 = [helper[0] - proj * a[0], helper[1] - proj * a[1], helper[2] - proj * a[2]];
        let len = norm(&e1);
        e1.iter_mut().for_each(|c| *c /= len);
        let e2 = cross(&a, &e1);
        (e1, e2, a)
    }

    /// Unit vector at colatitude `theta` and azimuth `phi` about the axis.
    pub fn point(&self, theta: f64, phi: f64) -> Vec3 {
        let (e1, e2, a) = self.frame();
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        std::array::from_fn(|k| ct * a[k] + st * (cp * e1[k] + sp * e2[k]))
    }
}

/// Geodesic polar mesh of a cap with a single pole node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarGrid {
    domain: CapDomain,
    n_theta: usize,
    n_phi: usize,
}

/// Position of a node in polar indices; the pole is ring 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeLocation {
    Pole,
    Ring { ring: usize, slot: usize },
}

impl PolarGrid {
    pub fn new(domain: CapDomain, n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 1 {
            return Err(Error::InvalidGrid("n_theta must be at least 1".into()));
        }
        if n_phi < 8 || n_phi % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n_phi = {n_phi} must be even and at least 8")));
        }
        Ok(Self { domain, n_theta, n_phi })
    }

    pub fn domain(&self) -> &CapDomain {
        &self.domain
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn dtheta(&self) -> f64 {
        self.domain.theta_max / self.n_theta as f64
    }

    pub fn dphi(&self) -> f64 {
        2.0 * PI / self.n_phi as f64
    }

    /// Colatitude of ring `i`; ring `n_theta` is exactly `theta_max`.
    pub fn theta(&self, ring: usize) -> f64 {
        if ring == self.n_theta {
            self.domain.theta_max
        } else {
            ring as f64 * self.dtheta()
        }
    }

    pub fn phi(&self, slot: usize) -> f64 {
        slot as f64 * self.dphi()
    }

    pub fn num_nodes(&self) -> usize {
        1 + self.n_theta * self.n_phi
    }

    /// Pole plus rings `1..n_theta`; these are the Dirichlet unknowns.
    pub fn num_interior(&self) -> usize {
        1 + (self.n_theta - 1) * self.n_phi
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        node >= self.num_interior()
    }

    pub fn boundary_nodes(&self) -> std::ops::Range<usize> {
        self.num_interior()..self.num_nodes()
    }

    /// Index of ring node `(ring, slot)` with the slot taken periodically. Ring 0 is the pole.
    pub fn index(&self, ring: usize, slot: isize) -> usize {
        if ring == 0 {
            return 0;
        }
        let slot = slot.rem_euclid(self.n_phi as isize) as usize;
        1 + (ring - 1) * self.n_phi + slot
    }

    pub fn location(&self, node: usize) -> NodeLocation {
        if node == 0 {
            NodeLocation::Pole
        } else {
            NodeLocation::Ring { ring: 1 + (node - 1) / self.n_phi, slot: (node - 1) % self.n_phi }
        }
    }

    /// Polar coordinates `(theta, phi)` of a node; the pole reports azimuth 0.
    pub fn coords(&self, node: usize) -> (f64, f64) {
        match self.location(node) {
            NodeLocation::Pole => (0.0, 0.0),
            NodeLocation::Ring { ring, slot } => (self.theta(ring), self.phi(slot)),
        }
    }

    pub fn point(&self, node: usize) -> Vec3 {
        let (theta, phi) = self.coords(node);
        self.domain.point(theta, phi)
    }

    /// Same cap with both resolutions doubled; coarse node `(i, j)` is fine node `(2i, 2j)`.
    pub fn refined(&self) -> Self {
        Self { domain: self.domain, n_theta: 2 * self.n_theta, n_phi: 2 * self.n_phi }
    }
}

/// One finite real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: PolarGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: PolarGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.num_nodes()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("field value at node {k} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: PolarGrid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.num_nodes()])
    }

    /// Samples `f(theta, phi)` at every node.
    pub fn from_fn(grid: PolarGrid, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.num_nodes())
            .map(|k| {
                let (theta, phi) = grid.coords(k);
                f(theta, phi)
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, node: usize) -> f64 {
        self.values[node]
    }

    /// Mutable access for callers that maintain finiteness themselves (Newton updates).
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn boundary_values(&self) -> &[f64] {
        &self.values[self.grid.num_interior()..]
    }

    pub fn interior_values(&self) -> &[f64] {
        &self.values[..self.grid.num_interior()]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Largest node-wise difference to another field on the same grid.
    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Restriction of a field on `self.grid().refined()` back to this field's grid.
    pub fn restrict_from(grid: PolarGrid, fine: &ScalarField) -> Result<Self> {
        if fine.grid != grid.refined() {
            return Err(Error::InvalidArgument("field is not on the once-refined grid".into()));
        }
        let values = (0..grid.num_nodes())
            .map(|k| match grid.location(k) {
                NodeLocation::Pole => fine.values[0],
                NodeLocation::Ring { ring, slot } => {
                    fine.values[fine.grid.index(2 * ring, 2 * slot as isize)]
                }
            })
            .collect();
        Self::new(grid, values)
    }
}

/// Distance to the boundary circle, `d = theta_max - theta`.
pub fn distance_to_boundary(grid: &PolarGrid) -> ScalarField {
    let theta_max = grid.domain().theta_max();
    ScalarField::from_fn(*grid, |theta, _| theta_max - theta)
        .expect("distance field is finite by construction")
}

/// Geodesic curvature of the parallel circle `{d = eps}` with respect to `grad d`,
/// which is `cot(theta_max - eps)`; at `eps = 0` this is the boundary curvature.
pub fn parallel_mean_curvature(domain: &CapDomain, eps: f64) -> Result<f64> {
    if !(eps >= 0.0 && eps < domain.theta_max()) {
        return Err(Error::DomainDegenerate { eps, theta_max: domain.theta_max() });
    }
    Ok(1.0 / (domain.theta_max() - eps).tan())
}

/// `Laplacian(d)` on the parallel circle `{d = eps}`: `-(n - 1) * H`.
pub fn laplacian_distance(domain: &CapDomain, eps: f64) -> Result<f64> {
    Ok(-((DIM - 1) as f64) * parallel_mean_curvature(domain, eps)?)
}

/// Position `rho * p` of the radial graph over the node `p`.
pub fn embed(grid: &PolarGrid, node: usize, rho: f64) -> Result<Vec3> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius {rho} must be positive")));
    }
    let p = grid.point(node);
    Ok([rho * p[0], rho * p[1], rho * p[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, FRAC_PI_6};

    fn grid(theta_max: f64, n_theta: usize, n_phi: usize) -> PolarGrid {
        PolarGrid::new(CapDomain::polar(theta_max).unwrap(), n_theta, n_phi).unwrap()
    }

    #[test]
    fn domain_rejects_bad_inputs() {
        assert!(CapDomain::polar(0.0).is_err());
        assert!(CapDomain::polar(FRAC_PI_2).is_err());
        assert!(CapDomain::new([0.0, 0.0, 1.1], 0.5).is_err());
        let d = CapDomain::with_axis([0.0, 0.0, 3.0], 0.5).unwrap();
        assert_eq!(d.axis(), [0.0, 0.0, 1.0]);
        let d = CapDomain::from_circle_radius([0.0, 0.0, 1.0], 0.8).unwrap();
        assert_abs_diff_eq!(d.theta_max().cos(), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn grid_rejects_bad_azimuthal_counts() {
        let d = CapDomain::polar(0.5).unwrap();
        assert!(PolarGrid::new(d, 4, 6).is_err());
        assert!(PolarGrid::new(d, 4, 9).is_err());
        assert!(PolarGrid::new(d, 0, 8).is_err());
    }

    #[test]
    fn node_numbering() {
        let g = grid(0.5, 4, 8);
        assert_eq!(g.num_nodes(), 33);
        assert_eq!(g.num_interior(), 25);
        assert_eq!(g.boundary_nodes(), 25..33);
        assert_eq!(g.index(1, -1), 8);
        assert_eq!(g.index(4, 8), 25);
        assert_eq!(g.location(25), NodeLocation::Ring { ring: 4, slot: 0 });
        assert_eq!(g.theta(4), 0.5);
        for k in 0..g.num_nodes() {
            if let NodeLocation::Ring { ring, slot } = g.location(k) {
                assert_eq!(g.index(ring, slot as isize), k);
            }
        }
    }

    #[test]
    fn distance_examples() {
        let g = grid(FRAC_PI_3, 4, 8);
        let d = distance_to_boundary(&g);
        assert_abs_diff_eq!(d.get(g.index(2, 0)), FRAC_PI_6, epsilon = 1e-15);
        assert_eq!(d.boundary_values(), &[0.0; 8]);
        let g = grid(FRAC_PI_4, 4, 8);
        assert_eq!(distance_to_boundary(&g).get(0), FRAC_PI_4);
    }

    #[test]
    fn distance_has_unit_slope_across_rings() {
        let g = grid(1.2, 12, 16);
        let d = distance_to_boundary(&g);
        for i in 0..12 {
            let slope = (d.get(g.index(i + 1, 3)) - d.get(g.index(i, 3))) / g.dtheta();
            assert_abs_diff_eq!(slope, -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn parallel_curvature_examples() {
        let d = CapDomain::polar(FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(parallel_mean_curvature(&d, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(laplacian_distance(&d, 0.0).unwrap(), -1.0, epsilon = 1e-15);
        let d = CapDomain::polar(FRAC_PI_3).unwrap();
        assert_abs_diff_eq!(parallel_mean_curvature(&d, 0.0).unwrap(), 0.577_350_269_189_625_8, epsilon = 1e-15);
        assert_abs_diff_eq!(laplacian_distance(&d, FRAC_PI_6).unwrap(), -3f64.sqrt(), epsilon = 1e-14);
        let d = CapDomain::polar(FRAC_PI_2 - 1e-6).unwrap();
        assert_abs_diff_eq!(laplacian_distance(&d, 0.0).unwrap(), -1e-6, epsilon = 1e-12);
    }

    #[test]
    fn parallel_curvature_blows_up_towards_pole() {
        let d = CapDomain::polar(1.0).unwrap();
        assert!(matches!(parallel_mean_curvature(&d, 1.0), Err(Error::DomainDegenerate { .. })));
        assert!(parallel_mean_curvature(&d, -0.1).is_err());
        assert!(parallel_mean_curvature(&d, 1.0 - 1e-9).unwrap() > 1e8);
    }

    #[test]
    fn embed_examples() {
        let g = grid(FRAC_PI_2 - 1e-9, 2, 8);
        assert_eq!(embed(&g, 0, 1.0).unwrap(), [0.0, 0.0, 1.0]);
        assert!(embed(&g, 0, 0.0).is_err());
        let d = CapDomain::polar(1.0).unwrap();
        let p = d.point(FRAC_PI_2, 0.0);
        assert_abs_diff_eq!(2.0 * p[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(2.0 * p[2], 0.0, epsilon = 1e-15);
        let p = d.point(FRAC_PI_4, FRAC_PI_2);
        let h = 0.5f64.sqrt();
        assert_abs_diff_eq!(p[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], h, epsilon = 1e-15);
        assert_abs_diff_eq!(p[2], h, epsilon = 1e-15);
    }

    #[test]
    fn tilted_axis_frame_is_orthonormal() {
        let d = CapDomain::with_axis([1.0, 2.0, -0.5], 0.7).unwrap();
        let (e1, e2, a) = d.frame();
        for (u, v, expected) in [(&e1, &e1, 1.0), (&e2, &e2, 1.0), (&a, &a, 1.0), (&e1, &e2, 0.0), (&e1, &a, 0.0), (&e2, &a, 0.0)] {
            assert_abs_diff_eq!(dot(u, v), expected, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(dot(&d.point(0.3, 1.1), &a), 0.3f64.cos(), epsilon = 1e-14);
    }

    #[test]
    fn restriction_picks_even_nodes() {
        let g = grid(0.9, 4, 8);
        let fine = ScalarField::from_fn(g.refined(), |t, p| t + 10.0 * p).unwrap();
        let coarse = ScalarField::restrict_from(g, &fine).unwrap();
        let direct = ScalarField::from_fn(g, |t, p| t + 10.0 * p).unwrap();
        assert!(coarse.max_abs_diff(&direct) < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn embed_preserves_radius(theta_max in 0.05f64..1.5, rho in 1e-3f64..1e3, node in 0usize..200) {
                let g = grid(theta_max, 8, 24);
                let node = node % g.num_nodes();
                let x = embed(&g, node, rho).unwrap();
                prop_assert!((norm(&x) - rho).abs() <= 1e-14 * rho.max(1.0) * 4.0);
            }

            #[test]
            fn parallel_curvature_is_nondecreasing(theta_max in 0.05f64..1.55, a in 0.0f64..1.0, b in 0.0f64..1.0) {
                let d = CapDomain::polar(theta_max).unwrap();
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let h0 = parallel_mean_curvature(&d, 0.0).unwrap();
                let h1 = parallel_mean_curvature(&d, lo * theta_max * 0.999).unwrap();
                let h2 = parallel_mean_curvature(&d, hi * theta_max * 0.999).unwrap();
                prop_assert!(h2 >= h1 && h1 >= h0);
            }
        }
    }
}
