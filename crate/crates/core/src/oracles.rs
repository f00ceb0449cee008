//! Closed-form radial graphs: pieces of spheres, and the two graphs of equal mean curvature
//! over the cap `{z > sqrt(1 - r^2)}` cut from `x^2 + y^2 + (z + h)^2 = R_h^2` and its mirror
//! image in the plane of the boundary circle.

use crate::error::{Error, Result};
use crate::sphere::{PolarGrid, ScalarField, DIM};

/// Sphere of radius `radius` centred at `offset * axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetSphere {
    pub offset: f64,
    pub radius: f64,
}

/// Which intersection of a ray from the origin with the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `rho = a cos(theta) - sqrt(R^2 - a^2 sin^2(theta))`
    Near,
    /// `rho = a cos(theta) + sqrt(R^2 - a^2 sin^2(theta))`
    Far,
}

impl OffsetSphere {
    /// Radial distance along colatitude `theta`, or `None` when the ray misses the sphere or
    /// the branch lies behind the origin.
    pub fn radial_distance(&self, theta: f64, branch: Branch) -> Option<f64> {
        let (s, c) = theta.sin_cos();
        let a = self.offset;
        let r = self.radius;
        // Factored to keep accuracy when the ray is nearly tangent.
        let mut disc = (r - a * s) * (r + a * s);
        if disc < 0.0 && disc > -64.0 * f64::EPSILON * r * r {
            disc = 0.0;
        }
        if disc < 0.0 {
            return None;
        }
        let root = disc.sqrt();
        let rho = match branch {
            Branch::Far => a * c + root,
            Branch::Near => a * c - root,
        };
        (rho > 0.0).then_some(rho)
    }
}

/// `u = ln rho` of a sphere piece over every node; axisymmetric about the grid axis.
pub fn cap_solution(sphere: OffsetSphere, branch: Branch, grid: &PolarGrid) -> Result<ScalarField> {
    if !(sphere.radius > 0.0) {
        return Err(Error::OracleOutOfRange(format!("radius {} must be positive", sphere.radius)));
    }
    let mut values = Vec::with_capacity(grid.num_nodes());
    for k in 0..grid.num_nodes() {
        let (theta, _) = grid.coords(k);
        let rho = sphere.radial_distance(theta, branch).ok_or_else(|| {
            Error::OracleOutOfRange(format!("{branch:?} branch of {sphere:?} is not a radial graph at theta = {theta}"))
        })?;
        values.push(rho.ln());
    }
    ScalarField::new(*grid, values)
}

/// Parameters of the equal-curvature pair over the cap with boundary circle radius `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example1 {
    pub r: f64,
    pub h: f64,
}

impl Example1 {
    /// Requires `1/sqrt(2) <= r < 1` and `0 <= h <= (2 r^2 - 1) / sqrt(1 - r^2)`.
    pub fn new(r: f64, h: f64) -> Result<Self> {
        if !(r >= std::f64::consts::FRAC_1_SQRT_2 && r < 1.0) {
            return Err(Error::OracleOutOfRange(format!("r = {r} outside [1/sqrt(2), 1)")));
        }
        let h_max = Self::h_max(r);
        if !(h >= 0.0 && h <= h_max) {
            return Err(Error::OracleOutOfRange(format!("h = {h} outside [0, {h_max}] for r = {r}")));
        }
        Ok(Self { r, h })
    }

    /// The `h` whose pair has mean curvature `mean_curvature`, if admissible.
    pub fn from_mean_curvature(r: f64, mean_curvature: f64) -> Result<Self> {
        let big_r = 1.0 / mean_curvature;
        let c = (1.0 - r * r).sqrt();
        let h = -c + (big_r * big_r - r * r).max(0.0).sqrt();
        Self::new(r, h)
    }

    pub fn h_max(r: f64) -> f64 {
        (2.0 * r * r - 1.0) / (1.0 - r * r).sqrt()
    }

    /// Height of the boundary plane, `sqrt(1 - r^2)`.
    pub fn plane(&self) -> f64 {
        (1.0 - self.r * self.r).sqrt()
    }

    /// `R_h = sqrt(1 + h^2 + 2 h sqrt(1 - r^2))`
    pub fn radius(&self) -> f64 {
        (1.0 + self.h * self.h + 2.0 * self.h * self.plane()).sqrt()
    }

    pub fn mean_curvature(&self) -> f64 {
        1.0 / self.radius()
    }

    /// `S(h)`, centred at `-h`; its part above the plane is `M1`.
    pub fn sphere(&self) -> OffsetSphere {
        OffsetSphere { offset: -self.h, radius: self.radius() }
    }

    /// Mirror image of `S(h)` in the plane; its part above the plane is `M2`.
    pub fn reflected_sphere(&self) -> OffsetSphere {
        OffsetSphere { offset: 2.0 * self.plane() + self.h, radius: self.radius() }
    }
}

/// `(u_M1, u_M2)`: `M1` is the far branch of `S(h)` and lies inside the unit sphere;
/// `M2` is the far branch of the reflected sphere and lies outside it. Both vanish on the
/// boundary circle, which lies on the unit sphere.
pub fn example1_pair(r: f64, h: f64, grid: &PolarGrid) -> Result<(ScalarField, ScalarField)> {
    let ex = Example1::new(r, h)?;
    let theta_max = grid.domain().theta_max();
    if (theta_max.sin() - r).abs() > 1e-12 {
        return Err(Error::OracleOutOfRange(format!("grid aperture {theta_max} does not match r = {r}")));
    }
    let snap = |f: ScalarField| -> Result<ScalarField> {
        let n_int = grid.num_interior();
        let mut v = f.into_values();
        for x in &mut v[n_int..] {
            if x.abs() < 1e-12 {
                *x = 0.0;
            }
        }
        ScalarField::new(*grid, v)
    };
    let m1 = snap(cap_solution(ex.sphere(), Branch::Far, grid)?)?;
    let m2 = snap(cap_solution(ex.reflected_sphere(), Branch::Far, grid)?)?;
    Ok((m1, m2))
}

/// Finite-difference weights for the `order`-th derivative at 0 from the given offsets
/// (Fornberg's recursion).
pub fn fd_weights(offsets: &[f64], order: usize) -> Vec<f64> {
    let n = offsets.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Fourth-order reduction of the curvature operator to axisymmetric profiles.
///
/// `profile[i]` is `u` at `theta_i = i dtheta`, `i = 0..=N`. Returns `Q[u] + n H` at
/// `i = 0..N` (pole and interior rings), using the evenness of `u` in `theta` for ghost
/// values and shifted stencils next to the boundary.
pub fn axisymmetric_ode_residual(profile: &[f64], dtheta: f64, h: f64) -> Result<Vec<f64>> {
    let n = profile.len().checked_sub(1).filter(|&n| n >= 6).ok_or_else(|| {
        Error::InvalidArgument("axisymmetric profile needs at least 7 samples".into())
    })?;
    let n_dim = DIM as f64;
    let value = |i: isize| profile[i.unsigned_abs()];
    let derivative = |i: usize, order: usize, width: isize| -> f64 {
        // Centered where possible; shift left near the boundary.
        let half = width / 2;
        let hi = (i as isize + half).min(n as isize);
        let lo = hi - width + 1;
        let lo = lo.min(i as isize - half);
        let offsets: Vec<f64> = (lo..lo + width).map(|k| (k - i as isize) as f64).collect();
        let w = fd_weights(&offsets, order);
        (lo..lo + width).zip(&w).map(|(k, w)| w * value(k)).sum::<f64>() / dtheta.powi(order as i32)
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let u = profile[i];
        let q = if i == 0 {
            let upp = derivative(0, 2, 5);
            (-u).exp() * (n_dim * upp - n_dim)
        } else {
            let theta = i as f64 * dtheta;
            let up = derivative(i, 1, 5);
            let upp = if i + 2 <= n { derivative(i, 2, 5) } else { derivative(i, 2, 6) };
            let w2 = 1.0 + up * up;
            let w = w2.sqrt();
            (-u).exp() / w * (upp / w2 + up / theta.tan() - n_dim)
        };
        out.push(q + n_dim * h);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{apply_q, graph_geometry};
    use crate::sphere::CapDomain;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    fn cap_grid(r: f64, n_theta: usize, n_phi: usize) -> PolarGrid {
        PolarGrid::new(CapDomain::from_circle_radius([0.0, 0.0, 1.0], r).unwrap(), n_theta, n_phi).unwrap()
    }

    #[test]
    fn centred_spheres() {
        let g = cap_grid(0.8, 8, 16);
        let u = cap_solution(OffsetSphere { offset: 0.0, radius: 1.0 }, Branch::Far, &g).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
        let u = cap_solution(OffsetSphere { offset: 0.0, radius: 2.0 }, Branch::Far, &g).unwrap();
        assert!(u.values().iter().all(|&v| (v - LN_2).abs() < 1e-15));
        assert!(cap_solution(OffsetSphere { offset: 0.0, radius: 2.0 }, Branch::Near, &g).is_err());
    }

    #[test]
    fn example1_radius_and_range() {
        let ex = Example1::new(0.8, 0.4).unwrap();
        assert_abs_diff_eq!(ex.radius(), 1.64f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(ex.mean_curvature(), 0.780_868_809_443_030_2, epsilon = 1e-12);
        assert!(Example1::new(0.8, 0.5).is_err());
        assert!(Example1::new(0.6, 0.0).is_err());
        let back = Example1::from_mean_curvature(0.8, ex.mean_curvature()).unwrap();
        assert_abs_diff_eq!(back.h, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn boundary_circle_lies_on_both_spheres() {
        let ex = Example1::new(0.8, 0.4).unwrap();
        // r^2 + (sqrt(1 - r^2) + h)^2 = R_h^2
        assert_abs_diff_eq!(0.64 + (0.6f64 + 0.4).powi(2), ex.radius().powi(2), epsilon = 1e-14);
        let theta_max = 0.8f64.asin();
        for s in [ex.sphere(), ex.reflected_sphere()] {
            assert_abs_diff_eq!(s.radial_distance(theta_max, Branch::Far).unwrap(), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn zero_height_pair_is_unit_sphere() {
        let g = cap_grid(0.8, 8, 16);
        let (m1, m2) = example1_pair(0.8, 0.0, &g).unwrap();
        assert!(m1.values().iter().all(|v| v.abs() < 1e-15));
        // The mirror of the unit sphere is a different sphere, which still passes through the circle.
        assert!(m2.boundary_values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pair_is_ordered_around_unit_sphere() {
        let g = cap_grid(0.8, 16, 32);
        for h in [0.1, 0.25, 0.4] {
            let (m1, m2) = example1_pair(0.8, h, &g).unwrap();
            assert!(m1.boundary_values().iter().chain(m2.boundary_values()).all(|&v| v == 0.0));
            for k in 0..g.num_nodes() {
                assert!(m1.get(k) <= 0.0 && m2.get(k) >= 0.0, "node {k}");
            }
        }
    }

    #[test]
    fn pair_has_inward_orientation_and_equal_curvature() {
        let g = cap_grid(0.8, 64, 32);
        let (m1, m2) = example1_pair(0.8, 0.1, &g).unwrap();
        let target = Example1::new(0.8, 0.1).unwrap().mean_curvature();
        for u in [&m1, &m2] {
            let geo = graph_geometry(u).unwrap();
            assert!(geo.points.iter().all(|p| p.support() < 0.0));
            // Away from the boundary layer of M2 the discrete curvature is close to 1/R_h.
            assert_abs_diff_eq!(geo.points[0].mean_curvature, target, epsilon = 1e-3);
        }
    }

    #[test]
    fn fornberg_reproduces_classic_stencils() {
        let w = fd_weights(&[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let expect = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        let w = fd_weights(&[-1.0, 0.0, 1.0], 1);
        assert_abs_diff_eq!(w[0], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ode_residual_of_constant() {
        let res = axisymmetric_ode_residual(&[0.3; 11], 0.05, 0.0).unwrap();
        for v in res {
            assert_abs_diff_eq!(v, -2.0 * (-0.3f64).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn ode_residual_is_fourth_order_on_caps() {
        let ex = Example1::new(0.8, 0.25).unwrap();
        let theta_max = 0.8f64.asin();
        let err = |n: usize| {
            let dt = theta_max / n as f64;
            let profile: Vec<f64> = (0..=n)
                .map(|i| ex.sphere().radial_distance(i as f64 * dt, Branch::Far).unwrap().ln())
                .collect();
            axisymmetric_ode_residual(&profile, dt, ex.mean_curvature())
                .unwrap()
                .into_iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
        };
        let (e1, e2) = (err(16), err(32));
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "{e1} {e2} {ratio}");
    }

    #[test]
    fn two_dimensional_operator_agrees_with_ode_on_axisymmetric_fields() {
        let profile = |t: f64| 0.2 * t.cos() + 0.1 * (2.0 * t).cos().powi(2) - 0.05 * t.powi(4);
        let gap = |n: usize| {
            let g = cap_grid(0.8, n, 16);
            let u = ScalarField::from_fn(g, |t, _| profile(t)).unwrap();
            let q2 = apply_q(&u).unwrap();
            let samples: Vec<f64> = (0..=n).map(|i| profile(g.theta(i))).collect();
            let q1 = axisymmetric_ode_residual(&samples, g.dtheta(), 0.0).unwrap();
            let worst = (0..n)
                .map(|i| {
                    let avg = (0..16).map(|j| q2[g.index(i, j)]).sum::<f64>() / 16.0;
                    (avg - q1[i]).abs()
                })
                .fold(0.0f64, f64::max);
            (worst, g.dtheta())
        };
        let (e1, d1) = gap(16);
        let (e2, d2) = gap(32);
        assert!(e1 < 4.0 * d1 * d1 && e2 < 4.0 * d2 * d2, "{e1} {e2}");
        assert!(e1 / e2 > 3.0, "{e1} {e2}");
    }
}
