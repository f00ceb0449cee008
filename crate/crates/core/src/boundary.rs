//! Dirichlet data on the boundary circle as a truncated Fourier series in azimuth.

use crate::error::{Error, Result};
use crate::sphere::{PolarGrid, ScalarField};

/// `phi(angle) = constant + sum_k (a_k cos(k angle) + b_k sin(k angle))`
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryData {
    pub constant: f64,
    /// `(k, a_k, b_k)` with `k >= 1`.
    pub modes: Vec<(u32, f64, f64)>,
}

impl BoundaryData {
    pub fn constant(value: f64) -> Self {
        Self { constant: value, modes: Vec::new() }
    }

    pub fn with_modes(constant: f64, modes: Vec<(u32, f64, f64)>) -> Result<Self> {
        if !constant.is_finite() {
            return Err(Error::InvalidArgument("boundary constant must be finite".into()));
        }
        for &(k, a, b) in &modes {
            if k == 0 || !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidArgument(format!("bad Fourier mode ({k}, {a}, {b})")));
            }
        }
        Ok(Self { constant, modes })
    }

    pub fn is_constant(&self) -> bool {
        self.modes.iter().all(|&(_, a, b)| a == 0.0 && b == 0.0)
    }

    pub fn eval(&self, angle: f64) -> f64 {
        self.modes.iter().fold(self.constant, |acc, &(k, a, b)| {
            let (s, c) = (k as f64 * angle).sin_cos();
            acc + a * c + b * s
        })
    }

    /// Derivative in the azimuthal angle.
    pub fn derivative(&self, angle: f64) -> f64 {
        self.modes.iter().fold(0.0, |acc, &(k, a, b)| {
            let k = k as f64;
            let (s, c) = (k * angle).sin_cos();
            acc + k * (b * c - a * s)
        })
    }

    /// Values on the boundary ring of `grid`, in slot order.
    pub fn sample(&self, grid: &PolarGrid) -> Vec<f64> {
        (0..grid.n_phi()).map(|j| self.eval(grid.phi(j))).collect()
    }

    pub fn min(&self, grid: &PolarGrid) -> f64 {
        self.sample(grid).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Largest tangential gradient `|phi'| / sin(theta_max)` over the boundary nodes.
    pub fn max_tangential_gradient(&self, grid: &PolarGrid) -> f64 {
        let s = grid.domain().theta_max().sin();
        (0..grid.n_phi()).map(|j| self.derivative(grid.phi(j)).abs() / s).fold(0.0, f64::max)
    }

    /// Extension constant along meridians; the pole takes the mean value.
    pub fn extend(&self, grid: &PolarGrid) -> Result<ScalarField> {
        let mean = self.constant;
        ScalarField::from_fn(*grid, |theta, phi| if theta == 0.0 { mean } else { self.eval(phi) })
    }

    /// A field whose boundary ring carries exactly `sample(grid)`; interior values are `interior`.
    pub fn with_interior(&self, grid: &PolarGrid, interior: &[f64]) -> Result<ScalarField> {
        if interior.len() != grid.num_interior() {
            return Err(Error::InvalidArgument("interior length does not match grid".into()));
        }
        let mut v = interior.to_vec();
        v.extend(self.sample(grid));
        ScalarField::new(*grid, v)
    }
}
