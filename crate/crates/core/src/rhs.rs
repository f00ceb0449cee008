//! Right-hand-side families for the two continuation stages.
//!
//! With `rho = e^u`, `rho_bar = e^{u_bar}` and `H_bar` the mean curvature of the subsolution:
//!
//! ```text
//! Psi_t   = -rho^{-C} (t eps + (1 - t) rho_bar^C n H_bar)
//! Theta_t = -t n H - (1 - t) eps rho^{-C}
//! ```
//!
//! `Psi_1` and `Theta_0` coincide, which is where the first stage hands over to the second.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operator::RadialGraphOperator;
use crate::sphere::{ScalarField, DIM};

const N: f64 = DIM as f64;

/// Parameters `t` at which constant selection checks the radial monotonicity condition.
pub const CHECK_TIMES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Samples per node of `rho in (0, rho_bar]` for the monotonicity check.
pub const RHO_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Psi,
    Theta,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Psi => "Psi",
            Family::Theta => "Theta",
        })
    }
}

/// A subsolution radial graph `u_bar` and its node-wise mean curvature.
#[derive(Debug, Clone)]
pub struct Subsolution {
    ubar: ScalarField,
    mean_curvature: Vec<f64>,
    ell: f64,
}

impl Subsolution {
    /// Takes `H_bar = -Q[u_bar] / n` from the discrete operator, so `u_bar` solves the
    /// discrete first-stage problem at `t = 0` up to round-off.
    pub fn new(ubar: ScalarField) -> Result<Self> {
        let q = RadialGraphOperator::new(ubar.grid())?.apply_q(&ubar)?;
        let mean_curvature = q.into_iter().map(|q| -q / N).collect();
        let ell = ubar.min().exp();
        Ok(Self { ubar, mean_curvature, ell })
    }

    pub fn field(&self) -> &ScalarField {
        &self.ubar
    }

    /// `H_bar` at the interior nodes.
    pub fn mean_curvature(&self) -> &[f64] {
        &self.mean_curvature
    }

    pub fn min_mean_curvature(&self) -> f64 {
        self.mean_curvature.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `inf e^{u_bar}` over the closed domain.
    pub fn ell(&self) -> f64 {
        self.ell
    }
}

/// One member `Upsilon_t` of a family, bound to a subsolution.
#[derive(Debug, Clone)]
pub struct RightHandSide {
    pub family: Family,
    pub t: f64,
    pub c: f64,
    pub eps: f64,
    pub h_target: f64,
    sub: Arc<Subsolution>,
}

impl RightHandSide {
    pub fn new(family: Family, t: f64, c: f64, eps: f64, h_target: f64, sub: Arc<Subsolution>) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("t = {t} outside [0, 1]")));
        }
        if !(c > 0.0 && eps > 0.0 && h_target > 0.0) || !(c.is_finite() && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "constants must be positive: C = {c}, eps = {eps}, H = {h_target}"
            )));
        }
        Ok(Self { family, t, c, eps, h_target, sub })
    }

    /// Same family and constants at another parameter value.
    pub fn at(&self, t: f64) -> Result<Self> {
        Self::new(self.family, t, self.c, self.eps, self.h_target, self.sub.clone())
    }

    /// Same constants and parameter in the other family.
    pub fn with_family(&self, family: Family) -> Self {
        Self { family, ..self.clone() }
    }

    pub fn subsolution(&self) -> &Subsolution {
        &self.sub
    }

    pub fn subsolution_arc(&self) -> &Arc<Subsolution> {
        &self.sub
    }

    /// `(Upsilon_t(e^u x), d/du Upsilon_t(e^u x))` at an interior node.
    pub fn value_and_derivative(&self, node: usize, u: f64) -> (f64, f64) {
        let (t, c, eps) = (self.t, self.c, self.eps);
        let decay = (-c * u).exp();
        match self.family {
            Family::Psi => {
                let anchored = if t < 1.0 {
                    (1.0 - t) * N * self.sub.mean_curvature[node] * (c * (self.sub.ubar.get(node) - u)).exp()
                } else {
                    0.0
                };
                let value = -(t * eps * decay + anchored);
                (value, -c * value)
            }
            Family::Theta => {
                let value = -t * N * self.h_target - (1.0 - t) * eps * decay;
                (value, c * (1.0 - t) * eps * decay)
            }
        }
    }
}

/// `Upsilon_t(e^u x)` at every interior node.
pub fn eval_rhs(rhs: &RightHandSide, u: &ScalarField) -> Vec<f64> {
    (0..u.grid().num_interior()).map(|k| rhs.value_and_derivative(k, u.get(k)).0).collect()
}

/// `eps = (ell^C / 2) n (min H_bar - H)`: half the slack allowed by
/// `n H_bar > n H + eps / ell^C`.
pub fn epsilon_for(sub: &Subsolution, h_target: f64, c: f64) -> f64 {
    0.5 * sub.ell().powf(c) * N * (sub.min_mean_curvature() - h_target)
}

/// Outcome of checking `d/drho (rho Upsilon(rho x)) >= 0` for `rho <= rho_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoCheckReport {
    pub family: Family,
    pub t: f64,
    pub c: f64,
    /// Smallest sampled derivative.
    pub min_value: f64,
    pub min_node: usize,
    /// False for Theta at `t = 1`, where the condition reduces to `-n H < 0` and is waived.
    pub applicable: bool,
}

impl RhoCheckReport {
    pub fn passed(&self) -> bool {
        !self.applicable || self.min_value >= 0.0
    }
}

/// Evaluates the closed-form radial derivative on `rho = rho_bar k / 16`, `k = 1..=16`, at
/// every interior node. Theta's derivative decreases in `rho`, so its minimum sits at
/// `rho = rho_bar`.
pub fn monotone_rho_check(rhs: &RightHandSide) -> RhoCheckReport {
    let sub = rhs.subsolution();
    let (t, c, eps) = (rhs.t, rhs.c, rhs.eps);
    let applicable = !(rhs.family == Family::Theta && t >= 1.0);
    let mut min_value = f64::INFINITY;
    let mut min_node = 0;
    for node in 0..sub.mean_curvature.len() {
        let ln_rho_bar = sub.ubar.get(node);
        for k in 1..=RHO_SAMPLES {
            let ln_rho = ln_rho_bar + (k as f64 / RHO_SAMPLES as f64).ln();
            let eps_decay = (eps.ln() - c * ln_rho).exp();
            let value = match rhs.family {
                Family::Psi => {
                    let anchored = (1.0 - t) * N * sub.mean_curvature[node] * (c * (ln_rho_bar - ln_rho)).exp();
                    (c - 1.0) * (t * eps_decay + anchored)
                }
                Family::Theta => -t * N * rhs.h_target + (c - 1.0) * (1.0 - t) * eps_decay,
            };
            if value < min_value {
                min_value = value;
                min_node = node;
            }
        }
    }
    RhoCheckReport { family: rhs.family, t, c, min_value, min_node, applicable }
}

/// Both families at every time in [`CHECK_TIMES`].
pub fn rho_checks(sub: &Arc<Subsolution>, h_target: f64, c: f64, eps: f64) -> Result<Vec<RhoCheckReport>> {
    let mut out = Vec::new();
    for family in [Family::Psi, Family::Theta] {
        for t in CHECK_TIMES {
            let rhs = RightHandSide::new(family, t, c, eps, h_target, sub.clone())?;
            out.push(monotone_rho_check(&rhs));
        }
    }
    Ok(out)
}

/// Chosen homotopy constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomotopyConstants {
    pub c: f64,
    pub eps: f64,
}

/// Smallest `C` in `{2, 4, 8, ...}` for which every applicable monotonicity check passes,
/// with `eps` from [`epsilon_for`].
pub fn select_constants(sub: &Arc<Subsolution>, h_target: f64, max_doublings: u32) -> Result<HomotopyConstants> {
    check_hypothesis(sub, h_target)?;
    let mut worst = (f64::NEG_INFINITY, 0usize);
    let mut attempts = 0;
    for p in 1..=max_doublings.max(1) {
        let c = 2f64.powi(p as i32);
        let eps = epsilon_for(sub, h_target, c);
        if !(eps.is_finite() && eps > 0.0) {
            break;
        }
        attempts += 1;
        let reports = rho_checks(sub, h_target, c, eps)?;
        match reports.iter().filter(|r| !r.passed()).min_by(|a, b| a.min_value.total_cmp(&b.min_value)) {
            None => return Ok(HomotopyConstants { c, eps }),
            Some(r) if r.min_value > worst.0 => worst = (r.min_value, r.min_node),
            Some(_) => {}
        }
    }
    Err(Error::SearchExhausted {
        what: "homotopy constant C",
        attempts,
        worst_value: worst.0,
        worst_node: worst.1,
    })
}

/// `0 < H < min H_bar`.
pub fn check_hypothesis(sub: &Subsolution, h_target: f64) -> Result<()> {
    let min_h = sub.min_mean_curvature();
    if !(h_target > 0.0 && h_target < min_h) {
        return Err(Error::HypothesisViolated(format!(
            "need 0 < H < min H_bar, got H = {h_target}, min H_bar = {min_h}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{CapDomain, PolarGrid};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    fn sub(value: f64) -> Arc<Subsolution> {
        let g = PolarGrid::new(CapDomain::from_circle_radius([0.0, 0.0, 1.0], 0.8).unwrap(), 8, 16).unwrap();
        Arc::new(Subsolution::new(ScalarField::constant(g, value).unwrap()).unwrap())
    }

    #[test]
    fn subsolution_of_spheres() {
        let s = sub(0.0);
        assert_abs_diff_eq!(s.min_mean_curvature(), 1.0, epsilon = 1e-12);
        assert_eq!(s.ell(), 1.0);
        let s = sub(LN_2);
        assert_abs_diff_eq!(s.min_mean_curvature(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.ell(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn epsilon_examples() {
        assert_abs_diff_eq!(epsilon_for(&sub(0.0), 0.5, 2.0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(epsilon_for(&sub(LN_2), 0.25, 2.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hypothesis_requires_strict_inequality() {
        let s = sub(0.0);
        assert!(matches!(select_constants(&s, 1.0, 40), Err(Error::HypothesisViolated(_))));
        assert!(matches!(select_constants(&s, 0.0, 40), Err(Error::HypothesisViolated(_))));
        assert!(matches!(select_constants(&s, 2.0, 40), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn selected_constants_pass_every_check() {
        let s = sub(0.0);
        let k = select_constants(&s, 0.5, 40).unwrap();
        assert!(k.c > 1.0);
        assert_abs_diff_eq!(k.eps, epsilon_for(&s, 0.5, k.c), epsilon = 0.0);
        assert!(rho_checks(&s, 0.5, k.c, k.eps).unwrap().iter().all(RhoCheckReport::passed));
        // Smallest: the previous doubling fails somewhere.
        if k.c > 2.0 {
            let c = k.c / 2.0;
            let eps = epsilon_for(&s, 0.5, c);
            assert!(!rho_checks(&s, 0.5, c, eps).unwrap().iter().all(RhoCheckReport::passed));
        }
    }

    #[test]
    fn psi_start_reproduces_subsolution_curvature() {
        let s = sub(LN_2);
        let rhs = RightHandSide::new(Family::Psi, 0.0, 4.0, 0.3, 0.25, s.clone()).unwrap();
        for (k, v) in eval_rhs(&rhs, s.field()).into_iter().enumerate() {
            assert_abs_diff_eq!(v, -2.0 * s.mean_curvature()[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn theta_end_is_constant() {
        let s = sub(0.0);
        let rhs = RightHandSide::new(Family::Theta, 1.0, 4.0, 0.3, 0.7, s.clone()).unwrap();
        let u = ScalarField::from_fn(*s.field().grid(), |t, p| 0.1 * t * p.cos()).unwrap();
        assert!(eval_rhs(&rhs, &u).iter().all(|&v| v == -1.4));
    }

    #[test]
    fn rho_check_examples() {
        let s = sub(0.0);
        for t in CHECK_TIMES {
            let psi = RightHandSide::new(Family::Psi, t, 2.0, 0.5, 0.5, s.clone()).unwrap();
            let r = monotone_rho_check(&psi);
            assert!(r.applicable && r.min_value > 0.0);
        }
        let theta = RightHandSide::new(Family::Theta, 0.0, 2.0, 0.5, 0.5, s.clone()).unwrap();
        assert_abs_diff_eq!(monotone_rho_check(&theta).min_value, 0.5, epsilon = 1e-12);
        let end = RightHandSide::new(Family::Theta, 1.0, 2.0, 0.5, 0.5, s.clone()).unwrap();
        let r = monotone_rho_check(&end);
        assert!(!r.applicable && r.passed());
        assert_abs_diff_eq!(r.min_value, -1.0, epsilon = 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn stage_handoff_is_bit_identical(u in -2.0f64..2.0, c in 1.5f64..40.0, eps in 1e-3f64..2.0) {
                let s = sub(0.0);
                let psi = RightHandSide::new(Family::Psi, 1.0, c, eps, 0.5, s.clone()).unwrap();
                let theta = RightHandSide::new(Family::Theta, 0.0, c, eps, 0.5, s).unwrap();
                for node in [0, 5, 40] {
                    let a = psi.value_and_derivative(node, u).0;
                    let b = theta.value_and_derivative(node, u).0;
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }

            #[test]
            fn nonpositive_and_affine_in_t(u in -2.0f64..2.0, t in 0.0f64..1.0, c in 1.5f64..20.0, theta in proptest::bool::ANY) {
                let s = sub(-0.2);
                let family = if theta { Family::Theta } else { Family::Psi };
                let at = |t: f64| RightHandSide::new(family, t, c, 0.2, 0.5, s.clone()).unwrap().value_and_derivative(3, u).0;
                let (a, b) = (at(0.0), at(1.0));
                prop_assert!(at(t) <= 0.0);
                let mid = at(0.5);
                prop_assert!((mid - 0.5 * (a + b)).abs() <= 1e-12 * (a.abs() + b.abs()).max(1.0));
            }
        }
    }
}
