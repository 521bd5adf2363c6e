//! Absolute monotonicity conditions and the SSP radius.
//!
//! A method `(A, b)` is absolutely monotonic at `r ≥ 0` when
//!
//! ```text
//! I + rA invertible
//! (I + rA)⁻¹ e          ≥ 0
//! rA (I + rA)⁻¹         ≥ 0
//! bᵀ (I + rA)⁻¹         ≥ 0
//! 1 − r bᵀ (I + rA)⁻¹ e ≥ 0
//! ```
//!
//! entrywise. The feasible set is an interval `[0, R]`; `R` is the SSP radius
//! and the method preserves any convex functional for steps `τ ≤ R·τ₀`.

use serde::Serialize;

use crate::linalg::Matrix;
use crate::method::RungeKuttaMethod;
use crate::par::{self, Execution};

/// Slack entries at or above `-TOL_FEAS` count as nonnegative.
pub const TOL_FEAS: f64 = 1e-10;
/// Width of the final bisection bracket.
pub const TOL_BISECT: f64 = 1e-10;
/// Methods still feasible here are reported as unbounded.
pub const R_CAP: f64 = 1e6;
/// Slack floor used while locating the radius. Bisecting on the relaxed
/// `TOL_FEAS` test would overshoot the exact boundary by `TOL_FEAS` divided
/// by the slack slope, which is about `8e−9` for the ten-stage optimum.
const TOL_ROOT: f64 = 1e-13;

/// Values of the four inequality blocks at one radius.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Slacks {
    /// `(I + rA)⁻¹ e`
    pub row_sums: Vec<f64>,
    /// `rA (I + rA)⁻¹`
    pub stage_coefficients: Vec<Vec<f64>>,
    /// `bᵀ (I + rA)⁻¹`
    pub weight_coefficients: Vec<f64>,
    /// `1 − r bᵀ (I + rA)⁻¹ e`
    pub tail: f64,
}

impl Slacks {
    pub fn min(&self) -> f64 {
        self.row_sums
            .iter()
            .chain(self.stage_coefficients.iter().flatten())
            .chain(&self.weight_coefficients)
            .chain(std::iter::once(&self.tail))
            .fold(f64::INFINITY, |m, &x| m.min(x))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityCertificate {
    pub r: f64,
    pub invertible: bool,
    /// `None` when `I + rA` is singular.
    pub slacks: Option<Slacks>,
    pub feasible: bool,
}

impl MonotonicityCertificate {
    pub fn min_slack(&self) -> Option<f64> {
        self.slacks.as_ref().map(Slacks::min)
    }
}

pub fn certify(method: &RungeKuttaMethod, r: f64) -> MonotonicityCertificate {
    certify_with_tol(method, r, TOL_FEAS)
}

fn certify_with_tol(method: &RungeKuttaMethod, r: f64, tol: f64) -> MonotonicityCertificate {
    let s = method.stages();
    let ra = method.a().scale(r);
    let n = Matrix::identity(s).add(&ra);
    let Some(m) = n.inverse() else {
        return MonotonicityCertificate {
            r,
            invertible: false,
            slacks: None,
            feasible: false,
        };
    };
    let weight_coefficients = m.vec_mul(method.b());
    let tail = 1.0 - r * weight_coefficients.iter().sum::<f64>();
    let slacks = Slacks {
        row_sums: m.row_sums(),
        stage_coefficients: ra.mul(&m).to_rows(),
        weight_coefficients,
        tail,
    };
    let feasible = slacks.min() >= -tol;
    MonotonicityCertificate {
        r,
        invertible: true,
        slacks: Some(slacks),
        feasible,
    }
}

/// Largest feasible radius, or `f64::INFINITY` if the method is still
/// feasible at [`R_CAP`].
///
/// The bracket doubles from `r = 1` until it leaves the feasible set, then
/// bisection shrinks it below [`TOL_BISECT`]. The returned value is the
/// feasible end of the final bracket, so [`certify`] accepts it.
pub fn ssp_radius(method: &RungeKuttaMethod) -> f64 {
    let feasible = |r: f64| certify_with_tol(method, r, TOL_ROOT).feasible;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while feasible(hi) {
        if hi >= R_CAP {
            return f64::INFINITY;
        }
        lo = hi;
        hi = (2.0 * hi).min(R_CAP);
    }
    while hi - lo > TOL_BISECT {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn feasibility_profile(method: &RungeKuttaMethod, r_values: &[f64]) -> Vec<MonotonicityCertificate> {
    feasibility_profile_with(method, r_values, Execution::default())
}

pub fn feasibility_profile_with(
    method: &RungeKuttaMethod,
    r_values: &[f64],
    exec: Execution,
) -> Vec<MonotonicityCertificate> {
    par::map_slice(exec, r_values, |&r| certify(method, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal2() -> RungeKuttaMethod {
        RungeKuttaMethod::from_rows("opt2", &[[0.25, 0.0], [0.5, 0.25]], &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn optimal_two_stage_at_four_and_beyond() {
        assert!(certify(&optimal2(), 4.0).feasible);
        let c = certify(&optimal2(), 4.5);
        assert!(c.invertible && !c.feasible);
    }

    #[test]
    fn zero_radius_degenerates() {
        let c = certify(&optimal2(), 0.0);
        assert!(c.feasible);
        let sl = c.slacks.unwrap();
        assert_eq!(sl.tail, 1.0);
        assert_eq!(sl.row_sums, vec![1.0, 1.0]);
    }

    #[test]
    fn forward_euler_radius_is_one() {
        let fe = RungeKuttaMethod::from_rows("fe", &[[0.0]], &[1.0]).unwrap();
        assert_eq!(ssp_radius(&fe), 1.0);
    }

    #[test]
    fn backward_euler_is_unbounded() {
        let be = RungeKuttaMethod::from_rows("be", &[[1.0]], &[1.0]).unwrap();
        assert_eq!(ssp_radius(&be), f64::INFINITY);
    }

    #[test]
    fn pole_is_infeasible_not_a_panic() {
        let m = RungeKuttaMethod::from_rows("neg", &[[-0.5]], &[1.0]).unwrap();
        let c = certify(&m, 2.0);
        assert!(!c.invertible && !c.feasible && c.slacks.is_none());
        assert_eq!(ssp_radius(&m), 0.0);
    }

    #[test]
    fn implicit_midpoint_radius_two() {
        let m = RungeKuttaMethod::from_rows("mid", &[[0.5]], &[1.0]).unwrap();
        assert!((ssp_radius(&m) - 2.0).abs() <= TOL_BISECT);
    }

    #[test]
    fn profile_examples() {
        let m = optimal2();
        let lo = feasibility_profile(&m, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(lo.iter().all(|c| c.feasible));
        assert_eq!(lo[3].r, 3.0);
        let hi = feasibility_profile(&m, &[5.0, 6.0]);
        assert!(hi.iter().all(|c| !c.feasible));
        assert!(feasibility_profile(&m, &[]).is_empty());
    }
}
