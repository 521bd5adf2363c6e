//! Numeric checks for each step of the `r ≤ 2s` optimality argument.
//!
//! The argument reduces the DIRK bound to
//!
//! ```text
//! (wᵀNe)² / (wᵀN²e) ≤ 2s/(s+1)
//! ```
//!
//! over simplex weights `w` and `M = N⁻¹` with nonpositive off-diagonal part
//! and nonnegative row sums. The pieces checked here are the objective
//! identity, the row-ratio (Cauchy–Schwarz) bound, weight normalization, the
//! block inverse used in the induction step, and the scalar `α`/`β` bound
//! that closes the induction.

use serde::Serialize;

use crate::error::{Result, SspError};
use crate::linalg::{dot, Matrix, TOL_SING};
use crate::method::{TransformedForm, TOL_ALG};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioEvaluation {
    /// `(wᵀNe)²`
    pub numerator: f64,
    /// `wᵀN²e`
    pub denominator: f64,
    pub ratio: f64,
    /// `2s/(s+1)`
    pub bound: f64,
}

/// Upper bound `2s/(s+1)` on the objective ratio for `s` stages.
pub fn ratio_bound(s: usize) -> f64 {
    let s = s as f64;
    2.0 * s / (s + 1.0)
}

/// `1/(½ + 1/r)`, the value of the objective ratio for a second-order method.
pub fn reduced_ratio(r: f64) -> f64 {
    1.0 / (0.5 + 1.0 / r)
}

pub fn objective_ratio(tf: &TransformedForm) -> Result<RatioEvaluation> {
    let bound = ratio_bound(tf.stages());
    // the objective vanishes identically when w does
    if tf.w().iter().all(|&x| x == 0.0) {
        return Ok(RatioEvaluation {
            numerator: 0.0,
            denominator: 0.0,
            ratio: 0.0,
            bound,
        });
    }
    let denominator = tf.w_n2_e();
    if denominator <= TOL_SING {
        return Err(SspError::DegenerateDenominator(denominator));
    }
    let numerator = tf.w_n_e().powi(2);
    Ok(RatioEvaluation {
        numerator,
        denominator,
        ratio: numerator / denominator,
        bound,
    })
}

fn check_simplex(w: &[f64]) -> Result<()> {
    if let Some(x) = w.iter().find(|&&x| x < 0.0 || !x.is_finite()) {
        return Err(SspError::InvalidSimplex(format!("entry {x} is negative or not finite")));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > TOL_ALG {
        return Err(SspError::InvalidSimplex(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Returns `(lhs, rhs)` with `lhs = (wᵀNe)²/(wᵀN²e)` and
/// `rhs = maxᵢ (Ne)ᵢ² / (N²e)ᵢ`. For `N ≥ 0` and simplex `w`, `lhs ≤ rhs`.
pub fn row_ratio_bound(n: &Matrix, w: &[f64]) -> Result<(f64, f64)> {
    if !n.is_square() || n.rows() != w.len() {
        return Err(SspError::DimensionMismatch(format!(
            "N is {}x{}, w has {} entries",
            n.rows(),
            n.cols(),
            w.len()
        )));
    }
    check_simplex(w)?;
    if n.as_slice().iter().any(|&x| x < 0.0) {
        return Err(SspError::NegativeEntries);
    }
    let ne = n.row_sums();
    let n2e = n.mul_vec(&ne);
    if let Some(&d) = n2e.iter().find(|&&d| d <= TOL_SING) {
        return Err(SspError::DegenerateDenominator(d));
    }
    let lhs = dot(w, &ne).powi(2) / dot(w, &n2e);
    let rhs = ne
        .iter()
        .zip(&n2e)
        .map(|(a, d)| a * a / d)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((lhs, rhs))
}

/// `w / (wᵀe)`
pub fn normalize_w(w: &[f64]) -> Result<Vec<f64>> {
    if w.iter().any(|&x| x < 0.0) {
        return Err(SspError::InvalidSimplex("weights must be nonnegative".into()));
    }
    let sum: f64 = w.iter().sum();
    if sum <= TOL_SING {
        return Err(SspError::ZeroVector);
    }
    Ok(w.iter().map(|x| x / sum).collect())
}

fn require_two_stages(s: usize) -> Result<f64> {
    if s < 2 {
        return Err(SspError::InvalidStageCount { s, min: 2 });
    }
    Ok(s as f64)
}

/// One-variable majorant `(1+α)² / (1 + α + s α²/(2(s−1)))`, obtained by
/// replacing `β` with its smallest admissible value.
pub fn alpha_beta_value(s: usize, alpha: f64) -> Result<f64> {
    let sf = require_two_stages(s)?;
    let k = sf / (2.0 * (sf - 1.0));
    Ok((1.0 + alpha).powi(2) / (1.0 + alpha + k * alpha * alpha))
}

/// Closed-form derivative of [`alpha_beta_value`]:
/// `4(s−1−α)(α+1)(s−1) / (2s − 2α − 2 + 2sα + sα²)²`.
pub fn alpha_beta_derivative(s: usize, alpha: f64) -> Result<f64> {
    let sf = require_two_stages(s)?;
    let den = 2.0 * sf - 2.0 * alpha - 2.0 + 2.0 * sf * alpha + sf * alpha * alpha;
    Ok(4.0 * (sf - 1.0 - alpha) * (alpha + 1.0) * (sf - 1.0) / (den * den))
}

/// Induction-step point: `α = aᵀM⁻¹e`, `β = aᵀM⁻²e` for the trailing row of
/// an `s`-stage `M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlphaBetaPoint {
    pub s: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl AlphaBetaPoint {
    /// `(1+α)²/(1+α+β)`
    pub fn lhs(&self) -> f64 {
        (1.0 + self.alpha).powi(2) / (1.0 + self.alpha + self.beta)
    }
}

/// Checks `(1+α)²/(1+α+β) ≤ 2s/(s+1)` for a point satisfying the induction
/// hypothesis `α²/β ≤ 2(s−1)/s`.
pub fn alpha_beta_bound_check(pt: &AlphaBetaPoint) -> Result<bool> {
    let sf = require_two_stages(pt.s)?;
    if pt.alpha < 0.0 || pt.beta < 0.0 {
        return Err(SspError::InvalidProblem("alpha and beta must be nonnegative".into()));
    }
    let hyp = 2.0 * (sf - 1.0) / sf;
    if pt.beta == 0.0 {
        if pt.alpha > 0.0 {
            return Err(SspError::HypothesisViolated {
                ratio: f64::INFINITY,
                bound: hyp,
            });
        }
    } else {
        let ratio = pt.alpha * pt.alpha / pt.beta;
        if ratio > hyp + TOL_ALG {
            return Err(SspError::HypothesisViolated { ratio, bound: hyp });
        }
    }
    Ok(pt.lhs() <= ratio_bound(pt.s) + TOL_ALG)
}

/// `(analytic, numeric)`: the closed-form derivative and a central finite
/// difference of the majorant with step `1e−6·max(1, α)`.
pub fn derivative_check(s: usize, alpha: f64) -> Result<(f64, f64)> {
    let analytic = alpha_beta_derivative(s, alpha)?;
    let h = 1e-6 * alpha.max(1.0);
    let numeric = (alpha_beta_value(s, alpha + h)? - alpha_beta_value(s, alpha - h)?) / (2.0 * h);
    Ok((analytic, numeric))
}

/// Builds `M_s = [[M_prev, 0], [−aᵀ, 1]]`, inverts it numerically and
/// compares the trailing rows of `M_s⁻¹` and `M_s⁻²` with the block formulas
/// `aᵀM_prev⁻¹` and `aᵀ(M_prev⁻¹ + M_prev⁻²)`.
pub fn partitioned_inverse_check(m_prev: &Matrix, a: &[f64]) -> Result<bool> {
    Ok(partitioned_inverse_error(m_prev, a)? <= TOL_ALG)
}

/// Largest discrepancy, relative to `max(1, |entry|)`, between the numeric
/// inverse (and its square) of `M_s` and the block formulas, over all
/// entries including the zero upper block.
pub fn partitioned_inverse_error(m_prev: &Matrix, a: &[f64]) -> Result<f64> {
    let k = m_prev.rows();
    if !m_prev.is_square() || a.len() != k {
        return Err(SspError::DimensionMismatch(format!(
            "M_prev is {}x{}, a has {} entries",
            m_prev.rows(),
            m_prev.cols(),
            a.len()
        )));
    }
    if !m_prev.is_lower_triangular() {
        return Err(SspError::NotLowerTriangular);
    }
    let p = m_prev.lower_triangular_inverse().ok_or(SspError::SingularBlock)?;
    let p2 = p.mul(&p);

    let s = k + 1;
    let full = Matrix::from_fn(s, s, |i, j| match (i < k, j < k) {
        (true, true) => m_prev[(i, j)],
        (true, false) => 0.0,
        (false, true) => -a[j],
        (false, false) => 1.0,
    });
    let inv = full.general_inverse().ok_or(SspError::SingularBlock)?;
    let inv2 = inv.mul(&inv);

    let row1 = p.vec_mul(a);
    let row2: Vec<f64> = row1.iter().zip(p2.vec_mul(a)).map(|(x, y)| x + y).collect();
    let expected = |i: usize, j: usize| -> (f64, f64) {
        match (i < k, j < k) {
            (true, true) => (p[(i, j)], p2[(i, j)]),
            (true, false) => (0.0, 0.0),
            (false, true) => (row1[j], row2[j]),
            (false, false) => (1.0, 1.0),
        }
    };

    let mut worst: f64 = 0.0;
    for i in 0..s {
        for j in 0..s {
            let (e1, e2) = expected(i, j);
            worst = worst
                .max((inv[(i, j)] - e1).abs() / e1.abs().max(1.0))
                .max((inv2[(i, j)] - e2).abs() / e2.abs().max(1.0));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::method::RungeKuttaMethod;
    use crate::optimal::make_optimal;
    use approx::assert_abs_diff_eq;

    #[test]
    fn objective_ratio_for_optimal_family() {
        let tf = make_optimal(2).unwrap().method.to_transformed(4.0).unwrap();
        let ev = objective_ratio(&tf).unwrap();
        assert_abs_diff_eq!(ev.ratio, 4.0 / 3.0, epsilon = TOL_ALG);
        assert_abs_diff_eq!(ev.bound, 4.0 / 3.0, epsilon = 1e-15);
        for s in 1..=8 {
            let r = 2.0 * s as f64;
            let tf = make_optimal(s).unwrap().method.to_transformed(r).unwrap();
            let ev = objective_ratio(&tf).unwrap();
            assert_abs_diff_eq!(ev.ratio, ratio_bound(s), epsilon = TOL_ALG);
            assert_abs_diff_eq!(ev.ratio, reduced_ratio(r), epsilon = TOL_ALG);
        }
    }

    #[test]
    fn objective_ratio_zero_weights() {
        let m = RungeKuttaMethod::from_rows("x", &[[0.5]], &[1.0]).unwrap();
        let ev = objective_ratio(&m.to_transformed(0.0).unwrap()).unwrap();
        assert_eq!((ev.numerator, ev.ratio), (0.0, 0.0));
    }

    #[test]
    fn objective_ratio_degenerate_denominator() {
        let tf = TransformedForm::new(1.0, Matrix::identity(2), vec![1.0, -1.0]).unwrap();
        assert!(matches!(objective_ratio(&tf), Err(SspError::DegenerateDenominator(_))));
    }

    #[test]
    fn row_ratio_identity_and_optimal() {
        let (lhs, rhs) = row_ratio_bound(&Matrix::identity(3), &[0.2, 0.3, 0.5]).unwrap();
        assert!(lhs <= 1.0 + 1e-15);
        assert_eq!(rhs, 1.0);

        let n = Matrix::from_rows(&[[2.0, 0.0], [2.0, 2.0]]).unwrap();
        let (lhs, rhs) = row_ratio_bound(&n, &[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(lhs, 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rhs, 4.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn row_ratio_rejects_bad_weights() {
        let n = Matrix::identity(2);
        assert!(matches!(row_ratio_bound(&n, &[0.5, 0.4]), Err(SspError::InvalidSimplex(_))));
        assert!(matches!(row_ratio_bound(&n, &[1.5, -0.5]), Err(SspError::InvalidSimplex(_))));
        let neg = Matrix::from_rows(&[[1.0, 0.0], [-1.0, 1.0]]).unwrap();
        assert_eq!(row_ratio_bound(&neg, &[0.5, 0.5]), Err(SspError::NegativeEntries));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_w(&[2.0, 2.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(normalize_w(&[0.0, 3.0, 0.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(normalize_w(&[0.0, 0.0]), Err(SspError::ZeroVector));
    }

    #[test]
    fn majorant_values() {
        for s in 2..=10 {
            let sf = s as f64;
            assert_eq!(alpha_beta_value(s, 0.0).unwrap(), 1.0);
            let peak = alpha_beta_value(s, sf - 1.0).unwrap();
            assert_abs_diff_eq!(peak, 2.0 * sf / (sf + 1.0), epsilon = 1e-12);
            let far = alpha_beta_value(s, 1e9).unwrap();
            assert!((far - 2.0 * (sf - 1.0) / sf).abs() < 1e-6);
        }
        assert_eq!(alpha_beta_value(1, 0.5), Err(SspError::InvalidStageCount { s: 1, min: 2 }));
    }

    #[test]
    fn bound_check_examples() {
        for s in 2..=8 {
            let sf = s as f64;
            let pt = AlphaBetaPoint {
                s,
                alpha: sf - 1.0,
                beta: sf * (sf - 1.0) / 2.0,
            };
            assert!(alpha_beta_bound_check(&pt).unwrap());
            assert_abs_diff_eq!(pt.lhs(), ratio_bound(s), epsilon = 1e-12);
        }
        let origin = AlphaBetaPoint { s: 2, alpha: 0.0, beta: 0.0 };
        assert!(alpha_beta_bound_check(&origin).unwrap());
        let outside = AlphaBetaPoint { s: 3, alpha: 2.0, beta: 1.0 };
        assert!(matches!(
            alpha_beta_bound_check(&outside),
            Err(SspError::HypothesisViolated { .. })
        ));
        let degenerate = AlphaBetaPoint { s: 3, alpha: 1.0, beta: 0.0 };
        assert!(alpha_beta_bound_check(&degenerate).is_err());
    }

    #[test]
    fn derivative_examples() {
        let (d, _) = derivative_check(3, 2.0).unwrap();
        assert_eq!(d, 0.0);
        let (d, n) = derivative_check(2, 0.5).unwrap();
        assert!(d > 0.0 && (d - n).abs() <= 1e-5 * d.abs().max(1.0));
        let (d, n) = derivative_check(4, 10.0).unwrap();
        assert!(d < 0.0 && (d - n).abs() <= 1e-5 * d.abs().max(1.0));
    }

    #[test]
    fn partitioned_inverse_examples() {
        assert!(partitioned_inverse_check(&Matrix::identity(1), &[1.0]).unwrap());
        let m = Matrix::from_rows(&[[1.0, 0.0], [-0.5, 2.0]]).unwrap();
        assert!(partitioned_inverse_check(&m, &[0.0, 0.0]).unwrap());
        let sing = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert_eq!(partitioned_inverse_check(&sing, &[1.0, 1.0]), Err(SspError::SingularBlock));
        let upper = Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(partitioned_inverse_check(&upper, &[1.0, 1.0]), Err(SspError::NotLowerTriangular));
    }
}
