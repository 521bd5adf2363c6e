//! The iterated implicit midpoint family: the optimal second-order `s`-stage
//! DIRK method, with SSP radius `2s`.

use crate::error::{Result, SspError};
use crate::linalg::Matrix;
use crate::method::{RungeKuttaMethod, TOL_ALG};

#[derive(Clone, Debug, PartialEq)]
pub struct OptimalFamilyMember {
    pub s: usize,
    pub method: RungeKuttaMethod,
    pub claimed_radius: f64,
}

/// `A` has `1/(2s)` on the diagonal and `1/s` below it; `b = (1/s, …, 1/s)`.
pub fn make_optimal(s: usize) -> Result<OptimalFamilyMember> {
    if s < 1 {
        return Err(SspError::InvalidStageCount { s, min: 1 });
    }
    let sf = s as f64;
    let diag = 1.0 / (2.0 * sf);
    let lower = 1.0 / sf;
    let a = Matrix::from_fn(s, s, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => diag,
        std::cmp::Ordering::Greater => lower,
        std::cmp::Ordering::Less => 0.0,
    });
    let method = RungeKuttaMethod::new(format!("iterated-implicit-midpoint({s})"), a, vec![lower; s])?;
    Ok(OptimalFamilyMember {
        s,
        method,
        claimed_radius: 2.0 * sf,
    })
}

impl OptimalFamilyMember {
    /// At `r = 2s` the transformed form must be: `N` all twos on and below
    /// the diagonal, `w` the last unit vector, and `2M` bidiagonal with `+1`
    /// on the diagonal and `−1` below it.
    pub fn verify_structure(&self) -> bool {
        let s = self.s;
        if self.method.stages() != s {
            return false;
        }
        let Ok(tf) = self.method.to_transformed(2.0 * s as f64) else {
            return false;
        };
        let n_expected = Matrix::from_fn(s, s, |i, j| if j <= i { 2.0 } else { 0.0 });
        let m2_expected = Matrix::from_fn(s, s, |i, j| {
            if i == j {
                1.0
            } else if i == j + 1 {
                -1.0
            } else {
                0.0
            }
        });
        let w_ok = tf
            .w()
            .iter()
            .enumerate()
            .all(|(i, &wi)| (wi - if i + 1 == s { 1.0 } else { 0.0 }).abs() <= TOL_ALG);
        tf.n().max_abs_diff(&n_expected) <= TOL_ALG
            && tf.m().scale(2.0).max_abs_diff(&m2_expected) <= TOL_ALG
            && w_ok
    }
}
