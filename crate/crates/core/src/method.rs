//! Butcher-form Runge–Kutta methods and the `(N, M, w)` change of variables.
//!
//! For a method `(A, b)` and a radius `r`:
//!
//! ```text
//! N = I + rA,    M = N⁻¹,    wᵀ = r bᵀ N⁻¹
//! ```
//!
//! In these variables the second-order conditions read `wᵀNe = r` and
//! `wᵀN²e = r²/2 + r`, and the absolute monotonicity conditions become sign
//! conditions on `M`, `I − M` and `w`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SspError};
use crate::linalg::{dot, Matrix};

/// Absolute tolerance for algebraic identities.
pub const TOL_ALG: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq)]
pub struct RungeKuttaMethod {
    label: String,
    a: Matrix,
    b: Vec<f64>,
}

/// On-disk representation: `{"label", "s", "A", "b"}`.
#[derive(Serialize, Deserialize)]
struct MethodFile {
    label: String,
    s: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl RungeKuttaMethod {
    pub fn new(label: impl Into<String>, a: Matrix, b: Vec<f64>) -> Result<Self> {
        let s = b.len();
        if s == 0 {
            return Err(SspError::InvalidMethod("method needs at least one stage".into()));
        }
        if a.rows() != s || a.cols() != s {
            return Err(SspError::InvalidMethod(format!(
                "A is {}x{} but b has {} entries",
                a.rows(),
                a.cols(),
                s
            )));
        }
        if a.as_slice().iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(SspError::InvalidMethod("coefficients must be finite".into()));
        }
        Ok(Self {
            label: label.into(),
            a,
            b,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(label: impl Into<String>, a: &[R], b: &[f64]) -> Result<Self> {
        let a = Matrix::from_rows(a)
            .ok_or_else(|| SspError::InvalidMethod("A has rows of different lengths".into()))?;
        Self::new(label, a, b.to_vec())
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Diagonally implicit: the strictly upper part of `A` is exactly zero.
    pub fn is_dirk(&self) -> bool {
        self.a.is_lower_triangular()
    }

    /// `(bᵀe − 1, bᵀAe − ½)`.
    pub fn order2_residuals(&self) -> (f64, f64) {
        let bsum: f64 = self.b.iter().sum();
        let bae = dot(&self.b, &self.a.row_sums());
        (bsum - 1.0, bae - 0.5)
    }

    pub fn is_second_order(&self, tol: f64) -> bool {
        let (r1, r2) = self.order2_residuals();
        r1.abs() <= tol && r2.abs() <= tol
    }

    /// Change of variables at radius `r`. Lower-triangular `I + rA` is
    /// inverted by forward substitution.
    pub fn to_transformed(&self, r: f64) -> Result<TransformedForm> {
        let s = self.stages();
        let n = Matrix::identity(s).add(&self.a.scale(r));
        TransformedForm::from_scaled_weights(r, n, self.b.iter().map(|bi| r * bi).collect())
    }

    /// Undoes the change of variables: `A = (N − I)/r`, `bᵀ = wᵀN/r`.
    pub fn from_transformed(tf: &TransformedForm) -> Result<Self> {
        if tf.r == 0.0 {
            return Err(SspError::ZeroRadius);
        }
        let s = tf.stages();
        let a = tf.n.sub(&Matrix::identity(s)).scale(1.0 / tf.r);
        let b = tf.n.vec_mul(&tf.w).into_iter().map(|x| x / tf.r).collect();
        Self::new("from-transformed", a, b)
    }

    pub fn to_json(&self) -> String {
        let file = MethodFile {
            label: self.label.clone(),
            s: self.stages(),
            a: self.a.to_rows(),
            b: self.b.clone(),
        };
        serde_json::to_string_pretty(&file).expect("method serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MethodFile = serde_json::from_str(text)?;
        if file.s != file.b.len() || file.s != file.a.len() {
            return Err(SspError::InvalidMethod(format!(
                "declared s = {} but A has {} rows and b has {} entries",
                file.s,
                file.a.len(),
                file.b.len()
            )));
        }
        Self::from_rows(file.label, &file.a, &file.b)
    }
}

/// `(r, N, M, w)` with `M = N⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformedForm {
    r: f64,
    n: Matrix,
    m: Matrix,
    w: Vec<f64>,
}

impl TransformedForm {
    /// Builds the form from `N` and `w`, inverting `N`.
    pub fn new(r: f64, n: Matrix, w: Vec<f64>) -> Result<Self> {
        if !n.is_square() || n.rows() != w.len() {
            return Err(SspError::DimensionMismatch(format!(
                "N is {}x{}, w has {} entries",
                n.rows(),
                n.cols(),
                w.len()
            )));
        }
        let m = n.inverse().ok_or(SspError::SingularTransform { r })?;
        Ok(Self { r, n, m, w })
    }

    /// `scaled_b` is `r·b`; the weights are `wᵀ = (r b)ᵀ M`.
    fn from_scaled_weights(r: f64, n: Matrix, scaled_b: Vec<f64>) -> Result<Self> {
        let m = n.inverse().ok_or(SspError::SingularTransform { r })?;
        let w = m.vec_mul(&scaled_b);
        Ok(Self { r, n, m, w })
    }

    pub fn stages(&self) -> usize {
        self.w.len()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn n(&self) -> &Matrix {
        &self.n
    }

    pub fn m(&self) -> &Matrix {
        &self.m
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    /// `wᵀNe`
    pub fn w_n_e(&self) -> f64 {
        dot(&self.w, &self.n.row_sums())
    }

    /// `wᵀN²e`
    pub fn w_n2_e(&self) -> f64 {
        let ne = self.n.row_sums();
        dot(&self.w, &self.n.mul_vec(&ne))
    }
}
