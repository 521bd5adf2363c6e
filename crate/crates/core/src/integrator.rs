//! DIRK time stepping on method-of-lines problems, with total-variation
//! bookkeeping.
//!
//! The test problems are periodic first-order upwind discretizations whose
//! Forward Euler step is total-variation diminishing for `τ ≤ τ₀`. An SSP
//! method with radius `R` must then keep the total variation of every stage
//! and every step from increasing for `τ ≤ R·τ₀`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Result, SspError};
use crate::linalg::{solve, Matrix};
use crate::method::RungeKuttaMethod;
use crate::ssp::ssp_radius;

/// Max-norm residual at which a stage solve is accepted.
pub const NEWTON_TOL: f64 = 1e-13;
pub const MAX_NEWTON_ITERS: usize = 100;
/// Fixed-point iteration is used when `|τ a_ii| L` is below this.
pub const FIXED_POINT_CONTRACTION: f64 = 0.9;
/// Allowed per-step total-variation growth from round-off.
pub const TV_TOL: f64 = 1e-11;

const PROBE_STEPS: usize = 10;
const PROBE_TOL: f64 = 1e-12;

pub type RightHandSide = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// `U' = f(U)` on `R^m` together with its certified Forward Euler step.
#[derive(Clone)]
pub struct SemiDiscreteProblem {
    label: String,
    initial_state: Vec<f64>,
    fe_step: f64,
    lipschitz: f64,
    rhs: RightHandSide,
}

impl fmt::Debug for SemiDiscreteProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemiDiscreteProblem")
            .field("label", &self.label)
            .field("dimension", &self.dimension())
            .field("fe_step", &self.fe_step)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl SemiDiscreteProblem {
    /// `lipschitz` is a max-norm Lipschitz estimate for `f`, used only to
    /// choose the stage solver. Construction runs ten Forward Euler steps of
    /// size `fe_step` and rejects the problem if total variation grows.
    pub fn new(
        label: impl Into<String>,
        initial_state: Vec<f64>,
        fe_step: f64,
        lipschitz: f64,
        rhs: RightHandSide,
    ) -> Result<Self> {
        if initial_state.is_empty() {
            return Err(SspError::InvalidProblem("state must be nonempty".into()));
        }
        if !(fe_step > 0.0) || !(lipschitz >= 0.0) {
            return Err(SspError::InvalidProblem(
                "fe_step must be positive and lipschitz nonnegative".into(),
            ));
        }
        let problem = Self {
            label: label.into(),
            initial_state,
            fe_step,
            lipschitz,
            rhs,
        };
        let growth = forward_euler_tv_growth(&problem, fe_step, PROBE_STEPS);
        if growth > PROBE_TOL {
            return Err(SspError::InvalidProblem(format!(
                "Forward Euler at the declared step increases total variation by {growth:e}"
            )));
        }
        Ok(problem)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dimension(&self) -> usize {
        self.initial_state.len()
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    pub fn fe_step(&self) -> f64 {
        self.fe_step
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        (self.rhs)(u, &mut out);
        out
    }
}

/// `Σ |u_{i+1} − u_i|` with periodic wrap-around.
pub fn total_variation(u: &[f64]) -> f64 {
    let n = u.len();
    (0..n).map(|i| (u[(i + 1) % n] - u[i]).abs()).sum()
}

/// Largest single-step increase of total variation over `steps` Forward
/// Euler steps of size `tau` from the initial state (0 if none).
pub fn forward_euler_tv_growth(problem: &SemiDiscreteProblem, tau: f64, steps: usize) -> f64 {
    let mut u = problem.initial_state.clone();
    let mut tv = total_variation(&u);
    let mut growth: f64 = 0.0;
    for _ in 0..steps {
        let f = problem.eval(&u);
        for (ui, fi) in u.iter_mut().zip(&f) {
            *ui += tau * fi;
        }
        let next = total_variation(&u);
        growth = growth.max(next - tv);
        tv = next;
    }
    growth
}

/// Square wave: 1 on the middle third of the grid, 0 elsewhere.
fn square_wave(m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| if i >= m / 3 && i < 2 * m / 3 { 1.0 } else { 0.0 })
        .collect()
}

/// Periodic upwind discretization of `u_t + v u_x = 0`, `τ₀ = dx/v`.
pub fn make_advection(m: usize, velocity: f64, dx: f64) -> Result<SemiDiscreteProblem> {
    if m < 3 {
        return Err(SspError::InvalidProblem(format!("need at least 3 cells, got {m}")));
    }
    if !(velocity > 0.0) || !(dx > 0.0) {
        return Err(SspError::InvalidProblem("velocity and dx must be positive".into()));
    }
    let c = velocity / dx;
    let rhs: RightHandSide = Arc::new(move |u: &[f64], out: &mut [f64]| {
        let n = u.len();
        for i in 0..n {
            let left = u[(i + n - 1) % n];
            out[i] = -c * (u[i] - left);
        }
    });
    SemiDiscreteProblem::new(
        format!("advection(m={m})"),
        square_wave(m),
        dx / velocity,
        2.0 * c,
        rhs,
    )
}

/// Godunov flux for `f(u) = u²/2`.
fn godunov_flux(ul: f64, ur: f64) -> f64 {
    let f = |u: f64| 0.5 * u * u;
    if ul <= ur {
        if ul <= 0.0 && ur >= 0.0 {
            0.0
        } else {
            f(ul).min(f(ur))
        }
    } else {
        f(ul).max(f(ur))
    }
}

/// Periodic Godunov discretization of `u_t + (u²/2)_x = 0` with a unit
/// square wave, `τ₀ = dx / max|u₀|`.
pub fn make_burgers(m: usize, dx: f64) -> Result<SemiDiscreteProblem> {
    if m < 3 {
        return Err(SspError::InvalidProblem(format!("need at least 3 cells, got {m}")));
    }
    if !(dx > 0.0) {
        return Err(SspError::InvalidProblem("dx must be positive".into()));
    }
    let u0 = square_wave(m);
    let umax = u0.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let rhs: RightHandSide = Arc::new(move |u: &[f64], out: &mut [f64]| {
        let n = u.len();
        for i in 0..n {
            let right = godunov_flux(u[i], u[(i + 1) % n]);
            let left = godunov_flux(u[(i + n - 1) % n], u[i]);
            out[i] = -(right - left) / dx;
        }
    });
    SemiDiscreteProblem::new(format!("burgers(m={m})"), u0, dx / umax, 2.0 * umax / dx, rhs)
}

/// Scalar `u' = λu` with `u(0) = u0`.
///
/// Total variation of a single value is zero, so the Forward Euler probe is
/// vacuous here; `fe_step` is `1/|λ|` (or 1 for `λ = 0`).
pub fn make_linear(lambda: f64, u0: f64) -> Result<SemiDiscreteProblem> {
    let fe_step = if lambda == 0.0 { 1.0 } else { 1.0 / lambda.abs() };
    let rhs: RightHandSide = Arc::new(move |u: &[f64], out: &mut [f64]| {
        for (o, x) in out.iter_mut().zip(u) {
            *o = lambda * x;
        }
    });
    SemiDiscreteProblem::new("linear", vec![u0], fe_step, lambda.abs(), rhs)
}

fn max_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Solves `y = c + h f(y)` for one stage. Newton takes over from an
/// unfinished fixed-point iteration; contraction rates near the threshold
/// cannot reach `NEWTON_TOL` within `MAX_NEWTON_ITERS`.
fn solve_stage(problem: &SemiDiscreteProblem, c: &[f64], h: f64, stage: usize) -> Result<Vec<f64>> {
    let residual = |y: &[f64]| -> (Vec<f64>, f64) {
        let f = problem.eval(y);
        let r: Vec<f64> = y.iter().zip(c).zip(&f).map(|((yi, ci), fi)| yi - ci - h * fi).collect();
        let norm = max_norm(&r);
        (r, norm)
    };

    let mut y = c.to_vec();
    let (mut r, mut norm) = residual(&y);
    if h.abs() * problem.lipschitz < FIXED_POINT_CONTRACTION {
        let mut iters = 0;
        while norm > NEWTON_TOL && norm.is_finite() && iters < MAX_NEWTON_ITERS {
            iters += 1;
            for (yi, ri) in y.iter_mut().zip(&r) {
                *yi -= ri;
            }
            (r, norm) = residual(&y);
        }
        if norm <= NEWTON_TOL {
            return Ok(y);
        }
        if !norm.is_finite() {
            y = c.to_vec();
            (r, norm) = residual(&y);
        }
    }
    let mut iters = 0;
    while norm > NEWTON_TOL {
        if iters == MAX_NEWTON_ITERS || !norm.is_finite() {
            return Err(SspError::StageSolveFailure {
                stage,
                residual: norm,
                iterations: iters,
            });
        }
        iters += 1;
        let jac = stage_jacobian(problem, &y, h);
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let Some(delta) = solve(&jac, &rhs) else {
            return Err(SspError::StageSolveFailure {
                stage,
                residual: norm,
                iterations: iters,
            });
        };
        for (yi, d) in y.iter_mut().zip(&delta) {
            *yi += d;
        }
        (r, norm) = residual(&y);
    }
    Ok(y)
}

/// `I − h ∂f/∂y` with a forward-difference Jacobian.
fn stage_jacobian(problem: &SemiDiscreteProblem, y: &[f64], h: f64) -> Matrix {
    let m = y.len();
    let f0 = problem.eval(y);
    let mut jac = Matrix::identity(m);
    let mut yp = y.to_vec();
    for j in 0..m {
        let delta = f64::EPSILON.sqrt() * y[j].abs().max(1.0);
        yp[j] = y[j] + delta;
        let fp = problem.eval(&yp);
        yp[j] = y[j];
        for i in 0..m {
            jac[(i, j)] -= h * (fp[i] - f0[i]) / delta;
        }
    }
    jac
}

/// One step `U_n → U_{n+1}`. Returns the new state and the stage values.
pub fn dirk_step(
    method: &RungeKuttaMethod,
    problem: &SemiDiscreteProblem,
    state: &[f64],
    tau: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if !method.is_dirk() {
        return Err(SspError::NotDirk);
    }
    if !(tau > 0.0) {
        return Err(SspError::InvalidProblem("step size must be positive".into()));
    }
    if state.len() != problem.dimension() {
        return Err(SspError::DimensionMismatch(format!(
            "state has {} entries, problem dimension is {}",
            state.len(),
            problem.dimension()
        )));
    }
    let s = method.stages();
    let a = method.a();
    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut slopes: Vec<Vec<f64>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut c = state.to_vec();
        for (j, k) in slopes.iter().enumerate() {
            let coef = tau * a[(i, j)];
            if coef != 0.0 {
                for (ci, ki) in c.iter_mut().zip(k) {
                    *ci += coef * ki;
                }
            }
        }
        let h = tau * a[(i, i)];
        let y = if h == 0.0 { c } else { solve_stage(problem, &c, h, i)? };
        slopes.push(problem.eval(&y));
        stages.push(y);
    }
    let mut next = state.to_vec();
    for (bj, k) in method.b().iter().zip(&slopes) {
        for (ni, ki) in next.iter_mut().zip(k) {
            *ni += tau * bj * ki;
        }
    }
    Ok((next, stages))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TVDReport {
    /// Total variation of the initial state followed by that after each step.
    pub tv_sequence: Vec<f64>,
    /// Largest total variation of any stage value.
    pub stage_tv_max: f64,
    pub tau: f64,
    /// SSP radius of the method used.
    pub radius: f64,
    /// `τ / (R τ₀)`
    pub tau_ratio: f64,
    pub steps: usize,
    /// Largest increase between consecutive entries of `tv_sequence` (0 if none).
    pub max_increase: f64,
}

impl TVDReport {
    pub fn initial_tv(&self) -> f64 {
        self.tv_sequence[0]
    }

    /// No step and no stage exceeded its reference by more than `tol`.
    pub fn is_tvd(&self, tol: f64) -> bool {
        self.max_increase <= tol && self.stage_tv_max <= self.initial_tv() + tol
    }

    /// `step,tv` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,tv\n");
        for (k, tv) in self.tv_sequence.iter().enumerate() {
            out.push_str(&format!("{k},{tv:?}\n"));
        }
        out
    }
}

pub fn run_tvd_experiment(
    method: &RungeKuttaMethod,
    problem: &SemiDiscreteProblem,
    tau: f64,
    steps: usize,
) -> Result<TVDReport> {
    if steps == 0 {
        return Err(SspError::InvalidProblem("need at least one step".into()));
    }
    let radius = ssp_radius(method);
    let mut u = problem.initial_state.clone();
    let mut tv_sequence = Vec::with_capacity(steps + 1);
    tv_sequence.push(total_variation(&u));
    let mut stage_tv_max = f64::NEG_INFINITY;
    for _ in 0..steps {
        let (next, stage_values) = dirk_step(method, problem, &u, tau)?;
        for y in &stage_values {
            stage_tv_max = stage_tv_max.max(total_variation(y));
        }
        tv_sequence.push(total_variation(&next));
        u = next;
    }
    let max_increase = tv_sequence.windows(2).fold(0.0f64, |m, w| m.max(w[1] - w[0]));
    Ok(TVDReport {
        tv_sequence,
        stage_tv_max,
        tau,
        radius,
        tau_ratio: tau / (radius * problem.fe_step),
        steps,
        max_increase,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimal::make_optimal;

    fn midpoint() -> RungeKuttaMethod {
        RungeKuttaMethod::from_rows("midpoint", &[[0.5]], &[1.0]).unwrap()
    }

    #[test]
    fn midpoint_on_linear_problem() {
        for (lambda, tau) in [(-1.0, 0.3), (-50.0, 0.1), (2.0, 0.5)] {
            let p = make_linear(lambda, 1.0).unwrap();
            let (next, stages) = dirk_step(&midpoint(), &p, &[1.0], tau).unwrap();
            let z = tau * lambda;
            let exact = (1.0 + z / 2.0) / (1.0 - z / 2.0);
            assert!((next[0] - exact).abs() <= 1e-13 * exact.abs().max(1.0), "z = {z}");
            assert_eq!(stages.len(), 1);
        }
    }

    #[test]
    fn zero_rhs_is_stationary() {
        let rhs: RightHandSide = Arc::new(|_: &[f64], out: &mut [f64]| out.fill(0.0));
        let p = SemiDiscreteProblem::new("zero", vec![0.0, 1.0, 3.0], 1.0, 0.0, rhs).unwrap();
        let m = make_optimal(3).unwrap().method;
        let (next, stages) = dirk_step(&m, &p, &[0.0, 1.0, 3.0], 0.7).unwrap();
        assert_eq!(next, vec![0.0, 1.0, 3.0]);
        assert!(stages.iter().all(|y| y == &[0.0, 1.0, 3.0]));

        let report = run_tvd_experiment(&m, &p, 0.5, 1).unwrap();
        assert_eq!(report.tv_sequence, vec![6.0, 6.0]);
        assert_eq!(report.max_increase, 0.0);
    }

    #[test]
    fn advection_construction() {
        let p = make_advection(30, 1.0, 1.0 / 30.0).unwrap();
        assert!((p.fe_step() - 1.0 / 30.0).abs() < 1e-16);
        assert_eq!(total_variation(p.initial_state()), 2.0);
        assert!(forward_euler_tv_growth(&p, 1.05 * p.fe_step(), 10) > 1e-3);
        assert!(make_advection(2, 1.0, 0.5).is_err());
    }

    #[test]
    fn burgers_construction() {
        let p = make_burgers(60, 1.0 / 60.0).unwrap();
        assert_eq!(total_variation(p.initial_state()), 2.0);
        assert_eq!(p.eval(&[0.7; 60]), vec![0.0; 60]);
        assert!(forward_euler_tv_growth(&p, p.fe_step(), 50) <= 1e-12);
    }

    #[test]
    fn rejects_problem_failing_probe() {
        let rhs: RightHandSide = Arc::new(|u: &[f64], out: &mut [f64]| {
            let n = u.len();
            for i in 0..n {
                out[i] = -(u[i] - u[(i + n - 1) % n]);
            }
        });
        let u0 = vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        assert!(SemiDiscreteProblem::new("ok", u0.clone(), 1.0, 2.0, rhs.clone()).is_ok());
        assert!(matches!(
            SemiDiscreteProblem::new("bad", u0, 1.5, 2.0, rhs),
            Err(SspError::InvalidProblem(_))
        ));
    }

    #[test]
    fn optimal_two_stage_step_at_max_ratio() {
        let p = make_advection(50, 1.0, 1.0 / 50.0).unwrap();
        let m = make_optimal(2).unwrap().method;
        let u = p.initial_state().to_vec();
        let (next, stages) = dirk_step(&m, &p, &u, 4.0 * p.fe_step()).unwrap();
        assert!(total_variation(&next) <= total_variation(&u) + 1e-12);
        for y in &stages {
            assert!(total_variation(y) <= total_variation(&u) + 1e-12);
        }
    }

    #[test]
    fn small_steps_are_monotone_for_any_method() {
        let p = make_advection(40, 1.0, 1.0 / 40.0).unwrap();
        let ssp22 = RungeKuttaMethod::from_rows("ssp22", &[[0.0, 0.0], [1.0, 0.0]], &[0.5, 0.5]).unwrap();
        for m in [ssp22, make_optimal(3).unwrap().method, midpoint()] {
            let report = run_tvd_experiment(&m, &p, p.fe_step() / 100.0, 50).unwrap();
            assert!(report.max_increase <= 1e-12, "{}", m.label());
        }
    }

    #[test]
    fn report_fields() {
        let p = make_advection(30, 1.0, 1.0 / 30.0).unwrap();
        let m = make_optimal(1).unwrap().method;
        let report = run_tvd_experiment(&m, &p, p.fe_step(), 5).unwrap();
        assert_eq!(report.tv_sequence.len(), 6);
        assert!((report.tau_ratio - 0.5).abs() < 1e-9);
        assert!(report.to_csv().starts_with("step,tv\n0,2.0\n"));
        assert!(matches!(run_tvd_experiment(&m, &p, 0.1, 0), Err(SspError::InvalidProblem(_))));
    }

    #[test]
    fn non_dirk_rejected() {
        let p = make_linear(-1.0, 1.0).unwrap();
        let full = RungeKuttaMethod::from_rows("full", &[[0.25, 0.1], [0.4, 0.25]], &[0.5, 0.5]).unwrap();
        assert_eq!(dirk_step(&full, &p, &[1.0], 0.1), Err(SspError::NotDirk));
    }

    #[test]
    fn stage_failure_is_reported() {
        // y = c + h y^2 has no real root for c = 1, h = 1
        let rhs: RightHandSide = Arc::new(|u: &[f64], out: &mut [f64]| out[0] = u[0] * u[0]);
        let p = SemiDiscreteProblem::new("blowup", vec![1.0], 1.0, 10.0, rhs).unwrap();
        let be = RungeKuttaMethod::from_rows("be", &[[1.0]], &[1.0]).unwrap();
        assert!(matches!(
            dirk_step(&be, &p, &[1.0], 1.0),
            Err(SspError::StageSolveFailure { stage: 0, .. })
        ));
    }
}
