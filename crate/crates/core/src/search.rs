//! Random sampling and derivative-free maximization of the SSP radius over
//! second-order DIRK methods.
//!
//! Every candidate is kept on the order-condition manifold by the same
//! projection: `b` is clipped to the nonnegative orthant and rescaled to sum
//! to one, then a common shift `δ = (½ − bᵀAe)/Σbᵢ` is added to every
//! diagonal entry of `A`.
//!
//! The radius is a minimum over many smooth slack functions and has ridges
//! along which several slacks vanish together. The local search therefore
//! climbs a smoothed radius, the root in `r` of a log-sum-exp soft minimum
//! of the slacks, with a (1+1) evolution strategy that adapts a full
//! covariance factor, and sharpens the soft minimum level by level. Only
//! the exact radius decides which method is reported.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Result, SspError};
use crate::linalg::{dot, solve, Matrix, TOL_SING};
use crate::method::RungeKuttaMethod;
use crate::optimal::make_optimal;
use crate::par::{self, Execution};
use crate::ssp::{certify, ssp_radius, R_CAP, TOL_BISECT};

const MAX_SAMPLE_ATTEMPTS: usize = 100;
/// Soft-minimum sharpness schedule; slacks closer than `1/κ` blend.
const SMOOTHING_LEVELS: [f64; 9] = [30.0, 100.0, 300.0, 1e3, 3e3, 1e4, 1e5, 1e6, 1e7];
/// Target success rate of the step-size rule.
const TARGET_SUCCESS: f64 = 2.0 / 11.0;
/// Above this success rate the covariance factor is left alone.
const SUCCESS_THRESHOLD: f64 = 0.44;

/// Independent, reproducible RNG stream `stream` under `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub s: usize,
    pub restarts: usize,
    /// Upper limit on candidate evaluations per restart.
    pub max_iters: usize,
    pub seed: u64,
    /// Initial step size at every smoothing level.
    pub perturbation_scale: f64,
    /// A smoothing level ends once the adapted step size drops below this.
    pub convergence_tol: f64,
}

impl SearchConfig {
    pub fn new(s: usize) -> Self {
        Self {
            s,
            restarts: 20,
            max_iters: 20_000,
            seed: 0,
            perturbation_scale: 0.02,
            convergence_tol: 1e-8,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.s < 1 {
            return Err(SspError::InvalidStageCount { s: self.s, min: 1 });
        }
        if self.restarts < 1 || !(self.perturbation_scale > 0.0) || !(self.convergence_tol > 0.0) {
            return Err(SspError::InvalidProblem(
                "restarts, perturbation_scale and convergence_tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub best_method: RungeKuttaMethod,
    pub best_radius: f64,
    /// Max-norm distance of `(A, b)` to the optimal family member.
    pub distance_to_optimal: f64,
    /// `(evaluation, radius)` at the start and at every improvement of the
    /// exact radius.
    pub trace: Vec<(usize, f64)>,
    pub seed: u64,
    pub restart: usize,
    /// Candidate evaluations actually performed.
    pub iterations: usize,
}

/// Max-norm distance between the coefficients of two methods with the same
/// stage count.
pub fn coefficient_distance(x: &RungeKuttaMethod, y: &RungeKuttaMethod) -> f64 {
    x.a().max_abs_diff(y.a()).max(crate::linalg::max_abs_diff(x.b(), y.b()))
}

pub fn distance_to_optimal(method: &RungeKuttaMethod) -> f64 {
    let opt = make_optimal(method.stages()).expect("method has at least one stage");
    coefficient_distance(method, &opt.method)
}

/// Puts `(lower + diag, b)` on the second-order manifold.
///
/// `a` supplies the strictly lower part and the diagonal; only the diagonal
/// is shifted. Fails with `DegenerateSample` if `b` has no positive mass.
pub fn project_order2(label: &str, a: &Matrix, b: &[f64]) -> Result<RungeKuttaMethod> {
    let s = b.len();
    let clipped: Vec<f64> = b.iter().map(|&x| x.max(0.0)).collect();
    let mass: f64 = clipped.iter().sum();
    if mass <= TOL_SING {
        return Err(SspError::DegenerateSample(1));
    }
    let b: Vec<f64> = clipped.iter().map(|x| x / mass).collect();
    let bsum: f64 = b.iter().sum();
    let lower = Matrix::from_fn(s, s, |i, j| if j <= i { a[(i, j)] } else { 0.0 });
    let shift = (0.5 - dot(&b, &lower.row_sums())) / bsum;
    let mut projected = lower;
    for i in 0..s {
        projected[(i, i)] += shift;
    }
    RungeKuttaMethod::new(label, projected, b)
}

/// Random second-order DIRK method: `b` from a flat Dirichlet draw, strictly
/// lower `A` entries uniform on `[0, 2/s]`, and a common diagonal fixed by
/// the second order condition.
pub fn sample_second_order_dirk(s: usize, rng_seed: u64) -> Result<RungeKuttaMethod> {
    if s < 1 {
        return Err(SspError::InvalidStageCount { s, min: 1 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let label = format!("random-dirk({s}, seed {rng_seed})");
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let b: Vec<f64> = (0..s).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let hi = 2.0 / s as f64;
        let a = Matrix::from_fn(s, s, |i, j| if j < i { rng.random_range(0.0..hi) } else { 0.0 });
        match project_order2(&label, &a, &b) {
            Ok(m) => return Ok(m),
            Err(SspError::DegenerateSample(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(SspError::DegenerateSample(MAX_SAMPLE_ATTEMPTS))
}

/// Free coordinates: lower triangle of `A` (diagonal included) then `b`.
fn coordinates(m: &RungeKuttaMethod) -> Vec<f64> {
    let s = m.stages();
    let mut x = Vec::with_capacity(s * (s + 1) / 2 + s);
    for i in 0..s {
        for j in 0..=i {
            x.push(m.a()[(i, j)]);
        }
    }
    x.extend_from_slice(m.b());
    x
}

fn from_coordinates(s: usize, x: &[f64], label: &str) -> Result<RungeKuttaMethod> {
    let mut a = Matrix::zeros(s, s);
    let mut k = 0;
    for i in 0..s {
        for j in 0..=i {
            a[(i, j)] = x[k];
            k += 1;
        }
    }
    project_order2(label, &a, &x[k..])
}

/// Root in `r` of the soft minimum of the slacks at sharpness `kappa`.
///
/// The stage block enters as `A(I + rA)⁻¹`, which has the sign of
/// `rA(I + rA)⁻¹` for `r > 0` but does not vanish at `r = 0`; its structural
/// zeros above the diagonal are left out. The soft minimum never exceeds
/// the minimum, so the result never exceeds `ssp_radius`.
pub fn smoothed_radius(method: &RungeKuttaMethod, kappa: f64) -> f64 {
    let feasible = |r: f64| soft_min_slack(method, r, kappa) >= 0.0;
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

fn soft_min_slack(method: &RungeKuttaMethod, r: f64, kappa: f64) -> f64 {
    let Some(sl) = certify(method, r).slacks else {
        return f64::NEG_INFINITY;
    };
    let mut g = sl.row_sums;
    for (i, row) in sl.stage_coefficients.iter().enumerate() {
        g.extend(row[..=i].iter().map(|&v| v / r));
    }
    g.extend(sl.weight_coefficients);
    g.push(sl.tail);
    let min = g.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = g.iter().map(|&v| (-kappa * (v - min)).exp()).sum();
    min - sum.ln() / kappa
}

/// (1+1) evolution strategy with a Cholesky-factor covariance update.
struct Strategy {
    n: usize,
    sigma: f64,
    factor: Matrix,
    path: Vec<f64>,
    success: f64,
}

impl Strategy {
    fn new(n: usize) -> Self {
        Self {
            n,
            sigma: 0.0,
            factor: Matrix::identity(n),
            path: vec![0.0; n],
            success: TARGET_SUCCESS,
        }
    }

    fn reset_step(&mut self, sigma: f64) {
        self.sigma = sigma;
        self.path.iter_mut().for_each(|v| *v = 0.0);
        self.success = TARGET_SUCCESS;
    }

    /// Returns the step `A z` for `z ~ N(0, I)`; the candidate is `x + σAz`.
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
        self.factor.mul_vec(&z)
    }

    fn update(&mut self, step: &[f64], improved: bool) {
        let nf = self.n as f64;
        let damping = 1.0 + nf / 2.0;
        let c_p = 1.0 / 12.0;
        self.success = (1.0 - c_p) * self.success + if improved { c_p } else { 0.0 };
        self.sigma *= ((self.success - TARGET_SUCCESS) / (damping * (1.0 - TARGET_SUCCESS))).exp();
        if !improved {
            return;
        }
        let c_c = 2.0 / (nf + 2.0);
        if self.success >= SUCCESS_THRESHOLD {
            self.path.iter_mut().for_each(|v| *v *= 1.0 - c_c);
            return;
        }
        let c_cov = 2.0 / (nf * nf + 6.0);
        let gain = (c_c * (2.0 - c_c)).sqrt();
        for (p, s) in self.path.iter_mut().zip(step) {
            *p = (1.0 - c_c) * *p + gain * s;
        }
        let Some(w) = solve(&self.factor, &self.path) else {
            return;
        };
        let w2 = dot(&w, &w);
        if !(w2 > 0.0) {
            return;
        }
        let keep = (1.0 - c_cov).sqrt();
        let coef = keep / w2 * ((1.0 + c_cov * w2 / (1.0 - c_cov)).sqrt() - 1.0);
        let (factor, path) = (&self.factor, &self.path);
        self.factor = Matrix::from_fn(self.n, self.n, |i, j| keep * factor[(i, j)] + coef * path[i] * w[j]);
    }
}

/// Maximizes `ssp_radius` from `start` on the second-order DIRK manifold.
///
/// Each smoothing level runs the evolution strategy on
/// [`smoothed_radius`] until the step size falls below
/// `cfg.convergence_tol`; the covariance factor carries over between
/// levels. The search ends after the last level or `cfg.max_iters`
/// evaluations. The reported method is the evaluated candidate with the
/// largest exact radius, so the result is never worse than `start`.
pub fn local_search(start: &RungeKuttaMethod, cfg: &SearchConfig) -> Result<SearchResult> {
    local_search_seeded(start, cfg, 0)
}

fn local_search_seeded(start: &RungeKuttaMethod, cfg: &SearchConfig, restart: usize) -> Result<SearchResult> {
    if !start.is_dirk() {
        return Err(SspError::NotDirk);
    }
    if !start.is_second_order(1e-12) {
        return Err(SspError::InvalidMethod("search start must be second order".into()));
    }
    let s = start.stages();
    let label = format!("search(s={s}, seed {}, restart {restart})", cfg.seed);
    let mut rng = rng_stream(cfg.seed, 2 * restart as u64 + 1);

    let mut best = start.clone().with_label(label.clone());
    let mut best_r = ssp_radius(&best);
    let mut trace = vec![(0, best_r)];
    let mut x = coordinates(&best);
    let mut es = Strategy::new(x.len());
    let mut iterations = 0;

    'levels: for &kappa in &SMOOTHING_LEVELS {
        let Ok(current) = from_coordinates(s, &x, &label) else {
            break;
        };
        let mut fx = smoothed_radius(&current, kappa);
        es.reset_step(cfg.perturbation_scale);
        while es.sigma >= cfg.convergence_tol {
            if iterations == cfg.max_iters {
                break 'levels;
            }
            iterations += 1;
            let step = es.sample(&mut rng);
            let y: Vec<f64> = x.iter().zip(&step).map(|(x, d)| x + es.sigma * d).collect();
            // projection failures are rejected moves
            let cand = from_coordinates(s, &y, &label).ok();
            let fy = cand.as_ref().map_or(f64::NAN, |m| smoothed_radius(m, kappa));
            let improved = fy.is_finite() && fy > fx;
            es.update(&step, improved);
            if let (true, Some(m)) = (improved, cand) {
                fx = fy;
                x = coordinates(&m);
                let r = ssp_radius(&m);
                if r.is_finite() && r > best_r {
                    best_r = r;
                    best = m;
                    trace.push((iterations, best_r));
                }
            }
        }
    }

    let best_radius = ssp_radius(&best);
    Ok(SearchResult {
        distance_to_optimal: distance_to_optimal(&best),
        best_method: best,
        best_radius,
        trace,
        seed: cfg.seed,
        restart,
        iterations,
    })
}

/// Runs `cfg.restarts` independent searches. Restart `k` draws its start
/// from stream `2k` and its perturbations from stream `2k + 1` under
/// `cfg.seed`. Results are returned in restart order.
pub fn multi_start(cfg: &SearchConfig) -> Result<Vec<SearchResult>> {
    multi_start_with(cfg, Execution::default())
}

pub fn multi_start_with(cfg: &SearchConfig, exec: Execution) -> Result<Vec<SearchResult>> {
    cfg.validate()?;
    par::map_indexed(exec, cfg.restarts, |k| {
        let start = restart_start(cfg, k)?;
        local_search_seeded(&start, cfg, k)
    })
    .into_iter()
    .collect()
}

/// First sample on stream `2k` with a positive radius, or the last one drawn.
/// A zero radius is flat in every direction and gives the search nothing to
/// climb.
fn restart_start(cfg: &SearchConfig, k: usize) -> Result<RungeKuttaMethod> {
    let mut seeds = rng_stream(cfg.seed, 2 * k as u64);
    let mut start = sample_second_order_dirk(cfg.s, seeds.random())?;
    for _ in 1..MAX_SAMPLE_ATTEMPTS {
        if ssp_radius(&start) > 0.0 {
            break;
        }
        start = sample_second_order_dirk(cfg.s, seeds.random())?;
    }
    Ok(start)
}

/// Best run: highest radius, ties broken by lowest restart index.
pub fn best_of(runs: &[SearchResult]) -> Option<&SearchResult> {
    runs.iter()
        .max_by(|x, y| x.best_radius.total_cmp(&y.best_radius).then(y.restart.cmp(&x.restart)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepEntry {
    pub s: usize,
    pub best: SearchResult,
    pub runs: Vec<SearchResult>,
}

/// Multi-start search for each stage count; `cfg.s` is ignored.
pub fn bound_sweep(s_values: &[usize], cfg: &SearchConfig) -> Result<Vec<SweepEntry>> {
    if s_values.is_empty() {
        return Err(SspError::InvalidProblem("no stage counts given".into()));
    }
    s_values
        .iter()
        .map(|&s| {
            let runs = multi_start(&SearchConfig { s, ..cfg.clone() })?;
            let best = best_of(&runs).expect("at least one restart").clone();
            Ok(SweepEntry { s, best, runs })
        })
        .collect()
}

/// CSV with header `s,restart,best_radius,distance_to_optimal,iterations`.
pub fn sweep_csv(entries: &[SweepEntry]) -> String {
    let mut out = String::from("s,restart,best_radius,distance_to_optimal,iterations\n");
    for e in entries {
        for r in &e.runs {
            out.push_str(&format!(
                "{},{},{:?},{:?},{}\n",
                e.s, r.restart, r.best_radius, r.distance_to_optimal, r.iterations
            ));
        }
    }
    out
}

/// Outcome of measuring the radius of many random second-order DIRK methods.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusSurvey {
    pub s: usize,
    pub samples: usize,
    pub max_radius: f64,
    /// Samples whose radius exceeds `2s + tol`.
    pub violations: usize,
}

pub fn radius_survey(s: usize, samples: usize, seed: u64, tol: f64) -> Result<RadiusSurvey> {
    radius_survey_with(s, samples, seed, tol, Execution::default())
}

pub fn radius_survey_with(s: usize, samples: usize, seed: u64, tol: f64, exec: Execution) -> Result<RadiusSurvey> {
    let limit = 2.0 * s as f64 + tol;
    let radii: Vec<f64> = par::map_indexed(exec, samples, |k| {
        let sample_seed = rng_stream(seed, k as u64).random::<u64>();
        sample_second_order_dirk(s, sample_seed).map(|m| ssp_radius(&m))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(RadiusSurvey {
        s,
        samples,
        max_radius: radii.iter().copied().fold(0.0, f64::max),
        violations: radii.iter().filter(|&&r| r > limit).count(),
    })
}
