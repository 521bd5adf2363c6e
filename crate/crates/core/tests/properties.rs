//! Property tests for the transformed form, the radius and the optimal family.

use nalgebra::DMatrix;
use proptest::prelude::*;

use ssp_dirk::linalg::{solve, Matrix};
use ssp_dirk::search::sample_second_order_dirk;
use ssp_dirk::{certify, make_optimal, ssp_radius, RungeKuttaMethod, TOL_BISECT};

fn second_order_dirk() -> impl Strategy<Value = RungeKuttaMethod> {
    (1usize..=6, any::<u64>()).prop_map(|(s, seed)| sample_second_order_dirk(s, seed).unwrap())
}

fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn norm_inf(m: &Matrix) -> f64 {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Rounding allowance `16 ε κ∞(I + rA)`; `None` past a pole.
fn allowance(method: &RungeKuttaMethod, r: f64) -> Option<f64> {
    let s = method.stages();
    if (0..s).any(|i| 1.0 + r * method.a()[(i, i)] <= 0.0) {
        return None;
    }
    let tf = method.to_transformed(r).ok()?;
    Some(16.0 * f64::EPSILON * norm_inf(tf.n()) * norm_inf(tf.m()))
}

fn max_abs_diff(x: &Matrix, y: &DMatrix<f64>) -> f64 {
    (0..x.rows())
        .flat_map(|i| (0..x.cols()).map(move |j| (i, j)))
        .map(|(i, j)| (x[(i, j)] - y[(i, j)]).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn transformed_roundtrip(method in second_order_dirk(), t in 0.01f64..2.0) {
        let r = t * 2.0 * method.stages() as f64;
        let Some(tol) = allowance(&method, r) else {
            return Ok(());
        };
        let tf = method.to_transformed(r).unwrap();
        let back = RungeKuttaMethod::from_transformed(&tf).unwrap();
        let scale = method.a().max_abs().max(1.0);
        let err = back
            .b()
            .iter()
            .zip(method.b())
            .fold(back.a().max_abs_diff(method.a()), |e, (x, y)| e.max((x - y).abs()));
        prop_assert!(err <= tol * scale);
        if tol <= 16.0 * f64::EPSILON * 100.0 {
            prop_assert!(err <= 1e-13 * scale);
        }
    }

    #[test]
    fn m_satisfies_i_minus_m_equals_ram(method in second_order_dirk(), r in 0.0f64..10.0) {
        let Some(tol) = allowance(&method, r) else {
            return Ok(());
        };
        let tf = method.to_transformed(r).unwrap();
        let s = method.stages();
        let lhs = Matrix::identity(s).sub(tf.m());
        let rhs = method.a().scale(r).mul(tf.m());
        prop_assert!(lhs.max_abs_diff(&rhs) <= tol * tf.m().max_abs().max(1.0));
    }

    #[test]
    fn weight_identities(method in second_order_dirk(), r in 0.01f64..10.0) {
        let Some(tol) = allowance(&method, r) else {
            return Ok(());
        };
        let tf = method.to_transformed(r).unwrap();
        let tol = tol * (1.0 + r * r);
        prop_assert!((tf.w_n_e() - r).abs() <= tol);
        prop_assert!((tf.w_n2_e() - r * (1.0 + r / 2.0)).abs() <= tol);
    }

    #[test]
    fn inverse_matches_nalgebra_on_stage_matrices(method in second_order_dirk(), r in 0.0f64..10.0) {
        let Some(tol) = allowance(&method, r) else {
            return Ok(());
        };
        let tf = method.to_transformed(r).unwrap();
        let oracle = to_nalgebra(tf.n()).try_inverse().unwrap();
        prop_assert!(max_abs_diff(tf.m(), &oracle) <= tol * oracle.amax().max(1.0));
    }

    #[test]
    fn general_inverse_matches_nalgebra(
        entries in proptest::collection::vec(-1.0f64..1.0, 25),
        n in 1usize..=5,
    ) {
        // diagonally dominant, hence well conditioned
        let m = Matrix::from_fn(n, n, |i, j| entries[i * 5 + j] + if i == j { n as f64 + 1.0 } else { 0.0 });
        let inv = m.inverse().unwrap();
        let oracle = to_nalgebra(&m).try_inverse().unwrap();
        prop_assert!(max_abs_diff(&inv, &oracle) <= 1e-13);
    }

    #[test]
    fn no_dirk_beats_two_s(s in 2usize..=6, seed in any::<u64>()) {
        let method = sample_second_order_dirk(s, seed).unwrap();
        prop_assert!(ssp_radius(&method) <= 2.0 * s as f64 + TOL_BISECT);
    }

    #[test]
    fn certificate_agrees_with_nalgebra(method in second_order_dirk(), r in 0.0f64..12.0) {
        let Some(tol) = allowance(&method, r) else {
            return Ok(());
        };
        let c = certify(&method, r);
        let s = method.stages();
        let a = to_nalgebra(method.a());
        let m = (DMatrix::identity(s, s) + &a * r).try_inverse().unwrap();
        let b = DMatrix::from_row_slice(1, s, method.b());
        let weights = &b * &m;
        let oracle_min = m
            .column_sum()
            .iter()
            .chain((&a * r * &m).iter())
            .chain(weights.iter())
            .chain(std::iter::once(&(1.0 - r * weights.sum())))
            .fold(f64::INFINITY, |x, &y| x.min(y));
        prop_assert!((c.min_slack().unwrap() - oracle_min).abs() <= tol * (1.0 + r) * m.amax().max(1.0));
    }

    #[test]
    fn optimal_stability_function_is_iterated_midpoint(s in 1usize..=8, z in -50.0f64..1.0) {
        // R(z) = 1 + z bᵀ(I − zA)⁻¹e
        let method = make_optimal(s).unwrap().method;
        let lhs = Matrix::identity(s).sub(&method.a().scale(z));
        let y = solve(&lhs, &vec![1.0; s]).unwrap();
        let stability = 1.0 + z * method.b().iter().zip(&y).map(|(b, y)| b * y).sum::<f64>();
        let h = z / (2.0 * s as f64);
        let exact = ((1.0 + h) / (1.0 - h)).powi(s as i32);
        prop_assert!((stability - exact).abs() <= 1e-12 * exact.abs().max(1.0));
    }
}

/// Feasibility along increasing radii never switches back on.
#[test]
fn feasible_set_is_an_interval() {
    let mut checked = 0;
    for seed in 0..1000u64 {
        let s = 2 + (seed % 4) as usize;
        let method = sample_second_order_dirk(s, seed).unwrap();
        let radius = ssp_radius(&method);
        let top = if radius > 0.0 && radius.is_finite() { 2.0 * radius } else { 2.0 * s as f64 };
        let feasible: Vec<bool> = (1..=20).map(|k| certify(&method, top * k as f64 / 20.0).feasible).collect();
        assert!(feasible.windows(2).all(|w| w[0] || !w[1]), "seed {seed}: {feasible:?}");
        if radius.is_finite() {
            assert!(certify(&method, radius).feasible, "seed {seed}");
        }
        if radius > 0.0 && radius.is_finite() {
            assert!(feasible[..9].iter().all(|&f| f), "seed {seed}");
        }
        checked += feasible.len();
    }
    assert_eq!(checked, 20_000);
}

#[test]
fn optimal_family_radius_and_structure() {
    for s in 1..=12 {
        let member = make_optimal(s).unwrap();
        assert!((ssp_radius(&member.method) - 2.0 * s as f64).abs() <= 10.0 * TOL_BISECT);
        assert!(member.verify_structure(), "s = {s}");
    }
}
