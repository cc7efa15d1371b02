//! Solvers against brute-force and closed-form references.

use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rosc_core::optim::{solve_lp, solve_lp_with_duals, solve_qp, solve_weighted_log, InnerObjective, LpProblem, QpProblem, SolveKind};

/// Minimum of `cᵀx` over `Ax ≤ b` in the plane, by enumerating every
/// intersection of two constraint lines.
fn lp_by_vertices(c: &Array1<f64>, a: &Array2<f64>, b: &Array1<f64>) -> Option<f64> {
    let m = a.nrows();
    let mut best: Option<f64> = None;
    for i in 0..m {
        for j in i + 1..m {
            let det = a[[i, 0]] * a[[j, 1]] - a[[i, 1]] * a[[j, 0]];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = array![
                (b[i] * a[[j, 1]] - a[[i, 1]] * b[j]) / det,
                (a[[i, 0]] * b[j] - b[i] * a[[j, 0]]) / det
            ];
            if (a.dot(&x) - b).iter().all(|&v| v <= 1e-9) {
                let v = c.dot(&x);
                best = Some(best.map_or(v, |bv: f64| bv.min(v)));
            }
        }
    }
    best
}

fn random_lp(rng: &mut ChaCha8Rng) -> (Array1<f64>, Array2<f64>, Array1<f64>) {
    let m = rng.gen_range(3..10);
    let mut a = Array2::from_shape_fn((m + 4, 2), |_| rng.gen_range(-1.0..1.0));
    let mut b: Array1<f64> = (0..m + 4).map(|_| rng.gen_range(0.1..2.0)).collect();
    // bounding box so every instance is bounded
    for (k, row) in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]].iter().enumerate() {
        a.row_mut(m + k).assign(&Array1::from(row.to_vec()));
        b[m + k] = 5.0;
    }
    let c = array![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    (c, a, b)
}

#[test]
fn lp_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..300 {
        let (c, a, b) = random_lp(&mut rng);
        let expected = lp_by_vertices(&c, &a, &b).unwrap();
        let st = solve_lp(&LpProblem::new(c.clone()).with_inequalities(a.clone(), b.clone())).unwrap();
        assert_eq!(st.kind, SolveKind::Optimal);
        let got = st.objective_value.unwrap();
        assert!((got - expected).abs() <= 1e-8, "{got} vs {expected}");
        let x = st.solution.unwrap();
        assert!((a.dot(&x) - &b).iter().all(|&v| v <= 1e-8));
    }
}

#[test]
fn lp_strong_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let (c, a, b) = random_lp(&mut rng);
        let (st, duals) = solve_lp_with_duals(&LpProblem::new(c.clone()).with_inequalities(a.clone(), b.clone())).unwrap();
        let y = duals.unwrap().ineq;
        // min cᵀx, Ax ≤ b  ⇔  max −bᵀy, Aᵀy = −c, y ≥ 0
        assert!(y.iter().all(|&v| v >= -1e-9));
        assert!((a.t().dot(&y) + &c).iter().all(|v| v.abs() <= 1e-8));
        assert!((st.objective_value.unwrap() + b.dot(&y)).abs() <= 1e-8);
    }
}

#[test]
fn lp_detects_infeasible_and_unbounded() {
    let a = array![[1.0], [-1.0]];
    let st = solve_lp(&LpProblem::new(array![1.0]).with_inequalities(a.clone(), array![-1.0, -1.0])).unwrap();
    assert_eq!(st.kind, SolveKind::Infeasible);
    let st = solve_lp(&LpProblem::new(array![-1.0]).with_inequalities(array![[-1.0]], array![0.0])).unwrap();
    assert_eq!(st.kind, SolveKind::Unbounded);
}

/// Box-constrained QP by projected gradient, run to convergence.
fn qp_by_projected_gradient(h: &Array2<f64>, f: &Array1<f64>, lo: f64, hi: f64) -> Array1<f64> {
    let step = 1.0 / h.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = Array1::zeros(f.len());
    for _ in 0..200_000 {
        let g = h.dot(&x) + f;
        x = (&x - &(g * step)).mapv(|v| v.clamp(lo, hi));
    }
    x
}

#[test]
fn qp_matches_projected_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let n = rng.gen_range(2..5);
        let l = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0));
        let h = l.dot(&l.t()) + Array2::<f64>::eye(n) * 0.5;
        let f: Array1<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let a = ndarray::concatenate![ndarray::Axis(0), Array2::<f64>::eye(n), -Array2::<f64>::eye(n)];
        let b = Array1::from_elem(2 * n, 1.0);
        let st = solve_qp(&QpProblem::new(h.clone(), f.clone()).with_inequalities(a, b)).unwrap();
        let x = st.solution.unwrap();
        let reference = qp_by_projected_gradient(&h, &f, -1.0, 1.0);
        let err = (&x - &reference).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err <= 1e-6, "max deviation {err}");
    }
}

#[test]
fn weighted_log_kkt_closed_form() {
    // |c| + 2β₁ + 3β₂ ≤ 1 with weights (1, 2): β_l = d_l / (g_l Σd).
    let g: Array2<f64> = array![[2.0, 3.0]];
    let h = array![[1.0], [-1.0]];
    let sol = solve_weighted_log(&g, Some(&array![1.0, 2.0]), &h, &array![1.0, 1.0], InnerObjective::Log).unwrap();
    assert!(sol.center[0].abs() <= 1e-7);
    assert!((sol.scales[0] - 1.0 / 6.0).abs() <= 1e-6, "{}", sol.scales);
    assert!((sol.scales[1] - 2.0 / 9.0).abs() <= 1e-6, "{}", sol.scales);
}

#[test]
fn weighted_log_box_template_fills_box() {
    // Axis-aligned template in [1, 3] × [0, 2]: β_i = min(1, half-width / g_i).
    let g: Array2<f64> = array![[4.0, 0.0], [0.0, 0.5]];
    let h = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
    let d = array![3.0, -1.0, 2.0, 0.0];
    let sol = solve_weighted_log(&g, None, &h, &d, InnerObjective::Log).unwrap();
    assert!((sol.center[0] - 2.0).abs() <= 1e-6 && (0.5..=1.5).contains(&sol.center[1]), "{} {}", sol.center, sol.scales);
    assert!((sol.scales[0] - 0.25).abs() <= 1e-6 && (sol.scales[1] - 1.0).abs() <= 1e-6, "{}", sol.scales);
}

#[test]
fn weighted_log_is_locally_optimal() {
    // No feasible random perturbation improves the objective.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let q = 8;
        let h = Array2::from_shape_fn((q, 2), |_| rng.gen_range(-1.0..1.0));
        let d: Array1<f64> = (0..q).map(|_| rng.gen_range(0.5..1.5)).collect();
        let g = Array2::from_shape_fn((2, 3), |_| rng.gen_range(-1.0..1.0));
        let w = array![1.0, 2.0, 0.5];
        let Ok(sol) = solve_weighted_log(&g, Some(&w), &h, &d, InnerObjective::Log) else {
            continue;
        };
        let hg = h.dot(&g).mapv(f64::abs);
        let obj = |c: &Array1<f64>, b: &Array1<f64>| -> Option<f64> {
            let ok = (h.dot(c) + hg.dot(b) - &d).iter().all(|&v| v <= 0.0) && b.iter().all(|&v| v > 0.0 && v <= 1.0);
            ok.then(|| w.iter().zip(b).map(|(wi, bi)| wi * bi.ln()).sum())
        };
        let best = w.iter().zip(&sol.scales).map(|(wi, bi)| wi * bi.ln()).sum::<f64>();
        for _ in 0..2000 {
            let dc = Array1::from_shape_fn(2, |_| rng.gen_range(-1e-3..1e-3));
            let db = Array1::from_shape_fn(3, |_| rng.gen_range(-1e-3..1e-3));
            if let Some(v) = obj(&(&sol.center + &dc), &(&sol.scales + &db)) {
                assert!(v <= best + 1e-6, "perturbation improved {best} to {v}");
            }
        }
    }
}
