//! Largest template-shaped zonotope inside an H-polytope.
//!
//! Given a template generator matrix `G` (N × p) and a polytope
//! `{z : H z ≤ h}`, find a center `c` and per-generator scales `β` with
//!
//! ```text
//!   max  Σ_l d_l log β_l
//!   s.t. H c + |H G| β ≤ h,   0 ≤ β ≤ 1.
//! ```
//!
//! `Z(c, G diag(β))` is then contained in the polytope. The concave
//! program is solved by a barrier method with damped Newton steps; the
//! linear surrogate `Σ d_l β_l` is available as an LP and used as the
//! fallback when Newton stalls.

use ndarray::{s, Array1, Array2, ArrayView1};

use super::lp::{solve_lp, LpProblem};
use super::SolveKind;
use crate::error::check_dim;
use crate::linalg::{cholesky, cholesky_solve};
use crate::{Error, Real, Result};

/// Lower clip applied to the scales before logs are taken.
pub const BETA_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerObjective {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone)]
pub struct InnerSolution<T> {
    pub center: Array1<T>,
    pub scales: Array1<T>,
    /// Value of the objective that was actually optimized.
    pub objective: T,
    /// True when the log objective failed and the LP surrogate was used.
    pub used_fallback: bool,
}

pub fn solve_weighted_log<T: Real>(
    template: &Array2<T>,
    weights: Option<&Array1<T>>,
    h_mat: &Array2<T>,
    h_vec: &Array1<T>,
    objective: InnerObjective,
) -> Result<InnerSolution<T>> {
    let (dim, p) = template.dim();
    check_dim("weighted_log polytope columns", dim, h_mat.ncols())?;
    check_dim("weighted_log polytope rows", h_mat.nrows(), h_vec.len())?;
    let weights = match weights {
        Some(w) => {
            check_dim("weighted_log weights", p, w.len())?;
            if w.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
                return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
            }
            w.clone()
        }
        None => Array1::from_elem(p, T::one()),
    };
    if p == 0 {
        return Err(Error::InvalidArgument("template has no generators".into()));
    }
    if template
        .columns()
        .into_iter()
        .any(|c| c.iter().all(|v| *v == T::zero()))
    {
        return Err(Error::Numerical("template has a zero generator; no interior to scale into".into()));
    }
    let abs_hg = h_mat.dot(template).mapv(|v| v.abs());

    let start = interior_point(h_mat, h_vec, &abs_hg)?;
    let sol = match objective {
        InnerObjective::Linear => linear_surrogate(h_mat, h_vec, &abs_hg, &weights)?,
        InnerObjective::Log => match barrier(h_mat, h_vec, &abs_hg, &weights, start) {
            Some(s) => s,
            None => {
                log::warn!("weighted-log barrier stalled, using the linear surrogate");
                let mut s = linear_surrogate(h_mat, h_vec, &abs_hg, &weights)?;
                s.used_fallback = true;
                s
            }
        },
    };
    // Self-check on the returned (clipped) point.
    let lhs = h_mat.dot(&sol.center) + abs_hg.dot(&sol.scales);
    let ok = lhs
        .iter()
        .zip(h_vec.iter())
        .all(|(&l, &r)| l <= r + T::tol_or_eps(1e-8));
    if !ok {
        return Err(Error::Numerical("inner zonotope violates the polytope".into()));
    }
    Ok(sol)
}

/// Evaluates `Σ d_l log(max(β_l, ε))`.
pub fn log_objective<T: Real>(weights: &Array1<T>, scales: ArrayView1<T>) -> T {
    weights
        .iter()
        .zip(scales.iter())
        .map(|(&d, &b)| d * b.max(T::lit(BETA_FLOOR)).ln())
        .sum()
}

/// Maximizes a uniform margin τ with `β = τ·1` to get a strictly interior
/// starting point.
fn interior_point<T: Real>(h_mat: &Array2<T>, h_vec: &Array1<T>, abs_hg: &Array2<T>) -> Result<(Array1<T>, Array1<T>)> {
    let (m, dim) = h_mat.dim();
    let p = abs_hg.ncols();
    let mut a = Array2::<T>::zeros((m, dim + 1));
    a.slice_mut(s![.., ..dim]).assign(h_mat);
    for r in 0..m {
        a[[r, dim]] = abs_hg.row(r).sum() + T::one();
    }
    let mut obj = Array1::zeros(dim + 1);
    obj[dim] = -T::one();
    let mut lo = Array1::from_elem(dim + 1, T::neg_infinity());
    let mut hi = Array1::from_elem(dim + 1, T::infinity());
    lo[dim] = T::zero();
    hi[dim] = T::lit(0.5);
    let lp = LpProblem::new(obj)
        .with_inequalities(a, h_vec.clone())
        .with_bounds(lo, hi);
    let st = solve_lp(&lp)?;
    match st.kind {
        SolveKind::Optimal => {}
        SolveKind::Infeasible => return Err(Error::Infeasible("inner zonotope (empty polytope)")),
        _ => return Err(Error::Numerical("interior point LP failed".into())),
    }
    let z = st.solution.expect("optimal");
    let tau = z[dim];
    if tau <= T::tol_or_eps(1e-10) {
        return Err(Error::Numerical("polytope has no interior; all scales collapse to zero".into()));
    }
    Ok((z.slice(s![..dim]).to_owned(), Array1::from_elem(p, tau)))
}

fn linear_surrogate<T: Real>(
    h_mat: &Array2<T>,
    h_vec: &Array1<T>,
    abs_hg: &Array2<T>,
    weights: &Array1<T>,
) -> Result<InnerSolution<T>> {
    let (m, dim) = h_mat.dim();
    let p = abs_hg.ncols();
    let mut a = Array2::<T>::zeros((m, dim + p));
    a.slice_mut(s![.., ..dim]).assign(h_mat);
    a.slice_mut(s![.., dim..]).assign(abs_hg);
    let mut obj = Array1::zeros(dim + p);
    obj.slice_mut(s![dim..]).assign(&weights.mapv(|v| -v));
    let mut lo = Array1::from_elem(dim + p, T::neg_infinity());
    let mut hi = Array1::from_elem(dim + p, T::infinity());
    lo.slice_mut(s![dim..]).fill(T::zero());
    hi.slice_mut(s![dim..]).fill(T::one());
    let st = solve_lp(&LpProblem::new(obj).with_inequalities(a, h_vec.clone()).with_bounds(lo, hi))?;
    let z = match st.kind {
        SolveKind::Optimal => st.solution.expect("optimal"),
        SolveKind::Infeasible => return Err(Error::Infeasible("inner zonotope (empty polytope)")),
        _ => return Err(Error::Numerical("linear surrogate LP failed".into())),
    };
    let center = z.slice(s![..dim]).to_owned();
    let scales = z
        .slice(s![dim..])
        .mapv(|b| b.max(T::lit(BETA_FLOOR)).min(T::one()));
    let objective = weights.dot(&scales);
    Ok(InnerSolution {
        center,
        scales,
        objective,
        used_fallback: false,
    })
}

/// Barrier method on `min −t Σ d log β − Σ log(slack)`.
fn barrier<T: Real>(
    h_mat: &Array2<T>,
    h_vec: &Array1<T>,
    abs_hg: &Array2<T>,
    weights: &Array1<T>,
    start: (Array1<T>, Array1<T>),
) -> Option<InnerSolution<T>> {
    let (m, dim) = h_mat.dim();
    let p = abs_hg.ncols();
    let nv = dim + p;
    // Stacked rows: polytope, β ≤ 1, −β ≤ 0.
    let rows = m + 2 * p;
    let mut a = Array2::<T>::zeros((rows, nv));
    let mut b = Array1::<T>::zeros(rows);
    a.slice_mut(s![..m, ..dim]).assign(h_mat);
    a.slice_mut(s![..m, dim..]).assign(abs_hg);
    b.slice_mut(s![..m]).assign(h_vec);
    for l in 0..p {
        a[[m + l, dim + l]] = T::one();
        b[m + l] = T::one();
        a[[m + p + l, dim + l]] = -T::one();
    }
    let mut z = Array1::<T>::zeros(nv);
    z.slice_mut(s![..dim]).assign(&start.0);
    z.slice_mut(s![dim..]).assign(&start.1);

    let value = |z: &Array1<T>, t: T| -> Option<T> {
        let slack = &b - &a.dot(z);
        if slack.iter().any(|v| !(*v > T::zero())) {
            return None;
        }
        let bar: T = slack.iter().map(|v| v.ln()).sum();
        let obj: T = (0..p).map(|l| weights[l] * z[dim + l].ln()).sum();
        Some(-t * obj - bar)
    };

    let gap_tol = T::tol_or_eps(1e-10);
    let mu = T::lit(8.0);
    let mut t = T::one();
    let mut total_newton = 0usize;
    loop {
        // Centering.
        for _ in 0..200 {
            total_newton += 1;
            let slack = &b - &a.dot(&z);
            let inv = slack.mapv(|v| T::one() / v);
            let mut grad = a.t().dot(&inv);
            let mut hess = Array2::<T>::zeros((nv, nv));
            for r in 0..rows {
                let w = inv[r] * inv[r];
                let ar = a.row(r);
                for i in 0..nv {
                    let ai = ar[i];
                    if ai == T::zero() {
                        continue;
                    }
                    let wai = w * ai;
                    for j in 0..nv {
                        hess[[i, j]] += wai * ar[j];
                    }
                }
            }
            for l in 0..p {
                let bl = z[dim + l];
                grad[dim + l] -= t * weights[l] / bl;
                hess[[dim + l, dim + l]] += t * weights[l] / (bl * bl);
            }
            let mut reg = T::zero();
            let scale = hess.diag().iter().fold(T::zero(), |m, v| m.max(v.abs()));
            let l = loop {
                let mut hr = hess.clone();
                for i in 0..nv {
                    hr[[i, i]] += reg;
                }
                if let Some(l) = cholesky(hr.view()) {
                    break l;
                }
                reg = if reg == T::zero() { T::epsilon() * scale * T::lit(1e3) } else { reg * T::lit(100.0) };
                if reg > scale {
                    return None;
                }
            };
            let step = cholesky_solve(&l, &grad.mapv(|v| -v));
            let dec = -grad.dot(&step);
            if dec * T::lit(0.5) <= T::tol_or_eps(1e-12) {
                break;
            }
            let f0 = value(&z, t)?;
            let mut alpha = T::one();
            loop {
                let cand = &z + &(&step * alpha);
                if let Some(f1) = value(&cand, t) {
                    if f1 <= f0 - T::lit(0.25) * alpha * dec {
                        z = cand;
                        break;
                    }
                }
                alpha *= T::lit(0.5);
                if alpha < T::lit(1e-14) {
                    break;
                }
            }
            if alpha < T::lit(1e-14) {
                // Line search cannot improve: accept current centering.
                break;
            }
        }
        if T::from_usize(rows).unwrap() / t < gap_tol || total_newton > 5000 {
            break;
        }
        t *= mu;
    }
    if total_newton > 5000 {
        return None;
    }
    let center = z.slice(s![..dim]).to_owned();
    let scales = z
        .slice(s![dim..])
        .mapv(|v| v.max(T::lit(BETA_FLOOR)).min(T::one()));
    let objective = log_objective(weights, scales.view());
    Some(InnerSolution {
        center,
        scales,
        objective,
        used_fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn boxed(hw: [f64; 2]) -> (Array2<f64>, Array1<f64>) {
        (
            array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            array![hw[0], hw[0], hw[1], hw[1]],
        )
    }

    #[test]
    fn unit_box_fits_identity_template() {
        let (h, b) = boxed([1.0, 1.0]);
        let s = solve_weighted_log(&Array2::eye(2), None, &h, &b, InnerObjective::Log).unwrap();
        assert!(s.center.iter().all(|v| v.abs() < 1e-7));
        assert!(s.scales.iter().all(|v| (v - 1.0).abs() < 1e-7));
    }

    #[test]
    fn upper_bound_binds_on_wide_box() {
        let (h, b) = boxed([2.0, 1.0]);
        let s = solve_weighted_log(&Array2::eye(2), None, &h, &b, InnerObjective::Log).unwrap();
        assert!(s.scales.iter().all(|v| (v - 1.0).abs() < 1e-7));
        assert!(s.center[1].abs() < 1e-7);
    }

    #[test]
    fn half_box_gives_half_scales() {
        let (h, b) = boxed([0.5, 0.5]);
        for obj in [InnerObjective::Log, InnerObjective::Linear] {
            let s = solve_weighted_log(&Array2::eye(2), None, &h, &b, obj).unwrap();
            assert!(s.scales.iter().all(|v| (v - 0.5).abs() < 1e-7), "{:?}", s.scales);
            assert!(s.center.iter().all(|v| v.abs() < 1e-7));
        }
    }

    #[test]
    fn empty_polytope_is_infeasible() {
        let h = array![[1.0], [-1.0]];
        let b = array![0.0, -1.0];
        let e = solve_weighted_log(&Array2::eye(1), None, &h, &b, InnerObjective::Log).unwrap_err();
        assert!(matches!(e, Error::Infeasible(_)));
    }

    #[test]
    fn flat_polytope_has_no_interior() {
        let h = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        let b = array![1.0, 1.0, 0.0, 0.0];
        let e = solve_weighted_log(&Array2::eye(2), None, &h, &b, InnerObjective::Log).unwrap_err();
        assert!(matches!(e, Error::Numerical(_)));
    }

    #[test]
    fn zero_template_rejected() {
        let (h, b) = boxed([1.0, 1.0]);
        assert!(solve_weighted_log(&Array2::zeros((2, 2)), None, &h, &b, InnerObjective::Log).is_err());
    }
}
