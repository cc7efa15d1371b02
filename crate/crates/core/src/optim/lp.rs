//! Dense two-phase simplex with Bland's rule.
//!
//! Every LP built in this crate has few variables (≤ ~50) and possibly many
//! inequality rows (thousands for the intersected ROSC polytopes). The
//! user-facing problem is therefore solved through its dual in standard
//! form, whose tableau has one row per primal variable. The primal point is
//! recovered as the simplex multipliers of the dual.

use ndarray::{s, Array1, Array2};

use super::{SolveKind, SolveStatus};
use crate::error::check_dim;
use crate::{Error, Real, Result};

/// `min cᵀx  s.t.  A x ≤ b,  A_eq x = b_eq,  lo ≤ x ≤ hi`.
///
/// Bounds may be infinite; by default every variable is free.
#[derive(Debug, Clone)]
pub struct LpProblem<T> {
    pub objective: Array1<T>,
    pub a_ub: Array2<T>,
    pub b_ub: Array1<T>,
    pub a_eq: Array2<T>,
    pub b_eq: Array1<T>,
    pub lower: Array1<T>,
    pub upper: Array1<T>,
}

impl<T: Real> LpProblem<T> {
    pub fn new(objective: Array1<T>) -> Self {
        let n = objective.len();
        Self {
            objective,
            a_ub: Array2::zeros((0, n)),
            b_ub: Array1::zeros(0),
            a_eq: Array2::zeros((0, n)),
            b_eq: Array1::zeros(0),
            lower: Array1::from_elem(n, T::neg_infinity()),
            upper: Array1::from_elem(n, T::infinity()),
        }
    }

    pub fn with_inequalities(mut self, a: Array2<T>, b: Array1<T>) -> Self {
        self.a_ub = a;
        self.b_ub = b;
        self
    }

    pub fn with_equalities(mut self, a: Array2<T>, b: Array1<T>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_bounds(mut self, lower: Array1<T>, upper: Array1<T>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        check_dim("lp inequality columns", n, self.a_ub.ncols())?;
        check_dim("lp inequality rows", self.a_ub.nrows(), self.b_ub.len())?;
        check_dim("lp equality columns", n, self.a_eq.ncols())?;
        check_dim("lp equality rows", self.a_eq.nrows(), self.b_eq.len())?;
        check_dim("lp lower bounds", n, self.lower.len())?;
        check_dim("lp upper bounds", n, self.upper.len())?;
        let finite = self.objective.iter().all(|v| v.is_finite())
            && self.a_ub.iter().all(|v| v.is_finite())
            && self.b_ub.iter().all(|v| v.is_finite())
            && self.a_eq.iter().all(|v| v.is_finite())
            && self.b_eq.iter().all(|v| v.is_finite())
            && self.lower.iter().all(|v| !v.is_nan() && *v != T::infinity())
            && self.upper.iter().all(|v| !v.is_nan() && *v != T::neg_infinity());
        if !finite {
            return Err(Error::NonFinite("lp problem"));
        }
        let has_constraint = self.a_ub.nrows() > 0
            || self.a_eq.nrows() > 0
            || self.lower.iter().any(|v| v.is_finite())
            || self.upper.iter().any(|v| v.is_finite());
        if !has_constraint && n > 0 {
            return Err(Error::InvalidArgument(
                "lp needs at least one constraint or finite bound".into(),
            ));
        }
        Ok(())
    }

    /// Plain-text dump in an LP-file flavoured format, for debugging.
    pub fn to_lp_string(&self) -> String {
        use std::fmt::Write;
        let term = |coefs: ndarray::ArrayView1<T>| {
            let mut s = String::new();
            for (j, c) in coefs.iter().enumerate() {
                if *c != T::zero() {
                    let _ = write!(s, " {:+} x{}", c, j);
                }
            }
            if s.is_empty() {
                s.push_str(" 0");
            }
            s
        };
        let mut out = String::new();
        let _ = writeln!(out, "minimize\n obj:{}", term(self.objective.view()));
        let _ = writeln!(out, "subject to");
        for (i, row) in self.a_ub.rows().into_iter().enumerate() {
            let _ = writeln!(out, " u{}:{} <= {}", i, term(row), self.b_ub[i]);
        }
        for (i, row) in self.a_eq.rows().into_iter().enumerate() {
            let _ = writeln!(out, " e{}:{} = {}", i, term(row), self.b_eq[i]);
        }
        let _ = writeln!(out, "bounds");
        for j in 0..self.num_vars() {
            let _ = writeln!(out, " {} <= x{} <= {}", self.lower[j], j, self.upper[j]);
        }
        out.push_str("end\n");
        out
    }
}

/// Lagrange multipliers of an optimal LP, all sign-normalized so that
/// `c + A_ubᵀ·ineq + A_eqᵀ·eq − lower + upper = 0` with `ineq, lower,
/// upper ≥ 0`.
#[derive(Debug, Clone)]
pub struct LpDuals<T> {
    pub ineq: Array1<T>,
    pub eq: Array1<T>,
    pub lower: Array1<T>,
    pub upper: Array1<T>,
}

pub fn solve_lp<T: Real>(p: &LpProblem<T>) -> Result<SolveStatus<T>> {
    solve_lp_with_duals(p).map(|(s, _)| s)
}

pub fn solve_lp_with_duals<T: Real>(p: &LpProblem<T>) -> Result<(SolveStatus<T>, Option<LpDuals<T>>)> {
    p.validate()?;
    let n = p.num_vars();
    if n == 0 {
        let ok = p.b_ub.iter().all(|&b| b >= -feas_tol::<T>(b)) && p.b_eq.iter().all(|&b| b.abs() <= feas_tol::<T>(b));
        let status = if ok {
            SolveStatus::optimal(Array1::zeros(0), T::zero())
        } else {
            SolveStatus::failed(SolveKind::Infeasible)
        };
        return Ok((status, None));
    }

    // Free-variable inequality form: G x ≤ h, E x = f.
    let upper_idx: Vec<usize> = (0..n).filter(|&j| p.upper[j].is_finite()).collect();
    let lower_idx: Vec<usize> = (0..n).filter(|&j| p.lower[j].is_finite()).collect();
    let g_rows = p.a_ub.nrows() + upper_idx.len() + lower_idx.len();
    let e_rows = p.a_eq.nrows();
    let mut g = Array2::<T>::zeros((g_rows, n));
    let mut h = Array1::<T>::zeros(g_rows);
    g.slice_mut(s![..p.a_ub.nrows(), ..]).assign(&p.a_ub);
    h.slice_mut(s![..p.a_ub.nrows()]).assign(&p.b_ub);
    let mut r = p.a_ub.nrows();
    for &j in &upper_idx {
        g[[r, j]] = T::one();
        h[r] = p.upper[j];
        r += 1;
    }
    for &j in &lower_idx {
        g[[r, j]] = -T::one();
        h[r] = -p.lower[j];
        r += 1;
    }

    // Dual in standard form: min hᵀy + fᵀ(v⁺ − v⁻)
    // s.t. Gᵀy + Eᵀ(v⁺ − v⁻) = −c, y, v± ≥ 0.
    let cols = g_rows + 2 * e_rows;
    let mut a_std = Array2::<T>::zeros((n, cols));
    a_std.slice_mut(s![.., ..g_rows]).assign(&g.t());
    a_std.slice_mut(s![.., g_rows..g_rows + e_rows]).assign(&p.a_eq.t());
    a_std
        .slice_mut(s![.., g_rows + e_rows..])
        .assign(&p.a_eq.t().mapv(|v| -v));
    let mut c_std = Array1::<T>::zeros(cols);
    c_std.slice_mut(s![..g_rows]).assign(&h);
    c_std.slice_mut(s![g_rows..g_rows + e_rows]).assign(&p.b_eq);
    c_std
        .slice_mut(s![g_rows + e_rows..])
        .assign(&p.b_eq.mapv(|v| -v));
    let b_std = p.objective.mapv(|v| -v);

    let outcome = simplex_standard(&a_std, &b_std, &c_std);
    let (z, pi) = match outcome {
        Simplex::Optimal { z, pi } => (z, pi),
        Simplex::Unbounded => return Ok((SolveStatus::failed(SolveKind::Infeasible), None)),
        Simplex::IterationLimit => {
            return Ok((SolveStatus::failed(SolveKind::NumericalFailure), None))
        }
        Simplex::Infeasible => {
            // Primal is infeasible or unbounded; decide with a zero objective.
            let zero = Array1::zeros(n);
            let kind = match simplex_standard(&a_std, &zero, &c_std) {
                Simplex::Optimal { .. } => SolveKind::Unbounded,
                Simplex::Unbounded => SolveKind::Infeasible,
                _ => SolveKind::NumericalFailure,
            };
            return Ok((SolveStatus::failed(kind), None));
        }
    };

    let x = pi;
    if !x.iter().all(|v| v.is_finite()) {
        return Ok((SolveStatus::failed(SolveKind::NumericalFailure), None));
    }
    // Self-check against the original rows.
    let gx = g.dot(&x);
    let feasible = gx
        .iter()
        .zip(h.iter())
        .all(|(&lhs, &rhs)| lhs <= rhs + feas_tol::<T>(rhs))
        && p.a_eq
            .dot(&x)
            .iter()
            .zip(p.b_eq.iter())
            .all(|(&lhs, &rhs)| (lhs - rhs).abs() <= feas_tol::<T>(rhs));
    if !feasible {
        log::debug!("lp self-check failed (max violation {:e})", gx.iter().zip(h.iter()).map(|(&l, &r)| (l - r).as_f64()).fold(f64::MIN, f64::max));
        return Ok((SolveStatus::failed(SolveKind::NumericalFailure), None));
    }
    let obj = p.objective.dot(&x);
    let y = z.slice(s![..g_rows]).to_owned();
    let eq = &z.slice(s![g_rows..g_rows + e_rows]) - &z.slice(s![g_rows + e_rows..]);
    let ineq = y.slice(s![..p.a_ub.nrows()]).to_owned();
    let mut upper = Array1::zeros(n);
    let mut lower = Array1::zeros(n);
    let mut r = p.a_ub.nrows();
    for &j in &upper_idx {
        upper[j] = y[r];
        r += 1;
    }
    for &j in &lower_idx {
        lower[j] = y[r];
        r += 1;
    }
    Ok((
        SolveStatus::optimal(x, obj),
        Some(LpDuals {
            ineq,
            eq,
            lower,
            upper,
        }),
    ))
}

fn feas_tol<T: Real>(rhs: T) -> T {
    T::tol_or_eps(1e-9) * T::one().max(rhs.abs())
}

const MAX_REFACTOR: usize = 8;

enum Simplex<T> {
    Optimal { z: Array1<T>, pi: Array1<T> },
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// `min cᵀz  s.t.  A z = b,  z ≥ 0`, returning the primal `z` and the
/// multipliers `π` (so that `c − Aᵀπ ≥ 0` at optimality).
fn simplex_standard<T: Real>(a: &Array2<T>, b: &Array1<T>, c: &Array1<T>) -> Simplex<T> {
    let (m, n) = a.dim();
    let width = n + m;
    let signs: Vec<T> = b
        .iter()
        .map(|&v| if v < T::zero() { -T::one() } else { T::one() })
        .collect();
    let mut tab = Array2::<T>::zeros((m, width));
    let mut rhs = Array1::<T>::zeros(m);
    for r in 0..m {
        for j in 0..n {
            tab[[r, j]] = a[[r, j]] * signs[r];
        }
        tab[[r, n + r]] = T::one();
        rhs[r] = b[r] * signs[r];
    }
    let full = tab.clone();
    let b_signed = rhs.clone();
    let mut basis: Vec<usize> = (n..n + m).collect();
    let scale_a = a.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    let piv_tol = T::pivot_tol() * scale_a;
    let max_iter = 50 * (m + n) + 1000;
    let mut iters = 0usize;

    // Phase 1.
    let mut cost1 = Array1::<T>::zeros(width);
    cost1.slice_mut(s![n..]).fill(T::one());
    let scale_b = b.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    match run_phase(&mut tab, &mut rhs, &mut basis, &cost1, width, piv_tol, T::pivot_tol(), &mut iters, max_iter) {
        Phase::Optimal => {}
        Phase::Unbounded => return Simplex::IterationLimit,
        Phase::IterationLimit => return Simplex::IterationLimit,
    }
    let infeas: T = (0..m)
        .filter(|&r| basis[r] >= n)
        .map(|r| rhs[r])
        .sum();
    if infeas > T::tol_or_eps(1e-9) * scale_b {
        return Simplex::Infeasible;
    }
    // Drive artificials out of the basis where possible.
    for r in 0..m {
        if basis[r] < n {
            continue;
        }
        let mut best = (usize::MAX, T::zero());
        for j in 0..n {
            let v = tab[[r, j]].abs();
            if v > piv_tol && v > best.1 {
                best = (j, v);
            }
        }
        if best.0 != usize::MAX {
            pivot(&mut tab, &mut rhs, &mut basis, r, best.0);
        }
    }

    // Phase 2; artificial columns never re-enter.
    let mut cost2 = Array1::<T>::zeros(width);
    cost2.slice_mut(s![..n]).assign(c);
    let scale_c = c.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    // Rounding in the updated tableau can leave a basis that only looks
    // optimal; refactor from the original data before each pass and stop
    // once a fresh tableau needs no pivot.
    for _ in 0..MAX_REFACTOR {
        refactor(&full, &b_signed, &basis, &mut tab, &mut rhs);
        let before = iters;
        match run_phase(&mut tab, &mut rhs, &mut basis, &cost2, n, piv_tol, T::pivot_tol() * scale_c, &mut iters, max_iter) {
            Phase::Optimal => {}
            Phase::Unbounded => return Simplex::Unbounded,
            Phase::IterationLimit => return Simplex::IterationLimit,
        }
        if iters == before {
            break;
        }
    }

    let mut z = Array1::<T>::zeros(n);
    for r in 0..m {
        if basis[r] < n {
            z[basis[r]] = rhs[r].max(T::zero());
        }
    }
    // π solves Bᵀπ = c_B on the sign-normalized rows.
    let mut bt = Array2::<T>::zeros((m, m));
    let mut cb = Array1::<T>::zeros(m);
    for (k, &j) in basis.iter().enumerate() {
        if j < n {
            for r in 0..m {
                bt[[k, r]] = a[[r, j]] * signs[r];
            }
            cb[k] = c[j];
        } else {
            bt[[k, j - n]] = T::one();
        }
    }
    let pi_norm = match crate::linalg::solve(bt.view(), &cb) {
        Some(v) => v,
        None => {
            // Fall back to reading B⁻¹ from the artificial block.
            let mut v = Array1::<T>::zeros(m);
            for i in 0..m {
                let mut acc = T::zero();
                for r in 0..m {
                    let cbr = if basis[r] < n { c[basis[r]] } else { T::zero() };
                    acc += cbr * tab[[r, n + i]];
                }
                v[i] = acc;
            }
            v
        }
    };
    let pi: Array1<T> = pi_norm
        .iter()
        .zip(signs.iter())
        .map(|(&v, &s)| v * s)
        .collect();
    Simplex::Optimal { z, pi }
}

/// Rebuilds `tab = B⁻¹·full` and `rhs = B⁻¹·b` for the current basis.
fn refactor<T: Real>(full: &Array2<T>, b: &Array1<T>, basis: &[usize], tab: &mut Array2<T>, rhs: &mut Array1<T>) -> bool {
    let m = full.nrows();
    let mut bm = Array2::<T>::zeros((m, m));
    for (k, &j) in basis.iter().enumerate() {
        bm.column_mut(k).assign(&full.column(j));
    }
    let Some(lu) = crate::linalg::Lu::new(bm.view()) else {
        return false;
    };
    *tab = lu.solve_mat(full);
    *rhs = lu.solve_vec(b).mapv(|v| if v < T::zero() && v > -T::pivot_tol() { T::zero() } else { v });
    for (k, &j) in basis.iter().enumerate() {
        for r in 0..m {
            tab[[r, j]] = if r == k { T::one() } else { T::zero() };
        }
    }
    true
}

enum Phase {
    Optimal,
    Unbounded,
    IterationLimit,
}

#[allow(clippy::too_many_arguments)]
fn run_phase<T: Real>(
    tab: &mut Array2<T>,
    rhs: &mut Array1<T>,
    basis: &mut [usize],
    cost: &Array1<T>,
    enter_limit: usize,
    piv_tol: T,
    cost_tol: T,
    iters: &mut usize,
    max_iter: usize,
) -> Phase {
    let (m, width) = tab.dim();
    // Reduced costs d_j = c_j − c_Bᵀ T_j.
    let mut d = cost.clone();
    for r in 0..m {
        let cb = cost[basis[r]];
        if cb != T::zero() {
            for j in 0..width {
                d[j] -= cb * tab[[r, j]];
            }
        }
    }
    loop {
        if *iters >= max_iter {
            return Phase::IterationLimit;
        }
        // Bland: lowest-index improving column.
        let Some(q) = (0..enter_limit).find(|&j| d[j] < -cost_tol) else {
            return Phase::Optimal;
        };
        let mut leave: Option<(usize, T)> = None;
        for r in 0..m {
            let t = tab[[r, q]];
            if t > piv_tol {
                let ratio = rhs[r] / t;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio || (ratio == lratio && basis[r] < basis[lr]) {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        let Some((p, _)) = leave else {
            return Phase::Unbounded;
        };
        pivot(tab, rhs, basis, p, q);
        let dq = d[q];
        if dq != T::zero() {
            for j in 0..width {
                d[j] -= dq * tab[[p, j]];
            }
        }
        d[q] = T::zero();
        *iters += 1;
    }
}

fn pivot<T: Real>(tab: &mut Array2<T>, rhs: &mut Array1<T>, basis: &mut [usize], p: usize, q: usize) {
    let (m, width) = tab.dim();
    let inv = T::one() / tab[[p, q]];
    for j in 0..width {
        tab[[p, j]] *= inv;
    }
    rhs[p] *= inv;
    tab[[p, q]] = T::one();
    let prow = tab.row(p).to_owned();
    let prhs = rhs[p];
    for r in 0..m {
        if r == p {
            continue;
        }
        let f = tab[[r, q]];
        if f != T::zero() {
            for j in 0..width {
                tab[[r, j]] -= f * prow[j];
            }
            tab[[r, q]] = T::zero();
            rhs[r] -= f * prhs;
            if rhs[r] < T::zero() && rhs[r] > -T::pivot_tol() {
                rhs[r] = T::zero();
            }
        }
    }
    basis[p] = q;
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn min_x_with_lower_bound() {
        let p = LpProblem::new(array![1.0f64]).with_inequalities(array![[-1.0]], array![-1.0]);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.kind, SolveKind::Optimal);
        assert!((s.solution.unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let p = LpProblem::new(array![1.0f64]).with_inequalities(array![[1.0], [-1.0]], array![0.0, -1.0]);
        assert_eq!(solve_lp(&p).unwrap().kind, SolveKind::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let p = LpProblem::new(array![-1.0f64, 0.0]).with_inequalities(array![[0.0, 1.0]], array![1.0]);
        assert_eq!(solve_lp(&p).unwrap().kind, SolveKind::Unbounded);
    }

    #[test]
    fn equalities_and_bounds() {
        // min x0 + 2 x1 s.t. x0 + x1 = 3, 0 ≤ x0 ≤ 2, x1 ≥ 0  →  (2, 1)
        let p = LpProblem::new(array![1.0f64, 2.0])
            .with_equalities(array![[1.0, 1.0]], array![3.0])
            .with_bounds(array![0.0, 0.0], array![2.0, f64::INFINITY]);
        let (s, d) = solve_lp_with_duals(&p).unwrap();
        let x = s.solution.unwrap();
        assert!((x[0] - 2.0).abs() < 1e-10 && (x[1] - 1.0).abs() < 1e-10);
        assert!((s.objective_value.unwrap() - 4.0).abs() < 1e-10);
        let d = d.unwrap();
        let stat = &p.objective + &p.a_eq.t().dot(&d.eq) - &d.lower + &d.upper;
        assert!(stat.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn redundant_equalities() {
        let p = LpProblem::new(array![1.0f64, 1.0])
            .with_equalities(array![[1.0, 1.0], [2.0, 2.0]], array![1.0, 2.0])
            .with_bounds(array![0.0, 0.0], array![f64::INFINITY, f64::INFINITY]);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.kind, SolveKind::Optimal);
        assert!((s.objective_value.unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_unconstrained() {
        assert!(solve_lp(&LpProblem::new(array![1.0f64])).is_err());
    }

    #[test]
    fn dump_mentions_rows() {
        let p = LpProblem::new(array![1.0f64]).with_inequalities(array![[-1.0]], array![-1.0]);
        let txt = p.to_lp_string();
        assert!(txt.contains("u0:") && txt.contains("minimize"));
    }
}
