//! Primal active-set method for strictly convex quadratic programs.

use ndarray::{s, Array1, Array2};

use super::lp::{solve_lp, LpProblem};
use super::{SolveKind, SolveStatus};
use crate::error::check_dim;
use crate::linalg::{cholesky, Lu};
use crate::{Error, Real, Result};

/// `min ½ xᵀQx + qᵀx  s.t.  A x ≤ b,  A_eq x = b_eq` with `Q ≻ 0`.
#[derive(Debug, Clone)]
pub struct QpProblem<T> {
    pub hessian: Array2<T>,
    pub linear: Array1<T>,
    pub a_ub: Array2<T>,
    pub b_ub: Array1<T>,
    pub a_eq: Array2<T>,
    pub b_eq: Array1<T>,
}

impl<T: Real> QpProblem<T> {
    pub fn new(hessian: Array2<T>, linear: Array1<T>) -> Self {
        let n = linear.len();
        Self {
            hessian,
            linear,
            a_ub: Array2::zeros((0, n)),
            b_ub: Array1::zeros(0),
            a_eq: Array2::zeros((0, n)),
            b_eq: Array1::zeros(0),
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

    fn validate(&self) -> Result<()> {
        let n = self.linear.len();
        check_dim("qp hessian rows", n, self.hessian.nrows())?;
        check_dim("qp hessian cols", n, self.hessian.ncols())?;
        check_dim("qp inequality columns", n, self.a_ub.ncols())?;
        check_dim("qp inequality rows", self.a_ub.nrows(), self.b_ub.len())?;
        check_dim("qp equality columns", n, self.a_eq.ncols())?;
        check_dim("qp equality rows", self.a_eq.nrows(), self.b_eq.len())?;
        let all = self
            .hessian
            .iter()
            .chain(self.linear.iter())
            .chain(self.a_ub.iter())
            .chain(self.b_ub.iter())
            .chain(self.a_eq.iter())
            .chain(self.b_eq.iter());
        if !crate::linalg::is_finite(all) {
            return Err(Error::NonFinite("qp problem"));
        }
        let scale = self.hessian.iter().fold(T::one(), |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (self.hessian[[i, j]] - self.hessian[[j, i]]).abs() > T::tol_or_eps(1e-10) * scale {
                    return Err(Error::InvalidArgument("qp hessian is not symmetric".into()));
                }
            }
        }
        if cholesky(self.hessian.view()).is_none() {
            return Err(Error::InvalidArgument("qp hessian is not positive definite".into()));
        }
        Ok(())
    }
}

/// Optimal point together with the multipliers of the final working set,
/// `Qx + q + A_ubᵀ λ + A_eqᵀ ν = 0`, `λ ≥ 0`.
#[derive(Debug, Clone)]
pub struct QpSolution<T> {
    pub x: Array1<T>,
    pub ineq_multipliers: Array1<T>,
    pub eq_multipliers: Array1<T>,
    pub iterations: usize,
}

pub fn solve_qp<T: Real>(p: &QpProblem<T>) -> Result<SolveStatus<T>> {
    Ok(match solve_qp_detailed(p)? {
        Ok(sol) => {
            let obj = objective(p, &sol.x);
            SolveStatus::optimal(sol.x, obj)
        }
        Err(kind) => SolveStatus::failed(kind),
    })
}

fn objective<T: Real>(p: &QpProblem<T>, x: &Array1<T>) -> T {
    x.dot(&p.hessian.dot(x)) * T::lit(0.5) + p.linear.dot(x)
}

/// Same as [`solve_qp`] but returns the multipliers. The outer `Result`
/// carries malformed-problem errors, the inner one a non-optimal status.
pub fn solve_qp_detailed<T: Real>(p: &QpProblem<T>) -> Result<std::result::Result<QpSolution<T>, SolveKind>> {
    p.validate()?;
    let n = p.linear.len();
    let m_in = p.a_ub.nrows();
    let m_eq = p.a_eq.nrows();

    // Starting point: the unconstrained minimizer when it is admissible,
    // otherwise any feasible vertex from the LP phase-one.
    let l = cholesky(p.hessian.view()).expect("validated");
    let x_free = crate::linalg::cholesky_solve(&l, &p.linear.mapv(|v| -v));
    let mut x = if m_eq == 0 && is_feasible(p, &x_free) {
        x_free
    } else {
        let lp = LpProblem::new(Array1::zeros(n))
            .with_inequalities(p.a_ub.clone(), p.b_ub.clone())
            .with_equalities(p.a_eq.clone(), p.b_eq.clone());
        let lp = if m_in == 0 && m_eq == 0 {
            return Ok(Ok(QpSolution {
                x: x_free,
                ineq_multipliers: Array1::zeros(0),
                eq_multipliers: Array1::zeros(0),
                iterations: 0,
            }));
        } else {
            lp
        };
        let st = solve_lp(&lp)?;
        match st.kind {
            SolveKind::Optimal => st.solution.expect("optimal carries solution"),
            SolveKind::Infeasible => return Ok(Err(SolveKind::Infeasible)),
            _ => return Ok(Err(SolveKind::NumericalFailure)),
        }
    };

    // Working set over the stacked constraint list: equalities first.
    let row = |k: usize| -> ndarray::ArrayView1<T> {
        if k < m_eq {
            p.a_eq.row(k)
        } else {
            p.a_ub.row(k - m_eq)
        }
    };
    let rhs = |k: usize| -> T {
        if k < m_eq {
            p.b_eq[k]
        } else {
            p.b_ub[k - m_eq]
        }
    };
    let act_tol = T::tol_or_eps(1e-9);
    let mut basis = OrthoBasis::new(n);
    let mut working: Vec<usize> = Vec::new();
    for k in 0..m_eq {
        if basis.try_add(row(k)) {
            working.push(k);
        }
    }
    for k in m_eq..m_eq + m_in {
        let r = row(k);
        let slack = rhs(k) - r.dot(&x);
        if slack.abs() <= act_tol * T::one().max(rhs(k).abs()) && basis.try_add(r) {
            working.push(k);
        }
    }

    let max_iter = (10 * (n + m_in + m_eq)).max(50);
    let mut iterations = 0;
    loop {
        if iterations > max_iter {
            return Ok(Err(SolveKind::NumericalFailure));
        }
        iterations += 1;
        let w = working.len();
        let mut kkt = Array2::<T>::zeros((n + w, n + w));
        kkt.slice_mut(s![..n, ..n]).assign(&p.hessian);
        for (i, &k) in working.iter().enumerate() {
            let r = row(k);
            kkt.slice_mut(s![n + i, ..n]).assign(&r);
            kkt.slice_mut(s![..n, n + i]).assign(&r);
        }
        let g = p.hessian.dot(&x) + &p.linear;
        let mut b = Array1::<T>::zeros(n + w);
        b.slice_mut(s![..n]).assign(&g.mapv(|v| -v));
        let Some(lu) = Lu::new(kkt.view()) else {
            return Ok(Err(SolveKind::NumericalFailure));
        };
        let sol = lu.solve_vec(&b);
        let step = sol.slice(s![..n]).to_owned();
        let lambda = sol.slice(s![n..]).to_owned();
        let xscale = x.iter().fold(T::one(), |m, v| m.max(v.abs()));
        let step_norm = step.iter().fold(T::zero(), |m, v| m.max(v.abs()));

        if step_norm <= T::pivot_tol() * xscale {
            // Stationary on the working set: check inequality multipliers.
            let mut worst: Option<(usize, T)> = None;
            for (i, &k) in working.iter().enumerate() {
                if k >= m_eq && lambda[i] < -T::tol_or_eps(1e-10)
                    && worst.is_none_or(|(_, v)| lambda[i] < v) {
                        worst = Some((i, lambda[i]));
                    }
            }
            match worst {
                Some((i, _)) => {
                    working.remove(i);
                    basis = OrthoBasis::new(n);
                    for &k in &working {
                        basis.try_add(row(k));
                    }
                }
                None => {
                    let mut ineq = Array1::zeros(m_in);
                    let mut eq = Array1::zeros(m_eq);
                    for (i, &k) in working.iter().enumerate() {
                        if k < m_eq {
                            eq[k] = lambda[i];
                        } else {
                            ineq[k - m_eq] = lambda[i].max(T::zero());
                        }
                    }
                    let sol = QpSolution {
                        x,
                        ineq_multipliers: ineq,
                        eq_multipliers: eq,
                        iterations,
                    };
                    return Ok(if self_check(p, &sol) {
                        Ok(sol)
                    } else {
                        Err(SolveKind::NumericalFailure)
                    });
                }
            }
        } else {
            let mut alpha = T::one();
            let mut blocking = None;
            for k in m_eq..m_eq + m_in {
                if working.contains(&k) {
                    continue;
                }
                let r = row(k);
                let ap = r.dot(&step);
                if ap > T::pivot_tol() * T::one().max(step_norm) {
                    let a_k = ((rhs(k) - r.dot(&x)) / ap).max(T::zero());
                    if a_k < alpha {
                        alpha = a_k;
                        blocking = Some(k);
                    }
                }
            }
            x = &x + &(&step * alpha);
            if let Some(k) = blocking {
                if basis.try_add(row(k)) {
                    working.push(k);
                }
            }
        }
    }
}

fn is_feasible<T: Real>(p: &QpProblem<T>, x: &Array1<T>) -> bool {
    p.a_ub
        .dot(x)
        .iter()
        .zip(p.b_ub.iter())
        .all(|(&l, &r)| l <= r + T::tol_or_eps(1e-9) * T::one().max(r.abs()))
}

fn self_check<T: Real>(p: &QpProblem<T>, s: &QpSolution<T>) -> bool {
    let eq_ok = p
        .a_eq
        .dot(&s.x)
        .iter()
        .zip(p.b_eq.iter())
        .all(|(&l, &r)| (l - r).abs() <= T::tol_or_eps(1e-8) * T::one().max(r.abs()));
    let grad = p.hessian.dot(&s.x) + &p.linear + p.a_ub.t().dot(&s.ineq_multipliers) + p.a_eq.t().dot(&s.eq_multipliers);
    let scale = p.linear.iter().chain(p.hessian.iter()).fold(T::one(), |m, v| m.max(v.abs()));
    let kkt_ok = grad.iter().all(|v| v.abs() <= T::tol_or_eps(1e-7) * scale);
    is_feasible(p, &s.x) && eq_ok && kkt_ok
}

/// Incremental Gram-Schmidt basis used to keep working-set rows independent.
struct OrthoBasis<T> {
    dim: usize,
    vecs: Vec<Array1<T>>,
}

impl<T: Real> OrthoBasis<T> {
    fn new(dim: usize) -> Self {
        Self { dim, vecs: Vec::new() }
    }

    fn try_add(&mut self, v: ndarray::ArrayView1<T>) -> bool {
        if self.vecs.len() >= self.dim {
            return false;
        }
        let norm0 = crate::linalg::norm2(v.iter().copied());
        if norm0 == T::zero() {
            return false;
        }
        let mut r = v.to_owned();
        for _ in 0..2 {
            for q in &self.vecs {
                let d = q.dot(&r);
                r = &r - &(q * d);
            }
        }
        let nr = crate::linalg::norm2(r.iter().copied());
        if nr <= T::tol_or_eps(1e-9) * norm0 {
            return false;
        }
        self.vecs.push(r / nr);
        true
    }
}
