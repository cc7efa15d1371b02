//! Online set-theoretic MPC.
//!
//! The data-driven controller descends the inner-zonotope family: find the
//! smallest level containing `x`, then pick the cheapest `u` with `(x, u)`
//! in that level's augmented zonotope. The QP runs over `(u, β)` with
//! `c + Gβ = (x, u)`, `β ∈ [−1, 1]^p`, so no H-rep is needed online.
//!
//! [`ModelBasedController`] is the same scheme for a known model, driven by
//! the exact (oracle) family; it exists for comparison.

use ndarray::{s, Array1, Array2};

use crate::error::check_dim;
use crate::linalg::cholesky;
use crate::optim::{solve_qp, QpProblem, SolveKind};
use crate::rosc::{OracleFamily, RoscFamily};
use crate::setgeom::{HPolytope, Zonotope};
use crate::{Error, Real, Result};

/// Membership tolerance of the set-index search.
pub const MEMBERSHIP_TOL: f64 = 1e-8;
/// Tolerance for checking the returned input against its constraints.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Weight on `‖β‖²` that makes the online QP strictly convex. `β` does not
/// enter the cost, so this only picks one of several equal-cost `β`.
const BETA_REG: f64 = 1e-9;

/// `J(u) = ½ uᵀRu + qᵀu`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost<T> {
    pub r: Array2<T>,
    pub linear: Option<Array1<T>>,
}

impl<T: Real> QuadraticCost<T> {
    pub fn new(r: Array2<T>) -> Result<Self> {
        let c = Self { r, linear: None };
        c.validate()?;
        Ok(c)
    }

    pub fn with_linear(mut self, q: Array1<T>) -> Result<Self> {
        self.linear = Some(q);
        self.validate()?;
        Ok(self)
    }

    /// `½ uᵀu`, the pure control-effort cost.
    pub fn effort(m: usize) -> Self {
        Self {
            r: Array2::eye(m),
            linear: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        check_dim("cost matrix columns", self.r.nrows(), self.r.ncols())?;
        if let Some(q) = &self.linear {
            check_dim("cost linear term", self.r.nrows(), q.len())?;
        }
        if cholesky(self.r.view()).is_none() {
            return Err(Error::InvalidArgument("cost matrix R is not positive definite".into()));
        }
        Ok(())
    }

    pub fn eval(&self, u: &Array1<T>) -> T {
        let quad = u.dot(&self.r.dot(u)) * T::lit(0.5);
        quad + self.linear.as_ref().map_or(T::zero(), |q| q.dot(u))
    }

    fn linear_or_zero(&self) -> Array1<T> {
        self.linear.clone().unwrap_or_else(|| Array1::zeros(self.dim()))
    }
}

/// Control law used once the state is in the terminal set.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminalMode<T> {
    /// `u = −Kx`.
    Gain(Array2<T>),
    /// The level-1 QP; keeps the state in the terminal set whenever the
    /// terminal set lies inside level 1.
    QpLevel1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState<T> {
    pub family: RoscFamily<T>,
    pub cost: QuadraticCost<T>,
    pub terminal_mode: TerminalMode<T>,
    pub last_index: Option<usize>,
}

impl<T: Real> ControllerState<T> {
    pub fn new(family: RoscFamily<T>, cost: QuadraticCost<T>, terminal_mode: TerminalMode<T>) -> Result<Self> {
        let n = family.config.state_dim();
        let m = family.config.input_dim();
        cost.validate()?;
        check_dim("cost dimension", m, cost.dim())?;
        if let TerminalMode::Gain(k) = &terminal_mode {
            check_dim("gain rows", m, k.nrows())?;
            check_dim("gain columns", n, k.ncols())?;
        }
        Ok(Self {
            family,
            cost,
            terminal_mode,
            last_index: None,
        })
    }
}

/// Smallest `j` with `x ∈ T̂ʲ_z`; `0` is the terminal set.
pub fn membership_index<T: Real>(x: &Array1<T>, family: &RoscFamily<T>) -> Result<usize> {
    check_dim("membership_index", family.terminal.dim(), x.len())?;
    let tol = T::lit(MEMBERSHIP_TOL);
    for j in 0..=family.len() {
        let z = family.projected(j).expect("index in range");
        if z.contains_point(x.view(), tol)? {
            return Ok(j);
        }
    }
    Err(Error::OutsideFamily)
}

/// `argmin J(u)` subject to `(x, u) ∈ Ξ̂ʲ_z`, for `j ≥ 1`.
pub fn compute_control<T: Real>(x: &Array1<T>, j: usize, state: &ControllerState<T>) -> Result<Array1<T>> {
    let level = state
        .family
        .level(j)
        .ok_or_else(|| Error::InvalidArgument(format!("level {j} is not in the family (1..={})", state.family.len())))?;
    inner_zonotope_control(x, &level.inner, &state.cost, &state.family.config.input_constraints)
}

fn inner_zonotope_control<T: Real>(
    x: &Array1<T>,
    inner: &Zonotope<T>,
    cost: &QuadraticCost<T>,
    u_set: &HPolytope<T>,
) -> Result<Array1<T>> {
    let n = x.len();
    let m = cost.dim();
    check_dim("augmented zonotope dimension", n + m, inner.dim())?;
    let g = inner.generators();
    let c = inner.center();
    let p = g.ncols();
    let nv = m + p;

    let mut h = Array2::zeros((nv, nv));
    h.slice_mut(s![..m, ..m]).assign(&cost.r);
    for i in m..nv {
        h[[i, i]] = T::lit(BETA_REG);
    }
    let mut q = Array1::zeros(nv);
    q.slice_mut(s![..m]).assign(&cost.linear_or_zero());

    // G_x β = x − c_x,   G_u β − u = −c_u
    let mut a_eq = Array2::zeros((n + m, nv));
    a_eq.slice_mut(s![.., m..]).assign(g);
    for i in 0..m {
        a_eq[[n + i, i]] = -T::one();
    }
    let mut b_eq = Array1::zeros(n + m);
    b_eq.slice_mut(s![..n]).assign(&(x - &c.slice(s![..n])));
    b_eq.slice_mut(s![n..]).assign(&c.slice(s![n..]).mapv(|v| -v));

    let mut a_ub = Array2::zeros((2 * p, nv));
    for k in 0..p {
        a_ub[[k, m + k]] = T::one();
        a_ub[[p + k, m + k]] = -T::one();
    }
    let b_ub = Array1::from_elem(2 * p, T::one());

    let st = solve_qp(&QpProblem::new(h, q).with_inequalities(a_ub, b_ub).with_equalities(a_eq, b_eq))?;
    let z = match st.kind {
        SolveKind::Optimal => st.solution.expect("optimal"),
        SolveKind::Infeasible => return Err(Error::Infeasible("online control QP")),
        other => return Err(Error::Numerical(format!("online control QP ended {other:?}"))),
    };
    let u = z.slice(s![..m]).to_owned();
    let tol = T::lit(FEASIBILITY_TOL);
    let mut xu = Array1::zeros(n + m);
    xu.slice_mut(s![..n]).assign(x);
    xu.slice_mut(s![n..]).assign(&u);
    if !inner.contains_point(xu.view(), tol)? || !u_set.contains_point(u.view(), tol)? {
        return Err(Error::Numerical("online control QP returned an infeasible input".into()));
    }
    Ok(u)
}

fn gain_control<T: Real>(x: &Array1<T>, k: &Array2<T>, u_set: &HPolytope<T>) -> Result<Array1<T>> {
    check_dim("gain columns", k.ncols(), x.len())?;
    let u = k.dot(x).mapv(|v| -v);
    if !u_set.contains_point(u.view(), T::lit(FEASIBILITY_TOL))? {
        return Err(Error::InputViolation(format!("{u}")));
    }
    Ok(u)
}

/// Terminal law for `x ∈ T⁰`.
pub fn terminal_control<T: Real>(x: &Array1<T>, state: &ControllerState<T>) -> Result<Array1<T>> {
    match &state.terminal_mode {
        TerminalMode::Gain(k) => gain_control(x, k, &state.family.config.input_constraints),
        TerminalMode::QpLevel1 => compute_control(x, 1, state),
    }
}

/// One step of the data-driven controller: returns `u` and the index used.
pub fn step<T: Real>(x: &Array1<T>, state: &mut ControllerState<T>) -> Result<(Array1<T>, usize)> {
    let j = membership_index(x, &state.family)?;
    let u = if j == 0 {
        terminal_control(x, state)?
    } else {
        compute_control(x, j, state)?
    };
    state.last_index = Some(j);
    Ok((u, j))
}

/// Set-theoretic MPC with a known model `(A, B)` over the exact family.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBasedController<T> {
    pub a: Array2<T>,
    pub b: Array2<T>,
    pub family: OracleFamily<T>,
    pub input_constraints: HPolytope<T>,
    pub cost: QuadraticCost<T>,
    pub terminal_mode: TerminalMode<T>,
    /// `Tʲ ⊖ W` for `j = 0..=N`.
    tightened: Vec<HPolytope<T>>,
    pub last_index: Option<usize>,
}

impl<T: Real> ModelBasedController<T> {
    pub fn new(
        a: Array2<T>,
        b: Array2<T>,
        family: OracleFamily<T>,
        input_constraints: HPolytope<T>,
        disturbance: &Zonotope<T>,
        cost: QuadraticCost<T>,
        terminal_mode: TerminalMode<T>,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        check_dim("model A columns", n, a.ncols())?;
        check_dim("model B rows", n, b.nrows())?;
        check_dim("family dimension", n, family.terminal.dim())?;
        check_dim("input constraint dimension", m, input_constraints.dim())?;
        check_dim("cost dimension", m, cost.dim())?;
        cost.validate()?;
        if let TerminalMode::Gain(k) = &terminal_mode {
            check_dim("gain rows", m, k.nrows())?;
            check_dim("gain columns", n, k.ncols())?;
        }
        let tightened = (0..=family.len())
            .map(|j| family.set(j).expect("index in range").tighten(disturbance))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            a,
            b,
            family,
            input_constraints,
            cost,
            terminal_mode,
            tightened,
            last_index: None,
        })
    }

    pub fn membership_index(&self, x: &Array1<T>) -> Result<usize> {
        check_dim("membership_index", self.a.nrows(), x.len())?;
        let tol = T::lit(MEMBERSHIP_TOL);
        for j in 0..=self.family.len() {
            if self.family.set(j).expect("index in range").contains_point(x.view(), tol)? {
                return Ok(j);
            }
        }
        Err(Error::OutsideFamily)
    }

    /// `argmin J(u)` s.t. `u ∈ U`, `Ax + Bu ∈ Tᵗ ⊖ W`.
    pub fn control_into(&self, x: &Array1<T>, target: usize) -> Result<Array1<T>> {
        let t = self
            .tightened
            .get(target)
            .ok_or_else(|| Error::InvalidArgument(format!("target level {target} is not in the family")))?;
        let (hu, hu_off) = (self.input_constraints.normals(), self.input_constraints.offsets());
        let ht = t.normals();
        let a_ub = ndarray::concatenate![ndarray::Axis(0), ht.dot(&self.b), hu.view()];
        let b_ub = ndarray::concatenate![ndarray::Axis(0), t.offsets() - &ht.dot(&self.a.dot(x)), hu_off.view()];
        let st = solve_qp(&QpProblem::new(self.cost.r.clone(), self.cost.linear_or_zero()).with_inequalities(a_ub, b_ub))?;
        match st.kind {
            SolveKind::Optimal => Ok(st.solution.expect("optimal")),
            SolveKind::Infeasible => Err(Error::Infeasible("model-based control QP")),
            other => Err(Error::Numerical(format!("model-based control QP ended {other:?}"))),
        }
    }

    pub fn terminal_control(&self, x: &Array1<T>) -> Result<Array1<T>> {
        match &self.terminal_mode {
            TerminalMode::Gain(k) => gain_control(x, k, &self.input_constraints),
            TerminalMode::QpLevel1 => self.control_into(x, 0),
        }
    }

    pub fn step(&mut self, x: &Array1<T>) -> Result<(Array1<T>, usize)> {
        let j = self.membership_index(x)?;
        let u = if j == 0 {
            self.terminal_control(x)?
        } else {
            self.control_into(x, j - 1)?
        };
        self.last_index = Some(j);
        Ok((u, j))
    }
}

/// Free-function form of [`ModelBasedController::step`].
pub fn model_based_step<T: Real>(x: &Array1<T>, controller: &mut ModelBasedController<T>) -> Result<(Array1<T>, usize)> {
    controller.step(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rosc::{compute_family, compute_oracle_family, FamilyConfig};
    use crate::setgeom::VertexModels;
    use ndarray::array;

    // Scalar integrator x⁺ = x + u + w, |u| ≤ 1, |w| ≤ 0.1.
    fn integrator() -> (FamilyConfig<f64>, VertexModels<f64>, Zonotope<f64>) {
        let cfg = FamilyConfig::new(
            HPolytope::from_box(&array![-10.0], &array![10.0]).unwrap(),
            HPolytope::from_box(&array![-1.0], &array![1.0]).unwrap(),
            Zonotope::new(array![0.0], array![[0.1]]).unwrap(),
        )
        .unwrap();
        let vm = VertexModels::new(vec![(array![[1.0]], array![[1.0]])]).unwrap();
        let t0 = Zonotope::new(array![0.0], array![[0.5]]).unwrap();
        (cfg, vm, t0)
    }

    fn state() -> ControllerState<f64> {
        let (cfg, vm, t0) = integrator();
        let fam = compute_family(&vm, &t0, &cfg, 5).unwrap();
        ControllerState::new(fam, QuadraticCost::effort(1), TerminalMode::QpLevel1).unwrap()
    }

    fn upper(st: &ControllerState<f64>, j: usize) -> f64 {
        let z = st.family.projected(j).unwrap();
        z.support(array![1.0].view()).unwrap()
    }

    #[test]
    fn index_of_terminal_center_is_zero() {
        let st = state();
        assert_eq!(membership_index(&array![0.0], &st.family).unwrap(), 0);
    }

    #[test]
    fn index_of_level_center() {
        let st = state();
        // levels grow strictly up to 4, so the top of level 3 is first
        // contained at level 3
        let x = array![upper(&st, 3) - 1e-6];
        assert!(x[0] > upper(&st, 2));
        assert_eq!(membership_index(&x, &st.family).unwrap(), 3);
    }

    #[test]
    fn outside_family_errors() {
        let st = state();
        assert_eq!(membership_index(&array![9.9], &st.family), Err(Error::OutsideFamily));
    }

    #[test]
    fn step_descends_one_level() {
        let mut st = state();
        let x = array![upper(&st, 4) * 0.999];
        assert!(x[0] > upper(&st, 3));
        let (u, j) = step(&x, &mut st).unwrap();
        assert_eq!(j, 4);
        assert_eq!(st.last_index, Some(4));
        assert!(u[0].abs() <= 1.0 + 1e-9);
        for w in [-0.1, 0.0, 0.1] {
            let next = &x + &u + w;
            assert!(membership_index(&next, &st.family).unwrap() <= 3);
        }
    }

    #[test]
    fn terminal_modes_at_origin() {
        let mut st = state();
        assert!(terminal_control(&array![0.0], &st).unwrap()[0].abs() < 1e-7);
        st.terminal_mode = TerminalMode::Gain(array![[0.5]]);
        assert_eq!(terminal_control(&array![0.0], &st).unwrap(), array![0.0]);
        assert!(matches!(terminal_control(&array![4.0], &st), Err(Error::InputViolation(_))));
    }

    #[test]
    fn gain_dimension_checked() {
        let st = state();
        let err = ControllerState::new(st.family, QuadraticCost::effort(1), TerminalMode::Gain(array![[1.0, 2.0]]));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        assert!(QuadraticCost::new(array![[-1.0]]).is_err());
    }

    #[test]
    fn model_based_descends() {
        let (cfg, _, t0) = integrator();
        let t0h = t0.to_hpoly().unwrap();
        let of = compute_oracle_family(
            &array![[1.0]],
            &array![[1.0]],
            &t0h,
            &cfg.state_constraints,
            &cfg.input_constraints,
            &cfg.disturbance,
            4,
        )
        .unwrap();
        let mut c = ModelBasedController::new(
            array![[1.0]],
            array![[1.0]],
            of,
            cfg.input_constraints.clone(),
            &cfg.disturbance,
            QuadraticCost::effort(1),
            TerminalMode::QpLevel1,
        )
        .unwrap();
        // Tʲ = [−(0.4 + 0.9j + 0.1), …]; 2.0 is first reached at j = 2.
        let (u, j) = model_based_step(&array![2.0], &mut c).unwrap();
        assert_eq!(j, 2);
        // cheapest input that lands in T¹ ⊖ W = [−1.3, 1.3]
        assert!((u[0] + 0.7).abs() < 1e-9);
        let (u0, j0) = c.step(&array![0.0]).unwrap();
        assert_eq!((u0[0], j0), (0.0, 0));
        assert_eq!(c.step(&array![20.0]), Err(Error::OutsideFamily));
    }
}
