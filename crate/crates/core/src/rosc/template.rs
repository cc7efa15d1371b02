//! Template generators for the inner-zonotope fit.
//!
//! Only the generator directions matter to the log objective (a longer
//! generator just gets a smaller scale), except that scales are capped at
//! one. Templates are therefore stretched to the largest length that fits
//! the exact polytope around its Chebyshev center, so the cap does not bind
//! artificially.

use ndarray::{s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::FamilyConfig;
use crate::linalg::{norm2, Lu};
use crate::optim::{solve_lp, LpProblem, SolveKind};
use crate::setgeom::{HPolytope, VertexModels, Zonotope};
use crate::{Error, Real, Result};

/// Templates are capped at `TEMPLATE_CAP_FACTOR · (n + m)` generators.
pub const TEMPLATE_CAP_FACTOR: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplatePolicy {
    /// Identity generators in `(x, u)` space, used as is.
    Axis,
    /// Previous level's generators pulled back through the nominal model,
    /// plus one input generator per input coupled through the same model.
    Inherit,
    /// `Inherit` plus state-axis generators.
    #[default]
    Mixed,
}

/// Mean of the vertex models; for sign-enumerated vertices this is the
/// center of the model set.
pub fn nominal_model<T: Real>(models: &VertexModels<T>) -> (Array2<T>, Array2<T>) {
    let k = T::from_usize(models.len()).expect("count fits");
    let (n, m) = (models.state_dim(), models.input_dim());
    let mut a = Array2::zeros((n, n));
    let mut b = Array2::zeros((n, m));
    for (ai, bi) in models.vertices() {
        a += ai;
        b += bi;
    }
    (a / k, b / k)
}

/// Template directions for the next level, given the previous level's
/// projection. With `Â` invertible, a previous generator `g` becomes
/// `(Â⁻¹g, 0)` and input `k` becomes `(−Â⁻¹B̂e_k, e_k)`: the backward image
/// of a zonotope under the nominal dynamics. Without an invertible `Â` the
/// state parts are left untransformed.
pub fn make_template<T: Real>(
    prev_projected: &Zonotope<T>,
    cfg: &FamilyConfig<T>,
    nominal: &(Array2<T>, Array2<T>),
    policy: TemplatePolicy,
) -> Result<Zonotope<T>> {
    let n = cfg.state_dim();
    let m = cfg.input_dim();
    crate::error::check_dim("template state dimension", n, prev_projected.dim())?;
    let dim = n + m;
    if policy == TemplatePolicy::Axis {
        return Zonotope::new(Array1::zeros(dim), Array2::eye(dim));
    }
    let cap = TEMPLATE_CAP_FACTOR * dim;
    let (a, b) = nominal;
    let lu = Lu::new(a.view());
    let pull = |v: &Array1<T>| -> Array1<T> {
        match &lu {
            Some(lu) => lu.solve_vec(v),
            None => v.clone(),
        }
    };

    let mut cols: Vec<Array1<T>> = Vec::new();
    let push = |cols: &mut Vec<Array1<T>>, v: Array1<T>| {
        if cols.len() < cap && !v.iter().all(|x| *x == T::zero()) && !cols.iter().any(|c| parallel(c, &v)) {
            cols.push(v);
        }
    };
    for k in 0..m {
        let mut v = Array1::zeros(dim);
        let bk = b.column(k).to_owned();
        if lu.is_some() {
            v.slice_mut(s![..n]).assign(&pull(&bk).mapv(|x| -x));
        }
        v[n + k] = T::one();
        push(&mut cols, v);
    }
    let reserve = if policy == TemplatePolicy::Mixed { n } else { 0 };
    let mut prev: Vec<Array1<T>> = prev_projected.generators().columns().into_iter().map(|c| c.to_owned()).collect();
    prev.sort_by(|x, y| {
        let (nx, ny) = (norm2(x.iter().copied()), norm2(y.iter().copied()));
        ny.partial_cmp(&nx).unwrap_or(std::cmp::Ordering::Equal)
    });
    for g in prev {
        if cols.len() + reserve >= cap {
            break;
        }
        let mut v = Array1::zeros(dim);
        v.slice_mut(s![..n]).assign(&pull(&g));
        push(&mut cols, v);
    }
    if policy == TemplatePolicy::Mixed {
        for i in 0..n {
            let mut v = Array1::zeros(dim);
            v[i] = T::one();
            push(&mut cols, v);
        }
    }
    let views: Vec<_> = cols.iter().map(|c| c.view().insert_axis(Axis(1))).collect();
    let g = ndarray::concatenate(Axis(1), &views).map_err(|e| Error::Numerical(e.to_string()))?;
    Zonotope::new(Array1::zeros(dim), g)
}

fn parallel<T: Real>(a: &Array1<T>, b: &Array1<T>) -> bool {
    let na = norm2(a.iter().copied());
    let nb = norm2(b.iter().copied());
    (a.dot(b).abs() / (na * nb)) > T::one() - T::lit(1e-9)
}

/// Rescales each generator to the longest segment through the Chebyshev
/// center of `exact` that stays inside it. The axis policy is left as is.
pub fn stretch_template<T: Real>(
    template: &Zonotope<T>,
    exact: &HPolytope<T>,
    policy: TemplatePolicy,
) -> Result<Zonotope<T>> {
    if policy == TemplatePolicy::Axis {
        return Ok(template.clone());
    }
    let center = chebyshev_center(exact)?;
    let slack = exact.offsets() - &exact.normals().dot(&center);
    let hg = exact.normals().dot(template.generators());
    let mut g = template.generators().clone();
    for (l, mut col) in g.columns_mut().into_iter().enumerate() {
        let mut len = T::infinity();
        for r in 0..exact.num_rows() {
            let a = hg[[r, l]].abs();
            if a > T::zero() {
                len = len.min(slack[r] / a);
            }
        }
        if !len.is_finite() || len <= T::zero() {
            return Err(Error::Numerical("template generator has no room in the exact set".into()));
        }
        col *= len;
    }
    Zonotope::new(center, g)
}

/// Center of the largest ball inside a polytope with unit-norm rows.
fn chebyshev_center<T: Real>(p: &HPolytope<T>) -> Result<Array1<T>> {
    let (q, n) = p.normals().dim();
    let mut a = Array2::zeros((q, n + 1));
    a.slice_mut(s![.., ..n]).assign(p.normals());
    for (r, row) in p.normals().rows().into_iter().enumerate() {
        a[[r, n]] = norm2(row.iter().copied());
    }
    let mut obj = Array1::zeros(n + 1);
    obj[n] = -T::one();
    let mut lo = Array1::from_elem(n + 1, T::neg_infinity());
    lo[n] = T::zero();
    let st = solve_lp(&LpProblem::new(obj).with_inequalities(a, p.offsets().clone()).with_bounds(lo, Array1::from_elem(n + 1, T::infinity())))?;
    match st.kind {
        SolveKind::Optimal => {
            let z = st.solution.expect("optimal");
            if z[n] <= T::tol_or_eps(1e-10) {
                return Err(Error::Infeasible("exact set has no interior"));
            }
            Ok(z.slice(s![..n]).to_owned())
        }
        SolveKind::Infeasible => Err(Error::Infeasible("exact set is empty")),
        other => Err(Error::Numerical(format!("Chebyshev center LP ended {other:?}"))),
    }
}
