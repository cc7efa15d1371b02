//! Offline part of the set-theoretic MPC: backward recursion of robust
//! one-step controllable (ROSC) sets.
//!
//! Each level is computed in the augmented `(x, u)` space. For every vertex
//! model `(Âᵢ, B̂ᵢ)` the pairs that keep `Âᵢx + B̂ᵢu + w` inside the previous
//! level for all `w ∈ W` form a polytope; the intersection over all vertex
//! models is the exact set, a template zonotope is fitted inside it and the
//! projection onto `x` seeds the next level. Only zonotopes are ever
//! projected.

mod oracle;
mod template;

use ndarray::{s, Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::optim::{solve_weighted_log, InnerObjective};
use crate::setgeom::{HPolytope, VertexModels, Zonotope};
use crate::{Error, Real, Result};

pub use oracle::{compute_oracle_family, model_based_backward_step, OracleFamily, FM_ROW_CAP};
pub use template::{make_template, nominal_model, stretch_template, TemplatePolicy, TEMPLATE_CAP_FACTOR};

/// Tolerance of the inner-in-exact check done before a level is accepted.
pub const INNER_CHECK_TOL: f64 = 1e-8;

/// Everything a family depends on besides the models and the seed set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FamilyConfig<T> {
    pub state_constraints: HPolytope<T>,
    pub input_constraints: HPolytope<T>,
    pub disturbance: Zonotope<T>,
    #[serde(default)]
    pub template: TemplatePolicy,
    /// Weights of the inner-zonotope objective, one per template generator;
    /// `None` means all ones.
    #[serde(default)]
    pub weights: Option<Vec<T>>,
    #[serde(default)]
    pub objective: InnerObjective,
}

impl<T: Real> FamilyConfig<T> {
    pub fn new(x: HPolytope<T>, u: HPolytope<T>, w: Zonotope<T>) -> Result<Self> {
        check_dim("disturbance dimension", x.dim(), w.dim())?;
        Ok(Self {
            state_constraints: x,
            input_constraints: u,
            disturbance: w,
            template: TemplatePolicy::default(),
            weights: None,
            objective: InnerObjective::default(),
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_constraints.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.input_constraints.dim()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LevelDiagnostics<T> {
    /// Rows stacked over all vertex models, before merging duplicates.
    pub assembled_rows: usize,
    /// Rows of the exact polytope after merging duplicates.
    pub exact_rows: usize,
    pub template_generators: usize,
    pub scales: Vec<T>,
    pub objective: T,
    pub used_fallback: bool,
}

/// One level `j`: the exact augmented polytope `Ξ̂ʲ_AB`, its inner zonotope
/// `Ξ̂ʲ_z` and the projection `T̂ʲ_z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AugmentedRosc<T> {
    pub index: usize,
    /// Not serialized; absent on families loaded from disk.
    #[serde(skip)]
    pub hpoly: Option<HPolytope<T>>,
    pub inner: Zonotope<T>,
    pub projected: Zonotope<T>,
    pub diagnostics: LevelDiagnostics<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RoscFamily<T> {
    pub terminal: Zonotope<T>,
    pub levels: Vec<AugmentedRosc<T>>,
    pub config: FamilyConfig<T>,
    /// Set when the recursion stopped at this (empty) level before reaching
    /// the requested depth.
    #[serde(default)]
    pub truncated_at: Option<usize>,
}

impl<T: Real> RoscFamily<T> {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// `T̂ʲ_z`, with `j = 0` the terminal set.
    pub fn projected(&self, j: usize) -> Option<&Zonotope<T>> {
        if j == 0 {
            Some(&self.terminal)
        } else {
            self.levels.get(j - 1).map(|l| &l.projected)
        }
    }

    pub fn level(&self, j: usize) -> Option<&AugmentedRosc<T>> {
        j.checked_sub(1).and_then(|i| self.levels.get(i))
    }
}

/// H-rep of one vertex model's augmented ROSC polytope:
///
/// ```text
///   [ H_x      0     ]        [ h_x ]
///   [ H_T Â    H_T B̂ ] z  ≤  [ h̃_T ]     h̃_T = h_T − support(W, H_T)
///   [ 0        H_u   ]        [ h_u ]
/// ```
pub fn augmented_halfspaces<T: Real>(
    model: (&Array2<T>, &Array2<T>),
    t_prev: &HPolytope<T>,
    x: &HPolytope<T>,
    u: &HPolytope<T>,
    w: &Zonotope<T>,
) -> Result<HPolytope<T>> {
    let tightened = t_prev.tighten(w)?;
    assemble_block(model, &tightened, x, u)
}

fn assemble_block<T: Real>(
    (a, b): (&Array2<T>, &Array2<T>),
    tightened: &HPolytope<T>,
    x: &HPolytope<T>,
    u: &HPolytope<T>,
) -> Result<HPolytope<T>> {
    let n = x.dim();
    let m = u.dim();
    check_dim("model A rows", n, a.nrows())?;
    check_dim("model A cols", n, a.ncols())?;
    check_dim("model B rows", n, b.nrows())?;
    check_dim("model B cols", m, b.ncols())?;
    check_dim("previous level dimension", n, tightened.dim())?;
    let (qx, qt, qu) = (x.num_rows(), tightened.num_rows(), u.num_rows());
    let mut c = Array2::<T>::zeros((qx + qt + qu, n + m));
    let mut d = Array1::<T>::zeros(qx + qt + qu);
    c.slice_mut(s![..qx, ..n]).assign(x.normals());
    d.slice_mut(s![..qx]).assign(x.offsets());
    let ht = tightened.normals();
    c.slice_mut(s![qx..qx + qt, ..n]).assign(&ht.dot(a));
    c.slice_mut(s![qx..qx + qt, n..]).assign(&ht.dot(b));
    d.slice_mut(s![qx..qx + qt]).assign(tightened.offsets());
    c.slice_mut(s![qx + qt.., n..]).assign(u.normals());
    d.slice_mut(s![qx + qt..]).assign(u.offsets());
    HPolytope::new(c, d)
}

/// Exact `Ξ̂ʲ_AB`: the augmented polytopes of all vertex models, stacked in
/// vertex order, with duplicate rows merged. Returns the polytope and the
/// number of rows before merging.
pub fn exact_level<T: Real>(
    models: &VertexModels<T>,
    t_prev: &HPolytope<T>,
    cfg: &FamilyConfig<T>,
) -> Result<(HPolytope<T>, usize)> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("no vertex models".into()));
    }
    let tightened = t_prev.tighten(&cfg.disturbance)?;
    let blocks: Vec<HPolytope<T>> = models
        .vertices()
        .par_iter()
        .map(|(a, b)| assemble_block((a, b), &tightened, &cfg.state_constraints, &cfg.input_constraints))
        .collect::<Result<_>>()?;
    let stacked = HPolytope::intersect(&blocks, false)?;
    let rows = stacked.num_rows();
    Ok((stacked.normalized()?, rows))
}

/// Fits `template` inside `exact` and projects onto the state coordinates.
fn inner_level<T: Real>(
    index: usize,
    exact: HPolytope<T>,
    assembled_rows: usize,
    template: &Zonotope<T>,
    cfg: &FamilyConfig<T>,
) -> Result<AugmentedRosc<T>> {
    let n = cfg.state_dim();
    check_dim("template dimension", exact.dim(), template.dim())?;
    let weights = cfg.weights.as_ref().map(|w| Array1::from(w.clone()));
    let sol = solve_weighted_log(
        template.generators(),
        weights.as_ref(),
        exact.normals(),
        exact.offsets(),
        cfg.objective,
    )
    .map_err(|e| match e {
        Error::Infeasible(_) => Error::LevelInfeasible { level: index },
        other => other,
    })?;
    let gens = template.generators() * &sol.scales.view().insert_axis(ndarray::Axis(0));
    let inner = Zonotope::new(sol.center.clone(), gens)?;
    if !inner.is_subset_of(&exact, T::lit(INNER_CHECK_TOL))? {
        return Err(Error::Numerical(format!("inner zonotope of level {index} leaves the exact set")));
    }
    let projected = inner.project(&(0..n).collect::<Vec<_>>())?;
    let diagnostics = LevelDiagnostics {
        assembled_rows,
        exact_rows: exact.num_rows(),
        template_generators: template.num_generators(),
        scales: sol.scales.to_vec(),
        objective: sol.objective,
        used_fallback: sol.used_fallback,
    };
    Ok(AugmentedRosc {
        index,
        hpoly: Some(exact),
        inner,
        projected,
        diagnostics,
    })
}

/// One backward step with a given template.
pub fn backward_step<T: Real>(
    models: &VertexModels<T>,
    t_prev: &HPolytope<T>,
    cfg: &FamilyConfig<T>,
    template: &Zonotope<T>,
    index: usize,
) -> Result<AugmentedRosc<T>> {
    let (exact, rows) = exact_level(models, t_prev, cfg)?;
    inner_level(index, exact, rows, template, cfg)
}

/// Runs the recursion for `levels` steps from `terminal`. An empty level
/// stops the recursion and the partial family is returned; failing at the
/// very first level is an error.
pub fn compute_family<T: Real>(
    models: &VertexModels<T>,
    terminal: &Zonotope<T>,
    cfg: &FamilyConfig<T>,
    levels: usize,
) -> Result<RoscFamily<T>> {
    if levels == 0 {
        return Err(Error::InvalidArgument("family needs at least one level".into()));
    }
    check_dim("terminal set dimension", cfg.state_dim(), terminal.dim())?;
    check_dim("vertex model state dimension", cfg.state_dim(), models.state_dim())?;
    check_dim("vertex model input dimension", cfg.input_dim(), models.input_dim())?;
    if !terminal.is_subset_of(&cfg.state_constraints, T::lit(crate::DEFAULT_TOL))? {
        return Err(Error::InvalidArgument("terminal set is not inside the state constraints".into()));
    }
    let nominal = nominal_model(models);
    let mut out: Vec<AugmentedRosc<T>> = Vec::with_capacity(levels);
    let mut truncated_at = None;
    for j in 1..=levels {
        let prev = out.last().map_or(terminal, |l| &l.projected);
        let step = prev.to_hpoly().and_then(|t_prev| {
            let (exact, rows) = exact_level(models, &t_prev, cfg)?;
            let template = make_template(prev, cfg, &nominal, cfg.template)?;
            let template = stretch_template(&template, &exact, cfg.template)
                .map_err(|e| if matches!(e, Error::Infeasible(_)) { Error::LevelInfeasible { level: j } } else { e })?;
            inner_level(j, exact, rows, &template, cfg)
        });
        match step {
            Ok(level) => {
                log::debug!(
                    "level {j}: {} rows, scales {:?}",
                    level.diagnostics.exact_rows,
                    level.diagnostics.scales
                );
                out.push(level);
            }
            Err(Error::LevelInfeasible { level }) if j > 1 => {
                log::warn!("ROSC level {level} is empty; keeping the {} levels computed so far", out.len());
                truncated_at = Some(level);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RoscFamily {
        terminal: terminal.clone(),
        levels: out,
        config: cfg.clone(),
        truncated_at,
    })
}

/// True when the terminal seed lies in the first level's projection, so the
/// first level's control law keeps it invariant.
pub fn check_terminal_feasibility<T: Real>(terminal: &Zonotope<T>, level1: &AugmentedRosc<T>) -> Result<bool> {
    check_dim("terminal feasibility", level1.projected.dim(), terminal.dim())?;
    terminal.is_subset_of(&level1.projected.to_hpoly()?, T::lit(crate::DEFAULT_TOL))
}

/// Walks the recursion from `seed` until a set is contained in its own
/// successor level, `T̂ʲ ⊆ T̂ʲ⁺¹`. That set is robust control invariant for
/// every vertex model and can serve as the terminal set. Returns the set
/// and the number of levels skipped (`0` when the seed itself passes).
pub fn settle_terminal<T: Real>(
    models: &VertexModels<T>,
    seed: &Zonotope<T>,
    cfg: &FamilyConfig<T>,
    max_shift: usize,
) -> Result<(Zonotope<T>, usize)> {
    let mut current = seed.clone();
    for shift in 0..=max_shift {
        let fam = compute_family(models, &current, cfg, 1)?;
        let level = &fam.levels[0];
        if check_terminal_feasibility(&current, level)? {
            return Ok((current, shift));
        }
        current = level.projected.clone();
    }
    Err(Error::Numerical(format!(
        "no level within {max_shift} steps of the seed contains its predecessor"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn boxes() -> (HPolytope<f64>, HPolytope<f64>) {
        (
            HPolytope::from_box(&array![-10.0, -10.0], &array![10.0, 10.0]).unwrap(),
            HPolytope::from_box(&array![-3.0], &array![3.0]).unwrap(),
        )
    }

    #[test]
    fn identity_dynamics_blocks() {
        let (x, u) = boxes();
        let w = Zonotope::point(array![0.0, 0.0]).unwrap();
        let a = Array2::eye(2);
        let b = Array2::zeros((2, 1));
        let h = augmented_halfspaces((&a, &b), &x, &x, &u, &w).unwrap();
        assert_eq!(h.num_rows(), 10);
        assert_eq!(h.normals().slice(s![4..8, ..2]), x.normals());
        assert_eq!(h.offsets().slice(s![4..8]), x.offsets());
        assert!(h.normals().slice(s![..8, 2]).iter().all(|v| *v == 0.0));
        assert_eq!(h.normals().slice(s![8.., 2]), u.normals().column(0));
    }

    #[test]
    fn middle_block_is_tightened() {
        let (x, u) = boxes();
        let w = Zonotope::new(array![0.0, 0.0], Array2::eye(2) * 0.005).unwrap();
        let a = array![[0.7969, -0.2247], [0.1798, 0.9767]];
        let b = array![[0.1271], [0.0132]];
        let h = augmented_halfspaces((&a, &b), &x, &x, &u, &w).unwrap();
        for r in 4..8 {
            assert!((h.offsets()[r] - 9.995).abs() < 1e-15);
        }
        assert_eq!(h.normals().slice(s![4..8, ..2]), x.normals().dot(&a));
    }

    #[test]
    fn dimension_errors() {
        let (x, u) = boxes();
        let w = Zonotope::point(array![0.0, 0.0]).unwrap();
        let a = Array2::eye(3);
        let b = Array2::zeros((3, 1));
        assert!(augmented_halfspaces((&a, &b), &x, &x, &u, &w).is_err());
    }

    #[test]
    fn family_on_scalar_integrator() {
        // x⁺ = x + u + w, |x| ≤ 10, |u| ≤ 1, |w| ≤ 0.1
        let x = HPolytope::from_box(&array![-10.0], &array![10.0]).unwrap();
        let u = HPolytope::from_box(&array![-1.0], &array![1.0]).unwrap();
        let w = Zonotope::new(array![0.0], array![[0.1]]).unwrap();
        let models = VertexModels::new(vec![(array![[1.0]], array![[1.0]])]).unwrap();
        let cfg = FamilyConfig::new(x, u, w).unwrap();
        let t0 = Zonotope::new(array![0.0], array![[0.5]]).unwrap();
        let fam = compute_family(&models, &t0, &cfg, 3).unwrap();
        assert_eq!(fam.len(), 3);
        // Exact ROSC sets are |x| ≤ 0.5 − 0.1 + 1 per step.
        for (j, level) in fam.levels.iter().enumerate() {
            let exact_hw = 0.5 + 0.9 * (j + 1) as f64;
            let hw = level.projected.support(array![1.0].view()).unwrap();
            assert!(hw <= exact_hw + 1e-8, "level {}: {hw} > {exact_hw}", j + 1);
            assert!(hw > 0.5, "level {} did not grow: {hw}", j + 1);
            assert_eq!(level.index, j + 1);
        }
        assert!(check_terminal_feasibility(&t0, &fam.levels[0]).unwrap());
        assert!(!check_terminal_feasibility(&t0.scaled(10.0), &fam.levels[0]).unwrap());
        let (t, shift) = settle_terminal(&models, &t0, &cfg, 3).unwrap();
        assert_eq!((t, shift), (t0, 0));
    }

    #[test]
    fn empty_first_level_is_an_error() {
        // |w| ≤ 1 cannot be absorbed by a target of half-width 0.5.
        let x = HPolytope::from_box(&array![-10.0], &array![10.0]).unwrap();
        let u = HPolytope::from_box(&array![-1.0], &array![1.0]).unwrap();
        let w = Zonotope::new(array![0.0], array![[1.0]]).unwrap();
        let models = VertexModels::new(vec![(array![[1.0]], array![[1.0]])]).unwrap();
        let cfg = FamilyConfig::new(x, u, w).unwrap();
        let t0 = Zonotope::new(array![0.0], array![[0.5]]).unwrap();
        assert!(matches!(
            compute_family(&models, &t0, &cfg, 2),
            Err(Error::LevelInfeasible { level: 1 })
        ));
    }
}
