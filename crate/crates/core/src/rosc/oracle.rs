//! Exact ROSC sets for a known model, by Fourier–Motzkin elimination of the
//! input coordinates. Ground truth for the data-driven recursion.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::augmented_halfspaces;
use crate::setgeom::{HPolytope, Zonotope};
use crate::{Error, Real, Result};

/// Elimination gives up beyond this many rows.
pub const FM_ROW_CAP: usize = 10_000;

/// `{x : ∃u ∈ U, Ax + Bu + W ⊆ T_prev, x ∈ X}`, exactly, with redundant
/// rows removed.
pub fn model_based_backward_step<T: Real>(
    a: &Array2<T>,
    b: &Array2<T>,
    t_prev: &HPolytope<T>,
    x: &HPolytope<T>,
    u: &HPolytope<T>,
    w: &Zonotope<T>,
) -> Result<HPolytope<T>> {
    let aug = augmented_halfspaces((a, b), t_prev, x, u, w)?.remove_redundant()?;
    let n = x.dim();
    let mut poly = aug;
    for k in (n..poly.dim()).rev() {
        poly = eliminate(&poly, k)?.remove_redundant()?;
    }
    Ok(poly)
}

/// Projects out coordinate `k`.
fn eliminate<T: Real>(p: &HPolytope<T>, k: usize) -> Result<HPolytope<T>> {
    let (c, d) = (p.normals(), p.offsets());
    let dim = p.dim();
    let tol = T::tol_or_eps(1e-12);
    let keep: Vec<usize> = (0..dim).filter(|&i| i != k).collect();
    let (mut pos, mut neg, mut zero) = (Vec::new(), Vec::new(), Vec::new());
    for r in 0..p.num_rows() {
        let v = c[[r, k]];
        if v > tol {
            pos.push(r);
        } else if v < -tol {
            neg.push(r);
        } else {
            zero.push(r);
        }
    }
    let count = zero.len() + pos.len() * neg.len();
    if count > FM_ROW_CAP {
        return Err(Error::EliminationBlowUp { cap: FM_ROW_CAP });
    }
    let mut rows: Vec<(Array1<T>, T)> = Vec::with_capacity(count.max(1));
    for &r in &zero {
        rows.push((keep.iter().map(|&i| c[[r, i]]).collect(), d[r]));
    }
    for &i in &pos {
        for &j in &neg {
            // (c_i/a_i − c_j/a_j) y ≤ d_i/a_i − d_j/a_j with a_i > 0 > a_j
            let (ai, aj) = (c[[i, k]], c[[j, k]]);
            let row: Array1<T> = keep.iter().map(|&l| c[[i, l]] / ai - c[[j, l]] / aj).collect();
            rows.push((row, d[i] / ai - d[j] / aj));
        }
    }
    if rows.is_empty() {
        // Coordinate was unconstrained in every row; nothing is left.
        let mut e = Array1::zeros(dim - 1);
        e[0] = T::one();
        rows.push((e, T::max_value()));
    }
    let q = rows.len();
    let mut cm = Array2::zeros((q, dim - 1));
    let mut dv = Array1::zeros(q);
    for (r, (row, off)) in rows.into_iter().enumerate() {
        cm.row_mut(r).assign(&row);
        dv[r] = off;
    }
    HPolytope::new(cm, dv)
}

/// Model-based family `T⁰, T¹, …` computed with the exact oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OracleFamily<T> {
    pub terminal: HPolytope<T>,
    pub levels: Vec<HPolytope<T>>,
}

impl<T: Real> OracleFamily<T> {
    /// `Tʲ`, with `j = 0` the terminal set.
    pub fn set(&self, j: usize) -> Option<&HPolytope<T>> {
        if j == 0 {
            Some(&self.terminal)
        } else {
            self.levels.get(j - 1)
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// `levels` steps of the exact recursion. Stops early, keeping what was
/// computed, if a level comes out empty.
pub fn compute_oracle_family<T: Real>(
    a: &Array2<T>,
    b: &Array2<T>,
    terminal: &HPolytope<T>,
    x: &HPolytope<T>,
    u: &HPolytope<T>,
    w: &Zonotope<T>,
    levels: usize,
) -> Result<OracleFamily<T>> {
    let mut out: Vec<HPolytope<T>> = Vec::with_capacity(levels);
    for j in 1..=levels {
        let prev = out.last().unwrap_or(terminal);
        let next = model_based_backward_step(a, b, prev, x, u, w)?;
        if next.is_empty()? {
            if j == 1 {
                return Err(Error::LevelInfeasible { level: 1 });
            }
            log::warn!("oracle level {j} is empty; keeping {} levels", out.len());
            break;
        }
        out.push(next);
    }
    Ok(OracleFamily {
        terminal: terminal.clone(),
        levels: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_model_gives_intersection() {
        let x = HPolytope::<f64>::from_box(&array![-10.0, -10.0], &array![10.0, 10.0]).unwrap();
        let t = HPolytope::from_box(&array![-1.0, -2.0], &array![1.0, 2.0]).unwrap();
        let u = HPolytope::from_box(&array![-3.0], &array![3.0]).unwrap();
        let w = Zonotope::point(array![0.0, 0.0]).unwrap();
        let p = model_based_backward_step(&Array2::eye(2), &Array2::zeros((2, 1)), &t, &x, &u, &w).unwrap();
        let (lo, hi) = p.bounding_box().unwrap();
        assert!((lo - array![-1.0, -2.0]).iter().all(|v| v.abs() < 1e-9));
        assert!((hi - array![1.0, 2.0]).iter().all(|v| v.abs() < 1e-9));
        assert_eq!(p.num_rows(), 4);
    }

    #[test]
    fn scalar_integrator() {
        // x⁺ = x + u + w: T¹ = [−(0.5 − 0.1 + 1), …]
        let x = HPolytope::from_box(&array![-10.0], &array![10.0]).unwrap();
        let t = HPolytope::<f64>::from_box(&array![-0.5], &array![0.5]).unwrap();
        let u = HPolytope::from_box(&array![-1.0], &array![1.0]).unwrap();
        let w = Zonotope::new(array![0.0], array![[0.1]]).unwrap();
        let fam = compute_oracle_family(&array![[1.0]], &array![[1.0]], &t, &x, &u, &w, 2).unwrap();
        let (lo, hi) = fam.set(2).unwrap().bounding_box().unwrap();
        assert!((hi[0] - 2.3).abs() < 1e-9 && (lo[0] + 2.3).abs() < 1e-9);
    }

    #[test]
    fn eliminate_keeps_zero_rows() {
        let p = HPolytope::new(array![[1.0, 1.0], [1.0, -1.0], [-1.0, 0.0]], array![1.0, 1.0, 0.0]).unwrap();
        let q = eliminate(&p, 1).unwrap();
        assert_eq!(q.num_rows(), 2);
        assert!(q.contains_point(array![1.0].view(), 1e-12).unwrap());
        assert!(!q.contains_point(array![1.1].view(), 1e-12).unwrap());
    }
}
