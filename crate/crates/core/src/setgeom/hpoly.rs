use ndarray::{s, Array1, Array2, ArrayView1};

use super::Zonotope;
use crate::error::check_dim;
use crate::linalg::norm2;
use crate::optim::{solve_lp, LpProblem, SolveKind};
use crate::{Error, Real, Result};

/// `{ x : C x ≤ d }`. Emptiness is allowed and can be queried.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolytope<T> {
    normals: Array2<T>,
    offsets: Array1<T>,
}

impl<T: Real> HPolytope<T> {
    pub fn new(normals: Array2<T>, offsets: Array1<T>) -> Result<Self> {
        if normals.nrows() == 0 {
            return Err(Error::InvalidArgument("polytope needs at least one half-space".into()));
        }
        if normals.ncols() == 0 {
            return Err(Error::InvalidArgument("polytope dimension must be at least 1".into()));
        }
        check_dim("hpoly offsets", normals.nrows(), offsets.len())?;
        if !crate::linalg::is_finite(normals.iter().chain(offsets.iter())) {
            return Err(Error::NonFinite("hpoly"));
        }
        Ok(Self { normals, offsets })
    }

    pub(crate) fn from_rows(rows: &[(Array1<T>, T)]) -> Result<Self> {
        let n = rows.first().map(|r| r.0.len()).unwrap_or(0);
        let mut c = Array2::zeros((rows.len(), n));
        let mut d = Array1::zeros(rows.len());
        for (i, (row, off)) in rows.iter().enumerate() {
            c.row_mut(i).assign(row);
            d[i] = *off;
        }
        Self::new(c, d)
    }

    /// `{ lo ≤ x ≤ hi }`.
    pub fn from_box(lo: &Array1<T>, hi: &Array1<T>) -> Result<Self> {
        check_dim("hpoly box", lo.len(), hi.len())?;
        let n = lo.len();
        let mut c = Array2::zeros((2 * n, n));
        let mut d = Array1::zeros(2 * n);
        for i in 0..n {
            c[[2 * i, i]] = T::one();
            d[2 * i] = hi[i];
            c[[2 * i + 1, i]] = -T::one();
            d[2 * i + 1] = -lo[i];
        }
        Self::new(c, d)
    }

    pub fn normals(&self) -> &Array2<T> {
        &self.normals
    }

    pub fn offsets(&self) -> &Array1<T> {
        &self.offsets
    }

    pub fn dim(&self) -> usize {
        self.normals.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.normals.nrows()
    }

    /// `C x ≤ d + tol` elementwise.
    pub fn contains_point(&self, x: ArrayView1<T>, tol: T) -> Result<bool> {
        check_dim("contains_point", self.dim(), x.len())?;
        Ok(self
            .normals
            .dot(&x)
            .iter()
            .zip(self.offsets.iter())
            .all(|(&l, &r)| l <= r + tol))
    }

    /// Largest row violation `max_r (C_r x − d_r)`; non-positive inside.
    pub fn max_violation(&self, x: ArrayView1<T>) -> Result<T> {
        check_dim("max_violation", self.dim(), x.len())?;
        Ok(self
            .normals
            .dot(&x)
            .iter()
            .zip(self.offsets.iter())
            .map(|(&l, &r)| l - r)
            .fold(T::neg_infinity(), T::max))
    }

    /// Pontryagin difference `P ⊖ W`: each offset loses the support of
    /// `W` along its normal. The result may be empty.
    pub fn tighten(&self, w: &Zonotope<T>) -> Result<Self> {
        check_dim("tighten", self.dim(), w.dim())?;
        let mut d = self.offsets.clone();
        for (i, row) in self.normals.rows().into_iter().enumerate() {
            d[i] -= w.support(row)?;
        }
        Self::new(self.normals.clone(), d)
    }

    /// Row-stacked intersection, optionally followed by LP-based redundancy
    /// removal.
    pub fn intersect(parts: &[Self], remove_redundant: bool) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("intersection of an empty list".into()))?;
        let n = first.dim();
        for p in parts {
            check_dim("intersect", n, p.dim())?;
        }
        let rows: usize = parts.iter().map(|p| p.num_rows()).sum();
        let mut c = Array2::zeros((rows, n));
        let mut d = Array1::zeros(rows);
        let mut r = 0;
        for p in parts {
            let k = p.num_rows();
            c.slice_mut(s![r..r + k, ..]).assign(&p.normals);
            d.slice_mut(s![r..r + k]).assign(&p.offsets);
            r += k;
        }
        let out = Self::new(c, d)?;
        if remove_redundant {
            out.remove_redundant()
        } else {
            Ok(out)
        }
    }

    /// Normalizes every row to unit length and merges rows with the same
    /// normal (keeping the tighter offset). Describes the same set. Rows
    /// with a zero normal are dropped when trivially satisfied.
    pub fn normalized(&self) -> Result<Self> {
        let mut rows: Vec<(Array1<T>, T)> = Vec::with_capacity(self.num_rows());
        for (row, &d) in self.normals.rows().into_iter().zip(self.offsets.iter()) {
            let len = norm2(row.iter().copied());
            if len <= T::pivot_tol() {
                if d < T::zero() {
                    // 0 ≤ d < 0: keep an explicit infeasible row.
                    rows.push((row.to_owned(), d));
                }
                continue;
            }
            rows.push((&row / len, d / len));
        }
        if rows.is_empty() {
            // Whole space; keep one trivially satisfied row to stay well-formed.
            let mut e = Array1::zeros(self.dim());
            e[0] = T::one();
            return Self::from_rows(&[(e, T::max_value())]);
        }
        let merged = dedup_exact(rows);
        Self::from_rows(&merged)
    }

    /// Drops every row implied by the others, one LP per row.
    pub fn remove_redundant(&self) -> Result<Self> {
        let norm = self.normalized()?;
        if norm.is_empty()? {
            return Ok(norm);
        }
        let m = norm.num_rows();
        let mut keep = vec![true; m];
        for r in 0..m {
            let others: Vec<usize> = (0..m).filter(|&i| i != r && keep[i]).collect();
            if others.is_empty() {
                continue;
            }
            let a = norm.normals.select(ndarray::Axis(0), &others);
            let b = others.iter().map(|&i| norm.offsets[i]).collect::<Array1<T>>();
            let obj = norm.normals.row(r).mapv(|v| -v);
            let st = solve_lp(&LpProblem::new(obj).with_inequalities(a, b))?;
            if st.kind == SolveKind::Optimal {
                let best = -st.objective_value.expect("optimal");
                if best <= norm.offsets[r] + T::tol_or_eps(1e-9) * T::one().max(norm.offsets[r].abs()) {
                    keep[r] = false;
                }
            }
        }
        let idx: Vec<usize> = (0..m).filter(|&i| keep[i]).collect();
        Self::new(
            norm.normals.select(ndarray::Axis(0), &idx),
            idx.iter().map(|&i| norm.offsets[i]).collect(),
        )
    }

    pub fn is_empty(&self) -> Result<bool> {
        let lp = LpProblem::new(Array1::zeros(self.dim())).with_inequalities(self.normals.clone(), self.offsets.clone());
        match solve_lp(&lp)?.kind {
            SolveKind::Optimal => Ok(false),
            SolveKind::Infeasible => Ok(true),
            other => Err(Error::Numerical(format!("emptiness LP ended {other:?}"))),
        }
    }

    /// `max_{x ∈ P} dᵀx`, or `None` when unbounded.
    pub fn support(&self, direction: ArrayView1<T>) -> Result<Option<T>> {
        check_dim("hpoly support", self.dim(), direction.len())?;
        let lp = LpProblem::new(direction.mapv(|v| -v)).with_inequalities(self.normals.clone(), self.offsets.clone());
        let st = solve_lp(&lp)?;
        match st.kind {
            SolveKind::Optimal => Ok(Some(-st.objective_value.expect("optimal"))),
            SolveKind::Unbounded => Ok(None),
            SolveKind::Infeasible => Err(Error::Infeasible("support of empty polytope")),
            SolveKind::NumericalFailure => Err(Error::Numerical("support LP".into())),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`; errors when unbounded.
    pub fn bounding_box(&self) -> Result<(Array1<T>, Array1<T>)> {
        let n = self.dim();
        let mut lo = Array1::zeros(n);
        let mut hi = Array1::zeros(n);
        for i in 0..n {
            let mut e = Array1::zeros(n);
            e[i] = T::one();
            hi[i] = self.support(e.view())?.ok_or(Error::Unbounded("bounding box"))?;
            e[i] = -T::one();
            lo[i] = -self.support(e.view())?.ok_or(Error::Unbounded("bounding box"))?;
        }
        Ok((lo, hi))
    }

    /// Vertices of a bounded planar polytope, counter-clockwise.
    pub fn polygon_2d(&self) -> Result<Vec<[T; 2]>> {
        check_dim("polygon_2d", 2, self.dim())?;
        let tol = T::tol_or_eps(1e-9);
        let m = self.num_rows();
        let mut pts: Vec<[T; 2]> = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                let (a, b) = (self.normals.row(i), self.normals.row(j));
                let det = a[0] * b[1] - a[1] * b[0];
                if det.abs() <= T::pivot_tol() {
                    continue;
                }
                let x = (self.offsets[i] * b[1] - a[1] * self.offsets[j]) / det;
                let y = (a[0] * self.offsets[j] - self.offsets[i] * b[0]) / det;
                let p = Array1::from(vec![x, y]);
                if self.contains_point(p.view(), tol * T::lit(100.0))?
                    && !pts.iter().any(|q| (q[0] - x).abs() <= tol && (q[1] - y).abs() <= tol) {
                        pts.push([x, y]);
                    }
            }
        }
        if pts.is_empty() {
            return Ok(pts);
        }
        let k = T::from_usize(pts.len()).unwrap();
        let cx = pts.iter().map(|p| p[0]).sum::<T>() / k;
        let cy = pts.iter().map(|p| p[1]).sum::<T>() / k;
        pts.sort_by(|p, q| {
            let a = (p[1] - cy).atan2(p[0] - cx);
            let b = (q[1] - cy).atan2(q[0] - cx);
            a.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Equal)
        });
        Ok(pts)
    }
}

fn dedup_exact<T: Real>(rows: Vec<(Array1<T>, T)>) -> Vec<(Array1<T>, T)> {
    super::zonotope::merge_duplicate_rows(rows, T::lit(1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn unit_box() -> HPolytope<f64> {
        HPolytope::from_box(&array![-1.0, -1.0], &array![1.0, 1.0]).unwrap()
    }

    #[test]
    fn box_membership() {
        let tol = 1e-9;
        assert!(unit_box().contains_point(array![0.0, 0.0].view(), tol).unwrap());
        assert!(!unit_box().contains_point(array![1.0 + 2.0 * tol, 0.0].view(), tol).unwrap());
        assert!(unit_box().contains_point(array![0.0].view(), tol).is_err());
    }

    #[test]
    fn tightening_box() {
        let p = HPolytope::from_box(&array![-10.0, -10.0], &array![10.0, 10.0]).unwrap();
        let w = Zonotope::new(array![0.0, 0.0], Array2::eye(2) * 0.005).unwrap();
        let t = p.tighten(&w).unwrap();
        assert_eq!(t.normals(), p.normals());
        for d in t.offsets() {
            assert_eq!(*d, 10.0 - 0.005);
        }
        let zero = Zonotope::point(array![0.0, 0.0]).unwrap();
        assert_eq!(p.tighten(&zero).unwrap(), p);
    }

    #[test]
    fn intersect_single_and_redundant() {
        assert_eq!(HPolytope::intersect(&[unit_box()], false).unwrap(), unit_box());
        assert!(HPolytope::<f64>::intersect(&[], false).is_err());
        let a = HPolytope::new(array![[1.0]], array![1.0]).unwrap();
        let b = HPolytope::new(array![[1.0]], array![2.0]).unwrap();
        let c = HPolytope::intersect(&[a, b], true).unwrap();
        assert_eq!(c.num_rows(), 1);
        assert_eq!(c.offsets()[0], 1.0);
    }

    #[test]
    fn redundancy_removal_keeps_facets() {
        let extra = HPolytope::new(array![[1.0, 1.0], [3.0, 0.0]], array![5.0, 3.0]).unwrap();
        let c = HPolytope::intersect(&[unit_box(), extra], true).unwrap();
        assert_eq!(c.num_rows(), 4);
    }

    #[test]
    fn emptiness() {
        assert!(!unit_box().is_empty().unwrap());
        let e = HPolytope::new(array![[1.0], [-1.0]], array![0.0, -1.0]).unwrap();
        assert!(e.is_empty().unwrap());
    }

    #[test]
    fn bounding_box_and_polygon() {
        let tri = HPolytope::new(array![[-1.0f64, 0.0], [0.0, -1.0], [1.0, 1.0]], array![0.0, 0.0, 1.0]).unwrap();
        let (lo, hi) = tri.bounding_box().unwrap();
        assert!((lo - array![0.0, 0.0]).iter().all(|v| v.abs() < 1e-12));
        assert!((hi - array![1.0, 1.0]).iter().all(|v| v.abs() < 1e-12));
        assert_eq!(tri.polygon_2d().unwrap().len(), 3);
    }
}
