use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use super::HPolytope;
use crate::error::check_dim;
use crate::linalg::{det, norm2, rank};
use crate::optim::{solve_lp, LpProblem, SolveKind};
use crate::{Error, Real, Result};

/// Cross products below this fraction of the product of their factors'
/// norms are treated as parallel generator combinations.
const PARALLEL_TOL: f64 = 1e-12;
/// Two unit facet normals closer than this cosine distance are merged.
const DUPLICATE_NORMAL_TOL: f64 = 1e-10;

/// `Z(c, G) = { c + G β : β ∈ [−1, 1]^p }`.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope<T> {
    center: Array1<T>,
    generators: Array2<T>,
}

impl<T: Real> Zonotope<T> {
    pub fn new(center: Array1<T>, generators: Array2<T>) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidArgument("zonotope dimension must be at least 1".into()));
        }
        check_dim("zonotope generator rows", center.len(), generators.nrows())?;
        if !crate::linalg::is_finite(center.iter().chain(generators.iter())) {
            return Err(Error::NonFinite("zonotope"));
        }
        Ok(Self { center, generators })
    }

    /// Degenerate zonotope `{c}`.
    pub fn point(center: Array1<T>) -> Result<Self> {
        let n = center.len();
        Self::new(center, Array2::zeros((n, 0)))
    }

    /// Axis-aligned box `c ± half_widths`.
    pub fn from_box(center: Array1<T>, half_widths: &Array1<T>) -> Result<Self> {
        check_dim("zonotope box", center.len(), half_widths.len())?;
        Self::new(center, Array2::from_diag(half_widths))
    }

    pub fn center(&self) -> &Array1<T> {
        &self.center
    }

    pub fn generators(&self) -> &Array2<T> {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            center: self.center.clone(),
            generators: &self.generators * factor,
        }
    }

    pub fn translated(&self, offset: &Array1<T>) -> Result<Self> {
        check_dim("zonotope translation", self.dim(), offset.len())?;
        Self::new(&self.center + offset, self.generators.clone())
    }

    /// `Z1 ⊕ Z2`: centers add, generator matrices concatenate.
    pub fn minkowski_sum(&self, other: &Self) -> Result<Self> {
        check_dim("minkowski_sum", self.dim(), other.dim())?;
        let g = concatenate![Axis(1), self.generators, other.generators];
        Ok(Self {
            center: &self.center + &other.center,
            generators: g,
        })
    }

    /// Image `M Z`.
    pub fn linear_map(&self, m: &Array2<T>) -> Result<Self> {
        check_dim("linear_map", self.dim(), m.ncols())?;
        Self::new(m.dot(&self.center), m.dot(&self.generators))
    }

    /// `max_{x ∈ Z} dᵀx = dᵀc + Σ |dᵀ g_i|`.
    pub fn support(&self, direction: ArrayView1<T>) -> Result<T> {
        check_dim("support", self.dim(), direction.len())?;
        if !crate::linalg::is_finite(direction.iter()) {
            return Err(Error::NonFinite("support direction"));
        }
        Ok(direction.dot(&self.center) + direction.dot(&self.generators).mapv(|v| v.abs()).sum())
    }

    /// Keeps the coordinates listed in `dims`, in that order.
    pub fn project(&self, dims: &[usize]) -> Result<Self> {
        let n = self.dim();
        let mut seen = vec![false; n];
        for &d in dims {
            if d >= n || seen[d] {
                return Err(Error::InvalidArgument(format!("invalid projection index {d} for dimension {n}")));
            }
            seen[d] = true;
        }
        if dims.is_empty() {
            return Err(Error::InvalidArgument("projection onto no coordinates".into()));
        }
        let center = dims.iter().map(|&d| self.center[d]).collect();
        let generators = self.generators.select(Axis(0), dims);
        Self::new(center, generators)
    }

    /// Half-space representation of a full-dimensional zonotope: one facet
    /// pair per `(n−1)`-combination of generators, normal given by the
    /// generalized cross product of the combination.
    pub fn to_hpoly(&self) -> Result<HPolytope<T>> {
        let n = self.dim();
        let p = self.num_generators();
        if p + 1 < n {
            return Err(Error::TooFewGenerators { got: p, dim: n });
        }
        let r = rank(self.generators.view(), T::lit(1e-10));
        if r < n {
            return Err(Error::Degenerate { rank: r, dim: n });
        }
        let mut normals: Vec<Array1<T>> = Vec::new();
        if n == 1 {
            normals.push(Array1::from_elem(1, T::one()));
        } else {
            for combo in Combinations::new(p, n - 1) {
                let sub = self.generators.select(Axis(1), &combo);
                let cp = cross_product(&sub);
                let len = norm2(cp.iter().copied());
                let scale: T = combo
                    .iter()
                    .map(|&j| norm2(self.generators.column(j).iter().copied()))
                    .fold(T::one(), |a, b| a * b);
                if len <= T::lit(PARALLEL_TOL) * scale || len == T::zero() {
                    continue;
                }
                normals.push(cp / len);
            }
        }
        let mut rows: Vec<(Array1<T>, T)> = Vec::with_capacity(2 * normals.len());
        for sign in [T::one(), -T::one()] {
            for c in &normals {
                let c = c * sign;
                let delta: T = c.dot(&self.generators).mapv(|v| v.abs()).sum();
                let offset = c.dot(&self.center) + delta;
                rows.push((c, offset));
            }
        }
        let rows = merge_duplicate_rows(rows, T::lit(DUPLICATE_NORMAL_TOL));
        HPolytope::from_rows(&rows)
    }

    /// Membership by the feasibility LP `∃β ∈ [−1,1]^p : c + Gβ = x`; the
    /// equality residual (∞-norm) must be at most `tol`.
    pub fn contains_point(&self, x: ArrayView1<T>, tol: T) -> Result<bool> {
        check_dim("zonotope_contains_point", self.dim(), x.len())?;
        let p = self.num_generators();
        let diff = &x - &self.center;
        if p == 0 {
            return Ok(diff.iter().all(|v| v.abs() <= tol));
        }
        Ok(min_residual(&self.generators, &diff)? <= tol)
    }

    /// Exact containment in a polytope: `H_r c + Σ|H_r g_i| ≤ h_r + tol`
    /// for every row.
    pub fn is_subset_of(&self, poly: &HPolytope<T>, tol: T) -> Result<bool> {
        check_dim("zonotope_in_hpoly", self.dim(), poly.dim())?;
        for (row, &h) in poly.normals().rows().into_iter().zip(poly.offsets().iter()) {
            if self.support(row)? > h + tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Point `c + Gβ` with `β` uniform on the unit box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Array1<T> {
        let beta: Array1<T> = (0..self.num_generators())
            .map(|_| T::lit(rng.gen_range(-1.0..=1.0)))
            .collect();
        self.point_at(&beta)
    }

    /// Point `c + Gβ` with `β` a uniformly drawn sign vector.
    pub fn sample_vertex<R: Rng + ?Sized>(&self, rng: &mut R) -> Array1<T> {
        let beta: Array1<T> = (0..self.num_generators())
            .map(|_| if rng.gen::<bool>() { T::one() } else { -T::one() })
            .collect();
        self.point_at(&beta)
    }

    pub fn point_at(&self, beta: &Array1<T>) -> Array1<T> {
        &self.center + &self.generators.dot(beta)
    }

    /// Vertices of a planar zonotope in counter-clockwise order.
    pub fn polygon_2d(&self) -> Result<Vec<[T; 2]>> {
        check_dim("polygon_2d", 2, self.dim())?;
        let mut gens: Vec<[T; 2]> = self
            .generators
            .columns()
            .into_iter()
            .filter(|g| g[0] != T::zero() || g[1] != T::zero())
            .map(|g| {
                // Orient every generator into the upper half plane.
                if g[1] < T::zero() || (g[1] == T::zero() && g[0] < T::zero()) {
                    [-g[0], -g[1]]
                } else {
                    [g[0], g[1]]
                }
            })
            .collect();
        if gens.is_empty() {
            return Ok(vec![[self.center[0], self.center[1]]]);
        }
        gens.sort_by(|a, b| {
            let ta = a[1].atan2(a[0]);
            let tb = b[1].atan2(b[0]);
            ta.partial_cmp(&tb).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut start = [self.center[0], self.center[1]];
        for g in &gens {
            start[0] -= g[0];
            start[1] -= g[1];
        }
        // Walk the generators by angle, then walk them back mirrored.
        let two = T::lit(2.0);
        let mut poly = Vec::with_capacity(2 * gens.len());
        let mut cur = start;
        poly.push(cur);
        for g in &gens {
            cur = [cur[0] + two * g[0], cur[1] + two * g[1]];
            poly.push(cur);
        }
        for g in &gens {
            cur = [cur[0] - two * g[0], cur[1] - two * g[1]];
            poly.push(cur);
        }
        poly.pop();
        Ok(poly)
    }
}

/// `min s  s.t.  |G β − r|_∞ ≤ s,  β ∈ [−1, 1]^p`.
pub(crate) fn min_residual<T: Real>(g: &Array2<T>, r: &Array1<T>) -> Result<T> {
    let (n, p) = g.dim();
    // The residual is homogeneous in (G, r); solving at unit scale keeps
    // tiny generators (e.g. noise through a pseudo-inverse) well conditioned.
    let scale = g.iter().chain(r.iter()).fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return Ok(T::zero());
    }
    let (g, r) = (g.mapv(|v| v / scale), r.mapv(|v| v / scale));
    let mut a = Array2::<T>::zeros((2 * n, p + 1));
    let mut b = Array1::<T>::zeros(2 * n);
    a.slice_mut(s![..n, ..p]).assign(&g);
    a.slice_mut(s![n.., ..p]).assign(&g.mapv(|v| -v));
    a.slice_mut(s![.., p]).fill(-T::one());
    b.slice_mut(s![..n]).assign(&r);
    b.slice_mut(s![n..]).assign(&r.mapv(|v| -v));
    let mut obj = Array1::zeros(p + 1);
    obj[p] = T::one();
    let mut lo = Array1::from_elem(p + 1, -T::one());
    let mut hi = Array1::from_elem(p + 1, T::one());
    lo[p] = T::zero();
    hi[p] = T::infinity();
    let st = solve_lp(&LpProblem::new(obj).with_inequalities(a, b).with_bounds(lo, hi))?;
    match st.kind {
        SolveKind::Optimal => Ok(st.objective_value.expect("optimal") * scale),
        other => Err(Error::Numerical(format!("membership LP ended {other:?}"))),
    }
}

/// `CP_n` of an `n × (n−1)` matrix: signed minors with row `j` removed.
pub(crate) fn cross_product<T: Real>(m: &Array2<T>) -> Array1<T> {
    let n = m.nrows();
    debug_assert_eq!(m.ncols() + 1, n);
    (0..n)
        .map(|j| {
            let keep: Vec<usize> = (0..n).filter(|&i| i != j).collect();
            let minor = m.select(Axis(0), &keep);
            let d = det(minor.view());
            if j % 2 == 0 {
                d
            } else {
                -d
            }
        })
        .collect()
}

/// Merges rows whose unit normals coincide, keeping the smallest offset.
/// Rows must already be normalized.
pub(crate) fn merge_duplicate_rows<T: Real>(rows: Vec<(Array1<T>, T)>, tol: T) -> Vec<(Array1<T>, T)> {
    let mut out: Vec<(Array1<T>, T)> = Vec::with_capacity(rows.len());
    'outer: for (c, d) in rows {
        for (oc, od) in out.iter_mut() {
            if T::one() - oc.dot(&c) < tol {
                if d < *od {
                    *od = d;
                }
                continue 'outer;
            }
        }
        out.push((c, d));
    }
    out
}

/// Lexicographic k-subsets of `0..n`.
pub(crate) struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in (i + 1)..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn unit_square() -> Zonotope<f64> {
        Zonotope::new(array![0.0, 0.0], Array2::eye(2)).unwrap()
    }

    #[test]
    fn combinations_enumerate_lexicographically() {
        let c: Vec<_> = Combinations::new(4, 2).collect();
        assert_eq!(c.len(), 6);
        assert_eq!(c[0], vec![0, 1]);
        assert_eq!(c[5], vec![2, 3]);
        assert_eq!(Combinations::new(3, 0).count(), 1);
    }

    #[test]
    fn sum_of_unit_squares() {
        let z = unit_square().minkowski_sum(&unit_square()).unwrap();
        assert_eq!(z.center(), &array![0.0, 0.0]);
        assert_eq!(z.generators(), &concatenate![Axis(1), Array2::<f64>::eye(2), Array2::<f64>::eye(2)]);
        let z = unit_square().translated(&array![1.0, 2.0]).unwrap();
        assert_eq!(z.minkowski_sum(&Zonotope::point(array![0.0, 0.0]).unwrap()).unwrap(), z);
        assert!(unit_square().minkowski_sum(&Zonotope::point(array![1.0]).unwrap()).is_err());
    }

    #[test]
    fn scaling_map() {
        let z = unit_square().linear_map(&(Array2::<f64>::eye(2) * 2.0)).unwrap();
        assert_eq!(z.generators(), &(Array2::<f64>::eye(2) * 2.0));
        assert_eq!(unit_square().linear_map(&Array2::eye(2)).unwrap(), unit_square());
        assert!(unit_square().linear_map(&Array2::eye(3)).is_err());
    }

    #[test]
    fn box_supports() {
        let w = Zonotope::new(array![0.0, 0.0], Array2::eye(2) * 0.005).unwrap();
        assert!((w.support(array![1.0f64, 0.0].view()).unwrap() - 0.005).abs() < 1e-15);
        assert_eq!(unit_square().support(array![1.0, 1.0].view()).unwrap(), 2.0);
    }

    #[test]
    fn unit_box_hrep() {
        let h = unit_square().to_hpoly().unwrap();
        assert_eq!(h.num_rows(), 4);
        for (row, d) in h.normals().rows().into_iter().zip(h.offsets()) {
            assert!((d - 1.0).abs() < 1e-12);
            assert!((row.iter().map(|v| v.abs()).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn skewed_parallelogram_hrep() {
        // g1 = (1,0), g2 = (1,1)  →  |x2| ≤ 1, |x1 − x2| ≤ 1
        let z = Zonotope::new(array![0.0, 0.0], array![[1.0, 1.0], [0.0, 1.0]]).unwrap();
        let h = z.to_hpoly().unwrap();
        assert_eq!(h.num_rows(), 4);
        let s = 0.5f64.sqrt();
        let expected = [([0.0, 1.0], 1.0), ([s, -s], s), ([0.0, -1.0], 1.0), ([-s, s], s)];
        for (c, d) in expected {
            let found = h
                .normals()
                .rows()
                .into_iter()
                .zip(h.offsets())
                .any(|(r, o)| (r[0] - c[0]).abs() < 1e-12 && (r[1] - c[1]).abs() < 1e-12 && (o - d).abs() < 1e-12);
            assert!(found, "missing facet {c:?} ≤ {d}");
        }
    }

    #[test]
    fn degenerate_rejected() {
        let z = Zonotope::new(array![0.0, 0.0], array![[1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert!(matches!(z.to_hpoly(), Err(Error::Degenerate { rank: 1, dim: 2 })));
        let z = Zonotope::new(array![0.0, 0.0, 0.0], array![[1.0], [0.0], [0.0]]).unwrap();
        assert!(matches!(z.to_hpoly(), Err(Error::TooFewGenerators { .. })));
    }

    #[test]
    fn one_dimensional_hrep() {
        let z = Zonotope::new(array![1.0], array![[0.5, -0.25]]).unwrap();
        let h = z.to_hpoly().unwrap();
        assert_eq!(h.num_rows(), 2);
        assert!(h.contains_point(array![1.75].view(), 1e-12).unwrap());
        assert!(!h.contains_point(array![1.8].view(), 1e-12).unwrap());
    }

    #[test]
    fn membership_edges() {
        let z = unit_square();
        let tol = 1e-9;
        assert!(z.contains_point(array![0.0, 0.0].view(), tol).unwrap());
        assert!(z.contains_point(array![1.0, 1.0].view(), tol).unwrap());
        let far = 1.0 + 10.0 * tol;
        assert!(!z.contains_point(array![far, far].view(), tol).unwrap());
        let p = Zonotope::point(array![1.0, 2.0]).unwrap();
        assert!(p.contains_point(array![1.0, 2.0].view(), tol).unwrap());
        assert!(!p.contains_point(array![1.0, 2.1].view(), tol).unwrap());
    }

    #[test]
    fn subset_checks() {
        let z = unit_square();
        assert!(z.is_subset_of(&HPolytope::from_box(&array![-1.0, -1.0], &array![1.0, 1.0]).unwrap(), 1e-9).unwrap());
        assert!(!z.is_subset_of(&HPolytope::from_box(&array![-0.9, -0.9], &array![0.9, 0.9]).unwrap(), 1e-9).unwrap());
    }

    #[test]
    fn projections() {
        let z = Zonotope::new(array![1.0, 2.0], Array2::eye(2)).unwrap();
        assert_eq!(z.project(&[0, 1]).unwrap(), z);
        let p = z.project(&[0]).unwrap();
        assert_eq!(p.center(), &array![1.0]);
        assert_eq!(p.generators(), &array![[1.0, 0.0]]);
        assert!(z.project(&[2]).is_err());
        assert!(z.project(&[0, 0]).is_err());
    }

    #[test]
    fn polygon_of_square() {
        let poly = unit_square().polygon_2d().unwrap();
        assert_eq!(poly.len(), 4);
        for v in poly {
            assert!((v[0].abs() - 1.0).abs() < 1e-12 && (v[1].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let z = Zonotope::<f32>::new(array![0.0, 0.0], Array2::eye(2)).unwrap();
        let h = z.to_hpoly().unwrap();
        assert_eq!(h.num_rows(), 4);
        assert!(z.contains_point(array![0.5f32, -0.5].view(), 1e-5).unwrap());
        assert_eq!(z.support(array![1.0f32, 1.0].view()).unwrap(), 2.0);
    }
}
