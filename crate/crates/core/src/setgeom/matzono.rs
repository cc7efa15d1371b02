use ndarray::{s, Array1, Array2};
use rand::Rng;

use crate::error::check_dim;
use crate::{Error, Real, Result};

/// Default hard cap on generators before sign enumeration (2^12 vertices).
pub const DEFAULT_VERTEX_CAP: usize = 12;

/// `{ C + Σ β_i G_i : β ∈ [−1, 1]^q }` over `n × p` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixZonotope<T> {
    center: Array2<T>,
    generators: Vec<Array2<T>>,
}

impl<T: Real> MatrixZonotope<T> {
    pub fn new(center: Array2<T>, generators: Vec<Array2<T>>) -> Result<Self> {
        for g in &generators {
            if g.dim() != center.dim() {
                return Err(Error::InvalidArgument(format!(
                    "generator shape {:?} differs from center shape {:?}",
                    g.dim(),
                    center.dim()
                )));
            }
        }
        if !crate::linalg::is_finite(center.iter().chain(generators.iter().flat_map(|g| g.iter()))) {
            return Err(Error::NonFinite("matrix zonotope"));
        }
        Ok(Self { center, generators })
    }

    pub fn center(&self) -> &Array2<T> {
        &self.center
    }

    pub fn generators(&self) -> &[Array2<T>] {
        &self.generators
    }

    pub fn num_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.center.dim()
    }

    /// Member `C + Σ β_i G_i`.
    pub fn point_at(&self, beta: &[T]) -> Array2<T> {
        let mut m = self.center.clone();
        for (g, &b) in self.generators.iter().zip(beta) {
            m.scaled_add(b, g);
        }
        m
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Array2<T> {
        let beta: Vec<T> = (0..self.num_generators())
            .map(|_| T::lit(rng.gen_range(-1.0..=1.0)))
            .collect();
        self.point_at(&beta)
    }

    /// Residual-tolerant membership: the smallest entrywise residual
    /// `‖C + Σβ_i G_i − M‖_∞` over `β ∈ [−1,1]^q` is at most `tol`.
    pub fn contains(&self, m: &Array2<T>, tol: T) -> Result<bool> {
        Ok(self.membership_residual(m)? <= tol)
    }

    pub fn membership_residual(&self, m: &Array2<T>) -> Result<T> {
        if m.dim() != self.center.dim() {
            return Err(Error::InvalidArgument(format!(
                "matrix shape {:?} differs from {:?}",
                m.dim(),
                self.center.dim()
            )));
        }
        let diff: Array1<T> = (m - &self.center).iter().copied().collect();
        if self.generators.is_empty() {
            return Ok(diff.iter().fold(T::zero(), |a, v| a.max(v.abs())));
        }
        let q = self.generators.len();
        let mut g = Array2::<T>::zeros((diff.len(), q));
        for (i, gen) in self.generators.iter().enumerate() {
            for (r, v) in gen.iter().enumerate() {
                g[[r, i]] = *v;
            }
        }
        super::zonotope::min_residual(&g, &diff)
    }

    /// Order reduction by over-approximation.
    ///
    /// Generators are ranked by Frobenius norm; the largest `k` are kept
    /// and the rest are enclosed in their entrywise interval hull, which
    /// contributes one generator per nonzero entry. `k` is the largest
    /// value with `k + (box generators) ≤ target`; when even `k = 0` does
    /// not fit, everything is boxed, so the output never has more than
    /// `max(target, n·p)` generators.
    pub fn reduce_order(&self, target: usize) -> Result<Self> {
        if target < 1 {
            return Err(Error::InvalidArgument("reduction target must be at least 1".into()));
        }
        let q = self.generators.len();
        if q <= target {
            return Ok(self.clone());
        }
        let mut order: Vec<(usize, T)> = self
            .generators
            .iter()
            .enumerate()
            .map(|(i, g)| (i, g.iter().map(|v| *v * *v).sum::<T>().sqrt()))
            .collect();
        // Stable: equal norms keep their original order.
        order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));

        let boxed = |k: usize| -> Array2<T> {
            let mut acc = Array2::<T>::zeros(self.center.raw_dim());
            for &(i, _) in &order[k..] {
                acc.zip_mut_with(&self.generators[i], |a, g| *a += g.abs());
            }
            acc
        };
        let nnz = |b: &Array2<T>| b.iter().filter(|v| **v > T::zero()).count();

        let mut chosen = 0;
        let mut hull = boxed(0);
        for k in (0..=target.min(q)).rev() {
            let b = boxed(k);
            if k + nnz(&b) <= target {
                chosen = k;
                hull = b;
                break;
            }
        }
        let mut kept: Vec<usize> = order[..chosen].iter().map(|&(i, _)| i).collect();
        kept.sort_unstable();
        let mut gens: Vec<Array2<T>> = kept.iter().map(|&i| self.generators[i].clone()).collect();
        let (rows, cols) = self.center.dim();
        for r in 0..rows {
            for c in 0..cols {
                let v = hull[[r, c]];
                if v > T::zero() {
                    let mut g = Array2::zeros((rows, cols));
                    g[[r, c]] = v;
                    gens.push(g);
                }
            }
        }
        Self::new(self.center.clone(), gens)
    }

    /// All `2^q` sign combinations `C + Σ s_i G_i`, in lexicographic sign
    /// order (`−1` before `+1`, first generator most significant). A
    /// superset of the true vertex set.
    pub fn sign_vertices(&self, cap: usize) -> Result<Vec<Array2<T>>> {
        let q = self.generators.len();
        if q > cap {
            return Err(Error::VertexCapExceeded { got: q, cap });
        }
        Ok((0..1usize << q)
            .map(|k| {
                let signs: Vec<T> = (0..q)
                    .map(|i| if (k >> (q - 1 - i)) & 1 == 1 { T::one() } else { -T::one() })
                    .collect();
                self.point_at(&signs)
            })
            .collect())
    }
}

/// Vertex models `(Â_i, B̂_i)` of a model set.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexModels<T> {
    vertices: Vec<(Array2<T>, Array2<T>)>,
}

impl<T: Real> VertexModels<T> {
    pub fn new(vertices: Vec<(Array2<T>, Array2<T>)>) -> Result<Self> {
        let (a0, b0) = vertices
            .first()
            .ok_or_else(|| Error::InvalidArgument("vertex model list is empty".into()))?;
        let n = a0.nrows();
        check_dim("vertex model A columns", n, a0.ncols())?;
        check_dim("vertex model B rows", n, b0.nrows())?;
        let m = b0.ncols();
        for (a, b) in &vertices {
            if a.dim() != (n, n) || b.dim() != (n, m) {
                return Err(Error::InvalidArgument("vertex models are not dimensionally consistent".into()));
            }
        }
        Ok(Self { vertices })
    }

    /// Splits each `n × (n+m)` matrix into `[A B]`.
    pub fn from_stacked(mats: Vec<Array2<T>>) -> Result<Self> {
        let mut out = Vec::with_capacity(mats.len());
        for m in mats {
            let n = m.nrows();
            if m.ncols() < n {
                return Err(Error::InvalidArgument("model matrix has fewer columns than rows".into()));
            }
            out.push((m.slice(s![.., ..n]).to_owned(), m.slice(s![.., n..]).to_owned()));
        }
        Self::new(out)
    }

    pub fn vertices(&self) -> &[(Array2<T>, Array2<T>)] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.vertices[0].0.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.vertices[0].1.ncols()
    }
}

/// Sign-enumerates a `n × (n+m)` matrix zonotope into vertex models.
pub fn matrix_zonotope_vertices<T: Real>(mz: &MatrixZonotope<T>, cap: usize) -> Result<VertexModels<T>> {
    VertexModels::from_stacked(mz.sign_vertices(cap)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn no_reduction_needed() {
        let mz = MatrixZonotope::new(array![[0.0]], vec![array![[1.0]], array![[2.0]]]).unwrap();
        assert_eq!(mz.reduce_order(2).unwrap(), mz);
        assert!(mz.reduce_order(0).is_err());
    }

    #[test]
    fn vector_case_boxes_to_interval_hull() {
        // Z(0, [(1,0), (1,1)]) → Z(0, diag(2, 1))
        let mz = MatrixZonotope::new(
            array![[0.0], [0.0]],
            vec![array![[1.0], [0.0]], array![[1.0], [1.0]]],
        )
        .unwrap();
        let r = mz.reduce_order(1).unwrap();
        assert_eq!(r.generators(), &[array![[2.0], [0.0]], array![[0.0], [1.0]]]);
    }

    #[test]
    fn reduction_keeps_largest() {
        let gens = vec![array![[0.1f64, 0.0]], array![[0.0, 5.0]], array![[0.2, 0.0]], array![[0.0, 0.1]]];
        let mz = MatrixZonotope::new(array![[0.0, 0.0]], gens).unwrap();
        let r = mz.reduce_order(3).unwrap();
        // keep the 5.0 generator, box the rest into two axis generators
        assert_eq!(r.num_generators(), 3);
        assert_eq!(r.generators()[0], array![[0.0, 5.0]]);
        assert!((r.generators()[1][[0, 0]] - 0.3).abs() < 1e-15);
        assert!((r.generators()[2][[0, 1]] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn sign_vertices_small() {
        let c = array![[1.0, 0.0]];
        let g = array![[0.5, 0.5]];
        let none = MatrixZonotope::new(c.clone(), vec![]).unwrap();
        assert_eq!(none.sign_vertices(12).unwrap(), vec![c.clone()]);
        let one = MatrixZonotope::new(c.clone(), vec![g.clone()]).unwrap();
        assert_eq!(one.sign_vertices(12).unwrap(), vec![&c - &g, &c + &g]);
        assert!(matches!(one.sign_vertices(0), Err(Error::VertexCapExceeded { got: 1, cap: 0 })));
    }

    #[test]
    fn membership() {
        let mz = MatrixZonotope::new(array![[1.0, 2.0]], vec![array![[1.0, 0.0]]]).unwrap();
        assert!(mz.contains(&array![[1.0, 2.0]], 1e-9).unwrap());
        assert!(mz.contains(&array![[1.5, 2.0]], 1e-9).unwrap());
        assert!(!mz.contains(&array![[3.0, 2.0]], 1e-9).unwrap());
        assert!(!mz.contains(&array![[1.0, 2.1]], 1e-9).unwrap());
    }

    #[test]
    fn vertex_model_split() {
        let vm = VertexModels::from_stacked(vec![array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]]).unwrap();
        assert_eq!(vm.vertices()[0].0, array![[1.0, 2.0], [4.0, 5.0]]);
        assert_eq!(vm.vertices()[0].1, array![[3.0], [6.0]]);
        assert!(VertexModels::<f64>::new(vec![]).is_err());
    }
}
