//! Small dense factorizations. Everything here works on matrices with at
//! most a few hundred rows, so plain Gaussian elimination is adequate.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::Real;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Array2<T>,
    perm: Vec<usize>,
    sign: T,
}

impl<T: Real> Lu<T> {
    /// Factorizes a square matrix. Returns `None` when a pivot falls below
    /// `pivot_tol` times the largest entry of `a`.
    pub fn new(a: ArrayView2<T>) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        let mut lu = a.to_owned();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let floor = T::pivot_tol() * scale.max(T::min_positive_value());
        for k in 0..n {
            let (mut p, mut best) = (k, lu[[k, k]].abs());
            for i in (k + 1)..n {
                let v = lu[[i, k]].abs();
                if v > best {
                    p = i;
                    best = v;
                }
            }
            if best <= floor || best == T::zero() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    lu.swap([k, j], [p, j]);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[[k, k]];
            for i in (k + 1)..n {
                let f = lu[[i, k]] / pivot;
                lu[[i, k]] = f;
                if f != T::zero() {
                    for j in (k + 1)..n {
                        let v = lu[[k, j]];
                        lu[[i, j]] -= f * v;
                    }
                }
            }
        }
        Some(Self { lu, perm, sign })
    }

    pub fn det(&self) -> T {
        self.lu.diag().iter().fold(self.sign, |acc, &d| acc * d)
    }

    pub fn solve_vec(&self, b: &Array1<T>) -> Array1<T> {
        let n = self.lu.nrows();
        let mut x: Array1<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[[i, j]] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[[i, j]] * x[j];
            }
            x[i] = s / self.lu[[i, i]];
        }
        x
    }

    pub fn solve_mat(&self, b: &Array2<T>) -> Array2<T> {
        let mut out = Array2::zeros(b.raw_dim());
        for (j, col) in b.axis_iter(Axis(1)).enumerate() {
            let x = self.solve_vec(&col.to_owned());
            out.column_mut(j).assign(&x);
        }
        out
    }
}

/// Determinant of a square matrix; zero when the factorization breaks down.
pub fn det<T: Real>(a: ArrayView2<T>) -> T {
    match a.nrows() {
        0 => T::one(),
        1 => a[[0, 0]],
        2 => a[[0, 0]] * a[[1, 1]] - a[[0, 1]] * a[[1, 0]],
        _ => Lu::new(a).map(|lu| lu.det()).unwrap_or_else(T::zero),
    }
}

pub fn solve<T: Real>(a: ArrayView2<T>, b: &Array1<T>) -> Option<Array1<T>> {
    Lu::new(a).map(|lu| lu.solve_vec(b))
}

/// Numerical rank by Gaussian elimination with complete pivoting. A pivot
/// counts when it exceeds `rel_tol` times the first (largest) pivot.
pub fn rank<T: Real>(a: ArrayView2<T>, rel_tol: T) -> usize {
    let (m, n) = a.dim();
    let mut w = a.to_owned();
    let mut r = 0;
    let mut first = T::zero();
    while r < m.min(n) {
        let (mut pi, mut pj, mut best) = (r, r, T::zero());
        for i in r..m {
            for j in r..n {
                let v = w[[i, j]].abs();
                if v > best {
                    best = v;
                    pi = i;
                    pj = j;
                }
            }
        }
        if r == 0 {
            first = best;
        }
        if best == T::zero() || best <= rel_tol * first {
            break;
        }
        for j in 0..n {
            w.swap([r, j], [pi, j]);
        }
        for i in 0..m {
            w.swap([i, r], [i, pj]);
        }
        let pivot = w[[r, r]];
        for i in (r + 1)..m {
            let f = w[[i, r]] / pivot;
            if f != T::zero() {
                for j in r..n {
                    let v = w[[r, j]];
                    w[[i, j]] -= f * v;
                }
            }
        }
        r += 1;
    }
    r
}

/// Lower Cholesky factor of a symmetric positive definite matrix, `None`
/// when a non-positive pivot shows up.
pub fn cholesky<T: Real>(a: ArrayView2<T>) -> Option<Array2<T>> {
    let n = a.nrows();
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut s = a[[j, j]];
        for k in 0..j {
            s -= l[[j, k]] * l[[j, k]];
        }
        if !(s > T::zero()) {
            return None;
        }
        let d = s.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the lower Cholesky factor.
pub fn cholesky_solve<T: Real>(l: &Array2<T>, b: &Array1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

pub fn norm2<T: Real>(v: impl IntoIterator<Item = T>) -> T {
    v.into_iter().map(|x| x * x).sum::<T>().sqrt()
}

pub fn is_finite<'a, T: Real>(v: impl IntoIterator<Item = &'a T>) -> bool {
    v.into_iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn det_and_solve() {
        let a = array![[2.0f64, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        assert!((det(a.view()) - 18.0).abs() < 1e-12);
        let x = solve(a.view(), &array![1.0, 2.0, 3.0]).unwrap();
        let r = a.dot(&x) - array![1.0, 2.0, 3.0];
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn singular_lu_is_none() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(Lu::new(a.view()).is_none());
        assert_eq!(det(a.view()), 0.0);
    }

    #[test]
    fn rank_of_rank_deficient() {
        let a = array![[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]];
        assert_eq!(rank(a.view(), 1e-10), 2);
        assert_eq!(rank(Array2::<f64>::zeros((2, 3)).view(), 1e-10), 0);
    }

    #[test]
    fn cholesky_roundtrip() {
        let a = array![[4.0f64, 2.0], [2.0, 3.0]];
        let l = cholesky(a.view()).unwrap();
        let x = cholesky_solve(&l, &array![1.0, 1.0]);
        let r = a.dot(&x) - array![1.0, 1.0];
        assert!(r.iter().all(|v| v.abs() < 1e-14));
        assert!(cholesky(array![[1.0, 2.0], [2.0, 1.0]].view()).is_none());
    }
}
