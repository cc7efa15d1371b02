use ndarray::Array2;

use crate::linalg::{cholesky, cholesky_solve, rank};
use crate::{Error, Real, Result};

/// Relative threshold on the elimination pivots used to decide row rank.
pub const RANK_TOL: f64 = 1e-10;

/// Right pseudoinverse `Mᵀ(MMᵀ)⁻¹` of a full-row-rank matrix.
pub fn right_pinv<T: Real>(m: &Array2<T>) -> Result<Array2<T>> {
    let rows = m.nrows();
    if !crate::linalg::is_finite(m.iter()) {
        return Err(Error::NonFinite("right_pinv input"));
    }
    let r = rank(m.view(), T::lit(RANK_TOL));
    if r < rows {
        return Err(Error::RankDeficient { rank: r, rows });
    }
    let gram = m.dot(&m.t());
    let l = cholesky(gram.view()).ok_or(Error::RankDeficient { rank: r.min(rows - 1), rows })?;
    // Solve (MMᵀ) X = M column by column; the pseudoinverse is Xᵀ.
    let mut x = Array2::<T>::zeros(m.raw_dim());
    for (j, col) in m.columns().into_iter().enumerate() {
        x.column_mut(j).assign(&cholesky_solve(&l, &col.to_owned()));
    }
    Ok(x.reversed_axes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_is_its_own_pinv() {
        let p = right_pinv(&Array2::<f64>::eye(3)).unwrap();
        assert_eq!(p, Array2::<f64>::eye(3));
    }

    #[test]
    fn wide_selector() {
        let m = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let p = right_pinv(&m).unwrap();
        assert_eq!(p, array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]);
    }

    #[test]
    fn rank_deficient_is_an_error() {
        let m = array![[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]];
        assert!(matches!(right_pinv(&m), Err(Error::RankDeficient { rank: 1, rows: 2 })));
    }
}
