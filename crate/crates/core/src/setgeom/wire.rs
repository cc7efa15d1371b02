//! JSON schema shared with the experiment harness:
//!
//! - zonotope: `{"center": [c_1, …, c_n], "generators": [[g_11, …, g_1p], …]}`
//!   with `generators` the `n × p` matrix, row-major;
//! - H-polytope: `{"C": [[…], …], "d": […]}`;
//! - matrix zonotope: `{"center": [[…]], "generators": [[[…]], …]}`.

use ndarray::{Array1, Array2};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{HPolytope, MatrixZonotope, Zonotope};
use crate::Real;

pub(crate) fn matrix_to_rows<T: Real>(m: &Array2<T>) -> Vec<Vec<T>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Rebuilds a matrix from rows; `cols` disambiguates the zero-row case.
pub(crate) fn rows_to_matrix<T: Real>(rows: &[Vec<T>], cols: Option<usize>) -> Result<Array2<T>, String> {
    let ncols = rows.first().map(Vec::len).or(cols).unwrap_or(0);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged matrix rows".into());
    }
    let flat: Vec<T> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), ncols), flat).map_err(|e| e.to_string())
}

#[derive(Serialize, Deserialize)]
struct ZonotopeWire<T> {
    center: Vec<T>,
    generators: Vec<Vec<T>>,
}

impl<T: Real> Serialize for Zonotope<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ZonotopeWire {
            center: self.center().to_vec(),
            generators: matrix_to_rows(self.generators()),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for Zonotope<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = ZonotopeWire::<T>::deserialize(d)?;
        let n = w.center.len();
        let g = if w.generators.is_empty() {
            Array2::zeros((n, 0))
        } else {
            rows_to_matrix(&w.generators, None).map_err(D::Error::custom)?
        };
        Zonotope::new(Array1::from(w.center), g).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct HPolytopeWire<T> {
    #[serde(rename = "C")]
    c: Vec<Vec<T>>,
    d: Vec<T>,
}

impl<T: Real> Serialize for HPolytope<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        HPolytopeWire {
            c: matrix_to_rows(self.normals()),
            d: self.offsets().to_vec(),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for HPolytope<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = HPolytopeWire::<T>::deserialize(d)?;
        let c = rows_to_matrix(&w.c, None).map_err(D::Error::custom)?;
        HPolytope::new(c, Array1::from(w.d)).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixZonotopeWire<T> {
    center: Vec<Vec<T>>,
    generators: Vec<Vec<Vec<T>>>,
}

impl<T: Real> Serialize for MatrixZonotope<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MatrixZonotopeWire {
            center: matrix_to_rows(self.center()),
            generators: self.generators().iter().map(matrix_to_rows).collect(),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for MatrixZonotope<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = MatrixZonotopeWire::<T>::deserialize(d)?;
        let c = rows_to_matrix(&w.center, None).map_err(D::Error::custom)?;
        let gens = w
            .generators
            .iter()
            .map(|g| rows_to_matrix(g, Some(c.ncols())))
            .collect::<Result<Vec<_>, _>>()
            .map_err(D::Error::custom)?;
        MatrixZonotope::new(c, gens).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zonotope_json_shape() {
        let z = Zonotope::new(array![1.0, 2.0], array![[1.0, 0.5], [0.0, 0.25]]).unwrap();
        let s = serde_json::to_string(&z).unwrap();
        assert_eq!(s, r#"{"center":[1.0,2.0],"generators":[[1.0,0.5],[0.0,0.25]]}"#);
        let back: Zonotope<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, z);
        let pt: Zonotope<f64> = serde_json::from_str(r#"{"center":[1.0],"generators":[]}"#).unwrap();
        assert_eq!(pt.num_generators(), 0);
    }

    #[test]
    fn hpoly_json_shape() {
        let p = HPolytope::new(array![[1.0, 0.0]], array![2.0]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"C":[[1.0,0.0]],"d":[2.0]}"#);
        assert!(serde_json::from_str::<HPolytope<f64>>(r#"{"C":[[1.0],[1.0,2.0]],"d":[1,2]}"#).is_err());
    }

    #[test]
    fn matrix_zonotope_json() {
        let mz = MatrixZonotope::new(array![[1.0, 2.0]], vec![array![[0.0, 1.0]]]).unwrap();
        let s = serde_json::to_string(&mz).unwrap();
        let back: MatrixZonotope<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, mz);
    }
}
