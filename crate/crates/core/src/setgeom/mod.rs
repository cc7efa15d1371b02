//! Set calculus: zonotopes, H-polytopes and matrix zonotopes.

mod hpoly;
mod matzono;
mod wire;
mod zonotope;

pub use hpoly::HPolytope;
pub use matzono::{matrix_zonotope_vertices, MatrixZonotope, VertexModels, DEFAULT_VERTEX_CAP};
pub use zonotope::Zonotope;

