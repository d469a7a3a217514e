//! Discrete Riemannian structure on a voxel coordinate chart.

mod domain;
pub(crate) mod field;
pub mod io;
mod metric;
pub mod ops;

pub use domain::{Facet, GridDomain, MaskSpec, NodeKind};
pub use field::{ScalarField, SmoothRandom, VectorField};
pub use metric::{inverse_defect, MetricField, MetricPreset, Sym3};
pub use ops::{div, grad, grad_with_boundary, inner, laplacian, rot, vector_laplacian, vector_product};
