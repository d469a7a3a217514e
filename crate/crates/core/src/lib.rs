//! Numerical laboratory for harmonic quaternion fields on voxel Riemannian domains.
//!
//! A quaternion field is a pair `{α, u}` of a scalar function and a vector field.
//! It is harmonic when `∇α = rot u` and `div u = 0` hold in the interior. This
//! crate discretizes a coordinate box (optionally with a cavity or a through
//! hole) carrying a user supplied metric `g`, and provides
//!
//! * the intrinsic vector calculus of `(Ω, g)` ([`geometry`]),
//! * the pointwise geometric quaternion algebra and its field version ([`quaternion`]),
//! * Dirichlet solves for the Laplace-Beltrami operator, Green columns,
//!   Poisson kernels and a div-curl solver ([`elliptic`]),
//! * boundary controllability of values and gradients ([`control`]),
//! * 2-jets and the Laplace jet ([`jets`]),
//! * partition-of-unity representation and algebra approximation ([`density`]),
//! * metric recovery from harmonic samples ([`recovery`]),
//! * Hodge-space diagnostics and a surface uniqueness probe ([`analysis`]),
//! * a config driven experiment runner ([`cli`]).

pub mod analysis;
pub mod cli;
pub mod control;
pub mod density;
pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod jets;
pub mod linalg;
pub mod quaternion;
pub mod recovery;

pub use error::{Error, Result};
pub use geometry::{GridDomain, MaskSpec, MetricField, NodeKind, ScalarField, VectorField};
pub use quaternion::{Quaternion, QuaternionField};
