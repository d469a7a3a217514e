//! Dirichlet problems for the Laplace-Beltrami operator and derived objects:
//! harmonic extensions, Green columns, Poisson kernels, and a div-curl solve.

mod dirichlet;
mod divcurl;
mod green;
mod manufactured;
pub mod sparse;

pub use dirichlet::{BoundaryControl, DirichletOperator, Solve};
pub use divcurl::{DivCurl, DIVCURL_FLAG};
pub use manufactured::{laplace_beltrami_pointwise, manufactured_error, manufactured_solution};
pub use green::{export_green, export_kernel, GreenColumn, KernelKind, NormalStencil, PoissonKernel};
