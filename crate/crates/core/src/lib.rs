//! Numerical machinery for nonlinear inner-variational equations
//! `h_zbar = H(z, h_z)`: singular-integral transforms, the good-solution
//! contraction solver, and verification of the quantitative estimates on
//! closed-form examples and solver output.

pub mod analysis;
pub mod energies;
pub mod error;
pub mod field;
pub mod gallery;
pub mod grid;
pub mod io;
mod spectral;
pub mod report;
pub mod solver;
pub mod structure;
pub mod transforms;

pub use error::{Error, Result};
pub use field::{ComplexField, FieldPair, RealField, Scheme};
pub use grid::{GridSpec, Region};
pub use num_complex::Complex64;
