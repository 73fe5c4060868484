//! Quasi-static brittle fracture with the AT1 phase-field model on bilinear
//! quadrilaterals.
//!
//! The crate covers mesh generation for the standard benchmarks, the spectral
//! energy split, global assembly of the coupled residual and Jacobian, sparse
//! symmetric-indefinite and unsymmetric direct solvers, and three nonlinear
//! schemes: alternating minimization, a quasi-monolithic extrapolation scheme
//! and a modified Newton method with inertia correction.

pub mod assembly;
pub mod bench;
pub mod constitutive;
pub mod linsolve;
pub mod mesh;
pub mod solvers;

pub use constitutive::{MaterialError, MaterialParams};
pub use mesh::{Benchmark, Mesh, MeshError};
