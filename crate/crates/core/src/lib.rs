//! Joint identification of an elemental Young's modulus field and a nodal
//! temperature field for one-way thermo-mechanically coupled 2D structures.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: triangulations, generators and the plain-text mesh format.
//! - [`fem`]: constant-strain plane-stress triangles with thermal strain,
//!   assembly and the primal solve.
//! - [`solver`]: sparse symmetric factorization reused by the adjoint solve.
//! - [`adjoint`]: adjoint right-hand side, gradients and finite-difference checks.
//! - [`sensors`], [`objective`]: sampling, normalization and the sensor cost.
//! - [`filter`]: vertex-morphing kernels and the sigmoid bound mapping.
//! - [`problem`]: the control-space problem tying fields, cost and chain rule together.
//! - [`optimize`]: BB-step descent, monolithic and Gauss-Seidel partitioned drivers.
//! - [`baseline`], [`metrics`]: thermal-field substitutes and error metrics.
//! - [`scenario`]: configuration, scenario orchestration and artifact export.

pub mod adjoint;
pub mod baseline;
mod error;
pub mod fem;
pub mod filter;
pub mod mesh;
pub mod metrics;
pub mod objective;
pub mod optimize;
pub mod problem;
pub mod scenario;
pub mod sensors;
pub mod solver;

pub use error::{Error, Result};
