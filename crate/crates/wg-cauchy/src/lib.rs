//! Least-squares weak Galerkin (LS-WG) finite elements for the Cauchy problem
//! of convection-diffusion equations,
//!
//! ```text
//!   -eps * lap(u) + b . grad(u) = f   in Omega = (0,1)^2,
//!   u = g1,  grad(u) . n = g2         on the accessible boundary Gamma_1,
//! ```
//!
//! with no data on the remaining boundary Gamma_2. The discretization uses
//! weak functions `{v0, vb, vn}` (cell interior polynomial, edge trace, edge
//! normal flux) on general polygonal meshes, discrete weak gradient/Laplacian
//! operators of degree `k-1`, and a least-squares residual functional plus a
//! trace stabilizer. The resulting linear system is symmetric positive
//! definite regardless of the convection field.
//!
//! Modules follow the pipeline: [`mesh`] -> [`quadrature`] / [`polyspace`] ->
//! [`weakops`] -> [`assembly`] -> [`solver`] -> [`postproc`], with [`study`]
//! driving manufactured-solution convergence studies for the CLI.

pub mod assembly;
pub mod error;
pub mod mesh;
pub mod polynomial;
pub mod polyspace;
pub mod postproc;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod study;
pub mod weakops;

pub use error::{Result, WgError};

/// 2D point, f64 coordinates.
pub type Point = nalgebra::Point2<f64>;
/// 2D vector, f64 coordinates.
pub type Vec2 = nalgebra::Vector2<f64>;
