//! Solver for the exterior potential of a near-monopole field given the
//! intensity of its gradient on the unit sphere.
//!
//! The nonlinear oblique boundary condition `|grad v| = f` on the sphere
//! is expanded around the monopole `1/r`: writing `v = 1/r + eps u` and
//! `f^2 = 1 + eps h` turns the problem into a cascade of exterior Neumann
//! problems, one per power of `eps`. Each order is solved by integrating
//! the second-kind Green's function of the unit sphere against the
//! current boundary data over the surface, and the surface trace of each
//! solution is fitted with low-degree surface harmonics so the next
//! order's boundary data can be assembled from its tangential gradients.
//!
//! Modules:
//! - [`sphere`]: spherical geometry, icosahedron / grid / imported meshes
//! - [`green`]: the exterior Neumann kernel and its collinear limit
//! - [`quadrature`]: Gauss-Legendre, adaptive Gauss-Kronrod, and the
//!   nested and rotated-frame surface integrators
//! - [`harmonics`]: surface-harmonic basis, least-squares fitting, and
//!   exterior extension by radial decay
//! - [`perturbation`]: boundary-data recursion and the order-by-order
//!   cascade
//! - [`models`]: manufactured exact solutions for validation
//! - [`report`]: run configuration, orchestration, and CSV reports

pub mod error;
pub mod green;
pub mod harmonics;
pub mod models;
pub mod perturbation;
pub mod quadrature;
pub mod report;
pub mod sphere;

pub use error::{Error, Result};
