//! Dirichlet-Laplacian eigenvalues of planar domains.
//!
//! The pipeline meshes a polygonal [`geometry::Domain`] ([`meshgen`]),
//! assembles the P1 stiffness/mass pencil ([`fem`]), and extracts the lowest
//! eigenpairs ([`eig`]). Around it sit the closed-form spectra ([`analytic`]),
//! the universal and isoperimetric ratio bounds ([`bounds`]), the campaign
//! driver that maps `(λ₂/λ₁, λ₃/λ₁)` over domain families ([`scan`]) and the
//! first-order boundary-perturbation formulas ([`perturb`]).

pub mod error;
pub mod geometry;
pub mod meshgen;
pub mod fem;
pub mod eig;
pub mod solve;
pub mod numeric;
pub mod analytic;
pub mod bounds;
pub mod perturb;
pub mod scan;
pub mod rng;

pub use error::{Error, Result};
