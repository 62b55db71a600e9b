//! Finite element solver for the two-dimensional time-dependent
//! Ginzburg–Landau equations under the Lorenz-type gauge `φ = −∇·A`.
//!
//! The order parameter is discretized with complex P1 Lagrange elements,
//! the electric potential with P2 Lagrange elements and the magnetic
//! potential with full-P1 (second-kind) Nédélec edge elements. Each time
//! step first solves a linear mixed system for `(φ, A)` and then a monotone
//! nonlinear system for `ψ`.
//!
//! Module map:
//!
//! * [`mesh`]: structured triangulations of the L-shaped test domains.
//! * [`fe`]: degree-of-freedom maps, basis functions and interpolation.
//! * [`quadrature`], [`sparse`], [`forms`]: quadrature, sparse storage and
//!   assembly of every bilinear and linear form of the scheme.
//! * [`tdgl`]: the decoupled backward-Euler stepper and discrete energy.
//! * [`hodge`]: discrete divergence, harmonic fields and Hodge splitting.
//! * [`mms`]: manufactured solution with automatically differentiated sources.
//! * [`baseline`]: nodal Galerkin comparator for the magnetic potential.
//! * [`config`], [`study`], [`vtk`]: run configuration and file output.

pub mod baseline;
pub mod config;
mod error;
pub mod fe;
pub mod forms;
pub mod hodge;
pub mod jet;
pub mod mesh;
pub mod mms;
pub mod quadrature;
pub mod sparse;
pub mod study;
pub mod tdgl;
pub mod vtk;

pub use error::{Error, Result};
pub use num_complex::Complex64;
