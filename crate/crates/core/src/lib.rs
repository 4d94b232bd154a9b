//! Numerical control of Schrödinger equations on waveguides `R^m x T^n`.
//!
//! The Euclidean directions are modelled by a `2πL`-periodic supercell, so
//! every object lives on a finite tensor grid and all linear operators are
//! exact Fourier multipliers. On top of that the crate provides:
//!
//! * [`regions`]: box-shaped control regions and the smooth cutoffs `χ`, `φ_T`;
//! * [`propagators`]: the free and twisted Schrödinger groups and a
//!   time-reversible Strang integrator for cubic NLS with a source;
//! * [`floquet`]: the discrete partial Floquet-Bloch transform and
//!   stationary-estimate experiments;
//! * [`observability`]: the HUM Gramian and observability constants;
//! * [`hum`]: linear and nonlinear null control and exact control;
//! * [`xsb`]: discrete Bourgain norms and estimate stress tests;
//! * [`harness`]: the config-driven experiment runner behind `wgctl`.

pub mod error;
pub mod field;
pub mod floquet;
pub mod grid;
pub mod harness;
pub mod hum;
pub mod io;
pub mod krylov;
pub mod numerics;
pub mod observability;
pub mod propagators;
pub mod regions;
pub mod xsb;

pub use error::{Error, Result};
pub use field::{Field, Representation, SobolevIndex};
pub use grid::WaveguideGrid;
