//! Solver and verification toolkit for the porous medium equation
//! `u_t = div(grad(u^m))` in the slow-diffusion regime `m > 1`.
//!
//! The crate covers four layers:
//!
//! * masked uniform grids, space-time cylinders and exhaustion sequences
//!   ([`geometry`]);
//! * an implicit Euler / Newton solver for the initial-boundary value
//!   problem with data imposed through `u^m`, including the penalized
//!   right-hand side used to build upper and lower class members
//!   ([`solver`]);
//! * upper/lower envelopes via repeated Poisson modification on exhausting
//!   cylinders, and the resolutivity gap for continuous data ([`perron`]);
//! * quantitative checkers for comparison, energy, and boundary-attainment
//!   estimates, plus the Barenblatt family as an exact oracle ([`verify`],
//!   [`exact`]).
//!
//! The crate is `no_std`-compatible (requires `alloc`); enable the `libm`
//! feature when building without `std` to supply float intrinsics.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("pme-core needs either the `std` or the `libm` feature");

pub mod boundary;
pub mod error;
pub mod exact;
pub mod field;
pub mod geometry;
pub(crate) mod math;
pub mod perron;
pub mod smooth;
pub mod solver;
pub mod verify;
pub mod weak;

pub use error::Error;
pub use field::ScalarField;
pub use geometry::{Cylinder, DomainMask, ParabolicBoundary, SpaceTimeGrid};
pub use solver::{SolveReport, SolverConfig};
