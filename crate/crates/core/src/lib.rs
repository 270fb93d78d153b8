//! Numerical engine for self-consistent Hartree steady states of a two-lead
//! tight-binding open system.
//!
//! The system is a finite sample `ℂ^N` coupled by rank-one tunneling terms to
//! two semi-infinite Dirichlet chains. Everything here is `no_std` + `alloc`;
//! file formats and the command-line driver live in the `nesslab` crate.

#![no_std]
// NaN-rejecting `!(x > 0.0)` checks and index loops over coupled arrays are intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
extern crate alloc;

pub mod dynamics;
pub mod equilibrium;
mod error;
pub mod greens;
pub mod linalg;
pub mod model;
pub mod ness;
pub mod quadrature;
pub mod scattering;

pub use error::{Error, Result, Warning};
pub use model::{Lead, LeadVector, LocalizedVector, SampleMatrix, SystemSpec};
pub use num_complex::Complex64;
pub use quadrature::EnergyGrid;

/// Shorthand used throughout the crate.
#[allow(non_camel_case_types)]
pub type c64 = Complex64;
