//! Renormalized Hartree-Fock-Bogoliubov dynamics of a translation-invariant
//! Bose gas on a truncated momentum lattice, together with the cubic and
//! quartic quantum-Boltzmann correction integrals built on top of it.

// NaN-rejecting `!(x > 0.0)` guards and index loops over paired fields are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dispersion;
pub mod error;
pub mod hfb;
pub mod kernels;
pub mod config;
pub mod lattice;
pub mod oracle;
pub mod pipeline;
pub mod potential;
pub mod qbe;
pub mod symplectic;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
