//! Characteristic modes of electromagnetic scatterers computed from the
//! eigenvalues of a quadrature-sampled scattering dyadic.
//!
//! A backend ([`mie::MieBackend`], [`dda::DdaBackend`], or a dataset read with
//! [`io::read_dataset`]) produces far fields for plane-wave excitations;
//! [`scattering::assemble`] turns them into the scattering matrix,
//! [`modes::decompose`] extracts the modes and [`tracking::track`] follows
//! them across a frequency sweep.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dda;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mie;
pub mod modes;
pub mod par;
pub mod quadrature;
pub mod scattering;
pub mod swe;
pub mod tracking;

pub use error::{Error, Result};
pub use par::Execution;
