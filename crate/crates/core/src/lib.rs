//! Numerical core for simulating diffusive austenite to ferrite
//! transformation in two-phase polycrystals.
//!
//! Grains are carried by a small set of colored level-set functions. The
//! carbon field is solved on the whole domain with a diffuse phase interface
//! obtained from a tanh mollification of the ferrite-zone distance function,
//! so no jump conditions are needed across phase boundaries.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! file system lives in the `austensim` companion crate.
//!
//! Units throughout: lengths in µm, time in s, energies in J, temperatures in
//! K and concentrations in wt%.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diffusion;
mod error;
pub mod grid;
pub mod kinetics;
pub mod levelset;
pub mod linalg;
pub(crate) mod math;
pub mod microstructure;
pub mod oracle;
pub mod sim;
pub mod thermo;

pub use error::{Error, Result};
