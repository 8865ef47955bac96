//! Gate design toolkit for trapped-ion crystals with micromotion.
//!
//! The crate covers the chain from a Paul trap's Mathieu parameters to an
//! entangling-gate error budget:
//!
//! - [`mathieu`]: Floquet solution of the Mathieu equation, mode functions and
//!   classical secular/intrinsic/excess trajectories.
//! - [`crystal`]: equilibrium positions and normal modes of a linear chain.
//! - [`lightmatter`]: secular and first-micromotion-sideband force models.
//! - [`magnus`]: displacements, entangling phases, single- and multi-pulse
//!   Mølmer–Sørensen designs.
//! - [`errors`]: analytic infidelity estimates and gate-time sweeps.
//! - [`oracle`]: brute-force integration of the interaction Hamiltonian.
//!
//! All quantities are SI. Frequencies are angular (rad/s).
#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod consts;
pub mod crystal;
mod error;
pub mod errors;
pub mod lightmatter;
pub mod magnus;
pub mod mathieu;
pub mod oracle;
mod special;

pub use error::{Error, Result};

/// Complex double used throughout.
pub type C64 = num_complex::Complex64;
