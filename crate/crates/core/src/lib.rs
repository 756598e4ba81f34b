//! Radiative cooling of an electron-spin ensemble coupled to a superconducting
//! microwave resonator.
//!
//! The crate is organised bottom-up:
//!
//! * [`hamiltonian`]: bismuth-donor level structure, transitions and field sweeps.
//! * [`thermal`]: bosonic occupations, multi-bath equilibration, hot/cold load
//!   photon populations, Purcell and total relaxation rates, cooling factor.
//! * [`polarization`]: Boltzmann populations and echo population differences.
//! * [`coupling`]: vacuum field of the inductor strip and the coupling
//!   distribution of the implanted ensemble.
//! * [`blochsim`]: semiclassical cavity + inhomogeneous spin ensemble dynamics
//!   under pulse sequences.
//! * [`estimators`]: least-squares fitters and the analytic SNR / cooling models.
//!
//! Frequencies are cyclic (Hz) everywhere in the public API. Rates (`kappa`,
//! `gamma`) are in s⁻¹. Factors of 2π appear only inside the equations of motion
//! and the rate formulas that need angular quantities.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blochsim;
pub mod constants;
pub mod coupling;
mod error;
pub mod estimators;
pub mod hamiltonian;
pub mod par;
pub mod polarization;
pub mod thermal;

pub use error::{Error, Result};
