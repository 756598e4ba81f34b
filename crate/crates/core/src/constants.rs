//! Physical constants (SI, 2019 exact values where defined) and the default
//! Si:Bi / resonator parameters.

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Vacuum permeability, T·m/A.
pub const MU0: f64 = 1.256_637_062_12e-6;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Electron gyromagnetic ratio of the donor, Hz/T.
pub const GAMMA_E: f64 = 27.997e9;
/// 209Bi nuclear gyromagnetic ratio, Hz/T.
pub const GAMMA_N: f64 = 6.9e6;
/// Si:Bi isotropic hyperfine constant, Hz.
pub const HYPERFINE_A: f64 = 1.475e9;
/// 209Bi nuclear spin.
pub const BI_NUCLEAR_SPIN: f64 = 4.5;

/// Resonator frequency of the reference device, Hz.
pub const RESONATOR_FREQUENCY: f64 = 7.408e9;
/// Characteristic impedance of the reference LC resonator, ohm.
pub const RESONATOR_IMPEDANCE: f64 = 46.0;
