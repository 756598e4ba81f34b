//! Bosonic occupations, effective temperatures of multiply-bathed systems,
//! cavity photon populations under hot/cold loads, Purcell rates and the
//! cooling factor.
//!
//! Frequencies are cyclic (Hz). Rates and linewidths are in s⁻¹ (angular).

use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN, PLANCK, RESONATOR_FREQUENCY, RESONATOR_IMPEDANCE, TWO_PI};
use crate::{Error, Result};

/// Occupations below this are treated as zero temperature.
const OCCUPATION_FLOOR: f64 = 1e-15;

/// hν/k in kelvin.
pub fn quantum_temperature(omega: f64) -> f64 {
    PLANCK * omega / BOLTZMANN
}

/// Bose–Einstein occupation 1/(e^{hν/kT} − 1); zero for T ≤ 0.
pub fn bose_occupation(t: f64, omega: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    1.0 / (quantum_temperature(omega) / t).exp_m1()
}

/// Inverse of [`bose_occupation`].
pub fn temperature_from_occupation(n: f64, omega: f64) -> f64 {
    if n < OCCUPATION_FLOOR {
        return 0.0;
    }
    quantum_temperature(omega) / (1.0 / n).ln_1p()
}

/// tanh(hν/2kT), the polarization of a two-level system; 1 at T = 0.
pub fn two_level_polarization(t: f64, omega: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    (quantum_temperature(omega) / (2.0 * t)).tanh()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathCoupling {
    /// Zero-temperature emission rate into the bath, s⁻¹.
    pub rate: f64,
    /// K
    pub temperature: f64,
}

impl BathCoupling {
    pub fn new(rate: f64, temperature: f64) -> Self {
        Self { rate, temperature }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate >= 0.0) || !self.rate.is_finite() {
            return Err(Error::invalid("bath rate must be finite and non-negative"));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::invalid("bath temperature must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    /// Resonance frequency, Hz.
    pub omega0: f64,
    /// Internal loss rate, s⁻¹.
    pub kappa_int: f64,
    /// Coupling rate to the measurement line, s⁻¹.
    pub kappa_ext: f64,
    /// Characteristic impedance, Ω.
    pub z0: f64,
}

impl ResonatorParams {
    /// Resonator with the default frequency and impedance and the given loss rates (s⁻¹).
    pub fn with_rates(kappa_int: f64, kappa_ext: f64) -> Self {
        Self {
            omega0: RESONATOR_FREQUENCY,
            kappa_int,
            kappa_ext,
            z0: RESONATOR_IMPEDANCE,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_int + self.kappa_ext
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0) || !(self.z0 > 0.0) {
            return Err(Error::invalid(
                "resonator frequency and impedance must be positive",
            ));
        }
        if !(self.kappa_int >= 0.0) || !(self.kappa_ext > 0.0) {
            return Err(Error::invalid(
                "kappa_ext must be positive and kappa_int non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadConfig {
    /// Input line thermalized at the phonon temperature.
    Hot,
    /// Input line connected to a cold load through a lossy link.
    Cold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadScenario {
    pub config: LoadConfig,
    /// Fraction of the input noise that stays at the phonon temperature.
    pub alpha: f64,
    pub t_cold: f64,
    pub t_phon: f64,
    /// Temperature of the internal-loss bath.
    pub t_int: f64,
}

impl LoadScenario {
    pub fn hot(t_phon: f64, t_int: f64) -> Self {
        Self {
            config: LoadConfig::Hot,
            alpha: 0.0,
            t_cold: 0.0,
            t_phon,
            t_int,
        }
    }

    pub fn cold(alpha: f64, t_cold: f64, t_phon: f64, t_int: f64) -> Self {
        Self {
            config: LoadConfig::Cold,
            alpha,
            t_cold,
            t_phon,
            t_int,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha must lie in [0, 1]"));
        }
        if !(self.t_cold >= 0.0 && self.t_phon >= 0.0 && self.t_int >= 0.0) {
            return Err(Error::invalid("temperatures must be non-negative"));
        }
        Ok(())
    }
}

/// Occupation of a mode together with the temperature it corresponds to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub occupation: f64,
    pub effective_temperature: f64,
}

impl ThermalState {
    pub fn from_occupation(occupation: f64, omega: f64) -> Self {
        Self {
            occupation,
            effective_temperature: temperature_from_occupation(occupation, omega),
        }
    }

    pub fn from_temperature(t: f64, omega: f64) -> Self {
        Self {
            occupation: bose_occupation(t, omega),
            effective_temperature: t.max(0.0),
        }
    }

    /// 1/(2n̄ + 1)
    pub fn polarization(&self) -> f64 {
        1.0 / (2.0 * self.occupation + 1.0)
    }
}

/// Rate-weighted mean occupation of a system coupled to several baths.
pub fn effective_occupation(baths: &[BathCoupling], omega: f64) -> Result<ThermalState> {
    let total: f64 = baths.iter().map(|b| b.rate).sum();
    if !(total > 0.0) {
        return Err(Error::AllRatesZero);
    }
    let n = baths
        .iter()
        .map(|b| b.rate * bose_occupation(b.temperature, omega))
        .sum::<f64>()
        / total;
    Ok(ThermalState::from_occupation(n, omega))
}

/// Intra-resonator thermal photon population for a load scenario.
pub fn cavity_occupation(res: &ResonatorParams, scen: &LoadScenario) -> ThermalState {
    let w = res.omega0;
    let kappa = res.kappa();
    let internal = res.kappa_int / kappa * bose_occupation(scen.t_int, w);
    let line = match scen.config {
        LoadConfig::Hot => bose_occupation(scen.t_phon, w),
        LoadConfig::Cold => {
            (1.0 - scen.alpha) * bose_occupation(scen.t_cold, w)
                + scen.alpha * bose_occupation(scen.t_phon, w)
        }
    };
    ThermalState::from_occupation(internal + res.kappa_ext / kappa * line, w)
}

/// Loss fraction α that yields a cold-load photon temperature `target` (K).
///
/// The cold-load occupation is linear in α, so the inversion is exact. Values
/// outside [0, 1] mean the target is out of reach and are returned as-is.
pub fn alpha_for_photon_temperature(
    res: &ResonatorParams,
    scen: &LoadScenario,
    target: f64,
) -> Result<f64> {
    let w = res.omega0;
    let kappa = res.kappa();
    let n_target = bose_occupation(target, w);
    let n_int = res.kappa_int / kappa * bose_occupation(scen.t_int, w);
    let n_line = (n_target - n_int) * kappa / res.kappa_ext;
    let n_cold = bose_occupation(scen.t_cold, w);
    let n_phon = bose_occupation(scen.t_phon, w);
    if n_phon == n_cold {
        return Err(Error::invalid("load and phonon temperatures coincide"));
    }
    Ok((n_line - n_cold) / (n_phon - n_cold))
}

/// Γ_phot = κ g²/(κ²/4 + δ²) with g (Hz) and δ (Hz) in angular units.
pub fn purcell_rate(g: f64, res: &ResonatorParams, delta: f64) -> f64 {
    let kappa = res.kappa();
    let g = TWO_PI * g;
    let d = TWO_PI * delta;
    kappa * g * g / (kappa * kappa / 4.0 + d * d)
}

/// Γ₁ = Γ_phon(2n̄_phon + 1) + Γ_phot(2n̄_phot + 1).
pub fn spin_relaxation_rate(
    phonon: &BathCoupling,
    gamma_phot: f64,
    photons: &ThermalState,
    omega: f64,
) -> f64 {
    phonon.rate * (2.0 * bose_occupation(phonon.temperature, omega) + 1.0)
        + gamma_phot * (2.0 * photons.occupation + 1.0)
}

/// Spin temperature from competing phonon and photon baths.
pub fn spin_temperature(
    phonon: &BathCoupling,
    gamma_phot: f64,
    photons: &ThermalState,
    omega: f64,
) -> Result<ThermalState> {
    let total = phonon.rate + gamma_phot;
    if !(total > 0.0) {
        return Err(Error::AllRatesZero);
    }
    let n = (phonon.rate * bose_occupation(phonon.temperature, omega)
        + gamma_phot * photons.occupation)
        / total;
    Ok(ThermalState::from_occupation(n, omega))
}

/// Spin temperature that gives polarization `eta` times the polarization at `t_hot`.
pub fn spin_temperature_from_eta(eta: f64, t_hot: f64, omega: f64) -> Result<f64> {
    let p = eta * two_level_polarization(t_hot, omega);
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("polarization {p} outside (0, 1)")));
    }
    Ok(quantum_temperature(omega) / (2.0 * p.atanh()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoolingFactor {
    /// Γ₁(hot)/Γ₁(cold)
    pub eta: f64,
    /// p(cold)/p(hot); equal to `eta` in this model.
    pub polarization_ratio: f64,
    pub gamma1_hot: f64,
    pub gamma1_cold: f64,
    pub photons_hot: ThermalState,
    pub photons_cold: ThermalState,
    pub spin_hot: ThermalState,
    pub spin_cold: ThermalState,
}

/// Relaxation-rate and polarization ratios between hot and cold load scenarios.
pub fn cooling_factor(
    res: &ResonatorParams,
    hot: &LoadScenario,
    cold: &LoadScenario,
    phonon: &BathCoupling,
    gamma_phot: f64,
    omega: f64,
) -> Result<CoolingFactor> {
    let photons_hot = cavity_occupation(res, hot);
    let photons_cold = cavity_occupation(res, cold);
    let gamma1_hot = spin_relaxation_rate(phonon, gamma_phot, &photons_hot, omega);
    let gamma1_cold = spin_relaxation_rate(phonon, gamma_phot, &photons_cold, omega);
    let spin_hot = spin_temperature(phonon, gamma_phot, &photons_hot, omega)?;
    let spin_cold = spin_temperature(phonon, gamma_phot, &photons_cold, omega)?;
    Ok(CoolingFactor {
        eta: gamma1_hot / gamma1_cold,
        polarization_ratio: spin_cold.polarization() / spin_hot.polarization(),
        gamma1_hot,
        gamma1_cold,
        photons_hot,
        photons_cold,
        spin_hot,
        spin_cold,
    })
}
