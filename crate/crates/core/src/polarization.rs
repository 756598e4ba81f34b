//! Boltzmann populations over the donor levels and the population difference
//! probed by a quasi-degenerate transition pair.

use serde::Serialize;

use crate::constants::{BOLTZMANN, PLANCK};
use crate::hamiltonian::{FmLabel, LabeledLevel, Transition};
use crate::thermal::{quantum_temperature, two_level_polarization};
use crate::{Error, Result};

/// Default half-width of the window used to select a quasi-degenerate pair, Hz.
pub const PAIR_WINDOW: f64 = 5e6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationVector {
    pub temperature: f64,
    pub labels: Vec<FmLabel>,
    pub probabilities: Vec<f64>,
}

impl PopulationVector {
    pub fn get(&self, label: FmLabel) -> Option<f64> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .map(|i| self.probabilities[i])
    }

    fn require(&self, label: FmLabel) -> Result<f64> {
        self.get(label).ok_or(Error::MissingLevel {
            f: label.f,
            m: label.m,
        })
    }
}

/// Thermal occupation probabilities of `levels` at temperature `t` (K).
///
/// At T = 0 all weight goes to the lowest level (shared equally if the
/// ground level is degenerate); an infinite temperature gives a uniform
/// distribution.
pub fn boltzmann_populations(levels: &[LabeledLevel], t: f64) -> PopulationVector {
    let labels: Vec<FmLabel> = levels.iter().map(|l| l.label()).collect();
    let e_min = levels
        .iter()
        .map(|l| l.energy)
        .fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = if t.is_infinite() {
        vec![1.0; levels.len()]
    } else if t <= 0.0 {
        let scale = levels.iter().map(|l| l.energy.abs()).fold(0.0, f64::max);
        levels
            .iter()
            .map(|l| {
                if l.energy - e_min <= 1e-12 * scale {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    } else {
        let beta = PLANCK / (BOLTZMANN * t);
        levels
            .iter()
            .map(|l| (-(l.energy - e_min) * beta).exp())
            .collect()
    };
    let z: f64 = weights.iter().sum();
    PopulationVector {
        temperature: t,
        labels,
        probabilities: weights.iter().map(|w| w / z).collect(),
    }
}

/// The four states {|F_lo, m⟩, |F_lo, m−1⟩, |F_hi, m⟩, |F_hi, m−1⟩} and m
/// shared by two transitions |F_lo, m−1⟩↔|F_hi, m⟩ and |F_lo, m⟩↔|F_hi, m−1⟩.
fn pair_states(a: &Transition, b: &Transition) -> Result<(i32, i32, i32)> {
    let split = |t: &Transition| {
        if t.lower.f < t.upper.f {
            (t.lower, t.upper)
        } else {
            (t.upper, t.lower)
        }
    };
    let (a_lo, a_hi) = split(a);
    let (b_lo, b_hi) = split(b);
    let collision = || Error::StateCollision(format!("{a_lo}<->{a_hi} and {b_lo}<->{b_hi}"));
    if a_lo.f != b_lo.f || a_hi.f != b_hi.f || a_hi.f != a_lo.f + 1 {
        return Err(collision());
    }
    let m = a_lo.m.max(b_lo.m);
    let lo_ok = a_lo.m.min(b_lo.m) == m - 1;
    let hi_ok = a_hi.m.max(b_hi.m) == m && a_hi.m.min(b_hi.m) == m - 1;
    let crossed = a_lo.m + a_hi.m == 2 * m - 1 && b_lo.m + b_hi.m == 2 * m - 1;
    if !(lo_ok && hi_ok && crossed) {
        return Err(collision());
    }
    Ok((a_lo.f, a_hi.f, m))
}

/// p|F_lo, m⟩ + p|F_lo, m−1⟩ − p|F_hi, m⟩ − p|F_hi, m−1⟩ for a quasi-degenerate pair.
pub fn population_difference(
    levels: &[LabeledLevel],
    pair: (&Transition, &Transition),
    t: f64,
) -> Result<f64> {
    let (f_lo, f_hi, m) = pair_states(pair.0, pair.1)?;
    let pops = boltzmann_populations(levels, t);
    Ok(
        pops.require(FmLabel::new(f_lo, m))? + pops.require(FmLabel::new(f_lo, m - 1))?
            - pops.require(FmLabel::new(f_hi, m))?
            - pops.require(FmLabel::new(f_hi, m - 1))?,
    )
}

/// Pick the quasi-degenerate pair closest to `omega0` among transitions whose
/// frequencies lie within `window` (Hz) of it.
pub fn select_quasi_degenerate_pair(
    transitions: &[Transition],
    omega0: f64,
    window: f64,
) -> Result<(Transition, Transition)> {
    let near: Vec<&Transition> = transitions
        .iter()
        .filter(|t| (t.frequency - omega0).abs() <= window)
        .collect();
    let mut best: Option<(f64, Transition, Transition)> = None;
    for (i, a) in near.iter().enumerate() {
        for b in &near[i + 1..] {
            if pair_states(a, b).is_err() {
                continue;
            }
            let cost = (a.frequency - omega0).abs() + (b.frequency - omega0).abs();
            if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
                best = Some((cost, **a, **b));
            }
        }
    }
    best.map(|(_, a, b)| (a, b)).ok_or_else(|| {
        Error::invalid(format!(
            "no quasi-degenerate pair within {window} Hz of {omega0} Hz"
        ))
    })
}

/// tanh(hω/2kT)
pub fn spin_half_polarization(t: f64, omega: f64) -> f64 {
    two_level_polarization(t, omega)
}

/// tanh(x/2)/10 with x = hω0/kT: an isolated spin-1/2 carrying a tenth of the donors.
pub fn approx_population_difference(t: f64, omega0: f64) -> f64 {
    spin_half_polarization(t, omega0) / 10.0
}

/// Two-manifold estimate (1/9)(1 + e^{−x})/(1 + (11/9)e^{−x}) tanh(x/2) of the
/// population difference per transition, neglecting the in-manifold splittings.
pub fn two_manifold_population_difference(t: f64, omega0: f64) -> f64 {
    if t <= 0.0 {
        return 1.0 / 9.0;
    }
    let x = quantum_temperature(omega0) / t;
    let e = (-x).exp();
    (1.0 + e) / (1.0 + 11.0 / 9.0 * e) * (x / 2.0).tanh() / 9.0
}
