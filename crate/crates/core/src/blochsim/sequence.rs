//! Standard pulse sequences and parameter sweeps built on [`run_sequence`].

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use super::{run_sequence, Event, PulseSequence, SequenceResult, SimControls, SpinGroup};
use crate::constants::TWO_PI;
use crate::thermal::ResonatorParams;
use crate::{par, Error, Result};

pub const PI_DURATION: f64 = 250e-9;
pub const HAHN_TAU: f64 = 15e-6;
pub const ACQUIRE_WINDOW: f64 = 6e-6;

/// Timing shared by the echo-based sequences. All durations in s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoTiming {
    /// Free evolution between the end of one pulse and the start of the next.
    pub tau: f64,
    /// π pulse length; the π/2 pulse is half as long at the same amplitude.
    pub pi_duration: f64,
    /// Acquisition window length.
    pub window: f64,
    /// Shift of the window centre past the bare refocusing time.
    #[serde(default)]
    pub window_offset: f64,
}

impl Default for EchoTiming {
    fn default() -> Self {
        Self {
            tau: HAHN_TAU,
            pi_duration: PI_DURATION,
            window: ACQUIRE_WINDOW,
            window_offset: 0.0,
        }
    }
}

impl EchoTiming {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.pi_duration > 0.0 && self.window > 0.0) {
            return Err(Error::invalid("echo timing values must be positive"));
        }
        if self.window / 2.0 > self.echo_offset() + self.window_offset {
            return Err(Error::invalid(
                "acquisition window starts before the refocusing pulse ends",
            ));
        }
        Ok(())
    }

    /// Time from the end of the refocusing pulse to the echo for centred pulses.
    pub fn echo_offset(&self) -> f64 {
        self.tau + self.pi_duration / 4.0
    }

    /// Default timing with the window delayed by 2/κ: the cavity filters both
    /// the pulses reaching the spins and the field they radiate back.
    pub fn for_resonator(res: &ResonatorParams) -> Self {
        Self {
            window_offset: 2.0 / res.kappa(),
            ..Self::default()
        }
    }
}

/// Drive amplitude (√(photons/s)) giving a π rotation in `duration` to a
/// resonant spin of coupling `g` (Hz), including the cavity ring-down.
pub fn pi_amplitude(g: f64, res: &ResonatorParams, duration: f64) -> f64 {
    PI * res.kappa() / (4.0 * TWO_PI * g * res.kappa_ext.sqrt() * duration)
}

fn pulse(amplitude: f64, phase: f64, duration: f64) -> Event {
    Event::Pulse {
        amplitude,
        phase,
        duration,
    }
}

fn echo_tail(timing: &EchoTiming) -> [Event; 2] {
    [
        Event::Delay {
            duration: timing.echo_offset() + timing.window_offset - timing.window / 2.0,
        },
        Event::Acquire {
            duration: timing.window,
        },
    ]
}

/// π/2 – τ – π – echo, with the refocusing pulse at `second_amplitude`.
pub fn hahn_echo_with(amplitude: f64, second_amplitude: f64, timing: &EchoTiming) -> PulseSequence {
    let mut ev = vec![
        pulse(amplitude, 0.0, timing.pi_duration / 2.0),
        Event::Delay {
            duration: timing.tau,
        },
        pulse(second_amplitude, 0.0, timing.pi_duration),
    ];
    ev.extend(echo_tail(timing));
    PulseSequence::new(ev)
}

pub fn hahn_echo(amplitude: f64, timing: &EchoTiming) -> PulseSequence {
    hahn_echo_with(amplitude, amplitude, timing)
}

/// π – Δt – Hahn echo.
pub fn inversion_recovery(amplitude: f64, recovery: f64, timing: &EchoTiming) -> PulseSequence {
    let mut seq = hahn_echo(amplitude, timing);
    seq.events.splice(
        0..0,
        [
            pulse(amplitude, 0.0, timing.pi_duration),
            Event::Delay { duration: recovery },
        ],
    );
    seq
}

/// π/2 – τ – [π(90°) – acquire 2τ] × n. Each window holds one echo at its centre.
pub fn cpmg(amplitude: f64, n_pi: usize, timing: &EchoTiming) -> PulseSequence {
    let mut ev = vec![
        pulse(amplitude, 0.0, timing.pi_duration / 2.0),
        Event::Delay {
            duration: timing.tau,
        },
    ];
    for _ in 0..n_pi {
        ev.push(pulse(amplitude, FRAC_PI_2, timing.pi_duration));
        ev.push(Event::Acquire {
            duration: 2.0 * timing.tau,
        });
    }
    PulseSequence::new(ev)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub param: f64,
    pub area: f64,
}

/// Phase of the equilibrium Hahn echo, used to project every sweep point so
/// that population inversion appears as a sign change.
pub fn equilibrium_reference(
    groups: &[SpinGroup],
    res: &ResonatorParams,
    amplitude: f64,
    timing: &EchoTiming,
    controls: &SimControls,
) -> Result<SequenceResult> {
    timing.validate()?;
    let c = SimControls {
        phase_reference: None,
        ..*controls
    };
    run_sequence(&hahn_echo(amplitude, timing), groups, res, None, &c)
}

fn sweep<F>(
    params: &[f64],
    groups: &[SpinGroup],
    res: &ResonatorParams,
    controls: &SimControls,
    phase: f64,
    build: F,
) -> Result<Vec<SweepPoint>>
where
    F: Fn(f64) -> PulseSequence + Sync + Send,
{
    let c = SimControls {
        phase_reference: Some(phase),
        ..*controls
    };
    par::map(params, |&p| {
        let r = run_sequence(&build(p), groups, res, None, &c)?;
        Ok(SweepPoint {
            param: p,
            area: r.areas[0],
        })
    })
    .into_iter()
    .collect()
}

/// Echo area after each recovery delay in `delays` (s).
pub fn inversion_recovery_sweep(
    groups: &[SpinGroup],
    res: &ResonatorParams,
    amplitude: f64,
    timing: &EchoTiming,
    delays: &[f64],
    controls: &SimControls,
) -> Result<Vec<SweepPoint>> {
    let phase = equilibrium_reference(groups, res, amplitude, timing, controls)?.phase_reference;
    sweep(delays, groups, res, controls, phase, |d| {
        inversion_recovery(amplitude, d, timing)
    })
}

/// Hahn echo area versus the refocusing-pulse amplitude.
pub fn rabi_sweep(
    groups: &[SpinGroup],
    res: &ResonatorParams,
    amplitude: f64,
    timing: &EchoTiming,
    second_amplitudes: &[f64],
    controls: &SimControls,
) -> Result<Vec<SweepPoint>> {
    let phase = equilibrium_reference(groups, res, amplitude, timing, controls)?.phase_reference;
    sweep(second_amplitudes, groups, res, controls, phase, |a2| {
        hahn_echo_with(amplitude, a2, timing)
    })
}

/// Second-pulse amplitude giving the largest Hahn echo.
pub fn best_pi_amplitude(points: &[SweepPoint]) -> Option<f64> {
    points
        .iter()
        .max_by(|a, b| a.area.total_cmp(&b.area))
        .map(|p| p.param)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blochsim::integrate_echo;

    fn res() -> ResonatorParams {
        ResonatorParams::with_rates(1e5, 1.1e6)
    }

    #[test]
    fn hahn_layout() {
        let t = EchoTiming::default();
        let s = hahn_echo(1.0, &t);
        assert_eq!(s.events.len(), 5);
        assert!(EchoTiming::for_resonator(&res()).window_offset > 1e-6);
        let acq_start: f64 = s.events[..4].iter().map(Event::duration).sum();
        let echo = 2.0 * (t.pi_duration / 2.0 + t.tau + t.pi_duration / 2.0) - t.pi_duration / 4.0;
        assert!((acq_start + t.window / 2.0 - echo).abs() < 1e-15);
        s.validate().unwrap();
    }

    #[test]
    fn inversion_recovery_prepends_pi() {
        let s = inversion_recovery(2.0, 1e-3, &EchoTiming::default());
        assert_eq!(s.events.len(), 7);
        assert_eq!(s.events[0].duration(), PI_DURATION);
        assert_eq!(s.events[1], Event::Delay { duration: 1e-3 });
    }

    #[test]
    fn cpmg_pulses_are_quadrature() {
        let s = cpmg(1.0, 3, &EchoTiming::default());
        let phases: Vec<f64> = s
            .events
            .iter()
            .filter_map(|e| match e {
                Event::Pulse { phase, .. } => Some(*phase),
                _ => None,
            })
            .collect();
        assert_eq!(phases, vec![0.0, FRAC_PI_2, FRAC_PI_2, FRAC_PI_2]);
        assert_eq!(
            s.events
                .iter()
                .filter(|e| matches!(e, Event::Acquire { .. }))
                .count(),
            3
        );
    }

    #[test]
    fn window_must_follow_pulse() {
        let t = EchoTiming {
            tau: 1e-6,
            window: 4e-6,
            ..Default::default()
        };
        assert!(t.validate().is_err());
    }

    #[test]
    fn pi_amplitude_inverts_single_spin() {
        use crate::blochsim::{EnsembleState, Simulator};
        let r = res();
        let g = 40.0;
        let group = SpinGroup {
            g,
            detuning: 0.0,
            gamma1: 0.0,
            t2: f64::INFINITY,
            sz_eq: -0.3,
            weight: 1.0,
        };
        let groups = [group];
        let mut sim = Simulator::new(
            &groups,
            &r,
            &EnsembleState::equilibrium(&groups),
            SimControls::default(),
        )
        .unwrap();
        sim.pulse(pi_amplitude(g, &r, PI_DURATION), 0.0, PI_DURATION)
            .unwrap();
        sim.delay(40.0 / r.kappa()).unwrap();
        assert!(
            (sim.state().s_z[0] - 0.3).abs() < 1e-4,
            "{}",
            sim.state().s_z[0]
        );
    }

    #[test]
    fn echo_appears_in_window() {
        let r = res();
        let groups: Vec<SpinGroup> = (0..21)
            .map(|k| SpinGroup {
                g: 40.0,
                detuning: -1.5e6 + 3e6 * (k as f64 + 0.5) / 21.0,
                gamma1: 0.0,
                t2: 600e-6,
                sz_eq: -0.2,
                weight: 1.0 / 21.0,
            })
            .collect();
        let t = EchoTiming::for_resonator(&r);
        let out = run_sequence(
            &hahn_echo(pi_amplitude(40.0, &r, PI_DURATION), &t),
            &groups,
            &r,
            None,
            &SimControls::default(),
        )
        .unwrap();
        let tr = &out.traces[0];
        let peak = tr
            .a_out
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        // Peak sits away from the window edges.
        assert!(
            peak > tr.t.len() / 8 && peak < tr.t.len() * 7 / 8,
            "peak at {peak}/{}",
            tr.t.len()
        );
        let a = integrate_echo(tr, None, out.phase_reference).unwrap();
        assert!(a > 0.0);
        assert!(out.max_bloch_norm <= 0.04 + 1e-6);
    }
}
