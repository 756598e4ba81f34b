//! Semiclassical simulation of an inhomogeneous spin ensemble coupled to a
//! driven resonator.
//!
//! In the frame rotating at the resonator frequency, with g and detunings in
//! angular units:
//!
//! ```text
//! da/dt   = −(κ/2) a − i N Σ_k w_k g_k s⁻_k + √κ_ext a_in
//! ds⁻/dt  = −(i δ_k + 1/T2) s⁻_k + i g_k a s_z,k
//! ds_z/dt = −Γ1,k (s_z,k − s_z,eq) + 2i g_k (a* s⁻_k − a s⁻*_k)
//! ```
//!
//! `a` is in units of √photons and `a_in` in √(photons/s). The output field
//! is `a_out = √κ_ext a − a_in`. With these conventions 4|s⁻|² + s_z² ≤ 1.
//!
//! Internally the cavity field is split into the empty-cavity response to the
//! drive and the part radiated by the spins. Their sum obeys the equation
//! above; keeping them apart lets echoes be recorded free of pulse ring-down.

pub mod integrator;
pub mod sequence;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::TWO_PI;
use crate::coupling::CouplingDistribution;
use crate::thermal::{purcell_rate, two_level_polarization, ResonatorParams};
use crate::{par, Error, Result};

use integrator::{AdaptiveOptions, Dopri5, OdeSystem, Rk4, StepStats};

/// Above this many groups the per-group derivative is evaluated in parallel.
const PARALLEL_GROUPS: usize = 4096;
const GROUP_CHUNK: usize = 512;
/// Reals used by the two cavity field components.
const CAVITY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinGroup {
    /// Coupling strength, Hz.
    pub g: f64,
    /// Spin frequency minus resonator frequency, Hz.
    pub detuning: f64,
    /// Longitudinal relaxation rate, s⁻¹.
    pub gamma1: f64,
    /// s; infinite disables transverse decay.
    pub t2: f64,
    /// Equilibrium s_z in [−1, 0].
    pub sz_eq: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_g: usize,
    pub n_delta: usize,
    /// Full width of the square spin-frequency distribution, Hz.
    pub freq_width: f64,
    pub t2: f64,
    /// K
    pub spin_temperature: f64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            n_g: 40,
            n_delta: 41,
            freq_width: 3e6,
            t2: 600e-6,
            spin_temperature: 0.02,
        }
    }
}

/// Tensor grid of coupling quantiles and detunings with Purcell relaxation.
///
/// Detunings of successive g rows are offset by a fraction of the grid
/// spacing, which spreads the comb of each row and suppresses the spurious
/// refocusing that an identical discrete comb would produce.
pub fn init_ensemble(
    rho: &CouplingDistribution,
    spec: &EnsembleSpec,
    res: &ResonatorParams,
) -> Result<Vec<SpinGroup>> {
    let total: f64 = rho.weights.iter().sum();
    if rho.weights.is_empty() || !(total > 0.0) {
        return Err(Error::EmptyDistribution);
    }
    if spec.n_g == 0 || spec.n_delta == 0 {
        return Err(Error::invalid("ensemble needs at least one group"));
    }
    if !(spec.t2 > 0.0) || !(spec.freq_width >= 0.0) {
        return Err(Error::invalid(
            "t2 must be positive and freq_width non-negative",
        ));
    }
    let sz_eq = -two_level_polarization(spec.spin_temperature, res.omega0);
    let spacing = spec.freq_width / spec.n_delta as f64;
    let mut out = Vec::with_capacity(spec.n_g * spec.n_delta);
    for (j, (g, wg)) in rho.quantile_groups(spec.n_g).into_iter().enumerate() {
        let offset = (j as f64 + 0.5) / spec.n_g as f64;
        for k in 0..spec.n_delta {
            let detuning = if spec.n_delta == 1 {
                0.0
            } else {
                -spec.freq_width / 2.0 + (k as f64 + offset) * spacing
            };
            out.push(SpinGroup {
                g,
                detuning,
                gamma1: purcell_rate(g, res, detuning),
                t2: spec.t2,
                sz_eq,
                weight: wg / spec.n_delta as f64,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleState {
    pub a: Complex64,
    pub s_minus: Vec<Complex64>,
    pub s_z: Vec<f64>,
}

impl EnsembleState {
    pub fn equilibrium(groups: &[SpinGroup]) -> Self {
        Self {
            a: Complex64::new(0.0, 0.0),
            s_minus: vec![Complex64::new(0.0, 0.0); groups.len()],
            s_z: groups.iter().map(|g| g.sz_eq).collect(),
        }
    }

    /// Equilibrium with every group's s_z flipped.
    pub fn inverted(groups: &[SpinGroup]) -> Self {
        let mut s = Self::equilibrium(groups);
        s.s_z.iter_mut().for_each(|z| *z = -*z);
        s
    }

    /// Largest 4|s⁻|² + s_z² over groups.
    pub fn max_bloch_norm(&self) -> f64 {
        self.s_minus
            .iter()
            .zip(&self.s_z)
            .map(|(s, z)| 4.0 * s.norm_sqr() + z * z)
            .fold(0.0, f64::max)
    }

    /// Σ w_k s_z,k
    pub fn mean_sz(&self, groups: &[SpinGroup]) -> f64 {
        groups
            .iter()
            .zip(&self.s_z)
            .map(|(g, z)| g.weight * z)
            .sum()
    }

    /// Layout: driven field, radiated field, then (Re s⁻, Im s⁻, s_z) per group.
    /// An existing cavity field is treated as driven background.
    fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(CAVITY + 3 * self.s_z.len());
        y.extend_from_slice(&[self.a.re, self.a.im, 0.0, 0.0]);
        for (s, z) in self.s_minus.iter().zip(&self.s_z) {
            y.extend_from_slice(&[s.re, s.im, *z]);
        }
        y
    }

    fn unpack(y: &[f64]) -> Self {
        let spins = &y[CAVITY..];
        Self {
            a: Complex64::new(y[0] + y[2], y[1] + y[3]),
            s_minus: spins
                .chunks(3)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect(),
            s_z: spins.chunks(3).map(|c| c[2]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    Adaptive(AdaptiveOptions),
    /// Classical RK4 with steps no longer than `dt`.
    FixedRk4 {
        dt: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimControls {
    pub integrator: Integrator,
    /// Multiplies the automatic step cap min(1/(10κ), 1/(10 Ω_Rabi)).
    pub h_max_scale: f64,
    /// Output sampling interval during acquisition, s.
    pub sample_dt: f64,
    /// Advance long undriven delays in closed form.
    pub fast_path: bool,
    /// Number of spins represented by the unit-weight ensemble in the cavity source term.
    pub n_spins: f64,
    /// Phase used to project echo integrals; defaults to the first trace's peak phase.
    pub phase_reference: Option<f64>,
    /// Record only the spin-radiated output, removing the empty-cavity pulse response.
    pub subtract_background: bool,
}

impl Default for SimControls {
    fn default() -> Self {
        Self {
            integrator: Integrator::Adaptive(AdaptiveOptions::default()),
            h_max_scale: 1.0,
            sample_dt: 10e-9,
            fast_path: true,
            n_spins: 1.0,
            phase_reference: None,
            subtract_background: true,
        }
    }
}

/// Delays at least this many 1/κ long take the closed-form path.
pub const FAST_PATH_KAPPA_TIMES: f64 = 100.0;
/// Stepped ring-down before, and re-settling after, a closed-form delay, in 1/κ.
const RING_DOWN_KAPPA_TIMES: f64 = 60.0;
const SETTLE_KAPPA_TIMES: f64 = 20.0;

struct Dynamics {
    g: Vec<f64>,
    source: Vec<f64>,
    det: Vec<f64>,
    gamma1: Vec<f64>,
    inv_t2: Vec<f64>,
    sz_eq: Vec<f64>,
    kappa: f64,
    sqrt_kext: f64,
    drive: Complex64,
}

impl Dynamics {
    fn new(groups: &[SpinGroup], res: &ResonatorParams, n_spins: f64) -> Self {
        let g: Vec<f64> = groups.iter().map(|s| TWO_PI * s.g).collect();
        Self {
            source: groups
                .iter()
                .zip(&g)
                .map(|(s, g)| n_spins * s.weight * g)
                .collect(),
            g,
            det: groups.iter().map(|s| TWO_PI * s.detuning).collect(),
            gamma1: groups.iter().map(|s| s.gamma1).collect(),
            inv_t2: groups
                .iter()
                .map(|s| if s.t2.is_finite() { 1.0 / s.t2 } else { 0.0 })
                .collect(),
            sz_eq: groups.iter().map(|s| s.sz_eq).collect(),
            kappa: res.kappa(),
            sqrt_kext: res.kappa_ext.sqrt(),
            drive: Complex64::new(0.0, 0.0),
        }
    }

    fn group_rhs(&self, k: usize, ar: f64, ai: f64, y: &[f64], out: &mut [f64]) {
        let (sr, si, sz) = (y[0], y[1], y[2]);
        let (g, d, g2) = (self.g[k], self.det[k], self.inv_t2[k]);
        out[0] = -g2 * sr + d * si - g * sz * ai;
        out[1] = -d * sr - g2 * si + g * sz * ar;
        out[2] = -self.gamma1[k] * (sz - self.sz_eq[k]) - 4.0 * g * (ar * si - ai * sr);
    }

    fn max_rabi(&self) -> f64 {
        let a_ss = 2.0 * self.sqrt_kext * self.drive.norm() / self.kappa;
        2.0 * a_ss * self.g.iter().fold(0.0f64, |m, &g| m.max(g))
    }
}

impl OdeSystem for Dynamics {
    fn dim(&self) -> usize {
        CAVITY + 3 * self.g.len()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let spins = &y[CAVITY..];
        // Fixed summation order keeps results independent of thread count.
        let (mut sum_r, mut sum_i) = (0.0, 0.0);
        for (c, s) in self.source.iter().zip(spins.chunks(3)) {
            sum_r += c * s[0];
            sum_i += c * s[1];
        }
        let half = 0.5 * self.kappa;
        dy[0] = -half * y[0] + self.sqrt_kext * self.drive.re;
        dy[1] = -half * y[1] + self.sqrt_kext * self.drive.im;
        dy[2] = -half * y[2] + sum_i;
        dy[3] = -half * y[3] - sum_r;
        let (ar, ai) = (y[0] + y[2], y[1] + y[3]);
        let n = self.g.len();
        if n > PARALLEL_GROUPS {
            par::for_each_chunk_mut(&mut dy[CAVITY..], 3 * GROUP_CHUNK, |start, out| {
                let k0 = start / 3;
                for (j, o) in out.chunks_mut(3).enumerate() {
                    let k = k0 + j;
                    self.group_rhs(k, ar, ai, &spins[3 * k..3 * k + 3], o);
                }
            });
        } else {
            for (k, o) in dy[CAVITY..].chunks_mut(3).enumerate() {
                self.group_rhs(k, ar, ai, &spins[3 * k..3 * k + 3], o);
            }
        }
    }
}

/// Sampled output field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EchoTrace {
    /// s, uniformly spaced.
    pub t: Vec<f64>,
    /// √(photons/s)
    pub a_out: Vec<Complex64>,
}

impl EchoTrace {
    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            t: self.t.clone(),
            a_out: self.a_out.iter().map(|z| z * c).collect(),
        }
    }
}

/// Phase of the largest-magnitude sample; 0 for an all-zero trace.
pub fn reference_phase(trace: &EchoTrace) -> f64 {
    trace
        .a_out
        .iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .filter(|z| z.norm() > 0.0)
        .map(|z| z.arg())
        .unwrap_or(0.0)
}

/// Re(e^{−iφ} ∫ a_out dt) over `window` (whole trace if `None`), trapezoid rule.
pub fn integrate_echo(trace: &EchoTrace, window: Option<(f64, f64)>, phase: f64) -> Result<f64> {
    let (t0, t1) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let tol = 1e-12 * trace.t.last().map_or(1.0, |t| t.abs().max(1e-9));
    let idx: Vec<usize> = (0..trace.t.len())
        .filter(|&i| trace.t[i] >= t0 - tol && trace.t[i] <= t1 + tol)
        .collect();
    if idx.len() < 2 {
        return Err(Error::EmptyWindow);
    }
    let rot = Complex64::from_polar(1.0, -phase);
    let mut acc = Complex64::new(0.0, 0.0);
    for w in idx.windows(2) {
        let dt = trace.t[w[1]] - trace.t[w[0]];
        acc += (trace.a_out[w[0]] + trace.a_out[w[1]]) * (0.5 * dt);
    }
    Ok((acc * rot).re)
}

enum Stepper {
    Adaptive(Dopri5, AdaptiveOptions),
    Fixed(Rk4, f64),
}

/// Time-stepping engine holding the packed state.
pub struct Simulator {
    dyn_: Dynamics,
    y: Vec<f64>,
    t: f64,
    stepper: Stepper,
    controls: SimControls,
    max_bloch: f64,
    stats: StepStats,
}

impl Simulator {
    pub fn new(
        groups: &[SpinGroup],
        res: &ResonatorParams,
        state: &EnsembleState,
        controls: SimControls,
    ) -> Result<Self> {
        res.validate()?;
        if state.s_z.len() != groups.len() || state.s_minus.len() != groups.len() {
            return Err(Error::invalid("state and groups differ in length"));
        }
        let dyn_ = Dynamics::new(groups, res, controls.n_spins);
        let dim = dyn_.dim();
        let stepper = match controls.integrator {
            Integrator::Adaptive(o) => Stepper::Adaptive(Dopri5::new(dim, 1e-10), o),
            Integrator::FixedRk4 { dt } => {
                if !(dt > 0.0) {
                    return Err(Error::invalid("fixed step must be positive"));
                }
                Stepper::Fixed(Rk4::new(dim), dt)
            }
        };
        Ok(Self {
            dyn_,
            y: state.pack(),
            t: 0.0,
            stepper,
            controls,
            max_bloch: state.max_bloch_norm(),
            stats: StepStats::default(),
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> EnsembleState {
        EnsembleState::unpack(&self.y)
    }

    pub fn max_bloch_norm(&self) -> f64 {
        self.max_bloch
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    fn h_cap(&self) -> f64 {
        let rabi = self.dyn_.max_rabi();
        let mut cap = 1.0 / (10.0 * self.dyn_.kappa);
        if rabi > 0.0 {
            cap = cap.min(1.0 / (10.0 * rabi));
        }
        cap * self.controls.h_max_scale
    }

    fn output(&self) -> Complex64 {
        let radiated = Complex64::new(self.y[2], self.y[3]) * self.dyn_.sqrt_kext;
        if self.controls.subtract_background {
            radiated
        } else {
            radiated + Complex64::new(self.y[0], self.y[1]) * self.dyn_.sqrt_kext - self.dyn_.drive
        }
    }

    fn step_to(&mut self, t1: f64) -> Result<()> {
        let cap = self.h_cap();
        let mut max_bloch = self.max_bloch;
        let track = |_: f64, y: &[f64]| {
            for c in y[CAVITY..].chunks(3) {
                max_bloch = max_bloch.max(4.0 * (c[0] * c[0] + c[1] * c[1]) + c[2] * c[2]);
            }
        };
        let stats = match &mut self.stepper {
            Stepper::Adaptive(dp, opts) => {
                let o = AdaptiveOptions {
                    h_max: opts.h_max.min(cap),
                    ..*opts
                };
                dp.integrate(&self.dyn_, self.t, t1, &mut self.y, &o, track)?
            }
            Stepper::Fixed(rk, dt) => {
                let h = dt.min(cap);
                let steps = ((t1 - self.t) / h).ceil().max(1.0) as usize;
                rk.integrate(&self.dyn_, self.t, t1, &mut self.y, steps, track)
            }
        };
        self.max_bloch = max_bloch;
        self.stats.accepted += stats.accepted;
        self.stats.rejected += stats.rejected;
        self.t = t1;
        Ok(())
    }

    /// Rectangular drive of complex amplitude `amp·e^{iφ}` (√(photons/s)).
    pub fn pulse(&mut self, amplitude: f64, phase: f64, duration: f64) -> Result<()> {
        self.dyn_.drive = Complex64::from_polar(amplitude, phase);
        let r = self.step_to(self.t + duration);
        self.dyn_.drive = Complex64::new(0.0, 0.0);
        r
    }

    /// Free evolution; long delays use the closed-form path when enabled.
    pub fn delay(&mut self, duration: f64) -> Result<()> {
        let k = self.dyn_.kappa;
        if self.controls.fast_path && duration >= FAST_PATH_KAPPA_TIMES / k {
            let ring = RING_DOWN_KAPPA_TIMES / k;
            let settle = SETTLE_KAPPA_TIMES / k;
            self.step_to(self.t + ring)?;
            self.free_closed_form(duration - ring - settle);
            self.step_to(self.t + settle)
        } else {
            self.step_to(self.t + duration)
        }
    }

    /// Uncoupled free evolution: the cavity rings down and each group relaxes on its own.
    fn free_closed_form(&mut self, dt: f64) {
        let d = &self.dyn_;
        let decay = (-0.5 * d.kappa * dt).exp();
        self.y[..CAVITY].iter_mut().for_each(|v| *v *= decay);
        for (k, c) in self.y[CAVITY..].chunks_mut(3).enumerate() {
            let s = Complex64::new(c[0], c[1])
                * Complex64::from_polar((-d.inv_t2[k] * dt).exp(), -d.det[k] * dt);
            c[0] = s.re;
            c[1] = s.im;
            c[2] = d.sz_eq[k] + (c[2] - d.sz_eq[k]) * (-d.gamma1[k] * dt).exp();
        }
        self.t += dt;
    }

    /// Free evolution while sampling the output field.
    pub fn acquire(&mut self, duration: f64) -> Result<EchoTrace> {
        let n = (duration / self.controls.sample_dt).round().max(1.0) as usize;
        let t0 = self.t;
        let mut t = Vec::with_capacity(n + 1);
        let mut a_out = Vec::with_capacity(n + 1);
        t.push(t0);
        a_out.push(self.output());
        for i in 1..=n {
            let ti = t0 + duration * i as f64 / n as f64;
            self.step_to(ti)?;
            t.push(ti);
            a_out.push(self.output());
        }
        Ok(EchoTrace { t, a_out })
    }

    /// Constant drive for `duration`, sampling the output throughout.
    pub fn drive_and_record(&mut self, drive: Complex64, duration: f64) -> Result<EchoTrace> {
        self.dyn_.drive = drive;
        let r = self.acquire(duration);
        self.dyn_.drive = Complex64::new(0.0, 0.0);
        r
    }
}

/// Advance `state` under a constant drive for `duration`, recording the output.
pub fn evolve(
    state: &EnsembleState,
    groups: &[SpinGroup],
    res: &ResonatorParams,
    drive: Complex64,
    duration: f64,
    controls: &SimControls,
) -> Result<(EnsembleState, EchoTrace)> {
    let mut sim = Simulator::new(groups, res, state, *controls)?;
    let trace = sim.drive_and_record(drive, duration)?;
    Ok((sim.state(), trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Event {
    Pulse {
        amplitude: f64,
        phase: f64,
        duration: f64,
    },
    Delay {
        duration: f64,
    },
    Acquire {
        duration: f64,
    },
}

impl Event {
    pub fn duration(&self) -> f64 {
        match *self {
            Event::Pulse { duration, .. }
            | Event::Delay { duration }
            | Event::Acquire { duration } => duration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub events: Vec<Event>,
    /// Start-to-start spacing of repeated shots, s.
    pub repetition_time: Option<f64>,
    pub shots: usize,
}

impl PulseSequence {
    pub fn new(events: Vec<Event>) -> Self {
        Self {
            events,
            repetition_time: None,
            shots: 1,
        }
    }

    pub fn duration(&self) -> f64 {
        self.events.iter().map(Event::duration).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.events.is_empty() {
            return Err(Error::invalid("sequence has no events"));
        }
        for e in &self.events {
            let d = e.duration();
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::invalid(
                    "event durations must be positive and finite",
                ));
            }
            if let Event::Pulse {
                amplitude, phase, ..
            } = e
            {
                if !amplitude.is_finite() || !phase.is_finite() {
                    return Err(Error::invalid("pulse amplitude and phase must be finite"));
                }
            }
        }
        if self.shots == 0 {
            return Err(Error::invalid("at least one shot is required"));
        }
        if self.shots > 1 {
            match self.repetition_time {
                Some(t) if t >= self.duration() => {}
                _ => {
                    return Err(Error::invalid(
                        "repeated shots need a repetition time covering the sequence",
                    ))
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceResult {
    /// One trace per acquire event, from the last shot.
    pub traces: Vec<EchoTrace>,
    /// Echo area per acquire event, averaged over shots.
    pub areas: Vec<f64>,
    pub phase_reference: f64,
    pub final_state: EnsembleState,
    pub max_bloch_norm: f64,
    pub steps: usize,
}

impl SequenceResult {
    /// Mean echo area over all acquire windows (CPMG averaging).
    pub fn mean_area(&self) -> f64 {
        self.areas.iter().sum::<f64>() / self.areas.len().max(1) as f64
    }
}

/// Execute `seq` from `initial` (equilibrium if `None`).
pub fn run_sequence(
    seq: &PulseSequence,
    groups: &[SpinGroup],
    res: &ResonatorParams,
    initial: Option<&EnsembleState>,
    controls: &SimControls,
) -> Result<SequenceResult> {
    seq.validate()?;
    let start = initial
        .cloned()
        .unwrap_or_else(|| EnsembleState::equilibrium(groups));
    let mut sim = Simulator::new(groups, res, &start, *controls)?;
    let mut sums: Vec<f64> = Vec::new();
    let mut traces = Vec::new();
    let mut phase = controls.phase_reference;
    for shot in 0..seq.shots {
        if shot > 0 {
            let rest = seq.repetition_time.expect("validated") - seq.duration();
            if rest > 0.0 {
                sim.delay(rest)?;
            }
        }
        traces.clear();
        for e in &seq.events {
            match *e {
                Event::Pulse {
                    amplitude,
                    phase,
                    duration,
                } => sim.pulse(amplitude, phase, duration)?,
                Event::Delay { duration } => sim.delay(duration)?,
                Event::Acquire { duration } => traces.push(sim.acquire(duration)?),
            }
        }
        let phi = *phase.get_or_insert_with(|| traces.first().map(reference_phase).unwrap_or(0.0));
        let areas = traces
            .iter()
            .map(|tr| integrate_echo(tr, None, phi))
            .collect::<Result<Vec<_>>>()?;
        if sums.is_empty() {
            sums = vec![0.0; areas.len()];
        }
        for (s, a) in sums.iter_mut().zip(areas) {
            *s += a;
        }
    }
    Ok(SequenceResult {
        traces,
        areas: sums.into_iter().map(|s| s / seq.shots as f64).collect(),
        phase_reference: phase.unwrap_or(0.0),
        final_state: sim.state(),
        max_bloch_norm: sim.max_bloch_norm(),
        steps: sim.stats().accepted,
    })
}
