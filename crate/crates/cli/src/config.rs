//! Experiment configuration: one TOML file shared by every subcommand.
//!
//! Every section is optional and falls back to the defaults below. Keys are
//! suffixed with their unit. `kappa_*_hz` are linewidths κ/2π; `gamma_*_hz`
//! are relaxation rates in s⁻¹ and are used as-is.

use std::path::Path;

use purcell_core::blochsim::integrator::AdaptiveOptions;
use purcell_core::blochsim::sequence::{EchoTiming, ACQUIRE_WINDOW};
use purcell_core::blochsim::{EnsembleSpec, Integrator, SimControls};
use purcell_core::constants::{RESONATOR_FREQUENCY, RESONATOR_IMPEDANCE, TWO_PI};
use purcell_core::coupling::{Binning, CurrentModel, GridSpec, ImplantationProfile, WireGeometry};
use purcell_core::estimators::GainTable;
use purcell_core::hamiltonian::SpinSystemParams;
use purcell_core::thermal::{BathCoupling, LoadConfig, LoadScenario, ResonatorParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Seeds synthetic data for the fitting subcommands.
    pub seed: u64,
    pub resonator: ResonatorSection,
    pub scenario: ScenarioSection,
    pub spins: SpinsSection,
    pub spin_system: SpinSystemSection,
    pub geometry: GeometrySection,
    pub ensemble: EnsembleSection,
    pub sequence: SequenceSection,
    pub psd: PsdSection,
    pub synthetic: SyntheticSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonatorSection {
    pub omega0_hz: f64,
    pub kappa_int_hz: f64,
    pub kappa_ext_hz: f64,
    pub z0_ohm: f64,
}

impl Default for ResonatorSection {
    fn default() -> Self {
        Self {
            omega0_hz: RESONATOR_FREQUENCY,
            kappa_int_hz: 16e3,
            kappa_ext_hz: 175e3,
            z0_ohm: RESONATOR_IMPEDANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub config: LoadConfig,
    pub alpha: f64,
    pub t_cold_k: f64,
    pub t_phon_k: f64,
    pub t_int_k: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            config: LoadConfig::Cold,
            alpha: 0.2,
            t_cold_k: 0.02,
            t_phon_k: 0.85,
            t_int_k: 0.85,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpinsSection {
    pub gamma_phon_hz: f64,
    pub gamma_phot_hz: f64,
    pub b0_t: f64,
}

impl Default for SpinsSection {
    fn default() -> Self {
        Self {
            gamma_phon_hz: 0.0,
            gamma_phot_hz: 0.17,
            b0_t: 0.0625,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpinSystemSection {
    pub gamma_e_hz_per_t: f64,
    pub gamma_n_hz_per_t: f64,
    pub hyperfine_hz: f64,
    pub electron_spin: f64,
    pub nuclear_spin: f64,
}

impl Default for SpinSystemSection {
    fn default() -> Self {
        let p = SpinSystemParams::bismuth();
        Self {
            gamma_e_hz_per_t: p.gamma_e,
            gamma_n_hz_per_t: p.gamma_n,
            hyperfine_hz: p.hyperfine_a,
            electron_spin: p.electron_spin,
            nuclear_spin: p.nuclear_spin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurrentKind {
    Uniform,
    EdgePeaked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub width_m: f64,
    pub thickness_m: f64,
    pub current_model: CurrentKind,
    /// Only read for the edge-peaked model.
    pub edge_cutoff_m: f64,
    pub filaments: usize,
    pub layers: usize,
    pub x_min_m: f64,
    pub x_max_m: f64,
    pub y_min_m: f64,
    pub y_max_m: f64,
    pub nx: usize,
    pub ny: usize,
    pub implant_depth_m: f64,
    pub bins: usize,
    pub log_bins: bool,
    /// |⟨S_x⟩| of each transition driven at the working point, with its share of spins.
    pub matrix_elements: Vec<f64>,
    pub shares: Vec<f64>,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let (w, g, b) = (
            WireGeometry::default(),
            GridSpec::default(),
            Binning::default(),
        );
        Self {
            width_m: w.width,
            thickness_m: w.thickness,
            current_model: CurrentKind::Uniform,
            edge_cutoff_m: 10e-9,
            filaments: w.filaments,
            layers: w.layers,
            x_min_m: g.x_min,
            x_max_m: g.x_max,
            y_min_m: g.y_min,
            y_max_m: g.y_max,
            nx: g.nx,
            ny: g.ny,
            implant_depth_m: ImplantationProfile::default().cutoff_depth,
            bins: b.count,
            log_bins: b.log,
            matrix_elements: vec![0.28, 0.22],
            shares: vec![0.5, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub n_g: usize,
    pub n_delta: usize,
    pub freq_width_hz: f64,
    pub t2_s: f64,
    pub spin_temperature_k: f64,
    pub n_spins: f64,
    pub h_max_scale: f64,
    pub sample_dt_s: f64,
    pub fast_path: bool,
    /// Relative tolerance of the adaptive integrator.
    pub rtol: f64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        let e = EnsembleSpec::default();
        let c = SimControls::default();
        Self {
            n_g: e.n_g,
            n_delta: e.n_delta,
            freq_width_hz: e.freq_width,
            t2_s: e.t2,
            spin_temperature_k: e.spin_temperature,
            n_spins: c.n_spins,
            h_max_scale: c.h_max_scale,
            sample_dt_s: c.sample_dt,
            fast_path: c.fast_path,
            rtol: AdaptiveOptions::default().rtol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceSection {
    pub tau_us: f64,
    pub pi_ns: f64,
    pub window_us: f64,
    /// Absolute drive amplitude √(photons/s); calibrated on the median coupling when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amp: Option<f64>,
    /// Multiplies the calibrated amplitude.
    pub amp_scale: f64,
    pub dt_list_s: Vec<f64>,
    pub n_cpmg: usize,
    pub rabi_points: usize,
    /// Largest refocusing amplitude of a Rabi sweep, in units of the π amplitude.
    pub rabi_max: f64,
}

impl Default for SequenceSection {
    fn default() -> Self {
        Self {
            tau_us: 15.0,
            pi_ns: 250.0,
            window_us: ACQUIRE_WINDOW * 1e6,
            amp: None,
            amp_scale: 1.0,
            dt_list_s: vec![1e-3, 0.3, 1.0, 3.0, 10.0, 30.0],
            n_cpmg: 4,
            rabi_points: 21,
            rabi_max: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsdSection {
    /// Constant gain, used when `gain_table` is empty.
    pub gain: f64,
    /// (Hz, gain) pairs, interpolated linearly.
    pub gain_table: Vec<(f64, f64)>,
    pub n_twpa: f64,
    pub t_phon_k: f64,
}

impl Default for PsdSection {
    fn default() -> Self {
        Self {
            gain: 1e9,
            gain_table: Vec::new(),
            n_twpa: 0.75,
            t_phon_k: 0.84,
        }
    }
}

/// Ground truth for synthesized data sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSection {
    pub points: usize,
    /// Additive Gaussian noise relative to the largest value.
    pub noise: f64,
    pub gamma1_hz: f64,
    pub t2_s: f64,
    pub alpha: f64,
    pub t_int_hot_k: f64,
    pub t_int_cold_k: f64,
    pub span_hz: f64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        Self {
            points: 30,
            noise: 0.01,
            gamma1_hz: 0.17,
            t2_s: 600e-6,
            alpha: 0.47,
            t_int_hot_k: 0.95,
            t_int_cold_k: 0.76,
            span_hz: 6e6,
        }
    }
}

fn schema(path: &str, message: impl Into<String>) -> CliError {
    CliError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(schema(
            path,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn non_negative(path: &str, v: f64) -> Result<(), CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(schema(
            path,
            format!("must be non-negative and finite, got {v}"),
        ))
    }
}

fn at_least(path: &str, v: usize, min: usize) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(schema(path, format!("must be at least {min}, got {v}")))
    }
}

/// Pull a dotted path out of a toml deserialization message.
fn toml_error(e: toml::de::Error, text: &str) -> CliError {
    let message = e.message().to_string();
    let path = e
        .span()
        .map(|span| locate(text, span.start))
        .unwrap_or_default();
    CliError::Schema { path, message }
}

/// Dotted key path of the value starting at byte `pos`.
fn locate(text: &str, pos: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            table = trimmed
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string();
            key.clear();
        } else if let Some((k, _)) = trimmed.split_once('=') {
            key = k.trim().to_string();
        }
        if pos < offset + line.len() {
            break;
        }
        offset += line.len();
    }
    match (table.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| toml_error(e, text))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let r = &self.resonator;
        positive("resonator.omega0_hz", r.omega0_hz)?;
        non_negative("resonator.kappa_int_hz", r.kappa_int_hz)?;
        positive("resonator.kappa_ext_hz", r.kappa_ext_hz)?;
        positive("resonator.z0_ohm", r.z0_ohm)?;

        let s = &self.scenario;
        if !(0.0..=1.0).contains(&s.alpha) {
            return Err(schema(
                "scenario.alpha",
                format!("must lie in [0, 1], got {}", s.alpha),
            ));
        }
        non_negative("scenario.t_cold_k", s.t_cold_k)?;
        non_negative("scenario.t_phon_k", s.t_phon_k)?;
        non_negative("scenario.t_int_k", s.t_int_k)?;

        let sp = &self.spins;
        non_negative("spins.gamma_phon_hz", sp.gamma_phon_hz)?;
        non_negative("spins.gamma_phot_hz", sp.gamma_phot_hz)?;
        if sp.gamma_phon_hz + sp.gamma_phot_hz == 0.0 {
            return Err(schema(
                "spins.gamma_phot_hz",
                "all relaxation rates are zero",
            ));
        }
        non_negative("spins.b0_t", sp.b0_t)?;

        self.spin_params()
            .validate()
            .map_err(|e| schema("spin_system", e.to_string()))?;

        let g = &self.geometry;
        positive("geometry.width_m", g.width_m)?;
        positive("geometry.thickness_m", g.thickness_m)?;
        positive("geometry.edge_cutoff_m", g.edge_cutoff_m)?;
        at_least("geometry.filaments", g.filaments, 1)?;
        at_least("geometry.layers", g.layers, 1)?;
        at_least("geometry.nx", g.nx, 1)?;
        at_least("geometry.ny", g.ny, 1)?;
        if g.x_max_m.partial_cmp(&g.x_min_m) != Some(std::cmp::Ordering::Greater) {
            return Err(schema("geometry.x_max_m", "must exceed x_min_m"));
        }
        if g.y_max_m.partial_cmp(&g.y_min_m) != Some(std::cmp::Ordering::Greater) {
            return Err(schema("geometry.y_max_m", "must exceed y_min_m"));
        }
        positive("geometry.implant_depth_m", g.implant_depth_m)?;
        at_least("geometry.bins", g.bins, 1)?;
        if g.matrix_elements.is_empty() || g.matrix_elements.len() != g.shares.len() {
            return Err(schema(
                "geometry.shares",
                "needs one share per matrix element",
            ));
        }
        for &m in &g.matrix_elements {
            if !(m > 0.0 && m <= 0.5) {
                return Err(schema(
                    "geometry.matrix_elements",
                    format!("elements must lie in (0, 0.5], got {m}"),
                ));
            }
        }
        for &w in &g.shares {
            positive("geometry.shares", w)?;
        }
        self.wire()
            .validate()
            .map_err(|e| schema("geometry", e.to_string()))?;

        let e = &self.ensemble;
        at_least("ensemble.n_g", e.n_g, 1)?;
        at_least("ensemble.n_delta", e.n_delta, 1)?;
        non_negative("ensemble.freq_width_hz", e.freq_width_hz)?;
        positive("ensemble.t2_s", e.t2_s)?;
        non_negative("ensemble.spin_temperature_k", e.spin_temperature_k)?;
        positive("ensemble.n_spins", e.n_spins)?;
        positive("ensemble.h_max_scale", e.h_max_scale)?;
        positive("ensemble.sample_dt_s", e.sample_dt_s)?;
        positive("ensemble.rtol", e.rtol)?;

        let q = &self.sequence;
        positive("sequence.tau_us", q.tau_us)?;
        positive("sequence.pi_ns", q.pi_ns)?;
        positive("sequence.window_us", q.window_us)?;
        if let Some(a) = q.amp {
            positive("sequence.amp", a)?;
        }
        positive("sequence.amp_scale", q.amp_scale)?;
        for &dt in &q.dt_list_s {
            non_negative("sequence.dt_list_s", dt)?;
        }
        at_least("sequence.n_cpmg", q.n_cpmg, 1)?;
        at_least("sequence.rabi_points", q.rabi_points, 2)?;
        positive("sequence.rabi_max", q.rabi_max)?;
        self.timing()
            .validate()
            .map_err(|e| schema("sequence", e.to_string()))?;

        let p = &self.psd;
        positive("psd.gain", p.gain)?;
        for &(f, gain) in &p.gain_table {
            positive("psd.gain_table", f)?;
            positive("psd.gain_table", gain)?;
        }
        non_negative("psd.n_twpa", p.n_twpa)?;
        non_negative("psd.t_phon_k", p.t_phon_k)?;

        let y = &self.synthetic;
        at_least("synthetic.points", y.points, 8)?;
        non_negative("synthetic.noise", y.noise)?;
        positive("synthetic.gamma1_hz", y.gamma1_hz)?;
        positive("synthetic.t2_s", y.t2_s)?;
        if !(0.0..=1.0).contains(&y.alpha) {
            return Err(schema("synthetic.alpha", "must lie in [0, 1]"));
        }
        non_negative("synthetic.t_int_hot_k", y.t_int_hot_k)?;
        non_negative("synthetic.t_int_cold_k", y.t_int_cold_k)?;
        positive("synthetic.span_hz", y.span_hz)?;
        Ok(())
    }

    pub fn resonator(&self) -> ResonatorParams {
        let r = &self.resonator;
        ResonatorParams {
            omega0: r.omega0_hz,
            kappa_int: TWO_PI * r.kappa_int_hz,
            kappa_ext: TWO_PI * r.kappa_ext_hz,
            z0: r.z0_ohm,
        }
    }

    /// The configured scenario and its hot-load reference.
    pub fn scenarios(&self) -> (LoadScenario, LoadScenario) {
        let s = &self.scenario;
        let hot = LoadScenario::hot(s.t_phon_k, s.t_int_k);
        let this = LoadScenario {
            config: s.config,
            alpha: s.alpha,
            t_cold: s.t_cold_k,
            t_phon: s.t_phon_k,
            t_int: s.t_int_k,
        };
        (hot, this)
    }

    pub fn phonon_bath(&self) -> BathCoupling {
        BathCoupling::new(self.spins.gamma_phon_hz, self.scenario.t_phon_k)
    }

    pub fn spin_params(&self) -> SpinSystemParams {
        let s = &self.spin_system;
        SpinSystemParams {
            gamma_e: s.gamma_e_hz_per_t,
            gamma_n: s.gamma_n_hz_per_t,
            hyperfine_a: s.hyperfine_hz,
            electron_spin: s.electron_spin,
            nuclear_spin: s.nuclear_spin,
        }
    }

    pub fn wire(&self) -> WireGeometry {
        let g = &self.geometry;
        WireGeometry {
            width: g.width_m,
            thickness: g.thickness_m,
            current_model: match g.current_model {
                CurrentKind::Uniform => CurrentModel::Uniform,
                CurrentKind::EdgePeaked => CurrentModel::EdgePeaked {
                    cutoff: g.edge_cutoff_m,
                },
            },
            filaments: g.filaments,
            layers: g.layers,
        }
    }

    pub fn grid(&self) -> GridSpec {
        let g = &self.geometry;
        GridSpec {
            x_min: g.x_min_m,
            x_max: g.x_max_m,
            y_min: g.y_min_m,
            y_max: g.y_max_m,
            nx: g.nx,
            ny: g.ny,
        }
    }

    pub fn implantation(&self) -> ImplantationProfile {
        ImplantationProfile {
            cutoff_depth: self.geometry.implant_depth_m,
        }
    }

    pub fn binning(&self) -> Binning {
        Binning {
            count: self.geometry.bins,
            log: self.geometry.log_bins,
        }
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        let e = &self.ensemble;
        EnsembleSpec {
            n_g: e.n_g,
            n_delta: e.n_delta,
            freq_width: e.freq_width_hz,
            t2: e.t2_s,
            spin_temperature: e.spin_temperature_k,
        }
    }

    pub fn controls(&self) -> SimControls {
        let e = &self.ensemble;
        SimControls {
            integrator: Integrator::Adaptive(AdaptiveOptions {
                rtol: e.rtol,
                ..Default::default()
            }),
            h_max_scale: e.h_max_scale,
            sample_dt: e.sample_dt_s,
            fast_path: e.fast_path,
            n_spins: e.n_spins,
            ..Default::default()
        }
    }

    pub fn timing(&self) -> EchoTiming {
        let q = &self.sequence;
        EchoTiming {
            tau: q.tau_us * 1e-6,
            pi_duration: q.pi_ns * 1e-9,
            window: q.window_us * 1e-6,
            ..EchoTiming::for_resonator(&self.resonator())
        }
    }

    pub fn gain(&self) -> Result<GainTable, CliError> {
        if self.psd.gain_table.is_empty() {
            Ok(GainTable::constant(self.psd.gain))
        } else {
            GainTable::new(self.psd.gain_table.clone())
                .map_err(|e| schema("psd.gain_table", e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = ExperimentConfig::from_toml("[resonator]\nkappa_ext_hz = 2e5\n").unwrap();
        assert_eq!(cfg.resonator.kappa_ext_hz, 2e5);
        assert_eq!(cfg.ensemble, EnsembleSection::default());
        assert!((cfg.resonator().kappa_ext - TWO_PI * 2e5).abs() < 1e-6);
    }

    #[test]
    fn negative_kappa_names_field() {
        let err = ExperimentConfig::from_toml("[resonator]\nkappa_ext_hz = -1.0\n").unwrap_err();
        match err {
            CliError::Schema { path, .. } => assert_eq!(path, "resonator.kappa_ext_hz"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err =
            ExperimentConfig::from_toml("seed = 1\n[ensemble]\nn_g = 4\nbogus = 2\n").unwrap_err();
        match err {
            CliError::Schema { path, message } => {
                assert_eq!(path, "ensemble.bogus");
                assert!(message.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_type_points_at_key() {
        let err = ExperimentConfig::from_toml("[sequence]\ntau_us = \"long\"\n").unwrap_err();
        assert!(matches!(err, CliError::Schema { ref path, .. } if path == "sequence.tau_us"));
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
