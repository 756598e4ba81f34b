use purcell_core::blochsim::sequence::{
    best_pi_amplitude, cpmg, hahn_echo, inversion_recovery_sweep, pi_amplitude, rabi_sweep,
    SweepPoint,
};
use purcell_core::blochsim::{init_ensemble, run_sequence, SpinGroup};
use purcell_core::coupling::{
    coupling_distribution, coupling_map, field_map, vacuum_current, CouplingDistribution,
};
use purcell_core::estimators::{
    eta_vs_phonon, fit_exponential_recovery, fit_gaussian_decay, fit_psd, optimal_trep, psd_model,
    snr_model, snr_optimum, FitResult, PsdFit, PsdFixed, PsdModelParams,
};
use purcell_core::hamiltonian::{field_grid, spectrum_vs_field, Donor};
use purcell_core::polarization::{
    approx_population_difference, population_difference, select_quasi_degenerate_pair,
    spin_half_polarization, PAIR_WINDOW,
};
use purcell_core::thermal::{cooling_factor, LoadConfig, ThermalState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{read_pairs, Cell, Outputs};
use crate::{Command, FitArgs, PsdMode};

pub fn dispatch(cmd: &Command, cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    match cmd {
        Command::Spectrum {
            b0_min,
            b0_max,
            b0_step,
            omega0,
        } => spectrum(cfg, out, *b0_min, *b0_max, *b0_step, *omega0),
        Command::Thermal => thermal(cfg, out),
        Command::Polarization {
            b0,
            t_min,
            t_max,
            points,
        } => polarization(
            cfg,
            out,
            b0.unwrap_or(cfg.spins.b0_t),
            *t_min,
            *t_max,
            *points,
        ),
        Command::Coupling => coupling(cfg, out),
        Command::Echo(_) => echo(cfg, out),
        Command::Invrec(_) => invrec(cfg, out),
        Command::Rabi(_) => rabi(cfg, out),
        Command::Cpmg(_) => cpmg_train(cfg, out),
        Command::FitInvrec(a) => fit_recovery(cfg, out, a),
        Command::FitT2(a) => fit_t2(cfg, out, a),
        Command::FitPsd { fit, mode } => fit_spectrum(cfg, out, fit, *mode),
        Command::Snr { points } => snr(cfg, out, *points),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn spectrum(
    cfg: &ExperimentConfig,
    out: &mut Outputs,
    min: f64,
    max: f64,
    step: f64,
    omega0: Option<f64>,
) -> Result<(), CliError> {
    let grid = field_grid(min, max, step).map_err(|e| usage(format!("field grid: {e}")))?;
    let omega0 = omega0.unwrap_or(cfg.resonator.omega0_hz);
    let sweep = spectrum_vs_field(&cfg.spin_params(), &grid, omega0)?;
    let rows = sweep.points.iter().flat_map(|p| {
        p.transitions.iter().map(move |t| {
            vec![
                p.b0.cell(),
                t.lower.f.to_string(),
                t.lower.m.to_string(),
                t.upper.f.to_string(),
                t.upper.m.to_string(),
                t.frequency.cell(),
                t.sx_element.cell(),
                t.sy_element.cell(),
            ]
        })
    });
    out.csv(
        "spectrum.csv",
        &[
            "b0_T", "lowerF", "lowerM", "upperF", "upperM", "freq_Hz", "sx", "sy",
        ],
        rows,
    )?;
    let groups = sweep.resonances.iter().map(|g| {
        let names: Vec<String> = g
            .crossings
            .iter()
            .map(|c| format!("{}-{} @ {}", c.lower, c.upper, c.b0))
            .collect();
        vec![
            g.m_sum.to_string(),
            g.b0.cell(),
            g.crossings.len().to_string(),
            names.join("; "),
        ]
    });
    out.csv(
        "resonances.csv",
        &["m_sum", "b0_T", "n_transitions", "transitions"],
        groups,
    )
}

#[derive(Serialize)]
struct ThermalSummary {
    n_phot: f64,
    t_phot_k: f64,
    t_spin_k: f64,
    gamma1_hz: f64,
    eta: f64,
    polarization_ratio: f64,
    hot: HotReference,
}

#[derive(Serialize)]
struct HotReference {
    n_phot: f64,
    t_phot_k: f64,
    t_spin_k: f64,
    gamma1_hz: f64,
}

fn thermal(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let res = cfg.resonator();
    let (hot, this) = cfg.scenarios();
    let c = cooling_factor(
        &res,
        &hot,
        &this,
        &cfg.phonon_bath(),
        cfg.spins.gamma_phot_hz,
        res.omega0,
    )?;
    out.json(
        "thermal.json",
        &ThermalSummary {
            n_phot: c.photons_cold.occupation,
            t_phot_k: c.photons_cold.effective_temperature,
            t_spin_k: c.spin_cold.effective_temperature,
            gamma1_hz: c.gamma1_cold,
            eta: c.eta,
            polarization_ratio: c.polarization_ratio,
            hot: HotReference {
                n_phot: c.photons_hot.occupation,
                t_phot_k: c.photons_hot.effective_temperature,
                t_spin_k: c.spin_hot.effective_temperature,
                gamma1_hz: c.gamma1_hot,
            },
        },
    )
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

fn polarization(
    cfg: &ExperimentConfig,
    out: &mut Outputs,
    b0: f64,
    t_min: f64,
    t_max: f64,
    points: usize,
) -> Result<(), CliError> {
    if !(t_min > 0.0 && t_max >= t_min) || points == 0 {
        return Err(usage("need 0 < --t-min <= --t-max and --points >= 1"));
    }
    let donor = Donor::new(cfg.spin_params())?;
    let levels = donor.levels(b0)?;
    let ts = donor.transitions(b0)?;
    let w0 = cfg.resonator.omega0_hz;
    let (a, b) = select_quasi_degenerate_pair(&ts, w0, PAIR_WINDOW)?;
    let mut rows = Vec::with_capacity(points);
    for t in log_grid(t_min, t_max, points) {
        let exact = population_difference(&levels.levels, (&a, &b), t)?;
        rows.push([
            t,
            exact,
            approx_population_difference(t, w0),
            spin_half_polarization(t, w0),
        ]);
    }
    out.csv(
        "polarization.csv",
        &["T_K", "dn_exact", "dn_approx", "p_spin_half"],
        rows,
    )
}

fn distribution(cfg: &ExperimentConfig) -> Result<CouplingDistribution, CliError> {
    let res = cfg.resonator();
    let field = field_map(&cfg.wire(), vacuum_current(&res), &cfg.grid())?;
    let maps = cfg
        .geometry
        .matrix_elements
        .iter()
        .map(|&m| coupling_map(&field, m))
        .collect::<Result<Vec<_>, _>>()?;
    let parts: Vec<_> = maps
        .iter()
        .zip(&cfg.geometry.shares)
        .map(|(m, &w)| (m, w))
        .collect();
    Ok(coupling_distribution(
        &parts,
        &cfg.implantation(),
        &cfg.binning(),
    )?)
}

#[derive(Serialize)]
struct CouplingSummary {
    mean_hz: f64,
    q10_hz: f64,
    median_hz: f64,
    q90_hz: f64,
    max_hz: f64,
    current_a: f64,
    ampere_ratio: f64,
}

fn coupling(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let res = cfg.resonator();
    let field = field_map(&cfg.wire(), vacuum_current(&res), &cfg.grid())?;
    let cells = (0..field.bx.len()).map(|i| {
        let (x, y) = field.position(i);
        [x, y, field.bx[i], field.by[i]]
    });
    out.csv("fieldmap.csv", &["x", "y", "Bx", "By"], cells)?;
    let rho = distribution(cfg)?;
    let rows = rho
        .centers()
        .into_iter()
        .zip(rho.weights.iter().copied())
        .map(|(g, w)| [g, w]);
    out.csv("rho_g.csv", &["g_hz", "weight"], rows)?;
    out.json(
        "coupling.json",
        &CouplingSummary {
            mean_hz: rho.mean,
            q10_hz: rho.quantile(0.1),
            median_hz: rho.quantile(0.5),
            q90_hz: rho.quantile(0.9),
            max_hz: rho.max_g(),
            current_a: field.current,
            ampere_ratio: field.ampere_ratio(),
        },
    )
}

struct Ensemble {
    groups: Vec<SpinGroup>,
    amplitude: f64,
    pi_amplitude: f64,
}

fn ensemble(cfg: &ExperimentConfig) -> Result<Ensemble, CliError> {
    let res = cfg.resonator();
    let rho = distribution(cfg)?;
    let groups = init_ensemble(&rho, &cfg.ensemble_spec(), &res)?;
    let timing = cfg.timing();
    let calibrated = pi_amplitude(rho.quantile(0.5), &res, timing.pi_duration);
    let pi = cfg
        .sequence
        .amp
        .unwrap_or(calibrated * cfg.sequence.amp_scale);
    Ok(Ensemble {
        groups,
        amplitude: pi,
        pi_amplitude: calibrated,
    })
}

fn summary(out: &mut Outputs, pts: &[SweepPoint]) -> Result<(), CliError> {
    out.csv(
        "summary.csv",
        &["param", "A_e"],
        pts.iter().map(|p| [p.param, p.area]),
    )
}

fn trace(
    out: &mut Outputs,
    name: &str,
    t: &purcell_core::blochsim::EchoTrace,
) -> Result<(), CliError> {
    let rows = t.t.iter().zip(&t.a_out).map(|(t, a)| [*t, a.re, a.im]);
    out.csv(name, &["t_s", "re", "im"], rows)
}

#[derive(Serialize)]
struct EchoSummary {
    amplitude: f64,
    calibrated_pi_amplitude: f64,
    groups: usize,
    areas: Vec<f64>,
    phase_reference: f64,
    max_bloch_norm: f64,
    steps: usize,
}

fn echo(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let e = ensemble(cfg)?;
    let res = cfg.resonator();
    let timing = cfg.timing();
    let r = run_sequence(
        &hahn_echo(e.amplitude, &timing),
        &e.groups,
        &res,
        None,
        &cfg.controls(),
    )?;
    trace(out, "echo_trace.csv", &r.traces[0])?;
    summary(
        out,
        &[SweepPoint {
            param: timing.tau,
            area: r.areas[0],
        }],
    )?;
    out.json(
        "echo.json",
        &EchoSummary {
            amplitude: e.amplitude,
            calibrated_pi_amplitude: e.pi_amplitude,
            groups: e.groups.len(),
            areas: r.areas.clone(),
            phase_reference: r.phase_reference,
            max_bloch_norm: r.max_bloch_norm,
            steps: r.steps,
        },
    )
}

fn invrec(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    if cfg.sequence.dt_list_s.is_empty() {
        return Err(usage("--dt-list-s is empty"));
    }
    let e = ensemble(cfg)?;
    let pts = inversion_recovery_sweep(
        &e.groups,
        &cfg.resonator(),
        e.amplitude,
        &cfg.timing(),
        &cfg.sequence.dt_list_s,
        &cfg.controls(),
    )?;
    summary(out, &pts)
}

#[derive(Serialize)]
struct RabiSummary {
    pi_amplitude: f64,
    best_amplitude: Option<f64>,
}

fn rabi(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let e = ensemble(cfg)?;
    let n = cfg.sequence.rabi_points;
    let top = cfg.sequence.rabi_max * e.amplitude;
    let amps: Vec<f64> = (0..n).map(|i| top * i as f64 / (n - 1) as f64).collect();
    let pts = rabi_sweep(
        &e.groups,
        &cfg.resonator(),
        e.amplitude,
        &cfg.timing(),
        &amps,
        &cfg.controls(),
    )?;
    summary(out, &pts)?;
    out.json(
        "rabi.json",
        &RabiSummary {
            pi_amplitude: e.amplitude,
            best_amplitude: best_pi_amplitude(&pts),
        },
    )
}

fn cpmg_train(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<(), CliError> {
    let e = ensemble(cfg)?;
    let timing = cfg.timing();
    let r = run_sequence(
        &cpmg(e.amplitude, cfg.sequence.n_cpmg, &timing),
        &e.groups,
        &cfg.resonator(),
        None,
        &cfg.controls(),
    )?;
    for (k, t) in r.traces.iter().enumerate() {
        trace(out, &format!("trace_{:03}.csv", k + 1), t)?;
    }
    let pts: Vec<SweepPoint> = r
        .areas
        .iter()
        .enumerate()
        .map(|(k, &area)| SweepPoint {
            param: 2.0 * timing.tau * (k + 1) as f64,
            area,
        })
        .collect();
    summary(out, &pts)
}

fn noisy(cfg: &ExperimentConfig, clean: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let scale = clean.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let sigma = cfg.synthetic.noise * scale;
    if sigma == 0.0 {
        return clean;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    clean
        .into_iter()
        .map(|(x, y)| (x, y + noise.sample(&mut rng)))
        .collect()
}

/// Data from `--input`, or synthesized from `model` and written to `data.csv`.
fn fit_data(
    cfg: &ExperimentConfig,
    args: &FitArgs,
    out: &mut Outputs,
    header: [&str; 2],
    model: impl Fn() -> Vec<(f64, f64)>,
) -> Result<Vec<(f64, f64)>, CliError> {
    match &args.input {
        Some(path) => read_pairs(path),
        None => {
            let data = noisy(cfg, model());
            out.csv("data.csv", &header, data.iter().map(|p| [p.0, p.1]))?;
            Ok(data)
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn fit_recovery(cfg: &ExperimentConfig, out: &mut Outputs, args: &FitArgs) -> Result<(), CliError> {
    let s = &cfg.synthetic;
    let data = fit_data(cfg, args, out, ["param", "A_e"], || {
        linspace(0.0, 5.0 / s.gamma1_hz, s.points)
            .into_iter()
            .map(|t| (t, 1.0 - 2.0 * (-s.gamma1_hz * t).exp()))
            .collect()
    })?;
    let fit: FitResult = fit_exponential_recovery(&data)?;
    out.json("fit.json", &fit)
}

fn fit_t2(cfg: &ExperimentConfig, out: &mut Outputs, args: &FitArgs) -> Result<(), CliError> {
    let s = &cfg.synthetic;
    let data = fit_data(cfg, args, out, ["param", "A_e"], || {
        linspace(0.0, 2.0 * s.t2_s, s.points)
            .into_iter()
            .map(|x| (x, (-(x / s.t2_s).powi(2)).exp()))
            .collect()
    })?;
    out.json("fit.json", &fit_gaussian_decay(&data)?)
}

fn fit_spectrum(
    cfg: &ExperimentConfig,
    out: &mut Outputs,
    args: &FitArgs,
    mode: PsdMode,
) -> Result<(), CliError> {
    let res = cfg.resonator();
    let gain = cfg.gain()?;
    let s = &cfg.synthetic;
    let (fit, config, truth_t_int, truth_alpha) = match mode {
        PsdMode::Hot => (PsdFit::Hot, LoadConfig::Hot, s.t_int_hot_k, 0.0),
        PsdMode::HotWithTwpa => (PsdFit::HotWithTwpa, LoadConfig::Hot, s.t_int_hot_k, 0.0),
        PsdMode::Cold => (PsdFit::Cold, LoadConfig::Cold, s.t_int_cold_k, s.alpha),
    };
    let truth = PsdModelParams {
        gain: gain.clone(),
        n_twpa: cfg.psd.n_twpa,
        t_int: truth_t_int,
        alpha: truth_alpha,
        resonator: res,
        t_phon: cfg.psd.t_phon_k,
    };
    let data = fit_data(cfg, args, out, ["f_hz", "psd"], || {
        linspace(
            res.omega0 - s.span_hz / 2.0,
            res.omega0 + s.span_hz / 2.0,
            s.points,
        )
        .into_iter()
        .map(|f| (f, psd_model(f, &truth, config)))
        .collect()
    })?;
    let fixed = PsdFixed {
        resonator: res,
        t_phon: cfg.psd.t_phon_k,
        gain,
        n_twpa: cfg.psd.n_twpa,
    };
    out.json("fit.json", &fit_psd(&data, &fixed, fit)?)
}

#[derive(Serialize)]
struct SnrSummary {
    x_opt: f64,
    gamma1_hot_hz: f64,
    gamma1_cold_hz: f64,
    t_rep_opt_hot_s: f64,
    t_rep_opt_cold_s: f64,
    eta: f64,
    peak_snr_ratio: f64,
    sqrt_eta: f64,
}

fn snr(cfg: &ExperimentConfig, out: &mut Outputs, points: usize) -> Result<(), CliError> {
    if points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    let res = cfg.resonator();
    let (hot, this) = cfg.scenarios();
    let gamma_phot = cfg.spins.gamma_phot_hz;
    let c = cooling_factor(
        &res,
        &hot,
        &this,
        &cfg.phonon_bath(),
        gamma_phot,
        res.omega0,
    )?;
    let p = |s: &ThermalState| s.polarization();
    let (ph, pc) = (p(&c.spin_hot), p(&c.spin_cold));
    let (gh, gc) = (c.gamma1_hot, c.gamma1_cold);
    let (th, tc) = (optimal_trep(gh)?, optimal_trep(gc)?);
    let grid = log_grid(0.05 / gh.max(gc), 20.0 / gh.min(gc), points);
    out.csv(
        "snr.csv",
        &["t_rep_s", "snr_hot", "snr_cold"],
        grid.iter()
            .map(|&t| [t, snr_model(t, gh, ph, 1.0), snr_model(t, gc, pc, 1.0)]),
    )?;
    let phonon = log_grid(
        1e-4 * gamma_phot.max(1e-6),
        1e2 * gamma_phot.max(1e-6),
        points,
    );
    let eta = eta_vs_phonon(&phonon, &res, &hot, &this, gamma_phot)?;
    out.csv(
        "eta_phonon.csv",
        &["gamma_phon_hz", "eta"],
        eta.iter().map(|e| [e.gamma_phon, e.eta]),
    )?;
    out.json(
        "snr.json",
        &SnrSummary {
            x_opt: snr_optimum(),
            gamma1_hot_hz: gh,
            gamma1_cold_hz: gc,
            t_rep_opt_hot_s: th,
            t_rep_opt_cold_s: tc,
            eta: c.eta,
            peak_snr_ratio: snr_model(tc, gc, pc, 1.0) / snr_model(th, gh, ph, 1.0),
            sqrt_eta: c.eta.sqrt(),
        },
    )
}
