use purcell_core::blochsim::sequence::{
    cpmg, inversion_recovery_sweep, pi_amplitude, EchoTiming, PI_DURATION,
};
use purcell_core::blochsim::{init_ensemble, run_sequence, EnsembleSpec, SimControls, SpinGroup};
use purcell_core::coupling::{
    coupling_distribution, coupling_map, field_map, vacuum_current, Binning, CouplingDistribution,
    GridSpec, ImplantationProfile, WireGeometry,
};
use purcell_core::estimators::fit_exponential_recovery;
use purcell_core::thermal::{purcell_rate, ResonatorParams};

fn resonator() -> ResonatorParams {
    ResonatorParams::with_rates(1e5, 1.1e6)
}

fn rho(res: &ResonatorParams) -> CouplingDistribution {
    let field = field_map(
        &WireGeometry::default(),
        vacuum_current(res),
        &GridSpec::default(),
    )
    .unwrap();
    let a = coupling_map(&field, 0.28).unwrap();
    let b = coupling_map(&field, 0.22).unwrap();
    coupling_distribution(
        &[(&a, 0.5), (&b, 0.5)],
        &ImplantationProfile::default(),
        &Binning::default(),
    )
    .unwrap()
}

fn small(res: &ResonatorParams) -> Vec<SpinGroup> {
    let spec = EnsembleSpec {
        n_g: 8,
        n_delta: 9,
        ..Default::default()
    };
    init_ensemble(&rho(res), &spec, res).unwrap()
}

#[test]
fn coupling_distribution_has_long_tail() {
    let d = rho(&resonator());
    let (c, p) = (d.centers(), d.density());
    // Smooth over a few bins before locating the mode.
    let k = 3;
    let smooth: Vec<f64> = (0..p.len())
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(k), (i + k + 1).min(p.len()));
            p[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let mode = (0..smooth.len())
        .max_by(|&a, &b| smooth[a].total_cmp(&smooth[b]))
        .unwrap();
    let median = d.quantile(0.5);
    assert!(c[mode] < median, "mode {} vs median {median}", c[mode]);
    assert!(d.quantile(0.9) > 2.0 * median);
    let peak = smooth[mode];
    // Well past the mode the density only falls, up to bin noise.
    let tail_start = (0..c.len()).find(|&i| c[i] > median).unwrap();
    for w in smooth[tail_start..].windows(2) {
        assert!(w[1] <= w[0] + 0.02 * peak);
    }
}

#[test]
fn ensemble_recovery_rate_lies_within_purcell_spread() {
    let res = resonator();
    let d = rho(&res);
    let groups = small(&res);
    let timing = EchoTiming::for_resonator(&res);
    let amp = pi_amplitude(d.quantile(0.5), &res, PI_DURATION) * 0.8;
    let (slow, fast) = (
        purcell_rate(d.quantile(0.1), &res, 0.0),
        purcell_rate(d.quantile(0.9), &res, 0.0),
    );
    let delays: Vec<f64> = (0..14)
        .map(|i| 1e-3 + 4.0 / slow * (i as f64 / 13.0).powi(2))
        .collect();
    let pts = inversion_recovery_sweep(
        &groups,
        &res,
        amp,
        &timing,
        &delays,
        &SimControls::default(),
    )
    .unwrap();
    let fit = fit_exponential_recovery(&pts.iter().map(|p| (p.param, p.area)).collect::<Vec<_>>())
        .unwrap();
    let g1 = fit.get("gamma1");
    assert!(g1 > slow && g1 < fast, "{slow} < {g1} < {fast}");
}

#[test]
fn cpmg_train_refocuses() {
    let res = resonator();
    let d = rho(&res);
    let groups = small(&res);
    let timing = EchoTiming::for_resonator(&res);
    let amp = pi_amplitude(d.quantile(0.5), &res, PI_DURATION);
    let out = run_sequence(
        &cpmg(amp, 4, &timing),
        &groups,
        &res,
        None,
        &SimControls::default(),
    )
    .unwrap();
    assert_eq!(out.areas.len(), 4);
    assert!(out.areas.iter().all(|a| a.is_finite() && *a != 0.0));
    assert!(out.max_bloch_norm <= 1.0 + 1e-6);
}

#[cfg(feature = "parallel")]
mod determinism {
    use super::*;
    use purcell_core::blochsim::sequence::{hahn_echo, rabi_sweep};
    use purcell_core::hamiltonian::{field_grid, spectrum_vs_field, SpinSystemParams};

    fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(f)
    }

    #[test]
    fn sweeps_match_single_thread_bitwise() {
        let res = resonator();
        let groups = small(&res);
        let timing = EchoTiming::for_resonator(&res);
        let amp = pi_amplitude(rho(&res).quantile(0.5), &res, PI_DURATION);
        let amps = [0.5 * amp, amp, 1.5 * amp];
        let run =
            || rabi_sweep(&groups, &res, amp, &timing, &amps, &SimControls::default()).unwrap();
        let (a, b) = (run(), single_threaded(run));
        assert!(a
            .iter()
            .zip(&b)
            .all(|(x, y)| x.area.to_bits() == y.area.to_bits()));

        let grid = field_grid(0.0, 0.07, 5e-4).unwrap();
        let spec = || spectrum_vs_field(&SpinSystemParams::bismuth(), &grid, 7.408e9).unwrap();
        assert_eq!(spec(), single_threaded(spec));
    }

    #[test]
    fn large_ensemble_matches_single_thread_bitwise() {
        let res = resonator();
        let spec = EnsembleSpec {
            n_g: 70,
            n_delta: 61,
            ..Default::default()
        };
        let groups = init_ensemble(&rho(&res), &spec, &res).unwrap();
        assert!(groups.len() > 4096);
        let timing = EchoTiming::for_resonator(&res);
        let seq = hahn_echo(
            pi_amplitude(rho(&res).quantile(0.5), &res, PI_DURATION),
            &timing,
        );
        let run = || run_sequence(&seq, &groups, &res, None, &SimControls::default()).unwrap();
        let (a, b) = (run(), single_threaded(run));
        assert_eq!(a.areas[0].to_bits(), b.areas[0].to_bits());
        assert_eq!(a.final_state, b.final_state);
    }
}
