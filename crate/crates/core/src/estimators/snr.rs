//! Sensitivity versus repetition time, and the cooling factor as phonon
//! relaxation competes with the radiative channel.

use serde::Serialize;

use super::{check_data, fit_scaled, result, FitResult};
use crate::thermal::{cooling_factor, BathCoupling, LoadScenario, ResonatorParams};
use crate::{par, Error, Result};

/// p(1 − e^{−Γ₁ t_rep}) / (σ √t_rep): echo signal per unit averaging time.
pub fn snr_model(t_rep: f64, gamma1: f64, p: f64, sigma: f64) -> f64 {
    p * -(-gamma1 * t_rep).exp_m1() / (sigma * t_rep.sqrt())
}

/// Positive root of e^x = 1 + 2x, by bisection on [1, 2].
pub fn snr_optimum() -> f64 {
    let f = |x: f64| x.exp_m1() - 2.0 * x;
    let (mut lo, mut hi) = (1.0, 2.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Repetition time maximising [`snr_model`].
pub fn optimal_trep(gamma1: f64) -> Result<f64> {
    if !(gamma1 > 0.0) {
        return Err(Error::invalid("gamma1 must be positive"));
    }
    Ok(snr_optimum() / gamma1)
}

pub fn peak_snr(gamma1: f64, p: f64, sigma: f64) -> Result<f64> {
    Ok(snr_model(optimal_trep(gamma1)?, gamma1, p, sigma))
}

/// Fit k(1 − e^{−Γ₁t})/√t to (t_rep, SNR) data. Parameters `gamma1` and `scale` (= p/σ).
pub fn fit_snr(data: &[(f64, f64)]) -> Result<FitResult> {
    let (xs, ys) = check_data(data, 4)?;
    if data.iter().any(|p| p.0 <= 0.0) {
        return Err(Error::invalid("repetition times must be positive"));
    }
    let best = data
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    let g0 = snr_optimum() / (best.0 / xs);
    let k0 = (best.1 / ys) / snr_model(best.0 / xs, g0, 1.0, 1.0);
    let model = |p: &[f64], u: f64| snr_model(u, p[0], p[1], 1.0);
    let (p, e, norm) = fit_scaled(data, xs, ys, &[g0, k0], model)?;
    let k = ys * xs.sqrt();
    Ok(result(
        &["gamma1", "scale"],
        &[p[0] / xs, p[1] * k],
        &[e[0] / xs, e[1] * k],
        norm,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaPoint {
    pub gamma_phon: f64,
    pub eta: f64,
    pub gamma1_hot: f64,
    pub gamma1_cold: f64,
}

/// Cooling factor across phonon relaxation rates; the phonon bath sits at the hot scenario's T_phon.
pub fn eta_vs_phonon(
    gamma_phon: &[f64],
    res: &ResonatorParams,
    hot: &LoadScenario,
    cold: &LoadScenario,
    gamma_phot: f64,
) -> Result<Vec<EtaPoint>> {
    hot.validate()?;
    cold.validate()?;
    par::map(gamma_phon, |&g| {
        let bath = BathCoupling::new(g, hot.t_phon);
        bath.validate()?;
        let c = cooling_factor(res, hot, cold, &bath, gamma_phot, res.omega0)?;
        Ok(EtaPoint {
            gamma_phon: g,
            eta: c.eta,
            gamma1_hot: c.gamma1_hot,
            gamma1_cold: c.gamma1_cold,
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal::alpha_for_photon_temperature;
    use proptest::prelude::*;

    #[test]
    fn optimum_root() {
        let x = snr_optimum();
        assert!((x - 1.25643).abs() < 1e-5, "{x}");
        assert!((x.exp() - 1.0 - 2.0 * x).abs() < 1e-11);
        assert!((optimal_trep(2.0).unwrap() - x / 2.0).abs() < 1e-15);
        assert!(optimal_trep(0.0).is_err());
    }

    #[test]
    fn optimum_matches_grid_search() {
        let g = 0.17;
        let step = 1e-4;
        let best = (1..200_000)
            .map(|i| i as f64 * step)
            .max_by(|a, b| snr_model(*a, g, 1.0, 1.0).total_cmp(&snr_model(*b, g, 1.0, 1.0)))
            .unwrap();
        assert!((best - optimal_trep(g).unwrap()).abs() <= step);
    }

    #[test]
    fn long_repetition_limit() {
        let t = 1e12;
        assert!((snr_model(t, 1.0, 0.3, 2.0) - 0.3 / (2.0 * t.sqrt())).abs() < 1e-20);
    }

    #[test]
    fn peak_ratio_is_sqrt_eta() {
        let eta = 2.3;
        let base = peak_snr(0.17, 0.2, 1.0).unwrap();
        let cooled = peak_snr(0.17 / eta, 0.2 * eta, 1.0).unwrap();
        assert!((cooled / base - eta.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn snr_fit_round_trip() {
        let data: Vec<_> = (1..25)
            .map(|i| (i as f64, snr_model(i as f64, 0.25, 3.0, 0.5)))
            .collect();
        let f = fit_snr(&data).unwrap();
        assert!((f.get("gamma1") / 0.25 - 1.0).abs() < 1e-8);
        assert!((f.get("scale") / 6.0 - 1.0).abs() < 1e-8);
    }

    fn scenario() -> (ResonatorParams, LoadScenario, LoadScenario) {
        let res = ResonatorParams::with_rates(0.0, 1e6);
        let hot = LoadScenario::hot(0.85, 0.85);
        let mut cold = LoadScenario::cold(0.0, 0.02, 0.85, 0.85);
        cold.alpha = alpha_for_photon_temperature(&res, &cold, 0.35).unwrap();
        (res, hot, cold)
    }

    #[test]
    fn eta_limits_and_monotonicity() {
        let (res, hot, cold) = scenario();
        let grid: Vec<f64> = (0..40)
            .map(|i| if i == 0 { 0.0 } else { 1e-4 * 1.6f64.powi(i) })
            .collect();
        let pts = eta_vs_phonon(&grid, &res, &hot, &cold, 0.1).unwrap();
        let pure = pts[0].eta;
        assert!((pure - pts[0].gamma1_hot / pts[0].gamma1_cold).abs() < 1e-15);
        assert!(pure > 2.0);
        assert!(pts.windows(2).all(|w| w[1].eta < w[0].eta));
        let strong = eta_vs_phonon(&[1e6], &res, &hot, &cold, 0.1).unwrap();
        assert!((strong[0].eta - 1.0).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn argmax_ignores_prefactors(p in 0.01f64..1.0, sigma in 0.1f64..10.0, g in 0.01f64..10.0) {
            let t = optimal_trep(g).unwrap();
            let at = snr_model(t, g, p, sigma);
            prop_assert!(at >= snr_model(t * 1.001, g, p, sigma));
            prop_assert!(at >= snr_model(t * 0.999, g, p, sigma));
        }
    }
}
