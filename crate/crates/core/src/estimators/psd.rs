//! Output noise spectrum of the resonator under hot and cold loads.

use serde::{Deserialize, Serialize};

use super::{result, solve, FitResult};
use crate::constants::{PLANCK, TWO_PI};
use crate::thermal::{bose_occupation, LoadConfig, ResonatorParams};
use crate::{Error, Result};

/// Piecewise-linear gain versus frequency, held constant beyond the end points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTable {
    /// (Hz, gain) in ascending frequency.
    points: Vec<(f64, f64)>,
}

impl GainTable {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty()
            || points
                .iter()
                .any(|(f, g)| !f.is_finite() || !(*g > 0.0) || !g.is_finite())
        {
            return Err(Error::invalid(
                "gain table needs finite points with positive gain",
            ));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { points })
    }

    pub fn constant(gain: f64) -> Self {
        Self {
            points: vec![(0.0, gain)],
        }
    }

    pub fn at(&self, f: f64) -> f64 {
        let p = &self.points;
        let i = p.partition_point(|q| q.0 <= f);
        if i == 0 {
            return p[0].1;
        }
        if i == p.len() {
            return p[p.len() - 1].1;
        }
        let (a, b) = (p[i - 1], p[i]);
        a.1 + (f - a.0) / (b.0 - a.0) * (b.1 - a.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdModelParams {
    pub gain: GainTable,
    /// Noise added by the first amplifier, photons.
    pub n_twpa: f64,
    /// Temperature of the internal-loss bath, K.
    pub t_int: f64,
    pub alpha: f64,
    pub resonator: ResonatorParams,
    pub t_phon: f64,
}

impl PsdModelParams {
    pub fn validate(&self) -> Result<()> {
        self.resonator.validate()?;
        if !(self.n_twpa >= 0.0)
            || !(0.0..=1.0).contains(&self.alpha)
            || !(self.t_int >= 0.0 && self.t_phon >= 0.0)
        {
            return Err(Error::invalid(
                "n_twpa ≥ 0, alpha ∈ [0, 1] and temperatures ≥ 0 required",
            ));
        }
        Ok(())
    }
}

/// β(f) = 4κ_int κ_ext / (κ² + 4(ω − ω0)²), the line-to-output transmission of internal-loss noise.
pub fn transmission(f: f64, res: &ResonatorParams) -> f64 {
    let k = res.kappa();
    let d = TWO_PI * (f - res.omega0);
    4.0 * res.kappa_int * res.kappa_ext / (k * k + 4.0 * d * d)
}

/// Noise photons per mode, before gain: S / (G h f).
fn photons(
    f: f64,
    n_twpa: f64,
    t_int: f64,
    alpha: f64,
    t_phon: f64,
    res: &ResonatorParams,
    config: LoadConfig,
) -> f64 {
    let beta = transmission(f, res);
    let line = match config {
        LoadConfig::Hot => 1.0,
        LoadConfig::Cold => alpha,
    };
    line * (1.0 - beta) * bose_occupation(t_phon, f)
        + beta * bose_occupation(t_int, f)
        + 0.5
        + n_twpa
}

/// Power spectral density at `f` (Hz), in W/Hz referred to the gain chain output.
pub fn psd_model(f: f64, params: &PsdModelParams, config: LoadConfig) -> f64 {
    let n = photons(
        f,
        params.n_twpa,
        params.t_int,
        params.alpha,
        params.t_phon,
        &params.resonator,
        config,
    );
    params.gain.at(f) * PLANCK * f * n
}

/// Quantities held fixed while fitting a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdFixed {
    pub resonator: ResonatorParams,
    pub t_phon: f64,
    pub gain: GainTable,
    /// Used as-is, except as the starting value when it is fitted.
    pub n_twpa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsdFit {
    /// Hot spectrum, free `t_int`.
    Hot,
    /// Hot spectrum, free `n_twpa` and `t_int`.
    HotWithTwpa,
    /// Cold spectrum, free `alpha` and `t_int`.
    Cold,
}

impl PsdFit {
    fn names(self) -> &'static [&'static str] {
        match self {
            PsdFit::Hot => &["t_int"],
            PsdFit::HotWithTwpa => &["n_twpa", "t_int"],
            PsdFit::Cold => &["alpha", "t_int"],
        }
    }
}

/// Least-squares fit of a measured spectrum (Hz, W/Hz).
pub fn fit_psd(data: &[(f64, f64)], fixed: &PsdFixed, fit: PsdFit) -> Result<FitResult> {
    fixed.resonator.validate()?;
    if data.len() < 8 {
        return Err(Error::invalid(format!(
            "need at least 8 spectral points, got {}",
            data.len()
        )));
    }
    if data
        .iter()
        .any(|(f, s)| !f.is_finite() || !s.is_finite() || *f <= 0.0)
    {
        return Err(Error::invalid(
            "spectrum must be finite at positive frequencies",
        ));
    }
    let f0 = fixed.resonator.omega0;
    let lo = data.iter().fold(f64::INFINITY, |m, p| m.min(p.0));
    let hi = data.iter().fold(f64::NEG_INFINITY, |m, p| m.max(p.0));
    if !(lo < f0 && hi > f0) {
        return Err(Error::InsufficientSpan { omega0: f0 });
    }
    // A single scale for all residuals keeps the least-squares weights intact.
    let unit = fixed.gain.at(f0) * PLANCK * f0;
    let res = fixed.resonator;
    let eval = |p: &[f64], f: f64| -> f64 {
        let (n_twpa, t_int, alpha, config) = match fit {
            PsdFit::Hot => (fixed.n_twpa, p[0], 0.0, LoadConfig::Hot),
            PsdFit::HotWithTwpa => (p[0], p[1], 0.0, LoadConfig::Hot),
            PsdFit::Cold => (fixed.n_twpa, p[1], p[0], LoadConfig::Cold),
        };
        fixed.gain.at(f) * PLANCK * f * photons(f, n_twpa, t_int, alpha, fixed.t_phon, &res, config)
            / unit
    };
    let p0: Vec<f64> = match fit {
        PsdFit::Hot => vec![fixed.t_phon],
        PsdFit::HotWithTwpa => vec![fixed.n_twpa.max(0.1), fixed.t_phon],
        PsdFit::Cold => vec![0.5, fixed.t_phon],
    };
    let f = (data.len(), |p: &[f64], r: &mut [f64]| {
        for (ri, (freq, s)) in r.iter_mut().zip(data) {
            *ri = eval(p, *freq) - s / unit;
        }
    });
    let (sol, errs) = solve(&f, &p0)?;
    Ok(result(
        fit.names(),
        &sol.params,
        &errs,
        sol.cost.sqrt() * unit,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn res() -> ResonatorParams {
        ResonatorParams::with_rates(TWO_PI * 100e3, TWO_PI * 400e3)
    }

    fn params(alpha: f64, t_int: f64) -> PsdModelParams {
        PsdModelParams {
            gain: GainTable::constant(1e9),
            n_twpa: 0.75,
            t_int,
            alpha,
            resonator: res(),
            t_phon: 0.84,
        }
    }

    fn freqs(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| 7.408e9 - 3e6 + 6e6 * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn gain_interpolates_and_clamps() {
        let g = GainTable::new(vec![(2.0, 20.0), (1.0, 10.0)]).unwrap();
        assert_eq!(g.at(0.0), 10.0);
        assert_eq!(g.at(1.5), 15.0);
        assert_eq!(g.at(9.0), 20.0);
        assert!(GainTable::new(vec![]).is_err());
        assert!(GainTable::new(vec![(1.0, -1.0)]).is_err());
    }

    #[test]
    fn transmission_peak_and_width() {
        let r = res();
        let k = r.kappa();
        assert!(
            (transmission(r.omega0, &r) - 4.0 * r.kappa_int * r.kappa_ext / (k * k)).abs() < 1e-15
        );
        let half = r.omega0 + k / (2.0 * TWO_PI);
        assert!((transmission(half, &r) / transmission(r.omega0, &r) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn limiting_forms() {
        let p = params(0.47, 0.95);
        let far = 7.408e9 + 3e9;
        let unit = 1e9 * PLANCK * far;
        let hot = psd_model(far, &p, LoadConfig::Hot) / unit;
        let want = bose_occupation(0.84, far) + 0.5 + 0.75;
        assert!((hot - want).abs() < 1e-4 * want);
        let z = params(0.0, 0.76);
        let f0 = 7.408e9;
        let cold = psd_model(f0, &z, LoadConfig::Cold) / (1e9 * PLANCK * f0);
        let b = transmission(f0, &res());
        assert!((cold - (b * bose_occupation(0.76, f0) + 1.25)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn hot_equals_cold_at_unit_alpha(
            t_int in 0.0f64..5.0,
            detune in -1e7f64..1e7,
            n_twpa in 0.0f64..3.0,
        ) {
            let p = PsdModelParams { n_twpa, ..params(1.0, t_int) };
            let f = 7.408e9 + detune;
            let (h, c) = (
                psd_model(f, &p, LoadConfig::Hot),
                psd_model(f, &p, LoadConfig::Cold),
            );
            prop_assert!((h - c).abs() <= 1e-15 * h);
        }
    }

    fn fixed() -> PsdFixed {
        PsdFixed {
            resonator: res(),
            t_phon: 0.84,
            gain: GainTable::constant(1e9),
            n_twpa: 0.75,
        }
    }

    #[test]
    fn hot_and_cold_round_trip() {
        let hot = params(0.0, 0.95);
        let data: Vec<_> = freqs(201)
            .into_iter()
            .map(|f| (f, psd_model(f, &hot, LoadConfig::Hot)))
            .collect();
        let fit = fit_psd(&data, &fixed(), PsdFit::Hot).unwrap();
        assert!((fit.get("t_int") / 0.95 - 1.0).abs() < 1e-8);
        let both = fit_psd(
            &data,
            &PsdFixed {
                n_twpa: 0.3,
                ..fixed()
            },
            PsdFit::HotWithTwpa,
        )
        .unwrap();
        assert!((both.get("n_twpa") / 0.75 - 1.0).abs() < 1e-6);

        let cold = params(0.47, 0.76);
        let data: Vec<_> = freqs(201)
            .into_iter()
            .map(|f| (f, psd_model(f, &cold, LoadConfig::Cold)))
            .collect();
        let fit = fit_psd(&data, &fixed(), PsdFit::Cold).unwrap();
        assert!((fit.get("alpha") / 0.47 - 1.0).abs() < 1e-8);
        assert!((fit.get("t_int") / 0.76 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn unit_alpha_degenerates_to_hot() {
        let p = params(1.0, 0.8);
        let data: Vec<_> = freqs(101)
            .into_iter()
            .map(|f| (f, psd_model(f, &p, LoadConfig::Hot)))
            .collect();
        let fit = fit_psd(&data, &fixed(), PsdFit::Cold).unwrap();
        assert!((fit.get("alpha") - 1.0).abs() < 1e-8);
    }

    #[test]
    fn span_must_bracket_resonance() {
        let p = params(0.5, 0.8);
        let data: Vec<_> = (0..10)
            .map(|i| 7.41e9 + 1e5 * i as f64)
            .map(|f| (f, psd_model(f, &p, LoadConfig::Cold)))
            .collect();
        assert!(matches!(
            fit_psd(&data, &fixed(), PsdFit::Cold),
            Err(Error::InsufficientSpan { .. })
        ));
        assert!(fit_psd(&data[..5], &fixed(), PsdFit::Cold).is_err());
    }
}
