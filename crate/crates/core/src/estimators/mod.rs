//! Model fits for relaxation, coherence, noise spectra and repetition-rate
//! sensitivity.

pub mod lm;
pub mod psd;
pub mod snr;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};
use lm::{levenberg_marquardt, nelder_mead, standard_errors, LmOptions, Residuals, Solution};

pub use psd::{fit_psd, psd_model, transmission, GainTable, PsdFit, PsdFixed, PsdModelParams};
pub use snr::{eta_vs_phonon, fit_snr, optimal_trep, peak_snr, snr_model, snr_optimum, EtaPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: BTreeMap<String, f64>,
    pub std_errors: BTreeMap<String, f64>,
    pub residual_norm: f64,
    pub converged: bool,
}

impl FitResult {
    /// Parameter value by name; panics on an unknown name.
    pub fn get(&self, name: &str) -> f64 {
        self.parameters[name]
    }

    pub fn error(&self, name: &str) -> f64 {
        self.std_errors[name]
    }
}

/// Run LM, falling back to Nelder–Mead (then an LM polish) if it stalls.
pub(crate) fn solve<R: Residuals>(f: &R, p0: &[f64]) -> Result<(Solution, Vec<f64>)> {
    let opts = LmOptions::default();
    let mut sol = levenberg_marquardt(f, p0, &opts);
    if !sol.converged || !sol.cost.is_finite() {
        let start = if sol.cost.is_finite() && sol.cost < f.cost(p0) {
            sol.params.clone()
        } else {
            p0.to_vec()
        };
        let nm = nelder_mead(f, &start, 4000 * p0.len());
        let polished = levenberg_marquardt(f, &nm.params, &opts);
        sol = if polished.converged { polished } else { nm };
    }
    if !sol.converged {
        return Err(Error::NoConvergence {
            iterations: opts.max_iterations,
        });
    }
    let errs = standard_errors(f, &sol, &opts);
    Ok((sol, errs))
}

pub(crate) fn result(
    names: &[&str],
    params: &[f64],
    errors: &[f64],
    residual_norm: f64,
) -> FitResult {
    let collect = |v: &[f64]| {
        names
            .iter()
            .map(|n| n.to_string())
            .zip(v.iter().copied())
            .collect()
    };
    FitResult {
        parameters: collect(params),
        std_errors: collect(errors),
        residual_norm,
        converged: true,
    }
}

fn check_data(data: &[(f64, f64)], min_points: usize) -> Result<(f64, f64)> {
    if data.len() < min_points {
        return Err(Error::invalid(format!(
            "need at least {min_points} points, got {}",
            data.len()
        )));
    }
    if data
        .iter()
        .any(|(x, y)| !x.is_finite() || !y.is_finite() || *x < 0.0)
    {
        return Err(Error::invalid(
            "data must be finite with non-negative abscissae",
        ));
    }
    let xs = data.iter().fold(0.0f64, |m, p| m.max(p.0));
    let ys = data.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    if !(xs > 0.0 && ys > 0.0) {
        return Err(Error::invalid("data are degenerate"));
    }
    Ok((xs, ys))
}

/// Fit `model(p, u)` to data rescaled to unit abscissa and ordinate ranges.
fn fit_scaled<M>(
    data: &[(f64, f64)],
    xs: f64,
    ys: f64,
    p0: &[f64],
    model: M,
) -> Result<(Vec<f64>, Vec<f64>, f64)>
where
    M: Fn(&[f64], f64) -> f64,
{
    let f = (data.len(), |p: &[f64], r: &mut [f64]| {
        for (ri, (x, y)) in r.iter_mut().zip(data) {
            *ri = model(p, x / xs) - y / ys;
        }
    });
    let (sol, errs) = solve(&f, p0)?;
    Ok((sol.params, errs, sol.cost.sqrt() * ys))
}

/// Least-squares slope and intercept.
fn linear_regression(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / n, sy / n);
    let (sxx, sxy) = pts.iter().fold((0.0, 0.0), |(a, b), p| {
        (a + (p.0 - mx).powi(2), b + (p.0 - mx) * (p.1 - my))
    });
    (pts.len() >= 2 && sxx > 0.0).then(|| (sxy / sxx, my - sxy / sxx * mx))
}

/// A(1 − 2e^{−Γ₁Δt}) + c. Parameters `gamma1` (s⁻¹), `amplitude`, `offset`.
pub fn fit_exponential_recovery(data: &[(f64, f64)]) -> Result<FitResult> {
    let (xs, ys) = check_data(data, 4)?;
    let last = data
        .iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("non-empty")
        .1
        / ys;
    let dev: Vec<(f64, f64)> = data
        .iter()
        .map(|(x, y)| (x / xs, (last - y / ys).abs()))
        .collect();
    let dmax = dev.iter().fold(0.0f64, |m, p| m.max(p.1));
    let logs: Vec<(f64, f64)> = dev
        .iter()
        .filter(|p| p.0 < 1.0 && p.1 > 1e-3 * dmax)
        .map(|p| (p.0, p.1.ln()))
        .collect();
    let rate = match linear_regression(&logs) {
        Some((slope, _)) if slope < 0.0 => -slope,
        _ => 1.0,
    };
    let model = |p: &[f64], u: f64| p[1] * (1.0 - 2.0 * (-p[0] * u).exp()) + p[2];
    let (p, e, norm) = fit_scaled(data, xs, ys, &[rate, last, 0.0], model)?;
    Ok(result(
        &["gamma1", "amplitude", "offset"],
        &[p[0] / xs, p[1] * ys, p[2] * ys],
        &[e[0] / xs, e[1] * ys, e[2] * ys],
        norm,
    ))
}

/// Initial amplitude and 1/e abscissa (in scaled units) of a decaying curve.
fn decay_start(data: &[(f64, f64)], xs: f64, ys: f64) -> (f64, f64) {
    let mut pts: Vec<(f64, f64)> = data.iter().map(|(x, y)| (x / xs, y / ys)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let a0 = pts[0].1;
    let target = a0 / std::f64::consts::E;
    let cross = pts
        .windows(2)
        .find(|w| (w[1].1 - target) * a0.signum() <= 0.0)
        .map(|w| {
            let f = (w[0].1 - target) / (w[0].1 - w[1].1);
            w[0].0 + f * (w[1].0 - w[0].0)
        });
    (a0, cross.filter(|c| *c > 0.0).unwrap_or(1.0))
}

/// A·exp[−(x/T₂)²] with x = 2τ. Parameters `t2` (s) and `amplitude`.
pub fn fit_gaussian_decay(data: &[(f64, f64)]) -> Result<FitResult> {
    let (xs, ys) = check_data(data, 4)?;
    let (a0, t0) = decay_start(data, xs, ys);
    let model = |p: &[f64], u: f64| p[1] * (-(u / p[0]).powi(2)).exp();
    let (p, e, norm) = fit_scaled(data, xs, ys, &[t0, a0], model)?;
    Ok(result(
        &["t2", "amplitude"],
        &[p[0].abs() * xs, p[1] * ys],
        &[e[0] * xs, e[1] * ys],
        norm,
    ))
}

/// A·exp(−x/T). Parameters `t` (s) and `amplitude`.
pub fn fit_exponential_decay(data: &[(f64, f64)]) -> Result<FitResult> {
    let (xs, ys) = check_data(data, 4)?;
    let (a0, t0) = decay_start(data, xs, ys);
    let model = |p: &[f64], u: f64| p[1] * (-u / p[0]).exp();
    let (p, e, norm) = fit_scaled(data, xs, ys, &[t0, a0], model)?;
    Ok(result(
        &["t", "amplitude"],
        &[p[0] * xs, p[1] * ys],
        &[e[0] * xs, e[1] * ys],
        norm,
    ))
}
