//! Small dense nonlinear least squares: Levenberg–Marquardt with a
//! central-difference Jacobian, and Nelder–Mead as a derivative-free fallback.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Converged when every |δp_j| ≤ xtol·(|p_j| + xtol).
    pub xtol: f64,
    /// Finite-difference step relative to max(|p_j|, `min_scale`).
    pub diff_step: f64,
    pub min_scale: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            xtol: 1e-10,
            diff_step: 1e-6,
            min_scale: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Residual callback: fills `r` for parameters `p`.
pub trait Residuals {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn eval(&self, p: &[f64], r: &mut [f64]);

    fn cost(&self, p: &[f64]) -> f64 {
        let mut r = vec![0.0; self.len()];
        self.eval(p, &mut r);
        let c = sum_sq(&r);
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    }
}

impl<F: Fn(&[f64], &mut [f64])> Residuals for (usize, F) {
    fn len(&self) -> usize {
        self.0
    }
    fn eval(&self, p: &[f64], r: &mut [f64]) {
        (self.1)(p, r)
    }
}

pub fn jacobian<R: Residuals>(f: &R, p: &[f64], opts: &LmOptions) -> DMatrix<f64> {
    let n = f.len();
    let mut j = DMatrix::zeros(n, p.len());
    let mut q = p.to_vec();
    let (mut rp, mut rm) = (vec![0.0; n], vec![0.0; n]);
    for k in 0..p.len() {
        let h = opts.diff_step * p[k].abs().max(opts.min_scale);
        q[k] = p[k] + h;
        f.eval(&q, &mut rp);
        q[k] = p[k] - h;
        f.eval(&q, &mut rm);
        q[k] = p[k];
        for i in 0..n {
            j[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    j
}

pub fn levenberg_marquardt<R: Residuals>(f: &R, p0: &[f64], opts: &LmOptions) -> Solution {
    let m = p0.len();
    let mut p = p0.to_vec();
    let mut r = vec![0.0; f.len()];
    f.eval(&p, &mut r);
    let mut cost = sum_sq(&r);
    let mut lambda = 1e-3;
    let mut trial = vec![0.0; m];
    let mut r_trial = vec![0.0; f.len()];
    for it in 0..opts.max_iterations {
        if !cost.is_finite() {
            break;
        }
        if cost == 0.0 {
            return Solution {
                params: p,
                residuals: r,
                cost,
                iterations: it,
                converged: true,
            };
        }
        let j = jacobian(f, &p, opts);
        let a = j.transpose() * &j;
        let g = j.transpose() * DVector::from_column_slice(&r);
        loop {
            let mut damped = a.clone();
            for k in 0..m {
                damped[(k, k)] += lambda * a[(k, k)].max(1e-12);
            }
            let step = damped.lu().solve(&(-&g));
            let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    return Solution {
                        params: p,
                        residuals: r,
                        cost,
                        iterations: it,
                        converged: true,
                    };
                }
                continue;
            };
            for k in 0..m {
                trial[k] = p[k] + step[k];
            }
            f.eval(&trial, &mut r_trial);
            let c = sum_sq(&r_trial);
            if c.is_finite() && c < cost {
                let small = (0..m).all(|k| step[k].abs() <= opts.xtol * (p[k].abs() + opts.xtol));
                p.copy_from_slice(&trial);
                std::mem::swap(&mut r, &mut r_trial);
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                if small {
                    return Solution {
                        params: p,
                        residuals: r,
                        cost,
                        iterations: it + 1,
                        converged: true,
                    };
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // No descent direction left: the current point is a minimum to rounding.
                return Solution {
                    params: p,
                    residuals: r,
                    cost,
                    iterations: it + 1,
                    converged: true,
                };
            }
        }
    }
    Solution {
        params: p,
        residuals: r,
        cost,
        iterations: opts.max_iterations,
        converged: false,
    }
}

/// Minimise the residual cost by Nelder–Mead from `p0`.
pub fn nelder_mead<R: Residuals>(f: &R, p0: &[f64], max_iterations: usize) -> Solution {
    let m = p0.len();
    let mut simplex: Vec<Vec<f64>> = vec![p0.to_vec()];
    for k in 0..m {
        let mut v = p0.to_vec();
        v[k] += if v[k] != 0.0 { 0.05 * v[k] } else { 2.5e-4 };
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f.cost(v)).collect();
    let mut converged = false;
    let mut iterations = max_iterations;
    for it in 0..max_iterations {
        let mut order: Vec<usize> = (0..=m).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = vals[m] - vals[0];
        let size = (1..=m)
            .flat_map(|i| (0..m).map(move |k| (i, k)))
            .map(|(i, k)| (simplex[i][k] - simplex[0][k]).abs() / (simplex[0][k].abs() + 1e-12))
            .fold(0.0, f64::max);
        if size < 1e-10 || (spread == 0.0 && vals[0] == 0.0) {
            converged = true;
            iterations = it;
            break;
        }
        let centroid: Vec<f64> = (0..m)
            .map(|k| simplex[..m].iter().map(|v| v[k]).sum::<f64>() / m as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..m)
                .map(|k| centroid[k] + t * (simplex[m][k] - centroid[k]))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f.cost(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f.cost(&xe);
            if fe < fr {
                simplex[m] = xe;
                vals[m] = fe;
            } else {
                simplex[m] = xr;
                vals[m] = fr;
            }
        } else if fr < vals[m - 1] {
            simplex[m] = xr;
            vals[m] = fr;
        } else {
            let xc = if fr < vals[m] {
                along(-0.5)
            } else {
                along(0.5)
            };
            let fc = f.cost(&xc);
            if fc < vals[m].min(fr) {
                simplex[m] = xc;
                vals[m] = fc;
            } else {
                for i in 1..=m {
                    let v: Vec<f64> = (0..m)
                        .map(|k| simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]))
                        .collect();
                    vals[i] = f.cost(&v);
                    simplex[i] = v;
                }
            }
        }
    }
    let best = (0..=m)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap_or(0);
    let params = simplex[best].clone();
    let mut residuals = vec![0.0; f.len()];
    f.eval(&params, &mut residuals);
    Solution {
        cost: sum_sq(&residuals),
        params,
        residuals,
        iterations,
        converged,
    }
}

/// Standard errors √diag((JᵀJ)⁻¹ σ²) with σ² = cost/(n − m); infinite when singular.
pub fn standard_errors<R: Residuals>(f: &R, sol: &Solution, opts: &LmOptions) -> Vec<f64> {
    let m = sol.params.len();
    let n = f.len();
    let j = jacobian(f, &sol.params, opts);
    let dof = n.saturating_sub(m).max(1) as f64;
    let sigma2 = sol.cost / dof;
    match (j.transpose() * j).try_inverse() {
        Some(inv) => (0..m)
            .map(|k| (inv[(k, k)].max(0.0) * sigma2).sqrt())
            .collect(),
        None => vec![f64::INFINITY; m],
    }
}
