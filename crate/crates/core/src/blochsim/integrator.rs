//! Explicit Runge–Kutta integrators for real-valued ODE systems.

// Stage loops index several buffers in step.
#![allow(clippy::needless_range_loop)]

use crate::{Error, Result};

/// dy/dt = f(t, y) on a flat real state vector.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    /// Steps below this raise [`Error::StepUnderflow`].
    pub h_min: f64,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            h_max: f64::INFINITY,
            h_min: 1e-15,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
/// 5th minus embedded 4th order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dormand–Prince 5(4) with first-same-as-last reuse and scratch buffers.
pub struct Dopri5 {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    /// Step size carried between calls.
    pub h: f64,
}

impl Dopri5 {
    pub fn new(dim: usize, h_initial: f64) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            y_new: vec![0.0; dim],
            h: h_initial,
        }
    }

    fn stage(&mut self, y: &[f64], h: f64, coeffs: &[f64]) {
        for i in 0..y.len() {
            let mut acc = 0.0;
            for (j, c) in coeffs.iter().enumerate() {
                acc += c * self.k[j][i];
            }
            self.tmp[i] = y[i] + h * acc;
        }
    }

    /// Advance `y` from `t0` to `t1`, calling `on_step(t, y)` after every accepted step.
    pub fn integrate<S: OdeSystem, F: FnMut(f64, &[f64])>(
        &mut self,
        sys: &S,
        t0: f64,
        t1: f64,
        y: &mut [f64],
        opts: &AdaptiveOptions,
        mut on_step: F,
    ) -> Result<StepStats> {
        let mut stats = StepStats::default();
        let mut t = t0;
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(stats);
        }
        let eps = 1e-12 * span.abs().max(t0.abs() * f64::EPSILON);
        self.h = self.h.min(opts.h_max).min(span);
        if !(self.h > 0.0) {
            self.h = opts.h_max.min(span);
        }
        sys.rhs(t, y, &mut self.k[0]);
        while t1 - t > eps {
            let last = self.h >= t1 - t;
            let h = if last { t1 - t } else { self.h };

            self.stage(y, h, &A2);
            sys.rhs(t + C[1] * h, &self.tmp, &mut self.k[1]);
            self.stage(y, h, &A3);
            sys.rhs(t + C[2] * h, &self.tmp, &mut self.k[2]);
            self.stage(y, h, &A4);
            sys.rhs(t + C[3] * h, &self.tmp, &mut self.k[3]);
            self.stage(y, h, &A5);
            sys.rhs(t + C[4] * h, &self.tmp, &mut self.k[4]);
            self.stage(y, h, &A6);
            let tmp = std::mem::take(&mut self.tmp);
            sys.rhs(t + h, &tmp, &mut self.k[5]);
            self.tmp = tmp;
            for i in 0..y.len() {
                let mut acc = 0.0;
                for (j, b) in B.iter().enumerate() {
                    acc += b * self.k[j][i];
                }
                self.y_new[i] = y[i] + h * acc;
            }
            let y_new = std::mem::take(&mut self.y_new);
            sys.rhs(t + h, &y_new, &mut self.k[6]);
            self.y_new = y_new;

            let mut sum = 0.0;
            for i in 0..y.len() {
                let mut e = 0.0;
                for (j, c) in E.iter().enumerate() {
                    e += c * self.k[j][i];
                }
                let sc = opts.atol + opts.rtol * y[i].abs().max(self.y_new[i].abs());
                sum += (h * e / sc).powi(2);
            }
            let err = (sum / y.len().max(1) as f64).sqrt();

            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                stats.accepted += 1;
                on_step(t, y);
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                // Keep the carried step when the last step was a truncated sliver.
                if !last || h >= self.h {
                    self.h = (h * fac).min(opts.h_max);
                }
            } else {
                stats.rejected += 1;
                let fac = if err.is_finite() {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
                } else {
                    0.2
                };
                self.h = h * fac;
                if self.h < opts.h_min {
                    return Err(Error::StepUnderflow {
                        t,
                        min_dt: opts.h_min,
                    });
                }
            }
        }
        Ok(stats)
    }
}

/// Classical RK4 with a fixed number of equal steps.
pub struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
        }
    }

    pub fn integrate<S: OdeSystem, F: FnMut(f64, &[f64])>(
        &mut self,
        sys: &S,
        t0: f64,
        t1: f64,
        y: &mut [f64],
        steps: usize,
        mut on_step: F,
    ) -> StepStats {
        let steps = steps.max(1);
        let h = (t1 - t0) / steps as f64;
        for s in 0..steps {
            let t = t0 + s as f64 * h;
            sys.rhs(t, y, &mut self.k[0]);
            for i in 0..y.len() {
                self.tmp[i] = y[i] + 0.5 * h * self.k[0][i];
            }
            sys.rhs(t + 0.5 * h, &self.tmp, &mut self.k[1]);
            for i in 0..y.len() {
                self.tmp[i] = y[i] + 0.5 * h * self.k[1][i];
            }
            sys.rhs(t + 0.5 * h, &self.tmp, &mut self.k[2]);
            for i in 0..y.len() {
                self.tmp[i] = y[i] + h * self.k[2][i];
            }
            sys.rhs(t + h, &self.tmp, &mut self.k[3]);
            for i in 0..y.len() {
                y[i] += h / 6.0
                    * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
            }
            let t_end = if s + 1 == steps { t1 } else { t + h };
            on_step(t_end, y);
        }
        StepStats {
            accepted: steps,
            rejected: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay(f64);
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -self.0 * y[0];
        }
    }

    struct Oscillator(f64);
    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = self.0 * y[1];
            dy[1] = -self.0 * y[0];
        }
    }

    struct BlowUp;
    impl OdeSystem for BlowUp {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[0] * y[0];
        }
    }

    #[test]
    fn exponential_decay_meets_tolerance() {
        let mut y = [1.0];
        let mut dp = Dopri5::new(1, 1e-3);
        dp.integrate(
            &Decay(3.0),
            0.0,
            2.0,
            &mut y,
            &AdaptiveOptions::default(),
            |_, _| {},
        )
        .unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn oscillator_hits_endpoint_exactly() {
        let w = 2.0 * std::f64::consts::PI;
        let mut y = [0.0, 1.0];
        let mut last_t = 0.0;
        let mut dp = Dopri5::new(2, 1e-3);
        let stats = dp
            .integrate(
                &Oscillator(w),
                0.0,
                10.25,
                &mut y,
                &AdaptiveOptions::default(),
                |t, _| last_t = t,
            )
            .unwrap();
        assert_eq!(last_t, 10.25);
        assert!((y[0] - (w * 10.25).sin()).abs() < 1e-6);
        assert!((y[1] - (w * 10.25).cos()).abs() < 1e-6);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn step_cap_is_respected() {
        let mut y = [1.0];
        let mut max_h = 0.0f64;
        let mut prev = 0.0;
        let opts = AdaptiveOptions {
            h_max: 0.01,
            ..Default::default()
        };
        Dopri5::new(1, 1.0)
            .integrate(&Decay(0.1), 0.0, 1.0, &mut y, &opts, |t, _| {
                max_h = max_h.max(t - prev);
                prev = t;
            })
            .unwrap();
        assert!(max_h <= 0.01 + 1e-15);
    }

    #[test]
    fn finite_time_blow_up_underflows() {
        let mut y = [1.0];
        let err = Dopri5::new(1, 1e-3)
            .integrate(
                &BlowUp,
                0.0,
                2.0,
                &mut y,
                &AdaptiveOptions::default(),
                |_, _| {},
            )
            .unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. }));
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        let run = |n| {
            let mut y = [1.0];
            Rk4::new(1).integrate(&Decay(1.0), 0.0, 1.0, &mut y, n, |_, _| {});
            (y[0] - (-1.0f64).exp()).abs()
        };
        let ratio = run(20) / run(40);
        assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
    }
}
