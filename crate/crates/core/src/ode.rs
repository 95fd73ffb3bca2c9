//! Adaptive Dormand-Prince 5(4) integrator for complex-valued linear and
//! nonlinear ODE systems stored as flat slices.
//!
//! Steps are clipped so that every requested output time is hit exactly;
//! the controller keeps its step size across output intervals.

use num_complex::Complex64;

use crate::error::{Error, Result};

type C64 = Complex64;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step size; `f64::INFINITY` disables it.
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: f64::INFINITY,
            h_min: 1e-14,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl IntegrationStats {
    pub fn rejection_ratio(&self) -> f64 {
        let total = self.accepted + self.rejected;
        if total == 0 {
            0.0
        } else {
            self.rejected as f64 / total as f64
        }
    }
}

struct Workspace {
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    y_new: Vec<C64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let z = || vec![C64::new(0.0, 0.0); n];
        Self {
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            y_new: z(),
        }
    }
}

impl Dopri5 {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    /// Integrates `dy/dt = rhs(t, y)` from `t0`, calling `observe(index, t, y)`
    /// at each entry of `t_out` (which must be non-decreasing and `>= t0`).
    /// Integration stops early when `observe` returns `false`. On return `y`
    /// holds the state at the last observed time.
    pub fn integrate<F, G>(
        &self,
        mut rhs: F,
        t0: f64,
        y: &mut [C64],
        t_out: &[f64],
        mut observe: G,
    ) -> Result<IntegrationStats>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
        G: FnMut(usize, f64, &[C64]) -> bool,
    {
        let n = y.len();
        let mut stats = IntegrationStats::default();
        let mut ws = Workspace::new(n);
        let mut t = t0;
        let mut h = f64::NAN;
        let mut have_k1 = false;

        for (idx, &target) in t_out.iter().enumerate() {
            if target < t - 1e-12 * t.abs().max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "output times must be non-decreasing (got {target} after {t})"
                )));
            }
            while target - t > 1e-13 * t.abs().max(1.0) {
                if !have_k1 {
                    rhs(t, y, &mut ws.k[0]);
                    stats.rhs_evals += 1;
                    have_k1 = true;
                }
                if h.is_nan() {
                    h = self.initial_step(&mut rhs, t, y, &mut ws, &mut stats);
                }
                let remaining = target - t;
                let clipped = h.min(remaining).min(self.h_max);
                // avoid a sliver step right before the output time
                let h_try = if remaining - clipped < 1e-3 * clipped {
                    remaining
                } else {
                    clipped
                };

                let err = self.step(&mut rhs, t, y, h_try, &mut ws, &mut stats);
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if err <= 1.0 {
                    t = if h_try == remaining {
                        target
                    } else {
                        t + h_try
                    };
                    y.copy_from_slice(&ws.y_new);
                    ws.k.swap(0, 6);
                    stats.accepted += 1;
                    // keep the uncapped proposal when the step was clipped
                    h = if h_try < h {
                        h.max(h_try * factor)
                    } else {
                        h_try * factor
                    };
                } else {
                    stats.rejected += 1;
                    h = h_try * factor.min(1.0);
                    if h < self.h_min {
                        return Err(Error::StepUnderflow { t, h });
                    }
                }
                if stats.accepted + stats.rejected > self.max_steps {
                    return Err(Error::TooManySteps(self.max_steps));
                }
            }
            t = target;
            if !observe(idx, t, y) {
                break;
            }
        }
        Ok(stats)
    }

    fn initial_step<F>(
        &self,
        rhs: &mut F,
        t: f64,
        y: &[C64],
        ws: &mut Workspace,
        stats: &mut IntegrationStats,
    ) -> f64
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let n = y.len() as f64;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for (yi, fi) in y.iter().zip(&ws.k[0]) {
            let sc = self.atol + self.rtol * yi.norm();
            d0 += (yi.norm() / sc).powi(2);
            d1 += (fi.norm() / sc).powi(2);
        }
        d0 = (d0 / n).sqrt();
        d1 = (d1 / n).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        for i in 0..y.len() {
            ws.tmp[i] = y[i] + ws.k[0][i] * h0;
        }
        let (k0, rest) = ws.k.split_at_mut(1);
        rhs(t + h0, &ws.tmp, &mut rest[0]);
        stats.rhs_evals += 1;
        let mut d2 = 0.0;
        for i in 0..y.len() {
            let sc = self.atol + self.rtol * y[i].norm();
            d2 += ((rest[0][i] - k0[0][i]).norm() / sc).powi(2);
        }
        d2 = (d2 / n).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.h_max)
    }

    /// One trial step; leaves the candidate in `ws.y_new` and its derivative
    /// in `ws.k[6]`, returns the scaled error norm.
    fn step<F>(
        &self,
        rhs: &mut F,
        t: f64,
        y: &[C64],
        h: f64,
        ws: &mut Workspace,
        stats: &mut IntegrationStats,
    ) -> f64
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let n = y.len();
        let Workspace { k, tmp, y_new } = ws;

        for i in 0..n {
            tmp[i] = y[i] + k[0][i] * (h * A21);
        }
        rhs(t + C2 * h, tmp, &mut k[1]);
        for i in 0..n {
            tmp[i] = y[i] + (k[0][i] * A31 + k[1][i] * A32) * h;
        }
        rhs(t + C3 * h, tmp, &mut k[2]);
        for i in 0..n {
            tmp[i] = y[i] + (k[0][i] * A41 + k[1][i] * A42 + k[2][i] * A43) * h;
        }
        rhs(t + C4 * h, tmp, &mut k[3]);
        for i in 0..n {
            tmp[i] = y[i] + (k[0][i] * A51 + k[1][i] * A52 + k[2][i] * A53 + k[3][i] * A54) * h;
        }
        rhs(t + C5 * h, tmp, &mut k[4]);
        for i in 0..n {
            tmp[i] = y[i]
                + (k[0][i] * A61 + k[1][i] * A62 + k[2][i] * A63 + k[3][i] * A64 + k[4][i] * A65)
                    * h;
        }
        rhs(t + h, tmp, &mut k[5]);
        for i in 0..n {
            y_new[i] = y[i]
                + (k[0][i] * A71 + k[2][i] * A73 + k[3][i] * A74 + k[4][i] * A75 + k[5][i] * A76)
                    * h;
        }
        rhs(t + h, y_new, &mut k[6]);
        stats.rhs_evals += 6;

        let mut acc = 0.0;
        for i in 0..n {
            let e = (k[0][i] * E1
                + k[2][i] * E3
                + k[3][i] * E4
                + k[4][i] * E5
                + k[5][i] * E6
                + k[6][i] * E7)
                * h;
            let sc = self.atol + self.rtol * y[i].norm().max(y_new[i].norm());
            let r = e.norm() / sc;
            acc += r * r;
        }
        (acc / n as f64).sqrt()
    }
}
