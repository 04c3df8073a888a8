//! Adaptive Dormand–Prince 5(4) stepping for linear complex ODEs `ẏ = f(y)`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Differences between the fifth- and embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-13,
            max_steps: 1_000_000,
        }
    }
}

impl StepControl {
    /// Looser tolerances for noisy `F_Q` surveys; still keeps eigenvalues above -1e-8.
    pub fn survey() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-11,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Reusable stage buffers and the last successful step size.
#[derive(Debug)]
pub struct Dopri5 {
    control: StepControl,
    h: Option<f64>,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    y_new: Vec<C64>,
}

/// `out = y + h Σ w·k`, accumulated chunk by chunk so each chunk stays in cache.
fn combine(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    const CHUNK: usize = 4096;
    let kernel = |(ci, (o, yc)): (usize, (&mut [C64], &[C64]))| {
        let lo = ci * CHUNK;
        o.copy_from_slice(yc);
        for &(w, k) in terms {
            let hw = h * w;
            for (oi, ki) in o.iter_mut().zip(&k[lo..lo + yc.len()]) {
                *oi += ki * hw;
            }
        }
    };
    if out.len() >= super::density::PAR_LEN {
        out.par_chunks_mut(CHUNK).zip(y.par_chunks(CHUNK)).enumerate().for_each(kernel);
    } else {
        out.chunks_mut(CHUNK).zip(y.chunks(CHUNK)).enumerate().for_each(kernel);
    }
}

impl Dopri5 {
    pub fn new(len: usize, control: StepControl) -> Self {
        let z = || vec![C64::new(0.0, 0.0); len];
        Self {
            control,
            h: None,
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            y_new: z(),
        }
    }

    pub fn control(&self) -> StepControl {
        self.control
    }

    /// Advances `y` by `duration`; `after_step` runs on every accepted state.
    pub fn integrate<F, G>(&mut self, y: &mut [C64], duration: f64, rhs: F, mut after_step: G) -> Result<StepStats>
    where
        F: Fn(&[C64], &mut [C64]),
        G: FnMut(&mut [C64]),
    {
        let mut stats = StepStats::default();
        if duration <= 0.0 {
            return Ok(stats);
        }
        let StepControl { rtol, atol, max_steps } = self.control;
        let mut t = 0.0;
        let mut h = self.h.unwrap_or(duration / 16.0).min(duration);
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        rhs(y, k1);
        while t < duration {
            if stats.accepted + stats.rejected >= max_steps {
                return Err(Error::Integration(format!("exceeded {max_steps} steps")));
            }
            let last = t + h >= duration * (1.0 - 1e-12);
            if last {
                h = duration - t;
            }
            combine(&mut self.tmp, y, h, &[(A21, k1)]);
            rhs(&self.tmp, k2);
            combine(&mut self.tmp, y, h, &[(A31, k1), (A32, k2)]);
            rhs(&self.tmp, k3);
            combine(&mut self.tmp, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
            rhs(&self.tmp, k4);
            combine(&mut self.tmp, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
            rhs(&self.tmp, k5);
            combine(&mut self.tmp, y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
            rhs(&self.tmp, k6);
            combine(&mut self.y_new, y, h, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
            rhs(&self.y_new, k7);

            let y_new = &self.y_new;
            let (k1r, k3r, k4r, k5r, k6r, k7r) = (&*k1, &*k3, &*k4, &*k5, &*k6, &*k7);
            // Root-mean-square of the scaled local error, as in Hairer's DOPRI5.
            let err_at = |i: usize| {
                let e = (k1r[i] * E1 + k3r[i] * E3 + k4r[i] * E4 + k5r[i] * E5 + k6r[i] * E6 + k7r[i] * E7) * h;
                let scale = atol + rtol * y[i].norm_sqr().max(y_new[i].norm_sqr()).sqrt();
                e.norm_sqr() / (scale * scale)
            };
            let sum = if y.len() >= super::density::PAR_LEN {
                (0..y.len()).into_par_iter().map(err_at).sum::<f64>()
            } else {
                (0..y.len()).map(err_at).sum::<f64>()
            };
            let err = (sum / y.len() as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration("non-finite error estimate".into()));
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if last { duration } else { t + h };
                y.copy_from_slice(&self.y_new);
                after_step(y);
                // The hook may have touched y, so the first stage is recomputed.
                rhs(y, k1);
                stats.accepted += 1;
                if !last {
                    self.h = Some(h * factor);
                }
                h *= factor;
            } else {
                stats.rejected += 1;
                h *= factor.min(1.0);
            }
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_and_rotation() {
        let rates = [C64::new(-1.0, 0.0), C64::new(0.0, -3.0), C64::new(-0.5, 2.0)];
        let mut y = vec![C64::new(1.0, 0.0); 3];
        let mut solver = Dopri5::new(3, StepControl::default());
        let stats = solver
            .integrate(&mut y, 2.0, |y, out| {
                for i in 0..3 {
                    out[i] = rates[i] * y[i];
                }
            }, |_| {})
            .unwrap();
        assert!(stats.accepted > 0);
        for i in 0..3 {
            let exact = (rates[i] * 2.0).exp();
            assert!((y[i] - exact).norm() < 1e-9, "{i}: {} vs {exact}", y[i]);
        }
    }

    #[test]
    fn step_budget_is_enforced() {
        let mut y = vec![C64::new(1.0, 0.0)];
        let mut solver = Dopri5::new(
            1,
            StepControl {
                rtol: 1e-14,
                atol: 1e-16,
                max_steps: 3,
            },
        );
        let r = solver.integrate(&mut y, 100.0, |y, out| out[0] = C64::new(0.0, -50.0) * y[0], |_| {});
        assert!(matches!(r, Err(Error::Integration(_))));
    }
}
