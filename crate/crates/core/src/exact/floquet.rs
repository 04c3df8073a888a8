use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::state::PureState;
use crate::error::{invalid, Error, Result};
use crate::lattice::CouplingMatrix;
use crate::spin::{self, Axis};

/// Registers up to this size keep a full table of Ising energies.
pub const DEFAULT_TABLE_MAX_SPINS: usize = 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PeriodForm {
    /// `e^{−iH_zz τ} e^{−iH_xx τ} e^{−iH_yy τ}`.
    #[default]
    Segment,
    /// Three `H_zz` segments interleaved with global `±π/2` pulses.
    Pulsed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloquetSchedule {
    pub tau: f64,
    pub n_periods: usize,
    #[serde(default)]
    pub form: PeriodForm,
}

impl FloquetSchedule {
    pub fn new(tau: f64, n_periods: usize, form: PeriodForm) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(invalid(format!("tau must be non-negative, got {tau}")));
        }
        Ok(Self { tau, n_periods, form })
    }

    pub fn period(&self) -> f64 {
        3.0 * self.tau
    }

    /// Stroboscopic times `3τn`, `n = 0..=n_periods`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_periods).map(|p| p as f64 * self.period()).collect()
    }
}

/// Diagonal energies `E(b) = Σ_{j≠k} K_jk s_j^z s_k^z` of the z-Ising Hamiltonian.
#[derive(Clone, Debug)]
pub struct IsingEnergies {
    n: usize,
    repr: Repr,
}

#[derive(Clone, Debug)]
enum Repr {
    Table(Vec<f64>),
    /// `E(b) = low[l] + high[h] + 2 Σ_{j<split} s_j(l) field_j(h)`, computed per block.
    Split {
        split: usize,
        low: Vec<f64>,
        high: Vec<f64>,
        couplings: CouplingMatrix,
    },
}

impl IsingEnergies {
    pub fn new(c: &CouplingMatrix) -> Self {
        Self::with_table_limit(c, DEFAULT_TABLE_MAX_SPINS)
    }

    pub fn with_table_limit(c: &CouplingMatrix, table_max: usize) -> Self {
        let n = c.n();
        if n <= table_max {
            return Self {
                n,
                repr: Repr::Table(energy_table(c, &(0..n).collect::<Vec<_>>())),
            };
        }
        let split = n / 2;
        let low_sites: Vec<usize> = (0..split).collect();
        let high_sites: Vec<usize> = (split..n).collect();
        Self {
            n,
            repr: Repr::Split {
                split,
                low: energy_table(c, &low_sites),
                high: energy_table(c, &high_sites),
                couplings: c.clone(),
            },
        }
    }

    pub fn num_spins(&self) -> usize {
        self.n
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.repr, Repr::Table(_))
    }

    pub fn energy(&self, b: usize) -> f64 {
        match &self.repr {
            Repr::Table(t) => t[b],
            Repr::Split {
                split,
                low,
                high,
                couplings,
            } => {
                let l = b & ((1 << split) - 1);
                let h = b >> split;
                let mut cross = 0.0;
                for j in 0..*split {
                    for k in *split..self.n {
                        cross += couplings.get(j, k) * spin::sz_of(b, j) * spin::sz_of(b, k);
                    }
                }
                low[l] + high[h] + 2.0 * cross
            }
        }
    }

    /// Multiplies amplitude `b` by `e^{−iτE(b)}`.
    pub fn apply_phases(&self, amps: &mut [C64], tau: f64) {
        if tau == 0.0 {
            return;
        }
        match &self.repr {
            Repr::Table(t) => {
                let kernel = |(a, e): (&mut C64, &f64)| *a *= C64::from_polar(1.0, -tau * e);
                if amps.len() >= 1 << 15 {
                    amps.par_iter_mut().zip(t.par_iter()).for_each(kernel);
                } else {
                    amps.iter_mut().zip(t.iter()).for_each(kernel);
                }
            }
            Repr::Split {
                split,
                low,
                high,
                couplings,
            } => {
                let split = *split;
                let n = self.n;
                amps.par_chunks_mut(1 << split).enumerate().for_each(|(h, block)| {
                    let field: Vec<f64> = (0..split)
                        .map(|j| {
                            (split..n)
                                .map(|k| couplings.get(j, k) * spin::sz_of(h << split, k))
                                .sum()
                        })
                        .collect();
                    for (l, a) in block.iter_mut().enumerate() {
                        let mut cross = 0.0;
                        for (j, f) in field.iter().enumerate() {
                            cross += spin::sz_of(l, j) * f;
                        }
                        let e = low[l] + high[h] + 2.0 * cross;
                        *a *= C64::from_polar(1.0, -tau * e);
                    }
                });
            }
        }
    }
}

/// Ising energies of the sub-register `sites`, indexed by its own bits.
fn energy_table(c: &CouplingMatrix, sites: &[usize]) -> Vec<f64> {
    let m = sites.len();
    let dim = 1usize << m;
    let mut table = vec![0.0; dim];
    let mut s = vec![0.5; m];
    // Local fields h_a = Σ_{b≠a} K_ab s_b; all spins start up.
    let mut h: Vec<f64> = (0..m)
        .map(|a| (0..m).filter(|&b| b != a).map(|b| 0.5 * c.get(sites[a], sites[b])).sum())
        .collect();
    let mut e: f64 = (0..m).map(|a| s[a] * h[a]).sum();
    table[0] = e;
    // Walk the Gray code so each step flips one spin.
    for i in 1..dim {
        let a = i.trailing_zeros() as usize;
        let old = s[a];
        e -= 4.0 * old * h[a];
        s[a] = -old;
        for b in 0..m {
            if b != a {
                h[b] -= 2.0 * old * c.get(sites[a], sites[b]);
            }
        }
        table[i ^ (i >> 1)] = e;
    }
    table
}

fn check_dims(psi: &PureState, energies: &IsingEnergies) -> Result<()> {
    if psi.num_spins() != energies.num_spins() {
        return Err(Error::DimensionMismatch {
            expected: energies.num_spins(),
            got: psi.num_spins(),
        });
    }
    Ok(())
}

/// `exp(−iτH_μμ) ψ`, exact.
pub fn segment_evolve(psi: &mut PureState, axis: Axis, tau: f64, energies: &IsingEnergies) -> Result<()> {
    check_dims(psi, energies)?;
    if tau == 0.0 {
        return Ok(());
    }
    // R maps the segment axis onto z: R H_μμ R† = H_zz.
    let frame = match axis {
        Axis::Z => None,
        Axis::Y => Some((Axis::X, FRAC_PI_2)),
        Axis::X => Some((Axis::Y, FRAC_PI_2)),
    };
    if let Some((rot_axis, angle)) = frame {
        psi.rotate(rot_axis, angle);
        energies.apply_phases(psi.amplitudes_mut(), tau);
        psi.rotate(rot_axis, -angle);
    } else {
        energies.apply_phases(psi.amplitudes_mut(), tau);
    }
    Ok(())
}

/// One Floquet period `U(3τ)`.
pub fn floquet_period(psi: &mut PureState, tau: f64, form: PeriodForm, energies: &IsingEnergies) -> Result<()> {
    check_dims(psi, energies)?;
    match form {
        PeriodForm::Segment => {
            segment_evolve(psi, Axis::Y, tau, energies)?;
            segment_evolve(psi, Axis::X, tau, energies)?;
            segment_evolve(psi, Axis::Z, tau, energies)?;
        }
        PeriodForm::Pulsed => {
            psi.rotate(Axis::X, -FRAC_PI_2);
            energies.apply_phases(psi.amplitudes_mut(), tau);
            psi.rotate(Axis::X, FRAC_PI_2);
            psi.rotate(Axis::Y, -FRAC_PI_2);
            energies.apply_phases(psi.amplitudes_mut(), tau);
            psi.rotate(Axis::Y, FRAC_PI_2);
            energies.apply_phases(psi.amplitudes_mut(), tau);
        }
    }
    Ok(())
}

/// Applies `schedule.n_periods` periods.
pub fn evolve(psi: &mut PureState, schedule: &FloquetSchedule, energies: &IsingEnergies) -> Result<()> {
    for _ in 0..schedule.n_periods {
        floquet_period(psi, schedule.tau, schedule.form, energies)?;
    }
    Ok(())
}
