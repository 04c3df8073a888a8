use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spin::{self, Axis, Gate};

/// Largest register the state-vector engine accepts.
pub const MAX_SPINS: usize = 26;

const PAR_LEN: usize = 1 << 15;

/// `2^N` amplitudes; spin `j` is bit `j`, bit 0 is `|↑⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n: usize,
    amps: Vec<C64>,
}

pub(crate) fn check_spins(n: usize, cap: usize, what: &'static str) -> Result<()> {
    if n == 0 || n > cap {
        return Err(Error::Capacity { what, n, cap });
    }
    Ok(())
}

impl PureState {
    /// `|↑⟩^⊗N`.
    pub fn initial_css(n: usize) -> Result<Self> {
        check_spins(n, MAX_SPINS, "state vector")?;
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[0] = C64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    /// Wraps raw amplitudes; the vector is normalized.
    pub fn from_amplitudes(n: usize, mut amps: Vec<C64>) -> Result<Self> {
        check_spins(n, MAX_SPINS, "state vector")?;
        if amps.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                got: amps.len(),
            });
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { n, amps })
    }

    /// Product state with every spin along the Bloch direction `(θ, φ)`.
    pub fn product(n: usize, theta: f64, phi: f64) -> Result<Self> {
        Self::product_sites(n, &vec![(theta, phi); n])
    }

    /// Product state with site-dependent Bloch angles.
    pub fn product_sites(n: usize, angles: &[(f64, f64)]) -> Result<Self> {
        check_spins(n, MAX_SPINS, "state vector")?;
        if angles.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: angles.len(),
            });
        }
        let amps = (0..1usize << n)
            .map(|b| {
                let mut a = C64::new(1.0, 0.0);
                for (j, &(theta, phi)) in angles.iter().enumerate() {
                    a *= if (b >> j) & 1 == 0 {
                        C64::new((0.5 * theta).cos(), 0.0)
                    } else {
                        C64::from_polar((0.5 * theta).sin(), phi)
                    };
                }
                a
            })
            .collect();
        Ok(Self { n, amps })
    }

    /// `(|→…→⟩ + |←…←⟩)/√2`.
    pub fn ghz_x(n: usize) -> Result<Self> {
        check_spins(n, MAX_SPINS, "state vector")?;
        let dim = 1usize << n;
        let scale = 1.0 / (dim as f64).sqrt() / 2f64.sqrt();
        let amps = (0..dim)
            .map(|b| {
                // |→⟩^N has all amplitudes equal; |←⟩^N carries (−1)^{#↓}.
                let sign = if b.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                C64::new(scale * (1.0 + sign), 0.0)
            })
            .collect();
        Ok(Self { n, amps })
    }

    pub fn num_spins(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    fn norm_sqr(&self) -> f64 {
        if self.amps.len() >= PAR_LEN {
            self.amps.par_iter().map(|a| a.norm_sqr()).sum()
        } else {
            self.amps.iter().map(|a| a.norm_sqr()).sum()
        }
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        inner(&self.amps, &other.amps)
    }

    pub fn fidelity(&self, other: &PureState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Applies the same single-spin gate to every spin.
    pub fn apply_global_gate(&mut self, gate: &Gate) {
        spin::apply_gate_to_all(&mut self.amps, self.n, gate);
    }

    /// `exp(−i θ S_axis)`.
    pub fn rotate(&mut self, axis: Axis, theta: f64) {
        self.apply_global_gate(&spin::rotation(axis, theta));
    }

    /// `S_axis |ψ⟩` as a raw vector.
    pub fn apply_spin(&self, axis: Axis) -> Vec<C64> {
        apply_collective(&self.amps, self.n, axis)
    }
}

pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    if a.len() >= PAR_LEN {
        a.par_iter().zip(b.par_iter()).map(|(x, y)| x.conj() * y).sum()
    } else {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }
}

/// `S_axis v` for an `n`-spin vector.
pub(crate) fn apply_collective(v: &[C64], n: usize, axis: Axis) -> Vec<C64> {
    let i = C64::new(0.0, 1.0);
    let element = |b: usize| -> C64 {
        match axis {
            Axis::Z => v[b] * spin::total_sz(b, n),
            Axis::X => {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n {
                    acc += v[b ^ (1 << j)];
                }
                acc * 0.5
            }
            Axis::Y => {
                // ⟨↓|σ^y|↑⟩ = i, ⟨↑|σ^y|↓⟩ = −i.
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n {
                    let src = v[b ^ (1 << j)];
                    if (b >> j) & 1 == 1 {
                        acc += i * src;
                    } else {
                        acc -= i * src;
                    }
                }
                acc * 0.5
            }
        }
    };
    if v.len() >= PAR_LEN {
        (0..v.len()).into_par_iter().map(element).collect()
    } else {
        (0..v.len()).map(element).collect()
    }
}
