//! Spin-1/2 conventions shared by every engine.
//!
//! Basis index `b` of an `N`-spin register stores spin `j` in bit `j`; a
//! cleared bit is `|↑⟩` (s^z = +1/2).

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// The two axes that rotate into each other about `self`, in right-handed order.
    pub fn transverse(self) -> (usize, usize) {
        match self {
            Axis::X => (1, 2),
            Axis::Y => (2, 0),
            Axis::Z => (0, 1),
        }
    }
}

/// 2×2 single-spin operator, row-major.
pub type Gate = [[C64; 2]; 2];

pub fn pauli(axis: Axis) -> Gate {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match axis {
        Axis::X => [[z, one], [one, z]],
        Axis::Y => [[z, -i], [i, z]],
        Axis::Z => [[one, z], [z, -one]],
    }
}

/// exp(-i θ s^axis) for a single spin-1/2.
pub fn rotation(axis: Axis, theta: f64) -> Gate {
    let c = (0.5 * theta).cos();
    let s = (0.5 * theta).sin();
    let p = pauli(axis);
    let mut g = [[C64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for col in 0..2 {
            let id = if r == col { c } else { 0.0 };
            g[r][col] = C64::new(id, 0.0) - C64::new(0.0, s) * p[r][col];
        }
    }
    g
}

pub fn adjoint(g: &Gate) -> Gate {
    [[g[0][0].conj(), g[1][0].conj()], [g[0][1].conj(), g[1][1].conj()]]
}

pub fn conjugate(g: &Gate) -> Gate {
    [[g[0][0].conj(), g[0][1].conj()], [g[1][0].conj(), g[1][1].conj()]]
}

/// Applies `gate` to bit `bit` of a state vector in place.
pub fn apply_gate_to_bit(amps: &mut [C64], bit: usize, gate: &Gate) {
    let stride = 1usize << bit;
    for block in amps.chunks_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let x = *a;
            let y = *b;
            *a = gate[0][0] * x + gate[0][1] * y;
            *b = gate[1][0] * x + gate[1][1] * y;
        }
    }
}

/// Applies `gate` to every one of the lowest `n` bits.
pub fn apply_gate_to_all(amps: &mut [C64], n: usize, gate: &Gate) {
    use rayon::prelude::*;
    const PAR_THRESHOLD: usize = 1 << 16;
    for bit in 0..n {
        let stride = 1usize << bit;
        if amps.len() >= PAR_THRESHOLD && 2 * stride <= amps.len() / 8 {
            amps.par_chunks_mut(2 * stride.max(1 << 10))
                .for_each(|chunk| apply_gate_to_bit(chunk, bit, gate));
        } else {
            apply_gate_to_bit(amps, bit, gate);
        }
    }
}

/// s^z eigenvalue (±1/2) of spin `j` in basis state `b`.
#[inline]
pub fn sz_of(b: usize, j: usize) -> f64 {
    if (b >> j) & 1 == 0 {
        0.5
    } else {
        -0.5
    }
}

/// Total S_z of basis state `b` for `n` spins.
#[inline]
pub fn total_sz(b: usize, n: usize) -> f64 {
    0.5 * n as f64 - (b.count_ones() as f64)
}
