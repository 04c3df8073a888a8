//! Dense-matrix constructions for small registers, used to cross-check the
//! state-vector kernels.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::CouplingMatrix;
use crate::linalg::{self, CMat};
use crate::spin::Axis;

pub const DENSE_MAX_SPINS: usize = 10;

fn check(n: usize) -> Result<()> {
    super::state::check_spins(n, DENSE_MAX_SPINS, "dense operator")
}

/// `s^axis |b⟩ = coef |b'⟩` for spin `j`.
fn single_action(axis: Axis, j: usize, b: usize) -> (C64, usize) {
    let down = (b >> j) & 1 == 1;
    match axis {
        Axis::Z => (C64::new(if down { -0.5 } else { 0.5 }, 0.0), b),
        Axis::X => (C64::new(0.5, 0.0), b ^ (1 << j)),
        Axis::Y => (C64::new(0.0, if down { -0.5 } else { 0.5 }), b ^ (1 << j)),
    }
}

/// Matrix of the operator product `ops[0] ops[1] …` (rightmost acts first).
pub fn spin_product(n: usize, ops: &[(usize, Axis)]) -> Result<CMat> {
    check(n)?;
    let dim = 1usize << n;
    let mut m = CMat::zeros(dim, dim);
    for col in 0..dim {
        let mut coef = C64::new(1.0, 0.0);
        let mut b = col;
        for &(j, axis) in ops.iter().rev() {
            let (c, nb) = single_action(axis, j, b);
            coef *= c;
            b = nb;
        }
        m[(b, col)] += coef;
    }
    Ok(m)
}

/// `S_axis`.
pub fn collective(n: usize, axis: Axis) -> Result<CMat> {
    let mut m = CMat::zeros(1 << n, 1 << n);
    for j in 0..n {
        m += spin_product(n, &[(j, axis)])?;
    }
    Ok(m)
}

/// `S² = S_x² + S_y² + S_z²`.
pub fn total_spin_squared(n: usize) -> Result<CMat> {
    let mut m = CMat::zeros(1 << n, 1 << n);
    for axis in Axis::ALL {
        let s = collective(n, axis)?;
        m += &s * &s;
    }
    Ok(m)
}

/// `H_μμ = Σ_{j≠k} K_jk s_j^μ s_k^μ`.
pub fn ising(c: &CouplingMatrix, axis: Axis) -> Result<CMat> {
    let n = c.n();
    check(n)?;
    let mut m = CMat::zeros(1 << n, 1 << n);
    for j in 0..n {
        for k in 0..n {
            if j != k {
                m += spin_product(n, &[(j, axis), (k, axis)])? * faer::Scale(C64::new(c.get(j, k), 0.0));
            }
        }
    }
    Ok(m)
}

/// Coefficient `K_[jkl]` of the first-order three-body term.
pub fn three_body_coefficient(c: &CouplingMatrix, j: usize, k: usize, l: usize) -> f64 {
    c.get(j, l) * c.get(k, l) + c.get(j, k) * c.get(l, k) - c.get(k, j) * c.get(l, j)
}

/// `Σ_{[j,k,l]} w(j,k,l) (s_j^x s_k^y s_l^z + s_l^z s_k^y s_j^x)` over ordered distinct triples.
pub fn three_body_sum(n: usize, weight: impl Fn(usize, usize, usize) -> f64) -> Result<CMat> {
    check(n)?;
    let mut m = CMat::zeros(1 << n, 1 << n);
    for j in 0..n {
        for k in 0..n {
            for l in 0..n {
                if j == k || k == l || j == l {
                    continue;
                }
                let w = weight(j, k, l);
                if w == 0.0 {
                    continue;
                }
                let fwd = spin_product(n, &[(j, Axis::X), (k, Axis::Y), (l, Axis::Z)])?;
                let rev = spin_product(n, &[(l, Axis::Z), (k, Axis::Y), (j, Axis::X)])?;
                m += (fwd + rev) * faer::Scale(C64::new(w, 0.0));
            }
        }
    }
    Ok(m)
}

/// First-order Floquet Hamiltonian of the three-segment period.
pub fn effective_hamiltonian_dense(c: &CouplingMatrix, tau: f64) -> Result<CMat> {
    let n = c.n();
    check(n)?;
    let mut h = (ising(c, Axis::X)? + ising(c, Axis::Y)? + ising(c, Axis::Z)?) * faer::Scale(C64::new(1.0 / 3.0, 0.0));
    if tau != 0.0 {
        let three = three_body_sum(n, |j, k, l| three_body_coefficient(c, j, k, l))?;
        h += three * faer::Scale(C64::new(tau / 3.0, 0.0));
    }
    Ok(h)
}

/// `e^{−iτH_zz} e^{−iτH_xx} e^{−iτH_yy}` by dense exponentials.
pub fn floquet_unitary_dense(c: &CouplingMatrix, tau: f64) -> Result<CMat> {
    let uy = linalg::expm_hermitian(&ising(c, Axis::Y)?, tau)?;
    let ux = linalg::expm_hermitian(&ising(c, Axis::X)?, tau)?;
    let uz = linalg::expm_hermitian(&ising(c, Axis::Z)?, tau)?;
    Ok(&uz * &(&ux * &uy))
}

/// Column `b` of a dense unitary applied to basis states, as a check on kernels.
pub fn apply(m: &CMat, v: &[C64]) -> Result<Vec<C64>> {
    if m.ncols() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: m.ncols(),
            got: v.len(),
        });
    }
    Ok(linalg::mat_vec(m, v))
}
