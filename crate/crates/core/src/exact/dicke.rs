//! Symmetric (Dicke) subspace of `N` spins-1/2 and the collective cubic model.

use num_complex::Complex64 as C64;

use super::state::PureState;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMat, HermitianEigen};
use crate::spin::Axis;

/// Amplitudes over `|J=N/2, M⟩` with `M = −N/2, …, N/2` ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct DickeState {
    n: usize,
    amps: Vec<C64>,
}

impl DickeState {
    /// `|M = N/2⟩`, the all-up coherent state.
    pub fn initial_css(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("N must be positive"));
        }
        let mut amps = vec![C64::new(0.0, 0.0); n + 1];
        amps[n] = C64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    pub fn from_amplitudes(n: usize, mut amps: Vec<C64>) -> Result<Self> {
        if amps.len() != n + 1 {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                got: amps.len(),
            });
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(invalid("zero state vector"));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { n, amps })
    }

    /// `(|M=N/2⟩_x + |M=−N/2⟩_x)/√2` expressed in the z basis.
    pub fn ghz_x(n: usize) -> Result<Self> {
        // |→⟩^N has Dicke weights √C(N,k)/2^{N/2}; |←⟩^N adds (−1)^{#↓}.
        let amps = (0..=n)
            .map(|i| {
                let sign = if (n - i) % 2 == 0 { 1.0 } else { -1.0 };
                C64::new(binomial(n, i).sqrt() * (1.0 + sign), 0.0)
            })
            .collect();
        Self::from_amplitudes(n, amps)
    }

    pub fn num_spins(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `J_axis |φ⟩`.
    pub fn apply_spin(&self, axis: Axis) -> Vec<C64> {
        let n = self.n;
        let j = n as f64 / 2.0;
        let ladder = |i: usize| {
            let m = i as f64 - j;
            (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
        };
        (0..=n)
            .map(|i| {
                let m = i as f64 - j;
                match axis {
                    Axis::Z => self.amps[i] * m,
                    Axis::X | Axis::Y => {
                        // ⟨i|J₊|i−1⟩ = ladder(i−1), ⟨i|J₋|i+1⟩ = ladder(i).
                        let up = if i > 0 { self.amps[i - 1] * ladder(i - 1) } else { C64::new(0.0, 0.0) };
                        let down = if i < n { self.amps[i + 1] * ladder(i) } else { C64::new(0.0, 0.0) };
                        if axis == Axis::X {
                            (up + down) * 0.5
                        } else {
                            (up - down) * C64::new(0.0, -0.5)
                        }
                    }
                }
            })
            .collect()
    }

    /// Embeds the state into the full `2^N` register.
    pub fn to_pure(&self) -> Result<PureState> {
        let n = self.n;
        super::state::check_spins(n, super::state::MAX_SPINS, "state vector")?;
        let norms: Vec<f64> = (0..=n).map(|k| binomial(n, k).sqrt()).collect();
        let amps = (0..1usize << n)
            .map(|b| {
                let k = b.count_ones() as usize;
                self.amps[n - k] / norms[k]
            })
            .collect();
        PureState::from_amplitudes(n, amps)
    }
}

/// Projection of a full state onto the Dicke basis, with the weight left outside.
#[derive(Clone, Debug)]
pub struct DickeProjection {
    pub amplitudes: Vec<C64>,
    pub deficit: f64,
}

pub fn project_to_dicke(psi: &PureState) -> DickeProjection {
    let n = psi.num_spins();
    let mut amps = vec![C64::new(0.0, 0.0); n + 1];
    for (b, a) in psi.amplitudes().iter().enumerate() {
        amps[n - b.count_ones() as usize] += a;
    }
    for (i, a) in amps.iter_mut().enumerate() {
        *a /= binomial(n, n - i).sqrt();
    }
    let inside: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    DickeProjection {
        amplitudes: amps,
        deficit: (1.0 - inside).max(0.0),
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Matrix of `J_axis` on the `(N+1)`-dimensional Dicke basis.
pub fn collective(n: usize, axis: Axis) -> CMat {
    let dim = n + 1;
    let mut m = CMat::zeros(dim, dim);
    for col in 0..dim {
        let mut e = vec![C64::new(0.0, 0.0); dim];
        e[col] = C64::new(1.0, 0.0);
        let v = DickeState { n, amps: e }.apply_spin(axis);
        for (row, x) in v.into_iter().enumerate() {
            m[(row, col)] = x;
        }
    }
    m
}

/// `(λK²τ/3)(J_x J_y J_z + J_z J_y J_x)`.
pub fn zm_hamiltonian(n: usize, lambda: f64, k: f64, tau: f64) -> Result<CMat> {
    if n < 2 {
        return Err(invalid(format!("zm_hamiltonian needs N >= 2, got {n}")));
    }
    let jx = collective(n, Axis::X);
    let jy = collective(n, Axis::Y);
    let jz = collective(n, Axis::Z);
    let a = &(&jx * &jy) * &jz;
    let h = &a + a.adjoint();
    Ok(h * faer::Scale(C64::new(lambda * k * k * tau / 3.0, 0.0)))
}

/// Spectral propagator for repeated `exp(−iHt)` of one Hermitian matrix.
#[derive(Clone, Debug)]
pub struct ZmPropagator {
    eig: HermitianEigen,
}

impl ZmPropagator {
    pub fn new(h: &CMat) -> Result<Self> {
        Ok(Self {
            eig: linalg::hermitian_eigen(h)?,
        })
    }

    pub fn energies(&self) -> &[f64] {
        &self.eig.values
    }

    /// Coefficients of `φ` in the eigenbasis.
    pub fn decompose(&self, phi: &DickeState) -> Result<Vec<C64>> {
        let v = &self.eig.vectors;
        if v.nrows() != phi.amps.len() {
            return Err(Error::DimensionMismatch {
                expected: v.nrows(),
                got: phi.amps.len(),
            });
        }
        Ok((0..v.ncols())
            .map(|k| v.col(k).iter().zip(&phi.amps).map(|(x, a)| x.conj() * a).sum())
            .collect())
    }

    /// State at time `t` from eigenbasis coefficients at `t = 0`.
    pub fn evolve_coefficients(&self, n: usize, coeffs: &[C64], t: f64) -> DickeState {
        let v = &self.eig.vectors;
        let mut amps = vec![C64::new(0.0, 0.0); v.nrows()];
        for (k, (&c, &e)) in coeffs.iter().zip(&self.eig.values).enumerate() {
            let w = c * C64::from_polar(1.0, -e * t);
            for (a, x) in amps.iter_mut().zip(v.col(k).iter()) {
                *a += x * w;
            }
        }
        DickeState { n, amps }
    }

    pub fn evolve(&self, phi: &DickeState, t: f64) -> Result<DickeState> {
        let c = self.decompose(phi)?;
        Ok(self.evolve_coefficients(phi.n, &c, t))
    }
}

/// `exp(−iHt) φ`.
pub fn zm_evolve(phi: &DickeState, h: &CMat, t: f64) -> Result<DickeState> {
    ZmPropagator::new(h)?.evolve(phi, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::dense;

    #[test]
    fn embedding_matches_full_collective_operators() {
        let n = 5;
        let phi = DickeState::from_amplitudes(
            n,
            (0..=n).map(|i| C64::new(0.3 * i as f64 - 0.4, 0.1 * (i * i) as f64)).collect(),
        )
        .unwrap();
        let psi = phi.to_pure().unwrap();
        for axis in Axis::ALL {
            let small = DickeState {
                n,
                amps: phi.apply_spin(axis),
            };
            let big = psi.apply_spin(axis);
            let mut lifted = small.to_pure_unnormalized();
            let scale = psi.norm();
            for (x, y) in lifted.iter_mut().zip(&big) {
                *x *= scale;
                assert!((*x - y).norm() < 1e-12, "{axis:?}");
            }
        }
        let back = project_to_dicke(&psi);
        assert!(back.deficit < 1e-12);
        for (a, b) in back.amplitudes.iter().zip(phi.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    impl DickeState {
        fn to_pure_unnormalized(&self) -> Vec<C64> {
            let n = self.n;
            (0..1usize << n)
                .map(|b| {
                    let k = b.count_ones() as usize;
                    self.amps[n - k] / binomial(n, k).sqrt()
                })
                .collect()
        }
    }

    #[test]
    fn css_is_top_state() {
        let phi = DickeState::initial_css(4).unwrap();
        let psi = phi.to_pure().unwrap();
        assert!((psi.fidelity(&PureState::initial_css(4).unwrap()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ghz_matches_full_register() {
        let phi = DickeState::ghz_x(6).unwrap();
        let psi = phi.to_pure().unwrap();
        assert!((psi.fidelity(&PureState::ghz_x(6).unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zm_hamiltonian_structure() {
        let h2 = zm_hamiltonian(2, 1.0, 1.0, 0.1).unwrap();
        let tr: C64 = (0..3).map(|i| h2[(i, i)]).sum();
        assert!(tr.norm() < 1e-14);
        assert!(linalg::max_abs(&(&h2 - h2.adjoint())) < 1e-15);

        let h4 = zm_hamiltonian(4, 1.0, 1.0, 0.1).unwrap();
        let e = linalg::hermitian_eigen(&h4).unwrap().values;
        for i in 0..e.len() {
            assert!((e[i] + e[e.len() - 1 - i]).abs() < 1e-12);
        }
        for axis in Axis::ALL {
            let j = collective(4, axis);
            assert!(linalg::max_abs(&linalg::commutator(&h4, &j)) > 1e-3, "{axis:?}");
        }
        assert!(zm_hamiltonian(1, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn projection_of_three_body_term_at_alpha_zero() {
        // With all couplings equal, the three-body operator restricted to the
        // symmetric subspace is λK²τ/3 (J_xJ_yJ_z + J_zJ_yJ_x), λ = 1.
        let n = 4;
        let tau = 0.1;
        let full = dense::three_body_sum(n, |_, _, _| 1.0).unwrap() * faer::Scale(C64::new(tau / 3.0, 0.0));
        let zm = zm_hamiltonian(n, 1.0, 1.0, tau).unwrap();
        let basis: Vec<Vec<C64>> = (0..=n)
            .map(|i| {
                let mut e = vec![C64::new(0.0, 0.0); n + 1];
                e[i] = C64::new(1.0, 0.0);
                DickeState::from_amplitudes(n, e).unwrap().to_pure().unwrap().into_amplitudes()
            })
            .collect();
        for r in 0..=n {
            for c in 0..=n {
                let hv = linalg::mat_vec(&full, &basis[c]);
                let elem: C64 = basis[r].iter().zip(&hv).map(|(a, b)| a.conj() * b).sum();
                assert!((elem - zm[(r, c)]).norm() < 1e-12, "({r},{c})");
            }
        }
    }

    #[test]
    fn evolution_preserves_norm_and_identity_at_zero() {
        let h = zm_hamiltonian(50, 0.7, 1.0, 0.05).unwrap();
        let phi = DickeState::initial_css(50).unwrap();
        let same = zm_evolve(&phi, &h, 0.0).unwrap();
        for (a, b) in same.amplitudes().iter().zip(phi.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
        let prop = ZmPropagator::new(&h).unwrap();
        for t in [0.3, 7.0, 120.0] {
            assert!((prop.evolve(&phi, t).unwrap().norm() - 1.0).abs() < 1e-10);
        }
    }
}
