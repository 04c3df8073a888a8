use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::exact::PureState;
use crate::linalg::{self, CMat};
use crate::spin::{self, Axis, Gate};

/// Largest register the density-matrix engine accepts.
pub const MAX_SPINS: usize = 12;

pub(crate) const PAR_LEN: usize = 1 << 14;

/// Row-major `2^N × 2^N` density matrix.
///
/// Element `(r, c)` sits at flat index `r·2^N + c`, so the flat index is a
/// `2N`-bit register whose high half is the row (ket) and low half the column (bra).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    data: Vec<C64>,
}

fn check(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SPINS {
        return Err(Error::Capacity {
            what: "density matrix",
            n,
            cap: MAX_SPINS,
        });
    }
    Ok(())
}

impl DensityMatrix {
    pub fn from_pure(psi: &PureState) -> Result<Self> {
        let n = psi.num_spins();
        check(n)?;
        let a = psi.amplitudes();
        let dim = a.len();
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        data.par_chunks_mut(dim).enumerate().for_each(|(r, row)| {
            for (c, x) in row.iter_mut().enumerate() {
                *x = a[r] * a[c].conj();
            }
        });
        Ok(Self { n, data })
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check(n)?;
        let dim = 1usize << n;
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            data[r * dim + r] = C64::new(1.0 / dim as f64, 0.0);
        }
        Ok(Self { n, data })
    }

    /// Wraps row-major data after checking trace and Hermiticity.
    pub fn from_row_major(n: usize, data: Vec<C64>) -> Result<Self> {
        check(n)?;
        let dim = 1usize << n;
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        let rho = Self { n, data };
        let herm = rho.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::NonPhysical(format!("not Hermitian (error {herm:e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(Error::NonPhysical(format!("trace {tr}")));
        }
        Ok(rho)
    }

    pub fn num_spins(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut Vec<C64> {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim() + c]
    }

    pub fn trace(&self) -> C64 {
        let dim = self.dim();
        (0..dim).map(|r| self.data[r * dim + r]).sum()
    }

    /// `max |ρ_rc − conj(ρ_cr)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        (0..dim)
            .into_par_iter()
            .map(|r| {
                (0..=r)
                    .map(|c| (self.data[r * dim + c] - self.data[c * dim + r].conj()).norm())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Replaces `ρ` by `(ρ + ρ†)/2`.
    pub fn symmetrize(&mut self) {
        let dim = self.dim();
        symmetrize(&mut self.data, dim);
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity(&self, psi: &PureState) -> Result<f64> {
        if psi.num_spins() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: psi.num_spins(),
            });
        }
        let a = psi.amplitudes();
        let dim = self.dim();
        let v: C64 = self
            .data
            .par_chunks(dim)
            .enumerate()
            .map(|(r, row)| a[r].conj() * row.iter().zip(a).map(|(x, y)| x * y).sum::<C64>())
            .sum();
        Ok(v.re)
    }

    pub fn to_mat(&self) -> CMat {
        linalg::from_row_major(self.dim(), &self.data)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(linalg::hermitian_eigen(&self.to_mat())?.values)
    }

    /// `G^⊗N ρ G†^⊗N`.
    pub fn apply_global_gate(&mut self, gate: &Gate) {
        let n = self.n;
        let conj = spin::conjugate(gate);
        for j in 0..n {
            spin::apply_gate_to_bit(&mut self.data, n + j, gate);
            spin::apply_gate_to_bit(&mut self.data, j, &conj);
        }
    }

    /// `e^{−iθS_axis} ρ e^{iθS_axis}`.
    pub fn rotate(&mut self, axis: Axis, theta: f64) {
        self.apply_global_gate(&spin::rotation(axis, theta));
    }

    /// `Tr[S_axis ρ]`.
    pub fn spin_mean(&self, axis: Axis) -> f64 {
        let dim = self.dim();
        let image = collective_on_bits(&self.data, self.n, self.n, axis, false);
        (0..dim).map(|r| image[r * dim + r].re).sum()
    }
}

/// `Σ_j s^axis` acting on bits `offset..offset+n` of a flat vector; with
/// `transpose`, each single-spin matrix is replaced by its transpose.
pub(crate) fn collective_on_bits(v: &[C64], n: usize, offset: usize, axis: Axis, transpose: bool) -> Vec<C64> {
    let i = C64::new(0.0, if transpose { -0.5 } else { 0.5 });
    let element = |b: usize| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        match axis {
            Axis::Z => {
                let ones = ((b >> offset) & ((1 << n) - 1)).count_ones() as f64;
                return v[b] * (0.5 * n as f64 - ones);
            }
            Axis::X => {
                for j in 0..n {
                    acc += v[b ^ (1 << (offset + j))];
                }
                acc * 0.5
            }
            Axis::Y => {
                for j in 0..n {
                    let src = v[b ^ (1 << (offset + j))];
                    if (b >> (offset + j)) & 1 == 1 {
                        acc += i * src;
                    } else {
                        acc -= i * src;
                    }
                }
                acc
            }
        }
    };
    if v.len() >= PAR_LEN {
        (0..v.len()).into_par_iter().map(element).collect()
    } else {
        (0..v.len()).map(element).collect()
    }
}

pub(crate) fn symmetrize(data: &mut [C64], dim: usize) {
    // Tiles keep both the row and the transposed column block in cache.
    const TILE: usize = 32;
    for rb in (0..dim).step_by(TILE) {
        for cb in (0..=rb).step_by(TILE) {
            for r in rb..(rb + TILE).min(dim) {
                for c in cb..(cb + TILE).min(r) {
                    let a = data[r * dim + c];
                    let b = data[c * dim + r];
                    let avg = (a + b.conj()) * 0.5;
                    data[r * dim + c] = avg;
                    data[c * dim + r] = avg.conj();
                }
            }
        }
        for r in rb..(rb + TILE).min(dim) {
            data[r * dim + r].im = 0.0;
        }
    }
}

/// Lindblad noise channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// `L_j = √γ s_j^z` on every site.
    Local,
    /// `L = √Γ S_z`.
    Global,
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseKind::Local => "local",
            NoiseKind::Global => "global",
        })
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" | "local_dephasing" => Ok(NoiseKind::Local),
            "global" | "global_dephasing" => Ok(NoiseKind::Global),
            other => Err(invalid(format!("unknown noise kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// `γ` or `Γ` in the same inverse-time unit as the Hamiltonian.
    pub rate: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(invalid(format!("noise rate must be non-negative, got {rate}")));
        }
        Ok(Self { kind, rate })
    }

    pub fn none() -> Self {
        Self {
            kind: NoiseKind::Local,
            rate: 0.0,
        }
    }
}

/// Laboratory coupling and pulse spacing.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhysicalUnits {
    pub k_hz: f64,
    pub tau_s: f64,
}

impl PhysicalUnits {
    pub fn new(k_hz: f64, tau_s: f64) -> Result<Self> {
        if !(k_hz > 0.0 && tau_s > 0.0) {
            return Err(invalid("K and tau must be positive"));
        }
        Ok(Self { k_hz, tau_s })
    }

    /// The dimensionless product `Kτ`.
    pub fn k_tau(&self) -> f64 {
        self.k_hz * self.tau_s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_state_round_trip() {
        let psi = PureState::product(3, 0.8, 0.3).unwrap();
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-14);
        assert!(rho.hermiticity_error() < 1e-15);
        assert!((rho.fidelity(&psi).unwrap() - 1.0).abs() < 1e-14);
        let ev = rho.eigenvalues().unwrap();
        assert!((ev[7] - 1.0).abs() < 1e-12 && ev[0].abs() < 1e-12);
        assert!((rho.spin_mean(Axis::Z) - 1.5 * 0.8f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn rotation_matches_pure_rotation() {
        let psi = PureState::product_sites(3, &[(0.3, 0.1), (1.3, 2.0), (2.2, -0.6)]).unwrap();
        let mut rho = DensityMatrix::from_pure(&psi).unwrap();
        let mut phi = psi.clone();
        for (axis, theta) in [(Axis::X, 0.7), (Axis::Y, -1.1), (Axis::Z, 0.4)] {
            rho.rotate(axis, theta);
            phi.rotate(axis, theta);
        }
        assert!((rho.fidelity(&phi).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn validation() {
        assert!(matches!(DensityMatrix::maximally_mixed(MAX_SPINS + 1), Err(Error::Capacity { .. })));
        let mut bad = DensityMatrix::maximally_mixed(2).unwrap().as_slice().to_vec();
        bad[1] = C64::new(0.1, 0.0);
        assert!(matches!(DensityMatrix::from_row_major(2, bad), Err(Error::NonPhysical(_))));
        assert!(NoiseSpec::new(NoiseKind::Local, -1.0).is_err());
        assert_eq!("global".parse::<NoiseKind>().unwrap(), NoiseKind::Global);
        assert!((PhysicalUnits::new(560.0, 0.18e-3).unwrap().k_tau() - 0.1008).abs() < 1e-12);
    }
}
