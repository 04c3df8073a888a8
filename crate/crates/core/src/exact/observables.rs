use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64 as C64;

use super::dicke::{self, DickeState};
use super::state::{inner, PureState};
use crate::error::{invalid, Result};
use crate::linalg;
use crate::spin::Axis;

/// States on which collective spin operators can act.
pub trait CollectiveState {
    fn num_spins(&self) -> usize;
    fn amplitudes(&self) -> &[C64];
    /// `S_axis |self⟩`.
    fn spin_image(&self, axis: Axis) -> Vec<C64>;
}

impl CollectiveState for PureState {
    fn num_spins(&self) -> usize {
        PureState::num_spins(self)
    }
    fn amplitudes(&self) -> &[C64] {
        PureState::amplitudes(self)
    }
    fn spin_image(&self, axis: Axis) -> Vec<C64> {
        self.apply_spin(axis)
    }
}

impl CollectiveState for DickeState {
    fn num_spins(&self) -> usize {
        DickeState::num_spins(self)
    }
    fn amplitudes(&self) -> &[C64] {
        DickeState::amplitudes(self)
    }
    fn spin_image(&self, axis: Axis) -> Vec<C64> {
        self.apply_spin(axis)
    }
}

/// First and second moments of the collective spin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinMoments {
    pub mean: [f64; 3],
    /// `⟨(S_i S_j + S_j S_i)/2⟩`.
    pub second: [[f64; 3]; 3],
}

impl SpinMoments {
    pub fn of<S: CollectiveState + ?Sized>(state: &S) -> Self {
        let psi = state.amplitudes();
        let images: Vec<Vec<C64>> = Axis::ALL.iter().map(|&a| state.spin_image(a)).collect();
        let mut mean = [0.0; 3];
        let mut second = [[0.0; 3]; 3];
        for i in 0..3 {
            mean[i] = inner(psi, &images[i]).re;
            for j in i..3 {
                let v = inner(&images[i], &images[j]).re;
                second[i][j] = v;
                second[j][i] = v;
            }
        }
        Self { mean, second }
    }

    /// `4 Var(n·S)`.
    pub fn qfi(&self, n: [f64; 3]) -> f64 {
        let mut var = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                var += n[i] * n[j] * (self.second[i][j] - self.mean[i] * self.mean[j]);
            }
        }
        4.0 * var
    }

    /// `F_ij = 2⟨{S_i,S_j}⟩ − 4⟨S_i⟩⟨S_j⟩`.
    pub fn qfi_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| 4.0 * self.second[i][j] - 4.0 * self.mean[i] * self.mean[j])
    }

    pub fn total_spin_squared(&self) -> f64 {
        self.second[0][0] + self.second[1][1] + self.second[2][2]
    }
}

fn unit(n: [f64; 3]) -> Result<[f64; 3]> {
    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if !(len > 0.0 && len.is_finite()) {
        return Err(invalid("generator direction must be non-zero"));
    }
    Ok([n[0] / len, n[1] / len, n[2] / len])
}

/// `4(⟨S_n²⟩ − ⟨S_n⟩²)`.
pub fn qfi_pure<S: CollectiveState + ?Sized>(state: &S, direction: [f64; 3]) -> Result<f64> {
    let n = unit(direction)?;
    Ok(SpinMoments::of(state).qfi(n))
}

/// Top eigenpair of the QFI matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimalQfi {
    pub value: f64,
    pub direction: [f64; 3],
}

pub fn qfi_matrix_optimal<S: CollectiveState + ?Sized>(state: &S) -> OptimalQfi {
    optimal_from_matrix(&SpinMoments::of(state).qfi_matrix())
}

/// Largest eigenvalue of a symmetric 3×3 matrix; ties go to the direction with
/// the largest `x` component, and the sign is fixed to `n_x ≥ 0`.
pub fn optimal_from_matrix(f: &Matrix3<f64>) -> OptimalQfi {
    let sym = (f + f.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let top = eig.eigenvalues.max();
    let tol = 1e-9 * top.abs().max(1.0);
    let x = Vector3::new(1.0, 0.0, 0.0);
    // Project x̂ onto the (possibly degenerate) top eigenspace.
    let mut proj = Vector3::zeros();
    let mut first = None;
    for k in 0..3 {
        if eig.eigenvalues[k] >= top - tol {
            let v = eig.eigenvectors.column(k).into_owned();
            proj += v * v.dot(&x);
            first.get_or_insert(v);
        }
    }
    let mut dir = if proj.norm() > 1e-8 {
        proj.normalize()
    } else {
        first.expect("a top eigenvector exists")
    };
    let lead = if dir[0].abs() > 1e-12 {
        dir[0]
    } else {
        *dir.iter().find(|c| c.abs() > 1e-12).unwrap_or(&1.0)
    };
    if lead < 0.0 {
        dir = -dir;
    }
    OptimalQfi {
        value: top,
        direction: [dir[0], dir[1], dir[2]],
    }
}

/// `⟨e^{−iS_xθ} Π e^{iS_xθ}⟩` with `Π = ∏σ_j^z`.
pub fn parity_expectation(psi: &PureState, theta: f64) -> f64 {
    let mut phi = psi.clone();
    phi.rotate(Axis::X, -theta);
    phi.amplitudes()
        .iter()
        .enumerate()
        .map(|(b, a)| if b.count_ones() % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum()
}

/// Parity in the symmetric subspace: `Π|M⟩ = (−1)^{J−M}|M⟩`.
pub fn parity_expectation_dicke(phi: &DickeState, theta: f64) -> Result<f64> {
    let n = phi.num_spins();
    let h = dicke::collective(n, Axis::X);
    // e^{iS_xθ} = exp(−i(−S_x)θ).
    let rotated = linalg::mat_vec(&linalg::expm_hermitian(&h, -theta)?, phi.amplitudes());
    Ok(rotated
        .iter()
        .enumerate()
        .map(|(i, a)| if (n - i) % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum())
}

/// `P(m)` for the `S_x` eigenvalue `m`, indexed from `m = −N/2` upward.
pub fn sx_distribution(psi: &PureState) -> Vec<f64> {
    let n = psi.num_spins();
    let mut phi = psi.clone();
    // exp(+iπ/2 S_y) carries S_x onto S_z.
    phi.rotate(Axis::Y, -FRAC_PI_2);
    let mut p = vec![0.0; n + 1];
    for (b, a) in phi.amplitudes().iter().enumerate() {
        p[n - b.count_ones() as usize] += a.norm_sqr();
    }
    p
}

pub fn sx_distribution_dicke(phi: &DickeState) -> Result<Vec<f64>> {
    let n = phi.num_spins();
    let jy = dicke::collective(n, Axis::Y);
    let rotated = linalg::mat_vec(&linalg::expm_hermitian(&jy, -FRAC_PI_2)?, phi.amplitudes());
    Ok(rotated.iter().map(|a| a.norm_sqr()).collect())
}

/// Spin-length deficit `[(N/2)(N/2+1) − ⟨S²⟩]/(N+1)`.
pub fn nfm_estimate<S: CollectiveState + ?Sized>(state: &S) -> f64 {
    nfm_from_s2(state.num_spins(), SpinMoments::of(state).total_spin_squared())
}

pub fn nfm_from_s2(n: usize, s2: f64) -> f64 {
    let j = n as f64 / 2.0;
    (j * (j + 1.0) - s2) / (n as f64 + 1.0)
}

/// One stroboscopic sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableRecord {
    pub t: f64,
    pub fq_sx: f64,
    pub fq_opt: f64,
    pub sx: f64,
    pub sz: f64,
    pub s2: f64,
    pub nfm: f64,
}

impl ObservableRecord {
    pub fn measure<S: CollectiveState + ?Sized>(t: f64, state: &S) -> Self {
        let m = SpinMoments::of(state);
        let s2 = m.total_spin_squared();
        Self {
            t,
            fq_sx: m.qfi([1.0, 0.0, 0.0]),
            fq_opt: optimal_from_matrix(&m.qfi_matrix()).value,
            sx: m.mean[0],
            sz: m.mean[2],
            s2,
            nfm: nfm_from_s2(state.num_spins(), s2),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservableSeries {
    pub records: Vec<ObservableRecord>,
}

impl ObservableSeries {
    pub fn push(&mut self, record: ObservableRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if !(record.t > last.t) {
                return Err(invalid(format!(
                    "time grid must increase: {} after {}",
                    record.t, last.t
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn fq_sx(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.fq_sx).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["t", "FQ_Sx", "FQ_opt", "Sx", "Sz", "S2", "NFM"])?;
        for r in &self.records {
            csv.write_record([r.t, r.fq_sx, r.fq_opt, r.sx, r.sz, r.s2, r.nfm].map(|v| format!("{v:.12e}")))?;
        }
        csv.flush()?;
        Ok(())
    }
}

pub fn write_distribution_csv<W: Write>(p: &[f64], w: W) -> Result<()> {
    let n = p.len() - 1;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["m", "P"])?;
    for (i, v) in p.iter().enumerate() {
        let m = i as f64 - n as f64 / 2.0;
        csv.write_record([format!("{m}"), format!("{v:.12e}")])?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::dense;
    use proptest::prelude::*;

    const X: [f64; 3] = [1.0, 0.0, 0.0];

    #[test]
    fn css_values() {
        for n in 1..9 {
            let css = PureState::initial_css(n).unwrap();
            let m = SpinMoments::of(&css);
            assert!((m.mean[2] - n as f64 / 2.0).abs() < 1e-12);
            assert!((qfi_pure(&css, X).unwrap() - n as f64).abs() < 1e-12);
            assert!(qfi_pure(&css, [0.0, 0.0, 1.0]).unwrap().abs() < 1e-12);
            assert!(nfm_estimate(&css).abs() < 1e-12);
            let opt = qfi_matrix_optimal(&css);
            assert!((opt.value - n as f64).abs() < 1e-10);
            assert!((opt.direction[0] - 1.0).abs() < 1e-8, "{:?}", opt.direction);
        }
        assert!(qfi_pure(&PureState::initial_css(2).unwrap(), [0.0; 3]).is_err());
    }

    #[test]
    fn ghz_heisenberg_limit() {
        for n in [3, 6, 10] {
            let g = PureState::ghz_x(n).unwrap();
            assert!((qfi_pure(&g, X).unwrap() - (n * n) as f64).abs() < 1e-9);
            let opt = qfi_matrix_optimal(&g);
            assert!((opt.value - (n * n) as f64).abs() < 1e-9);
            assert!((opt.direction[0] - 1.0).abs() < 1e-9);
            let d = DickeState::ghz_x(n).unwrap();
            assert!((qfi_pure(&d, X).unwrap() - (n * n) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn ghz_parity_fringes() {
        let n = 7;
        let g = PureState::ghz_x(n).unwrap();
        let d = DickeState::ghz_x(n).unwrap();
        for i in 0..16 {
            let theta = 0.1 * i as f64;
            let expected = (n as f64 * theta).cos();
            assert!((parity_expectation(&g, theta) - expected).abs() < 1e-10);
            assert!((parity_expectation_dicke(&d, theta).unwrap() - expected).abs() < 1e-10);
        }
        assert!((parity_expectation(&PureState::initial_css(5).unwrap(), 0.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn parity_of_product_state_matches_dense() {
        let angles = [(0.4, 0.2), (1.9, -1.0), (2.5, 0.7), (1.1, 3.0)];
        let psi = PureState::product_sites(4, &angles).unwrap();
        let sx = dense::collective(4, Axis::X).unwrap();
        let mut parity = crate::linalg::identity(16);
        for b in 0..16usize {
            if b.count_ones() % 2 == 1 {
                parity[(b, b)] = C64::new(-1.0, 0.0);
            }
        }
        for theta in [0.0, 0.3, 1.7] {
            let u = crate::linalg::expm_hermitian(&sx, -theta).unwrap();
            let op = u.adjoint() * &parity * &u;
            let v = crate::linalg::mat_vec(&op, psi.amplitudes());
            let oracle: C64 = psi.amplitudes().iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            assert!(oracle.im.abs() < 1e-12);
            assert!((parity_expectation(&psi, theta) - oracle.re).abs() < 1e-12);
        }
    }

    #[test]
    fn distributions() {
        let n = 6;
        let css = PureState::initial_css(n).unwrap();
        let p = sx_distribution(&css);
        for (i, v) in p.iter().enumerate() {
            let k = n - i;
            assert!((v - dicke::binomial(n, k) / 64.0).abs() < 1e-12);
        }
        let css_x = PureState::product(n, FRAC_PI_2, 0.0).unwrap();
        let p = sx_distribution(&css_x);
        assert!((p[n] - 1.0).abs() < 1e-12);
        let g = sx_distribution(&PureState::ghz_x(n).unwrap());
        assert!((g[0] - 0.5).abs() < 1e-12 && (g[n] - 0.5).abs() < 1e-12);
        assert!(g[1..n].iter().all(|v| v.abs() < 1e-12));
        let gd = sx_distribution_dicke(&DickeState::ghz_x(n).unwrap()).unwrap();
        for (a, b) in g.iter().zip(&gd) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn nfm_of_single_flip() {
        // One spin flipped in a 4-spin CSS; ⟨S²⟩ from the dense operator.
        let mut amps = vec![C64::new(0.0, 0.0); 16];
        amps[1] = C64::new(1.0, 0.0);
        let psi = PureState::from_amplitudes(4, amps).unwrap();
        let s2 = dense::total_spin_squared(4).unwrap();
        let v = crate::linalg::mat_vec(&s2, psi.amplitudes());
        let s2_val: f64 = psi.amplitudes().iter().zip(&v).map(|(a, b)| (a.conj() * b).re).sum();
        let oracle = (6.0 - s2_val) / 5.0;
        assert!((nfm_estimate(&psi) - oracle).abs() < 1e-12);
        assert!((oracle - 0.6).abs() < 1e-12);
    }

    #[test]
    fn series_csv_and_ordering() {
        let mut s = ObservableSeries::default();
        let css = PureState::initial_css(3).unwrap();
        s.push(ObservableRecord::measure(0.0, &css)).unwrap();
        s.push(ObservableRecord::measure(0.3, &css)).unwrap();
        assert!(s.push(ObservableRecord::measure(0.3, &css)).is_err());
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("t,FQ_Sx,FQ_opt,Sx,Sz,S2,NFM\n"));
        assert_eq!(text.lines().count(), 3);
        let mut out = Vec::new();
        write_distribution_csv(&[0.25, 0.5, 0.25], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().nth(1).unwrap().split(',').next(), Some("-1"));
    }

    fn random_state(n: usize, seed: &[f64]) -> PureState {
        let amps = (0..1 << n)
            .map(|i| C64::new(seed[(2 * i) % seed.len()] - 0.5, seed[(2 * i + 1) % seed.len()] - 0.5))
            .collect();
        PureState::from_amplitudes(n, amps).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn optimal_qfi_dominates(seed in proptest::collection::vec(0.0f64..1.0, 16), dirs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 100)) {
            let psi = random_state(3, &seed);
            let opt = qfi_matrix_optimal(&psi);
            let m = SpinMoments::of(&psi);
            prop_assert!(opt.value + 1e-10 >= m.qfi(X));
            let dir_norm: f64 = opt.direction.iter().map(|c| c * c).sum::<f64>();
            prop_assert!((dir_norm - 1.0).abs() < 1e-10);
            for (a, b, c) in dirs {
                if let Ok(v) = qfi_pure(&psi, [a, b, c]) {
                    prop_assert!(opt.value + 1e-10 >= v);
                }
            }
        }

        #[test]
        fn distributions_normalize(seed in proptest::collection::vec(0.0f64..1.0, 32), theta in 0.0f64..6.3) {
            let psi = random_state(4, &seed);
            let p = sx_distribution(&psi);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(parity_expectation(&psi, theta).abs() <= 1.0 + 1e-12);
        }
    }
}
