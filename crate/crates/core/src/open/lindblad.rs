use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::{collective_on_bits, symmetrize, DensityMatrix, NoiseKind, NoiseSpec, PhysicalUnits, PAR_LEN};
use super::integrator::{Dopri5, StepControl, StepStats};
use crate::error::{Error, Result};
use crate::exact::state::apply_collective;
use crate::exact::{IsingEnergies, PureState};
use crate::lattice::CouplingMatrix;
use crate::linalg::{self, CMat};
use crate::spin::{self, Axis};

/// Axis of the dephasing operators during the free segments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFrame {
    /// Lab-frame `z` in all three segments; pulses are noiseless.
    #[default]
    Lab,
    /// `z` of the toggling frame: the operators follow each effective `H_μμ`
    /// segment instead of staying fixed in the lab.
    Segment,
}

/// Liouvillian of one free-evolution segment: a z-diagonal Hamiltonian plus
/// dephasing along `noise_axis` of the same frame.
pub struct SegmentGenerator<'a> {
    n: usize,
    energies: &'a IsingEnergies,
    noise: NoiseSpec,
    noise_axis: Axis,
    /// Elementwise rates when the generator is diagonal in the z basis.
    diagonal: Option<Vec<C64>>,
}

impl<'a> SegmentGenerator<'a> {
    pub fn new(energies: &'a IsingEnergies, noise: NoiseSpec, noise_axis: Axis) -> Self {
        let n = energies.num_spins();
        let diagonal = (noise_axis == Axis::Z || noise.rate == 0.0).then(|| {
            let dim = 1usize << n;
            let e: Vec<f64> = (0..dim).map(|b| energies.energy(b)).collect();
            let m: Vec<f64> = (0..dim).map(|b| spin::total_sz(b, n)).collect();
            let mut rates = vec![C64::new(0.0, 0.0); dim * dim];
            rates.par_chunks_mut(dim).enumerate().for_each(|(r, row)| {
                for (c, x) in row.iter_mut().enumerate() {
                    let decay = match noise.kind {
                        NoiseKind::Local => 0.5 * noise.rate * (r ^ c).count_ones() as f64,
                        NoiseKind::Global => 0.5 * noise.rate * (m[r] - m[c]).powi(2),
                    };
                    *x = C64::new(-decay, -(e[r] - e[c]));
                }
            });
            rates
        });
        Self {
            n,
            energies,
            noise,
            noise_axis,
            diagonal,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal.is_some()
    }

    /// `out = L(ρ)`.
    pub fn apply(&self, rho: &[C64], out: &mut [C64]) {
        if let Some(rates) = &self.diagonal {
            let k = |((o, r), x): ((&mut C64, &C64), &C64)| *o = r * x;
            if rho.len() >= PAR_LEN {
                out.par_iter_mut().zip(rates.par_iter()).zip(rho.par_iter()).for_each(k);
            } else {
                out.iter_mut().zip(rates.iter()).zip(rho.iter()).for_each(k);
            }
            return;
        }
        let n = self.n;
        let dim = 1usize << n;
        let e = self.energies;
        out.par_chunks_mut(dim).enumerate().for_each(|(r, row)| {
            let er = e.energy(r);
            for (c, o) in row.iter_mut().enumerate() {
                *o = C64::new(0.0, -(er - e.energy(c))) * rho[r * dim + c];
            }
        });
        let a = self.noise_axis;
        let rate = self.noise.rate;
        match self.noise.kind {
            NoiseKind::Local => {
                // (γ/4) Σ_j (σ_j^a ρ σ_j^a − ρ); for a = y the sandwich picks up (−1)^{r_j ⊕ c_j}.
                let add = |(idx, o): (usize, &mut C64)| {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..n {
                        let flip = (1usize << (n + j)) | (1 << j);
                        let mut v = rho[idx ^ flip];
                        if a == Axis::Y && (((idx >> (n + j)) ^ (idx >> j)) & 1) == 1 {
                            v = -v;
                        }
                        acc += v - rho[idx];
                    }
                    *o += acc * (0.25 * rate);
                };
                out.par_iter_mut().enumerate().for_each(add);
            }
            NoiseKind::Global => {
                // Γ (SρS − ½ S²ρ − ½ ρS²).
                let left = collective_on_bits(rho, n, n, a, false);
                let both = collective_on_bits(&left, n, 0, a, true);
                let left2 = collective_on_bits(&left, n, n, a, false);
                let right = collective_on_bits(rho, n, 0, a, true);
                let right2 = collective_on_bits(&right, n, 0, a, true);
                out.par_iter_mut().enumerate().for_each(|(i, o)| {
                    *o += (both[i] - (left2[i] + right2[i]) * 0.5) * rate;
                });
            }
        }
    }
}

/// Evolves `ρ` for `duration` under `generator`, re-symmetrizing after every step.
pub fn lindblad_segment(
    rho: &mut DensityMatrix,
    generator: &SegmentGenerator<'_>,
    duration: f64,
    solver: &mut Dopri5,
) -> Result<StepStats> {
    if rho.num_spins() != generator.n {
        return Err(Error::DimensionMismatch {
            expected: generator.n,
            got: rho.num_spins(),
        });
    }
    let dim = rho.dim();
    let before = rho.trace().re;
    let stats = solver.integrate(rho.data_mut(), duration, |y, out| generator.apply(y, out), |y| symmetrize(y, dim))?;
    let drift = (rho.trace().re - before).abs();
    if drift > 1e-8 {
        return Err(Error::Integration(format!("trace drifted by {drift:e} in one segment")));
    }
    Ok(stats)
}

/// Reusable state for many open-system periods at fixed noise.
pub struct OpenEvolution<'a> {
    lab: SegmentGenerator<'a>,
    toggled: Option<[SegmentGenerator<'a>; 2]>,
    solver: Dopri5,
    tau: f64,
}

impl<'a> OpenEvolution<'a> {
    pub fn new(energies: &'a IsingEnergies, noise: NoiseSpec, frame: NoiseFrame, tau: f64, control: StepControl) -> Self {
        let n = energies.num_spins();
        let toggled = (frame == NoiseFrame::Segment && noise.rate > 0.0).then(|| {
            [
                SegmentGenerator::new(energies, noise, Axis::Y),
                SegmentGenerator::new(energies, noise, Axis::X),
            ]
        });
        Self {
            lab: SegmentGenerator::new(energies, noise, Axis::Z),
            toggled,
            solver: Dopri5::new(1 << (2 * n), control),
            tau,
        }
    }

    /// One period: `e^{iπ/2 S_x}`, segment, `e^{−iπ/2 S_x}`, `e^{iπ/2 S_y}`,
    /// segment, `e^{−iπ/2 S_y}`, segment (rightmost first).
    pub fn pulsed_period(&mut self, rho: &mut DensityMatrix) -> Result<StepStats> {
        let mut total = StepStats::default();
        let mut add = |s: StepStats| {
            total.accepted += s.accepted;
            total.rejected += s.rejected;
        };
        let tau = self.tau;
        // With the toggling-frame option the z noise of the yy segment appears
        // along y once the segment is rotated to zz, and along x for xx.
        let (first, second) = match &self.toggled {
            None => (&self.lab, &self.lab),
            Some([gen_y, gen_x]) => (gen_y, gen_x),
        };
        rho.rotate(Axis::X, -FRAC_PI_2);
        add(lindblad_segment(rho, first, tau, &mut self.solver)?);
        rho.rotate(Axis::X, FRAC_PI_2);
        rho.rotate(Axis::Y, -FRAC_PI_2);
        add(lindblad_segment(rho, second, tau, &mut self.solver)?);
        rho.rotate(Axis::Y, FRAC_PI_2);
        add(lindblad_segment(rho, &self.lab, tau, &mut self.solver)?);
        Ok(total)
    }
}

/// Convenience wrapper for a single period.
pub fn pulsed_period_open(
    rho: &mut DensityMatrix,
    tau: f64,
    energies: &IsingEnergies,
    noise: NoiseSpec,
    frame: NoiseFrame,
) -> Result<StepStats> {
    OpenEvolution::new(energies, noise, frame, tau, StepControl::default()).pulsed_period(rho)
}

/// Mixed-state QFI for the generator `n·S` from the spectral decomposition of `ρ`.
///
/// Eigenvalues in `[−1e−8, 0)` are clamped to zero; anything more negative is
/// rejected. Pairs with `q_k + q_l ≤ 1e−12` are skipped.
pub fn qfi_mixed(rho: &DensityMatrix, direction: [f64; 3]) -> Result<f64> {
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(crate::error::invalid("QFI direction must be non-zero"));
    }
    let dir = direction.map(|x| x / norm);
    let n = rho.num_spins();
    let dim = rho.dim();
    let eig = linalg::hermitian_eigen(&rho.to_mat())?;
    let min = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -NEGATIVE_TOLERANCE {
        return Err(Error::NonPhysical(format!(
            "density matrix eigenvalue {min:e} below -{NEGATIVE_TOLERANCE:e} (trace {:.3e}, hermiticity error {:.3e})",
            rho.trace().re,
            rho.hermiticity_error()
        )));
    }
    let q: Vec<f64> = eig.values.iter().map(|&x| x.max(0.0)).collect();
    let v = &eig.vectors;
    let columns: Vec<Vec<C64>> = (0..dim)
        .into_par_iter()
        .map(|k| {
            let col: Vec<C64> = (0..dim).map(|i| v[(i, k)]).collect();
            let mut out = vec![C64::new(0.0, 0.0); dim];
            for axis in Axis::ALL {
                let w = dir[axis.index()];
                if w != 0.0 {
                    for (o, x) in out.iter_mut().zip(apply_collective(&col, n, axis)) {
                        *o += x * w;
                    }
                }
            }
            out
        })
        .collect();
    let w = CMat::from_fn(dim, dim, |i, k| columns[k][i]);
    let m = v.adjoint() * &w;
    let total: f64 = (0..dim)
        .into_par_iter()
        .map(|k| {
            let mut acc = 0.0;
            for l in 0..dim {
                let s = q[k] + q[l];
                if s > EIGEN_CUTOFF {
                    let d = q[k] - q[l];
                    acc += d * d / s * m[(l, k)].norm_sqr();
                }
            }
            acc
        })
        .sum();
    Ok(2.0 * total)
}

const EIGEN_CUTOFF: f64 = 1e-12;
const NEGATIVE_TOLERANCE: f64 = 1e-8;

/// `Tr[Π e^{iθS_x} ρ e^{−iθS_x}]` with `Π = ∏σ_j^z`.
pub fn parity_expectation_mixed(rho: &DensityMatrix, theta: f64) -> f64 {
    let mut r = rho.clone();
    r.rotate(Axis::X, -theta);
    let dim = r.dim();
    (0..dim)
        .map(|b| {
            let p = r.get(b, b).re;
            if b.count_ones() % 2 == 0 {
                p
            } else {
                -p
            }
        })
        .sum()
}

pub fn parity_scan(rho: &DensityMatrix, thetas: &[f64]) -> Vec<f64> {
    thetas.iter().map(|&t| parity_expectation_mixed(rho, t)).collect()
}

/// Half the peak-to-peak swing of a parity scan.
pub fn parity_contrast(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if values.is_empty() {
        0.0
    } else {
        0.5 * (max - min)
    }
}

/// Stroboscopic open-system run starting from the z-polarized CSS.
#[derive(Clone, Debug)]
pub struct OpenRunConfig {
    pub units: PhysicalUnits,
    pub noise: NoiseSpec,
    pub frame: NoiseFrame,
    pub n_periods: usize,
    /// Periods (inclusive range) at which the QFI is evaluated; all when `None`.
    pub qfi_window: Option<(usize, usize)>,
    pub direction: [f64; 3],
    pub control: StepControl,
    /// Stop once `F_Q` falls below this share of its running maximum.
    pub stop_fraction: Option<f64>,
}

impl OpenRunConfig {
    pub fn new(units: PhysicalUnits, noise: NoiseSpec, n_periods: usize) -> Self {
        Self {
            units,
            noise,
            frame: NoiseFrame::Lab,
            n_periods,
            qfi_window: None,
            direction: [1.0, 0.0, 0.0],
            control: StepControl::default(),
            stop_fraction: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OpenRun {
    /// Times in seconds at which the QFI was evaluated.
    pub times_s: Vec<f64>,
    pub fq: Vec<f64>,
    pub max_fq: f64,
    pub t_at_max_s: f64,
    pub rho_at_max: DensityMatrix,
    pub stats: StepStats,
    /// Periods actually evolved; fewer than requested after an early stop.
    pub periods_run: usize,
}

/// Couplings with `K` in Hz, so that segment durations are in seconds.
pub fn physical_couplings(spec: &crate::lattice::LatticeSpec, units: &PhysicalUnits, alpha: f64) -> Result<CouplingMatrix> {
    crate::lattice::build_coupling_matrix(spec, &crate::lattice::ModelParams::new(units.k_hz, alpha)?)
}

pub fn run_open(c: &CouplingMatrix, cfg: &OpenRunConfig) -> Result<OpenRun> {
    let n = c.n();
    let mut rho = DensityMatrix::from_pure(&PureState::initial_css(n)?)?;
    let energies = IsingEnergies::new(c);
    let tau = cfg.units.tau_s;
    let mut evo = OpenEvolution::new(&energies, cfg.noise, cfg.frame, tau, cfg.control);
    let (lo, hi) = cfg.qfi_window.unwrap_or((0, cfg.n_periods));
    let mut run = OpenRun {
        times_s: Vec::new(),
        fq: Vec::new(),
        max_fq: f64::NEG_INFINITY,
        t_at_max_s: 0.0,
        rho_at_max: rho.clone(),
        stats: StepStats::default(),
        periods_run: 0,
    };
    for p in 0..=cfg.n_periods {
        if p > 0 {
            let s = evo.pulsed_period(&mut rho)?;
            run.stats.accepted += s.accepted;
            run.stats.rejected += s.rejected;
        }
        if (lo..=hi).contains(&p) {
            let t = 3.0 * tau * p as f64;
            let f = qfi_mixed(&rho, cfg.direction)?;
            run.times_s.push(t);
            run.fq.push(f);
            if f > run.max_fq {
                run.max_fq = f;
                run.t_at_max_s = t;
                run.rho_at_max = rho.clone();
            }
        }
        run.periods_run = p;
        if cfg.stop_fraction.is_some_and(|frac| run.fq.last().is_some_and(|&f| f < frac * run.max_fq)) {
            break;
        }
    }
    if run.fq.is_empty() {
        return Err(crate::error::invalid("QFI window contains no periods"));
    }
    Ok(run)
}

/// One row of a decoherence-rate sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub rate_hz: f64,
    pub kind: NoiseKind,
    #[serde(rename = "max_FQ")]
    pub max_fq: f64,
    pub t_at_max_s: f64,
}

pub fn write_rate_csv<W: Write>(rows: &[RateRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rate_hz", "kind", "max_FQ", "t_at_max_s"])?;
    for r in rows {
        out.write_record([r.rate_hz.to_string(), r.kind.to_string(), r.max_fq.to_string(), r.t_at_max_s.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_parity_csv<W: Write>(thetas: &[f64], parity: &[f64], w: W) -> Result<()> {
    if thetas.len() != parity.len() {
        return Err(Error::DimensionMismatch {
            expected: thetas.len(),
            got: parity.len(),
        });
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["theta", "parity"])?;
    for (t, p) in thetas.iter().zip(parity) {
        out.write_record([t.to_string(), p.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::dense;
    use crate::exact::{floquet_period, qfi_pure, PeriodForm};
    use crate::lattice::{build_coupling_matrix, Boundary, LatticeSpec, ModelParams};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn couplings(n: usize, k: f64) -> CouplingMatrix {
        let spec = LatticeSpec::chain(n, Boundary::Open).unwrap();
        build_coupling_matrix(&spec, &ModelParams::new(k, 1.0).unwrap()).unwrap()
    }

    fn zero_couplings(n: usize) -> CouplingMatrix {
        CouplingMatrix::from_dense(n, vec![0.0; n * n], ModelParams::unit(0.0).unwrap(), Boundary::Open).unwrap()
    }

    fn random_rho(n: usize, seed: u64) -> DensityMatrix {
        let dim = 1usize << n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMat::from_fn(dim, dim, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &a * a.adjoint();
        let tr: C64 = (0..dim).map(|i| m[(i, i)]).sum();
        let data = (0..dim * dim).map(|f| m[(f / dim, f % dim)] / tr).collect();
        DensityMatrix::from_row_major(n, data).unwrap()
    }

    /// Dense `−i[H,ρ] + Σ (LρL† − ½{L†L,ρ})` with `H` the zz Ising matrix.
    fn dense_liouvillian(c: &CouplingMatrix, noise: NoiseSpec, axis: Axis, rho: &DensityMatrix) -> Vec<C64> {
        let n = c.n();
        let r = rho.to_mat();
        let h = dense::ising(c, Axis::Z).unwrap();
        let i = C64::new(0.0, 1.0);
        let mut out = (&h * &r - &r * &h) * faer::Scale(-i);
        let ops: Vec<(CMat, f64)> = match noise.kind {
            NoiseKind::Local => (0..n).map(|j| (dense::spin_product(n, &[(j, axis)]).unwrap(), noise.rate)).collect(),
            NoiseKind::Global => vec![(dense::collective(n, axis).unwrap(), noise.rate)],
        };
        for (l, g) in ops {
            let ll = l.adjoint() * &l;
            let d = &l * &r * l.adjoint() - (&ll * &r + &r * &ll) * faer::Scale(C64::new(0.5, 0.0));
            out += d * faer::Scale(C64::new(g, 0.0));
        }
        let dim = rho.dim();
        (0..dim * dim).map(|f| out[(f / dim, f % dim)]).collect()
    }

    #[test]
    fn generator_matches_dense_liouvillian() {
        let c = couplings(3, 1.3);
        let energies = IsingEnergies::new(&c);
        let rho = random_rho(3, 4);
        for kind in [NoiseKind::Local, NoiseKind::Global] {
            for axis in Axis::ALL {
                let noise = NoiseSpec::new(kind, 0.7).unwrap();
                let g = SegmentGenerator::new(&energies, noise, axis);
                assert_eq!(g.is_diagonal(), axis == Axis::Z);
                let mut out = vec![C64::new(0.0, 0.0); 64];
                g.apply(rho.as_slice(), &mut out);
                let expected = dense_liouvillian(&c, noise, axis, &rho);
                let err = out.iter().zip(&expected).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                assert!(err < 1e-13, "{kind} {axis:?}: {err}");
            }
        }
    }

    #[test]
    fn noiseless_periods_match_closed_evolution() {
        let c = couplings(4, 1.0);
        let energies = IsingEnergies::new(&c);
        let mut psi = PureState::product(4, 0.3, 0.2).unwrap();
        let start = DensityMatrix::from_pure(&psi).unwrap();
        let tau = 0.2;
        for frame in [NoiseFrame::Lab, NoiseFrame::Segment] {
            let mut rho = start.clone();
            let mut evo = OpenEvolution::new(&energies, NoiseSpec::none(), frame, tau, StepControl::default());
            let mut phi = psi.clone();
            for _ in 0..5 {
                evo.pulsed_period(&mut rho).unwrap();
                floquet_period(&mut phi, tau, PeriodForm::Pulsed, &energies).unwrap();
            }
            assert!((rho.fidelity(&phi).unwrap() - 1.0).abs() < 1e-8);
        }
        floquet_period(&mut psi, tau, PeriodForm::Segment, &energies).unwrap();
        let mut rho = start;
        pulsed_period_open(&mut rho, tau, &energies, NoiseSpec::none(), NoiseFrame::Lab).unwrap();
        assert!((rho.fidelity(&psi).unwrap() - 1.0).abs() < 1e-8);
    }

    fn ghz_z(n: usize) -> DensityMatrix {
        let dim = 1usize << n;
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[0] = C64::new(1.0, 0.0);
        amps[dim - 1] = C64::new(1.0, 0.0);
        DensityMatrix::from_pure(&PureState::from_amplitudes(n, amps).unwrap()).unwrap()
    }

    #[test]
    fn ghz_coherence_decay_laws() {
        let n = 4;
        let c = zero_couplings(n);
        let energies = IsingEnergies::new(&c);
        let rate = 2.0;
        for (kind, exponent) in [(NoiseKind::Local, rate * n as f64 / 2.0), (NoiseKind::Global, rate * (n * n) as f64 / 2.0)] {
            let noise = NoiseSpec::new(kind, rate).unwrap();
            let g = SegmentGenerator::new(&energies, noise, Axis::Z);
            let mut rho = ghz_z(n);
            let mut solver = Dopri5::new(1 << (2 * n), StepControl::default());
            let horizon = 5.0 / (rate * n as f64);
            let dt = horizon / 20.0;
            for step in 1..=20 {
                lindblad_segment(&mut rho, &g, dt, &mut solver).unwrap();
                let t = dt * step as f64;
                let got = rho.get(0, (1 << n) - 1).re;
                let expected = 0.5 * (-exponent * t).exp();
                assert!((got / expected - 1.0).abs() < 1e-6, "{kind} t={t}: {got} vs {expected}");
            }
            assert!((rho.trace().re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn qfi_reference_values() {
        for n in 2..=5 {
            let ghz = DensityMatrix::from_pure(&PureState::ghz_x(n).unwrap()).unwrap();
            assert!((qfi_mixed(&ghz, [1.0, 0.0, 0.0]).unwrap() - (n * n) as f64).abs() < 1e-8);
            let mixed = DensityMatrix::maximally_mixed(n).unwrap();
            assert!(qfi_mixed(&mixed, [0.3, 0.4, 0.5]).unwrap().abs() < 1e-12);
        }
        let psi = PureState::product_sites(3, &[(0.3, 0.1), (1.3, 2.0), (2.2, -0.6)]).unwrap();
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        for dir in [[1.0, 0.0, 0.0], [0.2, -0.7, 0.4]] {
            assert!((qfi_mixed(&rho, dir).unwrap() - qfi_pure(&psi, dir).unwrap()).abs() < 1e-8);
        }
        assert!(qfi_mixed(&rho, [0.0; 3]).is_err());
    }

    /// `F = Tr[ρ L²]` with `ρL + Lρ = −2i[G, ρ]`, solved as a dense linear system.
    fn sld_qfi(rho: &DensityMatrix, g: &CMat) -> f64 {
        let d = rho.dim();
        let r = DMatrix::from_fn(d, d, |i, j| rho.get(i, j));
        let gm = DMatrix::from_fn(d, d, |i, j| g[(i, j)]);
        let i = nalgebra::Complex::new(0.0, 1.0);
        let rhs = (&gm * &r - &r * &gm) * (-i * 2.0);
        // Column-stacked vec: vec(ρL + Lρ) = (I⊗ρ + ρᵀ⊗I) vec(L).
        let eye = DMatrix::<C64>::identity(d, d);
        let a = eye.kronecker(&r) + r.transpose().kronecker(&eye);
        let b = nalgebra::DVector::from_fn(d * d, |f, _| rhs[(f % d, f / d)]);
        let l = a.lu().solve(&b).unwrap();
        let lm = DMatrix::from_fn(d, d, |i, j| l[j * d + i]);
        (&r * &lm * &lm).trace().re
    }

    #[test]
    fn qfi_matches_sld_oracle() {
        for seed in 0..3 {
            let rho = random_rho(3, seed);
            let dir = [0.6, -0.3, 0.74];
            let mut g = CMat::zeros(8, 8);
            for axis in Axis::ALL {
                g += dense::collective(3, axis).unwrap() * faer::Scale(C64::new(dir[axis.index()], 0.0));
            }
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            let expected = sld_qfi(&rho, &g) / (norm * norm);
            let got = qfi_mixed(&rho, dir).unwrap();
            assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
        }
    }

    #[test]
    fn negative_eigenvalues_are_rejected() {
        let mut data = vec![C64::new(0.0, 0.0); 4];
        data[0] = C64::new(1.0 + 1e-6, 0.0);
        data[3] = C64::new(-1e-6, 0.0);
        let rho = DensityMatrix::from_row_major(1, data).unwrap();
        assert!(matches!(qfi_mixed(&rho, [1.0, 0.0, 0.0]), Err(Error::NonPhysical(_))));
        let mut data = vec![C64::new(0.0, 0.0); 4];
        data[0] = C64::new(1.0 + 1e-10, 0.0);
        data[3] = C64::new(-1e-10, 0.0);
        let rho = DensityMatrix::from_row_major(1, data).unwrap();
        assert!(qfi_mixed(&rho, [0.0, 0.0, 1.0]).unwrap().abs() < 1e-8);
    }

    #[test]
    fn parity_of_ghz() {
        let n = 5;
        let rho = DensityMatrix::from_pure(&PureState::ghz_x(n).unwrap()).unwrap();
        let thetas: Vec<f64> = (0..40).map(|i| i as f64 * 0.05).collect();
        let scan = parity_scan(&rho, &thetas);
        for (t, p) in thetas.iter().zip(&scan) {
            assert!((p - (n as f64 * t).cos()).abs() < 1e-12);
        }
        assert!((parity_contrast(&scan) - 1.0).abs() < 1e-2);
        let mut buf = Vec::new();
        write_parity_csv(&thetas, &scan, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("theta,parity\n"));
    }

    #[test]
    fn noise_lowers_the_peak() {
        let units = PhysicalUnits::new(560.0, 0.18e-3).unwrap();
        let spec = LatticeSpec::chain(4, Boundary::Open).unwrap();
        let c = physical_couplings(&spec, &units, 1.0).unwrap();
        let mut peaks = Vec::new();
        for rate in [0.0, 30.0] {
            let kind = NoiseKind::Local;
            let run = run_open(&c, &OpenRunConfig::new(units, NoiseSpec::new(kind, rate).unwrap(), 30)).unwrap();
            assert_eq!(run.fq.len(), 31);
            assert!((run.rho_at_max.trace().re - 1.0).abs() < 1e-8);
            peaks.push(RateRow {
                rate_hz: rate,
                kind,
                max_fq: run.max_fq,
                t_at_max_s: run.t_at_max_s,
            });
        }
        assert!(peaks[1].max_fq < peaks[0].max_fq);
        assert!(peaks[0].max_fq > 4.0);
        let mut buf = Vec::new();
        write_rate_csv(&peaks, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("rate_hz,kind,max_FQ,t_at_max_s\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn survey_tolerance_and_early_stop() {
        let units = PhysicalUnits::new(560.0, 0.18e-3).unwrap();
        let spec = LatticeSpec::chain(5, Boundary::Open).unwrap();
        let c = physical_couplings(&spec, &units, 1.0).unwrap();
        let noise = NoiseSpec::new(NoiseKind::Global, 30.0).unwrap();
        let tight = run_open(&c, &OpenRunConfig::new(units, noise, 40)).unwrap();
        let mut cfg = OpenRunConfig::new(units, noise, 40);
        cfg.control = StepControl::survey();
        cfg.stop_fraction = Some(0.5);
        let loose = run_open(&c, &cfg).unwrap();
        assert!(loose.stats.accepted < tight.stats.accepted);
        for (a, b) in loose.fq.iter().zip(&tight.fq) {
            assert!((a - b).abs() < 1e-6 * b, "{a} vs {b}");
        }
        assert_eq!(loose.fq.len(), loose.periods_run + 1);
        assert!(loose.periods_run < 40);
        assert!(*loose.fq.last().unwrap() < 0.5 * loose.max_fq);
        assert_eq!(tight.periods_run, 40);
    }
}
