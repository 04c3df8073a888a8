use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::lattice::CouplingMatrix;
use crate::spin::Axis;

/// Classical spin configurations, stored as `[trajectory][component][site]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryEnsemble {
    pub(crate) n: usize,
    pub(crate) n_traj: usize,
    pub(crate) seed: u64,
    pub(crate) period: u64,
    pub(crate) spins: Vec<f64>,
}

/// Random stream for trajectory `index` under master seed `seed`.
pub fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

impl TrajectoryEnsemble {
    /// Discrete phase-space samples of `|↑⟩^⊗N`: `s^z = 1/2`, `s^x, s^y = ±1/2`.
    pub fn sample_initial(n: usize, n_traj: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("N must be positive"));
        }
        if n_traj == 0 {
            return Err(invalid("n_traj must be at least 1"));
        }
        let mut spins = vec![0.0; n_traj * 3 * n];
        spins.par_chunks_mut(3 * n).enumerate().for_each(|(i, traj)| {
            let mut rng = trajectory_rng(seed, i);
            let (x, rest) = traj.split_at_mut(n);
            let (y, z) = rest.split_at_mut(n);
            for j in 0..n {
                x[j] = if rng.random::<bool>() { 0.5 } else { -0.5 };
                y[j] = if rng.random::<bool>() { 0.5 } else { -0.5 };
                z[j] = 0.5;
            }
        });
        Ok(Self {
            n,
            n_traj,
            seed,
            period: 0,
            spins,
        })
    }

    pub fn num_spins(&self) -> usize {
        self.n
    }

    pub fn num_trajectories(&self) -> usize {
        self.n_traj
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Completed Floquet periods.
    pub fn period_index(&self) -> u64 {
        self.period
    }

    /// The `3N` values of trajectory `i`: all `x`, then all `y`, then all `z`.
    pub fn trajectory(&self, i: usize) -> &[f64] {
        &self.spins[i * 3 * self.n..(i + 1) * 3 * self.n]
    }

    pub fn spin(&self, traj: usize, site: usize) -> [f64; 3] {
        let t = self.trajectory(traj);
        [t[site], t[self.n + site], t[2 * self.n + site]]
    }

    /// Total spin vector of every trajectory, in index order.
    pub fn collective(&self) -> Vec<[f64; 3]> {
        let n = self.n;
        self.spins
            .par_chunks(3 * n)
            .map(|t| {
                [
                    t[..n].iter().sum(),
                    t[n..2 * n].iter().sum(),
                    t[2 * n..].iter().sum(),
                ]
            })
            .collect()
    }

    fn check(&self, c: &CouplingMatrix) -> Result<()> {
        if c.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: c.n(),
            });
        }
        Ok(())
    }

    /// Exact classical evolution under `H_μμ` for a time `τ`.
    pub fn segment_step(&mut self, axis: Axis, tau: f64, c: &CouplingMatrix) -> Result<()> {
        self.check(c)?;
        if tau == 0.0 {
            return Ok(());
        }
        let n = self.n;
        self.spins.par_chunks_mut(3 * n).for_each_init(
            || vec![0.0; n],
            |field, traj| rotate_segment(traj, n, axis, tau, c, field),
        );
        Ok(())
    }

    /// One period: `yy`, then `xx`, then `zz`.
    pub fn period_step(&mut self, tau: f64, c: &CouplingMatrix) -> Result<()> {
        self.check(c)?;
        let n = self.n;
        self.spins.par_chunks_mut(3 * n).for_each_init(
            || vec![0.0; n],
            |field, traj| {
                for axis in [Axis::Y, Axis::X, Axis::Z] {
                    rotate_segment(traj, n, axis, tau, c, field);
                }
            },
        );
        self.period += 1;
        Ok(())
    }
}

/// Rotates every spin about `axis` by `Ω_j τ`, `Ω_j = 2 Σ_k K_jk s_k^μ`, following
/// `ds/dt = Ω × s`.
pub(crate) fn rotate_segment(traj: &mut [f64], n: usize, axis: Axis, tau: f64, c: &CouplingMatrix, field: &mut [f64]) {
    let mu = axis.index();
    {
        let s_mu = &traj[mu * n..(mu + 1) * n];
        for (j, f) in field.iter_mut().enumerate() {
            let row = c.row(j);
            let mut acc = 0.0;
            for k in 0..n {
                acc += row[k] * s_mu[k];
            }
            *f = 2.0 * acc;
        }
    }
    let (a, b) = axis.transverse();
    for j in 0..n {
        let (sin, cos) = (field[j] * tau).sin_cos();
        let sa = traj[a * n + j];
        let sb = traj[b * n + j];
        traj[a * n + j] = cos * sa - sin * sb;
        traj[b * n + j] = sin * sa + cos * sb;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_coupling_matrix, Boundary, LatticeSpec, ModelParams};

    fn chain(n: usize, alpha: f64) -> CouplingMatrix {
        build_coupling_matrix(&LatticeSpec::chain(n, Boundary::Open).unwrap(), &ModelParams::unit(alpha).unwrap()).unwrap()
    }

    #[test]
    fn initial_samples() {
        let e = TrajectoryEnsemble::sample_initial(7, 50, 11).unwrap();
        for s in e.collective() {
            assert_eq!(s[2], 3.5);
        }
        for i in 0..50 {
            for j in 0..7 {
                let [x, y, z] = e.spin(i, j);
                assert!(x.abs() == 0.5 && y.abs() == 0.5 && z == 0.5);
            }
        }
        assert!(TrajectoryEnsemble::sample_initial(3, 0, 1).is_err());
    }

    #[test]
    fn trajectories_depend_only_on_seed_and_index() {
        let a = TrajectoryEnsemble::sample_initial(9, 40, 5).unwrap();
        let b = TrajectoryEnsemble::sample_initial(9, 10, 5).unwrap();
        for i in 0..10 {
            assert_eq!(a.trajectory(i), b.trajectory(i));
        }
        let c = TrajectoryEnsemble::sample_initial(9, 10, 6).unwrap();
        assert!((0..10).any(|i| a.trajectory(i) != c.trajectory(i)));
    }

    #[test]
    fn two_spin_precession() {
        let c = chain(2, 1.0);
        let mut e = TrajectoryEnsemble::sample_initial(2, 1, 0).unwrap();
        let before = [e.spin(0, 0), e.spin(0, 1)];
        let tau = 0.4;
        e.segment_step(Axis::Z, tau, &c).unwrap();
        for j in 0..2 {
            let [x0, y0, z0] = before[j];
            let [x, y, z] = e.spin(0, j);
            assert_eq!(z, z0);
            // Field 2·K·(1/2) = 1, so the angle is τ.
            assert!((x - (tau.cos() * x0 - tau.sin() * y0)).abs() < 1e-15);
            assert!((y - (tau.sin() * x0 + tau.cos() * y0)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_tau_and_mismatch() {
        let c = chain(4, 1.0);
        let mut e = TrajectoryEnsemble::sample_initial(4, 3, 2).unwrap();
        let before = e.clone();
        e.segment_step(Axis::X, 0.0, &c).unwrap();
        e.period_step(0.0, &c).unwrap();
        assert_eq!(e.spins, before.spins);
        assert!(e.segment_step(Axis::X, 0.1, &chain(5, 1.0)).is_err());
    }

    /// RK4 on `ds_j/dt = Ω_j ẑ × s_j` with frozen fields.
    fn rk4_z_segment(spins: &[[f64; 3]], c: &CouplingMatrix, tau: f64, steps: usize) -> Vec<[f64; 3]> {
        let n = spins.len();
        let omega: Vec<f64> = (0..n).map(|j| 2.0 * (0..n).map(|k| c.get(j, k) * spins[k][2]).sum::<f64>()).collect();
        let rhs = |s: &[[f64; 3]]| -> Vec<[f64; 3]> {
            s.iter().zip(&omega).map(|(v, w)| [-w * v[1], w * v[0], 0.0]).collect()
        };
        let h = tau / steps as f64;
        let mut s = spins.to_vec();
        for _ in 0..steps {
            let add = |a: &[[f64; 3]], k: &[[f64; 3]], f: f64| -> Vec<[f64; 3]> {
                a.iter().zip(k).map(|(x, d)| [x[0] + f * d[0], x[1] + f * d[1], x[2] + f * d[2]]).collect()
            };
            let k1 = rhs(&s);
            let k2 = rhs(&add(&s, &k1, h / 2.0));
            let k3 = rhs(&add(&s, &k2, h / 2.0));
            let k4 = rhs(&add(&s, &k3, h));
            for j in 0..n {
                for m in 0..3 {
                    s[j][m] += h / 6.0 * (k1[j][m] + 2.0 * k2[j][m] + 2.0 * k3[j][m] + k4[j][m]);
                }
            }
        }
        s
    }

    #[test]
    fn segment_is_exact_solution_of_equations_of_motion() {
        let c = chain(6, 1.0);
        let mut e = TrajectoryEnsemble::sample_initial(6, 1, 3).unwrap();
        // Tilt away from the initial z polarization so the z-segment is non-trivial.
        e.segment_step(Axis::X, 0.7, &c).unwrap();
        let start: Vec<[f64; 3]> = (0..6).map(|j| e.spin(0, j)).collect();
        let tau = 0.5;
        e.segment_step(Axis::Z, tau, &c).unwrap();
        let oracle = rk4_z_segment(&start, &c, tau, 10_000);
        for j in 0..6 {
            for m in 0..3 {
                assert!((e.spin(0, j)[m] - oracle[j][m]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn norms_survive_many_periods() {
        let c = chain(8, 1.2);
        let mut e = TrajectoryEnsemble::sample_initial(8, 4, 9).unwrap();
        for _ in 0..1000 {
            e.period_step(0.13, &c).unwrap();
        }
        assert_eq!(e.period_index(), 1000);
        for i in 0..4 {
            for j in 0..8 {
                let s = e.spin(i, j);
                let norm = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
                assert!((norm - 3f64.sqrt() / 2.0).abs() < 1e-9);
            }
        }
    }
}
