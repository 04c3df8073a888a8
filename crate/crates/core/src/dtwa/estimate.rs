use std::io::Write;

use nalgebra::Matrix3;

use super::ensemble::TrajectoryEnsemble;
use crate::error::{invalid, Result};
use crate::exact::observables::{nfm_from_s2, optimal_from_matrix};
use crate::lattice::CouplingMatrix;

/// Sum of `f(0) + … + f(len−1)` by recursive halving over the index range.
///
/// The grouping depends only on `len`, so results are reproducible bit for bit.
pub fn pairwise_sum<const K: usize>(len: usize, f: &(impl Fn(usize) -> [f64; K] + Sync)) -> [f64; K] {
    fn go<const K: usize>(lo: usize, hi: usize, f: &(impl Fn(usize) -> [f64; K] + Sync)) -> [f64; K] {
        if hi - lo <= 16 {
            let mut acc = [0.0; K];
            for i in lo..hi {
                let v = f(i);
                for k in 0..K {
                    acc[k] += v[k];
                }
            }
            return acc;
        }
        let mid = lo + (hi - lo) / 2;
        let (a, b) = if hi - lo > 4096 {
            rayon::join(|| go(lo, mid, f), || go(mid, hi, f))
        } else {
            (go(lo, mid, f), go(mid, hi, f))
        };
        let mut out = a;
        for k in 0..K {
            out[k] += b[k];
        }
        out
    }
    go(0, len, f)
}

/// Ensemble averages of the collective spin at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleMoments {
    pub n_spins: usize,
    pub count: usize,
    pub mean: [f64; 3],
    /// `⟨S_i S_j⟩` over trajectories.
    pub second: [[f64; 3]; 3],
}

/// The nine sums `S_i` and `S_i S_j (i ≤ j)` used by the estimators.
fn raw(s: &[f64; 3]) -> [f64; 9] {
    [s[0], s[1], s[2], s[0] * s[0], s[0] * s[1], s[0] * s[2], s[1] * s[1], s[1] * s[2], s[2] * s[2]]
}

impl EnsembleMoments {
    fn from_sums(n_spins: usize, count: usize, sums: &[f64; 9]) -> Self {
        let c = count as f64;
        let mean = [sums[0] / c, sums[1] / c, sums[2] / c];
        let (xx, xy, xz, yy, yz, zz) = (sums[3] / c, sums[4] / c, sums[5] / c, sums[6] / c, sums[7] / c, sums[8] / c);
        Self {
            n_spins,
            count,
            mean,
            second: [[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]],
        }
    }

    pub fn from_samples(n_spins: usize, samples: &[[f64; 3]]) -> Self {
        let sums = pairwise_sum(samples.len(), &|i| raw(&samples[i]));
        Self::from_sums(n_spins, samples.len(), &sums)
    }

    pub fn of(ensemble: &TrajectoryEnsemble) -> Self {
        Self::from_samples(ensemble.num_spins(), &ensemble.collective())
    }

    pub fn fq_sx(&self) -> f64 {
        4.0 * (self.second[0][0] - self.mean[0] * self.mean[0])
    }

    /// `2⟨S_iS_j + S_jS_i⟩ − 4⟨S_i⟩⟨S_j⟩` with the classical symmetrized product.
    pub fn qfi_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| 4.0 * self.second[i][j] - 4.0 * self.mean[i] * self.mean[j])
    }

    pub fn fq_opt(&self) -> f64 {
        optimal_from_matrix(&self.qfi_matrix()).value
    }

    pub fn s2(&self) -> f64 {
        self.second[0][0] + self.second[1][1] + self.second[2][2]
    }

    pub fn nfm(&self) -> f64 {
        nfm_from_s2(self.n_spins, self.s2())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DtwaEstimate {
    pub t: f64,
    pub fq_sx: f64,
    pub fq_sx_err: f64,
    pub fq_opt: f64,
    pub fq_opt_err: f64,
    pub nfm: f64,
    pub nfm_err: f64,
    pub sx: f64,
    pub sz: f64,
}

/// Estimates with leave-one-out jackknife standard errors.
pub fn estimate_samples(t: f64, n_spins: usize, samples: &[[f64; 3]]) -> Result<DtwaEstimate> {
    let m = samples.len();
    if m < 2 {
        return Err(invalid(format!("need at least 2 trajectories, got {m}")));
    }
    let total = pairwise_sum(m, &|i| raw(&samples[i]));
    let full = EnsembleMoments::from_sums(n_spins, m, &total);
    let stats = |mm: &EnsembleMoments| [mm.fq_sx(), mm.fq_opt(), mm.nfm()];
    let leave_out: Vec<[f64; 3]> = (0..m)
        .map(|i| {
            let r = raw(&samples[i]);
            let mut s = total;
            for k in 0..9 {
                s[k] -= r[k];
            }
            stats(&EnsembleMoments::from_sums(n_spins, m - 1, &s))
        })
        .collect();
    let mean = pairwise_sum(m, &|i| leave_out[i]).map(|v| v / m as f64);
    let spread = pairwise_sum(m, &|i| {
        let d = leave_out[i];
        [(d[0] - mean[0]).powi(2), (d[1] - mean[1]).powi(2), (d[2] - mean[2]).powi(2)]
    });
    let scale = (m - 1) as f64 / m as f64;
    let err = spread.map(|v| (scale * v).sqrt());
    let [fq_sx, fq_opt, nfm] = stats(&full);
    Ok(DtwaEstimate {
        t,
        fq_sx,
        fq_sx_err: err[0],
        fq_opt,
        fq_opt_err: err[1],
        nfm,
        nfm_err: err[2],
        sx: full.mean[0],
        sz: full.mean[2],
    })
}

pub fn estimate_observables(t: f64, ensemble: &TrajectoryEnsemble) -> Result<DtwaEstimate> {
    estimate_samples(t, ensemble.num_spins(), &ensemble.collective())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DtwaSeries {
    pub records: Vec<DtwaEstimate>,
}

impl DtwaSeries {
    pub fn fq_sx(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.fq_sx).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["t", "FQ_Sx", "FQ_Sx_err", "FQ_opt", "NFM", "Sx", "Sz"])?;
        for r in &self.records {
            csv.write_record([r.t, r.fq_sx, r.fq_sx_err, r.fq_opt, r.nfm, r.sx, r.sz].map(|v| format!("{v:.12e}")))?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// Evolves `ensemble` for `n_periods` more periods, estimating after each one
/// (and once before the first if the ensemble is fresh).
pub fn run_series(ensemble: &mut TrajectoryEnsemble, tau: f64, n_periods: usize, c: &CouplingMatrix) -> Result<DtwaSeries> {
    let mut series = DtwaSeries::default();
    let period = 3.0 * tau;
    if ensemble.period_index() == 0 {
        series.records.push(estimate_observables(0.0, ensemble)?);
    }
    for _ in 0..n_periods {
        ensemble.period_step(tau, c)?;
        let t = ensemble.period_index() as f64 * period;
        series.records.push(estimate_observables(t, ensemble)?);
    }
    Ok(series)
}
