//! Linear spin-wave theory of the finite-momentum fluctuations, stability
//! bounds and the analytic scaling laws built on them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{structure_factors, t0_squared, Boundary, LatticeSpec, ModelParams, MomentumGrid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bogoliubov {
    pub u: f64,
    pub v: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinWaveMode {
    pub q: [f64; 2],
    pub index: [usize; 2],
    pub kq: f64,
    /// `(K₀ − K_q)/3`.
    pub aq: f64,
    /// `(K_q² − T₀²)/6`.
    pub bq: f64,
    pub tau: f64,
    /// `√|A² − τ²B²|`; a growth rate when `unstable`.
    pub epsilon: f64,
    pub unstable: bool,
    /// `None` for unstable modes.
    pub amplitudes: Option<Bogoliubov>,
}

impl SpinWaveMode {
    fn new(q: [f64; 2], index: [usize; 2], kq: f64, k0: f64, t0sq: f64, tau: f64) -> Result<Self> {
        let aq = (k0 - kq) / 3.0;
        let bq = (kq * kq - t0sq) / 6.0;
        if aq < -1e-12 * k0.abs().max(1.0) {
            return Err(invalid(format!("A_q = {aq} < 0 at q = {q:?}: K_0 is not the maximum of K_q")));
        }
        let aq = aq.max(0.0);
        let disc = aq * aq - tau * tau * bq * bq;
        let unstable = disc < 0.0;
        let epsilon = disc.abs().sqrt();
        let amplitudes = (!unstable && epsilon > 0.0).then(|| {
            let r = aq / epsilon;
            Bogoliubov {
                u: (0.5 * (r + 1.0)).sqrt(),
                v: (tau * bq).signum() * (0.5 * (r - 1.0)).max(0.0).sqrt(),
            }
        });
        Ok(Self {
            q,
            index,
            kq,
            aq,
            bq,
            tau,
            epsilon,
            unstable,
            amplitudes,
        })
    }

    /// `⟨b_q† b_q⟩(t)` starting from the vacuum.
    ///
    /// Written as `τ²B² sin²(εt)/ε²` (stable) or `τ²B² sinh²(κt)/κ²` (unstable),
    /// which equals `(τ²B²/2)/(A²−τ²B²)[1 − cos 2εt]` and stays finite at `ε → 0`.
    pub fn excitation(&self, t: f64) -> f64 {
        let g2 = self.tau * self.tau * self.bq * self.bq;
        let x = self.epsilon * t;
        let ratio = if x.abs() < 1e-8 {
            t * t
        } else if self.unstable {
            (x.sinh() / self.epsilon).powi(2)
        } else {
            (x.sin() / self.epsilon).powi(2)
        };
        g2 * ratio
    }

    /// Largest value of the stable oscillation, `τ²B²/(A²−τ²B²)`.
    pub fn excitation_max(&self) -> Option<f64> {
        (!self.unstable && self.epsilon > 0.0)
            .then(|| self.tau * self.tau * self.bq * self.bq / (self.epsilon * self.epsilon))
    }
}

pub fn excitation_series(mode: &SpinWaveMode, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid(format!("t must be non-negative, got {t}")));
    }
    Ok(mode.excitation(t))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinWaveSpectrum {
    pub extents: Vec<usize>,
    pub params: ModelParams,
    pub tau: f64,
    pub k0: f64,
    pub t0_squared: f64,
    /// The `N − 1` modes with `q ≠ 0`, in grid order.
    pub modes: Vec<SpinWaveMode>,
}

impl SpinWaveSpectrum {
    pub fn num_unstable(&self) -> usize {
        self.modes.iter().filter(|m| m.unstable).count()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["qx", "qy", "Kq", "Aq", "Bq", "eps_q", "unstable"])?;
        for m in &self.modes {
            csv.write_record([
                format!("{:.12e}", m.q[0]),
                format!("{:.12e}", m.q[1]),
                format!("{:.12e}", m.kq),
                format!("{:.12e}", m.aq),
                format!("{:.12e}", m.bq),
                format!("{:.12e}", m.epsilon),
                m.unstable.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

fn require_periodic(spec: &LatticeSpec) -> Result<()> {
    if spec.boundary() != Boundary::Periodic {
        return Err(Error::UnsupportedGeometry("spin waves need periodic boundaries".into()));
    }
    Ok(())
}

pub fn build_spectrum(spec: &LatticeSpec, params: &ModelParams, tau: f64) -> Result<SpinWaveSpectrum> {
    require_periodic(spec)?;
    if !(tau >= 0.0) {
        return Err(invalid(format!("tau must be non-negative, got {tau}")));
    }
    let kq = structure_factors(spec, params)?;
    let t0sq = t0_squared(spec, params)?;
    let grid = MomentumGrid::new(spec);
    let k0 = kq[grid.zero_index()];
    let modes = (0..grid.len())
        .filter(|&i| !grid.is_zero(i))
        .map(|i| SpinWaveMode::new(grid.vectors()[i], grid.indices()[i], kq[i], k0, t0sq, tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpinWaveSpectrum {
        extents: spec.extents().to_vec(),
        params: *params,
        tau,
        k0,
        t0_squared: t0sq,
        modes,
    })
}

/// `N_FM(t) = Σ_{q≠0} ⟨b_q† b_q⟩(t)`.
pub fn total_nfm(spectrum: &SpinWaveSpectrum, t: f64) -> f64 {
    spectrum.modes.iter().map(|m| m.excitation(t)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauBound {
    pub value: f64,
    pub q: [f64; 2],
    pub index: [usize; 2],
}

/// `min_{q≠0} A_q/|B_q|`.
pub fn tau_bound(spec: &LatticeSpec, params: &ModelParams) -> Result<TauBound> {
    let spectrum = build_spectrum(spec, params, 0.0)?;
    let mut best = TauBound {
        value: f64::INFINITY,
        q: [0.0; 2],
        index: [0; 2],
    };
    for m in &spectrum.modes {
        if m.bq == 0.0 {
            continue;
        }
        let r = m.aq / m.bq.abs();
        // Ties are resolved toward the first grid point, i.e. the smallest |q| along axis 1.
        if r < best.value * (1.0 - 1e-12) {
            best = TauBound {
                value: r,
                q: m.q,
                index: m.index,
            };
        }
    }
    Ok(best)
}

/// Finite-size scaling exponent, or the marker for logarithmic scaling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Exponent {
    Power(f64),
    /// `τ_s ∼ (ln L)^{−2}`.
    Logarithmic,
}

impl Exponent {
    pub fn power(self) -> Option<f64> {
        match self {
            Exponent::Power(v) => Some(v),
            Exponent::Logarithmic => None,
        }
    }
}

fn check_exponent_args(alpha: f64, d: usize) -> Result<()> {
    if !(alpha >= 0.0) {
        return Err(invalid(format!("alpha must be non-negative, got {alpha}")));
    }
    if !(d == 1 || d == 2) {
        return Err(Error::UnsupportedGeometry(format!("dimension {d}")));
    }
    Ok(())
}

/// `τ_s ∼ L^{−μ}`.
pub fn mu_exponent(alpha: f64, d: usize) -> Result<Exponent> {
    check_exponent_args(alpha, d)?;
    let d = d as f64;
    Ok(if (alpha - d).abs() < 1e-12 {
        Exponent::Logarithmic
    } else if alpha < d {
        Exponent::Power(d - alpha)
    } else if alpha < d + 2.0 {
        Exponent::Power(alpha - d)
    } else {
        Exponent::Power(2.0)
    })
}

/// `t_tot ∼ L^{−ν} ln L`.
pub fn nu_exponent(alpha: f64, d: usize) -> Result<f64> {
    check_exponent_args(alpha, d)?;
    let d = d as f64;
    Ok(if alpha < d + 2.0 { d - alpha } else { -2.0 })
}

/// `6 ln N / (λ K² τ N²)`.
pub fn tc_estimate(n: usize, lambda: f64, k: f64, tau: f64) -> Result<f64> {
    if n < 3 {
        return Err(invalid(format!("t_c needs N >= 3, got {n}")));
    }
    if !(lambda > 0.0 && tau > 0.0 && k > 0.0) {
        return Err(invalid("lambda, K and tau must be positive"));
    }
    let nf = n as f64;
    Ok(6.0 * nf.ln() / (lambda * k * k * tau * nf * nf))
}

/// `λ N K² τ / 6`.
pub fn chi_eff(n: usize, lambda: f64, k: f64, tau: f64) -> f64 {
    lambda * n as f64 * k * k * tau / 6.0
}

/// `tau_bound` against `L` with the local log-log slope between neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingStudy {
    pub dimension: usize,
    pub alpha: f64,
    pub rows: Vec<ScalingRow>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingRow {
    pub l: usize,
    pub bound: f64,
    /// `d ln(bound)/d ln L` from the previous row; `None` on the first.
    pub slope: Option<f64>,
}

impl ScalingStudy {
    /// Slope between the two largest sizes.
    pub fn asymptotic_slope(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.slope)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["L", "alpha", "bound", "fitted_slope"])?;
        for r in &self.rows {
            csv.write_record([
                r.l.to_string(),
                self.alpha.to_string(),
                format!("{:.12e}", r.bound),
                r.slope.map(|s| format!("{s:.6}")).unwrap_or_default(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

pub fn bound_scaling(d: usize, alpha: f64, sizes: &[usize]) -> Result<ScalingStudy> {
    let params = ModelParams::unit(alpha)?;
    let mut rows: Vec<ScalingRow> = Vec::with_capacity(sizes.len());
    for &l in sizes {
        let spec = LatticeSpec::hypercubic(d, l, Boundary::Periodic)?;
        let bound = tau_bound(&spec, &params)?.value;
        let slope = rows
            .last()
            .map(|prev| (bound / prev.bound).ln() / (l as f64 / prev.l as f64).ln());
        rows.push(ScalingRow { l, bound, slope });
    }
    Ok(ScalingStudy {
        dimension: d,
        alpha,
        rows,
    })
}
