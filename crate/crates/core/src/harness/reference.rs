use serde::{Deserialize, Serialize};

use super::peak::{first_prominent_peak, Peak};
use crate::error::Result;
use crate::exact::{zm_hamiltonian, DickeState, ObservableRecord, ZmPropagator};
use crate::spinwave::tc_estimate;

/// Samples per estimated GHZ time `t_c` on the reference grid.
const SAMPLES_PER_TC: usize = 200;
/// The reference is followed up to this multiple of `t_c`.
const HORIZON_TC: f64 = 3.0;
/// A local maximum counts as the peak once it reaches this share of the global one.
const PROMINENCE: f64 = 0.9;

/// Collective-subspace dynamics used as the ideal against which engines are scored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZmReference {
    pub n: usize,
    pub lambda: f64,
    pub tau: f64,
    pub peak: Peak,
    pub times: Vec<f64>,
    pub fq: Vec<f64>,
}

impl ZmReference {
    pub fn fq_max(&self) -> f64 {
        self.peak.value
    }

    pub fn t_peak(&self) -> f64 {
        self.peak.t
    }
}

/// Observables of `exp(−iH_ZM t)|CSS⟩` at the given times.
pub fn zm_series(n: usize, lambda: f64, k: f64, tau: f64, times: &[f64]) -> Result<Vec<ObservableRecord>> {
    let prop = ZmPropagator::new(&zm_hamiltonian(n, lambda, k, tau)?)?;
    let coeffs = prop.decompose(&DickeState::initial_css(n)?)?;
    Ok(times
        .iter()
        .map(|&t| ObservableRecord::measure(t, &prop.evolve_coefficients(n, &coeffs, t)))
        .collect())
}

/// `F_Q^{S_x}` under `H_ZM` up to `3 t_c`, with its first prominent maximum.
pub fn zm_reference(n: usize, lambda: f64, k: f64, tau: f64) -> Result<ZmReference> {
    let tc = tc_estimate(n, lambda, k, tau)?;
    let dt = tc / SAMPLES_PER_TC as f64;
    let steps = (HORIZON_TC * SAMPLES_PER_TC as f64) as usize;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    let fq: Vec<f64> = zm_series(n, lambda, k, tau, &times)?.iter().map(|r| r.fq_sx).collect();
    let peak = first_prominent_peak(&times, &fq, PROMINENCE)?;
    Ok(ZmReference {
        n,
        lambda,
        tau,
        peak,
        times,
        fq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_peak_is_near_heisenberg_scale() {
        let r = zm_reference(40, 1.0, 1.0, 0.05).unwrap();
        assert!((r.fq[0] - 40.0).abs() < 1e-9);
        assert!(r.fq_max() > 0.7 * 1600.0 && r.fq_max() <= 1600.0 + 1e-9);
        let tc = tc_estimate(40, 1.0, 1.0, 0.05).unwrap();
        assert!(r.t_peak() > 0.5 * tc && r.t_peak() < 2.0 * tc);
        // Halving τ stretches time by two without changing the peak height.
        let s = zm_reference(40, 1.0, 1.0, 0.025).unwrap();
        assert!((s.fq_max() / r.fq_max() - 1.0).abs() < 1e-3);
        assert!((s.t_peak() / r.t_peak() - 2.0).abs() < 1e-2);
    }
}
