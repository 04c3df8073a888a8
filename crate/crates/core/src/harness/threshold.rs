use serde::{Deserialize, Serialize};

use super::config::SweepConfig;
use super::fit::{exclude_smallest, fit_power_law, FitModel, FitPoint, FitResult};
use super::sweep::{RecordStore, SweepPoint, SweepRecord};
use crate::error::{invalid, Result};

/// Relative width at which the bisection in `ln τ` stops.
pub const BISECTION_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tau: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TauSOutcome {
    /// `tau_s` passes the threshold; `bracket` holds it and the failing τ above it.
    Found { tau_s: f64, bracket: Option<(f64, f64)> },
    NotFound,
}

/// Result of a threshold search, with the whole ratio curve attached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearch {
    pub threshold: f64,
    pub outcome: TauSOutcome,
    /// Every evaluated point, τ decreasing.
    pub curve: Vec<CurvePoint>,
    /// Whether the ratio never decreases as τ decreases over the grid.
    pub monotone: bool,
}

impl ThresholdSearch {
    pub fn tau_s(&self) -> Option<f64> {
        match self.outcome {
            TauSOutcome::Found { tau_s, .. } => Some(tau_s),
            TauSOutcome::NotFound => None,
        }
    }
}

/// Locates the threshold crossing of `ratio(τ)` on a strictly decreasing grid.
///
/// A crossing is a pair of neighbours where the ratio is below threshold at the
/// larger τ and at or above it at the smaller one. The largest such crossing is
/// refined by bisection in `ln τ`. Without any crossing the grid top is returned
/// when it passes, otherwise the search fails.
pub fn search_threshold(
    grid: &[f64],
    threshold: f64,
    mut ratio: impl FnMut(f64) -> Result<f64>,
) -> Result<ThresholdSearch> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("tau grid must be non-empty and strictly decreasing"));
    }
    let mut curve = Vec::with_capacity(grid.len());
    for &tau in grid {
        curve.push(CurvePoint { tau, ratio: ratio(tau)? });
    }
    let monotone = curve.windows(2).all(|w| w[1].ratio >= w[0].ratio);
    let crossing = curve.windows(2).position(|w| w[0].ratio < threshold && w[1].ratio >= threshold);
    let outcome = match crossing {
        Some(i) => {
            let (mut hi, mut lo) = (curve[i].tau, curve[i + 1].tau);
            while hi / lo > 1.0 + BISECTION_TOLERANCE {
                let mid = (hi * lo).sqrt();
                let r = ratio(mid)?;
                curve.push(CurvePoint { tau: mid, ratio: r });
                if r >= threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            TauSOutcome::Found {
                tau_s: lo,
                bracket: Some((lo, hi)),
            }
        }
        None if curve[0].ratio >= threshold => TauSOutcome::Found {
            tau_s: curve[0].tau,
            bracket: None,
        },
        None => TauSOutcome::NotFound,
    };
    curve.sort_by(|a, b| b.tau.total_cmp(&a.tau));
    Ok(ThresholdSearch {
        threshold,
        outcome,
        curve,
        monotone,
    })
}

/// `τ_s` for one `(L, α)` with the record at `τ_s`, whose peak time is `t_tot`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauS {
    #[serde(rename = "L")]
    pub l: usize,
    pub alpha: f64,
    pub search: ThresholdSearch,
    pub record: Option<SweepRecord>,
}

impl TauS {
    pub fn t_tot(&self) -> Option<f64> {
        self.record.as_ref().map(|r| r.t_at_max)
    }
}

/// Threshold search over `cfg.taus` for one lattice size, reusing stored records.
pub fn find_tau_s(cfg: &SweepConfig, l: usize, alpha: f64, threshold: f64, store: &mut RecordStore) -> Result<TauS> {
    let search = search_threshold(&cfg.taus, threshold, |tau| {
        Ok(store.get_or_compute(&SweepPoint::from_config(cfg, l, alpha, tau))?.ratio)
    })?;
    let record = match search.tau_s() {
        Some(tau) => Some(store.get_or_compute(&SweepPoint::from_config(cfg, l, alpha, tau))?),
        None => None,
    };
    Ok(TauS {
        l,
        alpha,
        search,
        record,
    })
}

/// Exponents fitted from a family of `τ_s` searches at one `α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub alpha: f64,
    pub threshold: f64,
    /// `τ_s ∼ L^{−μ}`.
    pub mu: FitResult,
    /// `t_tot ∼ L^{−ν} ln L`; needs three sizes with a record.
    pub nu: Option<FitResult>,
}

impl ExponentFit {
    pub fn mu_value(&self) -> f64 {
        -self.mu.slope
    }

    pub fn nu_value(&self) -> Option<f64> {
        self.nu.as_ref().map(|f| -f.slope)
    }
}

/// Fits `μ` (and `ν` where possible) with the smallest `L` excluded.
pub fn fit_exponents(results: &[TauS], threshold: f64) -> Result<ExponentFit> {
    let alpha = results.first().map(|r| r.alpha).ok_or_else(|| invalid("no threshold searches to fit"))?;
    let taus: Vec<FitPoint> = results
        .iter()
        .filter_map(|r| r.search.tau_s().map(|t| FitPoint::new(r.l as f64, t)))
        .collect();
    let mu = fit_power_law(&exclude_smallest(&taus), FitModel::PowerLaw)?;
    let times: Vec<FitPoint> = results
        .iter()
        .filter_map(|r| r.t_tot().map(|t| FitPoint::new(r.l as f64, t)))
        .collect();
    let nu = fit_power_law(&exclude_smallest(&times), FitModel::PowerLawLog).ok();
    Ok(ExponentFit { alpha, threshold, mu, nu })
}

pub fn write_curve_csv<W: std::io::Write>(searches: &[TauS], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["L", "alpha", "threshold", "tau", "ratio"])?;
    for s in searches {
        for p in &s.search.curve {
            out.write_record([
                s.l.to_string(),
                s.alpha.to_string(),
                s.search.threshold.to_string(),
                p.tau.to_string(),
                p.ratio.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
