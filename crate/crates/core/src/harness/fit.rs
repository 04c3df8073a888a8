use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `y = A L^s`.
    PowerLaw,
    /// `y = A L^s ln L`.
    PowerLawLog,
}

/// A sample `y(L)` with an optional standard error on `y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub l: f64,
    pub y: f64,
    pub err: Option<f64>,
}

impl FitPoint {
    pub fn new(l: f64, y: f64) -> Self {
        Self { l, y, err: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub slope: f64,
    pub intercept: f64,
    /// Covariance of `(slope, intercept)`.
    pub covariance: [[f64; 2]; 2],
    pub residual_norm: f64,
    /// Smallest and largest `L` used.
    pub window: (f64, f64),
    pub points: usize,
}

impl FitResult {
    pub fn slope_err(&self) -> f64 {
        self.covariance[0][0].max(0.0).sqrt()
    }
}

/// Weighted least squares of `ln y` (or `ln(y / ln L)`) on `ln L`.
///
/// Weights are `(y/σ_y)²`, the inverse variance of `ln y`; unit weights without errors.
pub fn fit_power_law(points: &[FitPoint], model: FitModel) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 points, got {}", points.len())));
    }
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        if !(p.l > 0.0 && p.y > 0.0) || (model == FitModel::PowerLawLog && !(p.l > 1.0)) {
            return Err(Error::DegenerateFit(format!("cannot take logs of L={}, y={}", p.l, p.y)));
        }
        let x = p.l.ln();
        let y = match model {
            FitModel::PowerLaw => p.y.ln(),
            FitModel::PowerLawLog => (p.y / x).ln(),
        };
        let w = match p.err {
            Some(e) if e > 0.0 => (p.y / e).powi(2),
            _ => 1.0,
        };
        rows.push((x, y, w));
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, w) in &rows {
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if !(det > 1e-12 * sw * sxx) {
        return Err(Error::DegenerateFit("all L values coincide".into()));
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let chi2: f64 = rows.iter().map(|&(x, y, w)| w * (y - intercept - slope * x).powi(2)).sum();
    let weighted = points.iter().any(|p| p.err.is_some_and(|e| e > 0.0));
    // Without errors the scatter sets the scale.
    let scale = if weighted { 1.0 } else { chi2 / (rows.len() - 2) as f64 };
    let covariance = [[scale * sw / det, -scale * sx / det], [-scale * sx / det, scale * sxx / det]];
    let lmin = points.iter().map(|p| p.l).fold(f64::INFINITY, f64::min);
    let lmax = points.iter().map(|p| p.l).fold(f64::NEG_INFINITY, f64::max);
    Ok(FitResult {
        model,
        slope,
        intercept,
        covariance,
        residual_norm: chi2.sqrt(),
        window: (lmin, lmax),
        points: rows.len(),
    })
}

/// Drops the points at the smallest `L`, which carry the largest finite-size transients.
pub fn exclude_smallest(points: &[FitPoint]) -> Vec<FitPoint> {
    let lmin = points.iter().map(|p| p.l).fold(f64::INFINITY, f64::min);
    points.iter().filter(|p| p.l > lmin).copied().collect()
}
