use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dtwa::DEFAULT_TRAJECTORIES;
use crate::error::{Error, Result};
use crate::lattice::{Boundary, LatticeSpec};

/// Largest register the sweep hands to the state-vector engine by default.
pub const ED_DEFAULT_MAX_SPINS: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Ed,
    Dtwa,
    Zm,
}

impl Engine {
    /// State vectors up to [`ED_DEFAULT_MAX_SPINS`], trajectories above.
    pub fn default_for(n: usize) -> Self {
        if n > ED_DEFAULT_MAX_SPINS {
            Engine::Dtwa
        } else {
            Engine::Ed
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Ed => "ed",
            Engine::Dtwa => "dtwa",
            Engine::Zm => "zm",
        }
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ed" => Ok(Engine::Ed),
            "dtwa" => Ok(Engine::Dtwa),
            "zm" => Ok(Engine::Zm),
            other => Err(Error::Config(format!("unknown engine '{other}' (expected ed, dtwa or zm)"))),
        }
    }
}

/// `per_decade` log-spaced points from `top` down to `bottom` inclusive.
pub fn log_tau_grid(top: f64, bottom: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(top > bottom && bottom > 0.0) || per_decade == 0 {
        return Err(Error::Config(format!(
            "need top > bottom > 0 and per_decade > 0, got {top}, {bottom}, {per_decade}"
        )));
    }
    let steps = ((top / bottom).log10() * per_decade as f64 - 1e-9).ceil() as usize;
    Ok((0..=steps)
        .map(|i| (top * 10f64.powf(-(i as f64) / per_decade as f64)).max(bottom))
        .collect())
}

fn default_boundary() -> Boundary {
    Boundary::Periodic
}

fn default_threshold() -> f64 {
    0.8
}

fn default_n_traj() -> usize {
    DEFAULT_TRAJECTORIES
}

fn default_window() -> f64 {
    2.0
}

fn default_workers() -> usize {
    1
}

/// Parameters of a sweep over `(L, α, τ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub dimension: usize,
    #[serde(rename = "L")]
    pub sizes: Vec<usize>,
    pub alphas: Vec<f64>,
    /// Strictly decreasing.
    pub taus: Vec<f64>,
    /// Per-point engine choice when absent: see [`Engine::default_for`].
    #[serde(default)]
    pub engine: Option<Engine>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    /// Evolution window in units of the ZM peak time.
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl SweepConfig {
    pub fn new(dimension: usize, sizes: Vec<usize>, alphas: Vec<f64>, taus: Vec<f64>) -> Result<Self> {
        let cfg = Self {
            dimension,
            sizes,
            alphas,
            taus,
            engine: None,
            threshold: default_threshold(),
            n_traj: default_n_traj(),
            seed: 0,
            output: None,
            boundary: default_boundary(),
            window: default_window(),
            workers: default_workers(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(1..=2).contains(&self.dimension) {
            return fail(format!("dimension must be 1 or 2, got {}", self.dimension));
        }
        if self.sizes.is_empty() || self.alphas.is_empty() || self.taus.is_empty() {
            return fail("L, alphas and taus must be non-empty".into());
        }
        if self.sizes.iter().any(|&l| l < 2) {
            return fail("every L must be at least 2".into());
        }
        if self.alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return fail("alphas must be finite and non-negative".into());
        }
        if self.taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return fail("taus must be positive".into());
        }
        if self.taus.windows(2).any(|w| !(w[1] < w[0])) {
            return fail("tau grid must be strictly decreasing".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        if self.n_traj < 2 {
            return fail("n_traj must be at least 2".into());
        }
        if !(self.window > 1.0) {
            return fail("window must exceed 1 (units of the ZM peak time)".into());
        }
        if self.workers == 0 {
            return fail("workers must be positive".into());
        }
        Ok(())
    }

    pub fn lattice(&self, l: usize) -> Result<LatticeSpec> {
        LatticeSpec::hypercubic(self.dimension, l, self.boundary)
    }

    pub fn engine_for(&self, n: usize) -> Engine {
        self.engine.unwrap_or_else(|| Engine::default_for(n))
    }
}
