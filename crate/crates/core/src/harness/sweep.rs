use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Engine, SweepConfig};
use super::peak::locate_peak;
use super::reference::{zm_reference, zm_series, ZmReference};
use crate::dtwa::{run_series, TrajectoryEnsemble};
use crate::error::{Error, Result};
use crate::exact::{floquet_period, IsingEnergies, ObservableRecord, PeriodForm, PureState};
use crate::lattice::{build_coupling_matrix, lambda_coefficient, Boundary, CouplingMatrix, LatticeSpec, ModelParams};

pub const VERSION_TAG: &str = concat!("ghzsim-", env!("CARGO_PKG_VERSION"));

/// Where a record came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub engine: Engine,
    pub seed: u64,
    /// Trajectory count; absent for deterministic engines.
    pub n_traj: Option<usize>,
    pub boundary: Boundary,
    pub version: String,
}

/// One evaluated sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub dimension: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub n: usize,
    pub alpha: f64,
    pub tau: f64,
    pub max_fq: f64,
    pub max_fq_err: Option<f64>,
    pub t_at_max: f64,
    pub fq_eff: f64,
    pub t_eff: f64,
    pub ratio: f64,
    pub nfm_at_peak: f64,
    pub nfm_err: Option<f64>,
    pub n_periods: usize,
    pub provenance: Provenance,
}

impl SweepRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey::new(self.dimension, self.l, self.alpha, self.tau, self.provenance.engine, self.provenance.seed)
    }

    /// `max_fq / fq_eff`, the quantity stored in `ratio`.
    pub fn recomputed_ratio(&self) -> f64 {
        self.max_fq / self.fq_eff
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey {
    dimension: usize,
    l: usize,
    alpha_bits: u64,
    tau_bits: u64,
    engine: Engine,
    seed: u64,
}

impl RecordKey {
    pub fn new(dimension: usize, l: usize, alpha: f64, tau: f64, engine: Engine, seed: u64) -> Self {
        Self {
            dimension,
            l,
            alpha_bits: alpha.to_bits(),
            tau_bits: tau.to_bits(),
            engine,
            seed,
        }
    }
}

/// A fully specified sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub dimension: usize,
    pub l: usize,
    pub alpha: f64,
    pub tau: f64,
    pub engine: Engine,
    pub n_traj: usize,
    pub seed: u64,
    pub boundary: Boundary,
    /// Evolution window in units of the ZM peak time.
    pub window: f64,
}

impl SweepPoint {
    pub fn from_config(cfg: &SweepConfig, l: usize, alpha: f64, tau: f64) -> Self {
        let n = l.pow(cfg.dimension as u32);
        Self {
            dimension: cfg.dimension,
            l,
            alpha,
            tau,
            engine: cfg.engine_for(n),
            n_traj: cfg.n_traj,
            seed: cfg.seed,
            boundary: cfg.boundary,
            window: cfg.window,
        }
    }

    pub fn key(&self) -> RecordKey {
        RecordKey::new(self.dimension, self.l, self.alpha, self.tau, self.engine, self.seed)
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        LatticeSpec::hypercubic(self.dimension, self.l, self.boundary)
    }
}

impl SweepConfig {
    /// Points in `L`, then `α`, then `τ` order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &l in &self.sizes {
            for &alpha in &self.alphas {
                for &tau in &self.taus {
                    out.push(SweepPoint::from_config(self, l, alpha, tau));
                }
            }
        }
        out
    }
}

/// Stroboscopic `F_Q^{S_x}` of one engine.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EngineCurve {
    pub times: Vec<f64>,
    pub fq: Vec<f64>,
    pub fq_err: Option<Vec<f64>>,
    pub nfm: Vec<f64>,
    pub nfm_err: Option<Vec<f64>>,
}

/// Runs `engine` from the z-polarized CSS for `n_periods` periods.
pub fn engine_curve(
    engine: Engine,
    c: &CouplingMatrix,
    lambda: f64,
    tau: f64,
    n_periods: usize,
    n_traj: usize,
    seed: u64,
) -> Result<EngineCurve> {
    let n = c.n();
    let times: Vec<f64> = (0..=n_periods).map(|p| 3.0 * tau * p as f64).collect();
    match engine {
        Engine::Ed => {
            let energies = IsingEnergies::new(c);
            let mut psi = PureState::initial_css(n)?;
            let mut curve = EngineCurve::default();
            for (p, &t) in times.iter().enumerate() {
                if p > 0 {
                    floquet_period(&mut psi, tau, PeriodForm::Segment, &energies)?;
                }
                let r = ObservableRecord::measure(t, &psi);
                curve.times.push(t);
                curve.fq.push(r.fq_sx);
                curve.nfm.push(r.nfm);
            }
            Ok(curve)
        }
        Engine::Dtwa => {
            let mut ens = TrajectoryEnsemble::sample_initial(n, n_traj, seed)?;
            let series = run_series(&mut ens, tau, n_periods, c)?;
            Ok(EngineCurve {
                times: series.times(),
                fq: series.fq_sx(),
                fq_err: Some(series.records.iter().map(|r| r.fq_sx_err).collect()),
                nfm: series.records.iter().map(|r| r.nfm).collect(),
                nfm_err: Some(series.records.iter().map(|r| r.nfm_err).collect()),
            })
        }
        Engine::Zm => {
            let records = zm_series(n, lambda, c.params().k, tau, &times)?;
            Ok(EngineCurve {
                fq: records.iter().map(|r| r.fq_sx).collect(),
                nfm: records.iter().map(|r| r.nfm).collect(),
                times,
                ..Default::default()
            })
        }
    }
}

/// Number of periods covering `window` ZM peak times.
pub fn window_periods(reference: &ZmReference, window: f64, tau: f64) -> usize {
    ((window * reference.t_peak()) / (3.0 * tau)).ceil().max(1.0) as usize
}

/// Scores one point against its ZM reference.
pub fn evaluate_point(point: &SweepPoint) -> Result<SweepRecord> {
    let spec = point.lattice()?;
    let n = spec.num_sites();
    let params = ModelParams::unit(point.alpha)?;
    let c = build_coupling_matrix(&spec, &params)?;
    let lambda = lambda_coefficient(&spec, &params)?;
    let reference = zm_reference(n, lambda, params.k, point.tau)?;
    let n_periods = window_periods(&reference, point.window, point.tau);
    let curve = engine_curve(point.engine, &c, lambda, point.tau, n_periods, point.n_traj, point.seed)?;
    let peak = locate_peak(&curve.times, &curve.fq)?;
    let i = peak.index;
    Ok(SweepRecord {
        dimension: point.dimension,
        l: point.l,
        n,
        alpha: point.alpha,
        tau: point.tau,
        max_fq: peak.value,
        max_fq_err: curve.fq_err.as_ref().map(|e| e[i]),
        t_at_max: peak.t,
        fq_eff: reference.fq_max(),
        t_eff: reference.t_peak(),
        ratio: peak.value / reference.fq_max(),
        nfm_at_peak: curve.nfm[i],
        nfm_err: curve.nfm_err.as_ref().map(|e| e[i]),
        n_periods,
        provenance: Provenance {
            engine: point.engine,
            seed: point.seed,
            n_traj: (point.engine == Engine::Dtwa).then_some(point.n_traj),
            boundary: point.boundary,
            version: VERSION_TAG.to_string(),
        },
    })
}

/// Append-only JSON-lines store of sweep records.
#[derive(Debug, Default)]
pub struct RecordStore {
    path: Option<PathBuf>,
    records: BTreeMap<RecordKey, SweepRecord>,
}

impl RecordStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads the records already in `path`; a torn final line is ignored.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut records = BTreeMap::new();
        if path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(&path)?).lines().collect::<std::io::Result<_>>()?;
            let last = lines.len().saturating_sub(1);
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<SweepRecord>(line) {
                    Ok(r) => {
                        records.insert(r.key(), r);
                    }
                    Err(_) if i == last => {}
                    Err(e) => return Err(Error::Config(format!("{}:{}: {e}", path.display(), i + 1))),
                }
            }
        }
        Ok(Self {
            path: Some(path),
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &RecordKey) -> Option<&SweepRecord> {
        self.records.get(key)
    }

    pub fn records(&self) -> impl Iterator<Item = &SweepRecord> {
        self.records.values()
    }

    /// Adds a record; existing keys are kept, never overwritten.
    pub fn insert(&mut self, record: SweepRecord) -> Result<()> {
        let key = record.key();
        if self.records.contains_key(&key) {
            return Ok(());
        }
        if let Some(path) = &self.path {
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            let mut line = serde_json::to_string(&record)?;
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        self.records.insert(key, record);
        Ok(())
    }

    pub fn get_or_compute(&mut self, point: &SweepPoint) -> Result<SweepRecord> {
        if let Some(r) = self.get(&point.key()) {
            return Ok(r.clone());
        }
        let r = evaluate_point(point)?;
        self.insert(r.clone())?;
        Ok(r)
    }
}

/// Evaluates every point of `cfg` not yet in `store`, `workers` at a time,
/// persisting each batch before starting the next.
pub fn run_sweep(cfg: &SweepConfig, store: &mut RecordStore) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let points = cfg.points();
    let missing: Vec<&SweepPoint> = points.iter().filter(|p| store.get(&p.key()).is_none()).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    for batch in missing.chunks(cfg.workers) {
        let results: Vec<Result<SweepRecord>> = pool.install(|| batch.par_iter().map(|p| evaluate_point(p)).collect());
        for r in results {
            store.insert(r?)?;
        }
    }
    Ok(points.iter().filter_map(|p| store.get(&p.key()).cloned()).collect())
}

pub fn write_records_csv<W: Write>(records: &[SweepRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "dimension", "L", "N", "alpha", "tau", "max_FQ", "max_FQ_err", "t_at_max", "FQ_eff", "t_eff", "ratio", "NFM",
        "NFM_err", "n_periods", "engine", "seed", "n_traj", "boundary", "version",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let p = &r.provenance;
        out.write_record([
            r.dimension.to_string(),
            r.l.to_string(),
            r.n.to_string(),
            r.alpha.to_string(),
            r.tau.to_string(),
            r.max_fq.to_string(),
            opt(r.max_fq_err),
            r.t_at_max.to_string(),
            r.fq_eff.to_string(),
            r.t_eff.to_string(),
            r.ratio.to_string(),
            r.nfm_at_peak.to_string(),
            opt(r.nfm_err),
            r.n_periods.to_string(),
            p.engine.to_string(),
            p.seed.to_string(),
            p.n_traj.map(|x| x.to_string()).unwrap_or_default(),
            p.boundary.to_string(),
            p.version.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
