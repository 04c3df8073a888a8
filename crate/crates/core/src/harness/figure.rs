use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{log_tau_grid, Engine, SweepConfig};
use super::fit::{fit_power_law, FitModel, FitPoint};
use super::reference::{zm_reference, zm_series};
use super::sweep::{engine_curve, evaluate_point, window_periods, RecordStore, SweepPoint, VERSION_TAG};
use super::threshold::{find_tau_s, fit_exponents};
use crate::error::{Error, Result};
use crate::exact::{floquet_period, parity_expectation, sx_distribution, IsingEnergies, ObservableRecord, PeriodForm, PureState};
use crate::lattice::{build_coupling_matrix, lambda_coefficient, Boundary, LatticeSpec, ModelParams};
use crate::open::{parity_scan, physical_couplings, run_open, NoiseKind, NoiseSpec, OpenRunConfig, PhysicalUnits, StepControl};
use crate::spinwave::{bound_scaling, chi_eff, mu_exponent, nu_exponent, tau_bound, tc_estimate, Exponent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureName {
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    Fig4,
    Fig5,
}

impl FigureName {
    pub const ALL: [FigureName; 6] = [
        FigureName::Fig2a,
        FigureName::Fig2b,
        FigureName::Fig3a,
        FigureName::Fig3b,
        FigureName::Fig4,
        FigureName::Fig5,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureName::Fig2a => "fig2a",
            FigureName::Fig2b => "fig2b",
            FigureName::Fig3a => "fig3a",
            FigureName::Fig3b => "fig3b",
            FigureName::Fig4 => "fig4",
            FigureName::Fig5 => "fig5",
        }
    }
}

impl std::str::FromStr for FigureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureName::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown figure '{s}'")))
    }
}

/// Sizes and sample counts for a figure run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureOptions {
    /// Desk-scale stand-ins for every panel, for smoke runs.
    pub quick: bool,
    pub n_traj: usize,
    pub seed: u64,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            quick: false,
            n_traj: crate::dtwa::DEFAULT_TRAJECTORIES,
            seed: 0,
        }
    }
}

impl FigureOptions {
    pub fn quick() -> Self {
        Self {
            quick: true,
            n_traj: 200,
            seed: 0,
        }
    }
}

/// One plot-ready table; the first line is a `#` provenance comment.
#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    pub name: String,
    pub csv: String,
}

impl Panel {
    /// Column names of the table.
    pub fn header(&self) -> Vec<&str> {
        self.csv.lines().nth(1).map(|l| l.split(',').collect()).unwrap_or_default()
    }

    /// Data rows, excluding comment and header.
    pub fn rows(&self) -> usize {
        self.csv.lines().count().saturating_sub(2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FigureBundle {
    pub name: FigureName,
    pub panels: Vec<Panel>,
}

impl FigureBundle {
    pub fn panel(&self, name: &str) -> Option<&Panel> {
        self.panels.iter().find(|p| p.name == name)
    }

    /// Writes `<dir>/<figure>_<panel>.csv` for every panel.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for p in &self.panels {
            let path = dir.join(format!("{}_{}.csv", self.name.as_str(), p.name));
            std::fs::write(&path, &p.csv)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

struct Table {
    text: String,
}

impl Table {
    fn new(provenance: &str, columns: &[&str]) -> Self {
        let mut text = format!("# {provenance} version={VERSION_TAG}\n");
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    fn row(&mut self, values: &[String]) {
        self.text.push_str(&values.join(","));
        self.text.push('\n');
    }

    fn panel(self, name: &str) -> Panel {
        Panel {
            name: name.to_string(),
            csv: self.text,
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.10e}")
}

pub fn reproduce_figure(name: FigureName, opts: &FigureOptions) -> Result<FigureBundle> {
    let panels = match name {
        FigureName::Fig2a => {
            let l = if opts.quick { 8 } else { 20 };
            snapshot_panels(LatticeSpec::chain(l, Boundary::Periodic)?, 1.0, 0.1, opts, "a")?
        }
        FigureName::Fig2b => {
            let l = if opts.quick { 3 } else { 4 };
            snapshot_panels(LatticeSpec::square(l, l, Boundary::Periodic)?, 3.0, 0.06, opts, "b")?
        }
        FigureName::Fig3a => fig3a(opts)?,
        FigureName::Fig3b => fig3b(opts)?,
        FigureName::Fig4 => fig4(opts)?,
        FigureName::Fig5 => fig5(opts)?,
    };
    Ok(FigureBundle { name, panels })
}

/// ED evolution keeping the state at the `F_Q^{S_x}` maximum.
fn ed_with_peak_state(spec: &LatticeSpec, alpha: f64, tau: f64, n_periods: usize) -> Result<(Vec<ObservableRecord>, PureState)> {
    let params = ModelParams::unit(alpha)?;
    let c = build_coupling_matrix(spec, &params)?;
    let energies = IsingEnergies::new(&c);
    let mut psi = PureState::initial_css(spec.num_sites())?;
    let mut best = psi.clone();
    let mut records = Vec::with_capacity(n_periods + 1);
    for p in 0..=n_periods {
        if p > 0 {
            floquet_period(&mut psi, tau, PeriodForm::Segment, &energies)?;
        }
        let r = ObservableRecord::measure(3.0 * tau * p as f64, &psi);
        if records.iter().all(|b: &ObservableRecord| r.fq_sx > b.fq_sx) {
            best = psi.clone();
        }
        records.push(r);
    }
    Ok((records, best))
}

/// P(m), parity and ED/DTWA QFI curves for one lattice.
fn snapshot_panels(spec: LatticeSpec, alpha: f64, tau: f64, opts: &FigureOptions, tag: &str) -> Result<Vec<Panel>> {
    let n = spec.num_sites();
    let params = ModelParams::unit(alpha)?;
    let c = build_coupling_matrix(&spec, &params)?;
    let lambda = lambda_coefficient(&spec, &params)?;
    let reference = zm_reference(n, lambda, 1.0, tau)?;
    let n_periods = window_periods(&reference, 2.0, tau);
    let (ed, peak_state) = ed_with_peak_state(&spec, alpha, tau, n_periods)?;
    let dtwa = engine_curve(Engine::Dtwa, &c, lambda, tau, n_periods, opts.n_traj, opts.seed)?;
    let prov = format!(
        "extents={:?} N={n} alpha={alpha} Ktau={tau} boundary={}",
        spec.extents(),
        spec.boundary()
    );

    let mut dist = Table::new(&prov, &["m", "P"]);
    for (i, p) in sx_distribution(&peak_state).iter().enumerate() {
        dist.row(&[format!("{}", i as f64 - n as f64 / 2.0), num(*p)]);
    }
    let mut parity = Table::new(&prov, &["theta", "parity", "reference"]);
    for i in 0..=200 {
        let theta = PI * i as f64 / 200.0;
        parity.row(&[num(theta), num(parity_expectation(&peak_state, theta)), num((n as f64 * theta).cos())]);
    }
    let mut qfi = Table::new(&format!("{prov} n_traj={} seed={}", opts.n_traj, opts.seed), &["t", "FQ_ED", "FQ_DTWA", "FQ_DTWA_err"]);
    let errs = dtwa.fq_err.unwrap_or_default();
    for (i, r) in ed.iter().enumerate() {
        qfi.row(&[num(r.t), num(r.fq_sx), num(dtwa.fq[i]), num(errs[i])]);
    }
    Ok(vec![dist.panel(&format!("{tag}1")), parity.panel(&format!("{tag}2")), qfi.panel(&format!("{tag}3"))])
}

fn fig3_setup(opts: &FigureOptions) -> (LatticeSpec, Vec<f64>) {
    let l = if opts.quick { 6 } else { 20 };
    let taus = if opts.quick { vec![0.15, 0.07] } else { vec![0.15, 0.1, 0.07, 0.05] };
    (LatticeSpec::square(l, l, Boundary::Periodic).expect("valid lattice"), taus)
}

fn fig3a(opts: &FigureOptions) -> Result<Vec<Panel>> {
    let (spec, taus) = fig3_setup(opts);
    let n = spec.num_sites();
    let params = ModelParams::unit(2.0)?;
    let c = build_coupling_matrix(&spec, &params)?;
    let lambda = lambda_coefficient(&spec, &params)?;
    let prov = format!("extents={:?} N={n} alpha=2 n_traj={} seed={}", spec.extents(), opts.n_traj, opts.seed);
    let mut curves = Table::new(&prov, &["tau", "t", "chi_t", "FQ", "FQ_err", "NFM"]);
    for &tau in &taus {
        let reference = zm_reference(n, lambda, 1.0, tau)?;
        let periods = window_periods(&reference, 2.0, tau);
        let curve = engine_curve(Engine::Dtwa, &c, lambda, tau, periods, opts.n_traj, opts.seed)?;
        let chi = chi_eff(n, lambda, 1.0, tau);
        let errs = curve.fq_err.unwrap_or_default();
        for i in 0..curve.times.len() {
            let t = curve.times[i];
            curves.row(&[num(tau), num(t), num(chi * t), num(curve.fq[i]), num(errs[i]), num(curve.nfm[i])]);
        }
    }
    // The collective curve is τ-independent on the rescaled axis.
    let tau = taus[0];
    let chi = chi_eff(n, lambda, 1.0, tau);
    let reference = zm_reference(n, lambda, 1.0, tau)?;
    let times: Vec<f64> = (0..=400).map(|i| 2.0 * reference.t_peak() * i as f64 / 400.0).collect();
    let mut zm = Table::new(&format!("N={n} lambda={lambda}"), &["chi_t", "FQ_eff"]);
    for r in zm_series(n, lambda, 1.0, tau, &times)? {
        zm.row(&[num(chi * r.t), num(r.fq_sx)]);
    }
    Ok(vec![curves.panel("curves"), zm.panel("reference")])
}

fn fig3b(opts: &FigureOptions) -> Result<Vec<Panel>> {
    let (spec, taus) = fig3_setup(opts);
    let l = spec.extents()[0];
    let mut cfg = SweepConfig::new(2, vec![l], vec![2.0], taus.clone())?;
    cfg.engine = Some(Engine::Dtwa);
    cfg.n_traj = opts.n_traj;
    cfg.seed = opts.seed;
    let mut t = Table::new(
        &format!("extents={:?} alpha=2 engine=dtwa n_traj={} seed={}", spec.extents(), opts.n_traj, opts.seed),
        &["tau", "max_FQ", "max_FQ_err", "t_tot", "FQ_eff", "ratio", "NFM"],
    );
    for &tau in &taus {
        let r = evaluate_point(&SweepPoint::from_config(&cfg, l, 2.0, tau))?;
        t.row(&[
            num(tau),
            num(r.max_fq),
            num(r.max_fq_err.unwrap_or(0.0)),
            num(r.t_at_max),
            num(r.fq_eff),
            num(r.ratio),
            num(r.nfm_at_peak),
        ]);
    }
    Ok(vec![t.panel("peaks")])
}

fn fig4(opts: &FigureOptions) -> Result<Vec<Panel>> {
    let mut theory = Table::new("spin-wave exponents", &["alpha", "mu_d1", "mu_d2", "nu_d1", "nu_d2"]);
    let show = |e: Exponent| match e {
        Exponent::Power(v) => num(v),
        Exponent::Logarithmic => "log".to_string(),
    };
    for i in 0..=60 {
        let alpha = 0.1 * i as f64;
        theory.row(&[
            num(alpha),
            show(mu_exponent(alpha, 1)?),
            show(mu_exponent(alpha, 2)?),
            num(nu_exponent(alpha, 1)?),
            num(nu_exponent(alpha, 2)?),
        ]);
    }

    let cases: Vec<(usize, f64, Vec<usize>)> = if opts.quick {
        vec![(1, 2.5, vec![16, 32, 64]), (2, 3.0, vec![8, 12, 16])]
    } else {
        let d1 = vec![32, 64, 128, 256, 512];
        let d2 = vec![8, 16, 32, 64];
        let mut v: Vec<(usize, f64, Vec<usize>)> = [0.5, 1.5, 2.5, 4.0].iter().map(|&a| (1, a, d1.clone())).collect();
        v.extend([1.0, 3.0, 5.0].iter().map(|&a| (2, a, d2.clone())));
        v
    };
    let mut points = Table::new("analytic spin-wave bound and GHZ-time estimate", &["d", "alpha", "mu_fit", "nu_fit", "source"]);
    for (d, alpha, sizes) in &cases {
        let study = bound_scaling(*d, *alpha, sizes)?;
        let mu = -study.asymptotic_slope().unwrap_or(f64::NAN);
        let mut tc_points = Vec::new();
        for &l in sizes {
            let spec = LatticeSpec::hypercubic(*d, l, Boundary::Periodic)?;
            let params = ModelParams::unit(*alpha)?;
            let tau = tau_bound(&spec, &params)?.value;
            let lambda = lambda_coefficient(&spec, &params)?;
            tc_points.push(FitPoint::new(l as f64, tc_estimate(spec.num_sites(), lambda, 1.0, tau)?));
        }
        let nu = fit_power_law(&tc_points, FitModel::PowerLawLog)
            .map(|f| -f.slope)
            .unwrap_or(f64::NAN);
        points.row(&[d.to_string(), num(*alpha), num(mu), num(nu), "spinwave".into()]);
    }
    let mut panels = vec![theory.panel("theory"), points.panel("points")];

    if !opts.quick {
        // Trajectory sweep for one case; tens of minutes on a desktop.
        let mut cfg = SweepConfig::new(1, vec![8, 12, 16, 20, 24], vec![1.5], log_tau_grid(1.0, 0.05, 8)?)?;
        cfg.engine = Some(Engine::Dtwa);
        cfg.n_traj = opts.n_traj;
        cfg.seed = opts.seed;
        let mut store = RecordStore::in_memory();
        let mut t = Table::new(&format!("d=1 alpha=1.5 engine=dtwa n_traj={}", opts.n_traj), &["threshold", "mu_fit", "mu_err", "nu_fit"]);
        for threshold in [0.6, 0.7, 0.8] {
            let searches: Vec<_> = cfg
                .sizes
                .iter()
                .map(|&l| find_tau_s(&cfg, l, 1.5, threshold, &mut store))
                .collect::<Result<_>>()?;
            let fit = fit_exponents(&searches, threshold)?;
            t.row(&[num(threshold), num(fit.mu_value()), num(fit.mu.slope_err()), num(fit.nu_value().unwrap_or(f64::NAN))]);
        }
        panels.push(t.panel("dtwa"));
    }
    Ok(panels)
}

/// Decoherence rates for the robustness curve, in Hz.
pub const FIG5_RATES: [f64; 4] = [1.0, 3.0, 10.0, 30.0];

fn fig5(opts: &FigureOptions) -> Result<Vec<Panel>> {
    let n = if opts.quick { 6 } else { 10 };
    let units = PhysicalUnits::new(560.0, 0.18e-3)?;
    let spec = LatticeSpec::chain(n, Boundary::Open)?;
    let c = physical_couplings(&spec, &units, 1.0)?;
    let lambda = lambda_coefficient(&spec, &ModelParams::unit(1.0)?)?;
    let reference = zm_reference(n, lambda, units.k_hz, units.tau_s)?;
    let periods = window_periods(&reference, 1.5, units.tau_s);
    let prov = format!("N={n} K_hz=560 tau_s=0.00018 alpha=1 boundary=open frame=lab");
    let mut rates = Table::new(&prov, &["rate_hz", "kind", "max_FQ", "t_at_max_s"]);
    let noiseless = run_open(&c, &OpenRunConfig::new(units, NoiseSpec::none(), periods))?;
    rates.row(&["0".into(), "none".into(), num(noiseless.max_fq), num(noiseless.t_at_max_s)]);
    let mut panels = Vec::new();
    for kind in [NoiseKind::Local, NoiseKind::Global] {
        for rate in FIG5_RATES {
            let mut cfg = OpenRunConfig::new(units, NoiseSpec::new(kind, rate)?, periods);
            cfg.stop_fraction = Some(0.5);
            cfg.control = StepControl::survey();
            let run = run_open(&c, &cfg)?;
            rates.row(&[num(rate), kind.to_string(), num(run.max_fq), num(run.t_at_max_s)]);
            if rate == 10.0 {
                let thetas: Vec<f64> = (0..=200).map(|i| PI * i as f64 / 200.0).collect();
                let mut t = Table::new(&format!("{prov} kind={kind} rate_hz=10"), &["theta", "parity"]);
                for (th, p) in thetas.iter().zip(parity_scan(&run.rho_at_max, &thetas)) {
                    t.row(&[num(*th), num(p)]);
                }
                panels.push(t.panel(&format!("parity_{kind}")));
            }
        }
    }
    panels.insert(0, rates.panel("rates"));
    Ok(panels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for f in FigureName::ALL {
            assert_eq!(f.as_str().parse::<FigureName>().unwrap(), f);
        }
        assert!(matches!("fig9".parse::<FigureName>(), Err(Error::Config(_))));
    }

    #[test]
    fn tables_carry_provenance() {
        let mut t = Table::new("N=4", &["a", "b"]);
        t.row(&["1".into(), "2".into()]);
        let p = t.panel("x");
        assert!(p.csv.starts_with("# N=4 version=ghzsim-"));
        assert_eq!(p.header(), vec!["a", "b"]);
        assert_eq!(p.rows(), 1);
    }
}
