use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ghzsim::dtwa::{run_series, TrajectoryEnsemble, DEFAULT_TRAJECTORIES};
use ghzsim::exact::{floquet_period, IsingEnergies, ObservableRecord, ObservableSeries, PeriodForm, PureState};
use ghzsim::harness::sweep::VERSION_TAG;
use ghzsim::harness::threshold::write_curve_csv;
use ghzsim::harness::{
    zm_series,
    find_tau_s, fit_exponents, reproduce_figure, run_sweep, write_records_csv, FigureName, FigureOptions, RecordStore,
    SweepConfig, TauSOutcome,
};
use ghzsim::lattice::{chi_collective, lambda_coefficient, t0_squared, tau_crit_estimate};
use ghzsim::open::{physical_couplings, run_open, NoiseFrame, NoiseKind, NoiseSpec, OpenRunConfig, PhysicalUnits};
use ghzsim::spinwave::{bound_scaling, build_spectrum, mu_exponent, nu_exponent, tau_bound, tc_estimate, Exponent};
use ghzsim::{build_coupling_matrix, Boundary, Error, LatticeSpec, ModelParams};

/// Floquet GHZ-state workbench: exact, semiclassical, spin-wave and open-system engines.
#[derive(Parser)]
#[command(name = "ghzsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coupling matrix and lattice coefficients.
    Model(ModelOpts),
    /// Exact state-vector evolution from the z-polarized coherent state.
    Ed(EdOpts),
    /// Discrete truncated Wigner trajectories.
    Dtwa(DtwaOpts),
    /// Collective-subspace effective dynamics.
    Zm(ZmOpts),
    /// Spin-wave spectrum, stability bound and scaling exponents.
    Spinwave(SpinwaveOpts),
    /// Density-matrix evolution under dephasing.
    Lindblad(LindbladOpts),
    /// Run a parameter sweep described by a JSON config.
    Sweep(SweepOpts),
    /// Threshold search for tau_s and power-law fits of the exponents.
    Fit(FitOpts),
    /// Write the data tables of one figure.
    Figure(FigureOpts),
}

#[derive(Args, Clone)]
struct LatticeOpts {
    /// Lattice dimension (1 or 2).
    #[arg(short, long, default_value_t = 1)]
    dim: usize,
    /// Linear size; the lattice is L or L×L.
    #[arg(short = 'L', long = "size")]
    l: usize,
    /// Power-law exponent of the couplings.
    #[arg(short, long)]
    alpha: f64,
    #[arg(long, default_value = "periodic")]
    boundary: Boundary,
}

impl LatticeOpts {
    fn spec(&self) -> ghzsim::Result<LatticeSpec> {
        LatticeSpec::hypercubic(self.dim, self.l, self.boundary)
    }

    fn describe(&self) -> String {
        format!("d={} L={} alpha={} boundary={}", self.dim, self.l, self.alpha, self.boundary)
    }
}

#[derive(Args)]
struct ModelOpts {
    #[command(flatten)]
    lattice: LatticeOpts,
    /// Write the coupling matrix as CSV here.
    #[arg(long)]
    couplings: Option<PathBuf>,
}

#[derive(Args)]
struct EdOpts {
    #[command(flatten)]
    lattice: LatticeOpts,
    /// Pulse separation in units of 1/K.
    #[arg(short, long)]
    tau: f64,
    #[arg(short, long)]
    periods: usize,
    #[arg(long, default_value = "segment", value_parser = parse_form)]
    form: PeriodForm,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DtwaOpts {
    #[command(flatten)]
    lattice: LatticeOpts,
    #[arg(short, long)]
    tau: f64,
    #[arg(short, long)]
    periods: usize,
    #[arg(long, default_value_t = DEFAULT_TRAJECTORIES)]
    n_traj: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Resume from this checkpoint if present and save the final ensemble to it.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ZmOpts {
    #[command(flatten)]
    lattice: LatticeOpts,
    #[arg(short, long)]
    tau: f64,
    /// Override the lattice value of lambda.
    #[arg(long)]
    lambda: Option<f64>,
    /// End time; defaults to three estimated GHZ times.
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long, default_value_t = 600)]
    steps: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SpinwaveOpts {
    #[command(flatten)]
    lattice: LatticeOpts,
    #[arg(short, long, default_value_t = 0.0)]
    tau: f64,
    /// Comma-separated sizes for a finite-size study of the stability bound.
    #[arg(long, value_delimiter = ',')]
    scaling: Vec<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LindbladOpts {
    /// Number of ions in an open chain.
    #[arg(short, long)]
    n: usize,
    #[arg(short, long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 560.0)]
    k_hz: f64,
    #[arg(long, default_value_t = 0.18e-3)]
    tau_s: f64,
    /// `local` or `global`.
    #[arg(long, default_value = "local")]
    noise: NoiseKind,
    #[arg(long, default_value_t = 0.0)]
    rate_hz: f64,
    #[arg(long, default_value = "lab", value_parser = parse_frame)]
    frame: NoiseFrame,
    #[arg(short, long)]
    periods: usize,
    /// Stop once F_Q drops below this share of its running maximum.
    #[arg(long)]
    stop_fraction: Option<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepOpts {
    #[arg(short, long)]
    config: PathBuf,
    /// JSON-lines record store; existing records are reused.
    #[arg(long)]
    store: Option<PathBuf>,
    /// CSV of the records; defaults to the config's output path.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FitOpts {
    #[arg(short, long)]
    config: PathBuf,
    /// Override the config threshold.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    store: Option<PathBuf>,
    /// CSV of the ratio-vs-tau curves.
    #[arg(long)]
    curves: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FigureOpts {
    name: FigureName,
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    n_traj: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long, default_value = ".")]
    out_dir: PathBuf,
}

fn parse_form(s: &str) -> Result<PeriodForm, String> {
    match s {
        "segment" => Ok(PeriodForm::Segment),
        "pulsed" => Ok(PeriodForm::Pulsed),
        other => Err(format!("unknown period form `{other}`")),
    }
}

fn parse_frame(s: &str) -> Result<NoiseFrame, String> {
    match s {
        "lab" => Ok(NoiseFrame::Lab),
        "segment" => Ok(NoiseFrame::Segment),
        other => Err(format!("unknown noise frame `{other}`")),
    }
}

/// Writes `body` behind a `# <provenance>` line, to a file or stdout.
fn emit_csv(output: Option<&Path>, provenance: &str, body: impl FnOnce(&mut Vec<u8>) -> ghzsim::Result<()>) -> ghzsim::Result<()> {
    let mut buf = format!("# {provenance} version={VERSION_TAG}\n").into_bytes();
    body(&mut buf)?;
    write_out(output, &buf)
}

fn emit_json(output: Option<&Path>, value: &serde_json::Value) -> ghzsim::Result<()> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.push(b'\n');
    write_out(output, &buf)
}

fn write_out(output: Option<&Path>, bytes: &[u8]) -> ghzsim::Result<()> {
    match output {
        Some(path) => fs::write(path, bytes)?,
        None => io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn exponent_json(e: Exponent) -> serde_json::Value {
    match e {
        Exponent::Power(v) => json!(v),
        Exponent::Logarithmic => json!("log"),
    }
}

fn model(o: &ModelOpts) -> ghzsim::Result<()> {
    let spec = o.lattice.spec()?;
    let params = ModelParams::unit(o.lattice.alpha)?;
    let c = build_coupling_matrix(&spec, &params)?;
    if let Some(path) = &o.couplings {
        emit_csv(Some(path), &o.lattice.describe(), |w| c.write_csv(w))?;
    }
    let periodic = spec.boundary() == Boundary::Periodic;
    let summary = json!({
        "lattice": o.lattice.describe(),
        "N": spec.num_sites(),
        "lambda": lambda_coefficient(&spec, &params)?,
        "chi_coll": chi_collective(&spec, &params)?,
        "tau_crit": tau_crit_estimate(&spec, &params)?,
        "T0_squared": if periodic { Some(t0_squared(&spec, &params)?) } else { None },
        "tau_bound": if periodic { Some(tau_bound(&spec, &params)?.value) } else { None },
        "mu": exponent_json(mu_exponent(o.lattice.alpha, o.lattice.dim)?),
        "nu": nu_exponent(o.lattice.alpha, o.lattice.dim)?,
        "version": VERSION_TAG,
    });
    emit_json(None, &summary)
}

fn ed(o: &EdOpts) -> ghzsim::Result<()> {
    let spec = o.lattice.spec()?;
    let c = build_coupling_matrix(&spec, &ModelParams::unit(o.lattice.alpha)?)?;
    let energies = IsingEnergies::new(&c);
    let mut psi = PureState::initial_css(spec.num_sites())?;
    let mut series = ObservableSeries::default();
    series.push(ObservableRecord::measure(0.0, &psi))?;
    for p in 1..=o.periods {
        floquet_period(&mut psi, o.tau, o.form, &energies)?;
        series.push(ObservableRecord::measure(3.0 * o.tau * p as f64, &psi))?;
    }
    let prov = format!("engine=ed {} tau={} form={:?}", o.lattice.describe(), o.tau, o.form);
    emit_csv(o.output.as_deref(), &prov, |w| series.write_csv(w))
}

fn dtwa(o: &DtwaOpts) -> ghzsim::Result<()> {
    let spec = o.lattice.spec()?;
    let c = build_coupling_matrix(&spec, &ModelParams::unit(o.lattice.alpha)?)?;
    let mut ens = match &o.checkpoint {
        Some(path) if path.exists() => TrajectoryEnsemble::load(path)?,
        _ => TrajectoryEnsemble::sample_initial(spec.num_sites(), o.n_traj, o.seed)?,
    };
    let series = run_series(&mut ens, o.tau, o.periods, &c)?;
    if let Some(path) = &o.checkpoint {
        ens.save(path)?;
    }
    let prov = format!(
        "engine=dtwa {} tau={} n_traj={} seed={}",
        o.lattice.describe(),
        o.tau,
        ens.num_trajectories(),
        ens.seed()
    );
    emit_csv(o.output.as_deref(), &prov, |w| series.write_csv(w))
}

fn zm(o: &ZmOpts) -> ghzsim::Result<()> {
    let spec = o.lattice.spec()?;
    let n = spec.num_sites();
    let lambda = match o.lambda {
        Some(l) => l,
        None => lambda_coefficient(&spec, &ModelParams::unit(o.lattice.alpha)?)?,
    };
    let t_max = match o.t_max {
        Some(t) => t,
        None => 3.0 * tc_estimate(n, lambda, 1.0, o.tau)?,
    };
    if o.steps == 0 {
        return Err(Error::Config("steps must be positive".into()));
    }
    let times: Vec<f64> = (0..=o.steps).map(|i| t_max * i as f64 / o.steps as f64).collect();
    let series = ObservableSeries {
        records: zm_series(n, lambda, 1.0, o.tau, &times)?,
    };
    let prov = format!("engine=zm {} tau={} lambda={lambda}", o.lattice.describe(), o.tau);
    emit_csv(o.output.as_deref(), &prov, |w| series.write_csv(w))
}

fn spinwave(o: &SpinwaveOpts) -> ghzsim::Result<()> {
    if !o.scaling.is_empty() {
        let study = bound_scaling(o.lattice.dim, o.lattice.alpha, &o.scaling)?;
        let prov = format!("tau_bound scaling d={} alpha={}", o.lattice.dim, o.lattice.alpha);
        return emit_csv(o.output.as_deref(), &prov, |w| study.write_csv(w));
    }
    let spec = o.lattice.spec()?;
    let spectrum = build_spectrum(&spec, &ModelParams::unit(o.lattice.alpha)?, o.tau)?;
    let prov = format!("spinwave {} tau={} unstable={}", o.lattice.describe(), o.tau, spectrum.num_unstable());
    emit_csv(o.output.as_deref(), &prov, |w| spectrum.write_csv(w))
}

fn lindblad(o: &LindbladOpts) -> ghzsim::Result<()> {
    let units = PhysicalUnits::new(o.k_hz, o.tau_s)?;
    let spec = LatticeSpec::chain(o.n, Boundary::Open)?;
    let c = physical_couplings(&spec, &units, o.alpha)?;
    let mut cfg = OpenRunConfig::new(units, NoiseSpec::new(o.noise, o.rate_hz)?, o.periods);
    cfg.frame = o.frame;
    cfg.stop_fraction = o.stop_fraction;
    let run = run_open(&c, &cfg)?;
    let prov = format!(
        "engine=lindblad N={} alpha={} K_hz={} tau_s={} noise={} rate_hz={} frame={:?} max_FQ={} t_at_max_s={}",
        o.n, o.alpha, o.k_hz, o.tau_s, o.noise, o.rate_hz, o.frame, run.max_fq, run.t_at_max_s
    );
    emit_csv(o.output.as_deref(), &prov, |w| {
        writeln!(w, "t_s,FQ")?;
        for (t, f) in run.times_s.iter().zip(&run.fq) {
            writeln!(w, "{t:.12e},{f:.12e}")?;
        }
        Ok(())
    })
}

fn open_store(path: Option<&Path>) -> ghzsim::Result<RecordStore> {
    match path {
        Some(p) => RecordStore::open(p),
        None => Ok(RecordStore::in_memory()),
    }
}

fn sweep(o: &SweepOpts) -> ghzsim::Result<()> {
    let cfg = SweepConfig::load(&o.config)?;
    let mut store = open_store(o.store.as_deref())?;
    let records = run_sweep(&cfg, &mut store)?;
    let output = o.output.as_deref().or(cfg.output.as_deref());
    let prov = format!("sweep config={} seed={}", o.config.display(), cfg.seed);
    emit_csv(output, &prov, |w| write_records_csv(&records, w))
}

fn fit(o: &FitOpts) -> ghzsim::Result<()> {
    let mut cfg = SweepConfig::load(&o.config)?;
    if let Some(t) = o.threshold {
        cfg.threshold = t;
        cfg.validate()?;
    }
    let mut store = open_store(o.store.as_deref())?;
    let mut fits = Vec::new();
    let mut missing = Vec::new();
    let mut all = Vec::new();
    for &alpha in &cfg.alphas {
        let searches = cfg
            .sizes
            .iter()
            .map(|&l| find_tau_s(&cfg, l, alpha, cfg.threshold, &mut store))
            .collect::<ghzsim::Result<Vec<_>>>()?;
        for s in &searches {
            if matches!(s.search.outcome, TauSOutcome::NotFound) {
                missing.push(format!("L={} alpha={}", s.l, s.alpha));
            }
        }
        match fit_exponents(&searches, cfg.threshold) {
            Ok(f) => fits.push(json!({
                "alpha": alpha,
                "mu": f.mu_value(),
                "mu_err": f.mu.slope_err(),
                "nu": f.nu_value(),
                "mu_fit": f.mu,
                "nu_fit": f.nu,
            })),
            Err(e) => fits.push(json!({ "alpha": alpha, "error": e.to_string() })),
        }
        all.extend(searches);
    }
    if let Some(path) = &o.curves {
        let prov = format!("threshold curves config={} threshold={}", o.config.display(), cfg.threshold);
        emit_csv(Some(path), &prov, |w| write_curve_csv(&all, w))?;
    }
    let tau_s: Vec<_> = all
        .iter()
        .map(|s| json!({ "L": s.l, "alpha": s.alpha, "tau_s": s.search.tau_s(), "t_tot": s.t_tot(), "monotone": s.search.monotone }))
        .collect();
    emit_json(
        o.output.as_deref(),
        &json!({
            "threshold": cfg.threshold,
            "dimension": cfg.dimension,
            "fit_window": "smallest L excluded",
            "tau_s": tau_s,
            "fits": fits,
            "version": VERSION_TAG,
        }),
    )?;
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::NotFound(format!("threshold {} never reached for {}", cfg.threshold, missing.join(", "))))
    }
}

fn figure(o: &FigureOpts) -> ghzsim::Result<()> {
    let mut opts = if o.quick { FigureOptions::quick() } else { FigureOptions::default() };
    if let Some(n) = o.n_traj {
        opts.n_traj = n;
    }
    opts.seed = o.seed;
    fs::create_dir_all(&o.out_dir)?;
    let bundle = reproduce_figure(o.name, &opts)?;
    for path in bundle.write_to(&o.out_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) => 2,
        Error::Capacity { .. } => 3,
        Error::NotFound(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Model(o) => model(o),
        Command::Ed(o) => ed(o),
        Command::Dtwa(o) => dtwa(o),
        Command::Zm(o) => zm(o),
        Command::Spinwave(o) => spinwave(o),
        Command::Lindblad(o) => lindblad(o),
        Command::Sweep(o) => sweep(o),
        Command::Fit(o) => fit(o),
        Command::Figure(o) => figure(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
