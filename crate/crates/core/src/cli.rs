//! Command-line front end. Exit codes: 0 ok, 1 input error, 2 singular or
//! degenerate model, 3 solver failure.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::fim::{state_fim_and_crlb, FimError, FimOptions, Metric, CovarianceWindow};
use crate::mc::{
    crlb_sweep, resolve_geometry, rmse_point, ExperimentConfig, GeometrySpec, McError, SweepAxis, SweepConfig,
};
use crate::placement::{omega_separation_interval, sample_restart_optimize, PlacementError, SamplerConfig};
use crate::report::{self, MetricsDoc, PlacementDoc};
use crate::scenario::{load_scenario, scenario_to_json, RadarConfig, Scenario};
use crate::sdp::place_single_target;
use crate::signal::{covariance, mean_response, sample_measurement};

#[derive(Debug, Parser)]
#[command(name = "mimo-placement", version, about = "CRLB tools and antenna placement for collocated MIMO radar")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fisher information, CRLB and a sampled measurement for a scenario.
    Crlb(CrlbArgs),
    /// Optimize the antenna geometry.
    Place {
        #[command(subcommand)]
        mode: PlaceMode,
    },
    /// CRLB metrics along one scenario axis.
    Sweep(SweepArgs),
    /// Monte-Carlo localization RMSE against the CRLB.
    Simulate(SimulateArgs),
    /// Interval of per-path phase differences between two DOAs.
    Bound(BoundArgs),
}

#[derive(Debug, Subcommand)]
pub enum PlaceMode {
    /// Convex relaxation for exactly one target.
    Single(PlaceArgs),
    /// Restart sampling around local CRLB minima.
    Multi(PlaceArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the scenario's spill-only bin setting.
    #[arg(long)]
    pub include_bin0: Option<bool>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SamplerArgs {
    #[arg(long, value_enum, default_value = "trace")]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 50)]
    pub restarts: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    /// Per-coordinate restart perturbation std (m); defaults to λ/2.
    #[arg(long)]
    pub sampler_std: Option<f64>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Trace,
    Det,
    Maxeig,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Trace => Metric::Trace,
            MetricArg::Det => Metric::Det,
            MetricArg::Maxeig => Metric::MaxEig,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowArg {
    ThreeCell,
    Full,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CrlbArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "three-cell")]
    pub window: WindowArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlaceArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// `start:stop:count`, endpoints included.
    #[arg(long)]
    pub range: String,
    /// Comma-separated: ula, optimal, random, file:<scenario.json>.
    #[arg(long, default_value = "ula,optimal")]
    pub geometries: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// SNR grid in dB as `start:stop:count`.
    #[arg(long, default_value = "0:30:7")]
    pub snr: String,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value = "ula,optimal,random")]
    pub geometries: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundArgs {
    /// DOA differences (rad) as `start:stop:count`.
    #[arg(long)]
    pub dtheta: String,
    /// Take λ, d and e from this scenario instead of the defaults.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Singular(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Singular(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("csv error: {e}"))
    }
}

impl From<FimError> for CliError {
    fn from(e: FimError) -> Self {
        match e {
            FimError::SingularFim { .. } | FimError::ZeroRange { .. } => CliError::Singular(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<PlacementError> for CliError {
    fn from(e: PlacementError) -> Self {
        match e {
            PlacementError::Shape(_) | PlacementError::InfeasibleBounds { .. } => CliError::Input(e.to_string()),
            PlacementError::Fim(f) => f.into(),
            other => CliError::Solver(format!("solver failed: {other}")),
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::Fim(f) => f.into(),
            McError::Placement(p) => p.into(),
            McError::Signal(s) => CliError::Singular(s.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

/// Record of one run, written before the work starts and rewritten at the
/// end with the wall-clock time and final status.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub scenario: Option<PathBuf>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_s: Option<f64>,
    pub status: String,
}

struct Run {
    manifest: RunManifest,
    dir: PathBuf,
    started: Instant,
}

impl Run {
    fn start<C: Serialize>(subcommand: &str, scenario: Option<&Path>, config: &C, seed: u64, dir: &Path, outputs: &[&str]) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        let mut all: Vec<PathBuf> = outputs.iter().map(|o| dir.join(o)).collect();
        all.push(dir.join("manifest.json"));
        let run = Self {
            manifest: RunManifest {
                subcommand: subcommand.into(),
                scenario: scenario.map(Path::to_path_buf),
                config: serde_json::to_value(config).map_err(|e| CliError::Input(e.to_string()))?,
                seed,
                version: env!("CARGO_PKG_VERSION").into(),
                outputs: all,
                wall_clock_s: None,
                status: "running".into(),
            },
            dir: dir.to_path_buf(),
            started: Instant::now(),
        };
        run.write_manifest()?;
        Ok(run)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    fn write_manifest(&self) -> Result<(), CliError> {
        report::write_json(self.create("manifest.json")?, &self.manifest)?;
        Ok(())
    }

    fn finish(mut self, status: &str) -> Result<(), CliError> {
        self.manifest.wall_clock_s = Some(self.started.elapsed().as_secs_f64());
        self.manifest.status = status.into();
        self.write_manifest()
    }
}

fn read_scenario(path: &Path, include_bin0: Option<bool>) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut s = load_scenario(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if let Some(b) = include_bin0 {
        s.radar.include_bin0 = b;
    }
    Ok(s)
}

/// Parse `start:stop:count` into `count` evenly spaced values.
pub fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Input(format!("range `{text}` must look like start:stop:count"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

/// Parse a geometry list such as `ula,optimal,file:best.json`.
pub fn parse_geometries(text: &str) -> Result<Vec<GeometrySpec>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "ula" => Ok(GeometrySpec::Ula),
            "optimal" => Ok(GeometrySpec::Optimal),
            "random" => Ok(GeometrySpec::Random),
            other => match other.strip_prefix("file:") {
                Some(path) => {
                    let s = read_scenario(Path::new(path), None)?;
                    Ok(GeometrySpec::Fixed { name: other.to_string(), geometry: s.array })
                }
                None => Err(CliError::Input(format!("unknown geometry `{other}`"))),
            },
        })
        .collect()
}

fn sampler_config(s: &Scenario, args: &SamplerArgs, seed: u64) -> Result<SamplerConfig, CliError> {
    if args.restarts == 0 || args.patience == 0 {
        return Err(CliError::Input("--restarts and --patience must be at least 1".into()));
    }
    let mut cfg = SamplerConfig::for_wavelength(s.radar.wavelength, seed);
    cfg.restarts = args.restarts;
    cfg.patience = args.patience;
    cfg.metric = args.metric.into();
    if let Some(std) = args.sampler_std {
        if !(std > 0.0) {
            return Err(CliError::Input("--sampler-std must be positive".into()));
        }
        cfg = cfg.with_std(std);
    }
    Ok(cfg)
}

fn run_crlb(args: &CrlbArgs) -> Result<(), CliError> {
    let s = read_scenario(&args.common.scenario, args.common.include_bin0)?;
    let run = Run::start(
        "crlb",
        Some(&args.common.scenario),
        args,
        args.common.seed,
        &args.common.out,
        &["fim.csv", "crlb.csv", "metrics.json", "measurement.csv", "mean.csv", "covariance.csv", "scenario.json"],
    )?;
    let window = match args.window {
        WindowArg::ThreeCell => CovarianceWindow::ThreeCell,
        WindowArg::Full => CovarianceWindow::Full,
    };
    let rep = match state_fim_and_crlb(&s, FimOptions { window, ridge: false }) {
        Ok(r) => r,
        Err(e) => {
            run.finish("singular")?;
            return Err(e.into());
        }
    };
    report::write_matrix_csv(run.create("fim.csv")?, &rep.state_fim)?;
    report::write_matrix_csv(run.create("crlb.csv")?, &rep.crlb)?;
    report::write_json(run.create("metrics.json")?, &MetricsDoc::from(&rep))?;
    report::write_measurement_csv(run.create("measurement.csv")?, &sample_measurement(&s, args.common.seed))?;
    report::write_measurement_csv(run.create("mean.csv")?, &mean_response(&s))?;
    report::write_covariance_csv(run.create("covariance.csv")?, &covariance(&s))?;
    fs::write(run.path("scenario.json"), scenario_to_json(&s))?;
    run.finish("ok")
}

fn run_place(args: &PlaceArgs, single: bool) -> Result<(), CliError> {
    let s = read_scenario(&args.common.scenario, args.common.include_bin0)?;
    let seed = args.common.seed;
    if single && s.targets().len() != 1 {
        return Err(CliError::Input(format!(
            "`place single` needs exactly one target, the scenario has {}; use `place multi`",
            s.targets().len()
        )));
    }
    let cfg = sampler_config(&s, &args.sampler, seed)?;
    let name = if single { "place single" } else { "place multi" };
    #[derive(Serialize)]
    struct Resolved<'a> {
        args: &'a PlaceArgs,
        sampler: &'a SamplerConfig,
        restart_std_m: f64,
    }
    let resolved = Resolved { args, sampler: &cfg, restart_std_m: cfg.q[(0, 0)].sqrt() };
    let outputs: &[&str] = if single {
        &["placement.json", "geometry.json"]
    } else {
        &["placement.json", "geometry.json", "trace.csv"]
    };
    let run = Run::start(name, Some(&args.common.scenario), &resolved, seed, &args.common.out, outputs)?;
    let outcome = if single {
        place_single_target(&s.targets()[0], &s.array, &s.constraints, 1e-8, seed).map(|sol| (sol, None))
    } else {
        sample_restart_optimize(&s, &cfg).map(|(sol, tr)| (sol, Some(tr)))
    };
    let (sol, trace) = match outcome {
        Ok(v) => v,
        Err(e) => {
            let err: CliError = e.into();
            run.finish(&format!("failed: {err}"))?;
            return Err(err);
        }
    };
    report::write_json(run.create("placement.json")?, &PlacementDoc::new(&s, &sol))?;
    fs::write(run.path("geometry.json"), scenario_to_json(&s.with_array(sol.geometry.clone())))?;
    if let Some(tr) = trace {
        report::write_trace_csv(run.create("trace.csv")?, &tr)?;
    }
    run.finish("ok")
}

fn interrupt_flag() -> Arc<AtomicBool> {
    let flag = Arc::new(AtomicBool::new(false));
    let f = flag.clone();
    // A second handler cannot be installed; runs inside one process share
    // the first flag's semantics, which is fine for a CLI.
    let _ = ctrlc::set_handler(move || f.store(true, Ordering::SeqCst));
    flag
}

fn run_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let s = read_scenario(&args.common.scenario, args.common.include_bin0)?;
    let values = parse_range(&args.range)?;
    let geometries = parse_geometries(&args.geometries)?;
    match args.axis {
        SweepAxis::Dtheta if s.targets().is_empty() => {
            return Err(CliError::Input("the dtheta axis needs at least one target".into()))
        }
        SweepAxis::TargetCount if s.targets().is_empty() => {
            return Err(CliError::Input("the target_count axis needs a template target".into()))
        }
        _ => {}
    }
    let cfg = SweepConfig { sampler: sampler_config(&s, &args.sampler, args.common.seed)?, seed: args.common.seed };
    let run = Run::start("sweep", Some(&args.common.scenario), args, args.common.seed, &args.common.out, &["sweep.csv"])?;
    let stop = interrupt_flag();
    let mut w = csv::Writer::from_writer(run.create("sweep.csv")?);
    w.write_record(report::SWEEP_HEADER)?;
    for &v in &values {
        if stop.load(Ordering::SeqCst) {
            w.write_record(["truncated", "", "", "", "", ""])?;
            w.flush()?;
            run.finish("truncated")?;
            return Ok(());
        }
        let rows = crlb_sweep(&s, args.axis, &[v], &geometries, &cfg)?;
        report::write_sweep_rows(&mut w, &rows)?;
        w.flush()?;
    }
    run.finish("ok")
}

fn run_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let s = read_scenario(&args.common.scenario, args.common.include_bin0)?;
    if s.targets().is_empty() {
        return Err(CliError::Input("simulate needs at least one target".into()));
    }
    let snr = parse_range(&args.snr)?;
    let geometries = parse_geometries(&args.geometries)?;
    if args.trials == 0 {
        return Err(CliError::Input("--trials must be at least 1".into()));
    }
    let cfg = SweepConfig { sampler: sampler_config(&s, &args.sampler, args.common.seed)?, seed: args.common.seed };
    let ecfg = ExperimentConfig::new(args.trials, args.common.seed);
    let run = Run::start("simulate", Some(&args.common.scenario), args, args.common.seed, &args.common.out, &["rmse.csv"])?;
    let stop = interrupt_flag();
    let mut w = csv::Writer::from_writer(run.create("rmse.csv")?);
    w.write_record(report::RMSE_HEADER)?;
    for spec in &geometries {
        let g = resolve_geometry(&s, spec, &cfg)?;
        let sg = s.with_array(g);
        for (k, &v) in snr.iter().enumerate() {
            if stop.load(Ordering::SeqCst) {
                w.write_record(["truncated", "", "", "", "", "", ""])?;
                w.flush()?;
                run.finish("truncated")?;
                return Ok(());
            }
            let point = rmse_point(&sg, k, v, &ecfg)?;
            report::write_rmse_rows(&mut w, &spec.name(), std::slice::from_ref(&point))?;
            w.flush()?;
        }
    }
    run.finish("ok")
}

/// Rows `(Δθ, lo, hi)` of the phase-difference interval.
pub fn bound_table(values: &[f64], d: f64, e: f64, wavelength: f64) -> Vec<(f64, f64, f64)> {
    values
        .iter()
        .map(|&dt| {
            let (lo, hi) = omega_separation_interval(dt, d, e, wavelength);
            (dt, lo, hi)
        })
        .collect()
}

fn run_bound(args: &BoundArgs) -> Result<(), CliError> {
    let values = parse_range(&args.dtheta)?;
    let (lambda, d, e) = match &args.scenario {
        Some(p) => {
            let s = read_scenario(p, None)?;
            (s.radar.wavelength, s.constraints.d, s.constraints.e)
        }
        None => {
            let lambda = RadarConfig::standard(1).wavelength;
            (lambda, lambda, 2.0 * lambda)
        }
    };
    if !(d > 0.0 && d <= e) {
        return Err(CliError::Input(format!("need 0 < d <= e, got d = {d}, e = {e}")));
    }
    let run = Run::start("bound", args.scenario.as_deref(), args, args.seed, &args.out, &["bound.csv"])?;
    let mut w = csv::Writer::from_writer(run.create("bound.csv")?);
    w.write_record(report::BOUND_HEADER)?;
    report::write_bound_rows(&mut w, &bound_table(&values, d, e, lambda))?;
    w.flush()?;
    run.finish("ok")
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Crlb(a) => run_crlb(a),
        Command::Place { mode: PlaceMode::Single(a) } => run_place(a, true),
        Command::Place { mode: PlaceMode::Multi(a) } => run_place(a, false),
        Command::Sweep(a) => run_sweep(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Bound(a) => run_bound(a),
    }
}

/// Parse arguments, run, and map the outcome to an exit code. Diagnostics
/// go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_include_endpoints() {
        assert_eq!(parse_range("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_range("2:9:1").unwrap(), vec![2.0]);
        assert!(parse_range("0:1").is_err());
        assert!(parse_range("0:1:0").is_err());
    }

    #[test]
    fn geometry_lists() {
        let g = parse_geometries("ula, optimal,random").unwrap();
        assert_eq!(g, vec![GeometrySpec::Ula, GeometrySpec::Optimal, GeometrySpec::Random]);
        assert!(parse_geometries("hexagon").is_err());
    }

    #[test]
    fn bound_rows_match_interval() {
        let rows = bound_table(&parse_range("0:3.1416:50").unwrap(), 0.3, 0.6, 0.3);
        assert_eq!(rows.len(), 50);
        assert_eq!(rows[0], (0.0, 0.0, 0.0));
    }
}
