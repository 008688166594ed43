//! Command-line front end: `rates`, `design`, `simulate` and `compare`.
//!
//! Exit codes: 0 ok, 2 bad input, 3 failure during computation, 4 inadmissible targets.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{uniform_grid, Dispersion};
use crate::error::Error;
use crate::io::{read_csv, read_grid, real_payload, write_csv, write_grid, Axis, GridSidecar};
use crate::kinetic::{
    energy_fractions, ConstantInitial, FractionOptions, InitialWigner, KineticControl, KineticModel, PacketInitial, ZeroInitial,
};
use crate::rates::{rate_grid, rates_uncontrolled, RateControl};
use crate::sim::{run_ensemble, Control, FeedbackKernel, InitialMeasure, Observers, Pulse, SimConfig, WavePacket};
use crate::spectral::LimitMethod;
use crate::synthesis::{
    apply_cutoff, build_frequency_design, check_h6, check_l1, check_targets, cutoff_sweep, h6_probes, half_line_transforms,
    synthesize_f, AdmissibilityReport, DesignReport, SynthesisMethod, TargetRates, TimeGrid,
};
use crate::wigner::{PairingStat, TestFunction, WignerGrid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_INADMISSIBLE: i32 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(m: impl Into<String>) -> Self {
        Failure { code: EXIT_INPUT, message: m.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::DomainError(_) | Error::Format(_) | Error::HistoryUnderflow { .. } | Error::UnsupportedMeasure => {
                EXIT_INPUT
            }
            Error::NotAdmissible(_) => EXIT_INADMISSIBLE,
            _ => EXIT_RUNTIME,
        };
        Failure { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Parser, Debug)]
#[command(name = "thermochain", version, about = "Thermostatted harmonic chain: rates, control design, simulation", args_override_self = true)]
pub struct Cli {
    /// key=value file supplying defaults for the subcommand's flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Absorption, transmission and reflection rates on a k grid
    Rates(RatesArgs),
    /// Synthesize a feedback kernel for target rates
    Design(DesignArgs),
    /// Monte-Carlo ensemble of the microscopic chain
    Simulate(SimulateArgs),
    /// Compare a simulated run with the closed-form kinetic limit
    Compare(CompareArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ChainArgs {
    #[arg(long)]
    pub omega0: f64,
    #[arg(long)]
    pub gamma: f64,
}

impl ChainArgs {
    fn dispersion(&self) -> CliResult<Dispersion> {
        Ok(Dispersion::new(self.omega0, self.gamma)?)
    }
}

#[derive(Args, Debug)]
pub struct RatesArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.05)]
    pub k_min: f64,
    #[arg(long, default_value_t = 0.45)]
    pub k_max: f64,
    /// Constant feedback transform `re,im` instead of plain friction
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub fhat: Option<Vec<f64>>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodArg {
    BandFit,
    Cosine,
}

#[derive(Args, Debug)]
pub struct DesignArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    /// CSV with columns k, r_a, r_t, r_r
    #[arg(long)]
    pub targets: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    pub sweep: Vec<usize>,
    #[arg(long, value_enum, default_value_t = MethodArg::BandFit)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 32)]
    pub samples_per_period: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub ridge: f64,
    /// Band-edge margin of the round-trip error window
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialArg {
    Zero,
    Thermal,
    Packet,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 512)]
    pub n_modes: usize,
    /// Defaults to 1/n_modes
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    #[arg(long, default_value_t = 100)]
    pub realizations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Macroscopic horizon
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, value_enum, default_value_t = InitialArg::Thermal)]
    pub initial: InitialArg,
    /// Temperature of thermal initial data (defaults to --temperature)
    #[arg(long)]
    pub init_temperature: Option<f64>,
    #[arg(long, default_value_t = -0.125, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long, default_value_t = 0.035)]
    pub sigma_x: f64,
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    pub k0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    /// Modes this close to a band edge start empty
    #[arg(long, default_value_t = 0.02)]
    pub margin: f64,
    /// Raised-cosine boundary pulse of this microscopic width
    #[arg(long, conflicts_with = "control")]
    pub pulse_width: Option<f64>,
    /// control.csv from `design`; its F_N column drives the feedback
    #[arg(long)]
    pub control: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub snapshots: Vec<f64>,
    #[arg(long, default_value_t = 64)]
    pub energy_every: u64,
    /// Carrier of the test-function battery (defaults to --k0)
    #[arg(long, allow_negative_numbers = true)]
    pub battery_k: Option<f64>,
    #[arg(long, default_value_t = 50_000_000)]
    pub step_cap: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Output directory of a `simulate` run
    #[arg(long)]
    pub run: PathBuf,
    /// Snapshot time (defaults to the last one)
    #[arg(long)]
    pub time: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Everything `compare` needs to rebuild the matching kinetic limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub config: SimConfig,
    pub initial: InitialArg,
    pub measure: InitialMeasure,
    pub horizon: f64,
    pub battery: Vec<TestFunction>,
    pub snapshots: Vec<SnapshotEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub t: f64,
    pub sidecar: String,
}

/// Splices `key=value` lines from `--config` in front of the command-line flags,
/// so flags given on the command line win.
fn expand_config(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let pos = args.iter().position(|a| a == "--config");
    let path = match pos {
        Some(p) => args.get(p + 1).cloned().ok_or_else(|| Failure::input("--config needs a path"))?,
        None => match args.iter().find_map(|a| a.to_str().and_then(|s| s.strip_prefix("--config=")).map(OsString::from)) {
            Some(p) => p,
            None => return Ok(args),
        },
    };
    let text = fs::read_to_string(&path).map_err(|e| Failure::input(format!("{}: {e}", Path::new(&path).display())))?;
    let mut injected = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Failure::input(format!("config line {}: expected key=value", n + 1)))?;
        injected.push(OsString::from(format!("--{}", k.trim().replace('_', "-"))));
        injected.push(OsString::from(v.trim()));
    }
    let sub = args
        .iter()
        .position(|a| ["rates", "design", "simulate", "compare"].iter().any(|c| a == c))
        .ok_or_else(|| Failure::input("no subcommand given"))?;
    let mut out: Vec<OsString> = args[..=sub].to_vec();
    out.extend(injected);
    out.extend(args[sub + 1..].iter().cloned());
    Ok(out)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return f.code;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Rates(a) => cmd_rates(a),
        Command::Design(a) => cmd_design(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn ensure_dir(p: &Path) -> CliResult<()> {
    fs::create_dir_all(p).map_err(|e| Failure { code: EXIT_RUNTIME, message: format!("{}: {e}", p.display()) })
}

fn runtime<T>(r: crate::Result<T>) -> CliResult<T> {
    r.map_err(|e| Failure { code: EXIT_RUNTIME, message: e.to_string() })
}

pub fn cmd_rates(a: &RatesArgs) -> CliResult<i32> {
    let disp = a.chain.dispersion()?;
    if a.grid == 0 || !(a.k_min > 0.0 && a.k_min <= a.k_max && a.k_max < 0.5) {
        return Err(Failure::input("need grid >= 1 and 0 < k_min <= k_max < 1/2"));
    }
    if !(a.nu >= 0.0 && a.nu.is_finite()) {
        return Err(Failure::input(format!("nu must be finite and >= 0, got {}", a.nu)));
    }
    let ks = uniform_grid(a.k_min, a.k_max, a.grid);
    let rows = match &a.fhat {
        None => rate_grid(&disp, &RateControl::Uncontrolled { nu: a.nu }, &ks),
        Some(v) => {
            if v.len() != 2 {
                return Err(Failure::input("--fhat takes re,im"));
            }
            let f = Complex64::new(v[0], v[1]);
            if !(f.re < 0.0) {
                return Err(Failure::input(format!("feedback transform needs Re < 0, got {f}")));
            }
            let g = move |_: f64| f;
            rate_grid(&disp, &RateControl::Feedback(&g), &ks)
        }
    };
    let rows = rows.into_iter().map(|r| r.map(|r| vec![r.k, r.r_a, r.r_t, r.r_r, r.sum()])).collect::<crate::Result<Vec<_>>>()?;
    ensure_dir(&a.out)?;
    runtime(write_csv(&a.out.join("rates.csv"), "rates", &["k", "r_a", "r_t", "r_r", "sum"], &rows))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct DesignSummary<'a> {
    admissible: bool,
    failed: Vec<&'static str>,
    checks: &'a AdmissibilityReport,
    design: Option<&'a DesignReport>,
    limit_reading: Option<String>,
    method: String,
    sweep: Vec<SweepRow>,
    message: Option<String>,
}

#[derive(Debug, Serialize)]
struct SweepRow {
    n: usize,
    error: f64,
}

fn design_summary<'a>(
    report: &'a AdmissibilityReport,
    design: Option<&'a DesignReport>,
    sweep: Vec<SweepRow>,
    message: Option<String>,
    method: &str,
) -> DesignSummary<'a> {
    DesignSummary {
        admissible: report.admissible() && report.l1.passed,
        failed: report.failed_checks(),
        checks: report,
        design,
        limit_reading: design.map(|_| format!("{:?}", LimitMethod::default())),
        method: method.to_string(),
        sweep,
        message,
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> CliResult<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Failure { code: EXIT_RUNTIME, message: e.to_string() })?;
    fs::write(path, s + "\n").map_err(|e| Failure { code: EXIT_RUNTIME, message: e.to_string() })
}

fn read_targets(path: &Path) -> CliResult<TargetRates> {
    let t = read_csv(path, "targets", false).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let col = |n: &str| t.column(n).map_err(|e| Failure::input(e.to_string()));
    let (k, r_a, r_t, r_r) = (col("k")?, col("r_a")?, col("r_t")?, col("r_r")?);
    let c1 = r_a.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(TargetRates::new(k, r_a, r_t, r_r, c1)?)
}

pub fn cmd_design(a: &DesignArgs) -> CliResult<i32> {
    let disp = a.chain.dispersion()?;
    let targets = read_targets(&a.targets)?;
    if a.sweep.is_empty() || a.sweep.contains(&0) || a.samples_per_period < 20 || !(a.margin >= 0.0 && a.margin < 0.25) {
        return Err(Failure::input("need a non-empty sweep of positive N, samples_per_period >= 20 and 0 <= margin < 1/4"));
    }
    ensure_dir(&a.out)?;
    let mut report = check_targets(&targets);
    let method_name = format!("{:?}", a.method);
    let summary = |r: &AdmissibilityReport, d: Option<&DesignReport>, sweep: Vec<SweepRow>, msg: Option<String>| {
        serde_json::to_value(design_summary(r, d, sweep, msg, &method_name)).expect("summary serializes")
    };
    if !report.admissible() {
        write_json(&a.out.join("admissibility.json"), &summary(&report, None, vec![], None))?;
        eprintln!("targets are not admissible: {:?}", report.failed_checks());
        return Ok(EXIT_INADMISSIBLE);
    }
    let design = match build_frequency_design(&targets, &disp) {
        Ok(d) => d,
        Err(e @ (Error::NotAdmissible(_) | Error::DegenerateTh { .. })) => {
            write_json(&a.out.join("admissibility.json"), &summary(&report, None, vec![], Some(e.to_string())))?;
            eprintln!("design failed: {e}");
            return Ok(EXIT_INADMISSIBLE);
        }
        Err(e) => return Err(e.into()),
    };
    let n_max = *a.sweep.iter().max().unwrap();
    let grid = TimeGrid::for_horizon(&disp, n_max, a.samples_per_period)?;
    let method = match a.method {
        MethodArg::BandFit => {
            let mut ladder = a.sweep.clone();
            ladder.sort_unstable();
            ladder.dedup();
            SynthesisMethod::BandFit { ladder, ridge: a.ridge }
        }
        MethodArg::Cosine => SynthesisMethod::CosineInversion,
    };
    let control = runtime(synthesize_f(&design, grid, &method))?;
    report.h6 = Some(check_h6(&design, &h6_probes(grid.t_max())));
    let sweep = runtime(cutoff_sweep(&control, &targets, &disp, &a.sweep, a.margin))?;
    let last = runtime(apply_cutoff(&control, n_max))?;
    report.l1 = check_l1(&last.k_grid, &last.fhat, a.margin);

    let rows: Vec<SweepRow> = sweep.iter().map(|s| SweepRow { n: s.n, error: s.error }).collect();
    write_json(&a.out.join("admissibility.json"), &summary(&report, Some(&design.report), rows, None))?;

    let design_rows: Vec<Vec<f64>> = design
        .points
        .iter()
        .map(|p| vec![p.k, p.re, p.im, p.ft.re, p.ft.im, p.th.re, p.th.im, p.fbar.re, p.fbar.im])
        .collect();
    runtime(write_csv(
        &a.out.join("design.csv"),
        "design",
        &["k", "RE", "IM", "FT_re", "FT_im", "TH_re", "TH_im", "Fbar_re", "Fbar_im"],
        &design_rows,
    ))?;
    let control_rows: Vec<Vec<f64>> = (0..grid.len).map(|i| vec![grid.t(i), control.f[i], last.f_n[i]]).collect();
    runtime(write_csv(&a.out.join("control.csv"), "control", &["t", "F", "F_N"], &control_rows))?;
    let mut rec_rows = Vec::new();
    for s in &sweep {
        for (i, r) in s.recovered.iter().enumerate() {
            let k = targets.k_grid[i];
            let (_, tt, tr) = targets.at(k);
            let (ra, rt, rr) = r.as_ref().map_or((f64::NAN, f64::NAN, f64::NAN), |r| (r.r_a, r.r_t, r.r_r));
            rec_rows.push(vec![s.n as f64, k, ra, rt, rr, tt, tr, s.error]);
        }
    }
    runtime(write_csv(
        &a.out.join("recovered_rates.csv"),
        "recovered_rates",
        &["N", "k", "r_a", "r_t", "r_r", "target_t", "target_r", "error_N"],
        &rec_rows,
    ))?;
    let ok = report.admissible() && report.l1.passed;
    Ok(if ok { EXIT_OK } else { EXIT_INADMISSIBLE })
}

fn read_control_kernel(path: &Path, dt: f64) -> CliResult<FeedbackKernel> {
    let t = read_csv(path, "control", true).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let times = t.column("t").map_err(|e| Failure::input(e.to_string()))?;
    let f = t.column("F_N").map_err(|e| Failure::input(e.to_string()))?;
    Ok(FeedbackKernel::resample(&times, &f, dt)?)
}

fn snapshot_stem(t: f64) -> String {
    format!("wigner_t{t:.4}")
}

fn write_wigner(dir: &Path, g: &WignerGrid) -> CliResult<String> {
    let stem = snapshot_stem(g.t);
    let xi_file = format!("{stem}.bin");
    runtime(write_grid(&dir.join(&xi_file), g.rows(), g.cols(), g.eps, g.t, &g.to_bytes()))?;
    let base = GridSidecar {
        schema: "grid/v1".into(),
        kind: "wigner_xi".into(),
        data_file: xi_file,
        eps: g.eps,
        t: g.t,
        rows: Axis::of("xi", &g.xi),
        cols: Axis::of("k", &g.k),
        realizations: Some(g.count),
        atom_weight: vec![],
        atom_position: vec![],
        pairings: g.pairings.clone(),
    };
    let sidecar = format!("{stem}.json");
    runtime(base.write(&dir.join(&sidecar)))?;

    let se_file = format!("{stem}_stderr.bin");
    runtime(write_grid(&dir.join(&se_file), g.rows(), g.cols(), g.eps, g.t, &real_payload(&g.stderr)))?;
    let se = GridSidecar { kind: "wigner_stderr".into(), data_file: se_file, pairings: vec![], ..base.clone() };
    runtime(se.write(&dir.join(format!("{stem}_stderr.json"))))?;

    let (xs, w) = g.to_x_space();
    let x_file = format!("{stem}_x.bin");
    runtime(write_grid(&dir.join(&x_file), xs.len(), g.cols(), g.eps, g.t, &real_payload(&w)))?;
    let xs_car = GridSidecar { kind: "wigner_x".into(), data_file: x_file, rows: Axis::of("x", &xs), pairings: vec![], ..base };
    runtime(xs_car.write(&dir.join(format!("{stem}_x.json"))))?;
    Ok(sidecar)
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<i32> {
    let disp = a.chain.dispersion()?;
    let eps = a.eps.unwrap_or(1.0 / a.n_modes.max(1) as f64);
    let control = match (&a.pulse_width, &a.control) {
        (Some(w), _) => Control::Impulsive(Pulse::new(*w, eps)?),
        (None, Some(p)) => Control::Feedback(read_control_kernel(p, a.dt)?),
        (None, None) => Control::None,
    };
    let config = SimConfig {
        disp,
        n_modes: a.n_modes,
        eps,
        nu: a.nu,
        temperature: a.temperature,
        dt: a.dt,
        n_realizations: a.realizations,
        seed: a.seed,
        control,
        step_cap: a.step_cap,
        batch: 32,
    };
    config.validate()?;
    if !(a.horizon > 0.0) || a.snapshots.iter().any(|&t| !(t >= 0.0 && t <= a.horizon)) {
        return Err(Failure::input("horizon must be positive and snapshots must lie in [0, horizon]"));
    }
    let measure = match a.initial {
        InitialArg::Zero => InitialMeasure::Zero,
        InitialArg::Thermal => InitialMeasure::Thermal { temperature: a.init_temperature.unwrap_or(a.temperature), margin: a.margin },
        InitialArg::Packet => InitialMeasure::WavePacket {
            packet: WavePacket { x0: a.x0, sigma_x: a.sigma_x, k0: a.k0, mass: a.mass },
            margin: a.margin,
        },
    };
    let battery = TestFunction::battery(a.battery_k.unwrap_or(a.k0).abs());
    let obs = Observers { energy_every: a.energy_every, wigner_times: a.snapshots.clone(), battery: battery.clone() };
    let run = || run_ensemble(&config, &measure, a.horizon, &obs);
    let out = match a.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::input(e.to_string()))?
            .install(run),
        None => run(),
    };
    let out = out.map_err(|e| match e {
        Error::BudgetExceeded { .. } => Failure { code: EXIT_RUNTIME, message: e.to_string() },
        e => e.into(),
    })?;

    ensure_dir(&a.out)?;
    let rows: Vec<Vec<f64>> = out.energy.iter().map(|r| vec![r.t_macro, r.mean_energy, r.stderr]).collect();
    runtime(write_csv(&a.out.join("energy.csv"), "energy", &["t_macro", "mean_energy", "stderr"], &rows))?;
    let mut snapshots = Vec::new();
    for g in &out.wigner {
        let sidecar = write_wigner(&a.out, g)?;
        snapshots.push(SnapshotEntry { t: g.t, sidecar });
    }
    let manifest = RunManifest { schema: "run/v1".into(), config, initial: a.initial, measure, horizon: a.horizon, battery, snapshots };
    write_json(&a.out.join("run.json"), &manifest)?;
    Ok(EXIT_OK)
}

fn load_snapshot(dir: &Path, entry: &SnapshotEntry) -> CliResult<WignerGrid> {
    let car = runtime(GridSidecar::read(&dir.join(&entry.sidecar)))?;
    let file = runtime(read_grid(&dir.join(&car.data_file)))?;
    let n = file.cols;
    if file.rows != 2 * n || car.cols.count != n || car.rows.count != file.rows {
        return Err(Failure { code: EXIT_RUNTIME, message: "snapshot dimensions do not match its sidecar".into() });
    }
    let eps = file.eps;
    Ok(WignerGrid {
        t: file.t,
        eps,
        n_modes: n,
        count: car.realizations.unwrap_or(0),
        xi: (0..2 * n).map(|r| (r as f64 - n as f64) / (eps * n as f64)).collect(),
        k: crate::dispersion::torus_grid(n),
        values: file.values,
        stderr: vec![0.0; 2 * n * n],
        pairings: car.pairings,
    })
}

pub fn cmd_compare(a: &CompareArgs) -> CliResult<i32> {
    let text = fs::read_to_string(a.run.join("run.json")).map_err(|e| Failure::input(format!("{}: {e}", a.run.display())))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| Failure::input(format!("run.json: {e}")))?;
    if m.schema != "run/v1" {
        return Err(Failure::input(format!("unknown run schema {}", m.schema)));
    }
    let entry = match a.time {
        Some(t) => m.snapshots.iter().find(|s| (s.t - t).abs() < 1e-9).ok_or_else(|| {
            Failure { code: EXIT_RUNTIME, message: format!("no snapshot at t = {t}") }
        })?,
        None => m.snapshots.last().ok_or_else(|| Failure::input("run has no snapshots"))?,
    };
    let grid = load_snapshot(&a.run, entry)?;
    let c = &m.config;
    let disp = c.disp;

    let w0: Box<dyn InitialWigner> = match &m.measure {
        InitialMeasure::Zero => Box::new(ZeroInitial),
        InitialMeasure::Thermal { temperature, .. } => Box::new(ConstantInitial(*temperature)),
        InitialMeasure::WavePacket { packet, .. } => Box::new(PacketInitial::new(*packet, c.eps)),
    };
    let zero = |_: f64| Complex64::new(0.0, 0.0);
    let pulse_f;
    let kernel_f;
    let control = match &c.control {
        Control::None => KineticControl::Impulsive { nu: c.nu, script_f: &zero },
        Control::Impulsive(p) => {
            let p = *p;
            pulse_f = move |k: f64| p.script_f(disp.omega(k));
            KineticControl::Impulsive { nu: c.nu, script_f: &pulse_f }
        }
        Control::Feedback(kern) => {
            let kern = kern.clone();
            kernel_f = move |k: f64| {
                let (co, si) = half_line_transforms(&kern.samples, kern.dt, &[disp.omega(k)])[0];
                Complex64::new(co, -si)
            };
            KineticControl::Feedback { nu: c.nu, fhat: &kernel_f }
        }
    };
    let model = KineticModel { disp, temperature: c.temperature, w0: w0.as_ref(), control };
    let half = 0.5 * c.ring_length();
    let slice = model.at(grid.t, half);

    ensure_dir(&a.out)?;
    let mut rows = Vec::new();
    for (id, o) in m.battery.iter().enumerate() {
        let sim = grid.pairings.get(id).copied().unwrap_or(PairingStat { id, mean: grid.pair(o), stderr: 0.0 });
        let closed = runtime(slice.pair(o))?;
        rows.push(vec![id as f64, sim.mean, closed, (sim.mean - closed).abs(), sim.stderr]);
    }
    runtime(write_csv(
        &a.out.join("compare.csv"),
        "compare",
        &["test_fn_id", "simulated", "closed_form", "abs_diff", "stderr"],
        &rows,
    ))?;

    let mut frac_rows = Vec::new();
    if let InitialMeasure::WavePacket { packet, .. } = &m.measure {
        let opts = FractionOptions { margin: a.margin, half_length: half, ..FractionOptions::default() };
        let measured = runtime(energy_fractions(&grid, packet.k0, packet.mass, &opts))?;
        let theory = match &c.control {
            Control::Feedback(_) => {
                let f = match control {
                    KineticControl::Feedback { fhat, .. } => fhat(packet.k0),
                    _ => unreachable!(),
                };
                crate::rates::rates_feedback(&disp, f, packet.k0)?
            }
            _ => rates_uncontrolled(&disp, c.nu, packet.k0)?,
        };
        frac_rows.push(vec![
            packet.k0,
            measured.transmitted,
            measured.reflected,
            measured.absorbed,
            theory.r_t,
            theory.r_r,
            theory.r_a,
        ]);
    }
    runtime(write_csv(
        &a.out.join("fractions.csv"),
        "fractions",
        &["k0", "measured_t", "measured_r", "measured_a", "theory_t", "theory_r", "theory_a"],
        &frac_rows,
    ))?;

    // closed-form field next to the snapshot, for plotting
    let n = c.n_modes;
    let xs: Vec<f64> = (0..2 * n).map(|i| -half + (i as f64 + 0.5) * half / n as f64).collect();
    let ks: Vec<f64> = (0..n).map(|j| -0.5 + (j as f64 + 0.5) / n as f64).collect();
    let field = runtime(model.field(grid.t, &xs, &ks))?;
    let stem = format!("kinetic_t{:.4}", grid.t);
    runtime(write_grid(&a.out.join(format!("{stem}.bin")), xs.len(), ks.len(), c.eps, grid.t, &field.to_bytes()))?;
    let car = GridSidecar {
        schema: "grid/v1".into(),
        kind: "kinetic".into(),
        data_file: format!("{stem}.bin"),
        eps: c.eps,
        t: grid.t,
        rows: Axis::of("x", &xs),
        cols: Axis::of("k", &ks),
        realizations: None,
        atom_weight: field.atom_weight.clone(),
        atom_position: field.atom_position.clone(),
        pairings: vec![],
    };
    runtime(car.write(&a.out.join(format!("{stem}.json"))))?;
    Ok(EXIT_OK)
}
