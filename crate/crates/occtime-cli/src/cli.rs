//! Command definitions, handlers, and the exit-code contract.
//!
//! Exit codes partition the error classes:
//!
//! * `0` — success
//! * `1` — internal numeric failures with no dedicated class
//! * `2` — invalid flags, config files, or unusable input/output files
//! * `3` — quadrature non-convergence
//! * `4` — the requested point or orbit is not in a stable sliding region
//! * `5` — correlated transverse/manifold noise where independence is required
//! * `6` — a simulated path left the floating range
//! * `7` — density grids with disjoint supports

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use occtime::montecarlo::{build_histogram, simulate_filippov, simulate_two_valued, RecordMode, SimConfig};
use occtime::montecarlo::l1_distance;
use occtime::occupation::{
    arcsine_pdf, constant_drift_pdf, occupation_pdf_longtime, occupation_pdf_zero,
    OccupationDensity, TwoValuedDriftSpec,
};
use occtime::sliding_long::{covariance, FilippovSystem, LongtimeDensity, NoiseSpec};
use occtime::sliding_short::{frozen_params_from_system, orthogonal_pdf, parallel_pdf, FrozenDriftParams};
use occtime::{DensityGrid, Error, Result};

use crate::checks::{self, CheckOutcome};
use crate::config::{self, BuiltSystem};
use crate::output::{
    format_value, manifest_path, read_csv_grid, sha256_hex, write_csv, write_density_grid,
    write_json, write_manifest, RunManifest,
};

/// Occupation-time laws of Brownian motion with two-valued drift and
/// transitional densities near stable sliding manifolds.
#[derive(Debug, Parser)]
#[command(name = "occtime", version, about, max_term_width = 100)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the occupation-time density of scalar Brownian motion
    /// whose drift switches sign at the origin.
    OccupationPdf(OccupationPdfArgs),
    /// Tabulate a transitional density near the sliding manifold of a
    /// piecewise-smooth system.
    SlidingPdf(SlidingPdfArgs),
    /// Sample paths by Euler-Maruyama and write a histogram.
    Simulate(SimulateArgs),
    /// Measure the distance between two density grids.
    Compare(CompareArgs),
    /// Regenerate the figure-scale datasets and their checks.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct OccupationPdfArgs {
    /// Drift toward the switching point while x < 0.
    #[arg(long = "aL", allow_negative_numbers = true)]
    pub a_l: f64,
    /// Drift toward the switching point while x > 0 (the drift there is -aR).
    #[arg(long = "aR", allow_negative_numbers = true)]
    pub a_r: f64,
    /// Starting position.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x0: f64,
    /// Horizon time.
    #[arg(long = "t", allow_negative_numbers = true)]
    pub t: f64,
    /// Number of interior grid points.
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    /// Output CSV path; atoms and the manifest land next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Use the long-horizon closed form instead of the exact density.
    #[arg(long, conflicts_with = "special")]
    pub asymptotic: bool,
    /// Use a closed-form special case instead of the exact density.
    #[arg(long, value_enum)]
    pub special: Option<SpecialLaw>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpecialLaw {
    /// Driftless motion (requires --aL 0 --aR 0).
    Arcsine,
    /// Equal and opposite rates (requires --aL -a --aR a).
    ConstantDrift,
}

#[derive(Debug, Args)]
pub struct SlidingPdfArgs {
    /// JSON system configuration (builtin_example or piecewise_affine).
    #[arg(long)]
    pub config: PathBuf,
    /// Horizon time.
    #[arg(long = "t", allow_negative_numbers = true)]
    pub t: f64,
    /// Which transitional density to tabulate.
    #[arg(long, value_enum)]
    pub mode: SlidingMode,
    /// Number of grid points (per axis for long-joint).
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    /// Output CSV path; sidecars and the manifest land next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SlidingMode {
    /// Manifold-coordinate density on the diffusive time scale.
    ShortParallel,
    /// Transverse-coordinate density on the diffusive time scale.
    ShortOrthogonal,
    /// Joint (x, y) density on the drift time scale.
    LongJoint,
    /// Manifold marginal on the drift time scale.
    LongMarginalY,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON system configuration (any kind).
    #[arg(long)]
    pub config: PathBuf,
    /// Number of independent paths.
    #[arg(long)]
    pub paths: usize,
    /// Euler-Maruyama step size.
    #[arg(long)]
    pub dt: f64,
    /// Horizon time.
    #[arg(long = "t", allow_negative_numbers = true)]
    pub t: f64,
    /// Base RNG seed; each path uses an independent stream of it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Which per-path statistic to histogram.
    #[arg(long, value_enum, default_value = "occupation")]
    pub record: RecordChoice,
    /// Number of histogram bins.
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Output CSV path (center,count,density); the manifest lands next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the raw histogrammed samples as little-endian f64.
    #[arg(long)]
    pub raw: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RecordChoice {
    /// Time spent at or above the switching point.
    Occupation,
    /// Final state: x(t) for the scalar system, the first manifold
    /// coordinate for piecewise-smooth systems.
    State,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// CSV grid holding the analytic curve.
    #[arg(long)]
    pub analytic: PathBuf,
    /// CSV grid holding the empirical curve (histogram files work as-is).
    #[arg(long)]
    pub empirical: PathBuf,
    #[arg(long, value_enum)]
    pub metric: MetricChoice,
    /// Output JSON report path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional acceptance threshold recorded with a verdict in the report.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricChoice {
    /// Integral of the absolute difference over the grid overlap.
    L1,
    /// Largest distribution-function gap over the grid overlap.
    Ks,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Which figure-scale dataset to regenerate.
    #[arg(long, value_enum)]
    pub figure: FigureChoice,
    /// Directory for the datasets, summary.json, and manifest.json.
    #[arg(long)]
    pub outdir: PathBuf,
    /// Sampling budget: desk is the acceptance scale, paper the full scale.
    #[arg(long, value_enum, default_value = "desk")]
    pub budget: BudgetChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureChoice {
    /// Occupation-density curves on scaled axes for a fixed drift pair.
    #[value(name = "1")]
    One,
    /// Manifold histograms vs the short- and long-horizon curves.
    #[value(name = "2")]
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BudgetChoice {
    /// 10^4 paths at dt = 1e-4.
    Desk,
    /// 10^5 paths at dt = 1e-5 (slow).
    Paper,
}

/// Parses and executes one invocation, returning the process exit code.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let ctx = RunContext {
        command: argv.iter().skip(1).cloned().collect(),
        started: Instant::now(),
    };
    let result = match &cli.command {
        Command::OccupationPdf(args) => run_occupation_pdf(args, &ctx),
        Command::SlidingPdf(args) => run_sliding_pdf(args, &ctx),
        Command::Simulate(args) => run_simulate(args, &ctx),
        Command::Compare(args) => run_compare(args, &ctx),
        Command::Reproduce(args) => run_reproduce(args, &ctx),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            config::exit_code_for(&err)
        }
    }
}

struct RunContext {
    command: Vec<String>,
    started: Instant,
}

impl RunContext {
    /// SHA-256 of the canonical parameter line, for commands without a
    /// config file.
    fn parameter_hash(&self) -> String {
        sha256_hex(self.command.join(" ").as_bytes())
    }

    fn write_manifest_for(
        &self,
        manifest_file: &Path,
        config_sha256: String,
        seed: Option<u64>,
        outputs: &[PathBuf],
    ) -> Result<()> {
        let manifest = RunManifest {
            command: self.command.clone(),
            config_sha256,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        };
        write_manifest(manifest_file, &manifest)
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}

fn ensure_horizon(t: f64) -> Result<()> {
    ensure(t.is_finite() && t > 0.0, || {
        format!("--t must be positive and finite, got {t}")
    })
}

fn ensure_grid(n: usize) -> Result<()> {
    ensure(n >= 2, || format!("--grid must be at least 2, got {n}"))
}

/// Inclusive linear grid with n points.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

#[derive(serde::Serialize)]
struct AtomsSidecar {
    atom_at_zero: f64,
    atom_at_t: f64,
}

fn run_occupation_pdf(args: &OccupationPdfArgs, ctx: &RunContext) -> Result<()> {
    ensure_horizon(args.t)?;
    ensure_grid(args.grid)?;
    for (name, v) in [("--aL", args.a_l), ("--aR", args.a_r), ("--x0", args.x0)] {
        ensure(v.is_finite(), || format!("{name} must be finite, got {v}"))?;
    }
    let (t, n) = (args.t, args.grid);
    // Interior cell centers: the density diverges like an inverse square
    // root at the exact endpoints, so the tabulation samples (i+1/2) t / n.
    let centers: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * t / n as f64).collect();
    let mut atom_at_zero = 0.0;
    let mut atom_at_t = 0.0;
    let values: Vec<f64> = match (args.special, args.asymptotic) {
        (Some(SpecialLaw::Arcsine), _) => {
            ensure(args.a_l == 0.0 && args.a_r == 0.0, || {
                "--special arcsine describes driftless motion; set --aL 0 --aR 0".into()
            })?;
            ensure(args.x0 == 0.0, || {
                "--special arcsine starts at the origin; set --x0 0".into()
            })?;
            centers
                .iter()
                .map(|&tau| arcsine_pdf(tau, t))
                .collect::<Result<_>>()?
        }
        (Some(SpecialLaw::ConstantDrift), _) => {
            ensure(args.a_l == -args.a_r, || {
                format!(
                    "--special constant-drift needs equal and opposite rates \
                     (--aL {} --aR {}), got --aL {}",
                    -args.a_r, args.a_r, args.a_l
                )
            })?;
            ensure(args.x0 == 0.0, || {
                "--special constant-drift starts at the origin; set --x0 0".into()
            })?;
            centers
                .iter()
                .map(|&tau| constant_drift_pdf(tau, t, args.a_r))
                .collect::<Result<_>>()?
        }
        (None, true) => {
            ensure(args.x0 == 0.0, || {
                "--asymptotic applies to paths started on the switching point; set --x0 0".into()
            })?;
            centers
                .iter()
                .map(|&tau| occupation_pdf_longtime(tau, t, args.a_l, args.a_r))
                .collect::<Result<_>>()?
        }
        (None, false) => {
            let spec = TwoValuedDriftSpec::new(args.a_l, args.a_r, args.x0, t)?;
            if args.x0 == 0.0 {
                centers
                    .iter()
                    .map(|&tau| occupation_pdf_zero(tau, &spec))
                    .collect::<Result<_>>()?
            } else {
                let law = OccupationDensity::new(spec)?;
                atom_at_zero = law.atom_at_zero;
                atom_at_t = law.atom_at_t;
                centers
                    .iter()
                    .map(|&tau| law.density(tau))
                    .collect::<Result<_>>()?
            }
        }
    };
    let grid = DensityGrid::new("tau", centers, values, BTreeMap::new())?;
    write_density_grid(&args.out, &grid)?;
    let atoms_path = args.out.with_extension("atoms.json");
    write_json(
        &atoms_path,
        &AtomsSidecar {
            atom_at_zero,
            atom_at_t,
        },
    )?;
    let outputs = vec![args.out.clone(), atoms_path];
    ctx.write_manifest_for(
        &manifest_path(&args.out),
        ctx.parameter_hash(),
        None,
        &outputs,
    )
}

/// Transverse grid half-widths: a few stationary decay lengths plus the
/// diffusive spread, the latter capped at its equilibration value.
fn orthogonal_range(params: &FrozenDriftParams, t: f64) -> (f64, f64) {
    let c = params.transverse_scale();
    let big_t = t / c;
    let half = |a: f64| {
        let settled = (1.0 / (a * a)).min(big_t);
        3.0 / a + 3.0 * settled.sqrt()
    };
    (-c * half(params.a_l), c * half(params.a_r))
}

/// Manifold grid for the diffusive scale: both drift candidates of the
/// mean plus six standard deviations of the manifold noise.
fn parallel_range(params: &FrozenDriftParams, t: f64) -> (f64, f64) {
    let mu_l = params.y0[0] + params.b_l[0] * t;
    let mu_r = params.y0[0] + params.b_r[0] * t;
    let sigma = (params.epsilon * t * params.gamma[0][0]).max(0.0).sqrt();
    let pad = 6.0 * sigma + 1e-9 * (1.0 + mu_l.abs().max(mu_r.abs()));
    (mu_l.min(mu_r) - pad, mu_l.max(mu_r) + pad)
}

fn sliding_trajectory_rows(
    system: &FilippovSystem,
    noise: &NoiseSpec,
    y0: &[f64],
    t: f64,
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let m = system.manifold_dimension();
    let sliding = covariance(system, noise, y0, t, t / 2000.0)?;
    let mut header = vec!["t".to_string()];
    for i in 0..m {
        header.push(format!("y_s_{i}"));
    }
    for i in 0..m {
        for j in 0..m {
            header.push(format!("theta_{i}_{j}"));
        }
    }
    let rows = sliding
        .node_states()
        .into_iter()
        .map(|state| {
            let mut row = Vec::with_capacity(1 + m + m * m);
            row.push(state.t);
            row.extend_from_slice(&state.y_s);
            for i in 0..m {
                for j in 0..m {
                    row.push(state.theta[i][j]);
                }
            }
            row
        })
        .collect();
    Ok((header, rows))
}

fn run_sliding_pdf(args: &SlidingPdfArgs, ctx: &RunContext) -> Result<()> {
    ensure_horizon(args.t)?;
    ensure_grid(args.grid)?;
    let (cfg, cfg_bytes) = config::load(&args.config)?;
    let built = config::build(&cfg)?;
    let BuiltSystem::Sliding { system, noise, y0 } = built else {
        return Err(Error::Domain(
            "kind \"two_valued\" has no sliding manifold; use a builtin_example or \
             piecewise_affine config"
            .into(),
        ));
    };
    let m = system.manifold_dimension();
    let one_dimensional = || {
        ensure(m == 1, || {
            format!("this mode tabulates a one-dimensional manifold grid, but the system has {m} manifold coordinates")
        })
    };
    let t = args.t;
    let mut outputs = vec![args.out.clone()];
    match args.mode {
        SlidingMode::ShortParallel => {
            one_dimensional()?;
            let params = frozen_params_from_system(&system, &noise, &y0)?;
            let (lo, hi) = parallel_range(&params, t);
            let ys = linspace(lo, hi, args.grid);
            let values = ys
                .iter()
                .map(|&y| parallel_pdf(&[y], t, &params))
                .collect::<Result<Vec<f64>>>()?;
            let grid = DensityGrid::new("y", ys, values, BTreeMap::new())?;
            write_density_grid(&args.out, &grid)?;
        }
        SlidingMode::ShortOrthogonal => {
            let params = frozen_params_from_system(&system, &noise, &y0)?;
            let (lo, hi) = orthogonal_range(&params, t);
            let xs = linspace(lo, hi, args.grid);
            let values = xs
                .iter()
                .map(|&x| orthogonal_pdf(x, t, &params))
                .collect::<Result<Vec<f64>>>()?;
            let grid = DensityGrid::new("x", xs, values, BTreeMap::new())?;
            write_density_grid(&args.out, &grid)?;
        }
        SlidingMode::LongMarginalY => {
            one_dimensional()?;
            let density = LongtimeDensity::new(&system, &noise, &y0, t, t / 2000.0)?;
            let state = density.state();
            let mu = state.y_s[0];
            let sigma = (noise.epsilon() * state.theta[0][0]).max(0.0).sqrt();
            let pad = 6.0 * sigma + 1e-9 * (1.0 + mu.abs());
            let ys = linspace(mu - pad, mu + pad, args.grid);
            let values = ys
                .iter()
                .map(|&y| density.marginal_y(&[y]))
                .collect::<Result<Vec<f64>>>()?;
            let grid = DensityGrid::new("y", ys, values, BTreeMap::new())?;
            write_density_grid(&args.out, &grid)?;
            let trajectory_path = args.out.with_extension("trajectory.csv");
            let (header, rows) = sliding_trajectory_rows(&system, &noise, &y0, t)?;
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            write_csv(&trajectory_path, &header_refs, rows)?;
            outputs.push(trajectory_path);
        }
        SlidingMode::LongJoint => {
            one_dimensional()?;
            let density = LongtimeDensity::new(&system, &noise, &y0, t, t / 2000.0)?;
            let state = density.state();
            let bv = system.stable_boundary_at(&state.y_s)?;
            let c = noise.epsilon() * noise.alpha();
            let xs = linspace(-4.0 * c / bv.a_l, 4.0 * c / bv.a_r, args.grid);
            let mu = state.y_s[0];
            let sigma = (noise.epsilon() * state.theta[0][0]).max(0.0).sqrt();
            let pad = 6.0 * sigma + 1e-9 * (1.0 + mu.abs());
            let ys = linspace(mu - pad, mu + pad, args.grid);
            let mut rows = Vec::with_capacity(args.grid * args.grid);
            for &x in &xs {
                for &y in &ys {
                    rows.push(vec![x, y, density.joint(x, &[y])?]);
                }
            }
            write_csv(&args.out, &["x", "y", "density"], rows)?;
            let trajectory_path = args.out.with_extension("trajectory.csv");
            let (header, t_rows) = sliding_trajectory_rows(&system, &noise, &y0, t)?;
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            write_csv(&trajectory_path, &header_refs, t_rows)?;
            outputs.push(trajectory_path);
        }
    }
    ctx.write_manifest_for(
        &manifest_path(&args.out),
        sha256_hex(&cfg_bytes),
        None,
        &outputs,
    )
}

fn run_simulate(args: &SimulateArgs, ctx: &RunContext) -> Result<()> {
    ensure_horizon(args.t)?;
    ensure(args.paths >= 1, || "--paths must be at least 1".into())?;
    ensure(args.dt.is_finite() && args.dt > 0.0 && args.dt <= args.t, || {
        format!("--dt must be positive and at most --t, got {}", args.dt)
    })?;
    ensure(args.bins >= 1, || "--bins must be at least 1".into())?;
    let (cfg, cfg_bytes) = config::load(&args.config)?;
    let built = config::build(&cfg)?;
    let sim_cfg = SimConfig::new(
        args.paths,
        args.dt,
        args.t,
        args.seed,
        RecordMode::FinalStateAndOccupation,
    )?;
    let samples: Vec<f64> = match &built {
        BuiltSystem::TwoValued(tv) => {
            let spec = TwoValuedDriftSpec::new(tv.a_l, tv.a_r, tv.x0, args.t)?;
            let run = simulate_two_valued(&spec, &sim_cfg)?;
            match args.record {
                RecordChoice::Occupation => run.occupation,
                RecordChoice::State => run.x_final,
            }
        }
        BuiltSystem::Sliding { system, noise, y0 } => {
            let run = simulate_filippov(system, noise, y0, &sim_cfg)?;
            match args.record {
                RecordChoice::Occupation => run.occupation,
                RecordChoice::State => run.y_final.into_iter().map(|y| y[0]).collect(),
            }
        }
    };
    let range = match args.record {
        RecordChoice::Occupation => (0.0, args.t),
        RecordChoice::State => checks::padded_range(&samples),
    };
    let hist = build_histogram(&samples, args.bins, range)?;
    let centers = hist.bin_centers();
    let densities = hist.normalized_density();
    let rows = centers
        .iter()
        .zip(hist.counts())
        .zip(&densities)
        .map(|((&c, &count), &d)| vec![c, count as f64, d]);
    write_csv(&args.out, &["center", "count", "density"], rows)?;
    let mut outputs = vec![args.out.clone()];
    if let Some(raw_path) = &args.raw {
        let mut bytes = Vec::with_capacity(samples.len() * 8);
        for &s in &samples {
            bytes.extend_from_slice(&s.to_le_bytes());
        }
        crate::output::atomic_write(raw_path, &bytes)?;
        outputs.push(raw_path.clone());
    }
    ctx.write_manifest_for(
        &manifest_path(&args.out),
        sha256_hex(&cfg_bytes),
        Some(args.seed),
        &outputs,
    )
}

#[derive(serde::Serialize)]
struct CompareReport {
    metric: String,
    value: f64,
    analytic: String,
    empirical: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pass: Option<bool>,
}

fn run_compare(args: &CompareArgs, ctx: &RunContext) -> Result<()> {
    let analytic = read_csv_grid(&args.analytic)?;
    let empirical = read_csv_grid(&args.empirical)?;
    let (metric, value) = match args.metric {
        MetricChoice::L1 => ("l1", l1_distance(&analytic, &empirical)?),
        MetricChoice::Ks => ("ks", checks::grid_ks_distance(&analytic, &empirical)?),
    };
    let report = CompareReport {
        metric: metric.to_string(),
        value,
        analytic: args.analytic.display().to_string(),
        empirical: args.empirical.display().to_string(),
        threshold: args.threshold,
        pass: args.threshold.map(|th| value <= th),
    };
    write_json(&args.out, &report)?;
    println!("{metric} = {}", format_value(value));
    ctx.write_manifest_for(
        &manifest_path(&args.out),
        ctx.parameter_hash(),
        None,
        &[args.out.clone()],
    )
}

#[derive(serde::Serialize)]
struct ReproduceSummary {
    figure: u8,
    budget: String,
    checks: Vec<CheckOutcome>,
    all_pass: bool,
}

fn time_label(t: f64) -> String {
    format!("{t}").replace('.', "p")
}

fn run_reproduce(args: &ReproduceArgs, ctx: &RunContext) -> Result<()> {
    std::fs::create_dir_all(&args.outdir)
        .map_err(|e| Error::Domain(format!("cannot create {}: {e}", args.outdir.display())))?;
    let budget_name = match args.budget {
        BudgetChoice::Desk => "desk",
        BudgetChoice::Paper => "paper",
    };
    let (figure, seed, (mut outputs, checks)) = match args.figure {
        FigureChoice::One => (1, None, reproduce_figure_one(&args.outdir)?),
        FigureChoice::Two => (2, Some(7), reproduce_figure_two(&args.outdir, args.budget)?),
    };
    let all_pass = checks.iter().all(|c| c.pass);
    let summary = ReproduceSummary {
        figure,
        budget: budget_name.to_string(),
        checks,
        all_pass,
    };
    let summary_path = args.outdir.join("summary.json");
    write_json(&summary_path, &summary)?;
    outputs.push(summary_path);
    for line in &summary.checks {
        println!(
            "{}: {} (value {}, threshold {})",
            line.name,
            if line.pass { "pass" } else { "FAIL" },
            format_value(line.value),
            format_value(line.threshold),
        );
    }
    ctx.write_manifest_for(
        &args.outdir.join("manifest.json"),
        ctx.parameter_hash(),
        seed,
        &outputs,
    )
}

/// Occupation-density curves for rates (2, 1) on scaled axes (tau/t,
/// t * density) at five horizons, plus the closed-form cross-checks and
/// the long-horizon Gaussian comparison.
fn reproduce_figure_one(outdir: &Path) -> Result<(Vec<PathBuf>, Vec<CheckOutcome>)> {
    let (a_l, a_r) = (2.0, 1.0);
    let horizons = [0.1, 0.3, 1.0, 3.0, 10.0];
    let mut outputs = Vec::new();
    for &t in &horizons {
        let spec = TwoValuedDriftSpec::new(a_l, a_r, 0.0, t)?;
        let n = 512;
        let rows = (0..n)
            .map(|i| {
                let tau = (i as f64 + 0.5) * t / n as f64;
                Ok(vec![tau / t, t * occupation_pdf_zero(tau, &spec)?])
            })
            .collect::<Result<Vec<_>>>()?;
        let path = outdir.join(format!("fig1_density_t{}.csv", time_label(t)));
        write_csv(&path, &["tau_over_t", "t_times_density"], rows)?;
        outputs.push(path);
    }
    let mut checks_out = Vec::new();
    checks_out.push(checks::check(
        "arcsine-collapse-max-diff",
        checks::arcsine_collapse_max_diff()?,
        1e-10,
    ));
    for a in [0.5, 1.0, 2.0] {
        checks_out.push(checks::check(
            format!("constant-drift-max-diff-a{}", time_label(a)),
            checks::constant_drift_max_diff(a)?,
            1e-6,
        ));
    }
    let moments = checks::longtime_moments(a_l, a_r, 10.0)?;
    let mean_target = 20.0 / 3.0;
    let std_target = 10.0f64.sqrt() / 3.0;
    checks_out.push(checks::check(
        "longtime-mean-rel-err",
        (moments.mean - mean_target).abs() / mean_target,
        0.02,
    ));
    checks_out.push(checks::check(
        "longtime-std-rel-err",
        (moments.std - std_target).abs() / std_target,
        0.02,
    ));
    checks_out.push(checks::check(
        "longtime-l1-to-gaussian",
        moments.l1_to_gaussian,
        0.05,
    ));
    Ok((outputs, checks_out))
}

/// Manifold histograms of the built-in example against the short-time
/// parallel density and the long-horizon marginal, per panel horizon.
fn reproduce_figure_two(
    outdir: &Path,
    budget: BudgetChoice,
) -> Result<(Vec<PathBuf>, Vec<CheckOutcome>)> {
    let system = FilippovSystem::builtin_example();
    let noise = config::builtin_default_noise()?;
    let y0 = vec![2.0];
    let (paths, dt) = match budget {
        BudgetChoice::Desk => (10_000, 1e-4),
        BudgetChoice::Paper => (100_000, 1e-5),
    };
    let seed = 7;
    let bins = 50;
    let curve_points = 160;
    let params = frozen_params_from_system(&system, &noise, &y0)?;
    let mut outputs = Vec::new();
    let mut checks_out = Vec::new();
    for &t in &[0.1, 0.5, 1.0, 2.0] {
        let label = time_label(t);
        let cfg = SimConfig::new(paths, dt, t, seed, RecordMode::FinalStateAndOccupation)?;
        let run = simulate_filippov(&system, &noise, &y0, &cfg)?;
        let samples: Vec<f64> = run.y_final.iter().map(|y| y[0]).collect();
        let hist = build_histogram(&samples, bins, checks::padded_range(&samples))?;
        let hist_path = outdir.join(format!("fig2_hist_t{label}.csv"));
        let centers = hist.bin_centers();
        let densities = hist.normalized_density();
        write_csv(
            &hist_path,
            &["center", "count", "density"],
            centers
                .iter()
                .zip(hist.counts())
                .zip(&densities)
                .map(|((&c, &count), &d)| vec![c, count as f64, d]),
        )?;
        outputs.push(hist_path);

        let (lo, hi) = parallel_range(&params, t);
        let ys = linspace(lo, hi, curve_points);
        let short_values = ys
            .iter()
            .map(|&y| parallel_pdf(&[y], t, &params))
            .collect::<Result<Vec<f64>>>()?;
        let short_path = outdir.join(format!("fig2_short_t{label}.csv"));
        write_density_grid(
            &short_path,
            &DensityGrid::new("y", ys, short_values, BTreeMap::new())?,
        )?;
        outputs.push(short_path);

        let density = LongtimeDensity::new(&system, &noise, &y0, t, t / 2000.0)?;
        let state = density.state();
        let mu = state.y_s[0];
        let sigma = (noise.epsilon() * state.theta[0][0]).max(0.0).sqrt();
        let pad = 6.0 * sigma + 1e-9 * (1.0 + mu.abs());
        let ys = linspace(mu - pad, mu + pad, curve_points);
        let long_values = ys
            .iter()
            .map(|&y| density.marginal_y(&[y]))
            .collect::<Result<Vec<f64>>>()?;
        let long_path = outdir.join(format!("fig2_long_t{label}.csv"));
        write_density_grid(
            &long_path,
            &DensityGrid::new("y", ys, long_values, BTreeMap::new())?,
        )?;
        outputs.push(long_path);

        if t == 0.1 {
            checks_out.push(checks::check(
                "short-parallel-l1-t0p1",
                checks::short_parallel_l1(&samples, t, bins, &params)?,
                0.1,
            ));
        }
        if t == 2.0 {
            checks_out.push(checks::check(
                "long-marginal-l1-t2",
                checks::long_marginal_l1(&samples, bins, &density)?,
                0.1,
            ));
        }
    }
    Ok((outputs, checks_out))
}
