//! `phimin`: catenary profiles, width tables, hypothesis checks, graph solves
//! and verification suites for translation-weighted minimal surfaces.
//!
//! Exit status: 0 on success, 1 when a verification fails or a computation
//! cannot finish, 2 on usage errors.

mod manifest;
mod svg;

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use phimin_core::experiments::{
    decay_bound_check, eta_quotient_extremum_check, moving_plane_check, perturbed_cylinder_build,
    quotient_formula_check, PerturbedCylinder, Strip, UbarFamily,
};
use phimin_core::extended::fmt_real;
use phimin_core::geometry::{
    identity_residuals, identity_residuals_inside, interior_residual_norm, phi_minimal_residual,
};
use phimin_core::pde::{
    default_half_extent, make_boundary_from_profile, solve_graph_equation, uniqueness_experiment,
    BoundaryPerturbation,
};
use phimin_core::profile::{integrate_profile, width_table};
use phimin_core::weight::{check_hypotheses, check_hypotheses_on};
use phimin_core::{
    BoundaryData, Error, GraphPatch, Grid, ProfileOptions, ProfileSolution, SolveOptions,
    SolveReport, WeightSpec,
};

use manifest::Manifest;

const THREADS_VAR: &str = "PHIMIN_THREADS";

const WEIGHT_SCHEMA: &str = r#"weight JSON (inline, or @path to a file):
  {"family": "identity"}
  {"family": "linear", "k": <k > 0>}
  {"family": "quadratic"}
  {"family": "alpha_log", "alpha": <alpha > 0>}
  {"family": "arctan"}
  {"family": "user_table", "points": [[x, phi], ...]}
optional: "reflected": true  (uses -phi)"#;

/// Observed convergence order required of the identity residuals when the
/// identities suite refines its own solve.
const MIN_ORDER: f64 = 1.8;

const BOUNDARY_MODEL: &str =
    "Dirichlet data from the catenary profile at height h on a finite rectangle, standing in for the asymptotic condition";

#[derive(Parser)]
#[command(
    name = "phimin",
    version,
    about = "Numerical lab for translation-weighted minimal surfaces"
)]
struct Cli {
    /// Write the run manifest here [default: <first output>.manifest.json]
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Catenary profile through (0, h) as CSV `x,u,uprime`
    Profile(ProfileArgs),
    /// Half-widths for several heights as CSV `h,lambda,direction`
    Width(WidthArgs),
    /// Structural hypotheses of a weight as JSON
    Hypotheses(HypothesesArgs),
    /// Dirichlet solve with catenary boundary data
    Solve(SolveArgs),
    /// Run a verification suite and report pass/fail as JSON
    Verify(VerifyArgs),
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Solve from several perturbed initial iterates and compare the results
    Uniqueness(UniquenessArgs),
}

#[derive(Args, Serialize)]
struct ProfileArgs {
    #[arg(long)]
    phi: String,
    #[arg(long, allow_hyphen_values = true)]
    h: f64,
    #[arg(long, default_value_t = 1e3)]
    xmax: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct WidthArgs {
    #[arg(long)]
    phi: String,
    #[arg(
        long = "h-list",
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    h_list: Vec<f64>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct HypothesesArgs {
    #[arg(long)]
    phi: String,
    /// Sampling window `a,b` for the phi''/phi' bound
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    interval: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SolveArgs {
    #[arg(long)]
    phi: String,
    #[arg(long, allow_hyphen_values = true)]
    h: f64,
    /// `x0,x1,y0,y1`
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    domain: Vec<f64>,
    /// `nx,ny` (or a single `n`)
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<usize>,
    /// Amplitude of the y-dependent boundary perturbation
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    perturb: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 60)]
    max_iter: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Suite {
    Quotient,
    MovingPlane,
    Decay,
    Extremum,
    Identities,
}

impl Suite {
    fn default_tol(self) -> f64 {
        match self {
            Suite::Quotient | Suite::MovingPlane => 1e-10,
            Suite::Decay => 1e-12,
            Suite::Extremum => 1e-8,
            // only used for a user-supplied patch; solved patches are judged
            // by their convergence order
            Suite::Identities => 1e-2,
        }
    }
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    #[arg(long)]
    phi: String,
    #[arg(long, allow_hyphen_values = true)]
    h: f64,
    /// Pass threshold [default depends on the suite]
    #[arg(long)]
    tol: Option<f64>,
    /// Graph patch JSON to check instead of solving one
    #[arg(long)]
    patch: Option<PathBuf>,
    /// `x0,x1,y0,y1` of the solved patch [default: ±0.75 L x ±1, L the half-width]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    domain: Option<Vec<f64>>,
    /// `nx,ny` [default: 41 for strip suites, 33 for patch suites]
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    perturb: f64,
    /// Position of the reflection plane (moving-plane suite)
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t: f64,
    /// Amplitude of the built-in normal-graph families (strip suites)
    #[arg(long, default_value_t = 0.01, allow_hyphen_values = true)]
    eps: f64,
    #[arg(long = "solve-tol", default_value_t = 1e-10)]
    solve_tol: f64,
    /// Largest graph-equation residual accepted as phi-minimal
    #[arg(long = "minimal-tol", default_value_t = 1e-8)]
    minimal_tol: f64,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct UniquenessArgs {
    #[arg(long)]
    phi: String,
    #[arg(long, allow_hyphen_values = true)]
    h: f64,
    #[arg(long, default_value_t = 65)]
    grid: usize,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0,0.05,0.2",
        allow_hyphen_values = true
    )]
    amps: Vec<f64>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Agreement and |eta_2| threshold
    #[arg(long, default_value_t = 1e-8)]
    threshold: f64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Passed,
    Failed,
}

impl Status {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Passed
        } else {
            Status::Failed
        }
    }

    fn code(self) -> i32 {
        match self {
            Status::Passed => 0,
            Status::Failed => 1,
        }
    }
}

/// Output bookkeeping for one command.
struct Run {
    manifest: Manifest,
}

impl Run {
    /// Writes `text` to `path`, or to stdout when there is no path.
    fn emit(&mut self, path: Option<&Path>, text: &str) -> Result<()> {
        match path {
            Some(p) => self.write_file(p, text),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                Ok(stdout.flush()?)
            }
        }
    }

    fn write_file(&mut self, path: &Path, text: &str) -> Result<()> {
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(path.to_owned());
        Ok(())
    }

    fn weight(&mut self, text: &str) -> Result<WeightSpec> {
        let spec = parse_weight(text)?;
        self.manifest.weight = Some(spec.config());
        Ok(spec)
    }

    fn tolerance(&mut self, name: &'static str, value: f64) {
        self.manifest.tolerances.insert(name, value);
    }
}

fn parse_weight(text: &str) -> Result<WeightSpec> {
    let body = match text.strip_prefix('@') {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| usage(format!("reading weight file {path}: {e}")))?,
        None => text.to_owned(),
    };
    WeightSpec::from_json(&body).map_err(|e| usage(format!("{e}\n\n{WEIGHT_SCHEMA}")))
}

fn parse_domain(values: &[f64]) -> Result<[f64; 4]> {
    match *values {
        [x0, x1, y0, y1] => Ok([x0, x1, y0, y1]),
        _ => Err(usage(format!(
            "--domain takes x0,x1,y0,y1, got {} values",
            values.len()
        ))),
    }
}

fn parse_grid(values: &[usize]) -> Result<[usize; 2]> {
    match *values {
        [n] => Ok([n, n]),
        [nx, ny] => Ok([nx, ny]),
        _ => Err(usage(format!(
            "--grid takes nx,ny, got {} values",
            values.len()
        ))),
    }
}

fn make_grid(domain: [f64; 4], shape: [usize; 2]) -> Result<Grid> {
    let [x0, x1, y0, y1] = domain;
    Grid::new([x0, x1], [y0, y1], shape[0], shape[1]).map_err(|e| usage(e.to_string()))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string(value)? + "\n")
}

fn csv_line(fields: &[String]) -> String {
    fields.join(",") + "\n"
}

fn threads_from_env() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(None);
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring the thread pool")?;
            Ok(Some(n))
        }
        _ => Err(usage(format!(
            "{THREADS_VAR} must be a positive integer, got {raw:?}"
        ))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv = std::env::args_os()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match run(cli, argv) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            if let Some(u) = e.downcast_ref::<UsageError>() {
                eprintln!("usage error: {u}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli, argv: Vec<String>) -> Result<Status> {
    let threads = threads_from_env()?;
    let name = match &cli.command {
        Command::Profile(_) => "profile",
        Command::Width(_) => "width",
        Command::Hypotheses(_) => "hypotheses",
        Command::Solve(_) => "solve",
        Command::Verify(_) => "verify",
        Command::Experiment(ExperimentCommand::Uniqueness(_)) => "experiment uniqueness",
    };
    let mut run = Run {
        manifest: Manifest::new(name, argv, threads),
    };
    let (status, parameters) = match &cli.command {
        Command::Profile(a) => (profile(&mut run, a)?, serde_json::to_value(a)?),
        Command::Width(a) => (width(&mut run, a)?, serde_json::to_value(a)?),
        Command::Hypotheses(a) => (hypotheses(&mut run, a)?, serde_json::to_value(a)?),
        Command::Solve(a) => (solve(&mut run, a)?, serde_json::to_value(a)?),
        Command::Verify(a) => (verify(&mut run, a)?, serde_json::to_value(a)?),
        Command::Experiment(ExperimentCommand::Uniqueness(a)) => {
            (uniqueness(&mut run, a)?, serde_json::to_value(a)?)
        }
    };
    run.manifest.parameters = parameters;
    run.manifest.status = status.code();
    if let Some(path) = run.manifest.destination(cli.manifest.as_deref()) {
        let text = serde_json::to_string_pretty(&run.manifest)? + "\n";
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(status)
}

fn profile_options(run: &mut Run, x_cap: f64, tol: f64) -> ProfileOptions {
    let opts = ProfileOptions {
        x_cap,
        tol,
        ..ProfileOptions::default()
    };
    run.tolerance("profile_rtol", opts.rtol);
    run.tolerance("profile_atol", opts.atol);
    run.tolerance("profile_width_tol", opts.tol);
    run.tolerance("profile_x_cap", opts.x_cap);
    opts
}

fn profile(run: &mut Run, a: &ProfileArgs) -> Result<Status> {
    let spec = run.weight(&a.phi)?;
    if !(a.xmax > 0.0 && a.tol > 0.0) {
        return Err(usage("--xmax and --tol must be positive"));
    }
    let opts = profile_options(run, a.xmax, a.tol);
    let sol = integrate_profile(&spec, a.h, &opts)?;
    let samples = sol.mirrored();
    let mut csv = String::from("x,u,uprime\n");
    for s in &samples {
        csv += &csv_line(&[fmt_real(s.x), fmt_real(s.u), fmt_real(s.u_prime)]);
    }
    run.emit(a.out.as_deref(), &csv)?;
    if let Some(path) = &a.plot {
        let points: Vec<_> = samples.iter().map(|s| (s.x, s.u)).collect();
        let title = format!("profile, h = {}", fmt_real(a.h));
        run.write_file(path, &svg::line_plot(&title, "x", "u", &points))?;
    }
    eprintln!(
        "half-width {} ({}), slope limit {}",
        fmt_real(sol.lambda_estimate),
        serde_json::to_value(sol.termination)?
            .as_str()
            .unwrap_or_default(),
        fmt_real(sol.slope_limit)
    );
    Ok(Status::Passed)
}

fn width(run: &mut Run, a: &WidthArgs) -> Result<Status> {
    let spec = run.weight(&a.phi)?;
    run.tolerance("width_tol", a.tol);
    let table = width_table(&spec, &a.h_list, a.tol)?;
    let mut csv = String::from("h,lambda,direction\n");
    for row in &table.rows {
        csv += &csv_line(&[
            fmt_real(row.h),
            fmt_real(row.lambda),
            table.predicted.as_str().to_owned(),
        ]);
    }
    run.emit(a.out.as_deref(), &csv)?;
    Ok(Status::Passed)
}

fn hypotheses(run: &mut Run, a: &HypothesesArgs) -> Result<Status> {
    let spec = run.weight(&a.phi)?;
    let report = match a.interval.as_deref() {
        None => check_hypotheses(&spec),
        Some(&[lo, hi]) if lo < hi => check_hypotheses_on(&spec, [lo, hi]),
        Some(_) => return Err(usage("--interval takes a,b with a < b")),
    };
    run.emit(a.out.as_deref(), &to_json(&report)?)?;
    Ok(Status::Passed)
}

/// Boundary data from the profile at `h`, with the perturbation
/// `amp cos(2 pi x2 / (y1 - y0)) (1 - (x1 / X)^2)`, `X = max |x1|`, which
/// vanishes on the x-edges and is even in `x1`.
fn profile_boundary(
    spec: &WeightSpec,
    h: f64,
    grid: Grid,
    amplitude: f64,
) -> Result<(ProfileSolution, BoundaryData, BoundaryPerturbation)> {
    let profile = integrate_profile(spec, h, &ProfileOptions::default())?;
    let perturbation = BoundaryPerturbation {
        amplitude,
        period: 0.5 * (grid.y1 - grid.y0),
        length: grid.x0.abs().max(grid.x1.abs()),
    };
    let boundary =
        make_boundary_from_profile(&profile, grid, Some(&perturbation)).map_err(|e| match e {
            Error::SlabViolation { .. } | Error::InvalidGrid(_) | Error::GridTooSmall { .. } => {
                usage(e.to_string())
            }
            other => other.into(),
        })?;
    Ok((profile, boundary, perturbation))
}

fn solve_options(run: &mut Run, tol: f64, max_iterations: usize) -> SolveOptions {
    let opts = SolveOptions {
        tol,
        max_iterations,
        ..SolveOptions::default()
    };
    run.tolerance("solver_tol", opts.tol);
    run.tolerance("solver_max_iterations", opts.max_iterations as f64);
    run.tolerance("solver_damping_floor", opts.damping_floor);
    run.tolerance("solver_armijo", opts.armijo);
    opts
}

/// Solves and keeps the last iterate when Newton stalls.
fn solve_patch(
    spec: &WeightSpec,
    boundary: &BoundaryData,
    opts: &SolveOptions,
) -> Result<(GraphPatch, SolveReport)> {
    match solve_graph_equation(spec, boundary, None, opts) {
        Ok(out) => Ok(out),
        Err(Error::NoConvergence(best)) => Ok(*best),
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    h: f64,
    domain: [f64; 4],
    grid: [usize; 2],
    perturbation: BoundaryPerturbation,
    boundary_model: &'static str,
    /// max-norm of the graph-equation residual on interior nodes
    interior_residual: f64,
    solver: &'a SolveReport,
}

fn solve(run: &mut Run, a: &SolveArgs) -> Result<Status> {
    let spec = run.weight(&a.phi)?;
    let domain = parse_domain(&a.domain)?;
    let shape = parse_grid(&a.grid)?;
    let grid = make_grid(domain, shape)?;
    let opts = solve_options(run, a.tol, a.max_iter);
    let (_, boundary, perturbation) = profile_boundary(&spec, a.h, grid, a.perturb)?;
    let (patch, report) = solve_patch(&spec, &boundary, &opts)?;
    let summary = SolveSummary {
        h: a.h,
        domain,
        grid: shape,
        perturbation,
        boundary_model: BOUNDARY_MODEL,
        interior_residual: interior_residual_norm(&patch, &spec)?,
        solver: &report,
    };
    if let Some(path) = &a.out {
        run.write_file(path, &to_json(&patch)?)?;
    }
    if a.report.is_some() || a.out.is_none() {
        run.emit(a.report.as_deref(), &to_json(&summary)?)?;
    }
    eprintln!(
        "{} after {} iterations, residual {:.3e}",
        if report.converged {
            "converged"
        } else {
            "not converged"
        },
        report.iterations,
        report.final_residual_norm
    );
    Ok(Status::from_bool(report.converged))
}

fn builtin_families(eps: f64) -> [UbarFamily; 3] {
    [
        UbarFamily::SinQuadratic { eps },
        UbarFamily::CosCubic { eps },
        UbarFamily::Wave {
            eps,
            k: 2.0,
            phase: 0.3,
        },
    ]
}

fn family_name(f: &UbarFamily) -> String {
    serde_json::to_value(f)
        .ok()
        .and_then(|v| v.get("family").and_then(Value::as_str).map(str::to_owned))
        .unwrap_or_default()
}

/// Perturbed cylinders on the strip `[0.5 L, 0.95 L] x [0, 2 pi]`, `L` the
/// half-width or the computed profile extent.
fn strip_cylinders(
    spec: &WeightSpec,
    h: f64,
    eps: f64,
    shape: [usize; 2],
) -> Result<(Strip, Vec<PerturbedCylinder>)> {
    let profile = integrate_profile(spec, h, &ProfileOptions::default())?;
    let extent = profile.lambda_estimate.min(profile.x_end());
    let strip = Strip {
        x_lo: 0.5 * extent,
        x_hi: 0.95 * extent,
        y_lo: 0.0,
        y_hi: 2.0 * std::f64::consts::PI,
    };
    let cylinders = builtin_families(eps)
        .into_iter()
        .map(|f| perturbed_cylinder_build(&profile, f, strip, shape[0], shape[1]))
        .collect::<phimin_core::Result<Vec<_>>>()?;
    Ok((strip, cylinders))
}

/// Patch for the patch-based suites: read from `--patch`, or solved with
/// profile data on `--domain` (default `[-d, d] x [-1, 1]`, `d` from
/// `default_half_extent`).
fn verify_patch(
    run: &mut Run,
    spec: &WeightSpec,
    a: &VerifyArgs,
    shape: Option<[usize; 2]>,
) -> Result<(GraphPatch, Value)> {
    if let Some(path) = &a.patch {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("reading {}: {e}", path.display())))?;
        let patch = GraphPatch::from_json(&text).map_err(|e| usage(e.to_string()))?;
        return Ok((patch, json!({ "file": path })));
    }
    let domain = match &a.domain {
        Some(d) => parse_domain(d)?,
        None => {
            let profile = integrate_profile(spec, a.h, &ProfileOptions::default())?;
            let half = default_half_extent(&profile);
            [-half, half, -1.0, 1.0]
        }
    };
    let shape = match shape {
        Some(s) => s,
        None => parse_grid(a.grid.as_deref().unwrap_or(&[33]))?,
    };
    let grid = make_grid(domain, shape)?;
    let opts = solve_options(run, a.solve_tol, SolveOptions::default().max_iterations);
    let (_, boundary, perturbation) = profile_boundary(spec, a.h, grid, a.perturb)?;
    let (patch, report) = solve_patch(spec, &boundary, &opts)?;
    if !report.converged {
        anyhow::bail!(
            "solve did not converge: residual {:.3e} after {} iterations",
            report.final_residual_norm,
            report.iterations
        );
    }
    let source = json!({
        "solve": {
            "domain": domain,
            "grid": shape,
            "perturbation": perturbation,
            "boundary_model": BOUNDARY_MODEL,
            "iterations": report.iterations,
            "final_residual_norm": report.final_residual_norm,
        }
    });
    Ok((patch, source))
}

fn verify(run: &mut Run, a: &VerifyArgs) -> Result<Status> {
    let spec = run.weight(&a.phi)?;
    let tol = a.tol.unwrap_or(a.suite.default_tol());
    run.tolerance("pass_tol", tol);
    if a.plot.is_some() && a.suite == Suite::Decay {
        return Err(usage("the decay suite has no field to plot"));
    }
    let strip_shape = || parse_grid(a.grid.as_deref().unwrap_or(&[41]));
    let (passed, details, plot) = match a.suite {
        Suite::Quotient => {
            let (strip, cylinders) = strip_cylinders(&spec, a.h, a.eps, strip_shape()?)?;
            let mut ok = true;
            let mut worst: f64 = 0.0;
            let mut families = vec![];
            for pc in &cylinders {
                let r = quotient_formula_check(pc, &spec)?;
                ok &= r.denominator_ok && r.is_graph && r.max_discrepancy <= tol;
                worst = worst.max(r.max_discrepancy);
                families
                    .push(json!({ "ubar": pc.ubar, "name": family_name(&pc.ubar), "report": r }));
            }
            let plot = a.plot.as_ref().map(|_| {
                let pc = &cylinders[0];
                let field: Vec<f64> = pc
                    .samples
                    .iter()
                    .map(|s| {
                        let (t1, t2) = pc.tangents(s, &spec);
                        let n = [t1[2] * t2[0] - t1[0] * t2[2], t1[0] * t2[1] - t1[1] * t2[0]];
                        n[0] / n[1]
                    })
                    .collect();
                svg::heatmap(
                    &format!("eta2/eta3, {}", family_name(&pc.ubar)),
                    &pc.grid,
                    &field,
                )
            });
            let details = json!({ "strip": strip, "max_discrepancy": worst, "families": families });
            (ok, details, plot)
        }
        Suite::Decay => {
            let (strip, cylinders) = strip_cylinders(&spec, a.h, a.eps, strip_shape()?)?;
            let mut ok = true;
            let mut families = vec![];
            for pc in &cylinders {
                let r = decay_bound_check(pc)?;
                ok &= r.passed && r.max_excess <= tol;
                families
                    .push(json!({ "ubar": pc.ubar, "name": family_name(&pc.ubar), "report": r }));
            }
            // the edge limits are only guaranteed under the uniqueness hypotheses
            let hypotheses_hold = check_hypotheses(&spec).uniqueness_hypotheses_hold();
            let details =
                json!({ "strip": strip, "hypotheses_hold": hypotheses_hold, "families": families });
            (ok, details, None)
        }
        Suite::MovingPlane => {
            let (patch, source) = verify_patch(run, &spec, a, None)?;
            let r = moving_plane_check(&patch, a.t)?;
            // at the symmetry plane the gap vanishes; beyond it it is one-signed
            let ok = if a.t == 0.0 {
                r.max_abs_gap <= tol
            } else {
                r.min_gap >= -tol
            };
            let plot = a.plot.as_ref().map(|_| {
                svg::heatmap(
                    &format!("reflection gap, t = {}", fmt_real(a.t)),
                    &patch.grid,
                    &r.gaps,
                )
            });
            let details = json!({
                "patch": source,
                "t": r.t,
                "nodes": r.nodes,
                "min_gap": r.min_gap,
                "max_gap": r.max_gap,
                "max_abs_gap": r.max_abs_gap,
            });
            (ok, details, plot)
        }
        Suite::Extremum => {
            let (patch, source) = verify_patch(run, &spec, a, None)?;
            run.tolerance("minimal_tol", a.minimal_tol);
            match eta_quotient_extremum_check(&patch, &spec, a.minimal_tol) {
                Ok(r) => {
                    let ok = r.passed && r.interior_sup_abs <= r.boundary_sup_abs + tol;
                    let plot = a
                        .plot
                        .as_ref()
                        .map(|_| svg::heatmap("eta2/eta3", &patch.grid, &r.quotient));
                    let details = json!({
                        "patch": source,
                        "residual": r.residual,
                        "boundary_min": r.boundary_min,
                        "boundary_max": r.boundary_max,
                        "interior_min": r.interior_min,
                        "interior_max": r.interior_max,
                        "boundary_sup_abs": r.boundary_sup_abs,
                        "interior_sup_abs": r.interior_sup_abs,
                        "hypothesis_violation": r.hypothesis_violation,
                    });
                    (ok, details, plot)
                }
                Err(e @ Error::NotMinimal { .. }) => (
                    false,
                    json!({ "patch": source, "error": e.to_string() }),
                    None,
                ),
                Err(e) => return Err(e.into()),
            }
        }
        Suite::Identities if a.patch.is_some() => {
            let (patch, source) = verify_patch(run, &spec, a, None)?;
            run.tolerance("minimal_tol", a.minimal_tol);
            match identity_residuals(&patch, &spec, a.minimal_tol) {
                Ok(r) => {
                    let ok =
                        r.fundamental().iter().all(|(_, v)| *v <= tol) && r.mean_curvature <= tol;
                    let plot = a
                        .plot
                        .as_ref()
                        .map(|_| residual_heatmap(&patch, &spec))
                        .transpose()?;
                    (ok, json!({ "patch": source, "residuals": r }), plot)
                }
                Err(e @ Error::NotMinimal { .. }) => (
                    false,
                    json!({ "patch": source, "error": e.to_string() }),
                    None,
                ),
                Err(e) => return Err(e.into()),
            }
        }
        Suite::Identities => {
            run.tolerance("minimal_tol", a.minimal_tol);
            run.tolerance("min_order", MIN_ORDER);
            let coarse = parse_grid(a.grid.as_deref().unwrap_or(&[33]))?;
            let fine = [2 * coarse[0] - 1, 2 * coarse[1] - 1];
            let mut levels = vec![];
            let mut residuals = vec![];
            let mut inset = [0.0; 2];
            let mut plot = None;
            for shape in [coarse, fine] {
                let (patch, source) = verify_patch(run, &spec, a, Some(shape))?;
                if shape == coarse {
                    inset = [2.0 * patch.grid.dx(), 2.0 * patch.grid.dy()];
                }
                match identity_residuals_inside(&patch, &spec, a.minimal_tol, inset) {
                    Ok(r) => {
                        levels.push(json!({ "patch": source, "residuals": r }));
                        residuals.push(r);
                    }
                    Err(e @ Error::NotMinimal { .. }) => {
                        levels.push(json!({ "patch": source, "error": e.to_string() }));
                    }
                    Err(e) => return Err(e.into()),
                }
                if a.plot.is_some() {
                    plot = Some(residual_heatmap(&patch, &spec)?);
                }
            }
            // residuals at the solver's level count as identically zero
            let floor = a.solve_tol.max(1e-12);
            let mut orders = serde_json::Map::new();
            let mut ok = residuals.len() == 2;
            if let [c, f] = residuals.as_slice() {
                let pairs = c
                    .fundamental()
                    .into_iter()
                    .chain([("mean_curvature", c.mean_curvature)])
                    .zip(
                        f.fundamental()
                            .into_iter()
                            .chain([("mean_curvature", f.mean_curvature)]),
                    );
                for ((name, rc), (_, rf)) in pairs {
                    let order = (rc / rf).log2();
                    let good = rf <= floor || (rc <= floor && rf <= floor) || order >= MIN_ORDER;
                    ok &= good;
                    orders.insert(name.to_owned(), json!({ "order": order, "passed": good }));
                }
            }
            let details = json!({
                "inset": inset,
                "levels": levels,
                "orders": orders,
                "min_order": MIN_ORDER,
                "zero_floor": floor,
            });
            (ok, details, plot)
        }
    };
    let report = json!({
        "suite": a.suite,
        "weight": spec.config(),
        "h": a.h,
        "tol": tol,
        "passed": passed,
        "details": details,
    });
    run.emit(a.report.as_deref(), &to_json(&report)?)?;
    if let (Some(path), Some(svg)) = (&a.plot, plot) {
        run.write_file(path, &svg)?;
    }
    eprintln!("{:?}: {}", a.suite, if passed { "pass" } else { "FAIL" });
    Ok(Status::from_bool(passed))
}

/// Graph-equation residual with the boundary ring blanked out.
fn residual_heatmap(patch: &GraphPatch, spec: &WeightSpec) -> Result<String> {
    let mut field = phi_minimal_residual(patch, spec)?;
    for (k, v) in field.iter_mut().enumerate() {
        let (i, j) = patch.grid.coords(k);
        if patch.grid.is_boundary(i, j) {
            *v = f64::NAN;
        }
    }
    Ok(svg::heatmap("graph-equation residual", &patch.grid, &field))
}

fn uniqueness(run: &mut Run, a: &UniquenessArgs) -> Result<Status> {
    let spec = run.weight(&a.phi)?;
    if a.grid < 5 {
        return Err(usage("--grid must be at least 5"));
    }
    if a.amps.is_empty() {
        return Err(usage("--amps needs at least one amplitude"));
    }
    let opts = solve_options(run, a.tol, SolveOptions::default().max_iterations);
    run.tolerance("threshold", a.threshold);
    let report = uniqueness_experiment(&spec, a.h, a.grid, &a.amps, &opts, a.threshold)?;
    run.emit(a.report.as_deref(), &to_json(&report)?)?;
    eprintln!(
        "pairwise agreement {:.3e}, max |eta_2| {:.3e}: {}",
        report.pairwise_agreement,
        report.max_abs_eta2,
        if report.passed { "pass" } else { "FAIL" }
    );
    Ok(Status::from_bool(report.passed))
}
